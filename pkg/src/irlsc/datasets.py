"""Data ingestion and the imbalanced-stream protocol.

Loaders return a ``LabeledDataset`` whose labels are dense indices into
``label_names`` (the sorted original vocabulary).
"""

import csv
import json
import struct
from dataclasses import dataclass, field

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


class IdxFormatError(ValueError):
    pass


class CapacityError(ValueError):
    """A class has too few examples for the requested protocol."""


@dataclass
class LabeledDataset:
    X: np.ndarray
    y: np.ndarray
    label_names: list = field(default_factory=list)

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.X.ndim != 2:
            raise ValueError(f"X must be 2-D, got shape {self.X.shape}")
        if self.y.shape != (self.X.shape[0],):
            raise ValueError(f"{self.X.shape[0]} rows but {self.y.shape} labels")
        if not self.label_names:
            self.label_names = list(range(int(self.y.max()) + 1 if self.y.size else 0))
        if self.y.size and (self.y.min() < 0 or self.y.max() >= len(self.label_names)):
            raise ValueError("labels must index into label_names")

    def __len__(self):
        return self.X.shape[0]

    @property
    def n_features(self):
        return self.X.shape[1]

    @property
    def n_classes(self):
        return len(self.label_names)

    def subset(self, idx):
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledDataset(self.X[idx], self.y[idx], list(self.label_names))

    def class_index(self, name):
        """Dense index of an original label; accepts its string form as well."""
        for i, n in enumerate(self.label_names):
            if n == name or str(n) == str(name):
                return i
        raise KeyError(f"unknown class {name!r}; known: {self.label_names}")


def _densify(raw):
    names, y = np.unique(np.asarray(raw), return_inverse=True)
    return y.reshape(-1), [n.item() if hasattr(n, "item") else n for n in names]


def _read_header(buf, n_ints, path):
    need = 4 * n_ints
    if len(buf) < need:
        raise IdxFormatError(f"{path}: truncated header, {len(buf)} bytes at offset 0, need {need}")
    return struct.unpack(f">{n_ints}I", buf[:need])


def load_idx(images_path, labels_path):
    """Read an IDX image/label file pair (the MNIST container).

    Pixels are scaled to [0, 1] and each image flattened row-major.
    """
    with open(images_path, "rb") as f:
        img = f.read()
    with open(labels_path, "rb") as f:
        lab = f.read()

    magic, n_img, rows, cols = _read_header(img, 4, images_path)
    if magic != IDX_IMAGES_MAGIC:
        raise IdxFormatError(f"{images_path}: bad magic 0x{magic:08x} at offset 0, expected 0x{IDX_IMAGES_MAGIC:08x}")
    magic, n_lab = _read_header(lab, 2, labels_path)
    if magic != IDX_LABELS_MAGIC:
        raise IdxFormatError(f"{labels_path}: bad magic 0x{magic:08x} at offset 0, expected 0x{IDX_LABELS_MAGIC:08x}")
    if n_img != n_lab:
        raise IdxFormatError(
            f"count mismatch: {images_path} declares {n_img} items at offset 4, {labels_path} declares {n_lab} at offset 4"
        )
    d = rows * cols
    if len(img) - 16 < n_img * d:
        raise IdxFormatError(
            f"{images_path}: truncated payload, {len(img) - 16} bytes from offset 16, need {n_img * d}"
        )
    if len(lab) - 8 < n_lab:
        raise IdxFormatError(f"{labels_path}: truncated payload, {len(lab) - 8} bytes from offset 8, need {n_lab}")

    pixels = np.frombuffer(img, dtype=np.uint8, count=n_img * d, offset=16)
    X = pixels.reshape(n_img, d).astype(np.float64) / 255.0
    raw = np.frombuffer(lab, dtype=np.uint8, count=n_lab, offset=8).astype(np.int64)
    y, names = _densify(raw)
    return LabeledDataset(X, y, names)


def write_idx(images, labels, images_path, labels_path, shape):
    """Write uint8 images (n, rows*cols) and labels as an IDX pair."""
    images = np.asarray(images, dtype=np.uint8)
    labels = np.asarray(labels, dtype=np.uint8)
    rows, cols = shape
    with open(images_path, "wb") as f:
        f.write(struct.pack(">4I", IDX_IMAGES_MAGIC, images.shape[0], rows, cols))
        f.write(images.tobytes())
    with open(labels_path, "wb") as f:
        f.write(struct.pack(">2I", IDX_LABELS_MAGIC, labels.shape[0]))
        f.write(labels.tobytes())


def load_csv(path, label_column="label"):
    """Read a CSV with a header row, numeric feature columns and one label column."""
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header, body = rows[0], [r for r in rows[1:] if r]
    if label_column not in header:
        raise ValueError(f"{path}: no column {label_column!r} in header {header}")
    if not body:
        raise ValueError(f"{path}: no data rows")
    li = header.index(label_column)
    X = np.empty((len(body), len(header) - 1))
    raw = []
    for n, r in enumerate(body, start=2):
        if len(r) != len(header):
            raise ValueError(f"{path}: line {n} has {len(r)} fields, header has {len(header)}")
        raw.append(r[li])
        try:
            X[n - 2] = [float(v) for j, v in enumerate(r) if j != li]
        except ValueError as exc:
            raise ValueError(f"{path}: line {n}: {exc}") from None
    try:
        raw = [int(v) for v in raw]
    except ValueError:
        pass
    y, names = _densify(raw)
    return LabeledDataset(X, y, names)


def save_csv(dataset, path, label_column="label"):
    d = dataset.n_features
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow([f"f{j}" for j in range(d)] + [label_column])
        for x, yi in zip(dataset.X, dataset.y):
            w.writerow([repr(float(v)) for v in x] + [dataset.label_names[yi]])


@dataclass(frozen=True)
class StreamProtocol:
    """Imbalanced-stream experiment configuration.

    ``imbalanced_class`` is given in the dataset's original label vocabulary.
    """

    imbalanced_class: object
    n_bal: int
    checkpoints: tuple = (1, 5, 10, 50, 100, 500)
    n_test: int = 200
    n_trials: int = 10
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "checkpoints", tuple(int(c) for c in self.checkpoints))
        cp = self.checkpoints
        if not cp or cp[0] < 1 or any(b <= a for a, b in zip(cp, cp[1:])):
            raise ValueError(f"checkpoints must be positive and strictly increasing, got {cp}")
        if self.n_bal < 1 or self.n_test < 1 or self.n_trials < 1:
            raise ValueError("n_bal, n_test and n_trials must be positive")

    @property
    def n_val(self):
        return self.n_bal // 5

    def trial_seeds(self):
        return np.random.SeedSequence(self.seed).generate_state(self.n_trials).tolist()


@dataclass
class ProtocolSplit:
    """Index sets of one trial. ``test`` indexes the test pool, which is the
    training pool itself unless a separate test dataset was given."""

    balanced_train: np.ndarray
    balanced_val: np.ndarray
    imbalanced_stream: np.ndarray
    test: np.ndarray
    imbalanced_class: int
    separate_test: bool = False

    def to_json(self):
        return json.dumps(
            {
                "imbalanced_class": int(self.imbalanced_class),
                "separate_test": self.separate_test,
                "balanced_train": self.balanced_train.tolist(),
                "balanced_val": self.balanced_val.tolist(),
                "imbalanced_stream": self.imbalanced_stream.tolist(),
                "test": self.test.tolist(),
            }
        )

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        arr = {k: np.asarray(d[k], dtype=np.int64) for k in ("balanced_train", "balanced_val", "imbalanced_stream", "test")}
        return cls(imbalanced_class=d["imbalanced_class"], separate_test=d["separate_test"], **arr)


def build_protocol(data, cfg, trial_seed, test_data=None):
    """Sample one trial's disjoint train / validation / stream / test sets.

    Balanced classes get ``n_bal`` training and ``n_bal // 5`` validation
    examples; the imbalanced class contributes only an ordered stream of
    ``max(checkpoints)`` examples. Every class gets ``n_test`` test examples,
    drawn from ``test_data`` when given.
    """
    imb = data.class_index(cfg.imbalanced_class)
    if test_data is not None and test_data.label_names != data.label_names:
        raise ValueError("test data uses a different label vocabulary")
    rng = np.random.default_rng(trial_seed)
    same_pool = test_data is None
    n_stream = cfg.checkpoints[-1]

    train, val, test = [], [], []
    stream = None
    for c in range(data.n_classes):
        idx = rng.permutation(np.flatnonzero(data.y == c))
        need = n_stream if c == imb else cfg.n_bal + cfg.n_val
        if same_pool:
            need += cfg.n_test
        if idx.size < need:
            raise CapacityError(
                f"class {data.label_names[c]!r} has {idx.size} examples, protocol needs {need}"
            )
        if c == imb:
            stream = idx[:n_stream]
            rest = idx[n_stream:]
        else:
            train.append(idx[: cfg.n_bal])
            val.append(idx[cfg.n_bal : cfg.n_bal + cfg.n_val])
            rest = idx[cfg.n_bal + cfg.n_val :]
        if same_pool:
            test.append(rest[: cfg.n_test])

    if not same_pool:
        for c in range(test_data.n_classes):
            idx = np.flatnonzero(test_data.y == c)
            if idx.size < cfg.n_test:
                raise CapacityError(
                    f"test class {test_data.label_names[c]!r} has {idx.size} examples, protocol needs {cfg.n_test}"
                )
            test.append(rng.choice(idx, size=cfg.n_test, replace=False))

    def cat(parts):
        return np.concatenate(parts).astype(np.int64) if parts else np.empty(0, dtype=np.int64)

    return ProtocolSplit(
        balanced_train=cat(train),
        balanced_val=cat(val),
        imbalanced_stream=stream.astype(np.int64),
        test=cat(test),
        imbalanced_class=imb,
        separate_test=not same_pool,
    )


class LabelIndexer:
    """Assigns model class indices to external labels in order of first use,
    so a shuffled stream never skips a class index."""

    def __init__(self):
        self.to_model = {}
        self.to_external = []

    def encode(self, label):
        label = int(label)
        if label not in self.to_model:
            self.to_model[label] = len(self.to_external)
            self.to_external.append(label)
        return self.to_model[label]

    def decode(self, indices):
        return np.asarray(self.to_external, dtype=np.int64)[np.asarray(indices)]

    def __len__(self):
        return len(self.to_external)
