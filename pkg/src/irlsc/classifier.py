"""Regularized least squares classification, batch and incremental.

Labels are dense integers ``0 .. T-1``. A linear model ``W`` (d x T) scores
an input ``x`` as ``W.T @ x`` and predicts the argmax, ties going to the
lowest class index.

``IncrementalRLSC`` keeps the Cholesky factor ``R`` of
``A = lam * I + sum(x x^T)`` and ``b = X^T Y``. Each update costs O(d^2),
independent of the number of examples seen, and a never-seen label is
added as a new zero column of ``b``. Recoding rescales column ``t`` of the
solution by ``(k / k_t) ** alpha``.
"""

import warnings

import numpy as np

from irlsc import linalg

CHECKPOINT_VERSION = 1


class NoClassesError(RuntimeError):
    """The model has not observed any labelled example yet."""


class ClassOrderError(ValueError):
    """A label skipped ahead of the next unused class index."""


def gamma_diagonal(counts, k, alpha):
    """Diagonal of the recoding matrix: ``(k / counts[t]) ** alpha``."""
    counts = np.asarray(counts, dtype=np.float64)
    if np.any(counts < 1):
        raise ValueError(f"every class needs at least one example, counts={counts.tolist()}")
    if counts.sum() != k:
        raise ValueError(f"k={k} does not match sum(counts)={counts.sum():g}")
    return (k / counts) ** alpha


def gamma_matrix(counts, k, alpha):
    return np.diag(gamma_diagonal(counts, k, alpha))


def decision_scores(W, x):
    """``W.T @ x`` for one input, or one row of scores per input row."""
    W = np.asarray(W, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != W.shape[0]:
        raise linalg.DimensionError(f"input has dimension {x.shape[-1]}, model expects {W.shape[0]}")
    return x @ W


def predict(W, x):
    """Class index with the highest score; the lowest index wins ties."""
    return np.argmax(decision_scores(W, x), axis=-1)


def one_hot(y, n_classes):
    y = np.asarray(y)
    Y = np.zeros((y.shape[0], n_classes))
    Y[np.arange(y.shape[0]), y] = 1.0
    return Y


def _check_batch(X, y, n_classes=None):
    X = linalg.as_matrix(X, "X")
    y = np.asarray(y)
    if X.shape[0] == 0:
        raise ValueError("empty training set")
    if y.shape != (X.shape[0],):
        raise linalg.DimensionError(f"y has shape {y.shape}, expected ({X.shape[0]},)")
    if not np.issubdtype(y.dtype, np.integer) or y.min() < 0:
        raise ValueError("labels must be non-negative integers")
    T = int(y.max()) + 1 if n_classes is None else n_classes
    if y.max() >= T:
        raise ValueError(f"label {y.max()} out of range for {T} classes")
    counts = np.bincount(y, minlength=T)
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        warnings.warn(f"classes {missing.tolist()} have no examples; their columns are zero", stacklevel=3)
    return X, y, T, counts


def ridge_from_gram(gram, cross, lam):
    """``(gram + lam I)^{-1} cross`` through a Cholesky factorization."""
    if not lam > 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    A = gram + lam * np.eye(gram.shape[0])
    return linalg.spd_solve(linalg.cholesky(A), cross)


def batch_naive(X, y, lam, n_classes=None):
    """``(X^T X + lam I)^{-1} X^T Y`` with one-hot targets ``Y``."""
    X, y, T, _ = _check_batch(X, y, n_classes)
    return ridge_from_gram(X.T @ X, X.T @ one_hot(y, T), lam)


def batch_recoded(X, y, lam, alpha, n_classes=None):
    """Batch solution with columns scaled by ``(n / n_t) ** alpha``."""
    X, y, T, counts = _check_batch(X, y, n_classes)
    W = ridge_from_gram(X.T @ X, X.T @ one_hot(y, T), lam)
    scale = np.ones(T)
    seen = counts > 0
    scale[seen] = gamma_diagonal(counts[seen], counts[seen].sum(), alpha)
    return W * scale


def rebalanced_gram(X, y, n_classes=None):
    """Weighted cross-products for the rebalanced problem.

    Row ``i`` is weighted by ``n / n_{y_i}``. Returns ``(X^T S X, X^T S Y)``,
    which do not depend on ``lam``.
    """
    X, y, T, counts = _check_batch(X, y, n_classes)
    w = y.shape[0] / counts[y]
    root = np.sqrt(w)[:, None]
    Xs = X * root
    Ys = one_hot(y, T) * root
    return Xs.T @ Xs, Xs.T @ Ys


def batch_rebalanced(X, y, lam, n_classes=None):
    """Inverse-frequency weighted ridge solution.

    Cannot be updated incrementally since every weight changes with each
    new example.
    """
    return ridge_from_gram(*rebalanced_gram(X, y, n_classes), lam)


class IncrementalRLSC:
    """Recursive RLSC with class extension and incremental recoding.

    Parameters
    ----------
    d : int
        Input dimension.
    lam : float
        Ridge regularization, fixed for the lifetime of the model since it
        is baked into the initial factor ``sqrt(lam) * I``.
    alpha : float
        Recoding exponent in [0, 1]; 0 gives plain RLSC, 1 full recoding.

    Attributes
    ----------
    R : ndarray (d, d)
        Upper Cholesky factor of ``lam * I + sum_i x_i x_i^T``.
    counts : ndarray (T,)
        Examples seen per class.
    k : int
        Total examples seen.
    """

    def __init__(self, d, lam, alpha=0.0):
        if int(d) != d or d < 1:
            raise ValueError(f"d must be a positive integer, got {d}")
        if not lam > 0:
            raise ValueError(f"lambda must be positive, got {lam}")
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
        self.d = int(d)
        self.lam = float(lam)
        self.alpha = float(alpha)
        self.R = np.sqrt(self.lam) * np.eye(self.d)
        self._b = np.zeros((self.d, 4))
        self._counts = np.zeros(4, dtype=np.int64)
        self.n_classes = 0
        self.k = 0

    @property
    def b(self):
        """``X^T Y`` accumulated so far, shape (d, T)."""
        return self._b[:, : self.n_classes]

    @property
    def counts(self):
        return self._counts[: self.n_classes]

    def _add_class(self):
        T = self.n_classes
        if T == self._b.shape[1]:
            grow = max(4, T)
            self._b = np.hstack([self._b, np.zeros((self.d, grow))])
            self._counts = np.concatenate([self._counts, np.zeros(grow, dtype=np.int64)])
        self.n_classes = T + 1

    def partial_fit(self, x, y):
        """Absorb one example in O(d^2). ``y`` may be at most ``n_classes``."""
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.d,):
            raise linalg.DimensionError(f"x must have shape ({self.d},), got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("x contains non-finite entries")
        y = int(y)
        if y < 0 or y > self.n_classes:
            raise ClassOrderError(
                f"label {y} is not a known class or the next new one ({self.n_classes})"
            )
        if y == self.n_classes:
            self._add_class()
        self._counts[y] += 1
        self._b[:, y] += x
        linalg.chol_rank_one_update(self.R, x, overwrite=True)
        self.k += 1
        return self

    def fit_stream(self, X, y):
        for xi, yi in zip(X, y):
            self.partial_fit(xi, yi)
        return self

    def gamma(self, alpha=None):
        alpha = self.alpha if alpha is None else alpha
        return gamma_diagonal(self.counts, self.k, alpha)

    def weights(self, alpha=None):
        """``A^{-1} b Gamma^alpha``, shape (d, T). ``alpha`` overrides the
        model's exponent for this call only."""
        if self.n_classes == 0:
            raise NoClassesError("no classes observed yet")
        W = linalg.spd_solve(self.R, self.b)
        return W * self.gamma(alpha)

    def decision_function(self, X, alpha=None):
        return decision_scores(self.weights(alpha), X)

    def predict(self, X, alpha=None):
        return predict(self.weights(alpha), X)

    def copy(self):
        new = object.__new__(type(self))
        new.__dict__.update(self.__dict__)
        new.R = self.R.copy()
        new._b = self._b.copy()
        new._counts = self._counts.copy()
        return new

    def save(self, path):
        """Write a checkpoint (``.npz``); floats are stored at full precision."""
        np.savez(
            path,
            format_version=CHECKPOINT_VERSION,
            lam=self.lam,
            alpha=self.alpha,
            d=self.d,
            n_classes=self.n_classes,
            R=self.R,
            b=self.b,
            counts=self.counts,
            k=self.k,
        )

    @classmethod
    def load(cls, path):
        with np.load(path) as f:
            version = int(f["format_version"])
            if version != CHECKPOINT_VERSION:
                raise ValueError(f"unsupported checkpoint version {version}")
            model = cls(int(f["d"]), float(f["lam"]), float(f["alpha"]))
            T = int(f["n_classes"])
            b, counts = f["b"], f["counts"]
            if b.shape != (model.d, T) or counts.shape != (T,) or f["R"].shape != (model.d, model.d):
                raise ValueError("checkpoint arrays have inconsistent shapes")
            model.R = np.ascontiguousarray(f["R"], dtype=np.float64)
            model._b = np.hstack([b, np.zeros((model.d, 4))])
            model._counts = np.concatenate([counts.astype(np.int64), np.zeros(4, dtype=np.int64)])
            model.n_classes = T
            model.k = int(f["k"])
        if model.counts.sum() != model.k:
            raise ValueError("checkpoint counts do not sum to k")
        return model

    def __repr__(self):
        return (
            f"IncrementalRLSC(d={self.d}, lam={self.lam:g}, alpha={self.alpha:g}, "
            f"n_classes={self.n_classes}, k={self.k})"
        )
