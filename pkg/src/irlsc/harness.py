"""Imbalanced-stream experiments for the naive (N), rebalanced (RB) and
recoded (RC) classifiers.

One trial trains on the balanced classes, then streams examples of the
held-back class and evaluates every method at each checkpoint on a test set
with the same number of examples per class.
"""

import csv
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from irlsc.classifier import IncrementalRLSC, predict, rebalanced_gram, ridge_from_gram
from irlsc.datasets import LabelIndexer, StreamProtocol, build_protocol
from irlsc.model_selection import select_from_table

logger = logging.getLogger(__name__)

METHODS = ("N", "RB", "RC")
METRICS = ("total_acc", "imb_acc", "bal_acc")


class EmptySubsetError(ValueError):
    """An accuracy was requested over zero examples."""


@dataclass(frozen=True)
class Hyper:
    """Candidate regularizations and recoding exponent(s) for RC.

    With several lambdas, each method picks its lambda on the balanced
    validation set at every checkpoint. With several alphas, RC applies the
    largest-alpha rule over the full grid.
    """

    lambdas: tuple = (1.0,)
    alphas: tuple = (1.0,)

    def __post_init__(self):
        object.__setattr__(self, "lambdas", tuple(sorted(float(v) for v in self.lambdas)))
        object.__setattr__(self, "alphas", tuple(sorted(float(v) for v in self.alphas)))
        if not self.lambdas or self.lambdas[0] <= 0:
            raise ValueError("lambdas must be non-empty and positive")
        if not self.alphas or self.alphas[0] < 0 or self.alphas[-1] > 1:
            raise ValueError("alphas must be non-empty and lie in [0, 1]")


def accuracy(pred, truth, only=None, exclude=None):
    """Fraction of exact matches, optionally restricted to the examples whose
    true class is ``only`` or is not ``exclude``."""
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {truth.shape}")
    mask = np.ones(truth.shape, dtype=bool)
    if only is not None:
        mask &= truth == only
    if exclude is not None:
        mask &= truth != exclude
    if not mask.any():
        raise EmptySubsetError("no examples match the class filter")
    return float(np.mean(pred[mask] == truth[mask]))


@dataclass
class TrialResult:
    rows: list = field(default_factory=list)
    update_seconds: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)
    models: dict = field(default_factory=dict)


def _best_lambda(scores):
    # scores: list of (acc, lam), lambdas ascending; ties go to the smaller lambda
    best_acc = max(a for a, _ in scores)
    return next(lam for a, lam in scores if a == best_acc)


def run_trial(data, protocol, trial_seed, methods=METHODS, hyper=None, test_data=None, keep_models=False):
    """Run one trial of the imbalanced-stream protocol.

    N and RC are trained by streaming every example through
    ``IncrementalRLSC.partial_fit`` (balanced phase in shuffled order), and
    share one model per lambda. RB is re-solved in batch at each checkpoint.
    """
    hyper = hyper or Hyper()
    unknown = set(methods) - set(METHODS)
    if unknown:
        raise ValueError(f"unknown methods {sorted(unknown)}")
    split = build_protocol(data, protocol, trial_seed, test_data)
    test_pool = data if test_data is None else test_data
    X_test, y_test = test_pool.X[split.test], test_pool.y[split.test]
    X_val, y_val = data.X[split.balanced_val], data.y[split.balanced_val]
    imb = split.imbalanced_class

    order_seed = np.random.SeedSequence([int(trial_seed), 1])
    order = np.random.default_rng(order_seed).permutation(split.balanced_train)

    indexer = LabelIndexer()
    incremental = "N" in methods or "RC" in methods
    models = {lam: IncrementalRLSC(data.n_features, lam) for lam in hyper.lambdas} if incremental else {}
    result = TrialResult()
    n_updates = 0
    update_time = 0.0
    rb_time = 0.0
    rb_fits = 0

    def feed(idx):
        nonlocal n_updates, update_time
        for i in idx:
            x, yi = data.X[i], indexer.encode(data.y[i])
            for model in models.values():
                t0 = time.perf_counter()
                model.partial_fit(x, yi)
                update_time += time.perf_counter() - t0
                n_updates += 1

    def evaluate(W):
        return indexer.decode(predict(W, X_val)), indexer.decode(predict(W, X_test))

    def record(method, checkpoint, lam, alpha, pred):
        result.rows.append(
            {
                "method": method,
                "checkpoint": checkpoint,
                "lam": lam,
                "alpha": alpha,
                "total_acc": accuracy(pred, y_test),
                "imb_acc": accuracy(pred, y_test, only=imb),
                "bal_acc": accuracy(pred, y_test, exclude=imb),
            }
        )

    feed(order)
    done = 0
    for cp in protocol.checkpoints:
        feed(split.imbalanced_stream[done:cp])
        done = cp

        if incremental:
            # weights for every (lambda, alpha) this checkpoint needs
            alphas = {0.0} | (set(hyper.alphas) if "RC" in methods else set())
            cache = {}
            for lam, model in models.items():
                for a in alphas:
                    W = model.weights(alpha=a)
                    val_pred, test_pred = evaluate(W)
                    cache[lam, a] = (accuracy(val_pred, y_val), test_pred, W)
            if "N" in methods:
                lam = _best_lambda([(cache[lam, 0.0][0], lam) for lam in hyper.lambdas])
                record("N", cp, lam, 0.0, cache[lam, 0.0][1])
                if keep_models:
                    result.models["N", cp] = (cache[lam, 0.0][2], list(indexer.to_external))
            if "RC" in methods:
                if len(hyper.alphas) == 1:
                    a = hyper.alphas[0]
                    lam = _best_lambda([(cache[lam, a][0], lam) for lam in hyper.lambdas])
                else:
                    table = {key: v[0] for key, v in cache.items()}
                    grid_alphas = tuple(sorted(alphas))
                    lam, a, _ = select_from_table(table, hyper.lambdas, grid_alphas)
                record("RC", cp, lam, a, cache[lam, a][1])
                if keep_models:
                    result.models["RC", cp] = (cache[lam, a][2], list(indexer.to_external))

        if "RB" in methods:
            trained = np.concatenate([order, split.imbalanced_stream[:cp]])
            y_codes = np.array([indexer.encode(v) for v in data.y[trained]])
            t0 = time.perf_counter()
            try:
                gram, cross = rebalanced_gram(data.X[trained], y_codes, n_classes=len(indexer))
                fits = {lam: ridge_from_gram(gram, cross, lam) for lam in hyper.lambdas}
            except np.linalg.LinAlgError as exc:
                result.errors.append(f"RB checkpoint {cp}: {exc}")
                logger.error("RB retraining failed at checkpoint %d: %s", cp, exc)
                continue
            rb_time += time.perf_counter() - t0
            rb_fits += 1
            scored = {lam: evaluate(W) for lam, W in fits.items()}
            lam = _best_lambda([(accuracy(scored[lam][0], y_val), lam) for lam in hyper.lambdas])
            record("RB", cp, lam, None, scored[lam][1])
            if keep_models:
                result.models["RB", cp] = (fits[lam], list(indexer.to_external))

    if incremental and n_updates:
        per_update = update_time / n_updates
        for m in ("N", "RC"):
            if m in methods:
                result.update_seconds[m] = per_update
    if rb_fits:
        result.update_seconds["RB"] = rb_time / rb_fits
    return result


@dataclass
class ExperimentResult:
    """Per-trial accuracies for every (method, checkpoint), plus timings.

    ``rows`` holds one dict per (method, checkpoint, trial) with keys
    ``method, checkpoint, trial, total_acc, imb_acc, bal_acc, lam, alpha``.
    """

    rows: list
    methods: tuple
    checkpoints: tuple
    update_seconds: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)
    per_class: dict = field(default_factory=dict)

    def values(self, method, checkpoint, metric):
        return np.array(
            [r[metric] for r in self.rows if r["method"] == method and r["checkpoint"] == checkpoint]
        )

    def stats(self, method, checkpoint, metric):
        v = self.values(method, checkpoint, metric)
        std = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
        return float(np.mean(v)), std

    def summary(self):
        out = {}
        for m in self.methods:
            out[m] = {}
            for cp in self.checkpoints:
                cell = {}
                for metric in METRICS:
                    mean, std = self.stats(m, cp, metric)
                    cell[metric] = {"mean": mean, "std": std}
                out[m][str(cp)] = cell
        return out

    def format_table(self):
        """Percentages with one decimal as ``mean ± std``."""
        head = ["n_imb"] + [f"Total {m}" for m in self.methods] + [f"Imb {m}" for m in self.methods]
        lines = ["  ".join(f"{h:>14}" for h in head)]
        for cp in self.checkpoints:
            cells = [f"{cp:>14}"]
            for metric in ("total_acc", "imb_acc"):
                for m in self.methods:
                    mean, std = self.stats(m, cp, metric)
                    cells.append(f"{100 * mean:>7.1f} ± {100 * std:<4.1f}")
            lines.append("  ".join(cells))
        return "\n".join(lines)

    def write_csv(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["method", "checkpoint", "trial", "total_acc", "imb_acc", "bal_acc"])
            for r in self.rows:
                w.writerow([r["method"], r["checkpoint"], r["trial"]] + [repr(r[m]) for m in METRICS])

    def write_json(self, path):
        with open(path, "w") as f:
            json.dump({"checkpoints": list(self.checkpoints), "summary": self.summary(), "errors": self.errors}, f, indent=2)

    def write_curves(self, path):
        """Mean/std curves per class group (imbalanced, balanced, all)."""
        groups = {"imbalanced": "imb_acc", "balanced": "bal_acc", "all": "total_acc"}
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["group", "method", "checkpoint", "mean", "std"])
            for g, metric in groups.items():
                for m in self.methods:
                    for cp in self.checkpoints:
                        mean, std = self.stats(m, cp, metric)
                        w.writerow([g, m, cp, repr(mean), repr(std)])


def aggregate(trials, methods, checkpoints):
    """Collect trial results into an ``ExperimentResult``."""
    rows, errors = [], []
    times = {}
    for t, trial in enumerate(trials):
        for r in trial.rows:
            rows.append(dict(r, trial=t))
        errors.extend(f"trial {t}: {e}" for e in trial.errors)
        for m, s in trial.update_seconds.items():
            times.setdefault(m, []).append(s)
    seconds = {m: float(np.mean(v)) for m, v in times.items()}
    return ExperimentResult(rows, tuple(methods), tuple(checkpoints), seconds, errors)


def _trial_job(args):
    return run_trial(*args)


def run_experiment(data, protocol, methods=METHODS, hyper=None, test_data=None, n_jobs=1):
    """All trials of one protocol; trials differ only in their seed."""
    seeds = protocol.trial_seeds()
    jobs = [(data, protocol, s, tuple(methods), hyper, test_data) for s in seeds]
    if n_jobs > 1:
        with ProcessPoolExecutor(max_workers=n_jobs) as pool:
            trials = list(pool.map(_trial_job, jobs))
    else:
        trials = []
        for i, job in enumerate(jobs):
            logger.info("trial %d/%d", i + 1, len(jobs))
            trials.append(_trial_job(job))
    return aggregate(trials, methods, protocol.checkpoints)


def rotate_imbalanced(data, protocol, methods=METHODS, hyper=None, test_data=None, n_jobs=1):
    """Run the protocol once per choice of imbalanced class and pool the trials.

    The per-class results are kept in ``per_class``.
    """
    per_class = {}
    rows, errors, times = [], [], {}
    for c, name in enumerate(data.label_names):
        cfg = StreamProtocol(
            imbalanced_class=name,
            n_bal=protocol.n_bal,
            checkpoints=protocol.checkpoints,
            n_test=protocol.n_test,
            n_trials=protocol.n_trials,
            seed=protocol.seed + c,
        )
        res = run_experiment(data, cfg, methods, hyper, test_data, n_jobs)
        per_class[name] = res
        offset = c * protocol.n_trials
        rows.extend(dict(r, trial=r["trial"] + offset, imbalanced_class=name) for r in res.rows)
        errors.extend(f"class {name}: {e}" for e in res.errors)
        for m, s in res.update_seconds.items():
            times.setdefault(m, []).append(s)
    seconds = {m: float(np.mean(v)) for m, v in times.items()}
    return ExperimentResult(rows, tuple(methods), protocol.checkpoints, seconds, errors, per_class)


def timing_probe(d, k_values, repeats=200, n_classes=10, seed=0):
    """Median wall-clock of one ``partial_fit`` after ``k`` prior updates.

    Returns a list of ``(k, median_seconds)``.
    """
    if d < 1:
        raise ValueError("d must be positive")
    rng = np.random.default_rng(seed)
    table = []
    for k in k_values:
        model = IncrementalRLSC(d, 1.0)
        X = rng.standard_normal((k + repeats, d)) / np.sqrt(d)
        y = np.arange(k + repeats) % n_classes
        model.fit_stream(X[:k], y[:k])
        lat = np.empty(repeats)
        for j in range(repeats):
            x, yj = X[k + j], y[k + j]
            t0 = time.perf_counter()
            model.partial_fit(x, yj)
            lat[j] = time.perf_counter() - t0
        table.append((int(k), float(np.median(lat))))
    return table
