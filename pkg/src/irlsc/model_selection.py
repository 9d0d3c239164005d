"""Online selection of the regularization and recoding exponent.

Every ``holdout_interval``-th example is held out for validation and never
trained on. Candidates are scored only on validation examples of classes
that have at least ``well_represented_threshold`` training examples, and the
largest recoding exponent that does not lose accuracy against plain RLSC is
preferred.
"""

import csv
import logging
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from irlsc.classifier import IncrementalRLSC
from irlsc.datasets import LabelIndexer

logger = logging.getLogger(__name__)

DEFAULT_LAMBDAS = tuple(float(v) for v in np.logspace(-6, 2, 12))
DEFAULT_ALPHAS = (0.0, 0.25, 0.5, 0.6, 0.7, 0.9, 1.0)


@dataclass(frozen=True)
class CandidateGrid:
    lambdas: tuple = DEFAULT_LAMBDAS
    alphas: tuple = DEFAULT_ALPHAS

    def __post_init__(self):
        lambdas = tuple(sorted(float(v) for v in self.lambdas))
        alphas = tuple(sorted(float(v) for v in self.alphas))
        if not lambdas or not alphas:
            raise ValueError("candidate grid must not be empty")
        if lambdas[0] <= 0:
            raise ValueError("lambdas must be positive")
        if alphas[0] < 0 or alphas[-1] > 1:
            raise ValueError("alphas must lie in [0, 1]")
        if 0.0 not in alphas:
            raise ValueError("alphas must include 0, the reference model")
        object.__setattr__(self, "lambdas", lambdas)
        object.__setattr__(self, "alphas", alphas)

    def pairs(self):
        return [(lam, a) for lam in self.lambdas for a in self.alphas]


class Selection(NamedTuple):
    lam: float
    alpha: float
    model: IncrementalRLSC
    accuracy: Optional[float]
    fallback: bool = False


def select_from_table(acc, lambdas, alphas):
    """Apply the largest-alpha rule to a table of validation accuracies.

    ``acc`` maps ``(lam, alpha)`` to an accuracy, or ``None`` when nothing
    was eligible for evaluation. The reference bar is the best alpha=0
    accuracy over all lambdas; among the candidates reaching it, the largest
    alpha wins, then the higher accuracy, then the smaller lambda.

    Returns ``(lam, alpha, accuracy)``, or ``None`` if no alpha=0 candidate
    could be evaluated.
    """
    refs = [(acc.get((lam, 0.0)), lam) for lam in lambdas]
    refs = [(a, lam) for a, lam in refs if a is not None]
    if not refs:
        return None
    bar = max(a for a, _ in refs)
    best = None
    for lam in lambdas:
        for alpha in alphas:
            a = acc.get((lam, alpha))
            if a is None or a < bar:
                continue
            key = (alpha, a, -lam)
            if best is None or key > best[0]:
                best = (key, lam, alpha, a)
    _, lam, alpha, a = best
    return lam, alpha, a


class OnlineModelSelector:
    """Trains a lambda x alpha grid online and picks a model on demand.

    Candidates that share a lambda also share one ``IncrementalRLSC``:
    alpha only enters when weights are formed, so their training states
    would be identical.

    Labels are arbitrary integers. They are mapped to model indices in the
    order they first reach training, and ``indexer.decode`` maps a selected
    model's predictions back.
    """

    def __init__(self, d, grid=None, holdout_interval=6, well_represented_threshold=50):
        if holdout_interval < 1:
            raise ValueError("holdout_interval must be at least 1")
        self.grid = grid or CandidateGrid()
        self.holdout_interval = int(holdout_interval)
        self.well_represented_threshold = int(well_represented_threshold)
        self.models = {lam: IncrementalRLSC(d, lam) for lam in self.grid.lambdas}
        self.indexer = LabelIndexer()
        self.val_X = []
        self.val_y = []
        self.n_seen = 0
        self.trace = []

    @property
    def d(self):
        return next(iter(self.models.values())).d

    def observe(self, x, y):
        """Route one example to the validation buffer or to every candidate."""
        self.n_seen += 1
        if self.n_seen % self.holdout_interval == 0:
            self.val_X.append(np.asarray(x, dtype=np.float64))
            self.val_y.append(int(y))
            return self
        t = self.indexer.encode(y)
        for model in self.models.values():
            model.partial_fit(x, t)
        return self

    @property
    def counts(self):
        return next(iter(self.models.values())).counts

    def _validation_codes(self):
        # -1 marks labels never seen in training
        return np.array([self.indexer.to_model.get(v, -1) for v in self.val_y], dtype=np.int64)

    def _eligible(self, codes):
        counts = self.counts
        ok = np.zeros(codes.size, dtype=bool)
        known = codes >= 0
        ok[known] = counts[codes[known]] >= self.well_represented_threshold
        return ok

    def well_represented_accuracy(self, lam, alpha):
        """Validation accuracy on well-represented classes, or ``None`` when
        no validation example qualifies."""
        codes = self._validation_codes()
        ok = self._eligible(codes)
        if not ok.any():
            return None
        X = np.stack(self.val_X)[ok]
        y = codes[ok]
        pred = self.models[lam].predict(X, alpha=alpha)
        return float(np.mean(pred == y))

    def accuracy_table(self):
        return {(lam, a): self.well_represented_accuracy(lam, a) for lam, a in self.grid.pairs()}

    def select(self):
        table = self.accuracy_table()
        self.trace.extend(
            (self.n_seen, lam, a, acc) for (lam, a), acc in sorted(table.items())
        )
        choice = select_from_table(table, self.grid.lambdas, self.grid.alphas)
        if choice is None:
            lam = self.grid.lambdas[0]
            logger.warning("no well-represented validation examples; falling back to lambda=%g, alpha=0", lam)
            return Selection(lam, 0.0, self._snapshot(lam, 0.0), None, fallback=True)
        lam, alpha, acc = choice
        return Selection(lam, alpha, self._snapshot(lam, alpha), acc)

    def _snapshot(self, lam, alpha):
        model = self.models[lam].copy()
        model.alpha = alpha
        return model

    def write_trace(self, path):
        with open(path, "w", newline="") as f:
            w = csv.writer(f, lineterminator="\n")
            w.writerow(["iteration", "lambda", "alpha", "accuracy"])
            for it, lam, a, acc in self.trace:
                w.writerow([it, repr(lam), repr(a), "" if acc is None else repr(acc)])
