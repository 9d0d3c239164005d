import csv

import numpy as np
import pytest

from irlsc.classifier import IncrementalRLSC
from irlsc.model_selection import CandidateGrid, OnlineModelSelector, select_from_table


def blob_stream(rng, n, d=4, T=3, imbalanced=None, n_imb=0):
    """Separable Gaussian blobs; ``imbalanced`` gets only ``n_imb`` rows."""
    means = 3.0 * rng.standard_normal((T, d))
    labels = [t for t in range(T) if t != imbalanced]
    y = np.array(labels * (n // len(labels)))
    rng.shuffle(y)
    if imbalanced is not None:
        y = np.concatenate([y, np.full(n_imb, imbalanced)])
    X = means[y] + rng.standard_normal((y.size, d))
    return X, y


def relabel_first_seen(y):
    mapping = {}
    return np.array([mapping.setdefault(v, len(mapping)) for v in y])


class TestGrid:
    def test_sorted(self):
        g = CandidateGrid(lambdas=(1.0, 0.1), alphas=(1.0, 0.0))
        assert g.lambdas == (0.1, 1.0) and g.alphas == (0.0, 1.0)
        assert len(g.pairs()) == 4

    @pytest.mark.parametrize("kw", [
        dict(lambdas=(), alphas=(0.0,)),
        dict(lambdas=(0.0,), alphas=(0.0,)),
        dict(lambdas=(1.0,), alphas=(0.5,)),
        dict(lambdas=(1.0,), alphas=(0.0, 1.5)),
    ])
    def test_rejects_bad_grid(self, kw):
        with pytest.raises(ValueError):
            CandidateGrid(**kw)


class TestSelectionRule:
    alphas = (0.0, 0.5, 1.0)

    def table(self, values, lam=1.0):
        return {(lam, a): v for a, v in zip(self.alphas, values)}

    def test_ties_with_reference_prefer_larger_alpha(self):
        assert select_from_table(self.table([0.9, 0.9, 0.8]), (1.0,), self.alphas)[1] == 0.5

    def test_all_improve(self):
        assert select_from_table(self.table([0.9, 0.91, 0.92]), (1.0,), self.alphas)[1] == 1.0

    def test_all_degrade(self):
        assert select_from_table(self.table([0.9, 0.89, 0.85]), (1.0,), self.alphas)[1] == 0.0

    def test_bar_is_best_reference_over_lambdas(self):
        acc = {(0.1, 0.0): 0.7, (0.1, 1.0): 0.75, (1.0, 0.0): 0.8, (1.0, 1.0): 0.79}
        lam, alpha, a = select_from_table(acc, (0.1, 1.0), (0.0, 1.0))
        assert (lam, alpha, a) == (1.0, 0.0, 0.8)

    def test_smaller_lambda_breaks_exact_ties(self):
        acc = {(0.1, 0.0): 0.8, (1.0, 0.0): 0.8}
        assert select_from_table(acc, (0.1, 1.0), (0.0,))[0] == 0.1

    def test_higher_accuracy_breaks_alpha_ties(self):
        acc = {(0.1, 0.0): 0.8, (0.1, 1.0): 0.85, (1.0, 0.0): 0.7, (1.0, 1.0): 0.9}
        assert select_from_table(acc, (0.1, 1.0), (0.0, 1.0))[:2] == (1.0, 1.0)

    def test_nothing_evaluable(self):
        assert select_from_table({(1.0, 0.0): None}, (1.0,), (0.0,)) is None


class TestHoldout:
    def test_every_sixth_held_out(self):
        sel = OnlineModelSelector(2, CandidateGrid((1.0,), (0.0,)), holdout_interval=6)
        X = np.arange(24.0).reshape(12, 2)
        y = np.zeros(12, dtype=int)
        for x, t in zip(X, y):
            sel.observe(x, t)
        assert sel.models[1.0].k == 10
        assert len(sel.val_y) == 2
        np.testing.assert_array_equal(np.stack(sel.val_X), X[[5, 11]])

    def test_all_candidates_share_the_training_stream(self):
        rng = np.random.default_rng(0)
        X, y = blob_stream(rng, 30)
        sel = OnlineModelSelector(4, CandidateGrid((0.1, 1.0, 10.0), (0.0, 1.0)), holdout_interval=5)
        for x, t in zip(X, y):
            sel.observe(x, t)
        ks = {m.k for m in sel.models.values()}
        assert ks == {24}

    def test_interval_one_falls_back(self, caplog):
        sel = OnlineModelSelector(2, CandidateGrid((0.5, 2.0), (0.0, 1.0)), holdout_interval=1)
        for i in range(5):
            sel.observe([1.0, float(i)], 0)
        with caplog.at_level("WARNING"):
            s = sel.select()
        assert s.fallback and s.lam == 0.5 and s.alpha == 0.0 and s.accuracy is None
        assert "falling back" in caplog.text

    def test_arbitrary_labels_and_held_out_first_appearance(self):
        sel = OnlineModelSelector(1, CandidateGrid((1.0,), (0.0,)), holdout_interval=2)
        # label 7 first arrives in a held-out slot, then in training
        for x, t in [(1.0, 3), (2.0, 7), (3.0, 7), (4.0, 3)]:
            sel.observe([x], t)
        assert sel.indexer.to_external == [3, 7]
        np.testing.assert_array_equal(sel.counts, [1, 1])
        assert sel.val_y == [7, 3]

    def test_rejects_zero_interval(self):
        with pytest.raises(ValueError):
            OnlineModelSelector(2, holdout_interval=0)


class TestWellRepresented:
    def test_hand_built_buffer(self):
        # class 0 has 60 training rows, class 1 only 5
        rng = np.random.default_rng(1)
        sel = OnlineModelSelector(2, CandidateGrid((1.0,), (0.0,)), holdout_interval=10**9)
        for _ in range(60):
            sel.observe(np.array([1.0, 0.0]) + 0.1 * rng.standard_normal(2), 0)
        for _ in range(5):
            sel.observe(np.array([0.0, 1.0]) + 0.1 * rng.standard_normal(2), 1)
        sel.val_X = [np.array([1.0, 0.0])] * 6 + [np.array([0.0, 1.0])] * 4
        sel.val_y = [0] * 7 + [1] * 3
        # only the seven class-0 rows count; the one near class 1 is missed
        assert sel.well_represented_accuracy(1.0, 0.0) == pytest.approx(6 / 7)

    def test_unknown_class_is_ineligible(self):
        sel = OnlineModelSelector(1, CandidateGrid((1.0,), (0.0,)), well_represented_threshold=1, holdout_interval=10**9)
        sel.observe([1.0], 0)
        sel.val_X, sel.val_y = [np.array([1.0])], [3]
        assert sel.well_represented_accuracy(1.0, 0.0) is None

    def test_replay_oracle(self):
        # retrain from the recorded training rows and evaluate directly
        rng = np.random.default_rng(2)
        X, y = blob_stream(rng, 300, imbalanced=2, n_imb=10)
        grid = CandidateGrid((0.01, 1.0), (0.0, 0.5, 1.0))
        sel = OnlineModelSelector(4, grid, holdout_interval=6)
        for x, t in zip(X, y):
            sel.observe(x, t)
        pos = np.arange(1, y.size + 1)
        train, val = pos % 6 != 0, pos % 6 == 0
        ytr = relabel_first_seen(y[train])
        codes = dict(zip(y[train], ytr))
        yval = np.array([codes[v] for v in y[val]])
        counts = np.bincount(ytr)
        keep = counts[yval] >= 50
        for lam, alpha in grid.pairs():
            m = IncrementalRLSC(4, lam).fit_stream(X[train], ytr)
            expected = np.mean(m.predict(X[val][keep], alpha=alpha) == yval[keep])
            assert sel.well_represented_accuracy(lam, alpha) == pytest.approx(expected)


class TestSelect:
    def run(self, seed):
        rng = np.random.default_rng(seed)
        X, y = blob_stream(rng, 600, imbalanced=2, n_imb=20)
        X[y != 2] += 0.8 * rng.standard_normal((np.sum(y != 2), 4))
        sel = OnlineModelSelector(4, CandidateGrid((1e-3, 1e-1, 1.0, 10.0), (0.0, 0.5, 1.0)))
        for x, t in zip(X, relabel_first_seen(y)):
            sel.observe(x, t)
        return sel

    def test_never_worse_than_reference(self):
        sel = self.run(3)
        table = sel.accuracy_table()
        s = sel.select()
        assert not s.fallback
        bar = max(table[(lam, 0.0)] for lam in sel.grid.lambdas)
        assert s.accuracy >= bar
        assert sel.well_represented_accuracy(s.lam, s.alpha) == s.accuracy

    def test_snapshot_is_independent(self):
        sel = self.run(4)
        s = sel.select()
        assert s.model.alpha == s.alpha
        k = s.model.k
        sel.observe(np.zeros(4), 0)
        assert s.model.k == k

    def test_deterministic(self, tmp_path):
        a, b = self.run(5), self.run(5)
        sa, sb = a.select(), b.select()
        assert (sa.lam, sa.alpha, sa.accuracy) == (sb.lam, sb.alpha, sb.accuracy)
        np.testing.assert_array_equal(sa.model.weights(), sb.model.weights())
        a.write_trace(tmp_path / "a.csv")
        b.write_trace(tmp_path / "b.csv")
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_trace_format(self, tmp_path):
        sel = self.run(6)
        sel.select()
        sel.write_trace(tmp_path / "trace.csv")
        with open(tmp_path / "trace.csv") as f:
            rows = list(csv.DictReader(f))
        assert len(rows) == len(sel.grid.pairs())
        assert set(rows[0]) == {"iteration", "lambda", "alpha", "accuracy"}
        assert all(int(r["iteration"]) == sel.n_seen for r in rows)
