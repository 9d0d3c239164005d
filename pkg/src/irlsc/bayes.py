"""Analytic Bayes classifiers for isotropic Gaussian class conditionals.

Used as ground truth: standard and prior-rebalanced Bayes rules, the
population minimizers of the plain, weighted and coded square losses, a
sampler, and decision-boundary grids.

All rules accept a single point (1-D array) or a batch (2-D, one point per
row) and return a scalar or a 1-D array accordingly. Scores are compared in
log space; ties go to the spec listed first.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from irlsc.datasets import LabeledDataset

PRIOR_SUM_TOL = 1e-12


@dataclass(frozen=True)
class GaussianClassSpec:
    """Class-conditional ``N(mean, sigma^2 I)`` with its prior probability."""

    label: int
    mean: tuple
    sigma: float
    prior: float

    def __post_init__(self):
        object.__setattr__(self, "mean", tuple(float(m) for m in self.mean))
        if not self.sigma > 0:
            raise ValueError(f"sigma must be positive, got {self.sigma}")
        if not 0.0 < self.prior < 1.0:
            raise ValueError(f"prior must lie in (0, 1), got {self.prior}")

    @property
    def dim(self):
        return len(self.mean)


def fig1_specs(gamma):
    """The two-Gaussian benchmark: class 1 at (-1, 0) with sigma 1, class -1
    at (1, 0) with sigma 0.3, and ``P(y=1) = gamma``."""
    return [
        GaussianClassSpec(label=1, mean=(-1.0, 0.0), sigma=1.0, prior=gamma),
        GaussianClassSpec(label=-1, mean=(1.0, 0.0), sigma=0.3, prior=1.0 - gamma),
    ]


def check_specs(specs):
    specs = list(specs)
    if len(specs) < 2:
        raise ValueError("need at least two class specs")
    dims = {s.dim for s in specs}
    if len(dims) != 1:
        raise ValueError(f"specs disagree on dimension: {sorted(dims)}")
    labels = [s.label for s in specs]
    if len(set(labels)) != len(labels):
        raise ValueError(f"duplicate labels: {labels}")
    total = sum(s.prior for s in specs)
    if abs(total - 1.0) > PRIOR_SUM_TOL:
        raise ValueError(f"priors sum to {total!r}, not 1")
    return specs


def _points(x, dim):
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    x = np.atleast_2d(x)
    if x.shape[1] != dim:
        raise ValueError(f"points must have dimension {dim}, got {x.shape[1]}")
    return x, single


def _unwrap(values, single):
    return values[0] if single else values


def log_density(spec, x):
    x, single = _points(x, spec.dim)
    sq = np.sum((x - np.asarray(spec.mean)) ** 2, axis=1)
    var = spec.sigma**2
    out = -0.5 * spec.dim * np.log(2.0 * np.pi * var) - sq / (2.0 * var)
    return _unwrap(out, single)


def density(spec, x):
    """Isotropic Gaussian density ``(2 pi s^2)^(-d/2) exp(-|x-m|^2 / (2 s^2))``."""
    return np.exp(log_density(spec, x))


def _log_joint(specs, x):
    # (n, T): log prior + log density
    x, single = _points(x, specs[0].dim)
    cols = [np.log(s.prior) + log_density(s, x) for s in specs]
    return np.stack(cols, axis=1), single


def log_posteriors(specs, x):
    """Log of ``P(y = label | x)`` for each spec, shape (n, T)."""
    specs = check_specs(specs)
    joint, single = _log_joint(specs, x)
    post = joint - logsumexp(joint, axis=1, keepdims=True)
    return post[0] if single else post


def _argmax_labels(specs, scores, single):
    labels = np.array([s.label for s in specs])
    return _unwrap(labels[np.argmax(scores, axis=1)], single)


def bayes_classify(specs, x):
    """Label maximizing ``prior * density``."""
    specs = check_specs(specs)
    joint, single = _log_joint(specs, x)
    return _argmax_labels(specs, joint, single)


def rebalanced_bayes_classify(specs, x):
    """Bayes rule with class weights ``1 / prior``: the priors cancel and the
    label with the largest class-conditional density wins."""
    specs = check_specs(specs)
    x, single = _points(x, specs[0].dim)
    dens = np.stack([log_density(s, x) for s in specs], axis=1)
    return _argmax_labels(specs, dens, single)


def _binary_posteriors(specs, x):
    specs = check_specs(specs)
    by_label = {s.label: i for i, s in enumerate(specs)}
    if len(specs) != 2 or set(by_label) != {1, -1}:
        raise ValueError("binary scores need exactly two specs labelled +1 and -1")
    post = np.exp(np.atleast_2d(log_posteriors(specs, x)))
    single = np.asarray(x).ndim == 1
    return post[:, by_label[1]], post[:, by_label[-1]], single


def population_ls_score(specs, x):
    """Minimizer of the expected square loss on +/-1 labels: ``P(1|x) - P(-1|x)``."""
    p_pos, p_neg, single = _binary_posteriors(specs, x)
    return _unwrap(p_pos - p_neg, single)


def population_weighted_ls_score(specs, weights, x):
    """Minimizer of the class-weighted square loss.

    ``weights`` maps each label (+1, -1) to a positive weight.
    """
    if min(weights[1], weights[-1]) <= 0:
        raise ValueError("class weights must be positive")
    p_pos, p_neg, single = _binary_posteriors(specs, x)
    num = p_pos * weights[1] - p_neg * weights[-1]
    den = p_pos * weights[1] + p_neg * weights[-1]
    return _unwrap(num / den, single)


def population_coded_ls_score(specs, coding, x):
    """Minimizer of the square loss with recoded targets: ``c(1) P(1|x) - c(-1) P(-1|x)``."""
    p_pos, p_neg, single = _binary_posteriors(specs, x)
    return _unwrap(coding[1] * p_pos - coding[-1] * p_neg, single)


def inverse_prior_weights(specs):
    return {s.label: 1.0 / s.prior for s in specs}


def sample(specs, n, seed=None):
    """Draw ``n`` i.i.d. labelled points; labels are dense indices into ``specs``."""
    specs = check_specs(specs)
    rng = np.random.default_rng(seed)
    priors = np.array([s.prior for s in specs])
    y = rng.choice(len(specs), size=n, p=priors / priors.sum())
    means = np.array([s.mean for s in specs])
    sigmas = np.array([s.sigma for s in specs])
    noise = rng.standard_normal((n, specs[0].dim))
    X = means[y] + sigmas[y, None] * noise
    return LabeledDataset(X, y, [s.label for s in specs])


RULES = {"standard": bayes_classify, "rebalanced": rebalanced_bayes_classify}


def grid_points(region, resolution):
    """Cell centres of a 2-D box ``((x1_lo, x1_hi), (x2_lo, x2_hi))``, row-major
    over (x2, x1) so that each output row of the grid shares one x2 value."""
    (lo1, hi1), (lo2, hi2) = region
    n1, n2 = resolution
    if n1 < 1 or n2 < 1:
        raise ValueError("resolution must be positive")
    c1 = lo1 + (np.arange(n1) + 0.5) * (hi1 - lo1) / n1
    c2 = lo2 + (np.arange(n2) + 0.5) * (hi2 - lo2) / n2
    g1, g2 = np.meshgrid(c1, c2)
    return np.column_stack([g1.ravel(), g2.ravel()])


def boundary_grid(specs, region, resolution, rule="standard"):
    """Classify every cell centre of a 2-D grid.

    Returns ``(points, labels)`` with ``labels`` reshaped to
    ``(resolution[1], resolution[0])``.
    """
    if rule not in RULES:
        raise ValueError(f"rule must be one of {sorted(RULES)}, got {rule!r}")
    pts = grid_points(region, resolution)
    labels = RULES[rule](specs, pts)
    return pts, labels.reshape(resolution[1], resolution[0])


def write_boundary_csv(path_or_file, specs, region, resolution):
    """Write ``x1,x2,label_standard,label_rebalanced`` for every grid cell."""
    pts, std = boundary_grid(specs, region, resolution, "standard")
    _, reb = boundary_grid(specs, region, resolution, "rebalanced")
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x1", "x2", "label_standard", "label_rebalanced"])
        for (a, b), s, r in zip(pts, std.ravel(), reb.ravel()):
            w.writerow([repr(float(a)), repr(float(b)), int(s), int(r)])
    finally:
        if own:
            fh.close()


def fig1_task(gamma, n, seed, add_constant=True):
    """Samples of the two-Gaussian benchmark as a dataset.

    A constant feature is appended by default so the linear model has an
    intercept; through the origin, a class with no training data scores
    zero and beats the lone balanced class on the far half-plane.
    """
    data = sample(fig1_specs(gamma), n, seed)
    if add_constant:
        data = LabeledDataset(np.hstack([data.X, np.ones((len(data), 1))]), data.y, data.label_names)
    return data
