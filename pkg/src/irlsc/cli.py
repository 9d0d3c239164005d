"""Command-line entry point: ``irlsc <subcommand>``.

Exit status is 0 on success, 1 on runtime failure, 2 on usage or
validation errors.
"""

import argparse
import json
import logging
import math
import os
import sys

import numpy as np

from irlsc import bayes, harness
from irlsc.classifier import IncrementalRLSC
from irlsc.datasets import LabelIndexer, StreamProtocol, build_protocol, load_csv, load_idx
from irlsc.model_selection import DEFAULT_ALPHAS, CandidateGrid, OnlineModelSelector

logger = logging.getLogger("irlsc")

DEFAULT_CHECKPOINTS = "1,5,10,50,100,500"
DEFAULT_LAMBDAS = ",".join(f"{v:g}" for v in np.logspace(-6, 2, 12))


class UsageError(Exception):
    pass


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _ints(text):
    try:
        return tuple(int(v) for v in text.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _require_files(*paths):
    for p in paths:
        if p is not None and not os.path.isfile(p):
            raise UsageError(f"no such file: {p}")


def _validate_experiment(args):
    sources = [args.synthetic is not None, args.idx_images is not None, args.csv is not None]
    if sum(sources) != 1:
        raise UsageError("give exactly one data source: --synthetic, --idx-images/--idx-labels or --csv")
    if (args.idx_images is None) != (args.idx_labels is None):
        raise UsageError("--idx-images and --idx-labels go together")
    if (args.idx_test_images is None) != (args.idx_test_labels is None):
        raise UsageError("--idx-test-images and --idx-test-labels go together")
    if not 0.0 < args.gamma < 1.0:
        raise UsageError(f"--gamma must lie in (0, 1), got {args.gamma}")
    if args.n_bal < 1 or args.n_test < 1 or args.trials < 1:
        raise UsageError("--n-bal, --n-test and --trials must be positive")
    cp = args.checkpoints
    if not cp or cp[0] < 1 or any(b <= a for a, b in zip(cp, cp[1:])):
        raise UsageError(f"--checkpoints must be positive and strictly increasing, got {cp}")
    if not args.lambdas or min(args.lambdas) <= 0:
        raise UsageError("--lambdas must be positive")
    if not args.alpha or min(args.alpha) < 0 or max(args.alpha) > 1:
        raise UsageError("--alpha values must lie in [0, 1]")
    bad = set(args.methods) - set(harness.METHODS)
    if bad:
        raise UsageError(f"unknown methods {sorted(bad)}; choose from {harness.METHODS}")
    if args.parallel_trials < 1:
        raise UsageError("--parallel-trials must be at least 1")
    _require_files(args.idx_images, args.idx_labels, args.idx_test_images, args.idx_test_labels, args.csv, args.csv_test)


def _load_experiment_data(args):
    if args.synthetic is not None:
        need = args.n_bal + args.n_bal // 5 + args.n_test + args.checkpoints[-1]
        n = int(math.ceil(1.5 * need / min(args.gamma, 1.0 - args.gamma)))
        return bayes.fig1_task(args.gamma, n, args.seed), None
    if args.idx_images is not None:
        train = load_idx(args.idx_images, args.idx_labels)
        test = load_idx(args.idx_test_images, args.idx_test_labels) if args.idx_test_images else None
        return train, test
    train = load_csv(args.csv, args.label_column)
    test = load_csv(args.csv_test, args.label_column) if args.csv_test else None
    return train, test


def cmd_experiment(args):
    _validate_experiment(args)
    data, test = _load_experiment_data(args)
    imb = args.imbalanced_class
    if imb is None:
        imb = data.label_names[-1]
    elif imb != "rotate":
        try:
            data.class_index(imb)
        except KeyError as exc:
            raise UsageError(str(exc)) from None
        imb = data.label_names[data.class_index(imb)]
    hyper = harness.Hyper(lambdas=args.lambdas, alphas=args.alpha)
    protocol = StreamProtocol(
        imbalanced_class=data.label_names[0] if imb == "rotate" else imb,
        n_bal=args.n_bal,
        checkpoints=args.checkpoints,
        n_test=args.n_test,
        n_trials=args.trials,
        seed=args.seed,
    )
    os.makedirs(args.out, exist_ok=True)
    if args.save_manifests and imb != "rotate":
        mdir = os.path.join(args.out, "manifests")
        os.makedirs(mdir, exist_ok=True)
        for t, s in enumerate(protocol.trial_seeds()):
            with open(os.path.join(mdir, f"trial_{t}.json"), "w") as f:
                f.write(build_protocol(data, protocol, s, test).to_json())
    if imb == "rotate":
        result = harness.rotate_imbalanced(data, protocol, args.methods, hyper, test, args.parallel_trials)
    else:
        result = harness.run_experiment(data, protocol, args.methods, hyper, test, args.parallel_trials)
    result.write_csv(os.path.join(args.out, "results.csv"))
    result.write_json(os.path.join(args.out, "summary.json"))
    result.write_curves(os.path.join(args.out, "curves.csv"))
    with open(os.path.join(args.out, "timing.json"), "w") as f:
        json.dump({"seconds_per_update": result.update_seconds}, f, indent=2)
    print(result.format_table())
    if result.errors:
        for e in result.errors:
            print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


def cmd_bayes_boundary(args):
    for g in args.gamma:
        if not 0.0 < g < 1.0:
            raise UsageError(f"--gamma must lie in (0, 1), got {g}")
    if min(args.resolution) < 1:
        raise UsageError("--resolution must be positive")
    lo1, hi1, lo2, hi2 = args.region
    if not (lo1 < hi1 and lo2 < hi2):
        raise UsageError("--region must be LO1 HI1 LO2 HI2 with LO < HI")
    region = ((lo1, hi1), (lo2, hi2))
    res = tuple(args.resolution) * (2 if len(args.resolution) == 1 else 1)
    if len(args.gamma) == 1 and args.out_dir is None:
        bayes.write_boundary_csv(sys.stdout, bayes.fig1_specs(args.gamma[0]), region, res)
        return 0
    out = args.out_dir or "."
    os.makedirs(out, exist_ok=True)
    for g in args.gamma:
        path = os.path.join(out, f"boundary_gamma{g:g}.csv")
        bayes.write_boundary_csv(path, bayes.fig1_specs(g), region, res)
        print(path)
    return 0


def cmd_timing(args):
    if min(args.d) < 1:
        raise UsageError("--d must be positive")
    if min(args.k) < 0 or args.repeats < 1:
        raise UsageError("--k must be non-negative and --repeats positive")
    lines = ["d,k,median_seconds"]
    for d in args.d:
        for k, med in harness.timing_probe(d, args.k, repeats=args.repeats, seed=args.seed):
            lines.append(f"{d},{k},{med:.3e}")
    text = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w") as f:
            f.write(text)
    print(text, end="")
    return 0


def _load_any(args):
    if args.csv:
        _require_files(args.csv)
        return load_csv(args.csv, args.label_column)
    if args.idx_images and args.idx_labels:
        _require_files(args.idx_images, args.idx_labels)
        return load_idx(args.idx_images, args.idx_labels)
    raise UsageError("give --csv or --idx-images/--idx-labels")


def cmd_train(args):
    if args.lam <= 0 or not 0.0 <= args.alpha <= 1.0:
        raise UsageError("need --lambda > 0 and --alpha in [0, 1]")
    data = _load_any(args)
    model = IncrementalRLSC(data.n_features, args.lam, args.alpha)
    indexer = LabelIndexer()
    for x, y in zip(data.X, data.y):
        model.partial_fit(x, indexer.encode(y))
    model.save(args.model)
    names = [data.label_names[i] for i in indexer.to_external]
    with open(args.model + ".labels.json", "w") as f:
        json.dump(names, f)
    print(f"trained {model!r}")
    return 0


def cmd_predict(args):
    _require_files(args.model, args.model + ".labels.json")
    data = _load_any(args)
    model = IncrementalRLSC.load(args.model)
    with open(args.model + ".labels.json") as f:
        names = json.load(f)
    pred = [names[i] for i in model.predict(data.X)]
    truth = [data.label_names[i] for i in data.y]
    acc = float(np.mean([str(p) == str(t) for p, t in zip(pred, truth)]))
    out = open(args.out, "w") if args.out else sys.stdout
    try:
        out.write("row,prediction\n")
        for i, p in enumerate(pred):
            out.write(f"{i},{p}\n")
    finally:
        if args.out:
            out.close()
    print(f"accuracy against the label column: {acc:.4f}", file=sys.stderr)
    return 0


def cmd_select(args):
    if args.holdout_interval < 1 or args.threshold < 0:
        raise UsageError("--holdout-interval must be at least 1 and --threshold non-negative")
    try:
        grid = CandidateGrid(args.lambdas, args.alphas)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    data = _load_any(args)
    order = np.random.default_rng(args.seed).permutation(len(data)) if args.shuffle else np.arange(len(data))
    sel = OnlineModelSelector(data.n_features, grid, args.holdout_interval, args.threshold)
    for i in order:
        sel.observe(data.X[i], data.y[i])
    choice = sel.select()
    if args.trace:
        sel.write_trace(args.trace)
    if args.model:
        choice.model.save(args.model)
        names = [data.label_names[i] for i in sel.indexer.to_external]
        with open(args.model + ".labels.json", "w") as f:
            json.dump(names, f)
    acc = "n/a" if choice.accuracy is None else f"{choice.accuracy:.4f}"
    print(f"lambda={choice.lam:g} alpha={choice.alpha:g} accuracy={acc}" + (" (fallback)" if choice.fallback else ""))
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="irlsc", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("experiment", help="run the imbalanced-stream protocol",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    e.add_argument("--synthetic", choices=["fig1"], help="built-in two-Gaussian task")
    e.add_argument("--gamma", type=float, default=0.5, help="class-1 prior of the synthetic pool")
    e.add_argument("--idx-images")
    e.add_argument("--idx-labels")
    e.add_argument("--idx-test-images", help="separate IDX test pool (e.g. the official MNIST test split)")
    e.add_argument("--idx-test-labels")
    e.add_argument("--csv", help="feature CSV with a header row")
    e.add_argument("--csv-test")
    e.add_argument("--label-column", default="label")
    e.add_argument("--imbalanced-class", help="original label of the under-represented class, or 'rotate' (default: last label)")
    e.add_argument("--n-bal", type=int, default=1000, help="training examples per balanced class")
    e.add_argument("--n-test", type=int, default=200, help="test examples per class")
    e.add_argument("--checkpoints", type=_ints, default=_ints(DEFAULT_CHECKPOINTS), help="n_imb values to evaluate at")
    e.add_argument("--trials", type=int, default=10)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--lambdas", type=_floats, default=_floats(DEFAULT_LAMBDAS), help="candidate regularizations")
    e.add_argument("--alpha", type=_floats, default=(0.7,), help="RC recoding exponent(s); several select by the largest-alpha rule")
    e.add_argument("--methods", type=lambda s: tuple(s.split(",")), default=harness.METHODS)
    e.add_argument("--parallel-trials", type=int, default=1)
    e.add_argument("--save-manifests", action="store_true", help="write per-trial index sets as JSON")
    e.add_argument("--out", default="results")
    e.set_defaults(func=cmd_experiment)

    b = sub.add_parser("bayes-boundary", help="Bayes decision-boundary grid as CSV",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    b.add_argument("--gamma", type=_floats, default=(0.5, 0.7, 0.9))
    b.add_argument("--region", type=float, nargs=4, default=(-3.0, 3.0, -3.0, 3.0), metavar=("LO1", "HI1", "LO2", "HI2"))
    b.add_argument("--resolution", type=int, nargs="+", default=[200])
    b.add_argument("--out-dir", help="directory for one CSV per gamma (stdout for a single gamma otherwise)")
    b.set_defaults(func=cmd_bayes_boundary)

    t = sub.add_parser("timing", help="partial_fit latency against k",
                       formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    t.add_argument("--d", type=_ints, default=(100, 200))
    t.add_argument("--k", type=_ints, default=(0, 100, 1000, 10000))
    t.add_argument("--repeats", type=int, default=200)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--out")
    t.set_defaults(func=cmd_timing)

    for name, func, help_ in (("train", cmd_train, "stream a dataset into a model checkpoint"),
                              ("predict", cmd_predict, "predict with a saved checkpoint"),
                              ("select", cmd_select, "online lambda/alpha selection with a validation holdout")):
        m = sub.add_parser(name, help=help_)
        m.add_argument("--csv")
        m.add_argument("--idx-images")
        m.add_argument("--idx-labels")
        m.add_argument("--label-column", default="label")
        m.add_argument("--model", required=name != "select")
        if name == "train":
            m.add_argument("--lambda", dest="lam", type=float, default=1.0)
            m.add_argument("--alpha", type=float, default=0.0)
        elif name == "predict":
            m.add_argument("--out")
        else:
            m.add_argument("--lambdas", type=_floats, default=_floats(DEFAULT_LAMBDAS))
            m.add_argument("--alphas", type=_floats, default=DEFAULT_ALPHAS)
            m.add_argument("--holdout-interval", type=int, default=6, help="every i-th example is held out")
            m.add_argument("--threshold", type=int, default=50, help="minimum class count to be well represented")
            m.add_argument("--shuffle", action="store_true", help="stream rows in a seeded random order")
            m.add_argument("--seed", type=int, default=0)
            m.add_argument("--trace", help="CSV of every candidate's accuracy")
        m.set_defaults(func=func)
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"irlsc {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001
        logger.debug("failure", exc_info=True)
        print(f"irlsc {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
