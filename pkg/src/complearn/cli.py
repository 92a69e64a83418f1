"""Command-line interface.

Every subcommand accepts ``--config FILE`` with flat ``key=value`` lines
(keys are flag names without the leading dashes); explicit flags win.
All randomness derives from ``--seed`` through named sub-streams.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import data as D
from .model import ModelConfig, load_checkpoint, save_checkpoint
from .priors import BbeConfig, estimate_priors, read_priors_csv, write_priors_csv
from .training import (
    Experiment,
    TrainConfig,
    accuracy,
    aggregate,
    run_trials,
    train_conu,
    write_report_csv,
    write_results_csv,
    write_summary_csv,
)

RISKS = {"conu": "abs", "ure": "identity", "relu": "relu"}


def _ints(text):
    return tuple(int(t) for t in str(text).split(",") if t.strip())


def _floats(text):
    return tuple(float(t) for t in str(text).split(",") if t.strip())


def _names(text):
    return tuple(t.strip() for t in str(text).split(",") if t.strip())


def read_config(path) -> dict:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def _add_model_flags(p):
    p.add_argument("--arch", choices=("linear", "mlp"), default="mlp", help="scorer architecture")
    p.add_argument("--hidden", type=_ints, default=(300, 300, 300), help="comma-separated hidden widths")
    p.add_argument("--epochs", type=int, default=200, help="training epochs")
    p.add_argument("--batch-size", type=int, default=256, help="mini-batch size")
    p.add_argument("--lr", type=float, default=1e-3, help="Adam learning rate")
    p.add_argument("--weight-decay", type=float, default=1e-5, help="decoupled weight decay")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="complearn", description="Learning from complementary labels.")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    def command(name, help):
        p = sub.add_parser(name, help=help, description=help)
        p.add_argument("--config", help="key=value file supplying defaults for any flag")
        p.add_argument("--seed", type=int, default=0, help="master seed")
        return p

    p = command("gen-data", "write a Gaussian-mixture ordinary-label CSV")
    p.add_argument("--q", type=int, default=4, help="number of classes")
    p.add_argument("--n-per-class", type=int, default=1000, help="examples per class")
    p.add_argument("--d", type=int, default=2, help="feature dimension")
    p.add_argument("--separation", type=float, default=6.0, help="distance of class centers from the origin")
    p.add_argument("--stream", default="data", help="name of the seed sub-stream (use 'test' for a test set)")
    p.add_argument("--out", required=True, help="output CSV (columns f0..,y)")

    p = command("gen-cl", "attach complementary labels to an ordinary-label CSV")
    p.add_argument("--data", required=True, help="ordinary-label CSV")
    p.add_argument("--q", type=int, help="number of classes (default: largest label)")
    p.add_argument("--spec", default="uniform",
                   help="uniform, biased-a, biased-b, scar-a, scar-b, scar-independent or scar-single")
    p.add_argument("--flag-probs", type=_floats, help="comma-separated c_k for scar-independent / scar-single")
    p.add_argument("--out", required=True, help="output CSV (columns f0..,cl)")

    p = command("estimate-priors", "estimate class priors from a complementary-label CSV")
    p.add_argument("--data", required=True, help="complementary-label CSV")
    p.add_argument("--q", type=int, required=True, help="number of classes")
    p.add_argument("--gamma", type=float, default=0.01, help="confidence-bound slack multiplier")
    p.add_argument("--delta", type=float, default=0.1, help="confidence level of the bound")
    p.add_argument("--split", type=float, default=0.8, help="training fraction for the scorer")
    p.add_argument("--pvu-hidden", type=_ints, default=(64, 64), help="scorer hidden widths")
    p.add_argument("--pvu-epochs", type=int, default=50, help="scorer training epochs")
    p.add_argument("--mixture", choices=("unlabeled", "all"), default="unlabeled",
                   help="mixture sample: unflagged rows or all rows")
    p.add_argument("--out", required=True, help="output CSV (columns k,pi_k,pi_bar_k)")

    p = command("train", "train a scorer from complementary labels")
    p.add_argument("--data", required=True, help="complementary-label CSV")
    p.add_argument("--q", type=int, required=True, help="number of classes")
    p.add_argument("--test", help="ordinary-label CSV used for per-epoch accuracy")
    p.add_argument("--priors", help="priors CSV (k,pi_k,pi_bar_k)")
    p.add_argument("--priors-source", choices=("given", "estimated", "corrupted", "uniform"), default="given",
                   help="use --priors as is, estimate from the data, perturb --priors, "
                        "or assume balanced classes (pi_bar from the data)")
    p.add_argument("--sigma", type=float, default=0.1, help="noise level for --priors-source corrupted")
    p.add_argument("--risk", choices=sorted(RISKS), default="conu",
                   help="conu: |.| correction, ure: no correction, relu: max(0,.) correction")
    _add_model_flags(p)
    p.add_argument("--out-dir", required=True, help="directory for model.ckpt and curves.csv")

    p = command("eval", "multi-seed accuracy table on the Gaussian benchmark, or accuracy of a checkpoint")
    p.add_argument("--checkpoint", help="evaluate this checkpoint on --test instead of running trials")
    p.add_argument("--test", help="ordinary-label CSV for --checkpoint")
    p.add_argument("--q", type=int, default=4, help="number of classes")
    p.add_argument("--d", type=int, default=2, help="feature dimension")
    p.add_argument("--separation", type=float, default=6.0, help="class-center distance")
    p.add_argument("--n-per-class", type=int, default=1000, help="training examples per class")
    p.add_argument("--test-per-class", type=int, default=500, help="test examples per class")
    p.add_argument("--settings", type=_names, default=("uniform",), help="comma-separated generation settings")
    p.add_argument("--methods", type=_names, default=("conu", "ure", "supervised"),
                   help="comma-separated methods among conu, ure, relu, supervised")
    p.add_argument("--seeds", type=int, default=5, help="number of seeds")
    p.add_argument("--sigma", type=float, default=0.0, help="prior perturbation level")
    p.add_argument("--estimated-priors", action="store_true", help="estimate priors instead of using the truth")
    p.add_argument("--jobs", type=int, default=1, help="concurrent runs")
    _add_model_flags(p)
    p.set_defaults(hidden=(64,))
    p.add_argument("--out-dir", required=True, help="directory for results.csv and summary.csv")

    from .reproduce import SUITES
    p = command("reproduce", "run the verification suite")
    p.add_argument("--suite", default="all", help="all or comma-separated among: " + ", ".join(SUITES))
    p.add_argument("--jobs", type=int, default=1, help="concurrent training runs")
    p.add_argument("--out-dir", default=".", help="directory for reproduce_summary.txt")
    return parser


def _parse(parser, argv):
    args = parser.parse_args(argv)
    if getattr(args, "config", None):
        try:
            cfg = read_config(args.config)
        except (OSError, ValueError) as exc:
            parser.error(str(exc))
        subparser = parser._subparsers._group_actions[0].choices[args.command]
        known = {a.dest: a for a in subparser._actions}
        for key, value in cfg.items():
            if key not in known or key in ("help", "config"):
                parser.error(f"{args.config}: unknown key {key!r}")
            action = known[key]
            if isinstance(action, argparse._StoreTrueAction):
                value = value.lower() in ("1", "true", "yes")
            elif action.type is not None:
                value = action.type(value)
            subparser.set_defaults(**{key: value})
        args = parser.parse_args(argv)
    return args


def _cmd_gen_data(args):
    ds = D.make_gaussian_mixture(args.q, args.n_per_class, args.d, args.separation, D.rng_stream(args.seed, args.stream))
    D.write_ordinary_csv(ds, args.out)
    D.read_ordinary_csv(args.out, args.q)


def _cmd_gen_cl(args):
    ds = D.read_ordinary_csv(args.data, args.q)
    if args.spec in ("scar-independent", "scar-single"):
        if args.flag_probs is None:
            raise ValueError(f"--spec {args.spec} needs --flag-probs")
        spec = (D.ScarIndependent if args.spec == "scar-independent" else D.ScarSingle)(np.array(args.flag_probs))
    else:
        spec = D.builtin_transition(args.spec, ds.q, D.class_frequencies(ds.labels, ds.q))
    cds = D.gen_complementary(ds, spec, D.rng_stream(args.seed, "labels"))
    D.write_complementary_csv(cds, args.out)
    D.read_complementary_csv(args.out, ds.q)


def _bbe_config(args):
    return BbeConfig(gamma=args.gamma, delta=args.delta, split_fraction=args.split,
                     hidden=args.pvu_hidden, epochs=args.pvu_epochs, mixture=args.mixture)


def _cmd_estimate_priors(args):
    cds = D.read_complementary_csv(args.data, args.q)
    priors = estimate_priors(cds, _bbe_config(args), args.seed)
    write_priors_csv(priors, args.out)
    read_priors_csv(args.out)


def _cmd_train(args):
    cds = D.read_complementary_csv(args.data, args.q)
    if args.priors_source == "estimated":
        priors = estimate_priors(cds, BbeConfig(), args.seed)
    elif args.priors_source == "uniform":
        priors = D.ClassPriors(np.full(cds.q, 1.0 / cds.q), D.complementary_priors(cds))
    else:
        if not args.priors:
            raise ValueError(f"--priors-source {args.priors_source} needs --priors")
        priors = read_priors_csv(args.priors)
        if args.priors_source == "corrupted":
            priors = D.corrupt_priors(priors, args.sigma, D.rng_stream(args.seed, "prior-noise"))
    test = D.read_ordinary_csv(args.test, args.q) if args.test else None
    model_cfg = ModelConfig(cds.d, cds.q, args.arch, args.hidden)
    cfg = TrainConfig(args.epochs, args.batch_size, args.lr, args.weight_decay, args.seed, RISKS[args.risk])
    params, report = train_conu(cds, priors, model_cfg, cfg, test)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_checkpoint(params, out / "model.ckpt")
    write_report_csv(report, out / "curves.csv")
    load_checkpoint(out / "model.ckpt")


def _cmd_eval(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.checkpoint:
        if not args.test:
            raise ValueError("--checkpoint needs --test")
        params = load_checkpoint(args.checkpoint)
        test = D.read_ordinary_csv(args.test, params.config.output_dim)
        write_results_csv([("checkpoint", Path(args.test).name, args.seed, accuracy(params, test))], out / "results.csv")
        return
    exp = Experiment(q=args.q, d=args.d, separation=args.separation, n_per_class=args.n_per_class,
                     test_per_class=args.test_per_class, settings=args.settings, methods=args.methods,
                     hidden=args.hidden, arch=args.arch,
                     train=TrainConfig(args.epochs, args.batch_size, args.lr, args.weight_decay),
                     prior_sigma=args.sigma, estimate_priors=args.estimated_priors, data_seed=args.seed)
    rows = run_trials(exp, args.seeds, args.jobs)
    write_results_csv(rows, out / "results.csv")
    write_summary_csv(aggregate(rows), out / "summary.csv")


def _cmd_reproduce(args):
    from .reproduce import SUITES, run_suite
    names = None if args.suite == "all" else list(_names(args.suite))
    for name in names or []:
        if name not in SUITES:
            raise ValueError(f"unknown suite {name!r}; choose from {', '.join(SUITES)} or all")
    results = run_suite(names, jobs=args.jobs)
    lines = [r.line() for r in results]
    for line in lines:
        print(line)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "reproduce_summary.txt").write_text("\n".join(lines) + "\n")
    return 0 if all(r.passed for r in results) else 1


COMMANDS = {
    "gen-data": _cmd_gen_data,
    "gen-cl": _cmd_gen_cl,
    "estimate-priors": _cmd_estimate_priors,
    "train": _cmd_train,
    "eval": _cmd_eval,
    "reproduce": _cmd_reproduce,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = _parse(parser, argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args) or 0
    except (D.CsvFormatError, ValueError, OSError) as exc:
        print(f"complearn {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
