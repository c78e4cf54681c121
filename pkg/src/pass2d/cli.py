"""Command line driver: ``pass2d <command> ...``.

Exit status is 0 on success, 1 for data or processing errors and 2 for
usage errors.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path

from pass2d import evaluation, ml
from pass2d.dataset import (DatasetConfig, FeatureSet, LabelKind, SortMethod, assemble, read_table,
                            six_variants, table_filename, write_table)
from pass2d.features import extract
from pass2d.ingest import EventLogError, load_event_arrays, write_event_arrays
from pass2d.ml.forest import RFConfig, rf_train
from pass2d.ml.mlp import DivergenceError, MLPConfig, mlp_train
from pass2d.pipeline import PipelineConfig, run_pipeline, split_indices
from pass2d.synthgen import GenConfig, PolicyWeights, generate_arrays, source_tag

log = logging.getLogger("pass2d")

DATA_ERRORS = (EventLogError, evaluation.SchemaMismatch, evaluation.EmptyTable, DivergenceError,
               ValueError, KeyError, OSError)


def _positive_int(s: str) -> int:
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}") from None
    if v <= 0:
        raise argparse.ArgumentTypeError(f"must be positive, got {v}")
    return v


def _seed(s: str) -> int:
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {s!r}") from None
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return v


def _fraction_list(s: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(x) for x in s.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad proportion list {s!r}") from None
    if not vals or any(not 0.0 <= v <= 1.0 for v in vals):
        raise argparse.ArgumentTypeError("proportions must lie in [0, 1]")
    if any(b <= a for a, b in zip(vals, vals[1:])):
        raise argparse.ArgumentTypeError("proportions must be strictly increasing")
    return vals


def _int_list(s: str) -> tuple[int, ...]:
    try:
        vals = tuple(int(x) for x in s.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad layer list {s!r}") from None
    if any(v <= 0 for v in vals):
        raise argparse.ArgumentTypeError("layer widths must be positive")
    return vals


def _resolve_workers(parser, args) -> int:
    if args.workers is not None:
        return args.workers
    env = os.environ.get("PASS2D_WORKERS", "")
    if not env:
        return 1
    try:
        return _positive_int(env)
    except argparse.ArgumentTypeError as e:
        parser.error(f"PASS2D_WORKERS: {e}")


# -- commands ---------------------------------------------------------------


def cmd_synth(args) -> int:
    cfg = GenConfig(seed=args.seed, n_events=args.events, noise_sigma=args.sigma,
                    policy_weights=PolicyWeights(args.w_risk, args.w_dist, args.w_goal))
    a = generate_arrays(cfg)
    Path(args.output).parent.mkdir(parents=True, exist_ok=True)
    with open(args.output, "wb") as f:
        write_event_arrays(a, f, source_tag(cfg))
    print(f"wrote {len(a)} events (seed {cfg.seed}) to {args.output}")
    return 0


def _dataset_configs(args) -> list[DatasetConfig]:
    label, fs = LabelKind(args.label), FeatureSet(args.feature_set)
    if args.all_variants:
        return six_variants(label, fs)
    return [DatasetConfig(SortMethod(args.sort), args.kicker_first, label, fs)]


def cmd_build(args) -> int:
    a = load_event_arrays(args.log)
    cfgs = _dataset_configs(args)
    out = Path(args.out_dir)
    os.makedirs(out, exist_ok=True)
    parts = {"": a}
    if args.test_fraction is not None:
        tr, te = split_indices(len(a), args.test_fraction, args.split_seed)
        parts = {"_train": a.subset(tr), "_test": a.subset(te)}
    for suffix, part in parts.items():
        base = extract(part, args.k)
        for cfg in cfgs:
            t = assemble(part, cfg, base, args.k)
            path = out / table_filename(cfg).replace(".csv", f"{suffix}.csv")
            write_table(t, path)
            print(f"{path}: {len(t)} rows x {t.X.shape[1]} columns, schema {t.schema_hash}")
    return 0


def cmd_train(args) -> int:
    table = read_table(args.data)
    if args.model == "mlp":
        cfg = MLPConfig(seed=args.seed)
        overrides = {k: v for k, v in (("hidden_layers", args.hidden), ("epochs", args.epochs),
                                       ("dropout_rate", args.dropout), ("batch_size", args.batch_size),
                                       ("learning_rate", args.lr)) if v is not None}
        model = mlp_train(table, replace(cfg, **overrides))
    else:
        mf = args.max_features
        if mf is not None and mf not in ("sqrt", "all"):
            mf = _positive_int(mf)
        cfg = RFConfig(seed=args.seed, n_trees=args.trees, max_depth=args.max_depth,
                       features_per_split=mf or "sqrt", bootstrap=not args.no_bootstrap)
        model = rf_train(table, cfg, args.workers)
    Path(args.output).parent.mkdir(parents=True, exist_ok=True)
    ml.save_model(model, args.output)
    print(f"trained {args.model} on {len(table)} rows, schema {table.schema_hash} -> {args.output}")
    return 0


def cmd_eval(args) -> int:
    model = ml.load_model(args.model)
    rep = evaluation.accuracy(model, read_table(args.data))
    if args.report_dir:
        rep.name = args.name or "accuracy"
        evaluation.write_report([rep], args.report_dir)
    print(f"rows {rep.n_rows}, model {rep.model_fingerprint}")
    print(f"{rep.accuracy:.6f}")
    return 0


def cmd_robustness(args) -> int:
    model = ml.load_model(args.model)
    if "dataset" not in model.meta:
        raise ValueError(f"{args.model}: model carries no dataset config")
    cfg = DatasetConfig.from_dict(model.meta["dataset"])
    a = load_event_arrays(args.events)
    curve = evaluation.unum_shuffle_robustness(model, a, cfg, args.proportions, args.seed, model.meta.get("k", 2))
    if args.report_dir:
        curve.name = args.name or "robustness"
        evaluation.write_report([curve], args.report_dir)
    print("proportion,accuracy")
    for p, acc in zip(curve.proportions, curve.accuracies):
        print(f"{p:g},{acc:.6f}")
    return 0


def cmd_importance(args) -> int:
    model = ml.load_model(args.model)
    table = read_table(args.data)
    by_group = args.group_by == "feature-group"
    if args.method == "gini":
        if not isinstance(model, ml.RFModel):
            raise ValueError("gini importance needs a random forest model")
        evaluation._check_schema(model, table)
        imp = evaluation.gini_importance_table(model, table, by_group)
    else:
        imp = evaluation.permutation_importance(model, table, "group" if by_group else "column",
                                                args.repeats, args.seed)
    if args.report_dir:
        imp.name = args.name or "importance"
        evaluation.write_report([imp], args.report_dir)
    print("feature,score,std")
    for n, s, d in zip(imp.names, imp.scores, imp.stds):
        print(f"{n},{s:.6f},{d:.6f}")
    return 0


def cmd_pipeline(args) -> int:
    cfg = PipelineConfig.load(args.config)
    over = {"workers": args.workers}
    if args.out_dir:
        over["out_dir"] = args.out_dir
    res = run_pipeline(replace(cfg, **over))
    for name, acc in sorted(res.accuracy.items()):
        print(f"{name}: {acc:.6f}")
    print(f"done in {res.seconds:.1f}s -> {res.config.out_dir}")
    return 0


# -- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--workers", type=_positive_int, default=None,
                        help="parallel workers (default: $PASS2D_WORKERS or 1)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="pass2d", description="Pass receiver prediction toolkit.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="generate a synthetic event log")
    s.add_argument("--seed", type=_seed, default=0)
    s.add_argument("--events", type=_positive_int, default=1000)
    s.add_argument("--sigma", type=float, default=GenConfig.noise_sigma)
    s.add_argument("--w-risk", type=float, default=PolicyWeights.w_risk)
    s.add_argument("--w-dist", type=float, default=PolicyWeights.w_dist)
    s.add_argument("--w-goal", type=float, default=PolicyWeights.w_goal)
    s.add_argument("-o", "--output", required=True)
    s.set_defaults(func=cmd_synth)

    b = sub.add_parser("build", parents=[common], help="extract features and write dataset tables")
    b.add_argument("log")
    g = b.add_mutually_exclusive_group()
    g.add_argument("--all-variants", action="store_true")
    g.add_argument("--sort", choices=[m.value for m in SortMethod], default="unum")
    b.add_argument("--kicker-first", action="store_true")
    b.add_argument("--feature-set", choices=[f.value for f in FeatureSet], default="all")
    b.add_argument("--label", choices=[k.value for k in LabelKind], default="index")
    b.add_argument("--k", type=_positive_int, default=2)
    b.add_argument("--test-fraction", type=float, default=None,
                   help="also split events into <name>_train.csv and <name>_test.csv")
    b.add_argument("--split-seed", type=_seed, default=0)
    b.add_argument("--out-dir", default="tables")
    b.set_defaults(func=cmd_build)

    t = sub.add_parser("train", parents=[common], help="train a model on a dataset table")
    t.add_argument("--model", choices=["mlp", "rf"], required=True)
    t.add_argument("--data", required=True)
    t.add_argument("--seed", type=_seed, default=0)
    t.add_argument("-o", "--output", required=True)
    t.add_argument("--hidden", type=_int_list, default=None, help="comma separated hidden widths")
    t.add_argument("--epochs", type=_positive_int, default=None)
    t.add_argument("--dropout", type=float, default=None)
    t.add_argument("--batch-size", type=_positive_int, default=None)
    t.add_argument("--lr", type=float, default=None)
    t.add_argument("--trees", type=_positive_int, default=100)
    t.add_argument("--max-depth", type=_positive_int, default=None)
    t.add_argument("--max-features", default=None, help="sqrt, all, or a count")
    t.add_argument("--no-bootstrap", action="store_true")
    t.set_defaults(func=cmd_train)

    e = sub.add_parser("eval", parents=[common], help="held-out accuracy; last line is the fraction")
    e.add_argument("--model", required=True)
    e.add_argument("--data", required=True)
    e.add_argument("--report-dir", default=None)
    e.add_argument("--name", default=None)
    e.set_defaults(func=cmd_eval)

    r = sub.add_parser("robustness", parents=[common], help="accuracy under uniform-number relabeling")
    r.add_argument("--model", required=True)
    r.add_argument("--events", required=True, help="event log to relabel and rebuild")
    r.add_argument("--proportions", type=_fraction_list, default=evaluation.DEFAULT_PROPORTIONS)
    r.add_argument("--seed", type=_seed, default=0)
    r.add_argument("--report-dir", default=None)
    r.add_argument("--name", default=None)
    r.set_defaults(func=cmd_robustness)

    i = sub.add_parser("importance", parents=[common], help="permutation or gini importance")
    i.add_argument("--model", required=True)
    i.add_argument("--data", required=True)
    i.add_argument("--method", choices=["permutation", "gini"], default="permutation")
    i.add_argument("--group-by", choices=["feature-group", "column"], default="feature-group")
    i.add_argument("--repeats", type=_positive_int, default=5)
    i.add_argument("--seed", type=_seed, default=0)
    i.add_argument("--report-dir", default=None)
    i.add_argument("--name", default=None)
    i.set_defaults(func=cmd_importance)

    pl = sub.add_parser("pipeline", parents=[common], help="run the whole pipeline from a JSON config")
    pl.add_argument("--config", required=True)
    pl.add_argument("--out-dir", default=None)
    pl.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    args.workers = _resolve_workers(parser, args)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except argparse.ArgumentTypeError as e:
        print(f"pass2d: error: {e}", file=sys.stderr)
        return 2
    except evaluation.SchemaMismatch as e:
        print(f"pass2d: schema mismatch: model {e.model_hash} != data {e.table_hash}", file=sys.stderr)
        return 1
    except DATA_ERRORS as e:
        print(f"pass2d: error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
