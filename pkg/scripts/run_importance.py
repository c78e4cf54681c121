"""Group permutation importance (and RF Gini importance) on synthetic events.

With ``--risk-only`` the generator ignores distance and goal terms, so the
receiver depends on pass-line angles alone and the Riskiest group should lead.
"""

import argparse
import os

from pass2d.dataset import DatasetConfig, assemble
from pass2d.evaluation import gini_importance_table, permutation_importance, write_report
from pass2d.ml.forest import RFConfig, rf_train
from pass2d.ml.mlp import MLPConfig, mlp_train
from pass2d.pipeline import split_indices
from pass2d.synthgen import GenConfig, PolicyWeights, generate_arrays


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--events", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=2)
    ap.add_argument("--risk-only", action="store_true")
    ap.add_argument("--sort", default="x", choices=["unum", "x", "fe"])
    ap.add_argument("--repeats", type=int, default=5)
    ap.add_argument("--epochs", type=int, default=40)
    ap.add_argument("--out-dir", default="runs/importance")
    args = ap.parse_args()

    w = PolicyWeights(1.0, 0.0, 0.0) if args.risk_only else PolicyWeights()
    a = generate_arrays(GenConfig(seed=args.seed, n_events=args.events, policy_weights=w))
    tr, te = split_indices(len(a), 0.2, args.seed)
    cfg = DatasetConfig(args.sort, False)
    train, test = assemble(a.subset(tr), cfg), assemble(a.subset(te), cfg)

    rf = rf_train(train, RFConfig(n_trees=100), workers=os.cpu_count() or 1)
    mlp = mlp_train(train, MLPConfig(hidden_layers=(256, 128, 64, 32, 16), epochs=args.epochs))
    reports = []
    for kind, m in (("mlp", mlp), ("rf", rf)):
        imp = permutation_importance(m, test, "group", args.repeats, args.seed)
        imp.name = f"permutation_{kind}"
        reports.append(imp)
    g = gini_importance_table(rf, train)
    g.name = "gini_rf"
    reports.append(g)
    for r in reports:
        print(r.name + ": " + ", ".join(f"{n}={s:.3f}" for n, s in zip(r.names, r.scores)))
        print("  ranking: " + " > ".join(r.ranking()[:4]))
    write_report(reports, args.out_dir)


if __name__ == "__main__":
    main()
