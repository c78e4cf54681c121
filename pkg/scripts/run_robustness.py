"""Accuracy as a growing share of players swap uniform numbers.

Trains on an X-sorted table without unum columns and on a unum-sorted
table, then prints one curve per (sort, model) pair.
"""

import argparse
import os

from pass2d.dataset import DatasetConfig, FeatureSet, assemble
from pass2d.evaluation import DEFAULT_PROPORTIONS, unum_shuffle_robustness, write_report
from pass2d.features import extract
from pass2d.ml.forest import RFConfig, rf_train
from pass2d.ml.mlp import MLPConfig, mlp_train
from pass2d.pipeline import split_indices
from pass2d.synthgen import GenConfig, generate_arrays


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--events", type=int, default=20000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--epochs", type=int, default=40)
    ap.add_argument("--trees", type=int, default=100)
    ap.add_argument("--out-dir", default="runs/robustness")
    args = ap.parse_args()

    a = generate_arrays(GenConfig(seed=args.seed, n_events=args.events))
    tr, te = split_indices(len(a), 0.2, args.seed)
    train, test = a.subset(tr), a.subset(te)
    base = extract(train)
    curves = []
    for cfg in (DatasetConfig("x", False, feature_set=FeatureSet.NO_UNUM), DatasetConfig("unum", False)):
        t = assemble(train, cfg, base)
        models = {"mlp": mlp_train(t, MLPConfig(hidden_layers=(256, 128, 64, 32, 16), epochs=args.epochs)),
                  "rf": rf_train(t, RFConfig(n_trees=args.trees), workers=os.cpu_count() or 1)}
        for kind, m in models.items():
            c = unum_shuffle_robustness(m, test, cfg, DEFAULT_PROPORTIONS, seed=args.seed)
            c.name = f"robustness_{cfg.name}_{kind}"
            curves.append(c)
            print(f"{c.name:<40}" + " ".join(f"{x:.3f}" for x in c.accuracies))
    write_report(curves, args.out_dir)


if __name__ == "__main__":
    main()
