"""All six dataset variants (plus position-only twins), MLP and RF, on synthetic events.

    python scripts/run_reproduction.py --config scripts/configs/reproduction.json --workers 4
"""

import argparse
import logging
import os
from dataclasses import replace

from pass2d.pipeline import PipelineConfig, run_pipeline


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", default=os.path.join(os.path.dirname(__file__), "configs", "reproduction.json"))
    ap.add_argument("--out-dir")
    ap.add_argument("--events", type=int, help="override the number of generated events")
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")

    cfg = replace(PipelineConfig.load(args.config), workers=args.workers)
    if args.out_dir:
        cfg = replace(cfg, out_dir=args.out_dir)
    if args.events:
        cfg = replace(cfg, gen=replace(cfg.gen, n_events=args.events))
    res = run_pipeline(cfg)

    print(f"{'variant':<22}{'mlp':>8}{'rf':>8}")
    for d in cfg.all_datasets():
        row = [res.accuracy.get(f"{d.name}_{k}") for k in ("mlp", "rf")]
        print(f"{d.name:<22}" + "".join(f"{a:8.4f}" if a is not None else f"{'-':>8}" for a in row))
    print(f"{res.seconds:.0f}s, outputs in {cfg.out_dir}")


if __name__ == "__main__":
    main()
