"""End-to-end run: synthesize or load events, build variants, train, evaluate.

Everything below one output directory::

    events.p2dl
    tables/<variant>_{train,test}.csv (+ .json sidecars)   if write_tables
    models/<variant>_<mlp|rf>.model
    reports/<experiment>/{metrics.csv, meta.json}, reports/manifest.json
    summary.json
"""

from __future__ import annotations

import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from pass2d import evaluation, ml
from pass2d.dataset import DatasetConfig, FeatureSet, Table, assemble, six_variants, write_table
from pass2d.features import extract
from pass2d.ingest import load_event_arrays, write_event_arrays
from pass2d.ml.forest import RFConfig, rf_train
from pass2d.ml.mlp import MLPConfig, mlp_train
from pass2d.model import EventArrays
from pass2d.synthgen import GenConfig, PolicyWeights, generate_arrays, source_tag

log = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    out_dir: str = "out"
    input_log: str | None = None
    gen: GenConfig = field(default_factory=GenConfig)
    datasets: list[DatasetConfig] = field(default_factory=six_variants)
    # also train a PositionOnly twin of every dataset config
    position_baseline: bool = True
    mlp: MLPConfig = field(default_factory=MLPConfig)
    rf: RFConfig = field(default_factory=RFConfig)
    train_mlp: bool = True
    train_rf: bool = True
    test_fraction: float = 0.2
    robustness: bool = False
    proportions: tuple[float, ...] = evaluation.DEFAULT_PROPORTIONS
    importance: bool = False
    importance_repeats: int = 5
    write_tables: bool = False
    save_models: bool = True
    seed: int = 0
    k: int = 2
    workers: int = 1

    def __post_init__(self):
        if not self.datasets:
            raise ValueError("at least one dataset config is required")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError("test_fraction must be in (0, 1)")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    def all_datasets(self) -> list[DatasetConfig]:
        out = list(self.datasets)
        if self.position_baseline:
            for d in self.datasets:
                twin = replace(d, feature_set=FeatureSet.POSITION_ONLY)
                if twin not in out:
                    out.append(twin)
        return out

    def to_dict(self) -> dict:
        d = asdict(self)
        d["datasets"] = [c.to_dict() for c in self.datasets]
        d["proportions"] = list(self.proportions)
        d["mlp"]["hidden_layers"] = list(self.mlp.hidden_layers)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> PipelineConfig:
        d = dict(d)
        unknown = set(d) - {f for f in cls.__dataclass_fields__}
        if unknown:
            raise ValueError(f"unknown pipeline keys: {sorted(unknown)}")
        if "gen" in d:
            g = dict(d["gen"])
            if "policy_weights" in g:
                g["policy_weights"] = PolicyWeights(**g["policy_weights"])
            d["gen"] = GenConfig(**g)
        if "datasets" in d:
            d["datasets"] = [DatasetConfig.from_dict(c) for c in d["datasets"]]
        if "mlp" in d:
            d["mlp"] = MLPConfig(**d["mlp"])
        if "rf" in d:
            d["rf"] = RFConfig(**d["rf"])
        if "proportions" in d:
            d["proportions"] = tuple(d["proportions"])
        return cls(**d)

    @classmethod
    def load(cls, path) -> PipelineConfig:
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class PipelineResult:
    config: PipelineConfig
    models: dict = field(default_factory=dict)
    reports: list = field(default_factory=list)
    accuracy: dict = field(default_factory=dict)
    seconds: float = 0.0


def split_indices(n: int, test_fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Seeded train/test split of event indices, both sorted."""
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), 0x5EED])))
    perm = rng.permutation(n)
    n_test = max(1, int(round(n * test_fraction)))
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def _job(kind: str, train: Table, test: Table, test_arrays: EventArrays, cfg: PipelineConfig, rf_workers: int):
    t0 = time.perf_counter()
    if kind == "mlp":
        model = mlp_train(train, cfg.mlp)
    else:
        model = rf_train(train, cfg.rf, rf_workers)
    name = f"{train.config.name}_{kind}"
    rep = evaluation.accuracy(model, test)
    rep.name = f"accuracy_{name}"
    reports = [rep]
    if cfg.robustness:
        curve = evaluation.unum_shuffle_robustness(model, test_arrays, train.config, cfg.proportions, cfg.seed, cfg.k)
        curve.name = f"robustness_{name}"
        reports.append(curve)
    if cfg.importance:
        imp = evaluation.permutation_importance(model, test, "group", cfg.importance_repeats, cfg.seed)
        imp.name = f"importance_{name}"
        reports.append(imp)
    log.info("%s: accuracy %.4f (%.1fs)", name, rep.accuracy, time.perf_counter() - t0)
    return name, model, reports


def run_pipeline(cfg: PipelineConfig) -> PipelineResult:
    t0 = time.perf_counter()
    out = Path(cfg.out_dir)
    os.makedirs(out, exist_ok=True)
    if cfg.input_log:
        a = load_event_arrays(cfg.input_log)
    else:
        a = generate_arrays(cfg.gen)
        with open(out / "events.p2dl", "wb") as f:
            write_event_arrays(a, f, source_tag(cfg.gen))
    train_idx, test_idx = split_indices(len(a), cfg.test_fraction, cfg.seed)
    a_train, a_test = a.subset(train_idx), a.subset(test_idx)
    base_train, base_test = extract(a_train, cfg.k), extract(a_test, cfg.k)

    kinds = [k for k, on in (("mlp", cfg.train_mlp), ("rf", cfg.train_rf)) if on]
    jobs = []
    for d in cfg.all_datasets():
        train = assemble(a_train, d, base_train, cfg.k)
        test = assemble(a_test, d, base_test, cfg.k)
        if cfg.write_tables:
            os.makedirs(out / "tables", exist_ok=True)
            write_table(train, out / "tables" / f"{d.name}_train.csv")
            write_table(test, out / "tables" / f"{d.name}_test.csv")
        jobs += [(kind, train, test) for kind in kinds]

    if cfg.workers > 1 and len(jobs) > 1:
        from joblib import Parallel, delayed
        done = Parallel(n_jobs=cfg.workers)(
            delayed(_job)(kind, tr, te, a_test, cfg, 1) for kind, tr, te in jobs)
    else:
        done = [_job(kind, tr, te, a_test, cfg, cfg.workers) for kind, tr, te in jobs]

    res = PipelineResult(cfg)
    for name, model, reports in done:
        res.models[name] = model
        res.reports += reports
        res.accuracy[name] = reports[0].accuracy
        if cfg.save_models:
            os.makedirs(out / "models", exist_ok=True)
            ml.save_model(model, out / "models" / f"{name}.model")
    evaluation.write_report(res.reports, out / "reports")
    # runtime knobs stay out so outputs compare equal across machines and directories
    conf = {k: v for k, v in cfg.to_dict().items() if k not in ("workers", "out_dir")}
    summary = {"config": conf, "n_events": len(a), "n_train": len(train_idx),
               "n_test": len(test_idx), "accuracy": res.accuracy}
    (out / "summary.json").write_text(json.dumps(summary, indent=1, sort_keys=True) + "\n")
    res.seconds = time.perf_counter() - t0
    return res
