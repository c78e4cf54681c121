"""Accuracy, uniform-number shuffle robustness, and feature importance."""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from pass2d import ml
from pass2d.dataset import DatasetConfig, Table, assemble
from pass2d.features import GROUPS, extract
from pass2d.model import N_PLAYERS, EventArrays

DEFAULT_PROPORTIONS = (0.1, 0.25, 0.50, 0.75, 1.0)


class SchemaMismatch(ValueError):
    def __init__(self, model_hash: str, table_hash: str):
        self.model_hash, self.table_hash = model_hash, table_hash
        super().__init__(f"schema mismatch: model {model_hash} vs table {table_hash}")


class EmptyTable(ValueError):
    pass


def _fmt(x) -> str:
    return "%.9g" % x if isinstance(x, (float, np.floating)) else str(x)


@dataclass
class EvalReport:
    accuracy: float
    confusion: np.ndarray
    n_rows: int
    model_fingerprint: str = ""
    dataset: dict = field(default_factory=dict)
    name: str = "eval"

    def csv(self):
        return ["metric", "value"], [["accuracy", self.accuracy], ["n_rows", self.n_rows]]

    def meta(self) -> dict:
        return {"kind": "accuracy", "model": self.model_fingerprint, "dataset": self.dataset,
                "confusion": self.confusion.tolist()}


@dataclass
class RobustnessCurve:
    proportions: list[float]
    accuracies: list[float]
    seed: int
    dataset: dict = field(default_factory=dict)
    model_fingerprint: str = ""
    name: str = "robustness"

    def csv(self):
        return ["proportion", "accuracy"], [[p, a] for p, a in zip(self.proportions, self.accuracies)]

    def meta(self) -> dict:
        return {"kind": "robustness", "seed": self.seed, "model": self.model_fingerprint,
                "dataset": self.dataset,
                "relabeling": "ceil(p*11) players per side, seeded derangement of their unums"}


@dataclass
class ImportanceTable:
    names: list[str]
    scores: np.ndarray
    stds: np.ndarray
    method: str
    n_repeats: int = 0
    seed: int | None = None
    baseline: float | None = None
    model_fingerprint: str = ""
    name: str = "importance"

    def ranking(self) -> list[str]:
        order = sorted(range(len(self.names)), key=lambda i: (-self.scores[i], i))
        return [self.names[i] for i in order]

    def score(self, name: str) -> float:
        return float(self.scores[self.names.index(name)])

    def csv(self):
        return ["feature", "score", "std"], [[n, s, d] for n, s, d in zip(self.names, self.scores, self.stds)]

    def meta(self) -> dict:
        return {"kind": "importance", "method": self.method, "n_repeats": self.n_repeats,
                "seed": self.seed, "baseline_accuracy": self.baseline, "model": self.model_fingerprint}


class DatasetMismatch(ValueError):
    pass


def _check_schema(model, table: Table) -> None:
    meta = getattr(model, "meta", {})
    want = meta.get("schema_hash")
    if want is not None and want != table.schema_hash:
        raise SchemaMismatch(want, table.schema_hash)
    # same columns but a different sort or label scheme would score garbage
    ds = meta.get("dataset")
    if ds is not None and ds != table.config.to_dict():
        raise DatasetMismatch(f"model trained on {ds}, table built with {table.config.to_dict()}")


def accuracy(model, table: Table, n_classes: int = 11) -> EvalReport:
    if len(table) == 0:
        raise EmptyTable("EmptyTable: no rows to evaluate")
    _check_schema(model, table)
    pred = ml.predict(model, table.X)
    true = table.labels - 1
    conf = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(conf, (true, pred), 1)
    return EvalReport(float(np.trace(conf) / len(table)), conf, len(table), ml.fingerprint(model),
                      table.config.to_dict())


def _score(model, X, y) -> float:
    return float(np.mean(ml.predict(model, X) == y))


# -- robustness -------------------------------------------------------------


def _derangement(rng: np.random.Generator, m: int) -> np.ndarray:
    if m < 2:
        return np.arange(m)
    while True:
        p = rng.permutation(m)
        if not np.any(p == np.arange(m)):
            return p


def relabel_unums(a: EventArrays, proportion: float, rng: np.random.Generator) -> EventArrays:
    """Copy of ``a`` where ceil(p*11) players per side swap uniform numbers.

    Player identities (positions, types, kicker/receiver slots) stay put; only
    the numbers move, with no selected player keeping its own number.
    """
    out = a.copy()
    m = math.ceil(proportion * N_PLAYERS - 1e-9)
    if m == 0:
        return out
    for unum in (out.tm_unum, out.opp_unum):
        for i in range(len(out)):
            slots = np.sort(rng.choice(N_PLAYERS, m, replace=False))
            unum[i, slots] = unum[i, slots[_derangement(rng, m)]]
    return out


def unum_shuffle_robustness(model, a: EventArrays, cfg: DatasetConfig,
                            proportions=DEFAULT_PROPORTIONS, seed: int = 0, k: int = 2) -> RobustnessCurve:
    """Accuracy after relabeling each proportion of players; p = 0 is prepended."""
    props = [float(p) for p in proportions]
    if props and props[0] == 0.0:
        props = props[1:]
    if any(not 0.0 < p <= 1.0 for p in props) or any(b <= a_ for a_, b in zip(props, props[1:])):
        raise ValueError("proportions must be strictly increasing within (0, 1]")
    if len(a) == 0:
        raise EmptyTable("EmptyTable: no events to evaluate")
    props = [0.0, *props]
    accs = []
    for i, p in enumerate(props):
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), i])))
        t = assemble(relabel_unums(a, p, rng), cfg, k=k)
        _check_schema(model, t)
        accs.append(_score(model, t.X, t.labels - 1))
    return RobustnessCurve(props, accs, seed, cfg.to_dict(), ml.fingerprint(model))


# -- importance -------------------------------------------------------------


def permutation_importance(model, table: Table, grouping: str = "group", n_repeats: int = 5,
                           seed: int = 0, groups=None) -> ImportanceTable:
    """Accuracy drop when a feature group (or single column) is shuffled across rows.

    Group members are shuffled jointly with one row permutation. A group with
    no columns in the table scores exactly 0.
    """
    if n_repeats < 1:
        raise ValueError("n_repeats must be >= 1")
    if len(table) == 0:
        raise EmptyTable("EmptyTable: no rows to evaluate")
    _check_schema(model, table)
    if grouping in ("group", "feature-group", "by_feature_group"):
        names = list(groups or GROUPS)
        unknown = [g for g in names if g not in GROUPS]
        if unknown:
            raise KeyError(f"unknown feature group(s): {unknown}")
        members = [table.schema.indices(g) for g in names]
    elif grouping in ("column", "by_column"):
        names = list(groups or table.schema.names)
        pos = {n: i for i, n in enumerate(table.schema.names)}
        unknown = [g for g in names if g not in pos]
        if unknown:
            raise KeyError(f"unknown column(s): {unknown[:5]}")
        members = [np.array([pos[n]]) for n in names]
    else:
        raise ValueError(f"unknown grouping {grouping!r}")

    y = table.labels - 1
    base = _score(model, table.X, y)
    means, stds = np.zeros(len(names)), np.zeros(len(names))
    for gi, cols in enumerate(members):
        if len(cols) == 0:
            continue
        rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), gi])))
        drops = []
        X = table.X.copy()
        for _ in range(n_repeats):
            perm = rng.permutation(len(table))
            X[:, cols] = table.X[perm][:, cols]
            drops.append(base - _score(model, X, y))
        means[gi], stds[gi] = np.mean(drops), np.std(drops)
    return ImportanceTable(names, means, stds, "permutation", n_repeats, seed, base, ml.fingerprint(model))


def gini_importance_table(model, table_or_schema, by_group: bool = True) -> ImportanceTable:
    schema = getattr(table_or_schema, "schema", table_or_schema)
    col = ml.forest.gini_importance(model)
    if not by_group:
        return ImportanceTable(schema.names, col, np.zeros_like(col), "gini", model_fingerprint=ml.fingerprint(model))
    scores = np.array([col[schema.indices(g)].sum() if len(schema.indices(g)) else 0.0 for g in GROUPS])
    return ImportanceTable(list(GROUPS), scores, np.zeros(len(GROUPS)), "gini",
                           model_fingerprint=ml.fingerprint(model))


# -- reports ----------------------------------------------------------------


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="\n") as f:
        f.write(",".join(header) + "\n")
        for r in rows:
            f.write(",".join(_fmt(v) for v in r) + "\n")


def write_report(reports, out_dir) -> list[Path]:
    """One ``<name>/{metrics.csv, meta.json}`` per report plus a top-level manifest."""
    out_dir = Path(out_dir)
    os.makedirs(out_dir, exist_ok=True)
    written = []
    names = []
    for r in reports:
        if r.name in names:
            raise ValueError(f"duplicate experiment name {r.name!r}")
        names.append(r.name)
        d = out_dir / r.name
        os.makedirs(d, exist_ok=True)
        header, rows = r.csv()
        _write_csv(d / "metrics.csv", header, rows)
        (d / "meta.json").write_text(json.dumps(r.meta(), indent=1, sort_keys=True, default=float) + "\n")
        written += [d / "metrics.csv", d / "meta.json"]
    manifest = out_dir / "manifest.json"
    manifest.write_text(json.dumps({"experiments": names}, indent=1) + "\n")
    written.append(manifest)
    return written


def evaluate_arrays(model, a: EventArrays, cfg: DatasetConfig, k: int = 2) -> EvalReport:
    """Accuracy of ``model`` on events assembled with ``cfg``."""
    return accuracy(model, assemble(a, cfg, extract(a, k), k))
