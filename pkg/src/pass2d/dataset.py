"""Sorting, kicker-first rearrangement, labelling and training tables.

A table row is the feature vector with teammate and opponent blocks moved
into sorted slot order. Sorting never touches values inside a block, so
every variant is a per-row block permutation of one extracted matrix.
"""

from __future__ import annotations

import enum
import json
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np
import pandas as pd

from pass2d.features import (
    BALL_WIDTH,
    COMMON_WIDTH,
    N_SLOTS,
    FeatureSchema,
    FeatureVector,
    build_schema,
    extract,
    teammate_width,
)
from pass2d.geometry import Vec2
from pass2d.model import GOAL, EventArrays, PassEvent, PlayerState


class SortMethod(str, enum.Enum):
    UNIFORM_NUMBER = "unum"
    X_COORDINATE = "x"
    FIELD_EVALUATOR = "fe"


class LabelKind(str, enum.Enum):
    UNUM = "unum"
    INDEX = "index"


class FeatureSet(str, enum.Enum):
    ALL = "all"
    POSITION_ONLY = "position"
    # everything except the per-player uniform-number columns
    NO_UNUM = "no-unum"


def field_evaluate(pos: Vec2) -> float:
    """Agent2D-style position score: x plus a bonus within 40 m of the opponent goal."""
    return pos.x + max(0.0, 40.0 - pos.dist(GOAL))


def field_evaluate_arr(pos: np.ndarray) -> np.ndarray:
    d = np.hypot(pos[..., 0] - GOAL.x, pos[..., 1] - GOAL.y)
    return pos[..., 0] + np.maximum(0.0, 40.0 - d)


def field_evaluate_mirrored_arr(pos: np.ndarray) -> np.ndarray:
    """The same evaluator seen from the other team (attacking -x)."""
    return field_evaluate_arr(-pos)


EVALUATORS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "agent2d": field_evaluate_arr,
    "agent2d-mirrored": field_evaluate_mirrored_arr,
}


@dataclass(frozen=True)
class DatasetConfig:
    sort: SortMethod = SortMethod.UNIFORM_NUMBER
    kicker_first: bool = False
    label_kind: LabelKind = LabelKind.INDEX
    feature_set: FeatureSet = FeatureSet.ALL
    evaluator: str = "agent2d"
    opponent_evaluator: str = "agent2d"

    def __post_init__(self):
        object.__setattr__(self, "sort", SortMethod(self.sort))
        object.__setattr__(self, "label_kind", LabelKind(self.label_kind))
        object.__setattr__(self, "feature_set", FeatureSet(self.feature_set))
        for ev in (self.evaluator, self.opponent_evaluator):
            if ev not in EVALUATORS:
                raise ValueError(f"unknown evaluator {ev!r}")

    @property
    def name(self) -> str:
        kf = "kf" if self.kicker_first else "nokf"
        return f"{self.sort.value}_{kf}_{self.feature_set.value}_{self.label_kind.value}"

    def to_dict(self) -> dict:
        d = asdict(self)
        for key in ("sort", "label_kind", "feature_set"):
            d[key] = d[key].value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> DatasetConfig:
        return cls(**d)


def six_variants(label_kind=LabelKind.INDEX, feature_set=FeatureSet.ALL) -> list[DatasetConfig]:
    return [DatasetConfig(s, kf, label_kind, feature_set)
            for s in SortMethod for kf in (False, True)]


# -- sorting ----------------------------------------------------------------


def sort_players(players: list[PlayerState], method: SortMethod,
                 evaluator: Callable[[Vec2], float] = field_evaluate):
    """Players in sorted order plus ``perm`` with perm[slot] = original index."""
    method = SortMethod(method)
    idx = list(range(len(players)))
    if method is SortMethod.UNIFORM_NUMBER:
        key = lambda i: players[i].unum  # noqa: E731
    elif method is SortMethod.X_COORDINATE:
        key = lambda i: (-players[i].pos.x, players[i].unum)  # noqa: E731
    else:
        key = lambda i: (-evaluator(players[i].pos), players[i].unum)  # noqa: E731
    perm = sorted(idx, key=key)
    return [players[i] for i in perm], perm


def sort_permutation(pos: np.ndarray, unum: np.ndarray, method: SortMethod,
                     evaluator: str = "agent2d") -> np.ndarray:
    """Batch version of :func:`sort_players`: (N, 11) slot -> original index."""
    method = SortMethod(method)
    if method is SortMethod.UNIFORM_NUMBER:
        return np.argsort(unum, axis=-1, kind="stable")
    primary = -pos[..., 0] if method is SortMethod.X_COORDINATE else -EVALUATORS[evaluator](pos)
    return np.lexsort((unum, primary), axis=-1)


def kicker_first_permutation(perm: np.ndarray, kicker_slot: np.ndarray) -> np.ndarray:
    """Move the kicker to slot 0, keeping everyone else's relative order."""
    is_k = perm == kicker_slot[:, None]
    # stable argsort on "not kicker" lifts the single kicker entry to the front
    order = np.argsort(~is_k, axis=-1, kind="stable")
    return np.take_along_axis(perm, order, -1)


def feature_columns(schema: FeatureSchema, feature_set: FeatureSet) -> np.ndarray:
    feature_set = FeatureSet(feature_set)
    if feature_set is FeatureSet.ALL:
        return np.arange(len(schema))
    if feature_set is FeatureSet.POSITION_ONLY:
        return schema.indices("Position")
    return np.array([i for i, c in enumerate(schema.columns) if not c.name.endswith("_unum")])


# -- tables -----------------------------------------------------------------


@dataclass
class Table:
    X: np.ndarray
    label_unum: np.ndarray
    label_index: np.ndarray
    schema: FeatureSchema
    config: DatasetConfig
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.X)

    @property
    def labels(self) -> np.ndarray:
        return self.label_index if self.config.label_kind is LabelKind.INDEX else self.label_unum

    @property
    def schema_hash(self) -> str:
        return self.schema.hash()

    def subset(self, idx) -> Table:
        return Table(self.X[idx], self.label_unum[idx], self.label_index[idx], self.schema, self.config,
                     dict(self.meta))


@dataclass(frozen=True)
class LabeledRow:
    features: FeatureVector
    label_unum: int
    label_index: int


def assemble(a: EventArrays, cfg: DatasetConfig, base: np.ndarray | None = None, k: int = 2) -> Table:
    """Sorted, labelled table for every event of ``a``.

    ``base`` is ``extract(a, k)`` when the caller already has it.
    """
    schema = build_schema(k)
    if base is None:
        base = extract(a, k)
    n = len(a)
    tw = teammate_width(k)
    tm_perm = sort_permutation(a.tm_pos, a.tm_unum, cfg.sort, cfg.evaluator)
    opp_perm = sort_permutation(a.opp_pos, a.opp_unum, cfg.sort, cfg.opponent_evaluator)
    if cfg.kicker_first:
        tm_perm = kicker_first_permutation(tm_perm, a.kicker_slot)

    tm_end = BALL_WIDTH + N_SLOTS * tw
    tm = base[:, BALL_WIDTH:tm_end].reshape(n, N_SLOTS, tw)
    opp = base[:, tm_end:].reshape(n, N_SLOTS, COMMON_WIDTH)
    X = np.concatenate([
        base[:, :BALL_WIDTH],
        np.take_along_axis(tm, tm_perm[..., None], 1).reshape(n, N_SLOTS * tw),
        np.take_along_axis(opp, opp_perm[..., None], 1).reshape(n, N_SLOTS * COMMON_WIDTH),
    ], axis=1)
    label_index = np.argmax(tm_perm == a.receiver_slot[:, None], axis=1) + 1
    cols = feature_columns(schema, cfg.feature_set)
    if len(cols) != len(schema):
        X = X[:, cols]
        schema = schema.subset(cols)
    return Table(np.ascontiguousarray(X), a.receiver_unum.copy(), label_index.astype(np.int64),
                 schema, cfg, {"k": k})


def assemble_row(e: PassEvent, cfg: DatasetConfig, k: int = 2) -> LabeledRow:
    t = assemble(EventArrays.from_events([e]), cfg, k=k)
    return LabeledRow(FeatureVector(t.X[0], t.schema), int(t.label_unum[0]), int(t.label_index[0]))


def build_datasets(a: EventArrays, configs: Iterable[DatasetConfig], k: int = 2) -> list[Table]:
    base = extract(a, k)
    return [assemble(a, cfg, base, k) for cfg in configs]


# -- CSV + sidecar ----------------------------------------------------------

LABEL_COLUMNS = ("label_unum", "label_index")


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def write_table(table: Table, path) -> None:
    """CSV with schema names + labels, and a JSON sidecar with config, k and schema hash."""
    path = Path(path)
    header = ",".join([*table.schema.names, *LABEL_COLUMNS])
    body = np.column_stack([table.X, table.label_unum, table.label_index]) if len(table) else None
    with open(path, "w", newline="\n") as f:
        f.write(header + "\n")
        if body is not None:
            fmt = ["%.9g"] * table.X.shape[1] + ["%d", "%d"]
            np.savetxt(f, body, fmt=fmt, delimiter=",")
    meta = {
        "config": table.config.to_dict(),
        "k": table.schema.k,
        "schema_hash": table.schema_hash,
        "n_rows": len(table),
        "n_columns": len(table.schema),
        "groups": [c.group for c in table.schema.columns],
    }
    meta.update({key: v for key, v in table.meta.items() if key not in meta})
    sidecar_path(path).write_text(json.dumps(meta, indent=1, sort_keys=True) + "\n")


def read_table(path) -> Table:
    path = Path(path)
    meta = json.loads(sidecar_path(path).read_text())
    cfg = DatasetConfig.from_dict(meta["config"])
    full = build_schema(meta["k"])
    df = pd.read_csv(path, float_precision="round_trip")
    names = [c for c in df.columns if c not in LABEL_COLUMNS]
    pos = {c.name: i for i, c in enumerate(full.columns)}
    try:
        schema = full.subset([pos[n] for n in names])
    except KeyError as exc:
        raise ValueError(f"{path}: unknown column {exc.args[0]!r}") from None
    if schema.hash() != meta["schema_hash"]:
        raise ValueError(f"{path}: schema hash {schema.hash()} != sidecar {meta['schema_hash']}")
    X = df[names].to_numpy(dtype=np.float64)
    return Table(np.ascontiguousarray(X), df["label_unum"].to_numpy(np.int64),
                 df["label_index"].to_numpy(np.int64), schema, cfg,
                 {k: v for k, v in meta.items() if k not in ("config", "groups")})


def table_filename(cfg: DatasetConfig) -> str:
    return f"{cfg.name}.csv"


def write_tables(tables: list[Table], out_dir) -> list[Path]:
    os.makedirs(out_dir, exist_ok=True)
    paths = []
    for t in tables:
        p = Path(out_dir) / table_filename(t.config)
        write_table(t, p)
        paths.append(p)
    return paths
