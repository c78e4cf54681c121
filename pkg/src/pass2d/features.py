"""The nine feature groups, 12 + 11*42 + 11*24 = 738 columns for k = 2.

Layout per event, in the slot order the event provides (sorting is the
dataset module's job):

* ball block (12): Position, Kicker, Velocity quadruples
* 11 teammate blocks: 24 common columns + k riskiest * 5 + k nearest * 3 + goal 2
* 11 opponent blocks: 24 common columns

A quadruple is (x, y, r, theta). "Kicker-relative" means relative to the
ball position, which stands in for the holder's position. The holder's own
riskiest block is all zeros: a pass to yourself has no line.
"""

from __future__ import annotations

import csv
import hashlib
import io
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from pass2d.geometry import (
    GeometryError,
    Vec2,
    angle_diff,
    angle_diff_arr,
    polar_arr,
    project_to_line,
    to_polar,
)
from pass2d.model import GOAL, PTYPE_FIELDS, EventArrays, PassEvent, PlayerState

GROUPS = ("Position", "Kicker", "Velocity", "Body", "Team", "PlayerType", "Riskiest", "Nearest", "Goal")
N_SLOTS = 11
BALL_WIDTH = 12
COMMON_WIDTH = 24
RISK_FIELDS = ("dist_ball", "dist_line", "angle_line", "body_perp", "proj_dist")
NEAR_FIELDS = ("dist", "angle", "body")
_QUAD = ("x", "y", "r", "t")
# ranking keys are rounded so geometrically equal angles/distances that differ
# by float noise still fall through to the documented tie-breaks
TIE_DECIMALS = 9


def _tie_key(x):
    return np.round(x, TIE_DECIMALS)


@dataclass(frozen=True)
class ColumnDef:
    name: str
    group: str
    subject: str


@dataclass(frozen=True)
class FeatureSchema:
    columns: tuple[ColumnDef, ...]
    k: int

    def __len__(self) -> int:
        return len(self.columns)

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def indices(self, group: str) -> np.ndarray:
        if group not in GROUPS:
            raise KeyError(f"unknown feature group {group!r}")
        return np.array([i for i, c in enumerate(self.columns) if c.group == group], dtype=np.int64)

    def subset(self, idx) -> FeatureSchema:
        return FeatureSchema(tuple(self.columns[i] for i in idx), self.k)

    def hash(self) -> str:
        h = hashlib.sha256()
        for c in self.columns:
            h.update(f"{c.name},{c.group},{c.subject}\n".encode())
        return h.hexdigest()[:16]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["index", "name", "group", "subject"])
        for i, c in enumerate(self.columns):
            w.writerow([i, c.name, c.group, c.subject])
        return buf.getvalue()


def teammate_width(k: int) -> int:
    return COMMON_WIDTH + 5 * k + 3 * k + 2


def _quad(prefix, tag, group, subject):
    return [ColumnDef(f"{prefix}_{tag}_{q}", group, subject) for q in _QUAD]


def _common(prefix: str, subject: str) -> list[ColumnDef]:
    cols = _quad(prefix, "pos", "Position", subject)
    cols += _quad(prefix, "kick", "Kicker", subject)
    cols += _quad(prefix, "vel", "Velocity", subject)
    cols.append(ColumnDef(f"{prefix}_body", "Body", subject))
    cols.append(ColumnDef(f"{prefix}_unum", "Team", subject))
    cols.append(ColumnDef(f"{prefix}_is_kicker", "Team", subject))
    cols += [ColumnDef(f"{prefix}_pt_{f}", "PlayerType", subject) for f in PTYPE_FIELDS]
    return cols


@lru_cache(maxsize=None)
def build_schema(k: int = 2) -> FeatureSchema:
    if not 1 <= k <= N_SLOTS:
        raise ValueError(f"k must be in 1..11, got {k}")
    cols = _quad("ball", "pos", "Position", "ball") + _quad("ball", "kick", "Kicker", "ball") \
        + _quad("ball", "vel", "Velocity", "ball")
    for s in range(1, N_SLOTS + 1):
        pre, subject = f"tm{s:02d}", f"tm_slot_{s}"
        cols += _common(pre, subject)
        for j in range(1, k + 1):
            cols += [ColumnDef(f"{pre}_risk{j}_{f}", "Riskiest", subject) for f in RISK_FIELDS]
        for j in range(1, k + 1):
            cols += [ColumnDef(f"{pre}_near{j}_{f}", "Nearest", subject) for f in NEAR_FIELDS]
        cols += [ColumnDef(f"{pre}_goal_dist", "Goal", subject), ColumnDef(f"{pre}_goal_angle", "Goal", subject)]
    for s in range(1, N_SLOTS + 1):
        cols += _common(f"opp{s:02d}", f"opp_slot_{s}")
    schema = FeatureSchema(tuple(cols), k)
    assert len({c.name for c in cols}) == len(cols)
    return schema


def tm_block(slot: int, k: int = 2) -> slice:
    """Column slice of teammate slot ``slot`` (0-based) in the unsorted layout."""
    w = teammate_width(k)
    start = BALL_WIDTH + slot * w
    return slice(start, start + w)


def opp_block(slot: int, k: int = 2) -> slice:
    start = BALL_WIDTH + N_SLOTS * teammate_width(k) + slot * COMMON_WIDTH
    return slice(start, start + COMMON_WIDTH)


# -- scalar API -------------------------------------------------------------


@dataclass(frozen=True)
class RiskiestOppFeatures:
    unum: int
    dist_ball: float
    dist_pass_line: float
    angle_to_pass_line: float
    body_vs_perp: float
    proj_dist_from_kicker: float

    def values(self) -> tuple[float, ...]:
        return (self.dist_ball, self.dist_pass_line, self.angle_to_pass_line,
                self.body_vs_perp, self.proj_dist_from_kicker)


@dataclass(frozen=True)
class NearestOppFeatures:
    unum: int
    dist: float
    angle: float
    opp_body: float


def _quad_of(v: Vec2) -> tuple[float, float, float, float]:
    p = to_polar(v)
    return (v.x, v.y, p.r, p.theta)


def ball_features(e: PassEvent) -> list[float]:
    ball = e.snapshot.ball
    return [*_quad_of(ball.pos), *_quad_of(ball.pos - ball.pos), *_quad_of(ball.vel)]


def player_common_features(p: PlayerState, e: PassEvent) -> list[float]:
    s = e.snapshot
    is_kicker = 1.0 if p.side == "ours" and p.unum == s.kicker_unum else 0.0
    return [
        *_quad_of(p.pos), *_quad_of(p.pos - s.ball.pos), *_quad_of(p.vel),
        p.body, float(p.unum), is_kicker, *p.ptype.as_tuple(),
    ]


def riskiest_opponents(e: PassEvent, target: PlayerState, k: int = 2) -> list[RiskiestOppFeatures]:
    ball = e.snapshot.ball.pos
    line = target.pos - ball
    if line.norm() == 0.0:
        raise GeometryError(f"degenerate pass line: teammate {target.unum} is on the ball")
    line_dir = line.angle()
    ranked = []
    for o in e.snapshot.opponents:
        diff = angle_diff((o.pos - ball).angle(), line_dir)
        ranked.append((diff, o.pos.dist(ball), o.unum, o))
    ranked.sort(key=lambda r: (float(_tie_key(r[0])), float(_tie_key(r[1])), r[2]))
    out = []
    for diff, dball, unum, o in ranked[:k]:
        proj = project_to_line(o.pos, ball, target.pos)
        out.append(RiskiestOppFeatures(
            unum, dball, proj.perp_dist, diff,
            abs(90.0 - angle_diff(o.body, line_dir)), proj.along_dist,
        ))
    return out


def nearest_opponents(target: PlayerState, opponents, k: int = 2) -> list[NearestOppFeatures]:
    ranked = sorted(opponents, key=lambda o: (float(_tie_key(o.pos.dist(target.pos))), o.unum))
    return [NearestOppFeatures(o.unum, o.pos.dist(target.pos), (o.pos - target.pos).angle(), o.body)
            for o in ranked[:k]]


def goal_features(target: PlayerState) -> tuple[float, float]:
    p = to_polar(GOAL - target.pos)
    return p.r, p.theta


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    schema: FeatureSchema


def extract_event(e: PassEvent, k: int = 2) -> FeatureVector:
    return FeatureVector(extract(EventArrays.from_events([e]), k)[0], build_schema(k))


# -- batch extraction -------------------------------------------------------


def _quad_arr(v: np.ndarray) -> np.ndarray:
    r, t = polar_arr(v[..., 0], v[..., 1])
    return np.stack([v[..., 0], v[..., 1], r, t], axis=-1)


def _common_arr(pos, vel, body, unum, ptype, ball_pos, is_kicker) -> np.ndarray:
    return np.concatenate([
        _quad_arr(pos), _quad_arr(pos - ball_pos[:, None, :]), _quad_arr(vel),
        body[..., None], unum[..., None].astype(np.float64), is_kicker[..., None], ptype,
    ], axis=-1)


def _teammate_extras(a: EventArrays, k: int) -> np.ndarray:
    n = len(a)
    ball = a.ball_pos[:, None, :]
    tm, opp = a.tm_pos, a.opp_pos
    line = tm - ball                                         # (n, 11, 2)
    line_len, line_dir = polar_arr(line[..., 0], line[..., 1])
    rel = opp - ball                                         # (n, 11, 2)
    dball, opp_dir = polar_arr(rel[..., 0], rel[..., 1])
    diff = angle_diff_arr(opp_dir[:, None, :], line_dir[:, :, None])   # (n, tm, opp)
    shape = diff.shape
    order = np.lexsort((np.broadcast_to(a.opp_unum[:, None, :], shape),
                        np.broadcast_to(_tie_key(dball)[:, None, :], shape), _tie_key(diff)), axis=-1)[..., :k]

    sel = np.take_along_axis(diff, order, -1)                           # (n, tm, k)
    sel_dball = np.take_along_axis(np.broadcast_to(dball[:, None, :], shape), order, -1)
    sel_rel = np.take_along_axis(rel[:, None, :, :].repeat(N_SLOTS, 1), order[..., None], 2)
    sel_body = np.take_along_axis(np.broadcast_to(a.opp_body[:, None, :], shape), order, -1)
    safe_len = np.where(line_len == 0.0, 1.0, line_len)
    ux, uy = line[..., 0] / safe_len, line[..., 1] / safe_len
    along = sel_rel[..., 0] * ux[..., None] + sel_rel[..., 1] * uy[..., None]
    footx = along * ux[..., None]
    footy = along * uy[..., None]
    dline = np.hypot(sel_rel[..., 0] - footx, sel_rel[..., 1] - footy)
    body_perp = np.abs(90.0 - angle_diff_arr(sel_body, line_dir[..., None]))
    risk = np.stack([sel_dball, dline, sel, body_perp, along], axis=-1)  # (n, tm, k, 5)
    holder = np.arange(N_SLOTS)[None, :] == a.kicker_slot[:, None]
    if np.any((line_len == 0.0) & ~holder):
        bad = np.argwhere((line_len == 0.0) & ~holder)[0]
        raise GeometryError(f"degenerate pass line in event {bad[0]}, teammate slot {bad[1]}")
    risk[holder] = 0.0

    d = opp[:, None, :, :] - tm[:, :, None, :]
    ndist = np.hypot(d[..., 0], d[..., 1])                               # (n, tm, opp)
    norder = np.lexsort((np.broadcast_to(a.opp_unum[:, None, :], shape), _tie_key(ndist)), axis=-1)[..., :k]
    nd = np.take_along_axis(d, norder[..., None], 2)
    nr, nt = polar_arr(nd[..., 0], nd[..., 1])
    nbody = np.take_along_axis(np.broadcast_to(a.opp_body[:, None, :], shape), norder, -1)
    near = np.stack([nr, nt, nbody], axis=-1)                            # (n, tm, k, 3)

    g = np.array([GOAL.x, GOAL.y]) - tm
    gr, gt = polar_arr(g[..., 0], g[..., 1])
    return np.concatenate([risk.reshape(n, N_SLOTS, 5 * k), near.reshape(n, N_SLOTS, 3 * k),
                           gr[..., None], gt[..., None]], axis=-1)


def _extract_chunk(a: EventArrays, k: int) -> np.ndarray:
    n = len(a)
    ball = np.concatenate([_quad_arr(a.ball_pos), _quad_arr(a.ball_pos - a.ball_pos),
                           _quad_arr(a.ball_vel)], axis=-1)
    is_kicker = (np.arange(N_SLOTS)[None, :] == a.kicker_slot[:, None]).astype(np.float64)
    tm = np.concatenate([
        _common_arr(a.tm_pos, a.tm_vel, a.tm_body, a.tm_unum, a.tm_ptype, a.ball_pos, is_kicker),
        _teammate_extras(a, k),
    ], axis=-1)
    opp = _common_arr(a.opp_pos, a.opp_vel, a.opp_body, a.opp_unum, a.opp_ptype, a.ball_pos,
                      np.zeros((n, N_SLOTS)))
    return np.concatenate([ball, tm.reshape(n, -1), opp.reshape(n, -1)], axis=1)


def extract(a: EventArrays, k: int = 2, chunk: int = 5000) -> np.ndarray:
    """Feature matrix (N, len(build_schema(k))) in the events' own slot order."""
    width = len(build_schema(k))
    out = np.empty((len(a), width), dtype=np.float64)
    for lo in range(0, len(a), chunk):
        hi = min(lo + chunk, len(a))
        out[lo:hi] = _extract_chunk(a.subset(slice(lo, hi)), k)
    if not np.all(np.isfinite(out)):
        raise GeometryError("non-finite feature value")
    return out


def expected_width(k: int) -> int:
    return BALL_WIDTH + N_SLOTS * teammate_width(k) + N_SLOTS * COMMON_WIDTH

