"""Seeded synthetic pass events with a known receiver policy.

Each event gets its own PCG64 stream seeded from ``(seed, event_index)``,
so any slice of the log can be regenerated independently. Generated
floats sit on fixed decimal grids (see ``_ROUND``) which survive the
9-significant-digit log format exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from pass2d.geometry import angle_diff
from pass2d.ingest import FORMAT_VERSION, EventLog
from pass2d.model import GOAL, EventArrays, WorldSnapshot

# 4-3-3 for a team attacking +x, relative to the team's centre of play
FORMATION_433 = np.array([
    [-42.0, 0.0],     # 1 goalkeeper
    [-22.0, -7.0],    # 2 centre back
    [-22.0, 7.0],     # 3 centre back
    [-19.0, -22.0],   # 4 full back
    [-19.0, 22.0],    # 5 full back
    [-8.0, 0.0],      # 6 holding mid
    [0.0, -13.0],     # 7 mid
    [0.0, 13.0],      # 8 mid
    [14.0, -21.0],    # 9 winger
    [18.0, 0.0],      # 10 centre forward
    [14.0, 21.0],     # 11 winger
])

_ROUND = {"pos": 4, "vel": 5, "body": 4, "ptype": 6}
_X_LIM, _Y_LIM = 52.0, 33.0


@dataclass(frozen=True)
class PolicyWeights:
    w_risk: float = 0.3
    w_dist: float = 1.0
    w_goal: float = 20.0


@dataclass(frozen=True)
class GenConfig:
    seed: int = 0
    n_events: int = 1000
    policy_weights: PolicyWeights = field(default_factory=PolicyWeights)
    # std-dev of per-player jitter around the formation slot
    noise_sigma: float = 2.5

    def __post_init__(self):
        if not isinstance(self.seed, (int, np.integer)) or not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed!r}")
        if self.n_events <= 0:
            raise ValueError(f"n_events must be positive, got {self.n_events}")
        if not (math.isfinite(self.noise_sigma) and self.noise_sigma >= 0):
            raise ValueError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        w = self.policy_weights
        if not all(math.isfinite(v) for v in (w.w_risk, w.w_dist, w.w_goal)):
            raise ValueError("policy weights must be finite")


def policy_scores(ball, teammates, opponents, weights: PolicyWeights) -> list[float]:
    """Score each teammate position as a pass target. Plain tuples in, floats out."""
    bx, by = ball
    opp_dirs = [math.degrees(math.atan2(oy - by, ox - bx)) if (ox, oy) != (bx, by) else 0.0
                for ox, oy in opponents]
    scores = []
    for tx, ty in teammates:
        t_dir = math.degrees(math.atan2(ty - by, tx - bx)) if (tx, ty) != (bx, by) else 0.0
        risk = min(angle_diff(o, t_dir) for o in opp_dirs)
        dist = math.hypot(tx - bx, ty - by)
        goal = 1.0 / (1.0 + math.hypot(tx - GOAL.x, ty - GOAL.y))
        scores.append(weights.w_risk * risk - weights.w_dist * dist + weights.w_goal * goal)
    return scores


def _choose(unums, kicker_unum, scores) -> int:
    best_u, best_s = None, -math.inf
    for u, s in sorted(zip(unums, scores)):
        if u != kicker_unum and s > best_s:
            best_u, best_s = u, s
    return best_u


def receiver_policy(s: WorldSnapshot, weights: PolicyWeights) -> int:
    """Highest-scoring teammate other than the kicker; ties go to the lowest unum."""
    scores = policy_scores(
        (s.ball.pos.x, s.ball.pos.y),
        [(p.pos.x, p.pos.y) for p in s.teammates],
        [(p.pos.x, p.pos.y) for p in s.opponents],
        weights,
    )
    return _choose([p.unum for p in s.teammates], s.kicker_unum, scores)


def _ptypes(rng: np.random.Generator, n: int) -> np.ndarray:
    # loosely follows rcssserver heterogeneous player ranges
    u = rng.random((n, 9))
    lo = np.array([1.00, 0.40, 0.30, 0.80, 0.60, 0.70, 0.025, 0.60, 0.0050])
    hi = np.array([1.20, 0.60, 0.30, 1.00, 0.80, 1.10, 0.030, 0.90, 0.0070])
    return np.round(lo + u * (hi - lo), _ROUND["ptype"])


def _body(rng: np.random.Generator, n: int) -> np.ndarray:
    b = np.round(rng.uniform(-180.0, 180.0, n), _ROUND["body"])
    return np.where(b <= -180.0, b + 360.0, b)


def _vel(rng: np.random.Generator, n: int, sigma: float, cap: float) -> np.ndarray:
    v = rng.normal(0.0, sigma, (n, 2))
    norm = np.hypot(v[:, 0], v[:, 1])[:, None]
    v = np.where(norm > cap, v * (cap / np.maximum(norm, 1e-12)), v)
    # rounding can push the norm past the cap by one grid step
    return np.round(v * 0.999, _ROUND["vel"])


def _place_event(rng: np.random.Generator, sigma: float):
    centre = np.array([rng.uniform(-12.0, 22.0), rng.uniform(-8.0, 8.0)])
    ours = FORMATION_433 + centre + rng.normal(0.0, sigma, (11, 2))
    # opponents defend toward -x: mirrored template, a bit compressed
    theirs = -FORMATION_433 * np.array([0.85, 0.9]) + centre + np.array([4.0, 0.0]) \
        + rng.normal(0.0, sigma, (11, 2))
    ours = np.round(np.clip(ours, [-_X_LIM, -_Y_LIM], [_X_LIM, _Y_LIM]), _ROUND["pos"])
    theirs = np.round(np.clip(theirs, [-_X_LIM, -_Y_LIM], [_X_LIM, _Y_LIM]), _ROUND["pos"])
    # goalkeeper rarely on the ball
    kicker = int(rng.integers(1, 11)) if rng.random() > 0.04 else 0
    ang, rad = rng.uniform(0.0, 2 * math.pi), rng.uniform(0.0, 0.7)
    ball = np.round(ours[kicker] + rad * np.array([math.cos(ang), math.sin(ang)]), _ROUND["pos"])
    return ours, theirs, kicker, ball


def _clear_of_ball(ours: np.ndarray, kicker: int, ball: np.ndarray) -> bool:
    d = np.hypot(*(ours - ball).T)
    d[kicker] = np.inf
    return bool(d.min() > 0.05)


def event_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), int(index)])))


def generate_arrays(cfg: GenConfig) -> EventArrays:
    a = EventArrays.empty(cfg.n_events)
    unums = np.arange(1, 12)
    for i in range(cfg.n_events):
        rng = event_rng(cfg.seed, i)
        while True:
            ours, theirs, kicker, ball = _place_event(rng, cfg.noise_sigma)
            if _clear_of_ball(ours, kicker, ball):
                break
        a.cycle[i] = rng.integers(0, 6001)
        a.ball_pos[i] = ball
        a.ball_vel[i] = _vel(rng, 1, 0.3, 1.0)[0]
        a.tm_pos[i], a.opp_pos[i] = ours, theirs
        a.tm_vel[i], a.opp_vel[i] = _vel(rng, 11, 0.25, 1.0), _vel(rng, 11, 0.25, 1.0)
        a.tm_body[i], a.opp_body[i] = _body(rng, 11), _body(rng, 11)
        a.tm_ptype[i], a.opp_ptype[i] = _ptypes(rng, 11), _ptypes(rng, 11)
        a.tm_unum[i] = a.opp_unum[i] = unums
        a.kicker_slot[i] = kicker
        scores = policy_scores(tuple(ball.tolist()), [tuple(p) for p in ours.tolist()],
                               [tuple(p) for p in theirs.tolist()], cfg.policy_weights)
        a.receiver_slot[i] = _choose(unums.tolist(), kicker + 1, scores) - 1
    return a


def generate_events(cfg: GenConfig) -> EventLog:
    a = generate_arrays(cfg)
    return EventLog(FORMAT_VERSION, source_tag(cfg), "left", a.to_events())


def source_tag(cfg: GenConfig) -> str:
    w = cfg.policy_weights
    return (f"synthgen seed={cfg.seed} n={cfg.n_events} sigma={cfg.noise_sigma:g} "
            f"w_risk={w.w_risk:g} w_dist={w.w_dist:g} w_goal={w.w_goal:g}")
