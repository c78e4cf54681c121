"""Full-state snapshots at a pass decision, plus a columnar batch form.

Coordinates are in the canonical frame: the extracting team ("ours")
attacks toward +x, the opponent goal centre is at (52.5, 0).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field, fields

import numpy as np

from pass2d.geometry import Vec2

N_PLAYERS = 11
MAX_CYCLE = 6000
FIELD_HALF_X = 52.5 + 5.0
FIELD_HALF_Y = 34.0 + 5.0
MAX_PLAYER_SPEED = 3.0
MAX_BALL_SPEED = 4.0
# no rule in the server pins "ball holder"; 1.5 m is a loose kickable range
HOLDER_RADIUS = 1.5
ON_BALL_EPS = 1e-6
OURS, THEIRS = "ours", "theirs"
GOAL = Vec2(52.5, 0.0)


@dataclass(frozen=True, slots=True)
class PlayerTypeAttrs:
    max_speed: float
    decay: float
    size: float
    effort_max: float
    effort_min: float
    kickable_area: float
    kick_power: float
    margin: float
    dash_rate: float

    def as_tuple(self) -> tuple[float, ...]:
        return tuple(getattr(self, f.name) for f in fields(self))

    @classmethod
    def from_seq(cls, values) -> PlayerTypeAttrs:
        values = list(values)
        if len(values) != 9:
            raise ValueError(f"player type needs 9 values, got {len(values)}")
        return cls(*(float(v) for v in values))


PTYPE_FIELDS = tuple(f.name for f in fields(PlayerTypeAttrs))


@dataclass(frozen=True, slots=True)
class PlayerState:
    side: str
    unum: int
    pos: Vec2
    vel: Vec2
    body: float
    ptype: PlayerTypeAttrs


@dataclass(frozen=True, slots=True)
class BallState:
    pos: Vec2
    vel: Vec2


@dataclass(frozen=True, slots=True)
class WorldSnapshot:
    cycle: int
    ball: BallState
    teammates: tuple[PlayerState, ...]
    opponents: tuple[PlayerState, ...]
    kicker_unum: int

    def teammate(self, unum: int) -> PlayerState | None:
        return next((p for p in self.teammates if p.unum == unum), None)

    @property
    def kicker(self) -> PlayerState:
        p = self.teammate(self.kicker_unum)
        if p is None:
            raise KeyError(f"kicker {self.kicker_unum} not among teammates")
        return p


@dataclass(frozen=True, slots=True)
class PassEvent:
    snapshot: WorldSnapshot
    receiver_unum: int


@dataclass(frozen=True)
class Violation:
    """One broken invariant. ``code`` is stable and machine-readable."""

    code: str
    side: str | None = None
    unum: int | None = None
    detail: str = field(default="", compare=False)

    def __str__(self) -> str:
        args = ",".join(str(a) for a in (self.side, self.unum) if a is not None)
        s = f"{self.code}({args})" if args else self.code
        return f"{s}: {self.detail}" if self.detail else s


def _in_bounds(v: Vec2) -> bool:
    return abs(v.x) <= FIELD_HALF_X and abs(v.y) <= FIELD_HALF_Y


def _check_player(p: PlayerState, side: str, out: list[Violation]) -> None:
    if p.side != side:
        out.append(Violation("WrongSide", side, p.unum, f"tagged {p.side!r}"))
    if not (p.pos.is_finite() and p.vel.is_finite() and math.isfinite(p.body)):
        out.append(Violation("NonFinite", side, p.unum))
        return
    if not _in_bounds(p.pos):
        out.append(Violation("OutOfBounds", side, p.unum, f"pos {p.pos}"))
    if p.vel.norm() > MAX_PLAYER_SPEED:
        out.append(Violation("SpeedTooHigh", side, p.unum, f"|vel|={p.vel.norm():.3f}"))
    if not -180.0 < p.body <= 180.0:
        out.append(Violation("BodyNotNormalized", side, p.unum, f"body={p.body}"))
    pt = p.ptype.as_tuple()
    if len(pt) != 9 or not all(math.isfinite(v) for v in pt):
        out.append(Violation("BadPlayerType", side, p.unum, "non-finite attribute"))
    elif min(p.ptype.size, p.ptype.kickable_area, p.ptype.max_speed) <= 0:
        out.append(Violation("BadPlayerType", side, p.unum, "non-positive size/kickable/speed"))


def _check_side(players, side: str, out: list[Violation]) -> None:
    counts = Counter(p.unum for p in players)
    for u in sorted(counts):
        if not 1 <= u <= N_PLAYERS:
            out.append(Violation("UnumOutOfRange", side, u))
        elif counts[u] > 1:
            out.append(Violation("DuplicateUnum", side, u))
    for u in range(1, N_PLAYERS + 1):
        if u not in counts:
            out.append(Violation("MissingPlayer", side, u))
    for p in players:
        _check_player(p, side, out)


def validate_event(e: PassEvent) -> list[Violation]:
    """Every invariant violation of ``e``; empty list means valid."""
    out: list[Violation] = []
    s = e.snapshot
    if not (isinstance(s.cycle, int) and 0 <= s.cycle <= MAX_CYCLE):
        out.append(Violation("CycleOutOfRange", detail=f"cycle={s.cycle}"))
    ball = s.ball
    if not (ball.pos.is_finite() and ball.vel.is_finite()):
        out.append(Violation("NonFinite", detail="ball"))
    else:
        if not _in_bounds(ball.pos):
            out.append(Violation("OutOfBounds", detail=f"ball {ball.pos}"))
        if ball.vel.norm() > MAX_BALL_SPEED:
            out.append(Violation("SpeedTooHigh", detail=f"ball |vel|={ball.vel.norm():.3f}"))
    _check_side(s.teammates, OURS, out)
    _check_side(s.opponents, THEIRS, out)

    kicker = s.teammate(s.kicker_unum)
    if kicker is None:
        out.append(Violation("KickerMissing", OURS, s.kicker_unum))
    elif kicker.pos.is_finite() and ball.pos.is_finite():
        d = kicker.pos.dist(ball.pos)
        if d > HOLDER_RADIUS:
            out.append(Violation("KickerNotHolding", OURS, s.kicker_unum, f"{d:.3f} m from ball"))
    if e.receiver_unum == s.kicker_unum:
        out.append(Violation("SelfPass", OURS, e.receiver_unum))
    elif s.teammate(e.receiver_unum) is None:
        out.append(Violation("ReceiverMissing", OURS, e.receiver_unum))
    # a pass line to a teammate standing on the ball has no direction
    for p in s.teammates:
        if p.unum != s.kicker_unum and p.pos.is_finite() and ball.pos.is_finite():
            if p.pos.dist(ball.pos) < ON_BALL_EPS:
                out.append(Violation("TeammateOnBall", OURS, p.unum))
    return out


@dataclass
class EventArrays:
    """Column-oriented batch of N events (players kept in their given slot order).

    Shapes: ``*_pos``/``*_vel`` (N, 11, 2), ``*_body`` (N, 11), ``*_unum``
    (N, 11) int, ``*_ptype`` (N, 11, 9), ball arrays (N, 2). ``kicker_slot``
    and ``receiver_slot`` index into the teammate axis.
    """

    cycle: np.ndarray
    ball_pos: np.ndarray
    ball_vel: np.ndarray
    tm_pos: np.ndarray
    tm_vel: np.ndarray
    tm_body: np.ndarray
    tm_unum: np.ndarray
    tm_ptype: np.ndarray
    opp_pos: np.ndarray
    opp_vel: np.ndarray
    opp_body: np.ndarray
    opp_unum: np.ndarray
    opp_ptype: np.ndarray
    kicker_slot: np.ndarray
    receiver_slot: np.ndarray

    def __len__(self) -> int:
        return len(self.cycle)

    @property
    def kicker_unum(self) -> np.ndarray:
        return np.take_along_axis(self.tm_unum, self.kicker_slot[:, None], 1)[:, 0]

    @property
    def receiver_unum(self) -> np.ndarray:
        return np.take_along_axis(self.tm_unum, self.receiver_slot[:, None], 1)[:, 0]

    def subset(self, idx) -> EventArrays:
        return EventArrays(**{f.name: getattr(self, f.name)[idx] for f in fields(self)})

    def copy(self) -> EventArrays:
        return EventArrays(**{f.name: getattr(self, f.name).copy() for f in fields(self)})

    @classmethod
    def empty(cls, n: int) -> EventArrays:
        f8 = np.float64
        return cls(
            cycle=np.zeros(n, np.int64),
            ball_pos=np.zeros((n, 2), f8),
            ball_vel=np.zeros((n, 2), f8),
            tm_pos=np.zeros((n, 11, 2), f8),
            tm_vel=np.zeros((n, 11, 2), f8),
            tm_body=np.zeros((n, 11), f8),
            tm_unum=np.zeros((n, 11), np.int64),
            tm_ptype=np.zeros((n, 11, 9), f8),
            opp_pos=np.zeros((n, 11, 2), f8),
            opp_vel=np.zeros((n, 11, 2), f8),
            opp_body=np.zeros((n, 11), f8),
            opp_unum=np.zeros((n, 11), np.int64),
            opp_ptype=np.zeros((n, 11, 9), f8),
            kicker_slot=np.zeros(n, np.int64),
            receiver_slot=np.zeros(n, np.int64),
        )

    @classmethod
    def from_events(cls, events) -> EventArrays:
        events = list(events)
        a = cls.empty(len(events))
        for i, e in enumerate(events):
            s = e.snapshot
            if len(s.teammates) != N_PLAYERS or len(s.opponents) != N_PLAYERS:
                raise ValueError(f"event {i}: need 11 players per side")
            a.cycle[i] = s.cycle
            a.ball_pos[i] = (s.ball.pos.x, s.ball.pos.y)
            a.ball_vel[i] = (s.ball.vel.x, s.ball.vel.y)
            for pre, team in (("tm", s.teammates), ("opp", s.opponents)):
                pos, vel = getattr(a, pre + "_pos"), getattr(a, pre + "_vel")
                body, unum = getattr(a, pre + "_body"), getattr(a, pre + "_unum")
                ptype = getattr(a, pre + "_ptype")
                for j, p in enumerate(team):
                    pos[i, j] = (p.pos.x, p.pos.y)
                    vel[i, j] = (p.vel.x, p.vel.y)
                    body[i, j] = p.body
                    unum[i, j] = p.unum
                    ptype[i, j] = p.ptype.as_tuple()
            slots = [p.unum for p in s.teammates]
            a.kicker_slot[i] = slots.index(s.kicker_unum)
            a.receiver_slot[i] = slots.index(e.receiver_unum)
        return a

    def event(self, i: int) -> PassEvent:
        def team(pre: str, side: str) -> tuple[PlayerState, ...]:
            pos, vel = getattr(self, pre + "_pos")[i], getattr(self, pre + "_vel")[i]
            body, unum = getattr(self, pre + "_body")[i], getattr(self, pre + "_unum")[i]
            ptype = getattr(self, pre + "_ptype")[i]
            return tuple(
                PlayerState(
                    side, int(unum[j]), Vec2(float(pos[j, 0]), float(pos[j, 1])),
                    Vec2(float(vel[j, 0]), float(vel[j, 1])), float(body[j]),
                    PlayerTypeAttrs.from_seq(ptype[j].tolist()),
                )
                for j in range(N_PLAYERS)
            )

        tms = team("tm", OURS)
        snap = WorldSnapshot(
            cycle=int(self.cycle[i]),
            ball=BallState(Vec2(*map(float, self.ball_pos[i])), Vec2(*map(float, self.ball_vel[i]))),
            teammates=tms,
            opponents=team("opp", THEIRS),
            kicker_unum=tms[int(self.kicker_slot[i])].unum,
        )
        return PassEvent(snap, tms[int(self.receiver_slot[i])].unum)

    def to_events(self) -> list[PassEvent]:
        return [self.event(i) for i in range(len(self))]
