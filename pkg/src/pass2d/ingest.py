"""Reader/writer for ``.p2dl`` pass-event logs.

One JSON object per line. Line 1 is the header::

    {"format_version":"1","source":"...","frame":"left"}

every further line is one event with keys, in this order::

    cycle, ball{pos,vel}, teammates[11], opponents[11], kicker_unum, receiver_unum

and each player record is ``{unum,pos,vel,body,ptype[9]}`` (ptype in the
order of :data:`pass2d.model.PTYPE_FIELDS`). Vectors are ``[x, y]``.
Floats carry 9 significant digits in their shortest round-tripping form.

In memory, events are always in the canonical frame (ours attacking +x).
A ``frame: "right"`` log stores coordinates rotated by 180 degrees; the
reader and writer apply the rotation.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable

from pass2d.geometry import Vec2, normalize_deg
from pass2d.model import (
    OURS,
    THEIRS,
    BallState,
    EventArrays,
    PassEvent,
    PlayerState,
    PlayerTypeAttrs,
    Violation,
    WorldSnapshot,
    validate_event,
)

FORMAT_VERSION = "1"
SUPPORTED_VERSIONS = frozenset({"1"})
FRAMES = ("left", "right")


class EventLogError(ValueError):
    def __init__(self, message: str, line: int | None = None, column: int | None = None,
                 violations: list[Violation] | None = None):
        self.line = line
        self.column = column
        self.violations = violations or []
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


@dataclass
class EventLog:
    format_version: str = FORMAT_VERSION
    source: str = ""
    frame: str = "left"
    events: list[PassEvent] = field(default_factory=list)

    def arrays(self) -> EventArrays:
        return EventArrays.from_events(self.events)


def fmt_float(x: float) -> str:
    return repr(float(f"{float(x):.9g}"))


def quantize(x: float) -> float:
    """The value a float takes after one write/parse cycle."""
    return float(f"{float(x):.9g}")


def mirror_event(e: PassEvent) -> PassEvent:
    """Rotate an event by 180 degrees about the field centre (an involution)."""

    def flip(v: Vec2) -> Vec2:
        return Vec2(-v.x, -v.y)

    def player(p: PlayerState) -> PlayerState:
        return PlayerState(p.side, p.unum, flip(p.pos), flip(p.vel), normalize_deg(p.body + 180.0), p.ptype)

    s = e.snapshot
    snap = WorldSnapshot(
        s.cycle,
        BallState(flip(s.ball.pos), flip(s.ball.vel)),
        tuple(player(p) for p in s.teammates),
        tuple(player(p) for p in s.opponents),
        s.kicker_unum,
    )
    return PassEvent(snap, e.receiver_unum)


# -- writing ----------------------------------------------------------------


def _vec(x: float, y: float) -> str:
    return f"[{fmt_float(x)},{fmt_float(y)}]"


def _player_line(unum, px, py, vx, vy, body, ptype) -> str:
    pt = ",".join(fmt_float(v) for v in ptype)
    return (f'{{"unum":{int(unum)},"pos":{_vec(px, py)},"vel":{_vec(vx, vy)},'
            f'"body":{fmt_float(body)},"ptype":[{pt}]}}')


def _event_line(e: PassEvent) -> str:
    s = e.snapshot

    def team(ps):
        return ",".join(
            _player_line(p.unum, p.pos.x, p.pos.y, p.vel.x, p.vel.y, p.body, p.ptype.as_tuple()) for p in ps
        )

    return (f'{{"cycle":{int(s.cycle)},"ball":{{"pos":{_vec(s.ball.pos.x, s.ball.pos.y)},'
            f'"vel":{_vec(s.ball.vel.x, s.ball.vel.y)}}},'
            f'"teammates":[{team(s.teammates)}],"opponents":[{team(s.opponents)}],'
            f'"kicker_unum":{int(s.kicker_unum)},"receiver_unum":{int(e.receiver_unum)}}}')


def _arrays_line(a: EventArrays, i: int) -> str:
    def team(pre):
        pos, vel = getattr(a, pre + "_pos")[i].tolist(), getattr(a, pre + "_vel")[i].tolist()
        body, unum = getattr(a, pre + "_body")[i].tolist(), getattr(a, pre + "_unum")[i].tolist()
        ptype = getattr(a, pre + "_ptype")[i].tolist()
        return ",".join(
            _player_line(unum[j], *pos[j], *vel[j], body[j], ptype[j]) for j in range(len(unum))
        )

    bp, bv = a.ball_pos[i].tolist(), a.ball_vel[i].tolist()
    return (f'{{"cycle":{int(a.cycle[i])},"ball":{{"pos":{_vec(*bp)},"vel":{_vec(*bv)}}},'
            f'"teammates":[{team("tm")}],"opponents":[{team("opp")}],'
            f'"kicker_unum":{int(a.tm_unum[i, a.kicker_slot[i]])},'
            f'"receiver_unum":{int(a.tm_unum[i, a.receiver_slot[i]])}}}')


def _header_line(version: str, source: str, frame: str) -> str:
    return json.dumps({"format_version": version, "source": source, "frame": frame},
                      separators=(",", ":"), ensure_ascii=True)


def _write_lines(lines: Iterable[str], sink: BinaryIO) -> int:
    n = 0
    for line in lines:
        n += sink.write((line + "\n").encode("utf-8"))
    return n


def write_event_log(log: EventLog, sink: BinaryIO) -> int:
    """Write ``log`` to a binary sink; returns the number of bytes written."""
    if log.frame not in FRAMES:
        raise ValueError(f"unknown frame {log.frame!r}")
    events = log.events if log.frame == "left" else (mirror_event(e) for e in log.events)
    lines = [_header_line(log.format_version, log.source, log.frame)]
    lines.extend(_event_line(e) for e in events)
    return _write_lines(lines, sink)


def write_event_arrays(a: EventArrays, sink: BinaryIO, source: str = "") -> int:
    """Bulk writer for canonical-frame arrays; byte-identical to write_event_log."""
    lines = [_header_line(FORMAT_VERSION, source, "left")]
    lines.extend(_arrays_line(a, i) for i in range(len(a)))
    return _write_lines(lines, sink)


def save_event_log(log: EventLog, path) -> int:
    with open(path, "wb") as f:
        return write_event_log(log, f)


# -- parsing ----------------------------------------------------------------


def _get(d: dict, key: str, line: int):
    if not isinstance(d, dict) or key not in d:
        raise EventLogError(f"Malformed: missing key {key!r}", line)
    return d[key]


def _num(v, what: str, line: int) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise EventLogError(f"Malformed: {what} is not a number", line)
    return float(v)


def _int(v, what: str, line: int) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise EventLogError(f"Malformed: {what} is not an integer", line)
    return v


def _vec2(v, what: str, line: int) -> Vec2:
    if not isinstance(v, list) or len(v) != 2:
        raise EventLogError(f"Malformed: {what} must be [x, y]", line)
    return Vec2(_num(v[0], what, line), _num(v[1], what, line))


def _player(d, side: str, line: int) -> PlayerState:
    unum = _int(_get(d, "unum", line), "unum", line)
    what = f"{side} {unum}"
    ptype = _get(d, "ptype", line)
    if not isinstance(ptype, list) or len(ptype) != 9:
        raise EventLogError(f"Malformed: {what} ptype must have 9 values", line)
    return PlayerState(
        side, unum,
        _vec2(_get(d, "pos", line), f"{what} pos", line),
        _vec2(_get(d, "vel", line), f"{what} vel", line),
        _num(_get(d, "body", line), f"{what} body", line),
        PlayerTypeAttrs.from_seq(_num(v, f"{what} ptype", line) for v in ptype),
    )


def _event(d, line: int) -> PassEvent:
    ball = _get(d, "ball", line)
    teams = {}
    for key, side in (("teammates", OURS), ("opponents", THEIRS)):
        lst = _get(d, key, line)
        if not isinstance(lst, list):
            raise EventLogError(f"Malformed: {key} must be a list", line)
        teams[side] = tuple(_player(p, side, line) for p in lst)
    snap = WorldSnapshot(
        _int(_get(d, "cycle", line), "cycle", line),
        BallState(_vec2(_get(ball, "pos", line), "ball pos", line),
                  _vec2(_get(ball, "vel", line), "ball vel", line)),
        teams[OURS], teams[THEIRS],
        _int(_get(d, "kicker_unum", line), "kicker_unum", line),
    )
    return PassEvent(snap, _int(_get(d, "receiver_unum", line), "receiver_unum", line))


def _loads(text: str, line: int):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise EventLogError(f"Malformed: {exc.msg}", line, exc.colno) from None


def parse_event_log(stream) -> EventLog:
    """Parse a ``.p2dl`` byte stream (or bytes). Raises EventLogError on the first bad line."""
    if isinstance(stream, (bytes, bytearray)):
        stream = io.BytesIO(stream)
    lines = iter(stream)
    try:
        first = next(lines)
    except StopIteration:
        raise EventLogError("Malformed: empty input, header expected", 1) from None
    header = _loads(first.decode("utf-8"), 1)
    version = _get(header, "format_version", 1)
    if version not in SUPPORTED_VERSIONS:
        raise EventLogError(f"UnknownVersion: {version!r}", 1)
    frame = _get(header, "frame", 1)
    if frame not in FRAMES:
        raise EventLogError(f"Malformed: unknown frame {frame!r}", 1)
    log = EventLog(version, str(_get(header, "source", 1)), frame, [])

    for lineno, raw in enumerate(lines, start=2):
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise EventLogError(f"Malformed: {exc.reason}", lineno, exc.start + 1) from None
        if not text.strip():
            continue
        e = _event(_loads(text, lineno), lineno)
        if frame == "right":
            e = mirror_event(e)
        bad = validate_event(e)
        if bad:
            raise EventLogError("; ".join(str(v) for v in bad), lineno, violations=bad)
        log.events.append(e)
    return log


def load_event_log(path) -> EventLog:
    with open(Path(path), "rb") as f:
        return parse_event_log(f)


def load_event_arrays(path) -> EventArrays:
    return load_event_log(path).arrays()


def arrays_to_log(a: EventArrays, source: str = "") -> EventLog:
    return EventLog(FORMAT_VERSION, source, "left", a.to_events())

