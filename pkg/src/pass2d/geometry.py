"""Planar vector, angle and projection helpers.

Angles are degrees in (-180, 180]. The field frame has +x toward the
opponent goal and +y toward the lower touchline, so "north" is -y.
Scalar functions work on :class:`Vec2`; the ``*_arr`` variants take numpy
arrays and are what the batch feature extractor uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


def _hypot(x: float, y: float) -> float:
    # numpy's hypot and atan2 rather than math's, so the scalar functions
    # agree bitwise with the array versions used for batch extraction
    return float(np.hypot(x, y))


class GeometryError(ValueError):
    """Raised on non-finite input or a degenerate construction."""


@dataclass(frozen=True, slots=True)
class Vec2:
    x: float
    y: float

    def __add__(self, other: Vec2) -> Vec2:
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: Vec2) -> Vec2:
        return Vec2(self.x - other.x, self.y - other.y)

    def __mul__(self, s: float) -> Vec2:
        return Vec2(self.x * s, self.y * s)

    __rmul__ = __mul__

    def __neg__(self) -> Vec2:
        return Vec2(-self.x, -self.y)

    def dot(self, other: Vec2) -> float:
        return self.x * other.x + self.y * other.y

    def norm(self) -> float:
        return _hypot(self.x, self.y)

    def dist(self, other: Vec2) -> float:
        return _hypot(self.x - other.x, self.y - other.y)

    def angle(self) -> float:
        """Direction in degrees; 0 for the zero vector."""
        return to_polar(self).theta

    def is_finite(self) -> bool:
        return math.isfinite(self.x) and math.isfinite(self.y)


@dataclass(frozen=True, slots=True)
class Polar:
    r: float
    theta: float


@dataclass(frozen=True, slots=True)
class Projection:
    foot: Vec2
    perp_dist: float
    along_dist: float


def normalize_deg(a: float) -> float:
    """Map an angle to (-180, 180]."""
    a = math.fmod(a, 360.0)
    if a > 180.0:
        a -= 360.0
    elif a <= -180.0:
        a += 360.0
    return a


def to_polar(v: Vec2) -> Polar:
    if not v.is_finite():
        raise GeometryError(f"non-finite vector {v}")
    r = _hypot(v.x, v.y)
    if r == 0.0:
        return Polar(0.0, 0.0)
    return Polar(r, normalize_deg(float(np.degrees(np.arctan2(v.y, v.x)))))


def angle_diff(a: float, b: float) -> float:
    """Smallest absolute separation of two directions, in [0, 180]."""
    if not (math.isfinite(a) and math.isfinite(b)):
        raise GeometryError(f"non-finite angle ({a}, {b})")
    d = abs(math.fmod(a - b, 360.0))
    return 360.0 - d if d > 180.0 else d


def project_to_line(p: Vec2, a: Vec2, b: Vec2) -> Projection:
    """Orthogonal projection of ``p`` onto the infinite line through a and b.

    ``along_dist`` is signed: negative when the foot lies behind ``a``
    relative to the direction ``b - a``.
    """
    d = b - a
    length = d.norm()
    if length == 0.0:
        raise GeometryError("degenerate line: a == b")
    ux, uy = d.x / length, d.y / length
    along = (p.x - a.x) * ux + (p.y - a.y) * uy
    foot = Vec2(a.x + along * ux, a.y + along * uy)
    return Projection(foot, p.dist(foot), along)


# -- array versions ---------------------------------------------------------


def normalize_deg_arr(a: np.ndarray) -> np.ndarray:
    a = np.fmod(a, 360.0)
    a = np.where(a > 180.0, a - 360.0, a)
    return np.where(a <= -180.0, a + 360.0, a)


def polar_arr(x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Element-wise (r, theta_deg) with theta := 0 where r == 0."""
    r = np.hypot(x, y)
    theta = normalize_deg_arr(np.degrees(np.arctan2(y, x)))
    return r, np.where(r == 0.0, 0.0, theta)


def angle_diff_arr(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    d = np.abs(np.fmod(a - b, 360.0))
    return np.where(d > 180.0, 360.0 - d, d)
