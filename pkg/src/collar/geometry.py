"""Charts, coordinate changes and tangent-vector metrics.

Three charts are used throughout the package:

* the linear plane ``(u, v)``,
* the collar (polar) chart ``(x, y)`` with ``x`` an angle and ``y >= 0`` a radius,
* the ``(w, s)`` chart ``(x, y/x)`` that resolves the corner at a boundary fixed point.

Angles are always extracted with ``atan2``; no component is ever divided to get one.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

TWO_PI = 2.0 * math.pi


class OriginUndefined(ValueError):
    pass


class ChartBoundary(ValueError):
    pass


class ZeroVector(ValueError):
    pass


@dataclass(frozen=True)
class PlanePoint:
    u: float
    v: float


@dataclass(frozen=True)
class CollarPoint:
    x: float
    y: float

    def __post_init__(self):
        if not self.y >= 0.0:
            raise ValueError(f"collar radius must be >= 0, got {self.y}")
        object.__setattr__(self, "x", float(self.x) % TWO_PI)


@dataclass(frozen=True)
class WSPoint:
    w: float
    s: float


Point = Union[PlanePoint, CollarPoint, WSPoint]


@dataclass(frozen=True)
class TangentVector:
    base: Point
    v1: float
    v2: float

    @property
    def components(self) -> tuple[float, float]:
        return (self.v1, self.v2)


@dataclass(frozen=True)
class TangentMetrics:
    vector_angle: float
    line_angle: float
    slope_a: float
    slope_perp_a: float


def polar_chart(point, direction: str = "fwd"):
    """``fwd``: plane -> collar; ``inv``: collar -> plane."""
    if direction == "fwd":
        if point.u == 0.0 and point.v == 0.0:
            raise OriginUndefined("polar angle undefined at the origin")
        return CollarPoint(math.atan2(point.v, point.u), math.hypot(point.u, point.v))
    if direction == "inv":
        if point.y < 0.0:
            raise ValueError("negative radius")
        return PlanePoint(point.y * math.cos(point.x), point.y * math.sin(point.x))
    raise ValueError(f"unknown direction {direction!r}")


def ws_chart(point, direction: str = "fwd"):
    """``fwd``: (x, y) -> (x, y/x); ``inv``: (w, s) -> (w, s*w).

    Works on the raw sector coordinate: a ``CollarPoint`` would reduce ``x`` mod
    2*pi, so plain ``(x, y)`` tuples are accepted as well.
    """
    if direction == "fwd":
        x, y = (point.x, point.y) if hasattr(point, "x") else point
        if x == 0.0:
            raise ChartBoundary("the (w, s) chart excludes the line x = 0")
        return WSPoint(x, y / x)
    if direction == "inv":
        w, s = (point.w, point.s) if hasattr(point, "w") else point
        return (w, s * w)
    raise ValueError(f"unknown direction {direction!r}")


def line_angle(a1, a2, b1, b2):
    """Angle in [0, pi/2] between the lines spanned by (a1, a2) and (b1, b2). Vectorised."""
    cross = np.abs(a1 * b2 - a2 * b1)
    dot = np.abs(a1 * b1 + a2 * b2)
    return np.arctan2(cross, dot)


def vector_angle(a1, a2, b1, b2):
    cross = np.abs(a1 * b2 - a2 * b1)
    dot = a1 * b1 + a2 * b2
    return np.arctan2(cross, dot)


def tangent_metrics(a: TangentVector, b: TangentVector) -> TangentMetrics:
    if type(a.base) is not type(b.base):
        raise ValueError("tangent vectors live in different charts")
    for t in (a, b):
        if t.v1 == 0.0 and t.v2 == 0.0:
            raise ZeroVector("zero tangent vector")
    va = float(vector_angle(a.v1, a.v2, b.v1, b.v2))
    la = float(line_angle(a.v1, a.v2, b.v1, b.v2))
    slope = a.v2 / a.v1 if a.v1 != 0.0 else math.copysign(math.inf, a.v2)
    slope_perp = a.v1 / a.v2 if a.v2 != 0.0 else math.copysign(math.inf, a.v1)
    return TangentMetrics(va, la, slope, slope_perp)
