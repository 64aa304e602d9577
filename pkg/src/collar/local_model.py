"""The blow-up local model of a p-prong fixed point on the boundary collar.

Every degree p is reduced to the p = 2 sector kernel by ``theta = p x / 2``.
In that kernel the model is the polar blow-up of the linear saddle flow
``L^t(u, v) = (lam^-t u, lam^t v)``::

    F^t(x, y) = (h(x, t), y e(x, t))
    h(x, t)   = arctan(lam^2t tan x)            (continued across quadrants)
    e(x, t)   = sqrt(lam^-2t cos^2 x + lam^2t sin^2 x)

The array kernels below (``flow_xy``, ``jacobian``, ...) are what the
verifiers iterate; the point-level functions wrap them with chart types and
precondition checks.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import (
    ChartBoundary,
    CollarPoint,
    TangentVector,
    WSPoint,
)


class OutOfCollar(ValueError):
    pass


class OutOfSector(ValueError):
    pass


class DegenerateFrame(ValueError):
    pass


@dataclass(frozen=True)
class LocalModelParams:
    p: int = 2
    lam: float = 2.0
    r: float = 1.0

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 1:
            raise ValueError(f"p must be an integer >= 1, got {self.p}")
        if not self.lam > 1.0:
            raise ValueError(f"lambda must be > 1, got {self.lam}")
        if not self.r > 0.0:
            raise ValueError(f"collar radius must be > 0, got {self.r}")

    @property
    def x0(self) -> float:
        """Kernel angle where the angular derivative of F equals one."""
        return math.atan(1.0 / self.lam)


@dataclass(frozen=True)
class Jet:
    value: CollarPoint
    d: np.ndarray
    dxy2: float


# ---------------------------------------------------------------------------
# kernel (p = 2 sector) functions, vectorised over numpy arrays
# ---------------------------------------------------------------------------

HALF_PI = 0.5 * np.pi


def kernel_h(theta, lam, t=1.0):
    """Branch-continued arctan(lam^2t tan theta).

    Computed as an offset from the nearest multiple of pi/2, so angles close to
    a fixed line keep their full relative precision.
    """
    theta = np.asarray(theta, dtype=float)
    k = np.round(theta / HALF_PI)
    phi = theta - k * HALF_PI
    odd = np.remainder(k, 2.0) == 1.0
    a = np.where(odd, lam ** (-t), lam ** t)
    return k * HALF_PI + np.arctan2(a * np.sin(phi), np.cos(phi) / a)


def kernel_e(theta, lam, t=1.0):
    c, s = np.cos(theta), np.sin(theta)
    return np.sqrt(lam ** (-2 * t) * c * c + lam ** (2 * t) * s * s)


def kernel_dh(theta, lam, t=1.0):
    c, s = np.cos(theta), np.sin(theta)
    L = lam ** (2 * t)
    return L / (c * c + L * L * s * s)


def kernel_de(theta, lam, t=1.0):
    """Derivative of e(., t) with respect to the kernel angle."""
    return (lam ** (2 * t) - lam ** (-2 * t)) * np.sin(2 * theta) / (2.0 * kernel_e(theta, lam, t))


def flow_xy(params: LocalModelParams, x, y, t=1.0):
    """Time-t map of the collar flow in the x-chart, any degree p."""
    p, lam = params.p, params.lam
    theta = 0.5 * p * np.asarray(x, dtype=float)
    return (2.0 / p) * kernel_h(theta, lam, t), np.asarray(y, dtype=float) * kernel_e(theta, lam, t)


def jacobian(params: LocalModelParams, x, y, t=1.0):
    """Entries (d11, d12, d21, d22) of D F^t at (x, y); d12 vanishes identically."""
    p, lam = params.p, params.lam
    theta = 0.5 * p * np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    d11 = kernel_dh(theta, lam, t)
    d21 = y * kernel_de(theta, lam, t) * (0.5 * p)
    d22 = kernel_e(theta, lam, t)
    return d11, np.zeros_like(d11), d21, d22


def mixed_second(params: LocalModelParams, x):
    """d^2 F_2 / dy dx = e'(x) in the x-chart."""
    theta = 0.5 * params.p * np.asarray(x, dtype=float)
    return kernel_de(theta, params.lam) * (0.5 * params.p)


def inverse_xy(params: LocalModelParams, x, y):
    return flow_xy(params, x, y, t=-1.0)


class LocalModel:
    """The unperturbed map F, exposed through the array interface the verifiers use."""

    def __init__(self, params: LocalModelParams):
        self.params = params

    def step(self, x, y):
        return flow_xy(self.params, x, y)

    def jac(self, x, y):
        return jacobian(self.params, x, y)

    def inverse(self, x, y):
        return inverse_xy(self.params, x, y)

    def __repr__(self):
        return f"LocalModel({self.params!r})"


# ---------------------------------------------------------------------------
# point-level operations
# ---------------------------------------------------------------------------

def _check_collar(params: LocalModelParams, y: float):
    if not 0.0 <= y < params.r:
        raise OutOfCollar(f"y = {y} outside the collar [0, {params.r})")


def apply_F(params: LocalModelParams, z: CollarPoint) -> CollarPoint:
    _check_collar(params, z.y)
    x1, y1 = flow_xy(params, z.x, z.y)
    return CollarPoint(float(x1), float(y1))


def apply_flow(params: LocalModelParams, t: float, z, chart: str = "sector"):
    """Time-t flow. ``sector``: collar point, ``ws``: point of the (w, s) chart.

    The (w, s) chart lives on the p = 2 kernel angle; at w = 0 the flow is the
    l'Hopital limit ``s -> lam^-3t s``.
    """
    lam = params.lam
    if chart == "sector":
        _check_collar(params, z.y)
        x1, y1 = flow_xy(params, z.x, z.y, t)
        return CollarPoint(float(x1), float(y1))
    if chart == "ws":
        w, s = float(z.w), float(z.s)
        _check_collar(params, abs(s * w))
        if w == 0.0:
            return WSPoint(0.0, s * lam ** (-3.0 * t))
        hw = float(kernel_h(w, lam, t))
        return WSPoint(hw, s * (w / hw) * float(kernel_e(w, lam, t)))
    raise ValueError(f"unknown chart {chart!r}")


def jet_F(params: LocalModelParams, z: CollarPoint) -> Jet:
    _check_collar(params, z.y)
    d11, d12, d21, d22 = jacobian(params, z.x, z.y)
    d = np.array([[float(d11), float(d12)], [float(d21), float(d22)]])
    return Jet(apply_F(params, z), d, float(mixed_second(params, z.x)))


def frames_xy(params: LocalModelParams, x, y):
    """Unstable and stable frame fields (arrays) in the x-chart."""
    theta = 0.5 * params.p * np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    k = 2.0 / params.p
    c, s = np.cos(theta), np.sin(theta)
    return (k * c, y * s), (-k * s, y * c)


def frames_ws(w, s):
    """Frame fields of the (w, s) chart (p = 2 kernel)."""
    cw, sw = np.cos(w), np.sin(w)
    su = (w * cw, -s * cw + s * w * sw)
    ss = (-w * sw, s * sw + s * w * cw)
    return su, ss


def invariant_frames(params: LocalModelParams, z) -> dict:
    if isinstance(z, WSPoint):
        (u1, u2), (s1, s2) = frames_ws(z.w, z.s)
        vecs = {"sigma_u": (float(u1), float(u2)), "sigma_s": (float(s1), float(s2))}
    else:
        (u1, u2), (s1, s2) = frames_xy(params, z.x, z.y)
        vecs = {"sigma_u": (float(u1), float(u2)), "sigma_s": (float(s1), float(s2))}
    for name, (a, b) in vecs.items():
        if a == 0.0 and b == 0.0:
            raise DegenerateFrame(f"{name} vanishes at {z}")
    return {k: TangentVector(z, *v) for k, v in vecs.items()}


def linearization(params: LocalModelParams, z, which: str):
    """Psi: (x, y) -> (tan x, y cos x); Phi: its inverse; L0: D_0 F = diag(lam^2, 1/lam).

    Points are plain ``(a, b)`` pairs in the p = 2 kernel chart.
    """
    a, b = z
    if which == "psi":
        if abs(a) >= math.pi / 2:
            raise ChartBoundary("Psi is defined on |x| < pi/2")
        return (math.tan(a), b * math.cos(a))
    if which == "phi":
        return (math.atan(a), b * math.sqrt(1.0 + a * a))
    if which == "L0":
        return (params.lam ** 2 * a, b / params.lam)
    raise ValueError(f"unknown linearization map {which!r}")


def strip_edges(params: LocalModelParams, n):
    """x_n = arctan(lam^(2n-1))."""
    return np.arctan(params.lam ** (2.0 * np.asarray(n, dtype=float) - 1.0))


def strip_index(params: LocalModelParams, x: float) -> int:
    """n with x in (x_n, x_{n+1}]; x is the kernel angle in (0, pi/2)."""
    if not 0.0 < x < math.pi / 2:
        raise OutOfSector(f"x = {x} outside (0, pi/2)")
    L = math.log(math.tan(x)) / math.log(params.lam)
    if abs(L - round(L)) < 1e-9:
        L = float(round(L))
    return math.ceil((L + 1.0) / 2.0) - 1
