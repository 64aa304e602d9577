"""Compactly supported C^2 bump perturbations of a collar map.

A bump centred at ``(xc, yc)`` with radius ``rho`` displaces a point by

    Delta(x, y) = phi(x, y) * (a_x, a_y * y),     phi = (1 - d^2/rho^2)^3 for d < rho

where ``d`` is the chart distance (angle difference wrapped to (-pi, pi]).
The factor ``y`` in the radial displacement keeps the boundary circle
invariant. ``G = base + sum of bumps``; all derivatives are closed form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import CollarPoint, line_angle
from .local_model import Jet, LocalModel, LocalModelParams, OutOfCollar, frames_xy


class Infeasible(ValueError):
    pass


@dataclass(frozen=True)
class BumpSpec:
    center: tuple[float, float]
    radius: float
    amplitude: tuple[float, float]

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("bump radius must be positive")
        object.__setattr__(self, "center", tuple(map(float, self.center)))
        object.__setattr__(self, "amplitude", tuple(map(float, self.amplitude)))

    def scaled(self, factor: float) -> "BumpSpec":
        ax, ay = self.amplitude
        return BumpSpec(self.center, self.radius, (ax * factor, ay * factor))

    def to_dict(self) -> dict:
        return {"center": list(self.center), "radius": self.radius, "amplitude": list(self.amplitude)}

    @classmethod
    def from_dict(cls, d: dict) -> "BumpSpec":
        return cls(tuple(d["center"]), float(d["radius"]), tuple(d["amplitude"]))


def _profile(b: BumpSpec, x, y, order: int):
    """phi and its partials up to ``order``; zero outside the support."""
    dx = np.remainder(np.asarray(x, float) - b.center[0] + math.pi, 2 * math.pi) - math.pi
    dy = np.asarray(y, float) - b.center[1]
    r2 = b.radius ** 2
    q = np.maximum(1.0 - (dx * dx + dy * dy) / r2, 0.0)
    out = {"phi": q ** 3}
    if order >= 1:
        g = -6.0 * q * q / r2
        out["x"], out["y"] = g * dx, g * dy
    if order >= 2:
        c = 24.0 * q / (r2 * r2)
        base = -6.0 * q * q / r2
        out["xx"] = base + c * dx * dx
        out["yy"] = base + c * dy * dy
        out["xy"] = c * dx * dy
    return out


def displacement_partials(bumps, x, y, order: int = 2):
    """Partials of Delta = (D1, D2) up to ``order`` summed over bumps.

    Keys: '0' values, 'x', 'y' first partials, 'xx', 'xy', 'yy' second; each an
    (D1, D2) pair of arrays.
    """
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    z = np.zeros(np.broadcast(x, y).shape)
    keys = ["0"] + (["x", "y"] if order >= 1 else []) + (["xx", "xy", "yy"] if order >= 2 else [])
    acc = {k: [z.copy(), z.copy()] for k in keys}
    for b in bumps:
        ax, ay = b.amplitude
        if ax == 0.0 and ay == 0.0:
            continue
        f = _profile(b, x, y, order)
        acc["0"][0] += ax * f["phi"]
        acc["0"][1] += ay * y * f["phi"]
        if order >= 1:
            acc["x"][0] += ax * f["x"]
            acc["y"][0] += ax * f["y"]
            acc["x"][1] += ay * y * f["x"]
            acc["y"][1] += ay * (f["phi"] + y * f["y"])
        if order >= 2:
            acc["xx"][0] += ax * f["xx"]
            acc["xy"][0] += ax * f["xy"]
            acc["yy"][0] += ax * f["yy"]
            acc["xx"][1] += ay * y * f["xx"]
            acc["xy"][1] += ay * (f["x"] + y * f["xy"])
            acc["yy"][1] += ay * (2.0 * f["y"] + y * f["yy"])
    return acc


class PerturbedMap:
    """``G = base + bumps`` with the same array interface as the base map."""

    def __init__(self, base, bumps=()):
        self.base = base
        self.bumps = tuple(bumps)
        self.params: LocalModelParams = base.params

    @property
    def active_bumps(self):
        return tuple(b for b in self.bumps if b.amplitude != (0.0, 0.0))

    def step(self, x, y):
        gx, gy = self.base.step(x, y)
        bumps = self.active_bumps
        if not bumps:
            return gx, gy
        d = displacement_partials(bumps, x, y, order=0)["0"]
        return gx + d[0], gy + d[1]

    def jac(self, x, y):
        j11, j12, j21, j22 = self.base.jac(x, y)
        bumps = self.active_bumps
        if not bumps:
            return j11, j12, j21, j22
        acc = displacement_partials(bumps, x, y, order=1)
        return (j11 + acc["x"][0], j12 + acc["y"][0], j21 + acc["x"][1], j22 + acc["y"][1])

    def inverse(self, x, y, iters: int = 30):
        """Preimage by Newton's method started from the base inverse."""
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        px, py = self.base.inverse(x, y)
        if not self.active_bumps:
            return px, py
        for _ in range(iters):
            gx, gy = self.step(px, py)
            rx = np.remainder(gx - x + math.pi, 2 * math.pi) - math.pi
            ry = gy - y
            a, b, c, d = self.jac(px, py)
            det = a * d - b * c
            dxs = (d * rx - b * ry) / det
            dys = (-c * rx + a * ry) / det
            px, py = px - dxs, py - dys
            if np.all(np.abs(dxs) + np.abs(dys) < 1e-15 * (1 + np.abs(px) + np.abs(py))):
                break
        return px, py

    def min_jacobian_det(self, n: int = 129) -> float:
        worst = math.inf
        for b in self.active_bumps:
            gx, gy = _support_grid(b, n)
            a, bb, c, d = self.jac(gx, gy)
            worst = min(worst, float(np.min(a * d - bb * c)))
        return worst

    def __repr__(self):
        return f"PerturbedMap({self.base!r}, bumps={list(self.bumps)!r})"


def _support_grid(b: BumpSpec, n: int):
    s = np.linspace(-b.radius, b.radius, n)
    gx, gy = np.meshgrid(b.center[0] + s, b.center[1] + s)
    inside = (gx - b.center[0]) ** 2 + (gy - b.center[1]) ** 2 < b.radius ** 2
    return gx[inside], gy[inside]


def ck_norm(pert: PerturbedMap, k: int) -> float:
    """Max over a grid of spacing rho/64 of |partials of G - F| up to order k."""
    if k not in (0, 1, 2):
        raise ValueError("k must be 0, 1 or 2")
    bumps = pert.active_bumps
    if not bumps:
        return 0.0
    xs, ys = [], []
    for b in bumps:
        gx, gy = _support_grid(b, 129)
        xs.append(gx)
        ys.append(gy)
    x, y = np.concatenate(xs), np.concatenate(ys)
    acc = displacement_partials(bumps, x, y, order=k)
    return float(max(np.max(np.abs(comp)) for pair in acc.values() for comp in pair))


def apply_perturbed(pert: PerturbedMap, z: CollarPoint) -> CollarPoint:
    if not 0.0 <= z.y < pert.params.r:
        raise OutOfCollar(f"y = {z.y} outside the collar")
    gx, gy = pert.step(np.array(z.x), np.array(z.y))
    return CollarPoint(float(gx), float(gy))


def jet_perturbed(pert: PerturbedMap, z: CollarPoint) -> Jet:
    if not 0.0 <= z.y < pert.params.r:
        raise OutOfCollar(f"y = {z.y} outside the collar")
    a, b, c, d = pert.jac(np.array(z.x), np.array(z.y))
    D = np.array([[float(a), float(b)], [float(c), float(d)]])
    p = pert.params.p
    theta = 0.5 * p * z.x
    from .local_model import kernel_de

    dxy2 = float(kernel_de(theta, pert.params.lam)) * 0.5 * p
    bumps = pert.active_bumps
    if bumps:
        dxy2 += float(displacement_partials(bumps, z.x, z.y, order=2)["xy"][1])
    return Jet(apply_perturbed(pert, z), D, dxy2)


# ---------------------------------------------------------------------------
# families
# ---------------------------------------------------------------------------

def _fit(pert_base, b: BumpSpec) -> None:
    r = pert_base.params.r
    if b.center[1] - b.radius < 0.0 or b.center[1] + b.radius >= r:
        raise Infeasible(f"bump support {b} does not fit the collar [0, {r})")


def c2_small(delta: float):
    return ("c2_small", {"delta": float(delta)})


def c1_small_c2_large(delta1: float, m2: float):
    return ("c1_small_c2_large", {"delta1": float(delta1), "m2": float(m2)})


def make_family(kind, near: str = "boundary", base=None) -> PerturbedMap:
    """Build a perturbation of ``base`` (default: the p = 2, lam = 2 local model).

    ``c2_small(delta)``: one bump with C^2 size exactly ``delta`` (to grid accuracy).

    ``c1_small_c2_large(delta1, m2)``: a radial bump placed at y ~ x^2 above the
    boundary fixed point at angle 0, small enough that the angle between the
    invariant frames at its centre is below ``delta1 / 10``; its amplitude gives
    C^1 size ``delta1`` and the radius is shrunk until the C^2 size is >= ``m2``.
    """
    if base is None:
        base = LocalModel(LocalModelParams())
    name, args = kind
    p, r = base.params.p, base.params.r
    if any(v <= 0 for v in args.values()):
        raise ValueError(f"family parameters must be positive: {args}")
    mid = math.pi / (2 * p)  # halfway between a stable and an unstable prong
    if name == "c2_small":
        if near == "boundary":
            unit = BumpSpec((mid, 0.02 * r), 0.015 * r, (1.0, 1.0))
        else:
            unit = BumpSpec((mid, 0.5 * r), 0.2 * r, (1.0, 1.0))
        _fit(base, unit)
        n2 = ck_norm(PerturbedMap(base, [unit]), 2)
        pert = PerturbedMap(base, [unit.scaled(args["delta"] / n2)])
    elif name == "c1_small_c2_large":
        d1, m2 = args["delta1"], args["m2"]
        xc = 0.2 / p if near == "boundary" else mid
        rho = 0.1 * r if near == "boundary" else 0.2 * r
        for _ in range(200):
            yc = 1.5 * rho if near == "boundary" else 0.5 * r
            unit = BumpSpec((xc, yc), rho, (0.0, 1.0))
            _fit(base, unit)
            trial = PerturbedMap(base, [unit])
            a = d1 / ck_norm(trial, 1)
            (u1, u2), (s1, s2) = frames_xy(base.params, xc, yc)
            degenerate = near != "boundary" or float(line_angle(u1, u2, s1, s2)) <= d1 / 10
            if degenerate and a * ck_norm(trial, 2) >= m2:
                pert = PerturbedMap(base, [unit.scaled(a)])
                break
            rho *= 0.5
        else:
            raise Infeasible("could not reach the requested C^2 size inside the collar")
    else:
        raise ValueError(f"unknown family {name!r}")
    if pert.min_jacobian_det() <= 0.0:
        raise Infeasible("perturbation is not a diffeomorphism on its support")
    return pert
