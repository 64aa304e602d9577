"""Input/output sections, return times and the transition map of a boundary map.

A *collar map* here is any object exposing the array interface

    params            LocalModelParams (degree p, dilatation lam, collar radius r)
    step(x, y)        -> (x', y')
    jac(x, y)         -> (d11, d12, d21, d22)

which both :class:`collar.local_model.LocalModel` and
:class:`collar.perturbation.PerturbedMap` provide.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..geometry import CollarPoint


class NonReturning(RuntimeError):
    pass


class EscapedCollar(RuntimeError):
    pass


class VerificationFailed(RuntimeError):
    def __init__(self, condition: int, message: str, witness=None):
        super().__init__(f"condition ({condition}): {message}")
        self.condition = condition
        self.witness = witness


@dataclass(frozen=True)
class SectionSpec:
    eps_plus: float
    eps_minus: float
    r_minus: float
    r_plus: float

    def __post_init__(self):
        if not (self.eps_plus > 0 and self.eps_minus > 0):
            raise ValueError("section half-widths must be positive")
        if not 0.0 < self.r_minus < self.r_plus:
            raise ValueError("need 0 < r_minus < r_plus")


@dataclass
class ReturnRecord:
    entry: CollarPoint
    n_hat: int
    exit: CollarPoint
    deriv: np.ndarray


@dataclass
class TransitionBatch:
    """Transitions of a batch of entry points; ``status`` 0 ok, 1 non-returning, 2 escaped."""

    x: np.ndarray
    y: np.ndarray
    n_hat: np.ndarray
    x_exit: np.ndarray
    y_exit: np.ndarray
    deriv: tuple  # (d11, d12, d21, d22) arrays
    status: np.ndarray

    def __len__(self):
        return len(self.x)

    @property
    def ok(self) -> np.ndarray:
        return self.status == 0


def _offset_to_prong(x, p, parity):
    """Signed angular offset of x from the nearest prong line j*pi/p with j of given parity."""
    period = 2.0 * math.pi / p
    shift = 0.0 if parity == 0 else math.pi / p
    return np.remainder(x - shift + 0.5 * period, period) - 0.5 * period


def in_section(p, sections: SectionSpec, x, y, which: str):
    if which == "plus":
        off, eps = _offset_to_prong(x, p, 0), sections.eps_plus
    else:
        off, eps = _offset_to_prong(x, p, 1), sections.eps_minus
    return (np.abs(off) < eps) & (off != 0.0) & (y >= sections.r_minus) & (y < sections.r_plus)


def transitions(cmap, sections: SectionSpec, x, y, n_max: int = 10**6) -> TransitionBatch:
    """Iterate every entry point until its first landing in R^-, accumulating D F^n."""
    p, r = cmap.params.p, cmap.params.r
    x0 = np.array(x, dtype=float, copy=True).ravel()
    y0 = np.array(y, dtype=float, copy=True).ravel()
    n = len(x0)
    n_hat = np.zeros(n, dtype=np.int64)
    xe, ye = np.full(n, np.nan), np.full(n, np.nan)
    D = [np.ones(n), np.zeros(n), np.zeros(n), np.ones(n)]
    status = np.ones(n, dtype=np.int8)

    idx = np.arange(n)
    cx, cy = x0.copy(), y0.copy()
    a, b, c, d = (np.ones(n), np.zeros(n), np.zeros(n), np.ones(n))
    for k in range(1, n_max + 1):
        if idx.size == 0:
            break
        j11, j12, j21, j22 = cmap.jac(cx, cy)
        a, b, c, d = (j11 * a + j12 * c, j11 * b + j12 * d, j21 * a + j22 * c, j21 * b + j22 * d)
        cx, cy = cmap.step(cx, cy)
        escaped = ~(cy < r)
        landed = ~escaped & in_section(p, sections, cx, cy, "minus")
        done = escaped | landed
        if done.any():
            sel = idx[done]
            n_hat[sel] = k
            xe[sel], ye[sel] = cx[done], cy[done]
            for slot, arr in zip(D, (a, b, c, d)):
                slot[sel] = arr[done]
            status[sel] = np.where(escaped[done], 2, 0)
            keep = ~done
            idx, cx, cy = idx[keep], cx[keep], cy[keep]
            a, b, c, d = a[keep], b[keep], c[keep], d[keep]
    return TransitionBatch(x0, y0, n_hat, xe, ye, tuple(D), status)


def transition(cmap, sections: SectionSpec, z: CollarPoint, n_max: int = 10**6) -> ReturnRecord:
    p = cmap.params.p
    if not bool(in_section(p, sections, np.array([z.x]), np.array([z.y]), "plus")[0]):
        off = float(_offset_to_prong(np.array([z.x]), p, 0)[0])
        if off == 0.0 and z.y >= sections.r_minus and z.y < sections.r_plus:
            raise NonReturning(f"{z} lies on a stable line and never reaches R^-")
        raise ValueError(f"{z} is not in R^+")
    tb = transitions(cmap, sections, [z.x], [z.y], n_max)
    if tb.status[0] == 1:
        raise NonReturning(f"no return to R^- within {n_max} iterates from {z}")
    if tb.status[0] == 2:
        raise EscapedCollar(f"orbit of {z} left the collar")
    D = np.array([[tb.deriv[0][0], tb.deriv[1][0]], [tb.deriv[2][0], tb.deriv[3][0]]])
    return ReturnRecord(z, int(tb.n_hat[0]), CollarPoint(float(tb.x_exit[0]), float(tb.y_exit[0])), D)
