"""Return-time cells of R+ and their Markov crossing of R-."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..cones import axis_slope
from ..local_model import kernel_e, kernel_h
from .sections import SectionSpec, transitions
from .verify import _unit_frames


class CrossingFailed(RuntimeError):
    def __init__(self, t: int, curve: dict):
        super().__init__(f"image of cell t={t} does not cross R- vertically")
        self.t = t
        self.curve = curve


@dataclass
class MarkovCell:
    t: int
    x_min: float  # grid extent of the cell (offset from the prong)
    x_max: float
    a: float  # exact ends of the cell on the mid-height line
    b: float
    y_lo: float  # vertical extent of the image of the mid-height segment
    y_hi: float
    max_tangent_slope: float
    cross_ok: bool
    truncated: bool  # cut by the lateral edge of R+


def crossing_floor(params, sections: SectionSpec) -> float:
    """Lower bound for the top of T(segment), as a fraction of r_plus.

    The last step into R- multiplies y by e at the pre-exit angle; the worst
    pre-exit angle is the preimage of the edge of R-.
    """
    k = 0.5 * params.p
    edge = math.pi / 2 - k * sections.eps_minus
    pre = float(kernel_h(edge, params.lam, -1.0))
    return float(kernel_e(pre, params.lam)) * sections.r_minus / sections.r_plus


def _n_hat(cmap, sections, off, y, prong, side, n_max):
    tb = transitions(cmap, sections, prong + side * np.asarray(off, float), y, n_max)
    return np.where(tb.ok, tb.n_hat, -1), tb


def partition_markov(cmap, sections: SectionSpec, resolution=(256, 16), t_max: int = 30,
                     alpha: float = 0.25, component: int = 0, side: int = 1,
                     n_max: int = 10**6, tol: float = 1e-6, strict: bool = True) -> list:
    """Cells Delta_t of the half-component of R+ at prong ``component`` (side +-1)."""
    params = cmap.params
    p, lam = params.p, params.lam
    prong = 2.0 * math.pi * component / p
    eps = sections.eps_plus
    n_x, n_y = resolution

    # n_hat grows by one per factor lam^2 in the offset: size the grid to reach t_max
    t_top = int(_n_hat(cmap, sections, [eps * (1 - 1e-12)], [sections.r_minus], prong, side, n_max)[0][0])
    depth = (t_max - t_top + 3) * 2.0 * math.log2(lam) * 2.0 / p
    off = eps * 2.0 ** (-depth * (np.arange(n_x) + 0.5) / n_x)
    ys = sections.r_minus + (sections.r_plus - sections.r_minus) * (np.arange(n_y) + 0.5) / n_y
    go, gy = np.meshgrid(off, ys, indexing="ij")
    nh, _ = _n_hat(cmap, sections, go.ravel(), gy.ravel(), prong, side, n_max)
    nh = nh.reshape(go.shape)

    y_mid = 0.5 * (sections.r_minus + sections.r_plus)
    floor = crossing_floor(params, sections)
    ts = sorted(set(int(v) for v in nh.ravel() if 0 < v <= t_max))
    ends = _cell_ends(cmap, sections, ts, y_mid, prong, side, depth, n_max)
    live = [(t, ends[t]) for t in ts if t in ends]
    if not live:
        return []
    K = 129
    curves = []
    for t, (a, b, _) in live:
        s = np.geomspace(a, b, K)
        s[0], s[-1] = a, b
        curves.append(s)
    s_all = np.concatenate(curves)
    tb = transitions(cmap, sections, prong + side * s_all, np.full(s_all.size, y_mid), n_max)
    (U1, U2), _ = _unit_frames(params, tb.x_exit, tb.y_exit)
    d11, _, d21, _ = tb.deriv
    tang_all = np.abs(axis_slope(U1, U2, side * d11, side * d21))

    cells = []
    for i, (t, (a, b, truncated)) in enumerate(live):
        sl = slice(i * K, (i + 1) * K)
        sel = nh == t
        ok = tb.ok[sl] & (tb.n_hat[sl] == t)
        ye, tang = tb.y_exit[sl], tang_all[sl]
        monotone = bool(np.all(np.diff(ye) > 0) or np.all(np.diff(ye) < 0))
        y_lo, y_hi = float(np.min(ye)), float(np.max(ye))
        cross = bool(ok.all() and monotone and np.all(tang < alpha)
                     and y_lo <= sections.r_minus * (1 + tol)
                     and (truncated or y_hi >= floor * sections.r_plus * (1 - tol)))
        cell = MarkovCell(t, float(go[sel].min()), float(go[sel].max()), a, b, y_lo, y_hi,
                          float(np.max(tang)), cross, truncated)
        cells.append(cell)
        if strict and not cross and not truncated:
            raise CrossingFailed(t, {"offsets": s_all[sl].tolist(), "y_exit": ye.tolist()})
    return cells


def _cell_ends(cmap, sections, ts, y, prong, side, depth, n_max, n_line=2048, iters=200):
    """Exact offsets [a, b] of {n_hat = t} on the line at height y, for every t in ts.

    n_hat is non-increasing in the offset; each edge sup{o : n_hat(o) >= t} is
    bracketed on a log grid and bisected, all edges at once.
    """
    eps = sections.eps_plus
    top = eps * (1 - 1e-15)
    o = top * 2.0 ** (-(depth + 2.0) * np.arange(n_line) / (n_line - 1))  # decreasing
    nh = _n_hat(cmap, sections, o, np.full(o.size, y), prong, side, n_max)[0]
    edges = {}
    want = sorted(set(ts) | {t + 1 for t in ts})
    lo, hi, names = [], [], []
    for k in want:
        if nh[0] >= k:
            edges[k] = (top, True)
            continue
        idx = np.nonzero(nh >= k)[0]
        if idx.size == 0:
            continue
        j = idx[0]
        lo.append(o[j])  # n_hat >= k
        hi.append(o[j - 1])  # n_hat < k
        names.append(k)
    lo, hi = np.array(lo), np.array(hi)
    kk = np.array(names)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        moving = (mid != lo) & (mid != hi)
        if not moving.any():
            break
        v = _n_hat(cmap, sections, mid, np.full(mid.size, y), prong, side, n_max)[0]
        up = v >= kk
        lo = np.where(moving & up, mid, lo)
        hi = np.where(moving & ~up, mid, hi)
    for k, e in zip(names, lo):
        edges[k] = (float(e), False)
    out = {}
    for t in ts:
        if t in edges and t + 1 in edges:
            b, truncated = edges[t]
            a = float(np.nextafter(edges[t + 1][0], np.inf))
            if a < b:
                out[t] = (a, b, truncated)
    return out
