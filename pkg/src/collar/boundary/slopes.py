"""Slopes of pushed unstable cones near the boundary saddle at angle 0.

Everything here is in the kernel chart (theta, y) with theta = p x / 2, where
the linearizing chart is Psi(theta, y) = (tan theta, y cos theta).  The
rectangle R = [0, x_N] x [0, Y] sits at the saddle; an orbit entering R spends
m steps in it, and the slope of the pushed cone at the exit step is compared
with

    eta(m) = c Y lam~^(2N - m - 4) - beta lam~^(-3m).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..local_model import strip_edges


class RegionMiss(RuntimeError):
    pass


@dataclass(frozen=True)
class Region:
    N: int = -2
    Y: float = 0.05

    def __post_init__(self):
        if self.N > -1:
            raise ValueError("N must be <= -1")
        if not self.Y > 0:
            raise ValueError("Y must be positive")


@dataclass
class SlopeConstants:
    lam_t: float  # min(|D_0 G|, lam)
    x_N: float  # kernel angle of the right edge of R
    c: float
    beta: float  # already multiplied by sec^3(x_N)
    beta_linear: float  # max |slope| of Psi-pushed K^u on R \ F(R)
    m_star: int
    alpha: float

    def eta(self, m, N: int, Y: float):
        m = np.asarray(m, dtype=float)
        return self.c * Y * self.lam_t ** (2 * N - m - 4) - self.beta * self.lam_t ** (-3 * m)


@dataclass
class SlopeTrace:
    entry: tuple
    m: int
    eta: float
    exit_slope: float  # min slope of the pushed cone after m steps in R
    slopes: list  # min slope after each of the next |N| + 1 steps
    ratios: list
    landing_strip_ok: bool
    bound_ok: bool
    ratio_ok: bool
    final_positive: bool
    rows: list = field(default_factory=list)  # (step, theta, y, slope) along the whole trace

    @property
    def verdict(self) -> bool:
        return self.bound_ok and self.ratio_ok and self.final_positive


@dataclass
class SlopeSummary:
    constants: SlopeConstants
    n_orbits: int
    min_margin: float  # min over orbits of (exit slope - eta(m))
    min_ratio: float
    ratio_floor: float
    all_positive: bool
    landing_ok: bool
    m_range: tuple

    @property
    def verdict(self) -> bool:
        return self.min_margin > 0 and self.min_ratio >= self.ratio_floor and self.all_positive


# ---------------------------------------------------------------------------
# kernel-chart wrappers
# ---------------------------------------------------------------------------

class _Kernel:
    """The map in (theta, y) with theta = p x / 2."""

    def __init__(self, cmap):
        self.cmap = cmap
        self.k = 0.5 * cmap.params.p

    def step(self, th, y):
        x, y2 = self.cmap.step(th / self.k, y)
        return x * self.k, y2

    def inverse(self, th, y):
        x, y2 = self.cmap.inverse(th / self.k, y)
        return x * self.k, y2

    def jac(self, th, y):
        a, b, c, d = self.cmap.jac(th / self.k, y)
        return a, b * self.k, c / self.k, d


def _frames(th, y):
    u1, u2 = np.cos(th), y * np.sin(th)
    n = np.hypot(u1, u2)
    return u1 / n, u2 / n


def _cone_rays(th, y, alpha):
    c, s = _frames(th, y)
    # boundary rays axis +- alpha * normal, oriented with positive first component
    r = []
    for sgn in (1.0, -1.0):
        v1, v2 = c - sgn * alpha * s, s + sgn * alpha * c
        flip = np.where(v1 < 0, -1.0, 1.0)
        r.append((v1 * flip, v2 * flip))
    return r


def _in_R(th, y, x_N, Y):
    return (th >= 0) & (th <= x_N) & (y >= 0) & (y <= Y)


def region_constants(cmap, region: Region, alpha: float = 0.5, n_grid: int = 257) -> SlopeConstants:
    K = _Kernel(cmap)
    params = cmap.params
    a, b, c, d = cmap.jac(np.array([0.0]), np.array([0.0]))
    norm0 = float(np.linalg.norm(np.array([[a[0], b[0]], [c[0], d[0]]]), 2))
    lam_t = min(norm0, params.lam)
    x_N = float(strip_edges(params, region.N))
    Y = region.Y

    # R \ F(R): above the image of the top edge of R
    th_src = x_N * np.linspace(0.0, 1.0, n_grid) ** 2
    th_top, y_top = K.step(th_src, np.full(n_grid, Y))
    keep = th_top <= x_N
    y_band = float(np.min(y_top[keep]))
    c_meas = lam_t * y_band / Y

    # beta: worst linear-chart slope of K^u(alpha) over the band
    tg = np.concatenate([[0.0], x_N * np.geomspace(1e-8, 1.0, n_grid)])
    th, yy = np.meshgrid(tg, np.linspace(y_band, Y, 33))
    th, yy = th.ravel(), yy.ravel()
    worst = 0.0
    for v1, v2 in _cone_rays(th, yy, alpha):
        # D Psi = [[sec^2, 0], [-y sin, cos]]
        w1 = v1 / np.cos(th) ** 2
        w2 = -yy * np.sin(th) * v1 + np.cos(th) * v2
        worst = max(worst, float(np.max(np.abs(w2 / w1))))
    beta = worst / math.cos(x_N) ** 3

    consts = SlopeConstants(lam_t, x_N, c_meas, beta, worst, 0, alpha)
    m = 1
    while consts.eta(m, region.N, Y) <= 0:
        m += 1
        if m > 10**4:
            raise RuntimeError("eta(m) never becomes positive")
    consts.m_star = m
    return consts


# ---------------------------------------------------------------------------
# tracking
# ---------------------------------------------------------------------------

def _track(cmap, region: Region, consts: SlopeConstants, th, y, cap: int = 10**5, keep_rows=False):
    """Vectorised: entries (th, y) in R \\ F(R). Returns per-orbit arrays."""
    K = _Kernel(cmap)
    x_N, Y, N = consts.x_N, region.Y, region.N
    lam_t = consts.lam_t
    n = th.size
    rays = _cone_rays(th, y, consts.alpha)
    (p1, p2), (q1, q2) = rays
    m = np.zeros(n, dtype=np.int64)
    live = np.ones(n, bool)
    cth, cy = th.copy(), y.copy()
    rows = [(0, th.copy(), y.copy(), np.minimum(p2 / p1, q2 / q1))] if keep_rows else []
    # phase 1: advance while the next iterate stays in R
    for step in range(1, cap + 1):
        if not live.any():
            break
        idx = np.nonzero(live)[0]
        nth, ny = K.step(cth[idx], cy[idx])
        inside = _in_R(nth, ny, x_N, Y)
        live[idx[~inside]] = False
        go = idx[inside]
        a, b, c, d = K.jac(cth[go], cy[go])
        p1[go], p2[go] = a * p1[go] + b * p2[go], c * p1[go] + d * p2[go]
        q1[go], q2[go] = a * q1[go] + b * q2[go], c * q1[go] + d * q2[go]
        cth[go], cy[go] = nth[inside], ny[inside]
        m[go] += 1
        if keep_rows and go.size:
            rows.append((step, cth.copy(), cy.copy(), np.minimum(p2 / p1, q2 / q1)))
    if live.any():
        raise RegionMiss("orbit did not leave R within the cap")
    exit_slope = np.minimum(p2 / p1, q2 / q1)
    positive = (p1 > 0) & (q1 > 0)
    eta = consts.eta(m, N, Y)
    slopes, ratios = [exit_slope.copy()], []
    t0 = len(rows)
    for j in range(abs(N) + 1):
        a, b, c, d = K.jac(cth, cy)
        p1, p2 = a * p1 + b * p2, c * p1 + d * p2
        q1, q2 = a * q1 + b * q2, c * q1 + d * q2
        cth, cy = K.step(cth, cy)
        s = np.minimum(p2 / p1, q2 / q1)
        ratios.append(s / slopes[-1])
        slopes.append(s)
        if keep_rows:
            rows.append((t0 + j, cth.copy(), cy.copy(), s))
    x0 = float(strip_edges(cmap.params, 0))
    x1 = float(strip_edges(cmap.params, 1))
    landing = (cth >= x0 * (1 - 1e-12)) & (cth <= x1 * (1 + 1e-12))
    return {
        "m": m,
        "eta": eta,
        "exit_slope": exit_slope,
        "positive_quadrant": positive,
        "slopes": np.array(slopes),
        "ratios": np.array(ratios),
        "landing": landing,
        "rows": rows,
        "ratio_floor": lam_t ** -3 - 1e-9,
    }


def _entry_of(cmap, region, consts, z, cap):
    K = _Kernel(cmap)
    k = 0.5 * cmap.params.p
    th, y = np.array([z.x * k]), np.array([z.y])
    x_N, Y = consts.x_N, region.Y
    if _in_R(th, y, x_N, Y)[0]:
        for _ in range(cap):
            pth, py = K.inverse(th, y)
            if not _in_R(pth, py, x_N, Y)[0]:
                return th, y
            th, y = pth, py
        raise RegionMiss("orbit stays in R backwards beyond the cap")
    for _ in range(cap):
        th, y = K.step(th, y)
        if _in_R(th, y, x_N, Y)[0]:
            return th, y
    raise RegionMiss(f"orbit of {z} never enters R within {cap} steps")


def slope_tracking(cmap, params, region: Region, z, alpha: float = 0.5, cap: int = 10**5,
                   consts: SlopeConstants | None = None) -> SlopeTrace:
    consts = consts or region_constants(cmap, region, alpha)
    th, y = _entry_of(cmap, region, consts, z, cap)
    out = _track(cmap, region, consts, th, y, cap, keep_rows=True)
    m = int(out["m"][0])
    ratios = [float(r[0]) for r in out["ratios"]]
    slopes = [float(s[0]) for s in out["slopes"][1:]]
    rows = [(int(s), float(a[0]), float(b[0]), float(c[0])) for s, a, b, c in out["rows"]]
    eta = float(out["eta"][0])
    ex = float(out["exit_slope"][0])
    return SlopeTrace(
        entry=(float(th[0]), float(y[0])),
        m=m,
        eta=eta,
        exit_slope=ex,
        slopes=slopes,
        ratios=ratios,
        landing_strip_ok=bool(out["landing"][0]),
        bound_ok=bool(out["positive_quadrant"][0]) and (m < consts.m_star or ex > eta),
        ratio_ok=all(r >= out["ratio_floor"] for r in ratios),
        final_positive=slopes[-1] > 0,
        rows=rows,
    )


def sample_entries(cmap, region: Region, consts: SlopeConstants, n: int, rng, extra: int = 8):
    """n entries in R \\ F(R) whose stay in R is at least m_star steps."""
    K = _Kernel(cmap)
    x_N, Y = consts.x_N, region.Y
    lam2 = consts.lam_t**2
    # the stay in R grows by one per factor ~lam^2 in theta
    hi = math.log(x_N / lam2 ** (consts.m_star + 1))
    lo = math.log(x_N / lam2 ** (consts.m_star + extra))
    th_out, y_out = [], []
    have = 0
    while have < n:
        th = np.exp(rng.uniform(lo, hi, 2 * n))
        y = rng.uniform(Y / consts.lam_t / 2, Y, 2 * n)
        pth, py = K.inverse(th, y)
        ok = ~_in_R(pth, py, x_N, Y)
        th_out.append(th[ok])
        y_out.append(y[ok])
        have += int(ok.sum())
    return np.concatenate(th_out)[:n], np.concatenate(y_out)[:n]


def slope_tracking_batch(cmap, region: Region, n_samples: int = 1000, rng=None,
                         alpha: float = 0.5) -> SlopeSummary:
    rng = rng if rng is not None else np.random.default_rng(0)
    consts = region_constants(cmap, region, alpha)
    th, y = sample_entries(cmap, region, consts, n_samples, rng)
    out = _track(cmap, region, consts, th, y)
    m = out["m"]
    margin = np.where(out["positive_quadrant"], out["exit_slope"] - out["eta"], -np.inf)
    return SlopeSummary(
        constants=consts,
        n_orbits=int(th.size),
        min_margin=float(np.min(margin[m >= consts.m_star])) if np.any(m >= consts.m_star) else -math.inf,
        min_ratio=float(np.min(out["ratios"])),
        ratio_floor=out["ratio_floor"],
        all_positive=bool(np.all(out["slopes"][-1] > 0)),
        landing_ok=bool(np.all(out["landing"])),
        m_range=(int(m.min()), int(m.max())),
    )
