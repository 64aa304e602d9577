"""Grid checks of the local model: conjugacy, flow group law, derivative bounds, angles."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import line_angle
from .local_model import (
    LocalModel,
    LocalModelParams,
    flow_xy,
    frames_ws,
    frames_xy,
    kernel_de,
)


def _cell_centres(lo, hi, n):
    return lo + (hi - lo) * (np.arange(n) + 0.5) / n


def conjugacy_residual(params: LocalModelParams, n: int = 512, x_max: float = 1.4, y_max: float = 1.0) -> float:
    """max |Psi(F z) - L0(Psi z)| over a cell-centred grid of (0, x_max) x (0, y_max), p = 2 kernel."""
    lam = params.lam
    x, y = np.meshgrid(_cell_centres(0.0, x_max, n), _cell_centres(0.0, y_max, n))
    k = 0.5 * params.p
    fx, fy = flow_xy(params, x / k, y)
    fx = fx * k
    # Psi(F z) against L0(Psi z)
    r1 = np.tan(fx) - lam**2 * np.tan(x)
    r2 = fy * np.cos(fx) - y * np.cos(x) / lam
    # the first component is compared relative to its size
    r1 = r1 / np.maximum(1.0, np.abs(lam**2 * np.tan(x)))
    return float(max(np.max(np.abs(r1)), np.max(np.abs(r2))))


def group_law_residual(params: LocalModelParams, n: int = 512, times=(0.25, 0.5, 1.0)) -> float:
    """max over t, s of |F^(t+s) - F^t o F^s| on a cell-centred grid of the collar."""
    x, y = np.meshgrid(_cell_centres(0.0, 2 * math.pi, n), _cell_centres(0.0, params.r, n))
    worst = 0.0
    for t in times:
        for s in times:
            ax, ay = flow_xy(params, x, y, t + s)
            bx, by = flow_xy(params, *flow_xy(params, x, y, s), t)
            dx = np.remainder(ax - bx + math.pi, 2 * math.pi) - math.pi
            worst = max(worst, float(np.max(np.abs(dx))), float(np.max(np.abs(ay - by))))
    return worst


@dataclass
class DerivativeBounds:
    item1_slack: float  # min over (0, x0) of min(h' - 1, lam^2 - h')
    item2_slack: float  # min over (x0, pi/2) of min(h' - lam^-2, 1 - h')
    item3_slack: float  # min of min(e - 1/lam, lam - e)
    sign_changes: int  # sign changes of d/dx (d^2 G_2 / dy dx) along x, worst row
    argmax: float  # location of the maximum of d^2 G_2 / dy dx (first row)
    lam: float
    n: int

    @property
    def ok(self) -> bool:
        return min(self.item1_slack, self.item2_slack, self.item3_slack) > 0 and self.sign_changes == 1


def derivative_bounds(cmap=None, n: int = 512, lam_tilde: float | None = None) -> DerivativeBounds:
    """The four derivative bounds on a cell-centred n x n grid of (0, pi/2) x (0, r).

    Works on the kernel angle; for a perturbed map the mixed partial comes from
    finite differences of the Jacobian.
    """
    cmap = cmap or LocalModel(LocalModelParams())
    params = cmap.params
    lam = lam_tilde or params.lam
    k = 0.5 * params.p
    th = _cell_centres(0.0, math.pi / 2, n)
    ys = _cell_centres(0.0, params.r, n)
    T, Y = np.meshgrid(th, ys)
    a, _, c, d = cmap.jac(T / k, Y)
    dG1 = a  # angle derivative is chart independent
    x0 = math.atan(1.0 / lam)
    left = T < x0
    s1 = float(np.min(np.minimum(dG1[left] - 1.0, lam**2 - dG1[left])))
    s2 = float(np.min(np.minimum(dG1[~left] - lam**-2, 1.0 - dG1[~left])))
    s3 = float(np.min(np.minimum(d - 1.0 / lam, lam - d)))
    # mixed partial d^2 G2/dy dx: c / y for F; in general from the y-derivative of c
    h = 1e-6 * params.r
    _, _, c_hi, _ = cmap.jac(T / k, Y + h)
    _, _, c_lo, _ = cmap.jac(T / k, np.maximum(Y - h, 0.0))
    mixed = (c_hi - c_lo) / ((Y + h) - np.maximum(Y - h, 0.0)) / k
    if not getattr(cmap, "active_bumps", ()):
        mixed = np.broadcast_to(kernel_de(th, params.lam), T.shape)
    slope = np.diff(mixed, axis=1)
    signs = np.sign(slope)
    changes = max(int(np.count_nonzero(row[1:] * row[:-1] < 0)) for row in signs)
    return DerivativeBounds(s1, s2, s3, changes, float(th[int(np.argmax(mixed[0]))]), lam, n)


def ws_angle(w, s):
    (u1, u2), (s1, s2) = frames_ws(w, s)
    return line_angle(u1, u2, s1, s2)


@dataclass
class AngleAsymptotic:
    C: float  # fitted at w_fit
    w_fit: float
    w_check: float
    ratio: float  # residual(w_fit) / residual(w_check), worst over s
    expected: float  # (w_fit / w_check)^3
    bound_ok: bool  # residual <= C w^3 across the whole w range

    @property
    def ok(self) -> bool:
        return self.bound_ok and abs(self.ratio / self.expected - 1.0) <= 0.1


def angle_asymptotic(s_range=(0.5, 2.0), w_fit: float = 1e-2, w_check: float = 1e-3,
                     w_range=(1e-4, 1e-2), n_s: int = 61, n_w: int = 41) -> AngleAsymptotic:
    """|angle(sigma~u, sigma~s) - w / 2s| <= C w^3, with C fitted at one w and checked at another."""
    s = np.linspace(*s_range, n_s)

    def resid(w):
        return np.abs(ws_angle(w, s) - w / (2.0 * s))

    C = float(np.max(resid(w_fit) / w_fit**3))
    ratio = float(np.min(resid(w_fit) / resid(w_check)))
    ws = np.geomspace(*w_range, n_w)
    bound_ok = all(np.all(resid(w) <= C * w**3 * (1 + 1e-6)) for w in ws)
    return AngleAsymptotic(C, w_fit, w_check, ratio, (w_fit / w_check) ** 3, bound_ok)


def parabolic_infimum(mu: float = 1.0, w_max: float = 0.1, n: int = 400, s_max: float = 10.0) -> dict:
    """Measured inf and sup of the ws line angle over {s >= mu w, 0 < w <= w_max, s <= s_max}."""
    w = np.geomspace(w_max * 1e-6, w_max, n)
    W, F = np.meshgrid(w, np.linspace(0.0, 1.0, n))
    S = mu * W + F * (s_max - mu * W)
    ang = ws_angle(W, S)
    return {"mu": mu, "w_max": w_max, "s_max": s_max,
            "inf_angle": float(np.min(ang)), "sup_angle": float(np.max(ang)),
            "upper_bound_1_over_2mu": 1.0 / (2.0 * mu)}


def transversality_zeta(params: LocalModelParams, y_range=(0.2, 0.9), n: int = 512) -> float:
    """min over x and y in y_range of the angle between sigma^u and sigma^s."""
    x, y = np.meshgrid(_cell_centres(0.0, 2 * math.pi, n), np.linspace(*y_range, n))
    (u1, u2), (s1, s2) = frames_xy(params, x, y)
    return float(np.min(line_angle(u1, u2, s1, s2)))
