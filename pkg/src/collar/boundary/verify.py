"""Four-condition verdict for a boundary map on the collar.

The conditions checked, in order:
  (1) 2p boundary fixed points of saddle type;
  (2) Morse-Smale dynamics on the boundary circle (plus a measured defect of
      the radial lines l_j from invariance, reported but not gated);
  (3) every R+ grid point returns to R- (section search);
  (4) the transition map T has a hyperbolic cone structure.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.optimize import brentq

from ..cones import image_batch
from ..local_model import frames_xy
from .sections import (
    SectionSpec,
    TransitionBatch,
    VerificationFailed,
    in_section,
    transitions,
)


@dataclass(frozen=True)
class SearchBudget:
    n_x: int = 640  # entry offsets per half-component (log spaced)
    n_y: int = 40  # entry heights
    depth_bits: int = 30  # smallest offset is eps_plus * 2**-depth_bits
    n_max: int = 10**6
    eps_minus: float = 0.125
    eps_exponents: tuple = tuple(range(3, 15))
    r_halvings: tuple = (0, 1, 2, 3)
    r_plus0: float = 0.1
    alphas: tuple = (0.5, 0.25, 0.125, 0.0625)
    prescreen: tuple = (48, 6)
    support_samples: int = 33
    backward_cap: int = 400
    bisect_iters: int = 200
    max_full_checks: int = 3
    workers: int = 1
    chunk: int = 16384

    def sections(self, lam: float):
        for j in self.r_halvings:
            r_plus = self.r_plus0 * 2.0**-j
            for k in self.eps_exponents:
                yield SectionSpec(2.0**-k, self.eps_minus, r_plus / lam, r_plus)


@dataclass
class FixedPoint:
    x: float
    eigenvalues: tuple
    saddle: bool

    def to_dict(self):
        return {"x": self.x, "eigenvalues": list(self.eigenvalues), "saddle": self.saddle}


@dataclass
class ConeStructure:
    alpha: float
    alpha0: float  # worst image slope of K^u(alpha) under DT
    alpha0_stable: float  # same for K^s under DT^-1
    sigma: float  # min expansion of both
    min_margin: float  # alpha - max(alpha0, alpha0_stable)
    n_transitions: int
    n_targeted: int
    shrink: float = 0.0  # measured cone shrink per transition, max(alpha0, alpha0_stable) / alpha


@dataclass
class BoundaryMapReport:
    degree: int
    fixed_points: list
    morse_smale_ok: bool
    sections: SectionSpec | None
    cone_structure: ConeStructure | None
    verdict: str
    failed_condition: int | None = None
    witness: dict | None = None
    line_defect: float = 0.0
    sections_tried: int = 0
    notes: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"

    def raise_for_verdict(self):
        if not self.passed:
            msg = self.notes[-1] if self.notes else "verification failed"
            raise VerificationFailed(self.failed_condition, msg, self.witness)

    def to_dict(self) -> dict:
        return {
            "degree": self.degree,
            "fixed_points": [f.to_dict() for f in self.fixed_points],
            "morse_smale_ok": self.morse_smale_ok,
            "sections": None if self.sections is None else asdict(self.sections),
            "cone_structure": None if self.cone_structure is None else asdict(self.cone_structure),
            "verdict": self.verdict,
            "failed_condition": self.failed_condition,
            "witness": self.witness,
            "line_defect": self.line_defect,
            "sections_tried": self.sections_tried,
            "notes": list(self.notes),
        }


# ---------------------------------------------------------------------------
# conditions (1) and (2): boundary circle
# ---------------------------------------------------------------------------

def _circle_displacement(cmap, x):
    gx, _ = cmap.step(np.asarray(x, float), np.zeros_like(np.asarray(x, float)))
    return np.remainder(gx - x + math.pi, 2 * math.pi) - math.pi


def boundary_fixed_points(cmap, per_prong: int = 64) -> list:
    p = cmap.params.p
    n = 2 * p * per_prong
    xs = (np.arange(n) + 0.5) * (2 * math.pi / n)
    xs = np.append(xs, xs[0] + 2 * math.pi)
    f = _circle_displacement(cmap, xs)
    roots = []
    for i in range(n):
        a, b = f[i], f[i + 1]
        if a == 0.0:
            roots.append(xs[i])
        elif a * b < 0 and abs(a - b) < math.pi:
            g = lambda t: float(_circle_displacement(cmap, np.array([t]))[0])
            roots.append(brentq(g, xs[i], xs[i + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps))
    out = []
    for x in sorted(float(np.remainder(r, 2 * math.pi)) for r in roots):
        j = cmap.jac(np.array([x]), np.array([0.0]))
        m = np.array([[float(j[0][0]), float(j[1][0])], [float(j[2][0]), float(j[3][0])]])
        ev = np.linalg.eigvals(m)
        ev = tuple(sorted(float(abs(e)) for e in ev))
        out.append(FixedPoint(x, ev, ev[0] < 1.0 < ev[1]))
    return out


def morse_smale_check(cmap, fixed: list, per_prong: int = 64) -> bool:
    p = cmap.params.p
    if len(fixed) != 2 * p:
        return False
    # the circle map must be an increasing homeomorphism with alternating
    # attracting / repelling hyperbolic fixed points
    n = 2 * p * per_prong
    xs = np.arange(n + 1) * (2 * math.pi / n)
    gx, _ = cmap.step(xs, np.zeros_like(xs))
    inc = np.remainder(np.diff(gx), 2 * math.pi)
    if not np.all((inc > 0) & (inc < math.pi)):
        return False
    kinds = []
    for fp in fixed:
        j = cmap.jac(np.array([fp.x]), np.array([0.0]))
        d = abs(float(j[0][0]))
        if abs(d - 1.0) < 1e-9:
            return False
        kinds.append(d > 1.0)
    return all(kinds[i] != kinds[(i + 1) % len(kinds)] for i in range(len(kinds)))


def line_defect(cmap, r_plus: float, n: int = 257) -> float:
    """max over the lines l_j (x = j pi / p) of the angular drift of their image."""
    p = cmap.params.p
    ys = np.linspace(0.0, r_plus, n)[1:]
    worst = 0.0
    for j in range(2 * p):
        x0 = j * math.pi / p
        gx, _ = cmap.step(np.full_like(ys, x0), ys)
        drift = np.remainder(gx - x0 + math.pi, 2 * math.pi) - math.pi
        worst = max(worst, float(np.max(np.abs(drift))))
    return worst


# ---------------------------------------------------------------------------
# grids and transitions
# ---------------------------------------------------------------------------

def entry_grid(p: int, sections: SectionSpec, n_x: int, n_y: int, depth_bits: float):
    """Offsets log spaced in (eps_plus 2^-depth, eps_plus), both sides of every even prong."""
    off = sections.eps_plus * 2.0 ** (-depth_bits * (np.arange(n_x) + 0.5) / n_x)
    ys = sections.r_minus + (sections.r_plus - sections.r_minus) * (np.arange(n_y) + 0.5) / n_y
    xs = []
    for j in range(p):
        base = 2.0 * math.pi * j / p
        for sgn in (1.0, -1.0):
            # no reduction mod 2 pi: keeps relative precision at the prong x = 0
            xs.append(base + sgn * off)
    xs = np.concatenate(xs)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    return gx.ravel(), gy.ravel()


def run_transitions(cmap, sections, x, y, n_max, workers=1, chunk=16384) -> TransitionBatch:
    """Chunked transitions; results are concatenated in input order."""
    x = np.asarray(x, float).ravel()
    y = np.asarray(y, float).ravel()
    bounds = [(i, min(i + chunk, len(x))) for i in range(0, len(x), chunk)] or [(0, 0)]
    job = lambda ab: transitions(cmap, sections, x[ab[0]:ab[1]], y[ab[0]:ab[1]], n_max)
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            parts = list(ex.map(job, bounds))
    else:
        parts = [job(ab) for ab in bounds]
    return concat_batches(parts)


def concat_batches(parts) -> TransitionBatch:
    cat = lambda name: np.concatenate([getattr(b, name) for b in parts])
    deriv = tuple(np.concatenate([b.deriv[k] for b in parts]) for k in range(4))
    return TransitionBatch(cat("x"), cat("y"), cat("n_hat"), cat("x_exit"), cat("y_exit"), deriv, cat("status"))


def _unit_frames(params, x, y):
    (u1, u2), (s1, s2) = frames_xy(params, x, y)
    nu, ns = np.hypot(u1, u2), np.hypot(s1, s2)
    return (u1 / nu, u2 / nu), (s1 / ns, s2 / ns)


def cone_arrays(params, tb: TransitionBatch, alpha: float):
    """Per-transition image slopes and expansions of K^u under DT and K^s under DT^-1."""
    (u1, u2), (s1, s2) = _unit_frames(params, tb.x, tb.y)
    (U1, U2), (S1, S2) = _unit_frames(params, tb.x_exit, tb.y_exit)
    a, b, c, d = tb.deriv
    slope_u, emin_u, _ = image_batch((a, b, c, d), u1, u2, alpha, U1, U2)
    det = a * d - b * c
    inv = (d / det, -b / det, -c / det, a / det)
    slope_s, emin_s, _ = image_batch(inv, S1, S2, alpha, s1, s2)
    return slope_u, emin_u, slope_s, emin_s


def unstable_coefficient(params, tb: TransitionBatch):
    """Coefficient of DT sigma^u(z) along sigma^u(Tz) in the exit frame basis."""
    (u1, u2), _ = _unit_frames(params, tb.x, tb.y)
    (U1, U2), (S1, S2) = _unit_frames(params, tb.x_exit, tb.y_exit)
    a, b, c, d = tb.deriv
    w1, w2 = a * u1 + b * u2, c * u1 + d * u2
    return (w1 * S2 - w2 * S1) / (U1 * S2 - U2 * S1)


# ---------------------------------------------------------------------------
# targeted search near perturbation supports
# ---------------------------------------------------------------------------

def _back_to_entry(cmap, sections, x, y, cap):
    """Iterate G^-1 until the first visit of R+; returns entries and step counts (-1: none)."""
    p, r = cmap.params.p, cmap.params.r
    ex, ey = np.full(x.size, np.nan), np.full(x.size, np.nan)
    k_back = np.full(x.size, -1, dtype=np.int64)
    cx, cy = x.copy(), y.copy()
    live = np.ones(x.size, bool)
    for k in range(1, cap + 1):
        if not live.any():
            break
        cx[live], cy[live] = cmap.inverse(cx[live], cy[live])
        hit = live & in_section(p, sections, cx, cy, "plus")
        ex[hit], ey[hit], k_back[hit] = cx[hit], cy[hit], k
        live &= ~hit & (cy < r) & ~in_section(p, sections, cx, cy, "minus")
    return ex, ey, k_back


def _back_fixed(cmap, x, y, k_back):
    cx, cy = x.copy(), y.copy()
    for k in range(int(k_back.max(initial=0))):
        m = k < k_back
        cx[m], cy[m] = cmap.inverse(cx[m], cy[m])
    return cx, cy


def targeted_entries(cmap, sections, budget: SearchBudget):
    """Entries whose orbits cross a perturbation support, plus bisected tangency witnesses.

    Support rows are sampled, pulled back to R+, and wherever the sign of the
    unstable coefficient of DT flips between neighbouring samples the position
    is bisected; at a sign flip DT sends sigma^u into the stable direction.
    """
    bumps = getattr(cmap, "active_bumps", ())
    if not bumps:
        return np.empty(0), np.empty(0)
    params = cmap.params
    xs_all, ys_all = [], []
    n = budget.support_samples
    for b in bumps:
        s = np.linspace(-b.radius, b.radius, n)
        gx, gy = np.meshgrid(b.center[0] + s, b.center[1] + s, indexing="ij")
        gx, gy = gx.T, gy.T  # rows of constant y
        inside = (gx - b.center[0]) ** 2 + (gy - b.center[1]) ** 2 < b.radius**2
        inside &= gy > 0
        px, py = np.where(inside, gx, b.center[0]), np.where(inside, gy, b.center[1])
        ex, ey, kb = _back_to_entry(cmap, sections, px.ravel(), py.ravel(), budget.backward_cap)
        good = inside.ravel() & (kb > 0)
        if not good.any():
            continue
        tb = run_transitions(cmap, sections, np.where(good, ex, sections.eps_plus / 2),
                             np.where(good, ey, sections.r_minus), budget.n_max)
        good &= tb.ok & (tb.n_hat > kb)
        xs_all.append(ex[good])
        ys_all.append(ey[good])
        coef = unstable_coefficient(params, tb)
        # neighbouring pairs along rows with matching orbit combinatorics
        G = good.reshape(n, n)
        C = np.sign(coef).reshape(n, n)
        K = kb.reshape(n, n)
        Nh = tb.n_hat.reshape(n, n)
        pair = G[:, :-1] & G[:, 1:] & (K[:, :-1] == K[:, 1:]) & (Nh[:, :-1] == Nh[:, 1:])
        pair &= C[:, :-1] * C[:, 1:] < 0
        ii, jj = np.nonzero(pair)
        if ii.size == 0:
            continue
        zx0, zy0 = px[ii, jj], py[ii, jj]
        zx1, zy1 = px[ii, jj + 1], py[ii, jj + 1]
        kk = K[ii, jj]
        s_lo = C[ii, jj]
        lo, hi = np.zeros(ii.size), np.ones(ii.size)
        for _ in range(budget.bisect_iters):
            mid = 0.5 * (lo + hi)
            if np.all((mid == lo) | (mid == hi)):
                break
            qx, qy = zx0 + mid * (zx1 - zx0), zy0 + mid * (zy1 - zy0)
            bx, by = _back_fixed(cmap, qx, qy, kk)
            tm = transitions(cmap, sections, bx, by, budget.n_max)
            sm = np.sign(unstable_coefficient(params, tm))
            same = (sm == s_lo) & tm.ok
            lo = np.where(same, mid, lo)
            hi = np.where(same, hi, mid)
        for t in (lo, hi):
            qx, qy = zx0 + t * (zx1 - zx0), zy0 + t * (zy1 - zy0)
            bx, by = _back_fixed(cmap, qx, qy, kk)
            ok = in_section(params.p, sections, bx, by, "plus")
            xs_all.append(bx[ok])
            ys_all.append(by[ok])
    if not xs_all:
        return np.empty(0), np.empty(0)
    return np.concatenate(xs_all), np.concatenate(ys_all)


# ---------------------------------------------------------------------------
# verdict
# ---------------------------------------------------------------------------

def _witness(tb: TransitionBatch, i: int, **extra) -> dict:
    w = {
        "entry": [float(tb.x[i]), float(tb.y[i])],
        "n_hat": int(tb.n_hat[i]),
        "exit": [float(tb.x_exit[i]), float(tb.y_exit[i])],
        "status": int(tb.status[i]),
    }
    for k, v in extra.items():
        if isinstance(v, (float, np.floating)):
            v = float(v) if math.isfinite(v) else str(float(v))
        w[k] = v
    return w


def _best_alpha(params, tb, alphas):
    """Largest alpha whose cone test passes on every transition, else None."""
    for a in alphas:
        su, eu, ss, es = cone_arrays(params, tb, a)
        if np.all(su < a) and np.all(ss < a) and min(eu.min(), es.min()) > 1.0:
            return a, (su, eu, ss, es)
    return None, None


def _cone_failure(params, tb, alpha):
    su, eu, ss, es = cone_arrays(params, tb, alpha)
    bad_slope = np.maximum(su, ss)
    if np.any(bad_slope >= alpha):
        i = int(np.argmax(np.where(np.isfinite(bad_slope), bad_slope, np.finfo(float).max)))
        return i, {"alpha": alpha, "image_slope": float(bad_slope[i]),
                   "expansion": float(min(eu[i], es[i])), "kind": "cone containment"}
    e = np.minimum(eu, es)
    i = int(np.argmin(e))
    return i, {"alpha": alpha, "image_slope": float(bad_slope[i]),
               "expansion": float(e[i]), "kind": "expansion"}


def verify_boundary_map(cmap, params=None, search_budget: SearchBudget | None = None,
                        strict: bool = False) -> BoundaryMapReport:
    budget = search_budget or SearchBudget()
    params = params or cmap.params
    p, lam = params.p, params.lam

    fixed = boundary_fixed_points(cmap)
    degree = len(fixed) // 2
    ms_ok = morse_smale_check(cmap, fixed)
    report = BoundaryMapReport(degree, fixed, ms_ok, None, None, "fail")
    if len(fixed) != 2 * p or not all(f.saddle for f in fixed):
        report.failed_condition = 1
        bad = [f for f in fixed if not f.saddle]
        report.witness = bad[0].to_dict() if bad else {"fixed_point_count": len(fixed)}
        report.notes.append(f"found {len(fixed)} boundary fixed points, expected {2 * p} saddles")
        return _finish(report, strict)
    if not ms_ok:
        report.failed_condition = 2
        report.notes.append("boundary circle map is not Morse-Smale")
        return _finish(report, strict)

    best_fail = None  # (condition, sections, witness, note)
    full_checks = 0
    tried = 0
    for S in budget.sections(lam):
        if S.r_plus >= params.r:
            continue
        tried += 1
        # cheap prescreen on a coarse grid
        px, py = entry_grid(p, S, budget.prescreen[0], budget.prescreen[1], budget.depth_bits)
        tb = transitions(cmap, S, px, py, budget.n_max)
        if not tb.ok.all():
            continue
        a_pre, _ = _best_alpha(params, tb, budget.alphas)
        if a_pre is None:
            continue

        full_checks += 1
        gx, gy = entry_grid(p, S, budget.n_x, budget.n_y, budget.depth_bits)
        tx, ty = targeted_entries(cmap, S, budget)
        tb = run_transitions(cmap, S, np.concatenate([gx, tx]), np.concatenate([gy, ty]),
                             budget.n_max, budget.workers, budget.chunk)
        n_grid = gx.size
        if not tb.ok.all():
            i = int(np.argmax(~tb.ok))
            fail = (3, S, _witness(tb, i), f"{int((~tb.ok).sum())} entries did not return to R-")
        else:
            alpha, arrs = _best_alpha(params, tb, budget.alphas)
            if alpha is not None:
                su, eu, ss, es = arrs
                report.sections = S
                report.cone_structure = ConeStructure(
                    alpha=alpha,
                    alpha0=float(su.max()),
                    alpha0_stable=float(ss.max()),
                    sigma=float(min(eu.min(), es.min())),
                    min_margin=float(alpha - max(su.max(), ss.max())),
                    n_transitions=int(n_grid),
                    n_targeted=int(tx.size),
                    shrink=float(max(su.max(), ss.max()) / alpha),
                )
                report.verdict = "pass"
                report.line_defect = line_defect(cmap, S.r_plus)
                report.sections_tried = tried
                return _finish(report, strict)
            i, info = _cone_failure(params, tb, a_pre)
            info["targeted"] = bool(i >= n_grid)
            fail = (4, S, _witness(tb, i, **info), f"hyperbolic cone structure fails ({info['kind']})")
        if best_fail is None or fail[0] > best_fail[0]:
            best_fail = fail
        if full_checks >= budget.max_full_checks:
            break

    report.sections_tried = tried
    if best_fail is None:
        report.failed_condition = 3
        report.notes.append("no section parameters in the search range make every grid point return")
    else:
        cond, S, w, note = best_fail
        report.failed_condition, report.sections, report.witness = cond, S, w
        report.notes.append(note)
        report.line_defect = line_defect(cmap, S.r_plus)
    return _finish(report, strict)


def _finish(report: BoundaryMapReport, strict: bool) -> BoundaryMapReport:
    if strict:
        report.raise_for_verdict()
    return report
