"""Blow-up of the cat map A = [[2, 1], [1, 1]] at its fixed point 0 on the torus.

In polar coordinates about 0, with the angle measured from the stable
eigendirection, A is exactly the collar map F with p = 2 and lam = lam_A.  A
collar perturbation (a PerturbedMap over that F) is applied in this chart and
the torus map is A everywhere else.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Union

import numpy as np

from .local_model import LocalModel, LocalModelParams

A = ((2, 1), (1, 1))
LAM_A = (3.0 + math.sqrt(5.0)) / 2.0
LOG_LAM_A = math.log(LAM_A)
THETA_U = math.atan2((math.sqrt(5.0) - 1.0) / 2.0, 1.0)
THETA_S = THETA_U - math.pi / 2.0
E_U = (math.cos(THETA_U), math.sin(THETA_U))
E_S = (math.cos(THETA_S), math.sin(THETA_S))
TWO_PI = 2.0 * math.pi
COLLAR_RADIUS = 0.4  # polar chart used for perturbations (disk fits in the unit square)


class NoPeriodicPoint(ValueError):
    pass


@dataclass(frozen=True)
class Interior:
    a: object
    b: object

    def __post_init__(self):
        a, b = self.a % 1, self.b % 1
        if a == 0 and b == 0:
            raise ValueError("interior points cannot sit at the blown-up fixed point")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)


@dataclass(frozen=True)
class Boundary:
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta) % TWO_PI)


SurfacePoint = Union[Interior, Boundary]


@dataclass(frozen=True)
class Ball:
    center: Interior
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        a, b = float(self.center.a), float(self.center.b)
        if math.hypot(_centered(a), _centered(b)) <= self.radius:
            raise ValueError("ball must avoid the boundary circle")


def _centered(u):
    return (u + 0.5) % 1.0 - 0.5


def torus_base(r: float = COLLAR_RADIUS) -> LocalModel:
    """The collar model that the cat map is in the polar chart."""
    return LocalModel(LocalModelParams(p=2, lam=LAM_A, r=r))


# ---------------------------------------------------------------------------
# the map
# ---------------------------------------------------------------------------

class CatBlowup:
    """Blow-up of A with an optional collar perturbation ``pert`` (a PerturbedMap)."""

    def __init__(self, pert=None):
        self.pert = pert
        self.bumps = tuple(pert.active_bumps) if pert is not None else ()
        if self.bumps and abs(pert.params.lam - LAM_A) > 1e-12:
            raise ValueError("collar perturbation must be built over torus_base()")
        r = pert.params.r if pert is not None else COLLAR_RADIUS
        if r > 0.5:
            raise ValueError("collar chart must fit in the unit square")
        self.r = r

    # polar chart about the origin
    @staticmethod
    def to_collar(a, b):
        ac, bc = _centered(a), _centered(b)
        return np.remainder(np.arctan2(bc, ac) - THETA_S, TWO_PI), np.hypot(ac, bc)

    @staticmethod
    def from_collar(x, y):
        ang = x + THETA_S
        return np.remainder(y * np.cos(ang), 1.0), np.remainder(y * np.sin(ang), 1.0)

    def _near_bump(self, x, y, pad: float = 0.0):
        hit = np.zeros(np.shape(x), bool)
        for b in self.bumps:
            dx = np.remainder(x - b.center[0] + math.pi, TWO_PI) - math.pi
            hit |= dx * dx + (y - b.center[1]) ** 2 < (b.radius + pad) ** 2
        return hit

    def _bump_mask(self, a, b):
        if not self.bumps:
            return None, None, np.zeros(np.shape(a), bool)
        x, y = self.to_collar(a, b)
        return x, y, self._near_bump(x, y) & (y < self.r)

    def step(self, a, b):
        a = np.asarray(a, float)
        b = np.asarray(b, float)
        na, nb = np.remainder(2 * a + b, 1.0), np.remainder(a + b, 1.0)
        x, y, m = self._bump_mask(a, b)
        if m.any():
            gx, gy = self.pert.step(x[m], y[m])
            na[m], nb[m] = self.from_collar(gx, gy)
        return na, nb

    def inverse(self, a, b, iters: int = 50):
        a = np.asarray(a, float)
        b = np.asarray(b, float)
        pa, pb = np.remainder(a - b, 1.0), np.remainder(-a + 2 * b, 1.0)
        if not self.bumps:
            return pa, pb
        # the A-preimage is within ~lam_A |displacement| of the true one; refine
        # by Newton in torus coordinates wherever it sits near a bump
        amp = max(abs(v) for bump in self.bumps for v in bump.amplitude)
        pad = 10.0 * LAM_A * amp * (1.0 + self.r) + 1e-12
        x, y = self.to_collar(pa, pb)
        m = self._near_bump(x, y, pad) & (y < self.r + pad)
        if not m.any():
            return pa, pb
        ta, tb = a[m], b[m]
        qa, qb = pa[m].copy(), pb[m].copy()
        for _ in range(iters):
            fa, fb = self.step(qa, qb)
            ra, rb = _centered(fa - ta), _centered(fb - tb)
            j11, j12, j21, j22 = self.jac(qa, qb)
            det = j11 * j22 - j12 * j21
            da = (j22 * ra - j12 * rb) / det
            db = (-j21 * ra + j11 * rb) / det
            qa, qb = np.remainder(qa - da, 1.0), np.remainder(qb - db, 1.0)
            if np.all(np.abs(da) + np.abs(db) < 1e-16):
                break
        # keep the exact A-preimage for points whose preimage is outside every support
        inb = self._bump_mask(qa, qb)[2]
        sel = np.nonzero(m)[0][inb]
        pa[sel], pb[sel] = qa[inb], qb[inb]
        return pa, pb

    def jac(self, a, b):
        """Jacobian in torus coordinates as four arrays."""
        a = np.asarray(a, float)
        b = np.asarray(b, float)
        one = np.ones(np.shape(a))
        j = [2.0 * one, 1.0 * one, 1.0 * one, 1.0 * one]
        x, y, m = self._bump_mask(a, b)
        if m.any():
            xm, ym = x[m], y[m]
            g11, g12, g21, g22 = self.pert.jac(xm, ym)
            gx, gy = self.pert.step(xm, ym)
            # cartesian = P(x, y) = y (cos(x + th_s), sin(x + th_s))
            c0, s0 = np.cos(xm + THETA_S), np.sin(xm + THETA_S)
            c1, s1 = np.cos(gx + THETA_S), np.sin(gx + THETA_S)
            # DP^-1 at the source
            i11, i12, i21, i22 = -s0 / ym, c0 / ym, c0, s0
            # G jacobian times DP^-1
            m11 = g11 * i11 + g12 * i21
            m12 = g11 * i12 + g12 * i22
            m21 = g21 * i11 + g22 * i21
            m22 = g21 * i12 + g22 * i22
            # DP at the image: [[-y s, c], [y c, s]]
            p11, p12, p21, p22 = -gy * s1, c1, gy * c1, s1
            j[0][m] = p11 * m11 + p12 * m21
            j[1][m] = p11 * m12 + p12 * m22
            j[2][m] = p21 * m11 + p22 * m21
            j[3][m] = p21 * m12 + p22 * m22
        return tuple(j)

    def _scalar_chart(self, fa, fb):
        """(x, rho) when the float point (fa, fb) lies in a bump support, else None."""
        ac, bc = _centered(fa), _centered(fb)
        rho = math.hypot(ac, bc)
        if rho >= self.r:
            return None
        x = (math.atan2(bc, ac) - THETA_S) % TWO_PI
        for b in self.bumps:
            dx = (x - b.center[0] + math.pi) % TWO_PI - math.pi
            if dx * dx + (rho - b.center[1]) ** 2 < b.radius**2:
                return x, rho
        return None

    def step_scalar(self, a, b):
        """One step for Python numbers; exact for Fractions away from bumps."""
        if self.bumps:
            hit = self._scalar_chart(float(a), float(b))
            if hit is not None:
                gx, gy = self.pert.step(np.array([hit[0]]), np.array([hit[1]]))
                na, nb = self.from_collar(gx, gy)
                return float(na[0]), float(nb[0])
        return (2 * a + b) % 1, (a + b) % 1

    def boundary_step(self, theta):
        x = np.remainder(np.asarray(theta, float) - THETA_S, TWO_PI)
        base = self.pert if self.pert is not None else torus_base()
        gx, _ = base.step(x, np.zeros_like(x))
        return np.remainder(gx + THETA_S, TWO_PI)


def blowup_apply(pert, q: SurfacePoint) -> SurfacePoint:
    m = CatBlowup(pert)
    if isinstance(q, Boundary):
        return Boundary(float(m.boundary_step(q.theta)))
    a, b = m.step_scalar(q.a, q.b)
    return Interior(a, b)


def boundary_fixed_angles(pert=None) -> list:
    """Fixed points of the boundary circle map, located by bisection on a fine grid."""
    m = CatBlowup(pert)
    n = 1024
    th = (np.arange(n + 1) + 0.5) * (TWO_PI / n)
    d = np.remainder(m.boundary_step(th) - th + math.pi, TWO_PI) - math.pi
    out = []
    for i in range(n):
        if d[i] * d[i + 1] < 0 and abs(d[i] - d[i + 1]) < math.pi:
            lo, hi = th[i], th[i + 1]
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if mid in (lo, hi):
                    break
                dm = (float(m.boundary_step(np.array([mid]))[0]) - mid + math.pi) % TWO_PI - math.pi
                if (dm < 0) == (d[i] < 0):
                    lo = mid
                else:
                    hi = mid
            out.append(0.5 * (lo + hi) % TWO_PI)
    return sorted(out)


# ---------------------------------------------------------------------------
# density
# ---------------------------------------------------------------------------

@dataclass
class DensityResult:
    coverage: float
    first_full_cover: int | None
    n_cells: int
    visited: int
    steps: int


def _density_cells(eps: float, r0: float):
    k = int(math.ceil(1.0 / eps))
    n_ang = int(math.ceil(1.0 / eps))
    n_rad = int(math.ceil(r0 / eps))
    return k, n_ang, n_rad


def orbit_density(pert, seed: Interior, eps: float = 0.05, n_max: int = 10**5, r0: float = 0.05) -> DensityResult:
    """Fraction of eps-cells visited: flat cells outside the disk rho < r0, polar cells inside."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    m = CatBlowup(pert)
    k, n_ang, n_rad = _density_cells(eps, r0)
    n_flat = k * k
    total = n_flat + n_ang * n_rad
    seen = bytearray(total)
    count = 0
    first = None
    a, b = seed.a, seed.b
    for step in range(n_max + 1):
        fa, fb = float(a), float(b)
        ac, bc = _centered(fa), _centered(fb)
        rho = math.hypot(ac, bc)
        if rho < r0:
            ang = (math.atan2(bc, ac) / TWO_PI) % 1.0
            cell = n_flat + min(int(ang * n_ang), n_ang - 1) * n_rad + min(int(rho / eps), n_rad - 1)
        else:
            cell = min(int(fa * k), k - 1) * k + min(int(fb * k), k - 1)
        if not seen[cell]:
            seen[cell] = 1
            count += 1
            if count == _coverable(total, k, r0, eps) and first is None:
                first = step
                break
        if step < n_max:
            a, b = m.step_scalar(a, b)
    return DensityResult(count / _coverable(total, k, r0, eps), first,
                         _coverable(total, k, r0, eps), count, step)


def _coverable(total, k, r0, eps):
    """Cells that actually meet the region they represent."""
    # flat cells lying entirely inside the disk rho < r0 cannot be visited
    inner = 0
    for i in range(k):
        for j in range(k):
            xs = (i * eps, min((i + 1) * eps, 1.0))
            ys = (j * eps, min((j + 1) * eps, 1.0))
            far = max(math.hypot(_dist0(x), _dist0(y)) for x in xs for y in ys)
            if far <= r0:
                inner += 1
    return total - inner


def _dist0(u):
    return min(u, 1.0 - u)


# ---------------------------------------------------------------------------
# mixing
# ---------------------------------------------------------------------------

@dataclass
class MixingResult:
    first_hit: int | None
    hits: list  # number of sample images inside B for n = 0..n_max
    persistent_from: int | None  # smallest m with hits[n] > 0 for every n in [m, n_max]

    @property
    def mixing(self) -> bool:
        return self.persistent_from is not None


def _ball_samples(ball: Ball, samples: int, rng):
    r = ball.radius * np.sqrt(rng.uniform(0.0, 1.0, samples))
    t = rng.uniform(0.0, TWO_PI, samples)
    return (np.remainder(float(ball.center.a) + r * np.cos(t), 1.0),
            np.remainder(float(ball.center.b) + r * np.sin(t), 1.0))


def _in_ball(ball: Ball, a, b):
    da = _centered(a - float(ball.center.a))
    db = _centered(b - float(ball.center.b))
    return da * da + db * db < ball.radius**2


def mixing_test(pert, ballA: Ball, ballB: Ball, n_max: int = 200, samples: int = 4096, rng=None) -> MixingResult:
    if samples < 1:
        raise ValueError("samples must be >= 1")
    rng = rng if rng is not None else np.random.default_rng(0)
    m = CatBlowup(pert)
    a, b = _ball_samples(ballA, samples, rng)
    if ballA == ballB:
        a, b = np.append(a, float(ballA.center.a)), np.append(b, float(ballA.center.b))
    hits = []
    for n in range(n_max + 1):
        hits.append(int(np.count_nonzero(_in_ball(ballB, a, b))))
        if n < n_max:
            a, b = m.step(a, b)
    first = next((n for n, h in enumerate(hits) if h > 0), None)
    persistent = None
    if hits[-1] > 0:
        persistent = n_max
        while persistent > 0 and hits[persistent - 1] > 0:
            persistent -= 1
    return MixingResult(first, hits, persistent)


def mixing_suite(pert, pairs, n_max=200, samples=4096, rngs=None, workers=1) -> list:
    rngs = rngs or [np.random.default_rng(i) for i in range(len(pairs))]
    job = lambda i: mixing_test(pert, pairs[i][0], pairs[i][1], n_max, samples, rngs[i])
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(job, range(len(pairs))))
    return [job(i) for i in range(len(pairs))]


# ---------------------------------------------------------------------------
# periodic points and homoclinic intersections
# ---------------------------------------------------------------------------

def _matpow(k):
    m = ((1, 0), (0, 1))
    for _ in range(k):
        m = ((m[0][0] * 2 + m[0][1], m[0][0] + m[0][1]), (m[1][0] * 2 + m[1][1], m[1][0] + m[1][1]))
    return m


def periodic_points(k: int) -> list:
    """Nonzero solutions of (A^k - I) x in Z^2, as exact fractions in [0, 1)^2."""
    (p, q), (r, s) = _matpow(k)
    m11, m12, m21, m22 = p - 1, q, r, s - 1
    det = m11 * m22 - m12 * m21
    if det == 0:
        raise NoPeriodicPoint("A^k - I is singular")
    pts = set()
    span = abs(det)
    for n1 in range(span):
        for n2 in range(span):
            x = Fraction(m22 * n1 - m12 * n2, det) % 1
            y = Fraction(-m21 * n1 + m11 * n2, det) % 1
            if (x, y) != (0, 0):
                pts.add((x, y))
    return sorted(pts)


def minimal_periodic_point(period_cap: int):
    for k in range(1, period_cap + 1):
        pts = periodic_points(k)
        # least period exactly k
        for x, y in pts:
            a, b = x, y
            least = None
            for j in range(1, k + 1):
                a, b = (2 * a + b) % 1, (a + b) % 1
                if (a, b) == (x, y):
                    least = j
                    break
            if least == k:
                return (x, y), k
    raise NoPeriodicPoint(f"no nonzero periodic point of period <= {period_cap}")


@dataclass
class HomoclinicPoint:
    point: tuple
    angle: float  # crossing angle in (0, pi/2]
    t: float  # arclength parameter along W^u from q
    s: float  # along W^s


def eigenline_angle() -> float:
    c = abs(E_U[0] * E_S[0] + E_U[1] * E_S[1])
    return math.acos(min(1.0, c))


def homoclinic_lattice(q, length: float, window: float) -> list:
    """Unperturbed: q + t e_u = q + s e_s + m with |t| <= length, |s| <= window, m != 0."""
    qa, qb = float(q[0]), float(q[1])
    out = []
    R = int(math.ceil(length + window)) + 1
    ang = eigenline_angle()
    for m1 in range(-R, R + 1):
        for m2 in range(-R, R + 1):
            if m1 == 0 and m2 == 0:
                continue
            t = m1 * E_U[0] + m2 * E_U[1]
            s = -(m1 * E_S[0] + m2 * E_S[1])
            if abs(t) <= length and abs(s) <= window:
                pt = ((qa + t * E_U[0]) % 1.0, (qb + t * E_U[1]) % 1.0)
                out.append(HomoclinicPoint(pt, ang, t, s))
    out.sort(key=lambda h: (abs(h.t), h.t, h.s))
    return out


def grow_manifold(cmap: CatBlowup, q, period: int, direction, length: float, spacing: float,
                  inverse: bool = False, seed_half: float = 1e-3, max_points: int = 2_000_000):
    """Polyline of W^u (or W^s with inverse=True) through q of half-length about ``length``.

    A short linear seed segment is mapped by the period map until long enough;
    parameters are refined by bisection wherever neighbouring images are more
    than ``spacing`` apart.
    """
    stretch = LAM_A**period
    n_iter = max(0, int(math.ceil(math.log(length / seed_half) / math.log(stretch))))
    qa, qb = float(q[0]), float(q[1])
    f = cmap.inverse if inverse else cmap.step

    def image(u):
        a = np.remainder(qa + u * direction[0], 1.0)
        b = np.remainder(qb + u * direction[1], 1.0)
        for _ in range(n_iter * period):
            a, b = f(a, b)
        return a, b

    u = np.linspace(-seed_half, seed_half, 257)
    a, b = image(u)
    for _ in range(200):
        da, db = _centered(np.diff(a)), _centered(np.diff(b))
        gap = np.hypot(da, db) > spacing
        if not gap.any():
            break
        if u.size > max_points:
            raise RuntimeError("manifold refinement exceeded the point budget")
        mids = 0.5 * (u[:-1][gap] + u[1:][gap])
        ma, mb = image(mids)
        u = np.concatenate([u, mids])
        a = np.concatenate([a, ma])
        b = np.concatenate([b, mb])
        order = np.argsort(u, kind="stable")
        u, a, b = u[order], a[order], b[order]
    # unwrap into a continuous planar curve starting near q
    da, db = _centered(np.diff(a)), _centered(np.diff(b))
    i0 = int(np.argmin(np.abs(u)))
    ua = np.concatenate([[0.0], np.cumsum(da)])
    ub = np.concatenate([[0.0], np.cumsum(db)])
    ua += a[i0] - ua[i0]
    ub += b[i0] - ub[i0]
    # arclength from the point nearest q
    arc = np.concatenate([[0.0], np.cumsum(np.hypot(da, db))])
    arc -= arc[i0]
    keep = np.abs(arc) <= length
    return ua[keep], ub[keep], arc[keep]


def _segment_crossings(ua, ub, sa, sb, cell: float):
    """All crossings of two planar polylines taken mod 1, via a spatial hash."""
    def pieces(xa, xb):
        # translate each segment so its first point lies in [0, 1)^2
        x0, y0 = xa[:-1], xb[:-1]
        sx, sy = np.floor(x0), np.floor(y0)
        return x0 - sx, y0 - sy, xa[1:] - sx, xb[1:] - sy

    U = pieces(ua, ub)
    S = pieces(sa, sb)
    k = int(math.ceil(1.0 / cell))

    def buckets(P):
        x0, y0, x1, y1 = P
        table = {}
        lo_x = np.floor(np.minimum(x0, x1) / cell).astype(int)
        hi_x = np.floor(np.maximum(x0, x1) / cell).astype(int)
        lo_y = np.floor(np.minimum(y0, y1) / cell).astype(int)
        hi_y = np.floor(np.maximum(y0, y1) / cell).astype(int)
        for i in range(x0.size):
            for cx in range(lo_x[i], hi_x[i] + 1):
                for cy in range(lo_y[i], hi_y[i] + 1):
                    table.setdefault((cx % k, cy % k), []).append(i)
        return table

    tu, ts = buckets(U), buckets(S)
    found = {}
    for key in sorted(set(tu) & set(ts)):
        for i in tu[key]:
            for j in ts[key]:
                hit = _intersect(U, i, S, j)
                if hit is not None:
                    found[(i, j)] = hit
    return [(i, j) + found[(i, j)] for i, j in sorted(found)]


def _intersect(U, i, S, j):
    ax0, ay0, ax1, ay1 = (P[i] for P in U)
    bx0, by0, bx1, by1 = (P[j] for P in S)
    # bring the S segment next to the U segment on the torus
    shx = round(ax0 - bx0)
    shy = round(ay0 - by0)
    best = None
    for ox in (shx - 1, shx, shx + 1):
        for oy in (shy - 1, shy, shy + 1):
            px0, py0, px1, py1 = bx0 + ox, by0 + oy, bx1 + ox, by1 + oy
            rx, ry = ax1 - ax0, ay1 - ay0
            sx, sy = px1 - px0, py1 - py0
            den = rx * sy - ry * sx
            if den == 0:
                continue
            qx, qy = px0 - ax0, py0 - ay0
            t = (qx * sy - qy * sx) / den
            u = (qx * ry - qy * rx) / den
            if 0.0 <= t < 1.0 and 0.0 <= u < 1.0:
                ang = math.acos(min(1.0, abs(rx * sx + ry * sy) / (math.hypot(rx, ry) * math.hypot(sx, sy))))
                best = ((ax0 + t * rx) % 1.0, (ay0 + t * ry) % 1.0, t, u, ang)
    return best


def homoclinic_find(pert, period_cap: int = 4, window: float = 1.0, length: float = 10.0,
                    spacing: float = 0.01) -> list:
    """Transverse homoclinic points of the least-period periodic point q of the map.

    ``length`` is the half-length of the grown W^u(q), ``window`` that of W^s(q).
    """
    q, k = minimal_periodic_point(period_cap)
    cmap = CatBlowup(pert)
    if not cmap.bumps:
        return homoclinic_lattice(q, length, window)
    h = spacing / 4.0
    ua, ub, uarc = grow_manifold(cmap, q, k, E_U, length, h)
    sa, sb, sarc = grow_manifold(cmap, q, k, E_S, window, h, inverse=True)
    out = []
    for i, j, pa, pb, t, u, ang in _segment_crossings(ua, ub, sa, sb, spacing):
        ta = uarc[i] + t * (uarc[i + 1] - uarc[i])
        sb_ = sarc[j] + u * (sarc[j + 1] - sarc[j])
        if abs(ta) < 1e-9 and abs(sb_) < 1e-9:
            continue  # q itself
        out.append(HomoclinicPoint((float(pa), float(pb)), float(ang), float(ta), float(sb_)))
    out.sort(key=lambda h: (abs(h.t), h.t, h.s))
    return out


# ---------------------------------------------------------------------------
# Lyapunov exponent
# ---------------------------------------------------------------------------

def lyapunov_estimate(pert, seed: Interior, n: int = 10**5, v0=None) -> float:
    if n < 1:
        raise ValueError("n must be >= 1")
    cmap = CatBlowup(pert)
    v1, v2 = (1.0, 0.0) if v0 is None else (float(v0[0]), float(v0[1]))
    nv = math.hypot(v1, v2)
    v1, v2 = v1 / nv, v2 / nv
    a, b = seed.a, seed.b
    total = 0.0
    for _ in range(n):
        near = cmap.bumps and cmap._scalar_chart(float(a), float(b)) is not None
        if near:
            j = [float(c[0]) for c in cmap.jac(np.array([float(a)]), np.array([float(b)]))]
            w1, w2 = j[0] * v1 + j[1] * v2, j[2] * v1 + j[3] * v2
        else:
            w1, w2 = 2.0 * v1 + v2, v1 + v2
        nw = math.hypot(w1, w2)
        total += math.log(nw)
        v1, v2 = w1 / nw, w2 / nw
        a, b = cmap.step_scalar(a, b)
    return total / n
