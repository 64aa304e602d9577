"""Symmetric cones in a tangent plane and their images under linear maps.

A cone is stored as an axis angle plus a slope bound ``alpha``: a vector lies
in the cone when, written in the frame whose first axis is the cone axis, its
slope ``|c2 / c1|`` is below ``alpha``. Linear maps send boundary rays to
boundary rays, so containment and expansion are decided exactly from the two
rays ``(1, +-alpha)`` without sampling.

Everything has an array twin (``*_batch``) used by the grid verifiers.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import ZeroVector
from .local_model import DegenerateFrame, frames_xy


class SingularMatrix(ValueError):
    pass


@dataclass(frozen=True)
class Cone:
    axis: float  # angle of the axis line, radians (mod pi)
    alpha: float  # slope bound in the axis frame

    def __post_init__(self):
        if not self.alpha > 0.0:
            raise ValueError(f"slope bound must be > 0, got {self.alpha}")

    @classmethod
    def about(cls, v1: float, v2: float, alpha: float) -> "Cone":
        if v1 == 0.0 and v2 == 0.0:
            raise ZeroVector("cone axis must be nonzero")
        return cls(math.atan2(v2, v1), alpha)

    @property
    def direction(self) -> tuple[float, float]:
        return (math.cos(self.axis), math.sin(self.axis))


@dataclass(frozen=True)
class ConeImageReport:
    contained: bool
    margin: float
    expansion_min: float
    contraction_max: float
    image_slope: float  # largest |slope| of the image, measured in the dst frame


def axis_slope(c, s, v1, v2):
    """Slope of (v1, v2) in the frame whose first axis is (c, s). Vectorised."""
    along = c * v1 + s * v2
    across = -s * v1 + c * v2
    with np.errstate(divide="ignore", invalid="ignore"):
        return across / along


def cone_contains(cone: Cone, v) -> bool:
    v1, v2 = v.components if hasattr(v, "components") else v
    if v1 == 0.0 and v2 == 0.0:
        raise ZeroVector("zero vector")
    c, s = cone.direction
    along = c * v1 + s * v2
    across = -s * v1 + c * v2
    return abs(across) < cone.alpha * abs(along)


def _boundary_rays(c, s, alpha):
    # (1, +-alpha) in the axis frame, returned in chart coordinates
    r1 = (c - s * alpha, s + c * alpha)
    r2 = (c + s * alpha, s - c * alpha)
    return r1, r2


def quad_extrema(A, B, C, alpha):
    """Min and max of (A + 2Bt + Ct^2) / (1 + t^2) over t in [-alpha, alpha].

    Critical points solve B t^2 + (A - C) t - B = 0. Vectorised.
    """
    A, B, C, alpha = np.broadcast_arrays(*map(np.asarray, (A, B, C, alpha)))
    A = A.astype(float)

    def q(t):
        return (A + 2 * B * t + C * t * t) / (1 + t * t)

    cands = [q(alpha), q(-alpha)]
    # roots of B t^2 + (A - C) t - B, written to avoid cancellation
    D = A - C
    disc = np.sqrt(D * D + 4 * B * B)
    with np.errstate(divide="ignore", invalid="ignore"):
        qq = -0.5 * (D + np.where(D >= 0, disc, -disc))
        t1 = np.where(qq != 0, qq / B, 0.0)
        t2 = np.where(qq != 0, -B / qq, 0.0)
    for t in (t1, t2):
        t = np.where(np.isfinite(t), t, 0.0)
        inside = np.abs(t) <= alpha
        val = q(t)
        cands.append(np.where(inside, val, np.nan))
    stack = np.stack(cands)
    return np.nanmin(stack, axis=0), np.nanmax(stack, axis=0)


def image_batch(m, src_c, src_s, alpha_src, dst_c, dst_s):
    """Image of the cones (src axis, alpha_src) under matrices m = (m11, m12, m21, m22).

    Returns (image_slope, expansion_min, contraction_max) where image_slope is
    the largest |slope| of the image measured about the dst axis, or +inf when
    the image arc passes through the direction orthogonal to the dst axis.
    """
    m11, m12, m21, m22 = m
    (a1, a2), (b1, b2) = _boundary_rays(src_c, src_s, alpha_src)
    ta = axis_slope(dst_c, dst_s, m11 * a1 + m12 * a2, m21 * a1 + m22 * a2)
    tb = axis_slope(dst_c, dst_s, m11 * b1 + m12 * b2, m21 * b1 + m22 * b2)
    tm = axis_slope(dst_c, dst_s, m11 * src_c + m12 * src_s, m21 * src_c + m22 * src_s)
    lo, hi = np.minimum(ta, tb), np.maximum(ta, tb)
    # the image is the arc through the image of the axis; it avoids the
    # orthogonal direction exactly when that image lies between the end slopes
    proper = np.isfinite(ta) & np.isfinite(tb) & (tm >= lo) & (tm <= hi)
    slope = np.where(proper, np.maximum(np.abs(ta), np.abs(tb)), np.inf)
    # |M v|^2 / |v|^2 for v = axis + t * normal
    p1 = m11 * src_c + m12 * src_s
    p2 = m21 * src_c + m22 * src_s
    n1 = -m11 * src_s + m12 * src_c
    n2 = -m21 * src_s + m22 * src_c
    qmin, qmax = quad_extrema(p1 * p1 + p2 * p2, p1 * n1 + p2 * n2, n1 * n1 + n2 * n2, alpha_src)
    return slope, np.sqrt(np.maximum(qmin, 0.0)), np.sqrt(qmax)


def cone_image(m, src: Cone, dst: Cone) -> ConeImageReport:
    m = np.asarray(m, dtype=float)
    if abs(np.linalg.det(m)) == 0.0:
        raise SingularMatrix("matrix is singular")
    sc, ss = src.direction
    dc, ds = dst.direction
    slope, emin, cmax = image_batch(
        (m[0, 0], m[0, 1], m[1, 0], m[1, 1]), sc, ss, src.alpha, dc, ds
    )
    slope = float(slope)
    margin = dst.alpha - slope
    return ConeImageReport(margin > 0, float(margin), float(emin), float(cmax), slope)


def image_cone(m, src: Cone) -> Cone:
    """The image of ``src`` as a symmetric cone about the bisector of the image arc."""
    m = np.asarray(m, dtype=float)
    if abs(np.linalg.det(m)) == 0.0:
        raise SingularMatrix("matrix is singular")
    sc, ss = src.direction
    (a1, a2), (b1, b2) = _boundary_rays(sc, ss, src.alpha)
    ia = m @ (a1, a2)
    ib = m @ (b1, b2)
    # raw end-ray images span the (convex) image half-cone
    ia /= np.linalg.norm(ia)
    ib /= np.linalg.norm(ib)
    bis = ia + ib
    half = 0.5 * math.atan2(abs(ia[0] * ib[1] - ia[1] * ib[0]), float(ia @ ib))
    return Cone(math.atan2(bis[1], bis[0]), math.tan(half))


def field_K(model, alpha: float, z) -> dict:
    """Unstable/stable cones of slope bound ``alpha`` about the invariant frames at z."""
    params = model.params if hasattr(model, "params") else model
    (u1, u2), (s1, s2) = frames_xy(params, z.x, z.y)
    u1, u2, s1, s2 = map(float, (u1, u2, s1, s2))
    if (u1 == 0.0 and u2 == 0.0) or (s1 == 0.0 and s2 == 0.0):
        raise DegenerateFrame(f"degenerate frame at {z}")
    return {"Ku": Cone.about(u1, u2, alpha), "Ks": Cone.about(s1, s2, alpha)}
