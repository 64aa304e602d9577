import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from collar.cones import (
    Cone,
    SingularMatrix,
    cone_contains,
    cone_image,
    field_K,
    image_cone,
)
from collar.geometry import CollarPoint, line_angle
from collar.local_model import LocalModel, LocalModelParams, flow_xy, frames_xy, jacobian

E1 = Cone.about(1.0, 0.0, 1.0)


def test_membership():
    for a in (1e-6, 0.1, 5.0):
        assert cone_contains(Cone.about(1.0, 0.0, a), (1.0, 0.0))
    assert not cone_contains(Cone.about(1.0, 0.0, 1.0), (1.0, 2.0))
    assert cone_contains(Cone.about(1.0, 0.0, 0.6), (1.0, 0.5))


@pytest.mark.parametrize("lam", [1.5, 2.0, 3.0])
def test_L0_image(lam):
    L0 = np.diag([lam**2, 1 / lam])
    rep = cone_image(L0, Cone.about(1, 0, 0.1), Cone.about(1, 0, 0.1))
    assert rep.image_slope == pytest.approx(0.1 * lam**-3, rel=1e-14)
    assert rep.contained


def test_L0_expansion_oracle():
    # mpmath oracle: min |L0 v|/|v| over C(0.1), lam = 2 is 3.9804596978163959372
    rep = cone_image(np.diag([4.0, 0.5]), Cone.about(1, 0, 0.1), Cone.about(1, 0, 0.1))
    assert rep.expansion_min == pytest.approx(3.9804596978163959372, rel=1e-13)
    assert rep.expansion_min > 3.9


def test_rotation_fails():
    R = np.array([[0.0, -1.0], [1.0, 0.0]])
    for a in (0.1, 0.5, 0.99):
        assert not cone_image(R, Cone.about(1, 0, a), Cone.about(1, 0, a)).contained


def test_singular():
    with pytest.raises(SingularMatrix):
        cone_image(np.array([[1.0, 2.0], [2.0, 4.0]]), E1, E1)


def test_field_K_on_prong():
    K = field_K(LocalModel(LocalModelParams()), 0.2, CollarPoint(0.0, 0.4))
    assert K["Ku"].direction == pytest.approx((1.0, 0.0))
    assert K["Ks"].direction == pytest.approx((0.0, 1.0), abs=1e-15)


def test_field_K_invariance_parabolic_region():
    # DF K^u(alpha, z) inside K^u(alpha, F z) on y >= mu x^2, mu = 1, alpha = 0.2
    P = LocalModelParams()
    x, f = np.meshgrid(np.linspace(-1.2, 1.2, 100), np.linspace(0, 1, 100))
    y = x * x + f * (0.45 - x * x)
    x, y = x.ravel(), y.ravel()
    keep = y >= x * x
    x, y = x[keep], y[keep]
    d11, d12, d21, d22 = jacobian(P, x, y)
    fx, fy = flow_xy(P, x, y)
    (u1, u2), _ = frames_xy(P, x, y)
    (v1, v2), _ = frames_xy(P, fx, fy)
    margins = []
    for i in range(x.size):
        m = [[d11[i], d12[i]], [d21[i], d22[i]]]
        rep = cone_image(m, Cone.about(u1[i], u2[i], 0.2), Cone.about(v1[i], v2[i], 0.2))
        margins.append(rep.margin)
    assert min(margins) > 0


def test_transversality():
    P = LocalModelParams()
    x, y = np.meshgrid(np.linspace(0, 2 * math.pi, 200), np.linspace(0.2, 0.9, 50))
    (u1, u2), (s1, s2) = frames_xy(P, x, y)
    assert float(np.min(line_angle(u1, u2, s1, s2))) > 0.3


mat = st.floats(-5, 5, allow_nan=False)


@given(mat, mat, mat, mat, st.floats(-math.pi, math.pi), st.floats(0.01, 3))
def test_expansion_exact(a, b, c, d, axis, alpha):
    m = np.array([[a, b], [c, d]])
    if abs(np.linalg.det(m)) < 1e-3:
        return
    src = Cone(axis, alpha)
    rep = cone_image(m, src, src)
    t = np.linspace(-alpha, alpha, 20001)
    ca, sa = math.cos(axis), math.sin(axis)
    v = np.stack([ca - sa * t, sa + ca * t])
    ratio = np.linalg.norm(m @ v, axis=0) / np.linalg.norm(v, axis=0)
    assert ratio.min() >= rep.expansion_min - 1e-9
    assert ratio.min() <= rep.expansion_min + 1e-3 * max(1.0, rep.expansion_min)


@given(mat, mat, mat, mat, mat, mat, mat, mat, st.floats(0.05, 1.0))
def test_composition(a, b, c, d, e, f, g, h, alpha):
    m1, m2 = np.array([[a, b], [c, d]]), np.array([[e, f], [g, h]])
    if min(abs(np.linalg.det(m1)), abs(np.linalg.det(m2))) < 1e-2:
        return
    src = Cone.about(1.0, 0.0, alpha)
    mid = image_cone(m2, src)
    whole = cone_image(m1 @ m2, src, src).expansion_min
    step = cone_image(m1, mid, mid).expansion_min * cone_image(m2, src, src).expansion_min
    assert whole >= step * (1 - 1e-9) - 1e-12


def test_cone_validation():
    with pytest.raises(ValueError):
        Cone(0.0, 0.0)
