import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from collar.geometry import CollarPoint, WSPoint
from collar.local_model import (
    DegenerateFrame,
    LocalModelParams,
    OutOfCollar,
    OutOfSector,
    apply_F,
    apply_flow,
    flow_xy,
    frames_ws,
    invariant_frames,
    jacobian,
    jet_F,
    kernel_de,
    kernel_h,
    linearization,
    mixed_second,
    strip_edges,
    strip_index,
)

P = LocalModelParams()


def test_fixed_points():
    assert apply_F(P, CollarPoint(0.0, 0.0)) == CollarPoint(0.0, 0.0)
    for p in (1, 2, 3, 5):
        q = LocalModelParams(p=p, lam=1.7)
        for j in range(2 * p):
            x = math.pi * j / p
            fx, fy = flow_xy(q, x, 0.0)
            assert fy == 0.0
            assert abs((fx - x + math.pi) % (2 * math.pi) - math.pi) <= 1e-14


def test_prong_and_oracle_values():
    z = apply_F(P, CollarPoint(math.pi / 2, 0.3))
    assert z.x == pytest.approx(math.pi / 2, abs=1e-15) and z.y == pytest.approx(0.6, abs=1e-15)
    # mpmath oracle: (1.3258176636680324651, 0.14577379737113251177)
    z = apply_F(P, CollarPoint(math.pi / 4, 0.1))
    assert z.x == pytest.approx(1.3258176636680324651, abs=1e-15)
    assert z.y == pytest.approx(0.14577379737113251177, abs=1e-16)


def test_out_of_collar():
    with pytest.raises(OutOfCollar):
        apply_F(P, CollarPoint(0.1, 1.0))


def test_flow_examples():
    rng = np.random.default_rng(0)
    x, y = np.meshgrid(np.linspace(0, 2 * math.pi, 64), np.linspace(0, 0.99, 64))
    for xi, yi in zip(x.ravel()[::17], y.ravel()[::17]):
        a = apply_flow(P, 1.0, CollarPoint(xi, yi))
        b = apply_F(P, CollarPoint(xi, yi))
        assert abs(a.x - b.x) <= 1e-12 and abs(a.y - b.y) <= 1e-12
    fx, fy = flow_xy(P, *flow_xy(P, x, y, 0.5), 0.5)
    gx, gy = flow_xy(P, x, y)
    assert np.max(np.abs(np.remainder(fx - gx + math.pi, 2 * math.pi) - math.pi)) <= 1e-9
    assert np.max(np.abs(fy - gy)) <= 1e-9
    assert apply_flow(P, 1.0, WSPoint(0.0, 0.4), "ws") == WSPoint(0.0, 0.05)
    del rng


def test_ws_flow_continuity():
    for s in (0.1, 0.4, 2.0):
        for t in (0.5, 1.0, 2.0):
            lim = apply_flow(P, t, WSPoint(0.0, s), "ws")
            near = apply_flow(P, t, WSPoint(1e-8, s), "ws")
            assert abs(near.s - lim.s) <= 1e-6 and abs(near.w) <= 1e-6


def test_jet_at_origin():
    j = jet_F(P, CollarPoint(0.0, 0.0))
    assert np.array_equal(j.d, np.diag([4.0, 0.5]))


def test_h_prime_one_at_x0():
    # finite-difference oracle on h
    x0 = P.x0
    h = 1e-6
    d = (kernel_h(x0 + h, 2.0) - kernel_h(x0 - h, 2.0)) / (2 * h)
    assert float(d) == pytest.approx(1.0, abs=1e-8)
    assert float(jacobian(P, x0, 0.2)[0]) == pytest.approx(1.0, abs=1e-14)


def test_mixed_second_unique_max():
    x = np.linspace(0, math.pi / 2, 4001)
    m = mixed_second(P, x)
    i = int(np.argmax(m))
    assert 0 < i < x.size - 1
    # mpmath oracle: argmax is atan(1/2) = 0.46364760900080611621 for lam = 2
    assert x[i] == pytest.approx(0.46364760900080611621, abs=1e-3)
    d = np.sign(np.diff(m))
    assert np.count_nonzero(d[1:] != d[:-1]) == 1


def test_frames():
    f = invariant_frames(P, CollarPoint(0.0, 0.37))
    assert f["sigma_u"].components == (1.0, 0.0)
    with pytest.raises(DegenerateFrame):
        invariant_frames(P, WSPoint(0.0, 0.0))
    # sigma~s at w = 0 vanishes for every s
    for s in (0.1, 0.5, 3.0):
        (_, _), (s1, s2) = frames_ws(0.0, s)
        assert s1 == 0.0 and s2 == 0.0


def test_frame_invariance_grid():
    x, y = np.meshgrid(np.linspace(0.01, 2 * math.pi - 0.01, 100), np.linspace(0.01, 0.45, 100))
    d11, d12, d21, d22 = jacobian(P, x, y)
    fx, fy = flow_xy(P, x, y)
    from collar.local_model import frames_xy
    for k in (0, 1):
        src = frames_xy(P, x, y)[k]
        dst = frames_xy(P, fx, fy)[k]
        im = (d11 * src[0] + d12 * src[1], d21 * src[0] + d22 * src[1])
        cross = (im[0] * dst[1] - im[1] * dst[0]) / (np.hypot(*im) * np.hypot(*dst))
        assert np.max(np.abs(cross)) <= 1e-9


def test_linearization():
    assert linearization(P, (0.0, 0.7), "psi") == (0.0, 0.7)
    u = linearization(P, (0.3, 0.2), "psi")
    back = linearization(P, u, "phi")
    assert back == pytest.approx((0.3, 0.2), abs=1e-12)
    x, y = np.meshgrid(np.linspace(0.01, 1.39, 60), np.linspace(0.0, 0.99, 60))
    for a, b in zip(x.ravel()[::7], y.ravel()[::7]):
        fz = flow_xy(P, a, b)
        lhs = linearization(P, (float(fz[0]), float(fz[1])), "psi")
        rhs = linearization(P, linearization(P, (a, b), "psi"), "L0")
        assert abs(lhs[0] - rhs[0]) <= 1e-10 * max(1.0, abs(rhs[0]))
        assert abs(lhs[1] - rhs[1]) <= 1e-10


def test_strip_index():
    assert strip_index(P, math.atan(2.0)) == 0
    assert strip_index(P, math.atan(0.5)) == -1
    with pytest.raises(OutOfSector):
        strip_index(P, 0.0)
    rng = np.random.default_rng(3)
    for x in rng.uniform(1e-4, math.pi / 2 - 1e-4, 1000):
        n = strip_index(P, x)
        hx = float(kernel_h(x, 2.0))
        if hx < math.pi / 2 - 1e-12:
            assert strip_index(P, hx) == n + 1
    e = strip_edges(P, np.arange(-3, 3))
    assert np.allclose(kernel_h(e[:-1], 2.0), e[1:], atol=1e-14)


def test_boundary_invariance():
    x = np.linspace(0, 2 * math.pi, 1001)
    _, fy = flow_xy(LocalModelParams(p=3, lam=1.5), x, np.zeros_like(x))
    assert np.all(fy == 0.0)


@given(st.floats(0, 2 * math.pi), st.floats(0, 0.99), st.sampled_from([0.25, 0.5, 1.0]),
       st.sampled_from([0.25, 0.5, 1.0]), st.integers(1, 4))
def test_group_law_property(x, y, t, s, p):
    q = LocalModelParams(p=p, lam=2.0)
    ax, ay = flow_xy(q, x, y, t + s)
    bx, by = flow_xy(q, *flow_xy(q, x, y, s), t)
    assert abs((float(ax - bx) + math.pi) % (2 * math.pi) - math.pi) <= 1e-9
    assert abs(float(ay - by)) <= 1e-9


@given(st.floats(-20, 20), st.floats(1.01, 5), st.floats(-2, 2))
def test_kernel_h_inverse(theta, lam, t):
    back = kernel_h(kernel_h(theta, lam, t), lam, -t)
    assert abs(float(back) - theta) <= 1e-12 * max(1.0, abs(theta))


@given(st.floats(0, math.pi / 2), st.floats(1.01, 5))
def test_kernel_de_matches_difference(theta, lam):
    from collar.local_model import kernel_e
    h = 1e-6
    fd = (kernel_e(theta + h, lam) - kernel_e(theta - h, lam)) / (2 * h)
    assert float(kernel_de(theta, lam)) == pytest.approx(float(fd), abs=1e-6 * lam**2)


def test_params_validation():
    for bad in (dict(p=0), dict(lam=1.0), dict(r=0.0), dict(p=1.5)):
        with pytest.raises(ValueError):
            LocalModelParams(**bad)
