import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from collar.geometry import CollarPoint
from collar.local_model import LocalModel, LocalModelParams, jet_F
from collar.perturbation import (
    BumpSpec,
    Infeasible,
    PerturbedMap,
    apply_perturbed,
    c1_small_c2_large,
    c2_small,
    ck_norm,
    jet_perturbed,
    make_family,
)

F = LocalModel(LocalModelParams())
B = BumpSpec((0.8, 0.3), 0.1, (1e-3, 2e-3))


def test_empty_and_linear():
    G = PerturbedMap(F, [])
    assert all(ck_norm(G, k) == 0.0 for k in (0, 1, 2))
    one = PerturbedMap(F, [B])
    two = PerturbedMap(F, [B.scaled(2.0)])
    for k in (0, 1, 2):
        assert ck_norm(two, k) == pytest.approx(2 * ck_norm(one, k), rel=1e-14)


def test_radius_halving_c2_grows_fourfold():
    # angular displacement a phi: second partials scale exactly as a / rho^2
    wide = PerturbedMap(F, [BumpSpec((0.8, 0.3), 0.1, (1e-3, 0.0))])
    narrow = PerturbedMap(F, [BumpSpec((0.8, 0.3), 0.05, (1e-3, 0.0))])
    assert ck_norm(narrow, 2) / ck_norm(wide, 2) == pytest.approx(4.0, rel=1e-12)
    # radial displacement a y phi carries lower-order terms, so only roughly 4x
    wide = PerturbedMap(F, [BumpSpec((0.8, 0.3), 0.1, (0.0, 1e-3))])
    narrow = PerturbedMap(F, [BumpSpec((0.8, 0.3), 0.05, (0.0, 1e-3))])
    assert ck_norm(narrow, 2) / ck_norm(wide, 2) == pytest.approx(4.0, rel=0.05)


def test_norm_monotone():
    G = PerturbedMap(F, [B, BumpSpec((2.0, 0.5), 0.2, (-3e-3, 1e-3))])
    n = [ck_norm(G, k) for k in (0, 1, 2)]
    assert n[0] <= n[1] <= n[2]


def test_outside_support_is_base():
    G = PerturbedMap(F, [B])
    z = CollarPoint(2.5, 0.6)
    assert apply_perturbed(G, z) == CollarPoint(*map(float, F.step(z.x, z.y)))
    assert np.array_equal(jet_perturbed(G, z).d, jet_F(F.params, z).d)


def test_boundary_invariant():
    fam = make_family(c1_small_c2_large(1e-3, 1.0))
    x = np.linspace(0, 2 * math.pi, 2001)
    _, gy = fam.step(x, np.zeros_like(x))
    assert np.all(gy == 0.0)


def test_jet_matches_finite_differences():
    G = make_family(c1_small_c2_large(1e-3, 1.0))
    b = G.bumps[0]
    rng = np.random.default_rng(11)
    h = 1e-4 * b.radius  # the support is tiny; smaller steps hit round-off in x
    r = b.radius * np.sqrt(rng.uniform(0, 1, 1000))
    t = rng.uniform(0, 2 * math.pi, 1000)
    x, y = b.center[0] + r * np.cos(t), b.center[1] + r * np.sin(t)
    a11, a12, a21, a22 = G.jac(x, y)

    def d(dx, dy):
        # fourth-order central difference
        f = lambda k: np.stack(G.step(x + k * dx, y + k * dy))
        return (8 * (f(1) - f(-1)) - (f(2) - f(-2))) / (12 * h)

    fx, fy = d(h, 0.0), d(0.0, h)
    for got, fd in ((a11, fx[0]), (a21, fx[1]), (a12, fy[0]), (a22, fy[1])):
        assert np.max(np.abs(got - fd)) <= 1e-6


def test_zero_amplitude_is_bitwise_base():
    G = PerturbedMap(F, [B.scaled(0.0)])
    rng = np.random.default_rng(2)
    x, y = rng.uniform(0, 2 * math.pi, 500), rng.uniform(0, 0.5, 500)
    gx, gy = x.copy(), y.copy()
    fx, fy = x.copy(), y.copy()
    for _ in range(20):
        gx, gy = G.step(gx, gy)
        fx, fy = F.step(fx, fy)
    assert np.array_equal(gx, fx) and np.array_equal(gy, fy)


def test_families():
    G = make_family(c2_small(1e-4))
    assert ck_norm(G, 2) == pytest.approx(1e-4, rel=1e-12)
    assert G.min_jacobian_det() > 0
    H = make_family(c1_small_c2_large(1e-3, 1.0))
    assert ck_norm(H, 1) <= 1e-3 * (1 + 1e-9)
    assert ck_norm(H, 2) >= 1.0
    assert H.min_jacobian_det() > 0
    with pytest.raises(ValueError):
        make_family(c2_small(-1.0))


def test_infeasible_collar():
    tiny = LocalModel(LocalModelParams(r=1e-9))
    G = make_family(c2_small(1e-4), base=tiny)  # bump scales with r
    assert G.bumps[0].center[1] + G.bumps[0].radius < 1e-9
    from collar.perturbation import _fit
    with pytest.raises(Infeasible):
        _fit(PerturbedMap(F), BumpSpec((0.0, 0.95), 0.1, (1, 1)))


def test_inverse():
    G = make_family(c2_small(1e-2))
    b = G.bumps[0]
    x = b.center[0] + np.linspace(-b.radius, b.radius, 41)
    y = np.full_like(x, b.center[1])
    gx, gy = G.step(x, y)
    px, py = G.inverse(gx, gy)
    assert np.max(np.abs(px - x)) <= 1e-12 and np.max(np.abs(py - y)) <= 1e-12


@given(st.floats(1e-6, 10.0))
def test_norm_linear_in_amplitude(s):
    one = ck_norm(PerturbedMap(F, [B]), 1)
    assert ck_norm(PerturbedMap(F, [B.scaled(s)]), 1) == pytest.approx(s * one, rel=1e-12)


def test_bump_round_trip():
    assert BumpSpec.from_dict(B.to_dict()) == B
    with pytest.raises(ValueError):
        BumpSpec((0, 0), 0.0, (1, 1))
