import json
import math

import numpy as np
import pytest

from collar.boundary import (
    NonReturning,
    SearchBudget,
    SectionSpec,
    VerificationFailed,
    boundary_fixed_points,
    entry_grid,
    transition,
    transitions,
    verify_boundary_map,
)
from collar.boundary.verify import run_transitions
from collar.geometry import CollarPoint
from collar.local_model import LocalModel, LocalModelParams, jacobian
from collar.perturbation import c1_small_c2_large, c2_small, make_family

F = LocalModel(LocalModelParams())
S = SectionSpec(0.05, 0.05, 0.2, 0.4)


def test_stable_line_never_returns():
    with pytest.raises(NonReturning):
        transition(F, S, CollarPoint(0.0, 0.3))
    with pytest.raises(ValueError):
        transition(F, S, CollarPoint(0.3, 0.3))  # not in R+


def test_n_hat_oracle():
    # direct-iteration oracle at 50 digits: n = 5, exit (1.5464001276686633806, 0.3840118795692168975)
    r = transition(F, S, CollarPoint(0.04, 0.3))
    assert r.n_hat == 5
    assert r.exit.x == pytest.approx(1.5464001276686633806, abs=1e-13)
    assert r.exit.y == pytest.approx(0.3840118795692168975, abs=1e-13)


def test_staircase():
    x = 0.04 * 2.0 ** -np.arange(0, 40, dtype=float)
    tb = transitions(F, S, x, np.full(x.size, 0.3))
    assert tb.ok.all()
    steps = np.diff(tb.n_hat)
    assert np.all(steps >= 0) and np.all(steps <= 1)
    # a factor lam^2 in the offset costs one step leaving the stable prong and
    # one more near the unstable prong to regain y: one step per halving (lam = 2)
    per_halving = (tb.n_hat[-1] - tb.n_hat[0]) / (x.size - 1)
    assert per_halving == pytest.approx(1.0, abs=0.06)


def test_deriv_is_jet_product():
    r = transition(F, S, CollarPoint(0.013, 0.25))
    x, y = 0.013, 0.25
    M = np.eye(2)
    for _ in range(r.n_hat):
        d11, d12, d21, d22 = (float(v) for v in jacobian(F.params, x, y))
        M = np.array([[d11, d12], [d21, d22]]) @ M
        x, y = (float(v) for v in F.step(x, y))
    assert np.max(np.abs(M - r.deriv)) <= 1e-9 * max(1.0, np.max(np.abs(M)))


def test_fixed_points_of_F():
    for p in (1, 2, 3):
        fx = boundary_fixed_points(LocalModel(LocalModelParams(p=p, lam=2.0)))
        assert len(fx) == 2 * p and all(f.saddle for f in fx)
        assert [f.x for f in fx] == pytest.approx([math.pi * j / p for j in range(2 * p)], abs=1e-12)


@pytest.fixture(scope="module")
def F_report():
    return verify_boundary_map(F)


def test_F_passes(F_report):
    rep = F_report
    assert rep.passed and rep.degree == 2 and rep.morse_smale_ok
    cs = rep.cone_structure
    assert cs.sigma > 1.05 and cs.min_margin > 0 and cs.n_transitions >= 10**5
    assert 0 < cs.shrink < 1 and cs.shrink == max(cs.alpha0, cs.alpha0_stable) / cs.alpha
    rep.raise_for_verdict()


def test_report_deterministic(F_report):
    again = verify_boundary_map(F)
    dump = lambda r: json.dumps(r.to_dict(), sort_keys=True, default=str)
    assert dump(again) == dump(F_report)


def test_workers_do_not_change_transitions():
    x, y = entry_grid(2, SectionSpec(2**-5, 0.125, 0.05, 0.1), 64, 8, 30)
    a = run_transitions(F, SectionSpec(2**-5, 0.125, 0.05, 0.1), x, y, 10**6, workers=1, chunk=100)
    b = run_transitions(F, SectionSpec(2**-5, 0.125, 0.05, 0.1), x, y, 10**6, workers=4, chunk=100)
    for u, v in zip((a.n_hat, a.x_exit, a.y_exit, *a.deriv), (b.n_hat, b.x_exit, b.y_exit, *b.deriv)):
        assert np.array_equal(u, v)


def test_c2_small_passes():
    rep = verify_boundary_map(make_family(c2_small(1e-4)))
    assert rep.passed and rep.cone_structure.sigma > 1


def test_c1_small_c2_large_fails_condition_4():
    G = make_family(c1_small_c2_large(1e-3, 1.0))
    rep = verify_boundary_map(G)
    assert rep.verdict == "fail" and rep.failed_condition == 4
    w = rep.witness
    assert w is not None and "entry" in w and w["n_hat"] > 0
    with pytest.raises(VerificationFailed) as e:
        rep.raise_for_verdict()
    assert e.value.condition == 4


class _Rotated:
    """F followed by a rotation larger than max |h(x) - x|: no boundary fixed points."""

    def __init__(self):
        self.params = F.params

    def step(self, x, y):
        gx, gy = F.step(x, y)
        return gx + 1.0, gy

    def jac(self, x, y):
        return F.jac(x, y)


def test_condition_1_failure():
    rep = verify_boundary_map(_Rotated(), search_budget=SearchBudget(max_full_checks=1))
    assert rep.failed_condition == 1
    with pytest.raises(VerificationFailed):
        verify_boundary_map(_Rotated(), strict=True)
