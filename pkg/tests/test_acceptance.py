"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Run alone with: pytest tests/test_acceptance.py -v
"""
import json
import time

import pytest

from collar.boundary import Region, partition_markov, slope_tracking_batch, verify_boundary_map
from collar.config import EXPERIMENTS, config_from_dict
from collar.experiments import run_experiment
from collar.local_checks import angle_asymptotic, conjugacy_residual, derivative_bounds, group_law_residual
from collar.local_model import LocalModel, LocalModelParams
from collar.perturbation import c1_small_c2_large, c2_small, make_family
from collar.report import dumps_report
from collar.rng import task_rng

P = LocalModelParams(p=2, lam=2.0)
F = LocalModel(P)


@pytest.fixture
def report_line(capsys):
    def emit(n, ok, detail):
        with capsys.disabled():
            print(f"\nACCEPTANCE C{n} {'PASS' if ok else 'FAIL'}: {detail}")
        return ok
    return emit


def test_c1_conjugacy_suite(report_line):
    t0 = time.perf_counter()
    conj = conjugacy_residual(P, 512)
    group = group_law_residual(P, 512)
    dt = time.perf_counter() - t0
    ok = conj <= 1e-10 and group <= 1e-9 and dt < 5
    assert report_line(1, ok, f"conjugacy {conj:.2e} <= 1e-10, group law {group:.2e} <= 1e-9, {dt:.2f} s < 5 s")


def test_c2_derivative_bounds(report_line):
    t0 = time.perf_counter()
    b = derivative_bounds(F, 512)
    dt = time.perf_counter() - t0
    ok = b.ok and dt < 5
    assert report_line(2, ok, f"slacks {b.item1_slack:.2e}, {b.item2_slack:.2e}, {b.item3_slack:.2e} > 0, "
                              f"sign changes {b.sign_changes} == 1, {dt:.2f} s < 5 s")


def test_c3_angle_asymptotic(report_line):
    t0 = time.perf_counter()
    a = angle_asymptotic(s_range=(0.5, 2.0), w_fit=1e-2, w_check=1e-3, w_range=(1e-4, 1e-2))
    dt = time.perf_counter() - t0
    ok = a.ok and dt < 2
    assert report_line(3, ok, f"C = {a.C:.4f}, residual ratio {a.ratio:.1f} vs 1000 +- 10%, "
                              f"bound holds {a.bound_ok}, {dt:.2f} s < 2 s")


def test_c4_cone_expansion_markov(report_line):
    t0 = time.perf_counter()
    rep = verify_boundary_map(F)
    cs = rep.cone_structure
    cells = partition_markov(F, rep.sections, t_max=30, alpha=cs.alpha, strict=False) if rep.passed else []
    dt = time.perf_counter() - t0
    crossing = bool(cells) and cells[-1].t == 30 and all(c.cross_ok for c in cells)
    ok = (rep.passed and cs.sigma >= 1.05 and cs.min_margin > 0 and cs.n_transitions >= 10**5
          and crossing and dt < 60)
    assert report_line(4, ok, f"sigma {cs.sigma:.4f} >= 1.05, margin {cs.min_margin:.4f} > 0 over "
                              f"{cs.n_transitions} transitions, cells t={cells[0].t}..{cells[-1].t} all cross, "
                              f"{dt:.2f} s < 60 s")


def test_c5_slope_tracking(report_line):
    t0 = time.perf_counter()
    s = slope_tracking_batch(F, Region(-2, 0.05), 1000, task_rng(0, 0))
    dt = time.perf_counter() - t0
    floor = 2.0**-3 - 1e-9
    ok = (s.n_orbits == 1000 and s.min_margin > 0 and s.all_positive and s.min_ratio >= floor
          and s.constants.m_star >= 1 and dt < 30)
    assert report_line(5, ok, f"m* = {s.constants.m_star}, min(sl - eta) {s.min_margin:.3e} > 0 over "
                              f"{s.n_orbits} orbits, min ratio {s.min_ratio:.6f} >= lam^-3, "
                              f"exit slopes positive {s.all_positive}, {dt:.2f} s < 30 s")


def test_c6_perturbation_dichotomy(report_line):
    t0 = time.perf_counter()
    G = make_family(c2_small(1e-4))
    H = make_family(c1_small_c2_large(1e-3, 1.0))
    a, b = verify_boundary_map(G), verify_boundary_map(H)
    a2, b2 = verify_boundary_map(G), verify_boundary_map(H)
    dt = time.perf_counter() - t0
    same = (dumps_report(a.to_dict()) == dumps_report(a2.to_dict())
            and dumps_report(b.to_dict()) == dumps_report(b2.to_dict()))
    ok = a.passed and b.failed_condition == 4 and b.witness is not None and same and dt < 60
    assert report_line(6, ok, f"c2_small(1e-4) {a.verdict}, c1_small_c2_large(1e-3, 1) fails condition "
                              f"{b.failed_condition} with witness at {b.witness['entry'] if b.witness else None}, "
                              f"reproducible {same}, {dt:.2f} s (two runs each) < 60 s")


def _torus_suite(family, lyap_tol):
    extra = {"family": family} if family else {}
    res = {}
    for e in ("orbit", "mixing", "homoclinic", "lyapunov"):
        cfg = config_from_dict({"experiment": e, "tolerances": {"lyapunov": lyap_tol}, **extra})
        res[e] = run_experiment(cfg, write=False)
    r = {e: x.report["results"] for e, x in res.items()}
    hom = r["homoclinic"]
    detail = (f"full cover by step {max(o['first_full_cover'] for o in r['orbit']['orbits'])}, "
              f"first hit <= {max(q['first_hit'] for q in r['mixing']['pairs'])}, "
              f"persistent from <= {max(q['persistent_from'] for q in r['mixing']['pairs'])}, "
              f"{hom['count']} homoclinic points with angle error {hom['max_angle_error']:.1e}"
              + (f" (displaced {hom['max_displacement']:.1e})" if "max_displacement" in hom else "")
              + f", lyapunov error {r['lyapunov']['max_error']:.1e} <= {lyap_tol:g}")
    return all(x.passed for x in res.values()), detail


def test_c7_global_torus(report_line):
    t0 = time.perf_counter()
    ok0, d0 = _torus_suite(None, 1e-3)
    ok1, d1 = _torus_suite({"kind": "c2_small", "delta": 1e-4, "near": "interior"}, 1e-2)
    dt = time.perf_counter() - t0
    ok = ok0 and ok1 and dt < 300
    assert report_line(7, ok, f"unperturbed: {d0}; c2_small(1e-4): {d1}; {dt:.1f} s < 300 s")


def _run_all(tmp, workers):
    out = {}
    configs = [{"experiment": e} for e in EXPERIMENTS]
    configs += [{"experiment": e, "family": {"kind": "c2_small", "delta": 1e-4, "near": "interior"},
                 "tolerances": {"lyapunov": 1e-2}, "output": "perturbed"}
                for e in ("orbit", "mixing", "homoclinic", "lyapunov")]
    for raw in configs:
        cfg = config_from_dict({**raw, "seed": 20240601, "workers": workers})
        res = run_experiment(cfg, out=tmp / str(workers) / raw.get("output", "base"))
        for p in sorted(res.directory.iterdir()):
            if p.name != "timing.json":
                out[f"{raw.get('output', 'base')}/{res.directory.name}/{p.name}"] = p.read_bytes()
    return out


def test_c8_determinism(report_line, tmp_path):
    t0 = time.perf_counter()
    a = _run_all(tmp_path, 1)
    b = _run_all(tmp_path, 4)
    dt = time.perf_counter() - t0
    differ = sorted(k for k in a if a[k] != b.get(k))
    ok = a.keys() == b.keys() and not differ
    verdicts = {k: json.loads(v)["verdict"] for k, v in a.items() if k.endswith("report.json")}
    assert report_line(8, ok, f"{len(a)} report/CSV files byte-identical across reruns with 1 and 4 workers "
                              f"(differing: {differ or 'none'}), verdicts all pass "
                              f"{all(v == 'pass' for v in verdicts.values())}, {dt:.1f} s")
    assert all(v == "pass" for v in verdicts.values()), verdicts
