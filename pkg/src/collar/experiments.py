"""Experiment registry: each experiment maps a config to results, traces and a verdict."""
from __future__ import annotations

import math
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .boundary import (
    CrossingFailed,
    Region,
    SearchBudget,
    partition_markov,
    slope_tracking,
    slope_tracking_batch,
    verify_boundary_map,
)
from .boundary.slopes import sample_entries
from .config import ExperimentConfig, UnknownExperiment
from .geometry import CollarPoint
from .local_checks import (
    angle_asymptotic,
    conjugacy_residual,
    derivative_bounds,
    group_law_residual,
    parabolic_infimum,
    transversality_zeta,
    ws_angle,
)
from .local_model import LocalModel, LocalModelParams
from .perturbation import BumpSpec, PerturbedMap, c1_small_c2_large, c2_small, ck_norm, make_family
from .report import SCHEMA, Trace, emit_csv, write_report
from .rng import TASK_LYAPUNOV_SEEDS, TASK_MIXING, TASK_ORBIT_SEEDS, TASK_SLOPE, task_rng
from .torus import (
    COLLAR_RADIUS,
    LOG_LAM_A,
    Ball,
    CatBlowup,
    Interior,
    eigenline_angle,
    homoclinic_find,
    lyapunov_estimate,
    minimal_periodic_point,
    mixing_suite,
    orbit_density,
    torus_base,
)

OUTPUT_ENV = "COLLAR_OUTPUT"


@dataclass
class Outcome:
    passed: bool
    results: dict
    traces: dict = field(default_factory=dict)  # file stem -> Trace


# ---------------------------------------------------------------------------
# model construction
# ---------------------------------------------------------------------------

def base_model(cfg: ExperimentConfig) -> LocalModel:
    if cfg.model.torus:
        return torus_base()
    m = cfg.model
    return LocalModel(LocalModelParams(p=m.p, lam=m.lam, r=m.r))


def _family_kind(fam):
    if fam.kind == "c2_small":
        return c2_small(fam.delta)
    return c1_small_c2_large(fam.delta1, fam.m2)


def build_map(cfg: ExperimentConfig, base=None):
    """The collar map: base model plus family bumps plus explicit bumps."""
    base = base if base is not None else base_model(cfg)
    bumps = []
    if cfg.family is not None:
        bumps.extend(make_family(_family_kind(cfg.family), near=cfg.family.near, base=base).bumps)
    bumps.extend(BumpSpec(tuple(b.center), b.radius, tuple(b.amplitude)) for b in cfg.perturbation)
    return PerturbedMap(base, bumps) if bumps else base


def torus_perturbation(cfg: ExperimentConfig):
    """Collar perturbation of the cat map blow-up, or None."""
    if cfg.family is None and not cfg.perturbation:
        return None
    return build_map(cfg, torus_base())


def _bumps_of(cmap):
    return [b.to_dict() for b in getattr(cmap, "bumps", ())]


def search_budget(cfg: ExperimentConfig) -> SearchBudget:
    g, c = cfg.grids, cfg.caps
    return SearchBudget(n_x=g.n_x, n_y=g.n_y, depth_bits=g.depth_bits, n_max=c.n_max,
                        support_samples=g.support_samples, bisect_iters=c.bisect_iters,
                        max_full_checks=c.max_full_checks, workers=cfg.workers)


# ---------------------------------------------------------------------------
# local model experiments
# ---------------------------------------------------------------------------

def run_verify_local(cfg: ExperimentConfig) -> Outcome:
    cmap = build_map(cfg)
    params = cmap.params
    tol = cfg.tolerances
    n = cfg.grids.n
    conj = conjugacy_residual(params, n) if params.p == 2 else None
    group = group_law_residual(params, n)
    bounds = derivative_bounds(cmap, n)
    asym = angle_asymptotic()
    zeta = transversality_zeta(params, n=n)
    para = parabolic_infimum()
    passed = (conj is None or conj <= tol.conjugacy) and group <= tol.group_law and bounds.ok and asym.ok
    ws = np.geomspace(1e-4, 1e-2, 41)
    s = np.linspace(0.5, 2.0, 61)
    rows = []
    for w in ws:
        res = float(np.max(np.abs(ws_angle(w, s) - w / (2.0 * s))))
        rows.append((float(w), res, asym.C * float(w) ** 3))
    return Outcome(passed, {
        "conjugacy_residual": conj,
        "group_law_residual": group,
        "derivative_bounds": {**asdict(bounds), "ok": bounds.ok},
        "angle_asymptotic": {**asdict(asym), "ok": asym.ok},
        "zeta": zeta,
        "parabolic_region": para,
        "bumps": _bumps_of(cmap),
    }, {"angle_residual": Trace(("w", "max_residual", "bound"), rows)})


def _fixed_point_trace(report):
    rows = [(f.x, f.eigenvalues[0], f.eigenvalues[1], f.saddle) for f in report.fixed_points]
    return Trace(("x", "eig_min", "eig_max", "saddle"), rows)


def run_verify_boundary(cfg: ExperimentConfig) -> Outcome:
    cmap = build_map(cfg)
    rep = verify_boundary_map(cmap, search_budget=search_budget(cfg))
    out = rep.to_dict()
    out["bumps"] = _bumps_of(cmap)
    return Outcome(rep.passed, out, {"fixed_points": _fixed_point_trace(rep)})


def run_perturb_scan(cfg: ExperimentConfig) -> Outcome:
    base = base_model(cfg)
    budget = search_budget(cfg)
    rows, c2_out, c1_out = [], [], []
    for d in cfg.scan.c2_deltas:
        G = make_family(c2_small(d), base=base)
        rep = verify_boundary_map(G, search_budget=budget)
        n1, n2 = ck_norm(G, 1), ck_norm(G, 2)
        c2_out.append({"delta": d, "c1_norm": n1, "c2_norm": n2, "report": rep.to_dict()})
        rows.append(("c2_small", d, math.nan, n1, n2, rep.verdict, rep.failed_condition or 0))
    for d1, m2 in cfg.scan.c1:
        G = make_family(c1_small_c2_large(d1, m2), base=base)
        rep = verify_boundary_map(G, search_budget=budget)
        n1, n2 = ck_norm(G, 1), ck_norm(G, 2)
        c1_out.append({"delta1": d1, "m2": m2, "c1_norm": n1, "c2_norm": n2, "report": rep.to_dict()})
        rows.append(("c1_small_c2_large", d1, m2, n1, n2, rep.verdict, rep.failed_condition or 0))
    c2_ok = all(r["report"]["verdict"] == "pass" for r in c2_out)
    c1_ok = all(r["report"]["failed_condition"] == 4 and r["report"]["witness"] for r in c1_out)
    passing = [r["delta"] for r in c2_out if r["report"]["verdict"] == "pass"]
    failing = [r["delta"] for r in c2_out if r["report"]["verdict"] != "pass"]
    return Outcome(c2_ok and c1_ok, {
        "c2_small": c2_out,
        "c1_small_c2_large": c1_out,
        "largest_passing_c2_delta": max(passing) if passing else None,
        "smallest_failing_c2_delta": min(failing) if failing else None,
        "c2_all_pass": c2_ok,
        "c1_all_fail_condition_4": c1_ok,
    }, {"scan": Trace(("family", "param1", "param2", "c1_norm", "c2_norm", "verdict", "failed_condition"), rows)})


def run_partition(cfg: ExperimentConfig) -> Outcome:
    cmap = build_map(cfg)
    rep = verify_boundary_map(cmap, search_budget=search_budget(cfg))
    if not rep.passed:
        return Outcome(False, {"verify": rep.to_dict(), "cells": []})
    S = rep.sections
    alpha = rep.cone_structure.alpha
    try:
        cells = partition_markov(cmap, S, tuple(cfg.grids.resolution), cfg.grids.t_max, alpha,
                                 n_max=cfg.caps.n_max, strict=False)
    except CrossingFailed as e:  # pragma: no cover - strict is off
        return Outcome(False, {"verify": rep.to_dict(), "failed_cell": e.t})
    bad = [c.t for c in cells if not c.cross_ok and not c.truncated]
    b = {c.t: c.b for c in cells}
    ratios = [b[t + 1] / b[t] for t in sorted(b) if t + 1 in b]
    return Outcome(bool(cells) and not bad, {
        "sections": asdict(S),
        "alpha": alpha,
        "cells": [asdict(c) for c in cells],
        "failed_cells": bad,
        "t_range": [cells[0].t, cells[-1].t] if cells else None,
        "width_ratio_median": float(np.median(ratios)) if ratios else None,
    }, {"partition": Trace(("t", "x_min", "x_max", "cross_ok"),
                           [(c.t, c.x_min, c.x_max, c.cross_ok) for c in cells])})


def run_slope_track(cfg: ExperimentConfig) -> Outcome:
    cmap = build_map(cfg)
    region = Region(cfg.region.N, cfg.region.Y)
    rng = task_rng(cfg.seed, TASK_SLOPE)
    summary = slope_tracking_batch(cmap, region, cfg.grids.samples, rng, cfg.alpha)
    consts = summary.constants
    # one orbit traced in full for the CSV
    th, y = sample_entries(cmap, region, consts, 1, task_rng(cfg.seed, TASK_SLOPE, 1))
    k = 0.5 * cmap.params.p
    trace = slope_tracking(cmap, cmap.params, region, CollarPoint(float(th[0]) / k, float(y[0])),
                           cfg.alpha, consts=consts)
    res = asdict(summary)
    res["verdict"] = summary.verdict
    res["traced"] = {"entry": trace.entry, "m": trace.m, "eta": trace.eta,
                     "exit_slope": trace.exit_slope, "ratios": trace.ratios, "verdict": trace.verdict}
    traces = {"slopes": Trace(("step", "theta", "y", "slope"), trace.rows)} if trace.rows else {}
    return Outcome(summary.verdict and trace.verdict, res, traces)


# ---------------------------------------------------------------------------
# torus experiments
# ---------------------------------------------------------------------------

def _generic_seeds(cfg: ExperimentConfig, task: int) -> list:
    out = []
    for i in range(cfg.grids.seeds):
        a, b = task_rng(cfg.seed, task, i).uniform(0.0, 1.0, 2)
        out.append(Interior(float(a), float(b)))
    return out


def _orbit_rows(pert, seed: Interior, n: int):
    m = CatBlowup(pert)
    a, b = seed.a, seed.b
    rows = []
    for step in range(n):
        x, rho = m.to_collar(float(a), float(b))
        if rho < COLLAR_RADIUS:
            rows.append((step, "collar", float(x), float(rho)))
        else:
            rows.append((step, "torus", float(a), float(b)))
        a, b = m.step_scalar(a, b)
    return rows


def run_orbit(cfg: ExperimentConfig) -> Outcome:
    pert = torus_perturbation(cfg)
    seeds = _generic_seeds(cfg, TASK_ORBIT_SEEDS)
    res = []
    for s in seeds:
        d = orbit_density(pert, s, cfg.grids.eps, cfg.caps.steps)
        res.append({"seed": [s.a, s.b], **asdict(d)})
    passed = all(r["first_full_cover"] is not None for r in res)
    rows = _orbit_rows(pert, seeds[0], min(cfg.grids.trace_len, cfg.caps.steps + 1))
    return Outcome(passed, {"orbits": res, "bumps": _bumps_of(pert) if pert else []},
                   {"orbit": Trace(("step", "chart", "c1", "c2"), rows)})


def _ball_pair(rng, radius):
    balls = []
    while len(balls) < 2:
        a, b = rng.uniform(0.0, 1.0, 2)
        try:
            balls.append(Ball(Interior(float(a), float(b)), radius))
        except ValueError:
            continue
    return balls


def run_mixing(cfg: ExperimentConfig) -> Outcome:
    pert = torus_perturbation(cfg)
    rngs = [task_rng(cfg.seed, TASK_MIXING, i) for i in range(cfg.grids.pairs)]
    pairs = [_ball_pair(r, cfg.grids.radius) for r in rngs]
    results = mixing_suite(pert, pairs, cfg.caps.mixing_n, cfg.grids.samples, rngs, cfg.workers)
    out, rows = [], []
    for i, ((A, B), r) in enumerate(zip(pairs, results)):
        out.append({"a": [A.center.a, A.center.b], "b": [B.center.a, B.center.b],
                    "first_hit": r.first_hit, "persistent_from": r.persistent_from})
        rows.append((i, A.center.a, A.center.b, B.center.a, B.center.b, r.first_hit, r.persistent_from))
    passed = all(r.first_hit is not None and r.mixing for r in results)
    return Outcome(passed, {"pairs": out, "radius": cfg.grids.radius},
                   {"mixing": Trace(("pair", "a1", "a2", "b1", "b2", "first_hit", "persistent_from"), rows)})


def run_homoclinic(cfg: ExperimentConfig) -> Outcome:
    pert = torus_perturbation(cfg)
    g = cfg.grids
    pts = homoclinic_find(pert, cfg.caps.period_cap, g.window, g.length, g.spacing)
    q, k = minimal_periodic_point(cfg.caps.period_cap)
    target = eigenline_angle()
    err = max((abs(h.angle - target) for h in pts), default=math.inf)
    res = {"periodic_point": [float(q[0]), float(q[1])], "period": k, "count": len(pts),
           "eigenline_angle": target, "max_angle_error": err}
    passed = len(pts) >= cfg.tolerances.min_homoclinic and err <= cfg.tolerances.angle
    if pert is not None and pts:
        ref = homoclinic_find(None, cfg.caps.period_cap, g.window, g.length, g.spacing)
        disp = max(min(math.hypot((h.point[0] - r.point[0] + 0.5) % 1 - 0.5,
                                  (h.point[1] - r.point[1] + 0.5) % 1 - 0.5) for h in pts) for r in ref)
        res["max_displacement"] = disp
        passed = passed and disp <= cfg.tolerances.displacement
    rows = [(h.t, h.s, h.point[0], h.point[1], h.angle) for h in pts]
    traces = {"homoclinic": Trace(("t", "s", "a", "b", "angle"), rows)} if rows else {}
    return Outcome(passed, res, traces)


def run_lyapunov(cfg: ExperimentConfig) -> Outcome:
    pert = torus_perturbation(cfg)
    seeds = _generic_seeds(cfg, TASK_LYAPUNOV_SEEDS)
    rows = []
    for i, s in enumerate(seeds):
        est = lyapunov_estimate(pert, s, cfg.caps.steps)
        rows.append((i, s.a, s.b, est, est - LOG_LAM_A))
    worst = max(abs(r[4]) for r in rows)
    return Outcome(worst <= cfg.tolerances.lyapunov, {
        "log_lambda": LOG_LAM_A,
        "seeds": [[r[1], r[2]] for r in rows],
        "estimates": [r[3] for r in rows],
        "max_error": worst,
    }, {"lyapunov": Trace(("seed_index", "a", "b", "estimate", "error"), rows)})


REGISTRY = {
    "verify-local": run_verify_local,
    "verify-boundary": run_verify_boundary,
    "perturb-scan": run_perturb_scan,
    "partition": run_partition,
    "slope-track": run_slope_track,
    "orbit": run_orbit,
    "mixing": run_mixing,
    "homoclinic": run_homoclinic,
    "lyapunov": run_lyapunov,
}


# ---------------------------------------------------------------------------
# runner
# ---------------------------------------------------------------------------

@dataclass
class RunResult:
    passed: bool
    report: dict
    directory: Path
    files: list
    wall_clock: float


def output_dir(cfg: ExperimentConfig, override=None) -> Path:
    root = override or os.environ.get(OUTPUT_ENV) or cfg.output
    return Path(root) / cfg.experiment


def run_experiment(cfg: ExperimentConfig, out=None, write: bool = True) -> RunResult:
    fn = REGISTRY.get(cfg.experiment)
    if fn is None:
        raise UnknownExperiment(cfg.experiment)
    t0 = time.perf_counter()
    outcome = fn(cfg)
    wall = time.perf_counter() - t0
    report = {
        "schema": SCHEMA,
        "version": __version__,
        "experiment": cfg.experiment,
        "config": cfg.to_dict(),
        "verdict": "pass" if outcome.passed else "fail",
        "results": outcome.results,
        "artifacts": sorted(f"{k}.csv" for k, t in outcome.traces.items() if t.rows),
    }
    directory = output_dir(cfg, out)
    files = []
    if write:
        files.append(write_report(report, directory / "report.json"))
        for name, trace in sorted(outcome.traces.items()):
            if trace.rows:
                files.append(emit_csv(trace, directory / f"{name}.csv"))
        # wall time lives apart from the report so reports stay byte-identical
        files.append(write_report({"experiment": cfg.experiment, "wall_clock_s": wall},
                                  directory / "timing.json"))
    return RunResult(outcome.passed, report, directory, files, wall)
