"""Acceptance suite: the ten numerical criteria at their stated tolerances.

Each test records one ``PASS``/``FAIL`` line; the lines are printed in the
terminal summary (see ``conftest.py``) whether or not the assertions hold.
Run just this file with ``pytest tests/test_acceptance.py -v``.
"""

import time
from pathlib import Path

import numpy as np
import pytest

from mkdvlab.experiments import default_config, load_config, run
from mkdvlab.functionals import conserved, soliton_taylor_identities
from mkdvlab.grid import make_grid
from mkdvlab.profiles import BreatherParams, SolitonParams, eval_soliton
from mkdvlab.quadforms import elliptic_residual, wronskian_deviation
from mkdvlab.solver import pde_residual

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
RESULTS: list[str] = []


def record(number: int, title: str, passed: bool, detail: str) -> None:
    RESULTS.append(f"{'PASS' if passed else 'FAIL'} criterion {number:2d} {title}: {detail}")


@pytest.fixture(scope="module")
def coercivity_report():
    return run(default_config("coercivity-scan"))


def test_c01_ground_state_constants():
    start = time.perf_counter()
    g = make_grid(80.0, 2048)
    q = conserved(eval_soliton(SolitonParams(1.0), 0.0, g))
    elapsed = time.perf_counter() - start
    errs = (abs(q.M - 2.0), abs(q.E + 2.0 / 3.0), abs(q.F - 2.0 / 5.0))
    ok = max(errs) <= 1e-9 and elapsed < 1.0
    record(1, "ground-state constants", ok, f"max |(M,E,F) - (2,-2/3,2/5)| = {max(errs):.2e} (tol 1e-9), {elapsed:.3f}s (< 1s)")
    assert ok


def test_c02_taylor_combinations():
    r = soliton_taylor_identities(make_grid(80.0, 2048), (0.5, 1.0, 2.0))
    combo = max(abs(r["combo_a"]), abs(r["combo_b"]))
    rel = max(item["rel_err"] for item in r["R"].values())
    ok = combo <= 1e-9 and rel <= 1e-8
    record(2, "Taylor combinations", ok, f"combinations {combo:.2e} (tol 1e-9), R(c) relative error {rel:.2e} (tol 1e-8)")
    assert ok


def test_c03_exact_solution_residuals():
    start = time.perf_counter()
    gs = make_grid(80.0, 2048)
    gb = make_grid(120.0, 2048)
    times = (0.0, 0.4, 1.3)
    sol = max(max(pde_residual(SolitonParams(c), t, gs), elliptic_residual(SolitonParams(c), gs, t)) for c in (1.0, 2.0) for t in times)
    br = max(
        max(pde_residual(p, t, gb), elliptic_residual(p, gb, t))
        for p in (BreatherParams(1.0, 1.0), BreatherParams(2.0, 0.7))
        for t in times
    )
    elapsed = time.perf_counter() - start
    ok = sol <= 1e-8 and br <= 1e-6 and elapsed < 10.0
    record(3, "exact-solution residuals", ok, f"soliton {sol:.2e} (tol 1e-8), breather {br:.2e} (tol 1e-6), {elapsed:.2f}s (< 10s)")
    assert ok


def test_c04_conservation_drift():
    cfg = default_config("conservation-drift")
    assert (cfg.N, cfg.dt, cfg.param("t0"), cfg.param("t1")) == (1024, 1e-3, 0.0, 5.0)
    rep = run(cfg)
    drift = {n: rep.criterion(f"drift_{n}").value for n in ("M", "E", "F")}
    ok = max(drift.values()) <= 1e-7 and rep.wall_clock < 60.0
    record(4, "conservation drift", ok, ", ".join(f"{k} {v:.2e}" for k, v in drift.items()) + f" (tol 1e-7), {rep.wall_clock:.1f}s (< 60s)")
    assert ok


def test_c05_spectral_facts(coercivity_report):
    rep = coercivity_report
    assert rep.config["grid"]["N"] == 1024
    res = {r["kind"]: r for r in rep.extras["results"]}
    s, b = res["soliton"], res["breather"]
    ok = (
        s["near_zero"] == 2
        and s["negative"] == 0
        and s["constrained_min"] > 0
        and b["negative"] == 1
        and b["constrained_min"] > 0
        and rep.wall_clock < 120.0
    )
    record(
        5,
        "spectral facts",
        ok,
        f"soliton: {s['near_zero']} near-zero, {s['negative']} negative, constrained min {s['constrained_min']:.4g}; "
        f"breather: {b['negative']} negative, constrained min {b['constrained_min']:.4g}; {rep.wall_clock:.1f}s (< 120s)",
    )
    assert ok


def test_c06_wronskian():
    g = make_grid(80.0, 2048)
    dev = max(wronskian_deviation(c, g) for c in (1.0, 2.0))
    ok = dev <= 1e-8
    record(6, "Wronskian", ok, f"max deviation {dev:.2e} (tol 1e-8)")
    assert ok


def test_c07_modulation_recovery():
    rep = run(default_config("modulation-recovery"))
    # the same check with a perturbed breather in the configuration
    cfg = default_config("modulation-recovery")
    cfg.profiles = load_config(CONFIGS / "hs-decay-scan.yaml").profiles
    cfg.params["perturb"] = [{"index": 0, "x1": 1e-3, "x2": -1e-3}, {"index": 1, "x0": 1e-3}]
    rep_b = run(cfg)
    rec = max(r.criterion("parameters_recovered").value for r in (rep, rep_b))
    resid = max(r.criterion("orthogonality_residuals").value for r in (rep, rep_b))
    det = rep.criterion("jacobian_det_single_soliton").value
    ok = rep.passed and rep_b.passed and rec <= 1e-8 and resid <= 1e-11 and abs(det - 4 / 3) <= 1e-6
    record(7, "modulation recovery", ok, f"recovery error {rec:.2e} (tol 1e-8), residual {resid:.2e} (tol 1e-11), det {det:.10f} vs 4/3 (tol 1e-6)")
    assert ok


def _construction_summary(rep):
    fits = [rep.criterion(f"decay_fit_T{T:g}").value for T in (5.0, 7.5, 10.0)]
    th = min(f["theta_hat"] for f in fits)
    r2 = min(f["r2"] for f in fits)
    growth = rep.criterion("uniform_weighted_bound").value
    cau = rep.criterion("cauchy_decreasing").value
    return f"min theta_hat {th:.3f}, min r2 {r2:.4f}, growth {growth:.3f} (<= 2), Cauchy {['%.2e' % d for d in cau]}, {rep.wall_clock:.0f}s"


@pytest.mark.slow
def test_c08_multibreather_construction():
    two = load_config(CONFIGS / "build-multibreather.yaml")
    pair = load_config(CONFIGS / "build-multibreather-breather.yaml")
    for cfg in (two, pair):
        assert cfg.param("T_list") == [5.0, 7.5, 10.0] and cfg.param("t0") == 2.0
    start = time.perf_counter()
    rep_two = run(two)
    rep_pair = run(pair)
    elapsed = time.perf_counter() - start
    ok = rep_two.passed and rep_pair.passed and elapsed < 15 * 60
    v = pair.profile_set.velocities
    record(
        8,
        "multi-breather construction",
        ok,
        f"soliton pair: {_construction_summary(rep_two)}; soliton + breather (velocities {v[0]:.2f}, {v[1]:.2f}): "
        f"{_construction_summary(rep_pair)}; total {elapsed:.0f}s (< 900s)",
    )
    assert ok


@pytest.mark.slow
def test_c09_monotonicity():
    cfg = default_config("monotonicity")
    rep = run(cfg)
    mono = [c for c in rep.criteria if c.name.startswith("monotone_")]
    worst = min(c.value for c in mono)
    ident = rep.criterion("third_functional_rate_identity").value
    ok = rep.passed and len(mono) == 3 and ident <= 1e-4
    record(
        9,
        "monotonicity",
        ok,
        f"{sum(c.passed for c in mono)}/{len(mono)} localized quantities above -10 C e^(-2 varpi t) (worst slack {worst:.3g}), "
        f"rate identity relative error {ident:.2e} (tol 1e-4)",
    )
    assert ok


def test_c10_almost_orthogonality(coercivity_report):
    rep = coercivity_report
    assert rep.config["params"]["margin_trials"] == 1000 and rep.config["params"]["margin_nu"] == 1e-3
    res = rep.extras["results"]
    trials_ok = all(r["margin"]["passed"] and r["margin"]["trials"] == 1000 for r in res)
    witness_ok = all(r["witness"]["found"] for r in res)
    ok = trials_ok and witness_ok
    detail = "; ".join(
        f"{r['kind']}: {r['margin']['trials']} trials, min slack {r['margin']['min_slack']:.3g}, witness slack at nu=1 {r['witness']['slack']:.3g}"
        for r in res
    )
    record(10, "almost-orthogonality robustness", ok, detail)
    assert ok
