"""Acceptance gate: one test per release criterion.

Each test prints a single summary line with the measured numbers; the
pytest -v status line per test is the pass/fail record. Criteria with a
stated runtime budget time themselves and fail when over it.
"""

import json
import os
import pathlib
import subprocess
import sys
import time

import numpy as np
import pytest

import vargame as vg
from conftest import case_path, random_feasible_levels
from oracles import DenseOracle
from vargame.game import (AttackAction, DefenseAction, GameConfig,
                          build_context, enumerate_outcomes, expected_utility)
from vargame.ga import run_bpega
from vargame.robust import rd_mismatch, solve_rd
from vargame.traversal import solve_cbse
from vargame.uncertainty import generate_models, utility_mismatch

GAMMA_AXIS = [round(0.075 * i, 10) for i in range(21)]   # 0 .. 1.5
UNCERTAINTY_PAIRS = [(0.1, 0.1), (0.1, 1.5), (0.75, 0.75),
                     (1.5, 0.1), (1.5, 1.5)]


@pytest.fixture(scope="module")
def model39(ieee39):
    return vg.build_stiffness(ieee39)


def _report(n: int, text: str) -> None:
    print(f"criterion {n}: PASS  {text}")


def test_criterion_1_zero_sum_and_normalization(ieee9, model9, ctx9):
    start = time.perf_counter()
    rng = np.random.default_rng(20260819)
    for _ in range(1000):
        ga_ = float(rng.uniform(0.05, 1.5))
        gd_ = float(rng.uniform(0.05, 1.5))
        cfg = GameConfig(gamma_a=ga_, gamma_d=gd_)
        a = AttackAction(
            levels_idx=random_feasible_levels(rng, 6, 3, ga_), n_levels=3)
        d = DefenseAction(
            levels_idx=random_feasible_levels(rng, 6, 3, gd_,
                                              ctrl=ieee9.ctrl_idx),
            n_levels=3)
        ua, ud = expected_utility(ctx9, cfg, a, d)
        assert ua + ud == 0.0
        psum = sum(o.probability for o in enumerate_outcomes(a))
        assert abs(psum - 1.0) <= 1e-12
    elapsed = time.perf_counter() - start
    assert elapsed < 10.0
    _report(1, f"1000 pairs, zero-sum exact, prob sums within 1e-12, "
               f"{elapsed:.1f}s < 10s")


def test_criterion_2_oracle_equivalence(ieee9, ctx9):
    start = time.perf_counter()
    oracle = DenseOracle(ieee9)
    rng = np.random.default_rng(97)
    worst = 0.0
    for _ in range(200):
        ga_ = float(rng.uniform(0.05, 1.5))
        gd_ = float(rng.uniform(0.05, 1.5))
        cfg = GameConfig(gamma_a=ga_, gamma_d=gd_)
        a_lv = random_feasible_levels(rng, 6, 3, ga_)
        d_lv = random_feasible_levels(rng, 6, 3, gd_, ctrl=ieee9.ctrl_idx)
        a = AttackAction(levels_idx=a_lv, n_levels=3)
        d = DefenseAction(levels_idx=d_lv, n_levels=3)
        # six loads total, so every pair has at most 6 fractional entries
        got, _ = expected_utility(ctx9, cfg, a, d)
        want = oracle.utility(a_lv, 3, d_lv, 3)
        worst = max(worst, abs(got - want))
        assert abs(got - want) <= 1e-12
    elapsed = time.perf_counter() - start
    assert elapsed < 30.0
    _report(2, f"200 pairs vs brute-force oracle, max |diff| {worst:.2e} "
               f"<= 1e-12, {elapsed:.1f}s < 30s")


def test_criterion_3_equilibrium_structure_sweep(ieee9, model9):
    start = time.perf_counter()
    axis = GAMMA_AXIS
    u = np.empty((len(axis), len(axis)))
    for i, ga_ in enumerate(axis):
        for j, gd_ in enumerate(axis):
            cfg = GameConfig(gamma_a=ga_, gamma_d=gd_)
            u[i, j] = solve_cbse(ieee9, cfg, model9).u_attacker
    # non-increasing in the attacker weight at every fixed defender weight
    assert np.all(u[1:, :] <= u[:-1, :] + 1e-9)
    # non-decreasing in the defender weight at every fixed attacker weight
    assert np.all(u[:, 1:] >= u[:, :-1] - 1e-9)
    nominal = vg.build_stiffness(ieee9).delta_nominal
    collapse = u == 1.0
    no_attack = u == nominal
    assert collapse.any() and u[0, -1] == 1.0          # cheap attacker corner
    assert no_attack.any() and u[-1, 0] == nominal     # cheap defender corner
    elapsed = time.perf_counter() - start
    assert elapsed < 600.0
    _report(3, f"21x21 grid monotone, {int(collapse.sum())} collapse cells, "
               f"{int(no_attack.sum())} no-attack cells, "
               f"{elapsed:.1f}s < 600s")


def test_criterion_4_ga_recovers_exact_equilibria(ieee9, model9):
    start = time.perf_counter()
    pairs = [(0.1, 1.5), (0.75, 0.75), (1.5, 0.3), (0.6, 0.9), (0.45, 1.2)]
    notes = []
    for ga_, gd_ in pairs:
        exact = solve_cbse(ieee9, GameConfig(gamma_a=ga_, gamma_d=gd_),
                           model9)
        matches, conv = 0, []
        for seed in range(41, 46):
            eq = run_bpega(ieee9, GameConfig(gamma_a=ga_, gamma_d=gd_,
                                             seed=seed), model=model9)
            if eq.u_attacker != exact.u_attacker:
                continue
            matches += 1
            # earliest of: utilities locked onto the exact value for the
            # rest of the run, or both populations stopped changing
            trace = [r["u_best_attacker"] for r in eq.metadata["trace"]]
            hold = 0
            for t in range(len(trace) - 1, -1, -1):
                if trace[t] != exact.u_attacker:
                    hold = t + 1
                    break
            conv.append(min(hold, eq.metadata["stabilized_at"]))
        assert matches >= 4, (ga_, gd_, matches)
        assert np.median(conv) <= 15, (ga_, gd_, conv)
        notes.append(f"({ga_},{gd_}) {matches}/5 med_conv {np.median(conv)}")
    elapsed = time.perf_counter() - start
    assert elapsed < 300.0
    _report(4, "; ".join(notes) + f"; {elapsed:.1f}s < 300s")


def test_criterion_5_robust_defense_consistency(ieee9, model9):
    start = time.perf_counter()
    pairs = [(ga_, gd_) for ga_ in (0.45, 0.75, 1.05) for gd_ in (0.75, 1.5)]
    pairs.append((0.75, 0.45))
    for ga_, gd_ in pairs:
        cfg = GameConfig(gamma_a=ga_, gamma_d=gd_)
        rep = rd_mismatch(ieee9, cfg, gamma_a_est=ga_, model=model9)
        assert rep.mu_rd_percent <= 1e-9, (ga_, gd_)
        ref = solve_cbse(ieee9, cfg, model9)
        prev = -np.inf
        ests = [round(0.15 * k, 10) for k in range(int(round(ga_ / 0.15)) + 1)]
        for est in ests:
            rd = solve_rd(ieee9, cfg, est, model=model9)
            realized = rd.u_defender
            estimated = rd.metadata["estimated_u_defender"]
            assert estimated <= realized + 1e-9, (ga_, gd_, est)
            assert realized <= ref.u_defender + 1e-9, (ga_, gd_, est)
            assert realized >= prev - 1e-9, (ga_, gd_, est)
            prev = realized
    elapsed = time.perf_counter() - start
    assert elapsed < 600.0
    _report(5, f"{len(pairs)} pairs: exact estimate reproduces the "
               f"reference, estimate chains bounded and monotone, "
               f"{elapsed:.1f}s < 600s")


def test_criterion_6_worst_case_planning_mismatch(ieee9, model9):
    mus = []
    for gd_ in (0.45, 0.75, 1.5):
        for ga_ in GAMMA_AXIS:
            cfg = GameConfig(gamma_a=ga_, gamma_d=gd_)
            rep = rd_mismatch(ieee9, cfg, gamma_a_est=0.0, model=model9)
            mus.append(rep.mu_rd_percent)
    median = float(np.median(mus))
    p75 = float(np.percentile(mus, 75))
    assert median == 0.0
    # reference distribution reports a 75th percentile of 0.575 on its own
    # calibration; only the <= 5% envelope is load-bearing here
    assert p75 <= 5.0
    _report(6, f"63 grid points, median 0.0, p75 {p75:.4f}% <= 5%")


def test_criterion_7_demand_uncertainty_robustness(ieee9, model9, ieee39,
                                                   model39):
    setups = [("nine-bus", ieee9, model9, 10.0, "cbbi"),
              ("thirty-nine-bus", ieee39, model39, 5.0, "bpega")]
    notes = []
    for label, case, model, bound, method in setups:
        means = []
        for ga_, gd_ in UNCERTAINTY_PAIRS:
            cfg = GameConfig(gamma_a=ga_, gamma_d=gd_)
            if method == "cbbi":
                eq = solve_cbse(case, cfg, model)
            else:
                eq = run_bpega(case, cfg, model=model)
            models = generate_models(case, cfg, sigma=0.1, n_models=20,
                                     model=model)
            mu = utility_mismatch(case, cfg, eq.attack, eq.defense, models,
                                  model=model)
            means.append(float(mu.mean()))
            assert mu.mean() <= bound, (label, ga_, gd_, mu.mean())
            frozen = generate_models(case, cfg, sigma=0.0, n_models=20,
                                     model=model)
            mu0 = utility_mismatch(case, cfg, eq.attack, eq.defense, frozen,
                                   model=model)
            assert np.all(mu0 == 0.0)
        notes.append(f"{label} means {['%.3f' % m for m in means]}% "
                     f"<= {bound}%")
    _report(7, "; ".join(notes) + "; all zero at sigma=0")


def test_criterion_8_large_case_feasibility(ieee39, model39):
    gammas_a = [float(round(v, 10)) for v in np.linspace(0.15, 1.5, 6)]
    gammas_d = [float(round(v, 10)) for v in np.linspace(0.25, 1.5, 6)]
    collapse = []
    slowest = 0.0
    for ga_ in gammas_a:
        for gd_ in gammas_d:
            t0 = time.perf_counter()
            eq = run_bpega(ieee39, GameConfig(gamma_a=ga_, gamma_d=gd_),
                           model=model39)
            dt = time.perf_counter() - t0
            slowest = max(slowest, dt)
            assert dt < 60.0, (ga_, gd_, dt)
            if eq.u_attacker == 1.0:
                collapse.append((ga_, gd_))
    assert collapse, "no collapse cell found on the 6x6 grid"
    # collapse must sit in the cheap-attacker / expensive-defender corner
    assert all(ga_ == gammas_a[0] and gd_ >= 0.5 for ga_, gd_ in collapse)
    _report(8, f"36 solves, slowest {slowest:.2f}s < 60s, collapse cells "
               f"{collapse}")


def test_criterion_9_repeated_runs_are_byte_identical(tmp_path):
    def run(*args):
        r = subprocess.run([sys.executable, "-m", "vargame.cli", *args],
                           capture_output=True, text=True,
                           env=dict(os.environ), timeout=300)
        assert r.returncode == 0, r.stderr
        return r

    checked = []
    eq = tmp_path / "eq.json"
    for name, args in [
        ("solve", ("solve", case_path("ieee9"), "bpega", "--gamma-a", "0.75",
                   "--gamma-d", "0.75", "--seed", "7")),
        ("sweep", ("sweep", case_path("ieee9"), "rd", "--gamma-a",
                   "0.3,0.75", "--gamma-d", "0.45", "--gamma-a-est", "0")),
        ("uncertainty", None),
    ]:
        if name == "uncertainty":
            run("solve", case_path("ieee9"), "cbbi", "--gamma-a", "0.75",
                "--gamma-d", "0.75", "--out", str(eq))
            args = ("uncertainty", case_path("ieee9"), str(eq),
                    "--models", "8", "--seed", "3")
        a, b = tmp_path / f"{name}_a.out", tmp_path / f"{name}_b.out"
        run(*args, "--out", str(a))
        run(*args, "--out", str(b))
        assert a.read_bytes() == b.read_bytes(), name
        checked.append(name)
    _report(9, f"byte-identical reruns for {checked}")
