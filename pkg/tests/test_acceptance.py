"""Acceptance suite: one test per numbered criterion, one printed line each.

Run with ``pytest tests/test_acceptance.py -v -s``.  Tolerances and runtime
budgets are pinned here; every expected number is either exact combinatorics
(binomial outcome law, steady-state weights d_N^J / alpha_N^M) or was
computed from an independent reference (brute-force product-basis engine,
dynamic-programming degeneracies, literal ladder-operator algebra).
"""

import time
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from spinfilter import (
    ModelKind,
    TrajectoryConfig,
    alpha,
    block_layout,
    coherent_x,
    degeneracy,
    ensemble_run,
    equivalence_check,
    expectation,
    filter_step,
    lindblad_collective,
    lindblad_symmetric,
    random_state,
    run_trajectory,
    validate_suite,
)
from spinfilter.cli import main
from spinfilter.dynamics import _cached_coefficients, binomial_final_m_probabilities


def _report(num: int, name: str, ok: bool, detail: str) -> None:
    print(f"\n[criterion {num}] {name}: {'PASS' if ok else 'FAIL'} ({detail})")
    assert ok, f"criterion {num} {name}: {detail}"


# ---------------------------------------------------------------------------
# 1. oracle gate

def test_criterion_1_oracle_gate():
    t0 = time.time()
    reports, passed = validate_suite(max_spins=6, steps=1000, n_states=50, seed=2024)
    elapsed = time.time() - t0
    gen_dev = max(max(r.deviations.values()) for r in reports if r.name == "generator")
    lock_dev = max(max(r.deviations.values()) for r in reports if r.name == "lockstep")
    ok = passed and gen_dev < 1e-10 and lock_dev < 1e-8 and elapsed < 120.0
    _report(1, "oracle gate N=2..6", ok,
            f"generator max {gen_dev:.2e} < 1e-10, lockstep max {lock_dev:.2e} < 1e-8, "
            f"{elapsed:.0f}s < 120s")


# ---------------------------------------------------------------------------
# 2. steady-state reproduction (N=4, kappa=25, symmetric, 50 seeds)

def test_criterion_2_steady_state_purities():
    t0 = time.time()
    n, kappa, seeds = 4, 25.0, 50
    base = TrajectoryConfig(
        n_spins=n, kappa=kappa, dt=1e-3 / kappa, t_final=250.0 / kappa, seed=1404,
        model=ModelKind.SYMMETRIC, record_every=25, stop_var_jz=1e-6, eig_log_every=0,
    )
    by_class: dict[int, list] = {4: [], 2: [], 0: []}
    all_converged = True
    for i in range(seeds):
        res = run_trajectory(replace(base, seed=base.seed ^ i))
        last = res.records[-1]
        all_converged &= last.var_jz < 1e-6
        by_class[abs(res.final_m2)].append(last)

    assert all(by_class.values()), "all three |M| classes must be observed in 50 seeds"
    purity_ok = True
    traces_ok = True
    details = []
    for m2, target in ((4, 1.0), (2, 0.25), (0, 1 / 6)):
        expected_traces = [
            degeneracy(n, ir.j2) / alpha(n, m2) if ir.j2 >= m2 else 0.0
            for ir in block_layout(n).irreps
        ]
        worst_p = max(abs(r.purity - target) / target for r in by_class[m2])
        purity_ok &= worst_p < 0.02
        for rec in by_class[m2]:
            for got, want in zip(rec.block_traces, expected_traces):
                if want > 0:
                    traces_ok &= abs(got - want) / want < 0.02
                else:
                    # unpopulated multiplets: 2% of nothing means numerically empty
                    traces_ok &= abs(got) < 1e-3
        details.append(f"|M|={m2 // 2}: {len(by_class[m2])} runs, purity off by {worst_p:.1%}")
    elapsed = time.time() - t0
    ok = all_converged and purity_ok and traces_ok and elapsed < 300.0
    _report(2, "N=4 steady-state purities {1, 1/4, 1/6}", ok,
            "; ".join(details) + f"; all var_jz<1e-6: {all_converged}; {elapsed:.0f}s < 300s")


# ---------------------------------------------------------------------------
# 3. squeezing dichotomy at N=60, kappa=6

def test_criterion_3_squeezing_dichotomy():
    n, kappa, seed = 60, 6.0, 2026

    t0 = time.time()
    coll = run_trajectory(TrajectoryConfig(
        n_spins=n, kappa=kappa, dt=1e-4 / kappa, t_final=10.0 / kappa, seed=seed,
        model=ModelKind.COLLECTIVE, record_every=100, eig_log_every=0,
    ))
    t_coll = time.time() - t0
    xi_min = min(r.xi_squared for r in coll.records if r.xi_squared is not None)
    vy_max = max(r.var_jy for r in coll.records)
    coll_ok = xi_min < 1.0 and vy_max >= 1.2 * (n / 4) and t_coll < 600.0

    t0 = time.time()
    symm = run_trajectory(TrajectoryConfig(
        n_spins=n, kappa=kappa, dt=1e-3 / kappa, t_final=10.0 / kappa, seed=seed,
        model=ModelKind.SYMMETRIC, record_every=10, eig_log_every=0,
    ))
    t_symm = time.time() - t0
    xi_floor = min(r.xi_squared for r in symm.records if r.xi_squared is not None)
    vy_dev = max(abs(r.var_jy - n / 4) / (n / 4) for r in symm.records)
    symm_ok = xi_floor >= 0.98 and vy_dev < 0.01 and t_symm < 600.0

    _report(3, "N=60 squeezing vs none", coll_ok and symm_ok,
            f"collective: min xi2 {xi_min:.3f} < 1, max var_jy {vy_max:.0f} >= 18, "
            f"{t_coll:.0f}s; symmetric: min xi2 {xi_floor:.4f} >= 0.98, "
            f"max |var_jy-15|/15 {vy_dev:.2%} < 1%, {t_symm:.0f}s")


# ---------------------------------------------------------------------------
# 4. slower variance reduction in the multi-mode model

def test_criterion_4_slower_convergence():
    t0 = time.time()
    n, kappa, n_traj = 16, 1.0, 100
    coll = ensemble_run(TrajectoryConfig(
        n_spins=n, kappa=kappa, dt=1e-4, t_final=5.0, seed=6060,
        model=ModelKind.COLLECTIVE, record_every=500, eig_log_every=0,
    ), n_traj)
    symm = ensemble_run(TrajectoryConfig(
        n_spins=n, kappa=kappa, dt=1e-3, t_final=5.0, seed=6060,
        model=ModelKind.SYMMETRIC, record_every=50, eig_log_every=0,
    ), n_traj)
    np.testing.assert_allclose(coll.kappa_t, symm.kappa_t, atol=1e-12)
    window = (coll.kappa_t >= 0.5) & (coll.kappa_t <= 5.0 + 1e-12)
    gap = symm.means["var_jz"][window] - coll.means["var_jz"][window]
    elapsed = time.time() - t0
    ok = bool(np.all(gap > 0)) and elapsed < 600.0
    _report(4, "ensemble var_jz: symmetric > collective", ok,
            f"min gap {gap.min():.3f} over kt in [0.5, 5] "
            f"({int(window.sum())} times, {n_traj}/model), {elapsed:.0f}s < 600s")


# ---------------------------------------------------------------------------
# 5. martingale and collapse statistics (N=8, collective, 400 trajectories)

def test_criterion_5_martingale_and_collapse():
    t0 = time.time()
    n, n_traj = 8, 400
    cfg = TrajectoryConfig(
        n_spins=n, kappa=1.0, dt=1e-3, t_final=25.0, seed=505,
        model=ModelKind.COLLECTIVE, record_every=100, stop_var_jz=1e-8,
        eig_log_every=0,
    )
    summary = ensemble_run(cfg, n_traj)
    mart_ok = summary.martingale_max_sigma < 3.0

    hist = summary.final_m_histogram()
    probs = binomial_final_m_probabilities(n)
    observed = np.array([hist.get(m2, 0) for m2 in sorted(probs)])
    expected = np.array([n_traj * probs[m2] for m2 in sorted(probs)])
    chi2 = stats.chisquare(observed, expected)
    chi_ok = chi2.pvalue > 0.01

    purity_floor = float(summary.final_purity.min())
    pur_ok = purity_floor > 0.999
    elapsed = time.time() - t0
    ok = mart_ok and chi_ok and pur_ok and elapsed < 300.0
    _report(5, "collective collapse statistics", ok,
            f"martingale max {summary.martingale_max_sigma:.2f} sigma < 3; chi2 p "
            f"{chi2.pvalue:.3f} > 0.01; min terminal purity {purity_floor:.5f} > 0.999; "
            f"{elapsed:.0f}s < 300s")


# ---------------------------------------------------------------------------
# 6. transverse second-moment drift dichotomy

def test_criterion_6_jy2_drift_rates():
    kappa, dt = 1.0, 1e-3
    worst = 0.0
    for n in (4, 10, 60):
        css = coherent_x(n)
        ey2_0 = expectation(css, "jy2")
        for model, target in ((ModelKind.COLLECTIVE, kappa * (n * n / 4 - n / 4)),
                              (ModelKind.SYMMETRIC, 0.0)):
            stepped, _, _ = filter_step(css, model, None, kappa, dt, 0.0)
            rate = (expectation(stepped, "jy2") - ey2_0) / dt
            scale = max(abs(target), kappa * n / 4)
            worst = max(worst, abs(rate - target) / scale)
    ok = worst < 1e-8
    _report(6, "d<Jy^2>/dt from the polarized state", ok,
            f"max relative deviation {worst:.2e} < 1e-8 over N in (4, 10, 60)")


# ---------------------------------------------------------------------------
# 7. structural invariants

def test_criterion_7_structural_invariants(tmp_path):
    t0 = time.time()
    rng = np.random.default_rng(909)

    # trace-free dissipators and Hermiticity preservation, 100 random states
    trace_dev = 0.0
    herm_dev = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 13))
        state = random_state(block_layout(n), rng, psd=False)
        for out in (lindblad_collective(state),
                    lindblad_symmetric(state, _cached_coefficients(n))):
            trace_dev = max(trace_dev, abs(sum(np.trace(b).real for b in out.blocks)))
            herm_dev = max(herm_dev, max(np.abs(b - b.conj().T).max() for b in out.blocks))
    traces_ok = trace_dev < 1e-11 and herm_dev < 1e-12

    # dimension sum rule, exact integers
    dims_ok = all(
        sum((j2 + 1) * degeneracy(n, j2) for j2 in range(n % 2, n + 1, 2)) == 2**n
        for n in range(1, 31)
    )

    # block family closed under the noisy full-space dynamics
    gate = equivalence_check(5, ModelKind.SYMMETRIC, steps=1000, seed=31)
    closure = gate.deviations["uniformity_residual"]
    closure_ok = closure < 1e-9

    # byte-identical reruns through the CLI
    args = ["run", "--n_spins", "6", "--kappa", "2.0", "--dt", "5e-4",
            "--t_final", "0.2", "--seed", "1234", "--model", "symmetric",
            "--record_every", "20"]
    assert main(args + ["--output_dir", str(tmp_path / "a")]) == 0
    assert main(args + ["--output_dir", str(tmp_path / "b")]) == 0
    det_ok = ((tmp_path / "a" / "run_symmetric.csv").read_bytes()
              == (tmp_path / "b" / "run_symmetric.csv").read_bytes())

    elapsed = time.time() - t0
    ok = traces_ok and dims_ok and closure_ok and det_ok and elapsed < 120.0
    _report(7, "structural invariants", ok,
            f"max |tr L| {trace_dev:.2e} < 1e-11; Hermiticity {herm_dev:.2e}; "
            f"dimension rule exact to N=30: {dims_ok}; closure residual {closure:.2e} "
            f"< 1e-9; byte-identical rerun: {det_ok}; {elapsed:.0f}s < 120s")
