"""Acceptance gate: one PASS/FAIL line per criterion, at the required tolerances.

Run alone with ``pytest tests/test_acceptance.py -s``; the full geometry scan
makes this the slow part of the suite.
"""

import os
import time

import numpy as np
import pytest

from nitride_rts.constants import HBAR2_2M0 as HB
from nitride_rts.observables import (
    TransitionTable,
    condition_intervals,
    design_criteria,
    detection_energy,
    geometry_scan,
)
from nitride_rts.poisson import hartree_closed_form, sheet_factors
from nitride_rts.polarization import stack_fields
from nitride_rts.potential import PiecewiseLinearPotential
from nitride_rts.scf import SCFConfig, run_scf
from nitride_rts.schrodinger import (
    SegmentBasis,
    bound_states,
    dispersion_residual,
    fd_oracle,
    partition_shift,
    search_window,
)
from nitride_rts.special import airy_scaled
from nitride_rts.structure import cascade_stack

from conftest import hartree_mismatch

#: inner-well polarization (C/m^2) tuned once so that Omega_13 lands on 782.5 meV
TUNED_INNER_WELL_P = -0.0489


def report(capsys, n, ok, detail):
    with capsys.disabled():
        print(f"\nACCEPTANCE criterion {n}: {'PASS' if ok else 'FAIL'} | {detail}")
    assert ok, detail


def within(value, target, tol):
    return abs(value - target) <= tol


def test_criterion_1_full_spectrum(capsys, stack):
    t0 = time.perf_counter()
    res = run_scf(stack)
    runtime = time.perf_counter() - t0
    e = res.energies * 1e3
    omega = detection_energy(TransitionTable.from_states(res.states)) * 1e3
    overrides = [None, None, None, TUNED_INNER_WELL_P, None, None, None]
    tuned = run_scf(stack, config=SCFConfig(polarization_overrides=overrides))
    omega_t = detection_energy(TransitionTable.from_states(tuned.states)) * 1e3
    checks = {
        "E1": within(e[0], 43.9, 15.0),
        "E3": within(e[2], 826.4, 30.0),
        "Omega13": within(omega, 782.5, 0.03 * 782.5),
        "tuned": within(omega_t, 782.5, 0.01 * 782.5),
        "runtime": runtime <= 60.0,
    }
    detail = (f"E1 = {e[0]:.1f} meV (43.9 +- 15), E3 = {e[2]:.1f} meV (826.4 +- 30), "
              f"Omega13 = {omega:.1f} meV (782.5 +- 3%), tuned Omega13 = {omega_t:.1f} meV "
              f"(+- 1%), runtime {runtime:.1f} s; failing: "
              f"{[k for k, v in checks.items() if not v] or 'none'}")
    report(capsys, 1, all(checks.values()), detail)


def test_criterion_2_field_only(capsys, field_only_result):
    e = field_only_result.energies * 1e3
    omega = e[2] - e[0]
    ok = within(e[0], -104.8, 10.0) and within(omega, 907.0, 20.0)
    report(capsys, 2, ok, f"E1 = {e[0]:.1f} meV (-104.8 +- 10), Omega13 = {omega:.1f} meV (907.0 +- 20)")


def test_criterion_3_oscillator_strengths(capsys, full_result):
    t = TransitionTable.from_states(full_result.states)
    f12, f13, f14, f15 = np.abs(t.f[0, 1:5])
    ordering = f13 > f12 > f15 > f14
    _, c326 = design_criteria(t)
    ok = within(f13, 0.782, 0.08) and ordering and c326
    report(capsys, 3, ok, f"f12..f15 = {f12:.3f}, {f13:.3f}, {f14:.3f}, {f15:.3f}; f13 target "
           f"0.782 +- 0.08; ordering f13>f12>f15>f14 {ordering}; cond_326 {c326}")


def test_criterion_4_convergence(capsys, plain_result, stack):
    n_conv = plain_result.iterations_used
    cfg = SCFConfig(mixing=1.0, tolerance=1e-300, max_iterations=30)
    long = run_scf(stack, config=cfg)
    h = list(long.delta_history)
    # an exact fixed point (delta = 0) ends the run; resume from it to keep counting
    while len(h) < 25 and long.delta_history:
        long = run_scf(stack, config=cfg, initial=long)
        h += long.delta_history
    late_ok = len(h) >= 25 and h[24] <= h[9]
    d10 = h[9] if len(h) >= 10 else float("nan")
    d25 = h[24] if len(h) >= 25 else float("nan")
    ok = plain_result.converged and n_conv <= 30 and late_ok
    report(capsys, 4, ok, f"delta <= 1e-6 after {n_conv} iterations (mixing 1.0, limit 30); "
           f"delta(10) = {d10:.3g}, delta(25) = {d25:.3g}")


@pytest.mark.slow
def test_criterion_5_geometry_scan(capsys):
    jobs = min(4, os.cpu_count() or 1)
    t0 = time.perf_counter()
    rows = geometry_scan(0.6, 1.8, 0.01, jobs=jobs)
    runtime = time.perf_counter() - t0
    both = condition_intervals(rows, "both")
    match = [iv for iv in both if within(iv[0], 1.38, 0.1) and within(iv[1], 1.69, 0.1)]
    fails_326 = [r.d for r in rows if 0.65 <= r.d <= 0.91 and not r.cond_326 and not r.error]
    ok = bool(match) and bool(fails_326) and runtime <= 1800.0
    report(capsys, 5, ok, f"both conditions on {both} (want ~[1.38, 1.69] +- 0.1); cond_326 "
           f"fails in [0.65, 0.91] at {len(fails_326)} points; {len(rows)} rows in "
           f"{runtime / 60:.1f} min on {jobs} job(s); errors {sum(bool(r.error) for r in rows)}")


def _fd_pad(p, states):
    if not states:
        return 4.0
    kap = np.sqrt(min(p.m_left, p.m_right) * (p.barrier - states[-1].energy) / HB)
    return max(4.0, 12.0 / kap)


def _random_potentials(n=20, seed=7):
    rng = np.random.default_rng(seed)
    out = []
    for _ in range(n):
        k = rng.integers(1, 6)
        p = PiecewiseLinearPotential.from_layers(
            rng.uniform(0.4, 3.0, k), rng.uniform(0, 0.8, k), rng.uniform(0, 0.8, k),
            rng.uniform(0.15, 0.35, k), (1.0, 0.3), dielectrics=rng.uniform(8, 10.5, k),
            partitions=int(rng.integers(1, 5)),
        )
        out.append((p, rng.uniform(0, 5e-3, k), rng.uniform(0.0, 0.6)))
    return out


def test_criterion_6_oracles(capsys, full_run):
    res, iteration_errors = full_run
    well = PiecewiseLinearPotential.from_layers([5.0], [0.0], [0.0], [0.2], (1.0, 0.3))
    cases = [("square well", well, np.zeros(1), 0.1), ("frozen cascade", res.linearized, None, None)]
    cases += [(f"random {i}", p, nd, ef) for i, (p, nd, ef) in enumerate(_random_potentials())]
    worst_e, worst_h = 0.0, 0.0
    for name, p, nd, ef in cases:
        states = bound_states(p)
        e = np.array([s.energy for s in states])
        fd = fd_oracle(p, pad=_fd_pad(p, states))
        lo, hi = search_window(p)
        if len(e) != np.count_nonzero((fd > lo) & (fd < hi)):
            worst_e = np.inf
        elif len(e):
            worst_e = max(worst_e, float(np.max(np.abs(fd[: len(e)] - e))))
        if nd is None:
            continue
        c = sheet_factors(ef, e, 300.0)
        h = hartree_closed_form(p, states, c, nd)
        closure = type("C", (), {"factors": c, "donors": nd})
        worst_h = max(worst_h, hartree_mismatch(p, states, closure, h))
    worst_h = max(worst_h, max(iteration_errors))
    ok = worst_e <= 0.5e-3 and worst_h <= 1e-3
    report(capsys, 6, ok, f"max |E_airy - E_fd| = {worst_e * 1e3:.4f} meV (<= 0.5) over {len(cases)} "
           f"potentials; max V_H mismatch = {worst_h:.2e} of max|V_H| (<= 1e-3), "
           f"including all {len(iteration_errors)} SCF iterations")


def test_criterion_7_invariants(capsys, stack, full_result):
    out = {}
    worst_f = worst_d = 0.0
    for d in (0.6, 1.0, 1.56, 1.8):
        f = stack_fields(cascade_stack(d))
        worst_f = max(worst_f, abs(f.voltage_sum) / np.sum(np.abs(f.fields * f.thicknesses)))
        D = f.displacements
        worst_d = max(worst_d, np.max(np.abs(D - D[0])) / np.max(np.abs(D)))
    out["sum F d"] = worst_f <= 1e-12
    out["displacement"] = worst_d <= 1e-12
    norm_err = max(abs(s.norm - 1.0) for s in full_result.states)
    out["normalization"] = norm_err <= 1e-8
    t = TransitionTable.from_states(full_result.states)
    out["f antisymmetry"] = bool(np.array_equal(t.f, -t.f.T))
    x = np.linspace(-40.0, 200.0, 20001)
    q, _ = airy_scaled(x)
    wr = np.max(np.abs((q.ai * q.bip - q.aip * q.bi) * np.pi - 1.0))
    p = full_result.linearized
    for s in range(0, p.n_segments, 7):
        b = SegmentBasis.of(p, s, full_result.energies[2])
        if b.kind == "airy":
            f1, f2, d1, d2 = b.values(np.linspace(p.z_left[s], p.z_right[s], 5))
            wr = max(wr, np.max(np.abs((f1 * d2 - d1 * f2) / b.wronskian() - 1.0)))
    out["Wronskian"] = wr <= 1e-10
    bv = max(abs(v) for v in full_result.hartree.boundary_values)
    out["V_H boundaries"] = bv <= 1e-12
    shift = partition_shift(full_result.potential, full_result.config.n_partitions)
    out["N doubling"] = shift <= 1e-6
    detail = (f"sumFd {worst_f:.1e}, D {worst_d:.1e}, norm {norm_err:.1e}, Wronskian {wr:.1e}, "
              f"V_H ends {bv:.1e} eV, N={full_result.config.n_partitions} doubling shift "
              f"{shift:.2e} eV (<= 1e-6); failing: {[k for k, v in out.items() if not v] or 'none'}")
    report(capsys, 7, all(out.values()), detail)


def test_criterion_8_state_count(capsys, full_result, field_only_result):
    counts = []
    for res in (full_result, field_only_result):
        p = res.linearized
        E = np.linspace(*search_window(p), 4000)
        r = dispersion_residual(E, p)
        counts.append((len(res.states), int(np.count_nonzero(np.sign(r[1:]) != np.sign(r[:-1])))))
    ok = all(c == (5, 5) for c in counts)
    report(capsys, 8, ok, f"(states, residual sign changes) full {counts[0]}, field-only {counts[1]} "
           "in the window [min V + 1 meV, U - 1 meV]")
