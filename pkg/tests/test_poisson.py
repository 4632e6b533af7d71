import numpy as np
import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st
from numpy.polynomial.legendre import leggauss

from nitride_rts.constants import EPS0, KB
from nitride_rts.poisson import (
    ChargeModel,
    electron_density,
    fd_poisson_oracle,
    hartree_closed_form,
    hartree_fd,
    ionized_donors,
    occupation,
    sheet_factors,
    solve_fermi_level,
    total_charge_density,
)
from nitride_rts.potential import PiecewiseLinearPotential
from nitride_rts.schrodinger import bound_states

from conftest import hartree_mismatch


def slab(widths=(2.0, 3.0), eps=(9.0, 9.0), partitions=2):
    n = len(widths)
    return PiecewiseLinearPotential.from_layers(
        widths, [0.0] * n, [0.0] * n, [0.2] * n, (1.0, 0.3), dielectrics=eps, partitions=partitions
    )


# Fermi statistics ------------------------------------------------------------


def test_occupation_limits():
    T = 300.0
    assert occupation(0.1, [0.1], T)[0] == pytest.approx(np.log(2.0))
    far = occupation(0.1 - 20 * KB * T, [0.1], T)[0]
    assert far < 1e-8 * np.log(2.0)
    assert np.all(occupation(None, [0.0, 1.0], T) == 0)


def test_donor_ionization():
    T = 300.0
    assert ionized_donors(0.2, T, 0.2, 1.0) == pytest.approx(1 / 3)
    assert ionized_donors(-50.0, T, 0.2, 1.0) == pytest.approx(1.0)
    assert ionized_donors(0.25, 1e9, 0.2, 1.0) == pytest.approx(1 / 3, rel=1e-6)
    assert ionized_donors(None, T, 0.2, 0.7) == 0.7
    assert np.isfinite(ionized_donors(1e3, T, 0.0, 1.0))


def test_density_integral_matches_sheet_density(full_result):
    res = full_result
    states = res.states
    ef, T = res.fermi_level, res.charge.temperature
    p = res.linearized
    x, w = leggauss(40)
    total = 0.0
    for s in range(p.n_segments):
        half = 0.5 * p.widths[s]
        z = p.z_left[s] + half * (x + 1)
        total += half * np.dot(w, electron_density(states, ef, T, z, segment=np.full(z.shape, s)))
    c = sheet_factors(ef, [s.energy for s in states], T)
    for ck, st_ in zip(c, states):
        total += ck * (p.m_left * st_.amp_left**2 / (2 * st_.kappa_left)
                       + p.m_right * st_.amp_right**2 / (2 * st_.kappa_right))
    assert total == pytest.approx(np.sum(c * [s.mass_weighted_norm for s in states]), rel=1e-8)


def test_global_neutrality(full_result):
    res = full_result
    d = res.stack.thicknesses
    closure_sheet = np.sum(
        sheet_factors(res.fermi_level, res.energies, res.charge.temperature)
        * [s.mass_weighted_norm for s in res.states]
    )
    donors = np.sum(res.donors * d)
    assert abs(donors - closure_sheet) <= 1e-8 * donors
    sheets = res.fields.sheet_charges
    assert abs(np.sum(sheets)) <= 1e-15


def test_charge_density_cases():
    p = slab()
    model = ChargeModel(n_d=0.0)
    closure = solve_fermi_level([], model, np.zeros(2), np.array([2.0, 3.0]))
    z = np.linspace(0, 5, 11)
    layer = np.minimum((z >= 2).astype(int), 1)
    rho = total_charge_density(model, [], closure, z, layer)
    assert np.all(rho.rho == 0)
    model = ChargeModel(n_d=1e-3, doped_layers=(0,))
    with pytest.warns(RuntimeWarning):
        closure = solve_fermi_level([], model, np.zeros(2), np.array([2.0, 3.0]))
    rho = total_charge_density(model, [], closure, z, layer)
    np.testing.assert_allclose(rho.rho, np.where(layer == 0, 1e-3, 0.0))


def test_fixed_fermi_level_bypasses_neutrality():
    p = PiecewiseLinearPotential.from_layers([3.0], [0.0], [0.0], [0.2], (1.0, 0.3))
    states = bound_states(p)
    model = ChargeModel(n_d=1e-3, doped_layers=(0,), fermi_level=0.05)
    c = solve_fermi_level(states, model, np.zeros(1), np.array([3.0]))
    assert c.fermi_level == 0.05


# Hartree potential ------------------------------------------------------------


def test_zero_charge():
    h = hartree_closed_form(slab(), [], [], np.zeros(2))
    z = np.linspace(0, 5, 13)
    assert np.all(h(z) == 0)


def test_capacitor_ramp():
    p = slab(eps=(9.0, 9.0))
    sigma, a, L, eps = 2e-3, 2.0, 5.0, 9.0
    h = hartree_closed_form(p, [], [], np.zeros(2), sheets=[0.0, sigma, 0.0])
    A = -sigma * (L - a) / (eps * EPS0 * L)
    z = np.linspace(0, L, 41)
    expected = np.where(z < a, A * z, A * a * (L - z) / (L - a))
    np.testing.assert_allclose(h(z), expected, atol=1e-14)
    _, dl = h.evaluate(np.array([a - 1e-9]))
    _, dr = h.evaluate(np.array([a + 1e-9]))
    assert eps * (dl[0] - dr[0]) == pytest.approx(-sigma / EPS0, rel=1e-9)
    assert h.boundary_values == pytest.approx((0.0, 0.0), abs=1e-12)


def test_uniform_slab_parabola():
    nd, eps = 4e-3, 8.5
    p = slab(widths=(1.5, 2.5), eps=(eps, eps), partitions=3)
    h = hartree_closed_form(p, [], [], np.full(2, nd))
    z = np.linspace(0, 4.0, 33)
    np.testing.assert_allclose(h(z), nd / (2 * eps * EPS0) * z * (z - 4.0), atol=1e-14)
    nodes = np.linspace(0, 4.0, 81)
    fd = fd_poisson_oracle(nodes, np.full(80, nd), np.full(80, eps))
    np.testing.assert_allclose(fd, nd / (2 * eps * EPS0) * nodes * (nodes - 4.0), atol=1e-12)
    assert np.all(fd_poisson_oracle(nodes, np.zeros(80), np.full(80, eps)) == 0)


def test_fd_poisson_second_order():
    L, eps = 3.0, 9.0
    errs = []
    for n in (40, 80):
        nodes = np.linspace(0, L, n + 1)
        mid = 0.5 * (nodes[1:] + nodes[:-1])
        v = fd_poisson_oracle(nodes, np.sin(np.pi * mid / L), np.full(n, eps))
        exact = -(L / np.pi) ** 2 * np.sin(np.pi * nodes / L) / (eps * EPS0)
        errs.append(np.max(np.abs(v - exact)))
    assert 3.5 < errs[0] / errs[1] < 4.5
    with pytest.raises(ValueError):
        fd_poisson_oracle(nodes, np.zeros(3), np.zeros(3))


def test_linearity(full_result):
    res = full_result
    p = res.linearized
    c = sheet_factors(res.fermi_level, res.energies, res.charge.temperature)
    h1 = hartree_closed_form(p, res.states, c, res.donors)
    h2 = hartree_closed_form(p, res.states, 2 * c, 2 * res.donors)
    z = np.linspace(p.z_left[0], p.z_right[-1], 301)
    np.testing.assert_allclose(h2(z), 2 * h1(z), rtol=1e-12, atol=1e-18)


def test_converged_hartree_contract(full_result):
    h = full_result.hartree
    left, right = h.boundary_values
    assert abs(left) <= 1e-12 and abs(right) <= 1e-12
    cont, flux = h.node_residuals()
    assert np.max(cont) < 1e-10 and np.max(flux) < 1e-10


def test_closed_form_vs_fd_every_iteration(full_run):
    res, errors = full_run
    assert len(errors) == res.iterations_used
    assert max(errors) <= 1e-3


def test_closed_form_vs_fd_with_sheets(full_result):
    res = full_result
    p = res.linearized
    sheets = res.fields.sheet_charges * 1e-2
    c = sheet_factors(res.fermi_level, res.energies, res.charge.temperature)
    h = hartree_closed_form(p, res.states, c, res.donors, sheets)
    nodes, v = hartree_fd(p, res.states, c, res.donors, sheets)
    seg = p.segment_of(nodes)
    assert np.max(np.abs(h(nodes, seg) - v)) <= 1e-3 * np.max(np.abs(v))


@st.composite
def charged_plp(draw):
    n = draw(st.integers(1, 5))
    d = draw(st.lists(st.floats(0.4, 3.0), min_size=n, max_size=n))
    vl = draw(st.lists(st.floats(0.0, 0.8), min_size=n, max_size=n))
    vr = draw(st.lists(st.floats(0.0, 0.8), min_size=n, max_size=n))
    m = draw(st.lists(st.floats(0.15, 0.35), min_size=n, max_size=n))
    eps = draw(st.lists(st.floats(8.0, 10.5), min_size=n, max_size=n))
    donors = draw(st.lists(st.floats(0.0, 5e-3), min_size=n, max_size=n))
    parts = draw(st.integers(1, 4))
    ef = draw(st.floats(0.0, 0.6))
    p = PiecewiseLinearPotential.from_layers(d, vl, vr, m, (1.0, 0.3), dielectrics=eps, partitions=parts)
    return p, np.array(donors), ef


@settings(max_examples=20, deadline=None, derandomize=True,
          suppress_health_check=[HealthCheck.too_slow])
@given(charged_plp())
def test_random_hartree_against_fd(case):
    p, donors, ef = case
    states = bound_states(p)
    factors = sheet_factors(ef, [s.energy for s in states], 300.0)
    h = hartree_closed_form(p, states, factors, donors)
    if not (np.any(donors > 0) or np.any(factors > 0)):
        return
    closure = type("C", (), {"factors": factors, "donors": donors})
    assert hartree_mismatch(p, states, closure, h) <= 1e-3
    assert max(abs(v) for v in h.boundary_values) <= 1e-12
