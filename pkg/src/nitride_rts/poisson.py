"""Charge densities, the Fermi level and the closed-form Hartree potential.

``v_h`` is the potential energy of an electron, so it obeys
d/dz(eps dV/dz) = rho / eps0 with rho = N_D+ - n in e/nm^3; a sheet charge
sigma at a node makes eps_L V'_L - eps_R V'_R = -sigma / eps0. Sheet charges
are passed in e/nm^2 throughout this module.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import linalg, optimize

from .constants import EPS0, KB
from .constants import HBAR2_2M0 as HB
from .potential import PiecewiseLinearPotential, PotentialComponents
from .schrodinger import StationaryState

#: energy below the layer's mean conduction band edge where donors sit, eV
DONOR_BINDING = 0.025

#: 5e18 cm^-3 in nm^-3
DEFAULT_DONORS = 5e-3

_GL_X, _GL_W = leggauss(32)
_CLOSED_FORM_LIMIT = 1e7


@dataclass(frozen=True)
class ChargeModel:
    """Donor doping and carrier statistics.

    ``donor_level`` fixes E_ref for every doped layer; when ``None`` it is the
    mean potential of each doped layer minus ``donor_binding``. A non-None
    ``fermi_level`` bypasses the neutrality solve.
    """

    n_d: float = DEFAULT_DONORS
    doped_layers: tuple[int, ...] = (1,)
    g: float = 2.0
    donor_binding: float = DONOR_BINDING
    donor_level: float | None = None
    temperature: float = 300.0
    fermi_level: float | None = None

    def __post_init__(self):
        if not self.n_d >= 0:
            raise ValueError("n_d must be non-negative")
        if not self.g > 0:
            raise ValueError("degeneracy factor g must be positive")
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")
        object.__setattr__(self, "doped_layers", tuple(int(i) for i in self.doped_layers))

    @property
    def kT(self) -> float:
        return KB * self.temperature

    def donor_profile(self, n_layers: int) -> np.ndarray:
        out = np.zeros(n_layers)
        for i in self.doped_layers:
            if not 0 <= i < n_layers:
                raise ValueError(f"doped layer {i} outside 0..{n_layers - 1}")
            out[i] = self.n_d
        return out


def occupation(E_F: float | None, energies, T: float) -> np.ndarray:
    """ln(1 + exp((E_F - E_n)/kT)) for every subband (zero when E_F is None)."""
    energies = np.asarray(energies, dtype=float)
    if E_F is None:
        return np.zeros_like(energies)
    return np.logaddexp(0.0, (E_F - energies) / (KB * T))


def sheet_factors(E_F: float | None, energies, T: float) -> np.ndarray:
    """Subband sheet density per unit mass, kT/(2 pi hb) ln(1 + exp(...)), nm^-2."""
    return KB * T / (2.0 * np.pi * HB) * occupation(E_F, energies, T)


def electron_density(
    states: Sequence[StationaryState], E_F: float | None, T: float, z, mass=None, segment=None
) -> np.ndarray:
    """n(z) = m(z) kT/(2 pi hb) sum_n psi_n(z)^2 ln(1 + exp((E_F - E_n)/kT)), nm^-3.

    ``mass`` defaults to the profile of the states' potential; pass it (or
    ``segment``) explicitly to choose a side at interfaces.
    """
    z = np.asarray(z, dtype=float)
    n = np.zeros_like(z)
    if not states or E_F is None:
        return n
    pot = states[0].potential
    if mass is None:
        mass = pot.mass[segment] if segment is not None else pot.mass_at(z)
    c = sheet_factors(E_F, [s.energy for s in states], T)
    for ck, st in zip(c, states):
        n += ck * st.psi(z, segment) ** 2
    return np.asarray(mass) * n


def ionized_donors(E_F: float | None, T: float, donor_level, n_d, g: float = 2.0):
    """N_D / (1 + g exp((E_F - E_ref)/kT)); full ionization when E_F is None."""
    n_d = np.asarray(n_d, dtype=float)
    if E_F is None:
        return n_d
    x = (E_F - np.asarray(donor_level, dtype=float)) / (KB * T)
    # 1/(1 + g e^x) written to stay finite for large |x|
    return n_d * np.exp(-np.logaddexp(0.0, np.log(g) + x))


def donor_levels(model: ChargeModel, components: PotentialComponents) -> np.ndarray:
    """E_ref per layer: configured level or the layer's mean potential minus the binding."""
    if model.donor_level is not None:
        return np.full(components.stack.n_layers, float(model.donor_level))
    tot = components.total_layers
    # trapezoid mean over each layer's uniform sample grid
    mean = (np.sum(tot, axis=1) - 0.5 * (tot[:, 0] + tot[:, -1])) / (tot.shape[1] - 1)
    return mean - model.donor_binding


@dataclass(frozen=True)
class Closure:
    fermi_level: float | None
    donors: np.ndarray       # ionized donor density per layer, nm^-3
    factors: np.ndarray      # per-subband sheet factor per unit mass, nm^-2
    sheet_density: float     # electrons per nm^2


def solve_fermi_level(
    states: Sequence[StationaryState],
    model: ChargeModel,
    levels: np.ndarray,
    thicknesses: np.ndarray,
    xtol: float = 1e-12,
) -> Closure:
    """Fermi level from global neutrality (or the fixed value of ``model``)."""
    T = model.temperature
    nd = model.donor_profile(len(thicknesses))
    energies = np.array([s.energy for s in states])
    weights = np.array([s.mass_weighted_norm for s in states])

    def electrons(ef):
        return float(np.sum(sheet_factors(ef, energies, T) * weights))

    def donors(ef):
        return float(np.sum(ionized_donors(ef, T, levels, nd, model.g) * thicknesses))

    if model.fermi_level is not None:
        ef = float(model.fermi_level)
    elif not np.any(nd > 0):
        return Closure(None, np.zeros_like(nd), np.zeros(len(states)), 0.0)
    elif not states:
        warnings.warn("no bound states to hold the donor electrons", RuntimeWarning)
        return Closure(None, nd.copy(), np.zeros(0), 0.0)
    else:
        kT = model.kT
        lo = min(energies.min(), levels[nd > 0].min()) - 50 * kT
        hi = max(energies.min(), levels[nd > 0].max()) + 50 * kT
        f = lambda ef: donors(ef) - electrons(ef)  # noqa: E731  decreasing in ef
        while f(lo) <= 0:
            lo -= 1.0
        while f(hi) >= 0:
            hi += 1.0
        ef = optimize.brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps)
    return Closure(
        ef,
        ionized_donors(ef, T, levels, nd, model.g),
        sheet_factors(ef, energies, T),
        electrons(ef),
    )


@dataclass(frozen=True)
class ChargeDensity:
    """Volume density (e/nm^3) at sample points plus symbolic sheet charges (e/nm^2)."""

    z: np.ndarray
    rho: np.ndarray
    sheet_positions: np.ndarray
    sheets: np.ndarray


def total_charge_density(
    model: ChargeModel,
    states: Sequence[StationaryState],
    closure: Closure,
    z,
    layer,
    sheet_positions=(),
    sheets=(),
    segment=None,
) -> ChargeDensity:
    """rho = N_D+ - n at ``z`` (``layer`` gives the 0-based layer of each point)."""
    z = np.asarray(z, dtype=float)
    layer = np.asarray(layer)
    inside = (layer >= 0) & (layer < len(closure.donors))
    donors = np.where(inside, closure.donors[np.clip(layer, 0, len(closure.donors) - 1)], 0.0)
    n = electron_density(states, closure.fermi_level, model.temperature, z, segment=segment)
    return ChargeDensity(z, donors - n, np.asarray(sheet_positions, float), np.asarray(sheets, float))


# ----------------------------------------------------------------------------
# closed-form Hartree potential


def _q_closed(state: StationaryState, s, z):
    """Q with Q'' = psi^2 and G = Q' from the Airy identities, at ``z`` in segment ``s``."""
    p = state.potential
    F = p.eff_fields[s]
    m = p.mass[s]
    t = p.v_left[s] + F * (z - p.z_left[s]) - state.energy
    psi, dpsi = state.evaluate(z, s)
    h = HB / m
    G = (t * psi**2 - h * dpsi**2) / F
    Q = (2 * t**2 * psi**2 / F**2 - 2 * h * t * dpsi**2 / F**2 - h * psi * dpsi / F) / 3.0
    return Q, G


def _q_quadrature(state: StationaryState, s, z):
    """Q~(z) = int_a^z (z - t) psi^2 dt and G~(z) = int_a^z psi^2 dt by Gauss-Legendre."""
    a = state.potential.z_left[s]
    half = 0.5 * (z - a)
    t = (0.5 * (z + a))[..., None] + half[..., None] * _GL_X
    seg = np.broadcast_to(np.asarray(s)[..., None], t.shape)
    psi2 = state.psi(t.ravel(), seg.ravel()).reshape(t.shape) ** 2
    G = half * (psi2 @ _GL_W)
    Q = half * ((psi2 * (z[..., None] - t)) @ _GL_W)
    return Q, G


def _well_conditioned(state: StationaryState) -> np.ndarray:
    p = state.potential
    F = np.abs(p.eff_fields)
    t = np.maximum(np.abs(p.v_left - state.energy), np.abs(p.v_right - state.energy))
    with np.errstate(divide="ignore", over="ignore"):
        c = (t / (F * p.widths)) ** 2
    return ~p.flat & (c <= _CLOSED_FORM_LIMIT)


def electron_kernel(state: StationaryState, s, z):
    """Q~ and G~ of ``state`` relative to the left node of segment ``s``.

    Q~(a) = G~(a) = 0, Q~'' = psi^2; the closed form is used where it is well
    conditioned and Gauss-Legendre quadrature elsewhere.
    """
    s = np.asarray(s)
    z = np.asarray(z, dtype=float)
    good = _well_conditioned(state)[s]
    Q = np.zeros(z.shape)
    G = np.zeros(z.shape)
    if np.any(good):
        sg, zg = s[good], z[good]
        Qz, Gz = _q_closed(state, sg, zg)
        Qa, Ga = _q_closed(state, sg, state.potential.z_left[sg])
        Q[good] = Qz - Qa - Ga * (zg - state.potential.z_left[sg])
        G[good] = Gz - Ga
    if not np.all(good):
        bad = ~good
        Q[bad], G[bad] = _q_quadrature(state, s[bad], z[bad])
    return Q, G


@dataclass(frozen=True)
class HartreeSolution:
    """Per-segment Hartree potential W_s(z) = P_s(z) + C1_s (z - a_s) + C2_s.

    P_s is the particular solution with P_s(a_s) = P_s'(a_s) = 0 built from the
    donor parabola and the electron kernels; C1, C2 come from the matching
    solve.
    """

    potential: PiecewiseLinearPotential = field(repr=False)
    states: tuple = field(repr=False)
    factors: np.ndarray
    donors: np.ndarray
    node_sheets: np.ndarray
    c1: np.ndarray
    c2: np.ndarray

    def _particular(self, s, z):
        p = self.potential
        s = np.asarray(s)
        z = np.asarray(z, dtype=float)
        a = p.z_left[s]
        eps = p.dielectric[s]
        nd = self.donors[p.layer[s]]
        P = nd * (z - a) ** 2 / (2 * eps * EPS0)
        dP = nd * (z - a) / (eps * EPS0)
        for ck, st in zip(self.factors, self.states):
            if ck == 0.0:
                continue
            Q, G = electron_kernel(st, s, z)
            P = P - p.mass[s] * ck * Q / (eps * EPS0)
            dP = dP - p.mass[s] * ck * G / (eps * EPS0)
        return P, dP

    def evaluate(self, z, segment=None):
        """V_H and dV_H/dz at ``z``; zero outside the stack."""
        p = self.potential
        z = np.asarray(z, dtype=float)
        s = p.segment_of(z) if segment is None else np.broadcast_to(segment, z.shape)
        P, dP = self._particular(s, z)
        v = P + self.c1[s] * (z - p.z_left[s]) + self.c2[s]
        dv = dP + self.c1[s]
        outside = (z < p.z_left[0]) | (z > p.z_right[-1])
        return np.where(outside, 0.0, v), np.where(outside, 0.0, dv)

    def __call__(self, z, segment=None):
        return self.evaluate(z, segment)[0]

    @property
    def boundary_values(self) -> tuple[float, float]:
        p = self.potential
        last = p.n_segments - 1
        left = self.evaluate(np.array([p.z_left[0]]), np.array([0]))[0][0]
        right = self.evaluate(np.array([p.z_right[-1]]), np.array([last]))[0][0]
        return float(left), float(right)

    def node_residuals(self) -> tuple[np.ndarray, np.ndarray]:
        """Relative continuity and flux-jump residuals at the interior nodes."""
        p = self.potential
        s = np.arange(p.n_segments - 1)
        zb = p.z_right[s]
        vl, dl = self.evaluate(zb, s)
        vr, dr = self.evaluate(zb, s + 1)
        scale_v = max(np.max(np.abs(vl)), 1e-300)
        fl = p.dielectric[s] * dl
        fr = p.dielectric[s + 1] * dr
        jump = fl - fr + self.node_sheets / EPS0
        scale_f = max(np.max(np.abs(fl)), np.max(np.abs(self.node_sheets / EPS0)), 1e-300)
        return np.abs(vl - vr) / scale_v, np.abs(jump) / scale_f


def node_sheet_charges(potential: PiecewiseLinearPotential, sheets) -> np.ndarray:
    """Spread per-boundary sheets (length n_layers + 1) onto the interior segment nodes.

    Charges at the two outer boundaries are dropped: there V_H is pinned to zero.
    """
    out = np.zeros(potential.n_segments - 1)
    if sheets is None:
        return out
    sheets = np.asarray(sheets, dtype=float)
    change = np.flatnonzero(np.diff(potential.layer) != 0)
    n_layers = int(potential.layer.max()) + 1
    if sheets.shape != (n_layers + 1,):
        raise ValueError(f"need {n_layers + 1} boundary sheet charges")
    out[change] = sheets[potential.layer[change + 1]]
    return out


def hartree_closed_form(
    potential: PiecewiseLinearPotential,
    states: Sequence[StationaryState],
    factors,
    donors,
    sheets=None,
) -> HartreeSolution:
    """Hartree potential of donors, subband electrons and sheet charges.

    ``factors`` are the per-subband sheet factors (see :func:`sheet_factors`),
    ``donors`` the ionized donor density of every layer (nm^-3) and
    ``sheets`` the interface charges at z_0..z_N (e/nm^2).
    """
    p = potential
    S = p.n_segments
    factors = np.asarray(factors, dtype=float)
    donors = np.asarray(donors, dtype=float)
    node_sheets = node_sheet_charges(p, sheets)
    base = HartreeSolution(p, tuple(states), factors, donors, node_sheets, np.zeros(S), np.zeros(S))
    seg = np.arange(S)
    Pb, dPb = base._particular(seg, p.z_right)
    h = p.widths
    eps = p.dielectric
    # unknowns ordered (C2_0, C1_0, C2_1, C1_1, ...); tridiagonal system
    n = 2 * S
    ab = np.zeros((3, n))
    rhs = np.zeros(n)

    def put(i, j, v):
        ab[1 + i - j, j] = v

    put(0, 0, 1.0)
    for j in range(S - 1):
        r = 2 * j + 1
        put(r, 2 * j, 1.0)
        put(r, 2 * j + 1, h[j])
        put(r, 2 * j + 2, -1.0)
        rhs[r] = -Pb[j]
        r += 1
        put(r, 2 * j + 1, eps[j])
        put(r, 2 * j + 3, -eps[j + 1])
        rhs[r] = -node_sheets[j] / EPS0 - eps[j] * dPb[j]
    put(n - 1, n - 2, 1.0)
    put(n - 1, n - 1, h[-1])
    rhs[n - 1] = -Pb[-1]
    try:
        x = linalg.solve_banded((1, 1), ab, rhs)
    except linalg.LinAlgError as exc:
        raise ValueError(f"singular Hartree matching system: {exc}") from None
    return HartreeSolution(p, tuple(states), factors, donors, node_sheets, x[1::2], x[0::2])


# ----------------------------------------------------------------------------
# finite-difference reference


def fd_poisson_oracle(nodes, rho_cells, eps_cells, node_sheets=None) -> np.ndarray:
    """Finite-volume solution of d/dz(eps dV/dz) = rho/eps0 with V = 0 at both ends.

    ``rho_cells`` (e/nm^3) and ``eps_cells`` hold one value per cell;
    ``node_sheets`` (e/nm^2) adds a sheet charge at each node, which equals a
    density sigma/h spread over that node's dual cell.
    """
    z = np.asarray(nodes, dtype=float)
    rho = np.asarray(rho_cells, dtype=float)
    eps = np.asarray(eps_cells, dtype=float)
    h = np.diff(z)
    if rho.shape != h.shape or eps.shape != h.shape:
        raise ValueError("rho_cells and eps_cells need one value per cell")
    k = eps / h
    # interior nodes 1..n-2
    charge = 0.5 * (rho[:-1] * h[:-1] + rho[1:] * h[1:])
    if node_sheets is not None:
        charge = charge + np.asarray(node_sheets, dtype=float)[1:-1]
    diag = -(k[:-1] + k[1:])
    off = k[1:-1]
    ab = np.zeros((3, len(diag)))
    ab[0, 1:] = off
    ab[1] = diag
    ab[2, :-1] = off
    v = linalg.solve_banded((1, 1), ab, charge / EPS0)
    return np.concatenate([[0.0], v, [0.0]])


def hartree_fd(
    potential: PiecewiseLinearPotential,
    states: Sequence[StationaryState],
    factors,
    donors,
    sheets=None,
    h: float = 0.005,
):
    """FD Hartree potential of the same charges as :func:`hartree_closed_form`.

    Returns ``(nodes, v_h)`` on a grid with a node at every segment boundary.
    """
    p = potential
    pieces = np.maximum(np.ceil(p.widths / h).astype(int), 1)
    nodes = np.concatenate(
        [np.linspace(a, b, k, endpoint=False) for a, b, k in zip(p.z_left, p.z_right, pieces)]
        + [p.z_right[-1:]]
    )
    seg = np.repeat(np.arange(p.n_segments), pieces)
    cells = np.diff(nodes)
    # cell charge by 2-point Gauss-Legendre, so psi^2 curvature is resolved
    g = 0.5 / np.sqrt(3.0)
    mid = 0.5 * (nodes[1:] + nodes[:-1])
    rho = np.asarray(donors, float)[p.layer[seg]].copy()
    factors = np.asarray(factors, dtype=float)
    for ck, st in zip(factors, states):
        if ck == 0.0:
            continue
        psi2 = 0.5 * (st.psi(mid - g * cells, seg) ** 2 + st.psi(mid + g * cells, seg) ** 2)
        rho -= p.mass[seg] * ck * psi2
    node_sheets = np.zeros(len(nodes))
    inner = node_sheet_charges(p, sheets)
    starts = np.concatenate([[0], np.cumsum(pieces)])
    node_sheets[starts[1:-1]] = inner
    return nodes, fd_poisson_oracle(nodes, rho, p.dielectric[seg], node_sheets)
