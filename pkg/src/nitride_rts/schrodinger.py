"""Bound states of a piecewise-linear potential from Airy-function transfer matrices.

Inside a sub-segment with slope F the envelope is a combination of Ai and Bi
of zeta(z) = beta (V(z) - E), beta = (m / (hb F^2))^(1/3), hb = hbar^2/2m0.
Flat sub-segments use cosh/sinh (or cos/sin) instead. The state vector that
is carried across nodes is (psi, psi'/m), which is continuous everywhere.

Per segment the basis is referenced to its left node: the Airy pair is
eAi(zeta) exp(xi_a - xi) and eBi(zeta) exp(xi - xi_a), with eAi, eBi the
exponentially scaled functions, so coefficients stay O(1) through barriers.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import linalg, optimize

from .constants import HBAR2_2M0 as HB
from .potential import FLAT_FIELD, PiecewiseLinearPotential, PotentialComponents, linearize
from .special import airy_scaled, scaling_exponent

#: default energy scan step and root tolerance, eV
SCAN_STEP = 1e-3
ROOT_TOL = 1e-9

#: eigenvalue shift (eV) above which the N-doubling check warns
PARTITION_WARN = 1e-4

_GL_X, _GL_W = leggauss(64)
_SERIES_LIMIT = 1e-3
_ILL_CONDITIONED = 1e6


class SingularBasisError(ArithmeticError):
    pass


# ----------------------------------------------------------------------------
# per-segment bases


def _cs(q, s):
    """C(s), S(s) solving y'' = q y with C(0) = 1, C'(0) = 0, S(0) = 0, S'(0) = 1."""
    q = np.asarray(q, dtype=float)
    s = np.asarray(s, dtype=float)
    x = q * s * s
    small = np.abs(x) < _SERIES_LIMIT
    r = np.sqrt(np.abs(q))
    rs = r * s
    r_safe = np.where(r > 0, r, 1.0)
    with np.errstate(over="ignore", invalid="ignore"):
        c = np.where(q > 0, np.cosh(rs), np.cos(rs))
        sn = np.where(q > 0, np.sinh(rs), np.sin(rs)) / r_safe
    c_ser = 1.0 + x / 2.0 + x * x / 24.0 + x**3 / 720.0
    s_ser = s * (1.0 + x / 6.0 + x * x / 120.0 + x**3 / 5040.0)
    return np.where(small, c_ser, c), np.where(small, s_ser, sn)


@dataclass(frozen=True)
class SegmentBasis:
    """Basis of one sub-segment at one energy.

    ``kind`` is ``"airy"`` or ``"constant"``. For the Airy kind
    ``zeta(z) = beta * (v_left + field * (z - z_left) - energy)`` so that zeta
    grows into classically forbidden regions.
    """

    kind: str
    z_left: float
    v_left: float
    field: float
    mass: float
    energy: float
    v_mean: float

    @classmethod
    def of(cls, potential: PiecewiseLinearPotential, s: int, energy: float) -> "SegmentBasis":
        F = float(potential.eff_fields[s])
        kind = "constant" if abs(F) < FLAT_FIELD else "airy"
        v_mean = 0.5 * (potential.v_left[s] + potential.v_right[s])
        return cls(kind, float(potential.z_left[s]), float(potential.v_left[s]), F,
                   float(potential.mass[s]), float(energy), float(v_mean))

    @property
    def beta(self) -> float:
        return (self.mass / (HB * self.field**2)) ** (1.0 / 3.0)

    def zeta(self, z):
        return self.beta * (self.v_left + self.field * (np.asarray(z) - self.z_left) - self.energy)

    def values(self, z):
        """(f1, f2, f1', f2') at ``z``; derivatives are with respect to z."""
        return _basis_values(
            np.array(self.kind == "constant"), self.z_left, self.v_left, self.field,
            self.mass, self.energy, self.v_mean, np.asarray(z, dtype=float),
        )

    def wronskian(self) -> float:
        """f1 f2' - f1' f2, independent of z."""
        return 1.0 if self.kind == "constant" else self.beta * self.field / np.pi


def _basis_values(flat, z_left, v_left, F, mass, E, v_mean, z):
    """Vectorized basis evaluation; all arguments broadcast together."""
    flat, z_left, v_left, F, mass, E, v_mean, z = np.broadcast_arrays(
        np.asarray(flat, dtype=bool), z_left, v_left, F, mass, E, v_mean, np.asarray(z, dtype=float)
    )
    out = [np.empty(z.shape) for _ in range(4)]
    airy = ~flat
    if np.any(airy):
        Fa, ma = F[airy], mass[airy]
        beta = np.cbrt(ma / (HB * Fa**2))
        alpha = beta * Fa
        zeta_a = beta * (v_left[airy] - E[airy])
        quad, xi = airy_scaled(zeta_a + alpha * (z[airy] - z_left[airy]))
        xi_a = scaling_exponent(zeta_a)
        with np.errstate(over="ignore"):
            down = np.exp(xi_a - xi)
            up = np.exp(xi - xi_a)
        out[0][airy] = quad.ai * down
        out[1][airy] = quad.bi * up
        out[2][airy] = alpha * quad.aip * down
        out[3][airy] = alpha * quad.bip * up
    if np.any(flat):
        q = mass[flat] / HB * (v_mean[flat] - E[flat])
        c, s = _cs(q, z[flat] - z_left[flat])
        out[0][flat], out[1][flat], out[2][flat], out[3][flat] = c, s, q * s, c
    return tuple(out)


def _segment_arrays(potential: PiecewiseLinearPotential):
    return (
        potential.flat, potential.z_left, potential.v_left, potential.eff_fields,
        potential.mass, 0.5 * (potential.v_left + potential.v_right),
    )


def _wronskians(potential: PiecewiseLinearPotential) -> np.ndarray:
    flat = potential.flat
    F = np.where(flat, 1.0, potential.eff_fields)
    beta = np.cbrt(potential.mass / (HB * F**2))
    return np.where(flat, 1.0, beta * F / np.pi)


def transfer_step(E: float, left: SegmentBasis, right: SegmentBasis, z: float) -> np.ndarray:
    """Matrix mapping (A, B) of ``left`` to (A, B) of ``right`` across node ``z``.

    Enforces continuity of psi and of psi'/m at ``z``.
    """
    l1, l2, ld1, ld2 = (float(v) for v in left.values(z))
    r1, r2, rd1, rd2 = (float(v) for v in right.values(z))
    w = r1 * rd2 - rd1 * r2
    if not np.isfinite(w) or abs(w) < 1e-300:
        raise SingularBasisError(f"basis Wronskian underflows at z = {z} nm, E = {E} eV")
    ratio = right.mass / left.mass
    phi_l = np.array([[l1, l2], [ratio * ld1, ratio * ld2]])
    phi_r_inv = np.array([[rd2, -r2], [-rd1, r1]]) / w
    return phi_r_inv @ phi_l


# ----------------------------------------------------------------------------
# propagation


def _kappa(potential: PiecewiseLinearPotential, E, side: str):
    u, m = (potential.u_left, potential.m_left) if side == "left" else (potential.u_right, potential.m_right)
    return np.sqrt(np.maximum(m / HB * (u - E), 0.0)), m


def _segment_matrices(potential: PiecewiseLinearPotential, E: np.ndarray):
    """(u, w) propagators of every segment, shape (S, len(E)) per entry."""
    flat, zl, vl, F, m, vm = (a[:, None] for a in _segment_arrays(potential))
    zr = potential.z_right[:, None]
    E = E[None, :]
    fa = _basis_values(flat, zl, vl, F, m, E, vm, zl)
    fb = _basis_values(flat, zl, vl, F, m, E, vm, zr)
    det = _wronskians(potential)[:, None]
    # M = Phi(b) Phi(a)^-1 with Phi = [[f1, f2], [f1'/m, f2'/m]]; det Phi = W / m
    a1, a2, ad1, ad2 = fa
    b1, b2, bd1, bd2 = fb
    m11 = (b1 * ad2 - b2 * ad1) / det
    m12 = m * (b2 * a1 - b1 * a2) / det
    m21 = (bd1 * ad2 - bd2 * ad1) / (m * det)
    m22 = (bd2 * a1 - bd1 * a2) / det
    return m11, m12, m21, m22


def _propagate(potential: PiecewiseLinearPotential, E: np.ndarray, keep: bool = False):
    """Carry the left-decaying solution to z_N; optionally keep every node."""
    kap, m_l = _kappa(potential, E, "left")
    u = np.ones_like(E)
    w = kap / m_l
    m11, m12, m21, m22 = _segment_matrices(potential, E)
    nodes = []
    log_scale = np.zeros_like(E)
    for s in range(potential.n_segments):
        if keep:
            nodes.append((u.copy(), w.copy(), log_scale.copy()))
        u, w = m11[s] * u + m12[s] * w, m21[s] * u + m22[s] * w
        if not keep:
            norm = np.hypot(u, w)
            norm = np.where(norm > 0, norm, 1.0)
            u, w = u / norm, w / norm
            log_scale += np.log(norm)
    if keep:
        nodes.append((u.copy(), w.copy(), log_scale.copy()))
        return nodes
    return u, w


def _propagate_back(potential: PiecewiseLinearPotential, E: float):
    """Node values (u, w) of the solution decaying into the right cladding."""
    kap, m_r = _kappa(potential, np.array([E]), "right")
    u, w = 1.0, float(kap[0]) / m_r * -1.0
    m11, m12, m21, m22 = (float_row[:, 0] for float_row in _segment_matrices(potential, np.array([E])))
    us, ws = [u], [w]
    for s in range(potential.n_segments - 1, -1, -1):
        # inverse of a unimodular 2x2 matrix
        u, w = m22[s] * u - m12[s] * w, -m21[s] * u + m11[s] * w
        us.append(u)
        ws.append(w)
    return np.array(us[::-1]), np.array(ws[::-1])


def _residual_from_end(potential, E, u, w):
    kap, m_r = _kappa(potential, E, "right")
    kap = np.where(kap > 0, kap, 1e-300)
    v = m_r * w / kap
    return 0.5 * (u + v) / np.hypot(u, v)


def dispersion_residual(E, potential: PiecewiseLinearPotential):
    """Normalized coefficient of the growing exponential in the right cladding.

    The solution decaying into the left cladding is propagated across all
    sub-segments; the result lies in [-1, 1] and vanishes at bound states.
    """
    E_arr = np.atleast_1d(np.asarray(E, dtype=float))
    if np.any(E_arr >= potential.barrier):
        raise ValueError("energy must lie below the cladding barrier")
    u, w = _propagate(potential, E_arr)
    out = _residual_from_end(potential, E_arr, u, w)
    return float(out[0]) if np.ndim(E) == 0 else out


# ----------------------------------------------------------------------------
# states


@dataclass(frozen=True)
class StationaryState:
    """A normalized bound state of a :class:`PiecewiseLinearPotential`.

    ``coef_a``/``coef_b`` multiply the per-segment scaled basis;
    ``amp_left``/``amp_right`` are psi(z_0) and psi(z_N), the cladding tails
    being ``amp_left * exp(kappa_L (z - z_0))`` and
    ``amp_right * exp(-kappa_R (z - z_N))``.
    """

    energy: float
    potential: PiecewiseLinearPotential = field(repr=False)
    coef_a: np.ndarray = field(repr=False)
    coef_b: np.ndarray = field(repr=False)
    amp_left: float = field(repr=False)
    amp_right: float = field(repr=False)
    kappa_left: float = field(repr=False)
    kappa_right: float = field(repr=False)
    segment_norms: np.ndarray = field(repr=False)
    cladding_norms: tuple[float, float] = field(repr=False)
    node_values: np.ndarray = field(repr=False)
    closed_form_segments: int = field(default=0, repr=False)

    @property
    def norm(self) -> float:
        return float(np.sum(self.segment_norms) + sum(self.cladding_norms))

    @property
    def normalized(self) -> bool:
        return abs(self.norm - 1.0) <= 1e-8

    @property
    def localization(self) -> np.ndarray:
        """Probability in each physical layer."""
        layer = self.potential.layer
        return np.bincount(layer, weights=self.segment_norms, minlength=layer.max() + 1)

    @property
    def mass_weighted_norm(self) -> float:
        """Integral of m(z) psi^2, which sets the 2D density of states of the subband."""
        p = self.potential
        return float(
            np.sum(p.mass * self.segment_norms)
            + p.m_left * self.cladding_norms[0]
            + p.m_right * self.cladding_norms[1]
        )

    @property
    def node_count(self) -> int:
        """Sign changes of psi inside the stack, ignoring tails below 1e-6 of the peak."""
        p = self.potential
        pieces = np.maximum(np.ceil(p.widths / 0.02).astype(int), 2)
        z = np.concatenate(
            [np.linspace(a, b, k, endpoint=False) for a, b, k in zip(p.z_left, p.z_right, pieces)]
        )
        seg = np.repeat(np.arange(p.n_segments), pieces)
        v = self.psi(z, seg)
        v = v[np.abs(v) > 1e-6 * np.max(np.abs(v))]
        return int(np.count_nonzero(np.signbit(v[1:]) != np.signbit(v[:-1])))

    def _inside(self, z, s):
        p = self.potential
        f1, f2, d1, d2 = _basis_values(
            p.flat[s], p.z_left[s], p.v_left[s], p.eff_fields[s], p.mass[s], self.energy,
            0.5 * (p.v_left[s] + p.v_right[s]), z,
        )
        a, b = self.coef_a[s], self.coef_b[s]
        return a * f1 + b * f2, a * d1 + b * d2

    def evaluate(self, z, segment=None):
        """psi and dpsi/dz at ``z``; ``segment`` forces the sub-segment used."""
        z = np.asarray(z, dtype=float)
        p = self.potential
        s = p.segment_of(z) if segment is None else np.broadcast_to(segment, z.shape)
        psi, dpsi = self._inside(z, s)
        z0, zN = p.z_left[0], p.z_right[-1]
        left = z < z0
        right = z > zN
        if np.any(left):
            e = self.amp_left * np.exp(self.kappa_left * (z[left] - z0))
            psi[left], dpsi[left] = e, self.kappa_left * e
        if np.any(right):
            e = self.amp_right * np.exp(-self.kappa_right * (z[right] - zN))
            psi[right], dpsi[right] = e, -self.kappa_right * e
        return psi, dpsi

    def psi(self, z, segment=None):
        return self.evaluate(np.atleast_1d(z), segment)[0]

    def dpsi(self, z, segment=None):
        return self.evaluate(np.atleast_1d(z), segment)[1]

    def to_rows(self, z):
        return np.column_stack([z, self.psi(z)])


def _gl_segment_integrals(potential: PiecewiseLinearPotential, segs, E, a, b):
    """Gauss-Legendre integrals of (a f1 + b f2)^2 over the listed segments."""
    p = potential
    zl, zr = p.z_left[segs], p.z_right[segs]
    half = 0.5 * (zr - zl)
    z = 0.5 * (zr + zl)[:, None] + half[:, None] * _GL_X[None, :]
    sl = segs[:, None]
    f1, f2, _, _ = _basis_values(
        p.flat[sl], p.z_left[sl], p.v_left[sl], p.eff_fields[sl], p.mass[sl], E,
        0.5 * (p.v_left[sl] + p.v_right[sl]), z,
    )
    psi = a[segs][:, None] * f1 + b[segs][:, None] * f2
    return half * (psi**2 @ _GL_W)


def _build_state(potential: PiecewiseLinearPotential, E: float) -> StationaryState:
    p = potential
    nodes = _propagate(p, np.array([E]), keep=True)
    u = np.array([n[0][0] for n in nodes])
    w = np.array([n[1][0] for n in nodes])
    # left propagation amplifies the small root error in the right tail, so
    # take the right-decaying solution beyond the peak of the left one
    j = int(np.argmax(np.abs(u)))
    u_r, w_r = _propagate_back(p, E)
    if u_r[j] != 0.0:
        ratio = u[j] / u_r[j]
        u = np.concatenate([u[:j], ratio * u_r[j:]])
        w = np.concatenate([w[:j], ratio * w_r[j:]])
    # coefficients from the node values at each segment's left end
    flat, zl, vl, F, m, vm = _segment_arrays(p)
    f1, f2, d1, d2 = _basis_values(flat, zl, vl, F, m, E, vm, zl)
    det = _wronskians(p) / m
    ua, wa = u[:-1], w[:-1]
    coef_a = (d2 / m * ua - f2 * wa) / det
    coef_b = (-d1 / m * ua + f1 * wa) / det

    # normalization: closed-form antiderivative where well conditioned
    psi_a, dpsi_a = u[:-1], m * w[:-1]
    psi_b, dpsi_b = u[1:], m * w[1:]
    F_safe = np.where(flat, 1.0, F)
    g_a = ((p.v_left - E) * psi_a**2 - HB / m * dpsi_a**2) / F_safe
    g_b = ((p.v_right - E) * psi_b**2 - HB / m * dpsi_b**2) / F_safe
    seg = g_b - g_a
    with np.errstate(divide="ignore", invalid="ignore"):
        cond = (np.abs(g_a) + np.abs(g_b)) / np.abs(seg)
    bad = flat | ~np.isfinite(cond) | (cond > _ILL_CONDITIONED) | (seg < 0)
    if np.any(bad):
        idx = np.flatnonzero(bad)
        seg = seg.copy()
        seg[idx] = _gl_segment_integrals(p, idx, E, coef_a, coef_b)
    k_l, _ = _kappa(p, E, "left")
    k_r, _ = _kappa(p, E, "right")
    clad = (u[0] ** 2 / (2 * k_l), u[-1] ** 2 / (2 * k_r))
    total = np.sum(seg) + sum(clad)
    # propagation starts from psi(z_0) = 1, so the left tail is positive
    scale = 1.0 / np.sqrt(total)
    return StationaryState(
        energy=float(E),
        potential=p,
        coef_a=coef_a * scale,
        coef_b=coef_b * scale,
        amp_left=float(u[0] * scale),
        amp_right=float(u[-1] * scale),
        kappa_left=float(k_l),
        kappa_right=float(k_r),
        segment_norms=seg * scale**2,
        cladding_norms=(float(clad[0] * scale**2), float(clad[1] * scale**2)),
        node_values=u * scale,
        closed_form_segments=int(np.count_nonzero(~bad)),
    )


def _roots_in(potential, energies, tol):
    res = dispersion_residual(energies, potential)
    roots = []
    for i in range(len(energies) - 1):
        r0, r1 = res[i], res[i + 1]
        if r0 == 0.0:
            roots.append(float(energies[i]))
        elif r0 * r1 < 0:
            roots.append(
                optimize.brentq(
                    lambda e: dispersion_residual(e, potential),
                    energies[i], energies[i + 1], xtol=tol, rtol=4 * np.finfo(float).eps,
                )
            )
    return roots


def search_window(potential: PiecewiseLinearPotential) -> tuple[float, float]:
    """Energy range [min V + 1 meV, U - 1 meV] scanned for bound states."""
    return potential.v_min + 1e-3, potential.barrier - 1e-3


def bound_states(
    potential: PiecewiseLinearPotential,
    step: float = SCAN_STEP,
    tol: float = ROOT_TOL,
    window: tuple[float, float] | None = None,
) -> list[StationaryState]:
    """All bound states below the cladding barrier, sorted by energy.

    Roots of :func:`dispersion_residual` are bracketed on a uniform grid of
    spacing ``step`` and refined by Brent's method. The node counts are then
    checked; a gap triggers a rescan at a tenth of the step.
    """
    if step <= 0:
        raise ValueError("step must be positive")
    lo, hi = search_window(potential) if window is None else window
    if hi <= lo:
        return []
    n = max(int(np.ceil((hi - lo) / step)), 1)
    grid = np.linspace(lo, hi, n + 1)
    roots = _roots_in(potential, grid, tol)
    states = [_build_state(potential, e) for e in roots]
    if any(s.node_count != i for i, s in enumerate(states)):
        grid = np.linspace(lo, hi, 10 * n + 1)
        roots = _roots_in(potential, grid, tol)
        states = [_build_state(potential, e) for e in roots]
        if any(s.node_count != i for i, s in enumerate(states)):
            warnings.warn("node counts of the bound states are not consecutive", RuntimeWarning)
    return states


def partition_shift(components: PotentialComponents, N: int = 16, step: float = SCAN_STEP) -> float:
    """Largest eigenvalue shift (eV) when the linearization parameter is doubled.

    Emits a ``RuntimeWarning`` above 0.1 meV or when the state count changes.
    """
    e1 = [s.energy for s in bound_states(linearize(components, N), step)]
    e2 = [s.energy for s in bound_states(linearize(components, 2 * N), step)]
    if len(e1) != len(e2):
        warnings.warn(f"bound-state count changes from {len(e1)} to {len(e2)} on doubling N",
                      RuntimeWarning)
        return float("inf")
    shift = float(np.max(np.abs(np.subtract(e1, e2)))) if e1 else 0.0
    if shift > PARTITION_WARN:
        warnings.warn(f"eigenvalues shift by {shift * 1e3:.3f} meV on doubling N", RuntimeWarning)
    return shift


def overlap(a: StationaryState, b: StationaryState) -> float:
    """Integral of psi_a psi_b over all space (same potential required)."""
    p = a.potential
    if b.potential is not p:
        raise ValueError("states belong to different potentials")
    half = 0.5 * p.widths
    z = 0.5 * (p.z_left + p.z_right)[:, None] + half[:, None] * _GL_X[None, :]
    seg = np.repeat(np.arange(p.n_segments)[:, None], len(_GL_X), axis=1)
    prod = a.psi(z.ravel(), seg.ravel()) * b.psi(z.ravel(), seg.ravel())
    inside = float(np.sum(half * (prod.reshape(z.shape) @ _GL_W)))
    tails = (a.amp_left * b.amp_left / (a.kappa_left + b.kappa_left)
             + a.amp_right * b.amp_right / (a.kappa_right + b.kappa_right))
    return inside + tails


# ----------------------------------------------------------------------------
# finite-difference reference


def fd_grid(potential: PiecewiseLinearPotential, h: float = 0.005, pad: float = 4.0) -> np.ndarray:
    """Nodes on every segment boundary, cells no wider than ``h``, padded cladding."""
    p = potential
    z0, zN = p.z_left[0], p.z_right[-1]
    pieces = [np.linspace(z0 - pad, z0, int(np.ceil(pad / h)) + 1)[:-1]]
    for s in range(p.n_segments):
        n = int(np.ceil(p.widths[s] / h))
        pieces.append(np.linspace(p.z_left[s], p.z_right[s], n + 1)[:-1])
    pieces.append(np.linspace(zN, zN + pad, int(np.ceil(pad / h)) + 1))
    return np.concatenate(pieces)


def fd_oracle(potential: PiecewiseLinearPotential, h: float = 0.005, pad: float = 4.0) -> np.ndarray:
    """Bound-state energies from a finite-volume BenDaniel-Duke discretization.

    Every segment boundary is a grid node, 1/m is taken per cell and the
    potential per node is the average over the node's dual cell, so the
    scheme is second order even across band-offset steps. Dirichlet walls sit
    ``pad`` nm inside each cladding.
    """
    if pad < 4.0:
        raise ValueError("cladding padding must be at least 4 nm")
    p = potential
    z = fd_grid(p, h, pad)
    cells = np.diff(z)
    mid = 0.5 * (z[1:] + z[:-1])
    inv_m = 1.0 / p.mass_at(mid)
    v_cell_left = p.evaluate(z[1:] - 0.25 * cells)   # mean over the right half of each cell
    v_cell_right = p.evaluate(z[:-1] + 0.25 * cells)  # mean over the left half
    # interior nodes 1..n-2
    hl, hr = cells[:-1], cells[1:]
    vol = 0.5 * (hl + hr)
    v_node = (0.5 * hl * v_cell_left[:-1] + 0.5 * hr * v_cell_right[1:]) / vol
    kl = HB * inv_m[:-1] / hl
    kr = HB * inv_m[1:] / hr
    diag = (kl + kr) / vol + v_node
    off = -kr[:-1] / np.sqrt(vol[:-1] * vol[1:])
    lo, hi = p.v_min, p.barrier
    vals = linalg.eigh_tridiagonal(diag, off, eigvals_only=True, select="v", select_range=(lo, hi))
    return np.sort(vals)
