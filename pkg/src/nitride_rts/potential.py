"""Effective potential components and their piecewise-linear approximation.

Components are sampled on a per-layer grid: row p of every array covers layer
p from z_{p-1} to z_p inclusive, so values on both sides of an interface are
kept (the band offset, the carrier density and hence the exchange-correlation
term jump there).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .constants import BOHR_RADIUS, EPS0
from .materials import conduction_offset
from .polarization import FieldProfile
from .structure import LayerStack

#: sub-segments with |F| below this (V/nm) use a constant-potential basis
FLAT_FIELD = 1e-6

#: samples per layer (intervals) of the default component grid
SAMPLES_PER_LAYER = 128

_HL_PREFACTOR = (9.0 / (4.0 * np.pi**2)) ** (1.0 / 3.0) / (4.0 * np.pi)

METHODS = ("full", "no_xc", "field_only")


def layer_grid(stack: LayerStack, samples: int = SAMPLES_PER_LAYER) -> np.ndarray:
    """Per-layer sample coordinates, shape (n_layers, samples + 1)."""
    t = np.linspace(0.0, 1.0, samples + 1)
    z = stack.boundaries
    return z[:-1, None] + t[None, :] * np.diff(z)[:, None]


def _regions(stack: LayerStack, z, region):
    if region is None:
        return stack.region(z)
    return np.broadcast_to(np.asarray(region), np.shape(z))


def _grid_regions(grid: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.arange(1, grid.shape[0] + 1)[:, None], grid.shape)


def offset_component(stack: LayerStack, T: float, z, region=None):
    """Conduction band offset relative to GaN at temperature ``T``, eV.

    ``region`` (0 = left cladding, p = layer p, N+1 = right cladding) picks the
    side of a boundary; by default intervals are right-continuous.
    """
    offsets = conduction_offset(stack.compositions, T, stack.table)
    clad = conduction_offset(stack.cladding.x, T, stack.table)
    table = np.concatenate([[clad], np.atleast_1d(offsets), [clad]])
    return table[_regions(stack, z, region)]


def field_component(fields: FieldProfile, stack: LayerStack, z, region=None, mode="integral"):
    """Potential energy of an electron in the internal fields, eV.

    ``mode="integral"`` integrates the piecewise-constant field from z = 0, so
    the result is continuous and vanishes at both ends of the stack.
    ``mode="literal"`` evaluates the alternating-sign layer formula term by
    term (discontinuous at boundaries), kept only for comparison.
    """
    z = np.asarray(z, dtype=float)
    reg = _regions(stack, z, region)
    bounds = stack.boundaries
    F = fields.fields
    n = stack.n_layers
    inside = (reg >= 1) & (reg <= n)
    p = np.clip(reg - 1, 0, n - 1)
    out = np.zeros_like(z)
    if mode == "integral":
        cum = np.concatenate([[0.0], np.cumsum(F * fields.thicknesses)])
        out = np.where(inside, cum[p] + F[p] * (z - bounds[p]), 0.0)
        out = np.where(reg > n, cum[-1], out)
    elif mode == "literal":
        F_prev = np.concatenate([[0.0], F[:-1]])
        sign = np.where(p % 2 == 0, 1.0, -1.0)
        out = np.where(inside, sign * (F[p] * z - F_prev[p] * bounds[p]), 0.0)
    else:
        raise ValueError(f"unknown field mode {mode!r}")
    return out


def xc_component(n, dielectric, mass):
    """Hedin-Lundquist exchange-correlation energy for density ``n`` (nm^-3), eV.

    Returns exactly zero where ``n`` is zero (the r_s -> infinity limit).
    """
    n = np.asarray(n, dtype=float)
    eps = np.broadcast_to(np.asarray(dielectric, dtype=float), n.shape)
    m = np.broadcast_to(np.asarray(mass, dtype=float), n.shape)
    if np.any(n < 0):
        raise ValueError("carrier density must be non-negative")
    out = np.zeros_like(n)
    pos = n > 0
    if np.any(pos):
        a_b = BOHR_RADIUS * eps[pos] / m[pos]
        inv_rs_ab = (4.0 * np.pi * n[pos] / 3.0) ** (1.0 / 3.0)  # 1 / (r_s a_B*)
        rs = 1.0 / (inv_rs_ab * a_b)
        bracket = 1.0 + 0.6213 * rs / 21.0 * np.log1p(21.0 / rs)
        out[pos] = -_HL_PREFACTOR * bracket * inv_rs_ab / (EPS0 * eps[pos])
    return out


@dataclass(frozen=True)
class PotentialComponents:
    """Band offset, field, Hartree and exchange-correlation terms on a layer grid."""

    stack: LayerStack
    layer_grid: np.ndarray
    delta_ec: np.ndarray
    v_e: np.ndarray
    v_h: np.ndarray
    v_hl: np.ndarray
    cladding_potential: float
    method_tag: str = "full"

    @classmethod
    def initial(
        cls,
        stack: LayerStack,
        fields: FieldProfile,
        T: float,
        samples: int = SAMPLES_PER_LAYER,
        method_tag: str = "full",
        field_mode: str = "integral",
    ) -> "PotentialComponents":
        """Order-zero potential: band offset plus internal-field term only."""
        grid = layer_grid(stack, samples)
        reg = _grid_regions(grid)
        dec = offset_component(stack, T, grid, reg)
        v_e = field_component(fields, stack, grid, reg, field_mode)
        zero = np.zeros_like(grid)
        clad = float(conduction_offset(stack.cladding.x, T, stack.table))
        return cls(stack, grid, dec, v_e, zero, zero.copy(), clad, method_tag)

    def with_terms(self, v_h=None, v_hl=None) -> "PotentialComponents":
        changes = {}
        if v_h is not None:
            changes["v_h"] = np.asarray(v_h, dtype=float).reshape(self.layer_grid.shape)
        if v_hl is not None:
            changes["v_hl"] = np.asarray(v_hl, dtype=float).reshape(self.layer_grid.shape)
        return replace(self, **changes)

    @property
    def total_layers(self) -> np.ndarray:
        return self.delta_ec + self.v_e + self.v_h + self.v_hl

    def _flat(self, arr: np.ndarray) -> np.ndarray:
        # boundary z_p keeps the value of the layer on its right; z_N keeps layer N
        parts = [arr[i, :-1] for i in range(arr.shape[0] - 1)] + [arr[-1]]
        return np.concatenate(parts)

    @property
    def grid(self) -> np.ndarray:
        """Strictly increasing sample coordinates (nm)."""
        return self._flat(self.layer_grid)

    @property
    def total(self) -> np.ndarray:
        return self._flat(self.total_layers)

    def flat(self, name: str) -> np.ndarray:
        return self._flat(getattr(self, name))

    def evaluate(self, z, region=None) -> np.ndarray:
        """Total potential at arbitrary ``z`` by linear interpolation of the samples."""
        z = np.asarray(z, dtype=float)
        reg = _regions(self.stack, z, region)
        out = np.full(z.shape, self.cladding_potential)
        tot = self.total_layers
        for p in range(self.stack.n_layers):
            mask = reg == p + 1
            if np.any(mask):
                out[mask] = np.interp(z[mask], self.layer_grid[p], tot[p])
        return out

    def to_csv(self) -> str:
        """Components in meV against z in nm, one row per grid point."""
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["z_nm", "delta_ec_meV", "v_e_meV", "v_h_meV", "v_hl_meV", "total_meV"])
        cols = [self.grid] + [1e3 * self.flat(n) for n in ("delta_ec", "v_e", "v_h", "v_hl")]
        cols.append(1e3 * self.total)
        for row in zip(*cols):
            writer.writerow([f"{v:.10g}" for v in row])
        return buf.getvalue()


@dataclass(frozen=True)
class PiecewiseLinearPotential:
    """Potential that is linear on each sub-segment, with constant claddings.

    Segment ``s`` spans ``[z_left[s], z_right[s]]`` and goes linearly from
    ``v_left[s]`` to ``v_right[s]``; adjacent segments may differ at a shared
    node (band offsets). Outside the stack the potential is ``u_left`` /
    ``u_right`` with masses ``m_left`` / ``m_right``.
    """

    z_left: np.ndarray
    z_right: np.ndarray
    v_left: np.ndarray
    v_right: np.ndarray
    mass: np.ndarray
    dielectric: np.ndarray
    layer: np.ndarray
    u_left: float
    u_right: float
    m_left: float
    m_right: float
    n_partitions: int = 1

    @classmethod
    def from_layers(
        cls,
        thicknesses: Sequence[float],
        v_left: Sequence[float],
        v_right: Sequence[float],
        masses: Sequence[float],
        cladding: tuple[float, float],
        dielectrics: Sequence[float] | None = None,
        partitions: int = 1,
        cladding_right: tuple[float, float] | None = None,
    ) -> "PiecewiseLinearPotential":
        """Build from per-layer linear profiles, each split into ``partitions`` pieces.

        ``cladding`` is ``(potential, mass)`` of the left medium (and of the
        right one unless ``cladding_right`` is given).
        """
        d = np.asarray(thicknesses, dtype=float)
        bounds = np.concatenate([[0.0], np.cumsum(d)])
        eps = np.full(len(d), 10.0) if dielectrics is None else np.asarray(dielectrics, float)
        t = np.linspace(0.0, 1.0, partitions + 1)
        zl, zr, vl, vr, m, e, lay = [], [], [], [], [], [], []
        for p in range(len(d)):
            z = bounds[p] + t * d[p]
            v = v_left[p] + t * (v_right[p] - v_left[p])
            zl.append(z[:-1]); zr.append(z[1:]); vl.append(v[:-1]); vr.append(v[1:])
            m.append(np.full(partitions, masses[p]))
            e.append(np.full(partitions, eps[p]))
            lay.append(np.full(partitions, p))
        right = cladding if cladding_right is None else cladding_right
        return cls(
            np.concatenate(zl), np.concatenate(zr), np.concatenate(vl), np.concatenate(vr),
            np.concatenate(m), np.concatenate(e), np.concatenate(lay).astype(int),
            float(cladding[0]), float(right[0]), float(cladding[1]), float(right[1]),
            partitions,
        )

    @property
    def n_segments(self) -> int:
        return len(self.z_left)

    @property
    def widths(self) -> np.ndarray:
        return self.z_right - self.z_left

    @property
    def eff_fields(self) -> np.ndarray:
        """Secant slope of each sub-segment, eV/nm (numerically V/nm for an electron)."""
        return (self.v_right - self.v_left) / self.widths

    @property
    def nodes(self) -> np.ndarray:
        return np.concatenate([self.z_left, self.z_right[-1:]])

    @property
    def values(self) -> np.ndarray:
        """Node values, taking the right-hand segment at shared nodes."""
        return np.concatenate([self.v_left, self.v_right[-1:]])

    @property
    def flat(self) -> np.ndarray:
        return np.abs(self.eff_fields) < FLAT_FIELD

    @property
    def v_min(self) -> float:
        return float(min(self.v_left.min(), self.v_right.min(), self.u_left, self.u_right))

    @property
    def barrier(self) -> float:
        """Lower of the two cladding potentials: bound states lie below it."""
        return min(self.u_left, self.u_right)

    @property
    def layer_bounds(self) -> np.ndarray:
        n = int(self.layer.max()) + 1
        starts = np.array([self.z_left[self.layer == p][0] for p in range(n)])
        return np.concatenate([starts, self.z_right[-1:]])

    def segment_of(self, z) -> np.ndarray:
        """Segment index containing ``z`` (clipped to the stack)."""
        idx = np.searchsorted(self.z_left, np.asarray(z, dtype=float), side="right") - 1
        return np.clip(idx, 0, self.n_segments - 1)

    def evaluate(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        s = self.segment_of(z)
        frac = (z - self.z_left[s]) / self.widths[s]
        out = self.v_left[s] + frac * (self.v_right[s] - self.v_left[s])
        out = np.where(z < self.z_left[0], self.u_left, out)
        return np.where(z > self.z_right[-1], self.u_right, out)

    def mass_at(self, z) -> np.ndarray:
        z = np.asarray(z, dtype=float)
        out = self.mass[self.segment_of(z)]
        out = np.where(z < self.z_left[0], self.m_left, out)
        return np.where(z > self.z_right[-1], self.m_right, out)


def linearize(components: PotentialComponents, N: int = 16) -> PiecewiseLinearPotential:
    """Split every layer into ``N`` equal sub-segments with secant fields.

    Node values are the sampled total potential (one-sided at layer
    boundaries); when the sample grid is not a multiple of ``N`` the node
    values are linearly interpolated from it.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    stack = components.stack
    tot = components.total_layers
    samples = components.layer_grid.shape[1] - 1
    t = np.linspace(0.0, 1.0, N + 1)
    zl, zr, vl, vr = [], [], [], []
    for p in range(stack.n_layers):
        zg = components.layer_grid[p]
        if samples % N == 0:
            step = samples // N
            z = zg[::step]
            v = tot[p][::step]
        else:
            z = zg[0] + t * (zg[-1] - zg[0])
            v = np.interp(z, zg, tot[p])
        zl.append(z[:-1]); zr.append(z[1:]); vl.append(v[:-1]); vr.append(v[1:])
    layer = np.repeat(np.arange(stack.n_layers), N)
    u = components.cladding_potential
    m_clad = stack.cladding.effective_mass
    return PiecewiseLinearPotential(
        np.concatenate(zl), np.concatenate(zr), np.concatenate(vl), np.concatenate(vr),
        stack.masses[layer], stack.dielectrics[layer], layer, u, u, m_clad, m_clad, N,
    )
