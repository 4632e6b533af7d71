"""Spontaneous plus piezoelectric polarization and the resulting internal fields."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .constants import EPS0, POLARIZATION_TO_E_NM2
from .materials import BinaryTable, MaterialParams
from .structure import LayerStack


@dataclass(frozen=True)
class FieldProfile:
    """Per-layer fields (V/nm), polarizations (C/m^2) and interface charges.

    ``sheet_charges[p]`` sits at boundary z_p, p = 0..N, and equals the
    polarization step P(right) - P(left) including the cladding media.
    """

    fields: np.ndarray
    polarizations: np.ndarray
    sheet_charges: np.ndarray
    thicknesses: np.ndarray
    dielectrics: np.ndarray

    @property
    def displacements(self) -> np.ndarray:
        """eps0 eps_p F_p + P_p for each layer, in e/nm^2."""
        return EPS0 * self.dielectrics * self.fields + self.polarizations * POLARIZATION_TO_E_NM2

    @property
    def voltage_sum(self) -> float:
        return float(np.sum(self.fields * self.thicknesses))


def piezoelectric_polarization(params: MaterialParams, substrate_lattice: float) -> float:
    """Biaxial-strain piezoelectric polarization of a pseudomorphic layer, C/m^2."""
    if substrate_lattice <= 0:
        raise ValueError("substrate lattice constant must be positive")
    strain = (substrate_lattice - params.a_lattice) / params.a_lattice
    return 2.0 * strain * (params.e31 - params.e33 * params.c13 / params.c33)


def layer_polarization(
    params: MaterialParams, substrate_lattice: float, table: BinaryTable | None = None
) -> float:
    """Total polarization P_sp + P_pz of one layer, C/m^2."""
    if table is not None and table.polarization_rule == "literal" and 0.0 < params.x < 1.0:
        x = params.x
        aln = table.aln.p_sp + piezoelectric_polarization(table.aln, substrate_lattice)
        gan = table.gan.p_sp + piezoelectric_polarization(table.gan, substrate_lattice)
        return aln + (1.0 - x) * gan
    return params.p_sp + piezoelectric_polarization(params, substrate_lattice)


def substrate_lattice(stack: LayerStack, substrate="cladding") -> float:
    """Lattice constant the layers are strained to.

    ``"cladding"`` uses the unstrained cladding medium, ``"average"`` the
    thickness-weighted mean of the layers; a number is taken as-is (nm).
    """
    if substrate == "cladding":
        return stack.cladding.a_lattice
    if substrate == "average":
        a = np.array([p.a_lattice for p in stack.params])
        return float(np.sum(a * stack.thicknesses) / stack.total_thickness)
    try:
        value = float(substrate)
    except (TypeError, ValueError):
        raise ValueError(f"unknown substrate option {substrate!r}") from None
    if value <= 0:
        raise ValueError("substrate lattice constant must be positive")
    return value


def stack_polarizations(
    stack: LayerStack, substrate="cladding", overrides: Sequence[float | None] | None = None
) -> np.ndarray:
    """Polarization of every layer, with optional per-layer overrides (C/m^2)."""
    a_sub = substrate_lattice(stack, substrate)
    pol = np.array([layer_polarization(p, a_sub, stack.table) for p in stack.params])
    if overrides is not None:
        if len(overrides) != stack.n_layers:
            raise ValueError(
                f"{len(overrides)} polarization overrides for {stack.n_layers} layers"
            )
        for i, value in enumerate(overrides):
            if value is not None:
                pol[i] = float(value)
    return pol


def cladding_polarization(stack: LayerStack, substrate="cladding") -> float:
    # the cladding is unstressed: only its spontaneous part when strained to itself
    return layer_polarization(stack.cladding, substrate_lattice(stack, substrate), stack.table)


def sheet_charges(polarizations: Sequence[float]) -> np.ndarray:
    """Polarization steps P[p+1] - P[p] of an ordered list including both claddings."""
    return np.diff(np.asarray(polarizations, dtype=float))


def internal_fields(
    stack: LayerStack,
    polarizations: Sequence[float],
    cladding_polarization_value: float | None = None,
) -> FieldProfile:
    """Fields from displacement continuity and zero total voltage across the layers.

    F_p = sum_k (P_k - P_p) d_k/eps_k / (eps0 eps_p sum_k d_k/eps_k)
    """
    pol = np.asarray(polarizations, dtype=float)
    if pol.shape != (stack.n_layers,):
        raise ValueError("need exactly one polarization per layer")
    d = stack.thicknesses
    eps = stack.dielectrics
    weights = d / eps
    pol_e = pol * POLARIZATION_TO_E_NM2
    fields = np.array(
        [np.sum((pol_e - pol_e[p]) * weights) for p in range(len(pol))]
    ) / (EPS0 * eps * np.sum(weights))
    clad = pol[0] if cladding_polarization_value is None else cladding_polarization_value
    sheets = sheet_charges(np.concatenate([[clad], pol, [clad]]))
    return FieldProfile(fields, pol, sheets, d, eps)


def stack_fields(stack: LayerStack, substrate="cladding", overrides=None) -> FieldProfile:
    """Convenience wrapper: polarizations of ``stack`` followed by :func:`internal_fields`."""
    pol = stack_polarizations(stack, substrate, overrides)
    return internal_fields(stack, pol, cladding_polarization(stack, substrate))
