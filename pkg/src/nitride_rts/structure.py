"""Layered geometry of a plane resonance-tunneling structure."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .materials import BinaryTable, MaterialParams, default_table, interpolate

#: layers thinner than this (nm) are dropped when a stack is built
MIN_THICKNESS = 0.01

#: barrier and inner-well width of the reference cascade, nm
CASCADE_BARRIER = 1.04
CASCADE_INNER_WELL = 1.04
#: combined width of the input and output wells, nm
CASCADE_WELL_BUDGET = 2.60
CASCADE_ACTIVE_WELL = 1.56
CASCADE_ALLOY = 0.25


class StructureError(ValueError):
    pass


@dataclass(frozen=True)
class Layer:
    x: float
    thickness: float
    role: str = ""

    def __post_init__(self):
        if not 0.0 <= self.x <= 1.0:
            raise StructureError(f"Al fraction {self.x} outside [0, 1]")
        if not self.thickness > 0:
            raise StructureError("layer thickness must be positive")


@dataclass(frozen=True)
class LayerStack:
    """Ordered layers between two semi-infinite cladding media.

    ``params`` holds the interpolated constants of each layer and ``cladding``
    those of both outer media. Boundary coordinates start at z0 = 0.
    """

    layers: tuple[Layer, ...]
    params: tuple[MaterialParams, ...]
    cladding: MaterialParams
    table: BinaryTable

    @classmethod
    def build(
        cls,
        layers: Iterable[Layer | Sequence],
        table: BinaryTable | None = None,
        cladding_x: float = 1.0,
        merge: bool = True,
    ) -> "LayerStack":
        """Create a stack, eliding layers thinner than ``MIN_THICKNESS`` nm.

        Neighbouring layers of identical composition left behind by the
        elision are merged when ``merge`` is true.
        """
        table = table or default_table()
        items = [item if isinstance(item, Layer) else tuple(item) for item in layers]
        kept = [
            item if isinstance(item, Layer) else Layer(*item)
            for item in items
            if (item.thickness if isinstance(item, Layer) else float(item[1])) >= MIN_THICKNESS
        ]
        if merge and len(kept) < len(items):
            merged: list[Layer] = []
            for layer in kept:
                if merged and merged[-1].x == layer.x:
                    prev = merged.pop()
                    layer = Layer(prev.x, prev.thickness + layer.thickness, prev.role)
                merged.append(layer)
            kept = merged
        if not kept:
            raise StructureError("stack has no layer thicker than the elision threshold")
        params = tuple(interpolate(layer.x, table) for layer in kept)
        return cls(tuple(kept), params, interpolate(cladding_x, table), table)

    @property
    def n_layers(self) -> int:
        return len(self.layers)

    @property
    def thicknesses(self) -> np.ndarray:
        return np.array([layer.thickness for layer in self.layers])

    @property
    def boundaries(self) -> np.ndarray:
        """Coordinates z0..zN of the layer boundaries, nm."""
        return np.concatenate([[0.0], np.cumsum(self.thicknesses)])

    @property
    def total_thickness(self) -> float:
        return float(self.boundaries[-1])

    @property
    def compositions(self) -> np.ndarray:
        return np.array([layer.x for layer in self.layers])

    @property
    def masses(self) -> np.ndarray:
        return np.array([p.effective_mass for p in self.params])

    @property
    def dielectrics(self) -> np.ndarray:
        return np.array([p.dielectric for p in self.params])

    def region(self, z) -> np.ndarray:
        """Region index of ``z``: 0 left cladding, p for layer p, N+1 right cladding.

        Intervals are half-open, [z_{p-1}, z_p), so a boundary belongs to the
        region on its right.
        """
        return np.searchsorted(self.boundaries, np.asarray(z, dtype=float), side="right")

    def _profile(self, values: np.ndarray, clad: float, z):
        table = np.concatenate([[clad], values, [clad]])
        out = table[self.region(z)]
        return float(out) if np.ndim(out) == 0 else out


def mass_profile(stack: LayerStack, z):
    """Effective mass m(z) in free-electron masses."""
    return stack._profile(stack.masses, stack.cladding.effective_mass, z)


def dielectric_profile(stack: LayerStack, z):
    """Relative permittivity eps(z)."""
    return stack._profile(stack.dielectrics, stack.cladding.dielectric, z)


def cascade_stack(d: float = CASCADE_ACTIVE_WELL, table: BinaryTable | None = None) -> LayerStack:
    """Three-well AlN/GaN/AlGaN cascade with input-well width ``d`` (nm).

    The output well takes the rest of the fixed 2.60 nm well budget; barriers
    and the inner Al0.25Ga0.75N well keep their 1.04 nm widths.
    """
    if not 0.0 <= d <= CASCADE_WELL_BUDGET + 1e-12:
        raise StructureError(f"d = {d} nm outside [0, {CASCADE_WELL_BUDGET}]")
    out_well = max(CASCADE_WELL_BUDGET - d, 0.0)
    b = CASCADE_BARRIER
    layers = [
        (1.0, b, "barrier"),
        (0.0, d, "well"),
        (1.0, b, "barrier"),
        (CASCADE_ALLOY, CASCADE_INNER_WELL, "well"),
        (1.0, b, "barrier"),
        (CASCADE_ALLOY, out_well, "well"),
        (1.0, b, "barrier"),
    ]
    return LayerStack.build(layers, table)
