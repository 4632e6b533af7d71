"""Self-consistent Schrodinger-Poisson solver for AlGaN/GaN resonance-tunneling stacks.

Piecewise-linear potentials are solved with Airy-function transfer matrices;
the Hartree potential uses the matching closed-form antiderivatives.
"""

from .estimator import SchrodingerPoissonSolver
from .materials import BinaryTable, MaterialParams, bandgap, conduction_offset, default_table, load_table
from .observables import (
    ScanRow,
    TransitionTable,
    design_criteria,
    detection_energy,
    geometry_scan,
    oscillator_strength,
)
from .poisson import ChargeModel, HartreeSolution, hartree_closed_form
from .polarization import FieldProfile, internal_fields, stack_fields
from .potential import PiecewiseLinearPotential, PotentialComponents, linearize
from .scf import SCFConfig, SCFResult, convergence_delta, run_scf
from .schrodinger import StationaryState, bound_states, dispersion_residual, fd_oracle
from .structure import Layer, LayerStack, cascade_stack

__version__ = "0.1.0"

__all__ = [
    "BinaryTable",
    "ChargeModel",
    "FieldProfile",
    "HartreeSolution",
    "Layer",
    "LayerStack",
    "MaterialParams",
    "PiecewiseLinearPotential",
    "PotentialComponents",
    "SCFConfig",
    "SCFResult",
    "ScanRow",
    "SchrodingerPoissonSolver",
    "StationaryState",
    "TransitionTable",
    "bandgap",
    "bound_states",
    "cascade_stack",
    "conduction_offset",
    "convergence_delta",
    "default_table",
    "design_criteria",
    "detection_energy",
    "dispersion_residual",
    "fd_oracle",
    "geometry_scan",
    "hartree_closed_form",
    "internal_fields",
    "linearize",
    "load_table",
    "oscillator_strength",
    "run_scf",
    "stack_fields",
]
