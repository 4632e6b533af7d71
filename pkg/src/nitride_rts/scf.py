"""Self-consistent iteration between the bound states and the electrostatics."""

from __future__ import annotations

import csv
import io
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .constants import POLARIZATION_TO_E_NM2
from .poisson import (
    ChargeModel,
    Closure,
    HartreeSolution,
    donor_levels,
    electron_density,
    hartree_closed_form,
    solve_fermi_level,
)
from .polarization import FieldProfile, stack_fields
from .potential import (
    METHODS,
    SAMPLES_PER_LAYER,
    PiecewiseLinearPotential,
    PotentialComponents,
    linearize,
    xc_component,
)
from .schrodinger import SCAN_STEP, StationaryState, bound_states, partition_shift
from .structure import LayerStack

#: densities below this fraction of the maximum are left out of delta
SUPPORT_FRACTION = 1e-12


@dataclass(frozen=True)
class SCFConfig:
    """Iteration settings.

    ``hartree_sheets`` adds the polarization interface charges to the Poisson
    source. They are already the origin of the field term, so the default
    leaves them out to avoid counting them twice.
    """

    tolerance: float = 1e-6
    max_iterations: int = 60
    mixing: float = 0.5
    method: str = "full"
    n_partitions: int = 16
    samples_per_layer: int = SAMPLES_PER_LAYER
    energy_step: float = SCAN_STEP
    substrate: str | float = "cladding"
    polarization_overrides: tuple | None = None
    hartree_sheets: bool = False
    field_mode: str = "integral"
    check_partitions: bool = False

    def __post_init__(self):
        if not 0.0 < self.mixing <= 1.0:
            raise ValueError("mixing must lie in (0, 1]")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if int(self.max_iterations) < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {', '.join(METHODS)}")
        if int(self.n_partitions) < 1:
            raise ValueError("n_partitions must be at least 1")
        if int(self.samples_per_layer) < 1:
            raise ValueError("samples_per_layer must be at least 1")
        if not self.energy_step > 0:
            raise ValueError("energy_step must be positive")
        if self.field_mode not in ("integral", "literal"):
            raise ValueError("field_mode must be 'integral' or 'literal'")
        if self.polarization_overrides is not None:
            object.__setattr__(self, "polarization_overrides", tuple(self.polarization_overrides))

    @property
    def include_xc(self) -> bool:
        return self.method == "full"

    def to_dict(self) -> dict:
        out = asdict(self)
        if out["polarization_overrides"] is not None:
            out["polarization_overrides"] = list(out["polarization_overrides"])
        return out


@dataclass(frozen=True)
class SCFResult:
    stack: LayerStack = field(repr=False)
    config: SCFConfig
    charge: ChargeModel
    fields: FieldProfile = field(repr=False)
    potential: PotentialComponents = field(repr=False)
    linearized: PiecewiseLinearPotential = field(repr=False)
    states: list[StationaryState] = field(repr=False)
    fermi_level: float | None
    donors: np.ndarray = field(repr=False)
    density: np.ndarray = field(repr=False)
    input_density: np.ndarray = field(repr=False)
    delta_history: list[float]
    converged: bool
    iterations_used: int
    hartree: HartreeSolution | None = field(default=None, repr=False)
    partition_shift: float | None = None

    @property
    def energies(self) -> np.ndarray:
        return np.array([s.energy for s in self.states])

    @property
    def sheet_density(self) -> float:
        """Electrons per nm^2 in the bound subbands."""
        return float(np.sum(self.density_integral))

    @property
    def density_integral(self) -> np.ndarray:
        """Electron sheet density per layer (nm^-2), trapezoid rule on the grid."""
        z = self.potential.layer_grid
        return trapezoid(self.density, z, axis=1)

    def delta_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["iteration", "delta"])
        for i, d in enumerate(self.delta_history, start=1):
            writer.writerow([i, f"{d:.10g}"])
        return buf.getvalue()


def convergence_delta(n_prev, n_curr, support: float = SUPPORT_FRACTION) -> float:
    """max |n_curr - n_prev| / n_prev over points where n_prev >= support * max(n_prev).

    Two vanishing densities give 0; a density appearing from nothing gives inf.
    """
    n_prev = np.asarray(n_prev, dtype=float)
    n_curr = np.asarray(n_curr, dtype=float)
    top = np.max(n_prev) if n_prev.size else 0.0
    if top <= 0.0:
        return 0.0 if not np.any(n_curr > 0) else float("inf")
    mask = n_prev >= support * top
    return float(np.max(np.abs(n_curr[mask] - n_prev[mask]) / n_prev[mask]))


def grid_segments(samples: int, n_partitions: int, n_layers: int) -> np.ndarray:
    """Sub-segment index of every per-layer sample point, shape (n_layers, samples + 1)."""
    local = np.minimum(np.arange(samples + 1) * n_partitions // samples, n_partitions - 1)
    return np.arange(n_layers)[:, None] * n_partitions + local[None, :]


class _Evaluator:
    """Density and Hartree potential on the component grid."""

    def __init__(self, comps: PotentialComponents, charge: ChargeModel, config: SCFConfig, sheets):
        stack = comps.stack
        self.comps0 = comps
        self.charge = charge
        self.config = config
        self.sheets = sheets
        self.z = comps.layer_grid.ravel()
        self.seg = grid_segments(
            comps.layer_grid.shape[1] - 1, config.n_partitions, stack.n_layers
        ).ravel()
        self.shape = comps.layer_grid.shape
        self.mass = np.broadcast_to(stack.masses[:, None], self.shape)
        self.eps = np.broadcast_to(stack.dielectrics[:, None], self.shape)

    def solve(self, comps: PotentialComponents):
        plp = linearize(comps, self.config.n_partitions)
        states = bound_states(plp, self.config.energy_step)
        levels = donor_levels(self.charge, comps)
        closure = solve_fermi_level(states, self.charge, levels, comps.stack.thicknesses)
        return plp, states, closure

    def density(self, states, closure: Closure) -> np.ndarray:
        n = electron_density(
            states, closure.fermi_level, self.charge.temperature, self.z,
            mass=self.mass.ravel(), segment=self.seg,
        )
        return n.reshape(self.shape)

    def hartree(self, plp, states, closure: Closure):
        sol = hartree_closed_form(plp, states, closure.factors, closure.donors, self.sheets)
        return sol, sol(self.z, self.seg).reshape(self.shape)

    def xc(self, n):
        if not self.config.include_xc:
            return np.zeros(self.shape)
        return xc_component(n, self.eps, self.mass)


def run_scf(
    stack: LayerStack,
    charge: ChargeModel | None = None,
    config: SCFConfig | None = None,
    initial: SCFResult | None = None,
    callback=None,
) -> SCFResult:
    """Iterate bound states -> Fermi level and density -> V_H, V_HL until delta <= tolerance.

    Iteration 0 uses the band offset and the field term only. Each pass
    compares the output density with the input density of that pass; the
    first update takes the output density unmixed, later ones are mixed
    linearly with weight ``config.mixing`` (V_H is linear in the density, so
    mixing it is the same as mixing the density). ``initial`` seeds the
    iteration with the input density and potential of a previous result.
    ``callback(iteration, linearized, states, closure, hartree)`` is invoked
    after every Hartree solve.
    """
    charge = charge or ChargeModel()
    config = config or SCFConfig()
    T = charge.temperature
    fields = stack_fields(stack, config.substrate, config.polarization_overrides)
    comps = PotentialComponents.initial(
        stack, fields, T, config.samples_per_layer, config.method, config.field_mode
    )
    sheets = fields.sheet_charges * POLARIZATION_TO_E_NM2 if config.hartree_sheets else None
    ev = _Evaluator(comps, charge, config, sheets)

    n_in = np.zeros(comps.layer_grid.shape)
    vh_in = np.zeros_like(n_in)
    if initial is not None:
        if initial.potential.layer_grid.shape != n_in.shape:
            raise ValueError("seed result was computed on a different grid")
        n_in = initial.input_density.copy()
        vh_in = initial.potential.v_h.copy()
        comps = comps.with_terms(vh_in, initial.potential.v_hl)

    history: list[float] = []
    converged = False
    hart = None
    field_only = config.method == "field_only"
    n_iter = 1 if field_only else int(config.max_iterations)
    for _ in range(n_iter):
        plp, states, closure = ev.solve(comps)
        n_out = ev.density(states, closure)
        if field_only:
            converged = True
            break
        hart, vh_out = ev.hartree(plp, states, closure)
        if callback is not None:
            callback(len(history) + 1, plp, states, closure, hart)
        delta = convergence_delta(n_in, n_out)
        history.append(delta)
        if delta <= config.tolerance:
            converged = True
            break
        if not np.any(n_in > 0):
            n_in, vh_in = n_out, vh_out
        else:
            w = config.mixing
            n_in = (1 - w) * n_in + w * n_out
            vh_in = (1 - w) * vh_in + w * vh_out
        comps = comps.with_terms(vh_in, ev.xc(n_in))

    shift = None
    if config.check_partitions:
        shift = partition_shift(comps, config.n_partitions, config.energy_step)
    return SCFResult(
        stack=stack,
        config=config,
        charge=charge,
        fields=fields,
        potential=comps,
        linearized=plp,
        states=states,
        fermi_level=closure.fermi_level,
        donors=closure.donors,
        density=n_out,
        input_density=n_in,
        delta_history=history,
        converged=converged,
        iterations_used=1 if field_only else len(history),
        hartree=hart,
        partition_shift=shift,
    )
