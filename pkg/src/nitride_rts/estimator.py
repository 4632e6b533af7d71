"""scikit-learn style front end to the self-consistent solver."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import _validation as v
from .materials import load_table
from .observables import TransitionTable
from .poisson import ChargeModel
from .potential import METHODS
from .scf import SCFConfig, run_scf


class SchrodingerPoissonSolver(BaseEstimator):
    """Self-consistent bound states of a nitride layer stack.

    ``fit`` takes a :class:`~nitride_rts.structure.LayerStack` or an
    ``(n_layers, 2)`` array of ``[Al fraction, thickness in nm]``. After
    fitting, ``predict(z)`` returns the total potential (eV) and
    ``transform(z)`` the wave functions as columns.

    Examples
    --------
    >>> from nitride_rts import SchrodingerPoissonSolver, cascade_stack
    >>> est = SchrodingerPoissonSolver(method="field_only").fit(cascade_stack())
    >>> len(est.energies_)
    5
    """

    def __init__(
        self,
        method="full",
        temperature=300.0,
        n_d=5e-3,
        doped_layers=(1,),
        donor_binding=0.025,
        donor_level=None,
        fermi_level=None,
        tolerance=1e-6,
        max_iterations=60,
        mixing=0.5,
        n_partitions=16,
        energy_step=1e-3,
        substrate="cladding",
        polarization_overrides=None,
        hartree_sheets=False,
        materials=None,
    ):
        self.method = method
        self.temperature = temperature
        self.n_d = n_d
        self.doped_layers = doped_layers
        self.donor_binding = donor_binding
        self.donor_level = donor_level
        self.fermi_level = fermi_level
        self.tolerance = tolerance
        self.max_iterations = max_iterations
        self.mixing = mixing
        self.n_partitions = n_partitions
        self.energy_step = energy_step
        self.substrate = substrate
        self.polarization_overrides = polarization_overrides
        self.hartree_sheets = hartree_sheets
        self.materials = materials

    def _configs(self):
        v.check_choice(self.method, "method", METHODS)
        charge = ChargeModel(
            n_d=v.check_positive(self.n_d, "n_d", strict=False),
            doped_layers=tuple(self.doped_layers),
            donor_binding=float(self.donor_binding),
            donor_level=self.donor_level,
            temperature=v.check_positive(self.temperature, "temperature"),
            fermi_level=self.fermi_level,
        )
        config = SCFConfig(
            tolerance=v.check_positive(self.tolerance, "tolerance"),
            max_iterations=v.check_int(self.max_iterations, "max_iterations"),
            mixing=v.check_in_range(self.mixing, "mixing", 0.0, 1.0, closed_lo=False),
            method=self.method,
            n_partitions=v.check_int(self.n_partitions, "n_partitions"),
            energy_step=v.check_positive(self.energy_step, "energy_step"),
            substrate=self.substrate,
            polarization_overrides=self.polarization_overrides,
            hartree_sheets=bool(self.hartree_sheets),
        )
        return charge, config

    def fit(self, X, y=None):
        """Run the self-consistent iteration for the stack ``X``; ``y`` is ignored."""
        charge, config = self._configs()
        table = load_table(self.materials) if self.materials is not None else None
        stack = v.as_stack(X, table)
        result = run_scf(stack, charge, config)
        self.result_ = result
        self.stack_ = stack
        self.states_ = result.states
        self.energies_ = result.energies
        self.potential_ = result.potential
        self.fermi_level_ = result.fermi_level
        self.delta_history_ = np.asarray(result.delta_history)
        self.converged_ = result.converged
        self.n_iter_ = result.iterations_used
        self.transitions_ = TransitionTable.from_states(result.states)
        self.n_layers_in_ = stack.n_layers
        return self

    def predict(self, z):
        """Total effective potential (eV) at positions ``z`` (nm)."""
        check_is_fitted(self, "result_")
        return self.result_.linearized.evaluate(v.check_points(z))

    def transform(self, z):
        """Wave functions at ``z``, shape (len(z), n_states), in nm^-1/2."""
        check_is_fitted(self, "result_")
        z = v.check_points(z)
        if not self.states_:
            return np.zeros((len(z), 0))
        return np.column_stack([s.psi(z) for s in self.states_])

    def fit_transform(self, X, y=None, z=None):
        self.fit(X, y)
        if z is None:
            z = self.potential_.grid
        return self.transform(z)

    def score(self, X=None, y=None):
        """Detected transition energy E_3 - E_1 in eV (nan with fewer than 3 states)."""
        check_is_fitted(self, "result_")
        e = self.energies_
        return float(e[2] - e[0]) if len(e) >= 3 else float("nan")
