import numpy as np
import pytest

from nitride_rts.potential import PotentialComponents, linearize
from nitride_rts.poisson import hartree_fd
from nitride_rts.polarization import stack_fields
from nitride_rts.scf import SCFConfig, run_scf
from nitride_rts.structure import cascade_stack


@pytest.fixture(scope="session")
def stack():
    return cascade_stack()


@pytest.fixture(scope="session")
def field_only_result(stack):
    return run_scf(stack, config=SCFConfig(method="field_only"))


def hartree_mismatch(plp, states, closure, hart):
    """max |closed form - FD| / max |V_H| on the FD nodes."""
    nodes, v_fd = hartree_fd(plp, states, closure.factors, closure.donors)
    seg = np.minimum(plp.segment_of(nodes), plp.n_segments - 1)
    v = hart(nodes, seg)
    return float(np.max(np.abs(v - v_fd)) / np.max(np.abs(v)))


@pytest.fixture(scope="session")
def full_run(stack):
    """Default full solve plus the Hartree oracle mismatch of every iteration."""
    errors = []
    res = run_scf(stack, callback=lambda it, *a: errors.append(hartree_mismatch(*a)))
    return res, errors


@pytest.fixture(scope="session")
def full_result(full_run):
    return full_run[0]


@pytest.fixture(scope="session")
def plain_result(stack):
    """Full method with plain (unmixed) iteration."""
    return run_scf(stack, config=SCFConfig(mixing=1.0))


@pytest.fixture(scope="session")
def order0_potential(stack):
    comps = PotentialComponents.initial(stack, stack_fields(stack), 300.0)
    return linearize(comps, 16)


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)
