import numpy as np
import pytest

from nitride_rts.materials import default_table
from nitride_rts.structure import (
    CASCADE_WELL_BUDGET,
    MIN_THICKNESS,
    Layer,
    LayerStack,
    StructureError,
    cascade_stack,
    dielectric_profile,
    mass_profile,
)


def test_reference_cascade_geometry():
    s = cascade_stack(1.56)
    assert s.n_layers == 7
    np.testing.assert_allclose(s.thicknesses, [1.04, 1.56, 1.04, 1.04, 1.04, 1.04, 1.04])
    np.testing.assert_allclose(s.compositions, [1, 0, 1, 0.25, 1, 0.25, 1])
    assert s.total_thickness == pytest.approx(7.80, abs=1e-12)


@pytest.mark.parametrize("d", [0.6, 1.0, 1.56, 1.8])
def test_well_budget_conserved(d):
    s = cascade_stack(d)
    assert s.thicknesses[1] + s.thicknesses[5] == pytest.approx(CASCADE_WELL_BUDGET)


def test_vanishing_input_well_merges_barriers():
    s = cascade_stack(0.0)
    # the two barriers around the empty well fuse into one
    assert s.n_layers == 5
    assert s.thicknesses[0] == pytest.approx(2.08)
    assert s.total_thickness == pytest.approx(7.80)
    assert s.thicknesses[-2] == pytest.approx(CASCADE_WELL_BUDGET)


def test_vanishing_output_well():
    s = cascade_stack(CASCADE_WELL_BUDGET)
    assert s.n_layers == 5
    assert s.thicknesses[-1] == pytest.approx(2.08)


def test_out_of_range_width():
    with pytest.raises(StructureError):
        cascade_stack(2.7)
    with pytest.raises(StructureError):
        cascade_stack(-0.1)


def test_elision_without_merge():
    s = LayerStack.build([(1, 1.0), (0, MIN_THICKNESS / 2), (1, 1.0)], merge=False)
    assert s.n_layers == 2


def test_layer_validation():
    with pytest.raises(StructureError):
        Layer(1.5, 1.0)
    with pytest.raises(StructureError):
        Layer(0.5, 0.0)
    with pytest.raises(StructureError):
        LayerStack.build([(0.0, 0.001)])


def test_profiles_are_right_continuous():
    s = cascade_stack(1.56)
    t = default_table()
    z = s.boundaries
    assert mass_profile(s, 0.5 * (z[1] + z[2])) == t.gan.effective_mass
    assert mass_profile(s, -1.0) == t.aln.effective_mass
    assert mass_profile(s, z[1]) == t.gan.effective_mass
    eps_alloy = s.params[3].dielectric
    assert dielectric_profile(s, 0.5 * (z[3] + z[4])) == eps_alloy
    assert dielectric_profile(s, z[3]) == eps_alloy
    assert dielectric_profile(s, z[7] + 1.0) == t.aln.dielectric
    prof = mass_profile(s, np.linspace(-1, 9, 11))
    assert prof.shape == (11,)
