"""Physical constants in the package's working units.

Lengths are in nm, energies in eV, masses in free-electron masses, charge
densities in elementary charges per nm^3 and polarizations are stored in C/m^2.
"""

from scipy.constants import (
    e as E_CHARGE,
    electron_mass,
    epsilon_0,
    hbar,
    k as BOLTZMANN,
    physical_constants,
)

#: hbar^2 / (2 m0), eV nm^2
HBAR2_2M0 = hbar**2 / (2.0 * electron_mass) / E_CHARGE * 1e18

#: vacuum permittivity in e / (V nm)
EPS0 = epsilon_0 / E_CHARGE * 1e-9

#: Boltzmann constant, eV/K
KB = BOLTZMANN / E_CHARGE

#: Bohr radius, nm
BOHR_RADIUS = physical_constants["Bohr radius"][0] * 1e9

#: converts a polarization in C/m^2 into e/nm^2
POLARIZATION_TO_E_NM2 = 1e-18 / E_CHARGE
