"""Unit conversions and physical constants.

All internal math runs in Hartree atomic units (Ha, bohr, m_e, a.u. time);
angstrom and femtoseconds appear only at I/O boundaries.
"""

ANGSTROM_PER_BOHR = 0.52917721067
BOHR_PER_ANGSTROM = 1.0 / ANGSTROM_PER_BOHR

# 1 a.u. of time = 2.4188843265857e-2 fs
FS_PER_AU_TIME = 2.4188843265857e-2
AU_TIME_PER_FS = 1.0 / FS_PER_AU_TIME

# Boltzmann constant in Ha / K
KB_HA_PER_K = 3.166811563e-6

PROTON_MASS_ME = 1836.15267343

# SI values used only for the thermal excited-state population p = 1/(e^{hf/kT}+1)
PLANCK_J_S = 6.62607015e-34
KB_J_PER_K = 1.380649e-23
