"""Physical constants (CODATA 2018) and derived conversion factors.

All package-internal quantities are SI; level shifts and transition
frequencies are angular (rad/s) unless a name says otherwise.
"""

import numpy as np

# CODATA 2018
HBAR = 1.054571817e-34          # J s
H_PLANCK = 6.62607015e-34       # J s
KB = 1.380649e-23               # J/K
E_CHARGE = 1.602176634e-19      # C
A_BOHR = 5.29177210903e-11      # m
HARTREE = 4.3597447222071e-18   # J
C_LIGHT = 299792458.0           # m/s
AMU = 1.66053906660e-27         # kg
G_EARTH = 9.81                  # m/s^2, gravity magnitude (antiparallel to Oz)

# atomic unit of electric field
E_FIELD_AU = HARTREE / (E_CHARGE * A_BOHR)            # 5.142e11 V/m

# conversion: Stark coefficients in atomic units -> SI angular frequency
# first order:  (3/2) n k F  [a.u.]  ->  rad/s per (V/m)
STARK1_AU_TO_SI = HARTREE / (HBAR * E_FIELD_AU)       # ~8.0396e4
# second order: coefficient of F^2 [a.u.] -> rad/s per (V/m)^2
STARK2_AU_TO_SI = HARTREE / (HBAR * E_FIELD_AU**2)    # ~1.5634e-7

# rubidium-85 (species is a config default, not a physics constraint)
MASS_RB85 = 84.911789738 * AMU
RECOIL_780NM = H_PLANCK / (MASS_RB85 * 780.241e-9)    # ~6.0 mm/s

TWO_PI = 2.0 * np.pi
