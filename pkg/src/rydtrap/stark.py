"""Rydberg level data: Stark shifts, spontaneous emission, dipole couplings.

Levels are hydrogenic parabolic states (n, k, m), k = n1 - n2.  The working
levels are the circular pair e (n=51, m=50) and g (n=50, m=49), plus the
strongly polar auxiliary level i (n=51, m=49, k=-1) used by the microwave
dressing.  Quantum defects are ignored (circular-state accuracy is far
better than any tolerance used here).
"""

from dataclasses import dataclass

import numpy as np

from . import dipoles
from .constants import STARK1_AU_TO_SI, STARK2_AU_TO_SI, TWO_PI
from .errors import FieldRangeError, RydtrapError

#: bare e/g transition (rad/s) and radiative lifetime (s)
OMEGA_EG_0 = TWO_PI * 51.099e9
T_SP = 30e-3
GAMMA_SP = 1.0 / T_SP

#: effective Rydberg constant (Hz) pinned so the 50 -> 51 gap is 51.099 GHz
RYDBERG_EFF_HZ = 51.099e9 * (50**2 * 51**2) / (51**2 - 50**2)

DEFAULT_FIELD_CAP = 1e4  # V/m, Inglis-Teller-like validity cap
I_LEVEL_K = -1           # slope sign fixed by the red-detuned dressing scheme


@dataclass(frozen=True)
class RydbergLevel:
    """Parabolic Rydberg state; label is a display tag (e, g, i, ...)."""
    n: int
    m: int
    k: int
    label: str = ""

    def __post_init__(self):
        if abs(self.m) > self.n - 1:
            raise RydtrapError(f"|m| <= n-1 violated for {self}")
        kcap = self.n - 1 - abs(self.m)
        if abs(self.k) > kcap or (self.k - kcap) % 2:
            raise RydtrapError(f"invalid parabolic k for {self}")

    @property
    def state(self):
        return (self.n, self.k, self.m)


LEVEL_E = RydbergLevel(51, 50, 0, "e")
LEVEL_G = RydbergLevel(50, 49, 0, "g")


def level_i(k=I_LEVEL_K):
    return RydbergLevel(51, 49, k, "i")


def first_order_coeff(n, k):
    """Linear Stark coefficient, rad/s per (V/m)."""
    return 1.5 * n * k * STARK1_AU_TO_SI


def second_order_coeff(n, m, k):
    """Quadratic Stark coefficient, rad/s per (V/m)^2 (negative: high-field seeker)."""
    return -(n**4 / 16.0) * (17 * n**2 - 3 * k**2 - 9 * m**2 + 19) * STARK2_AU_TO_SI


def manifold_offset(n):
    """Bare manifold energy relative to n=50, rad/s."""
    return TWO_PI * RYDBERG_EFF_HZ * (1.0 / 50**2 - 1.0 / n**2)


class StarkModel:
    """Stark shifts and S.E. rates for the supported level set."""

    def __init__(self, field_cap=DEFAULT_FIELD_CAP, gamma_s=0.0, i_k=I_LEVEL_K,
                 omega_eg0=OMEGA_EG_0, t_sp=T_SP):
        self.field_cap = field_cap
        self.gamma_s = gamma_s
        self.omega_eg0 = omega_eg0
        self.gamma_sp = 1.0 / t_sp
        self.t_sp = t_sp
        self.i = level_i(i_k)
        self.e = LEVEL_E
        self.g = LEVEL_G

    def _check_field(self, E):
        E = np.asarray(E, dtype=float)
        if np.any(E < 0):
            raise FieldRangeError("field magnitude must be >= 0")
        if np.any(E > self.field_cap):
            raise FieldRangeError(f"field above validity cap {self.field_cap} V/m")
        return E

    def stark_shift(self, level, E):
        """Level shift (rad/s) at field magnitude E (V/m); first + second order."""
        E = self._check_field(E)
        return (first_order_coeff(level.n, level.k) * E
                + second_order_coeff(level.n, level.m, level.k) * E * E)

    def level_energy(self, level, E):
        """manifold offset + Stark shift, rad/s relative to the bare n=50 manifold."""
        return manifold_offset(level.n) + self.stark_shift(level, E)

    def omega_eg(self, E):
        """Bare (undressed) e/g transition frequency at field E, rad/s."""
        E = self._check_field(E)
        d2 = second_order_coeff(51, 50, 0) - second_order_coeff(50, 49, 0)
        return self.omega_eg0 + d2 * E * E

    def differential_polarizability(self):
        """d^2(omega_e - omega_g)/dE^2 / 2 at E=0, rad/s per (V/m)^2."""
        return second_order_coeff(51, 50, 0) - second_order_coeff(50, 49, 0)

    def undressed_broadening(self, E_a, dE):
        """Linewidth scale 2*|d(omega_eg)/dE|*dE at E_a (rad/s)."""
        return abs(2.0 * self.differential_polarizability() * E_a) * dE

    def residual_se_rate(self, theta, gamma_s=None):
        """Gamma = Gamma_sp sin^2(theta) + Gamma_s, in 1/s."""
        gs = self.gamma_s if gamma_s is None else gamma_s
        if gs < 0:
            raise RydtrapError("surface rate must be >= 0")
        return self.gamma_sp * np.sin(theta) ** 2 + gs

    def lifetime(self, theta, gamma_s=None):
        rate = self.residual_se_rate(theta, gamma_s)
        return np.where(rate > 0, 1.0 / np.maximum(rate, 1e-300), np.inf)


def dipole_matrix_element(level_a, level_b, polarization):
    """Reduced dipole coupling <a| r C_q |b> in units of e*a0.

    polarization: 'pi' (Delta m = 0), 'sigma+' or 'sigma-' (|Delta m| = 1,
    labelled by the m change from b to a).  Zero when selection rules
    forbid the pairing; symmetric under exchange of the two levels.
    """
    for lv in (level_a, level_b):
        if not (dipoles.N_SUPPORT[0] <= lv.n <= dipoles.N_SUPPORT[1]):
            raise FieldRangeError(f"n={lv.n} outside supported range {dipoles.N_SUPPORT}")
    q = {"pi": 0, "sigma+": +1, "sigma-": -1}[polarization]
    dm = level_a.m - level_b.m
    if q == 0:
        return dipoles.dipole_element(level_a.state, level_b.state, 0) if dm == 0 else 0.0
    # sigma channels: report the Cartesian transverse component (the
    # coupling to a linearly polarized transverse unit field), which is the
    # convention of the circular-circular n^2/2 formula
    if dm == q:
        hi, lo = level_a, level_b
    elif dm == -q:
        hi, lo = level_b, level_a
    else:
        return 0.0
    sign = -1.0 if (hi.m - lo.m) == +1 else 1.0
    qq = hi.m - lo.m
    return sign * dipoles.dipole_element(hi.state, lo.state, qq) / np.sqrt(2.0)
