"""Hydrogenic dipole matrix elements between parabolic Rydberg states.

Parabolic states |n k m> (k = n1 - n2) are expanded over spherical states
|n l m> with Clebsch-Gordan coefficients of two fictitious spins
j = (n-1)/2.  Radial integrals use the Gordon hypergeometric closed form
(exact short polynomial sums for near-circular states), within-manifold
elements use the elementary closed form.  Everything is real; lengths are
in units of the Bohr radius.
"""

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np

N_SUPPORT = (47, 55)  # supported principal quantum number range


def _fact(n):
    if n < 0:
        raise ValueError("negative factorial")
    return math.factorial(n)


@lru_cache(maxsize=None)
def _cg_doubled(dj1, dm1, dj2, dm2, dJ, dM):
    """Clebsch-Gordan <j1 m1 j2 m2 | J M> from doubled integer arguments.

    Exact rational Racah sum; returns a float.  Valid for integer and
    half-integer spins alike.
    """
    if dm1 + dm2 != dM:
        return 0.0
    if not (abs(dj1 - dj2) <= dJ <= dj1 + dj2) or (dj1 + dj2 + dJ) % 2:
        return 0.0
    if abs(dm1) > dj1 or abs(dm2) > dj2 or abs(dM) > dJ:
        return 0.0

    def f2(x):  # factorial of a doubled-integer argument
        if x % 2:
            raise ValueError("half-integer factorial argument")
        return _fact(x // 2)

    pref = Fraction(
        (dJ + 1)
        * f2(dj1 + dj2 - dJ) * f2(dj1 - dj2 + dJ) * f2(-dj1 + dj2 + dJ)
        * f2(dJ + dM) * f2(dJ - dM)
        * f2(dj1 - dm1) * f2(dj1 + dm1) * f2(dj2 - dm2) * f2(dj2 + dm2),
        f2(dj1 + dj2 + dJ + 2),
    )

    kmin = max(0, -(dJ - dj2 + dm1) // 2, -(dJ - dj1 - dm2) // 2)
    kmax = min((dj1 + dj2 - dJ) // 2, (dj1 - dm1) // 2, (dj2 + dm2) // 2)
    s = Fraction(0)
    for k in range(kmin, kmax + 1):
        den = (
            _fact(k)
            * f2(dj1 + dj2 - dJ - 2 * k)
            * f2(dj1 - dm1 - 2 * k)
            * f2(dj2 + dm2 - 2 * k)
            * f2(dJ - dj2 + dm1 + 2 * k)
            * f2(dJ - dj1 - dm2 + 2 * k)
        )
        s += Fraction(-1 if k % 2 else 1, den)
    if s == 0:
        return 0.0
    val = pref * s * s
    return math.copysign(math.sqrt(float(val)), float(s))


def parabolic_to_spherical(n, k, m):
    """Expansion coefficients c_l of |n k m> over |n l m>, l = |m| .. n-1.

    Returns (ls, coeffs) arrays.  Uses j1 = j2 = (n-1)/2 with projections
    (m+k)/2 and (m-k)/2; the convention is fixed so that the in-manifold
    Stark eigenvalue of |n k m> is +(3/2) n k (checked by unit test).
    """
    n, k, m = int(n), int(k), int(m)
    dj = n - 1                       # doubled j
    dm1 = m + k
    dm2 = m - k
    ls = np.arange(abs(m), n)
    coeffs = np.array([_cg_doubled(dj, dm1, dj, dm2, 2 * int(l), 2 * m) for l in ls])
    return ls, coeffs


@lru_cache(maxsize=None)
def _hyp2f1_poly(a, b, c, x_num, x_den):
    """2F1(a, b; c; x) for nonpositive integer a (terminating series), exact."""
    if a > 0:
        raise ValueError("series does not terminate")
    x = Fraction(x_num, x_den)
    total = Fraction(1)
    term = Fraction(1)
    for j in range(-a):
        term *= Fraction((a + j) * (b + j), (c + j) * (j + 1)) * x
        total += term
    return total


@lru_cache(maxsize=None)
def radial_integral(n1, l1, n2, l2):
    """<n1 l1| r |n2 l2> in units of a0; nonzero only for |l1-l2| = 1.

    Same-n elements use (3/2) n sqrt(n^2 - l^2); n1 != n2 uses Gordon's
    formula with log-space prefactors and exact hypergeometric sums.
    """
    n1, l1, n2, l2 = int(n1), int(l1), int(n2), int(l2)
    if abs(l1 - l2) != 1:
        return 0.0
    if l1 < l2:  # arrange l1 = l, l2 = l-1
        n1, l1, n2, l2 = n2, l2, n1, l1
    n, l = n1, l1
    np_, lp = n2, l2  # lp = l-1
    if not (0 <= lp < n and l < n and lp < np_):
        return 0.0
    if n == np_:
        return 1.5 * n * math.sqrt(n * n - l * l)

    nr = n - l - 1
    nrp = np_ - l
    x_num, x_den = -4 * n * np_, (n - np_) ** 2
    f1 = _hyp2f1_poly(-nr, -nrp, 2 * l, x_num, x_den)
    f2 = _hyp2f1_poly(-nr - 2, -nrp, 2 * l, x_num, x_den)
    bracket = f1 - Fraction((n - np_) ** 2, (n + np_) ** 2) * f2
    if bracket == 0:
        return 0.0

    log_pref = (
        -math.log(4.0)
        - math.lgamma(2 * l)
        + 0.5 * (math.lgamma(n + l + 1) + math.lgamma(np_ + l)
                 - math.lgamma(n - l) - math.lgamma(np_ - l + 1))
        + (l + 1) * math.log(4.0 * n * np_)
        + (n + np_ - 2 * l - 2) * math.log(abs(n - np_))
        - (n + np_) * math.log(n + np_)
    )
    sign = -1.0 if (np_ - l) % 2 else 1.0            # (-1)^(n'-l)
    if n < np_ and (n + np_ - 2 * l - 2) % 2:        # sign of (n-n')^power
        sign = -sign
    if bracket < 0:
        sign = -sign
    return sign * math.exp(log_pref + math.log(abs(float(bracket))))


def _angular_z(l_from, m, l_to):
    """<l_to m| cos(theta) |l_from m>."""
    l = min(l_from, l_to)
    if abs(l_from - l_to) != 1:
        return 0.0
    return math.sqrt(((l + 1) ** 2 - m * m) / ((2 * l + 1) * (2 * l + 3)))


def _angular_c(q, l_from, m_from, l_to):
    """<l_to, m_from+q | C_q | l_from, m_from>, C_q = sqrt(4 pi / 3) Y_1q."""
    l, m = l_from, m_from
    s2 = math.sqrt(2.0)
    if q == 0:
        return _angular_z(l, m, l_to)
    if q == +1:
        if l_to == l + 1:
            return -math.sqrt((l + m + 1) * (l + m + 2) / ((2 * l + 1) * (2 * l + 3))) / s2
        if l_to == l - 1:
            return math.sqrt((l - m) * (l - m - 1) / ((2 * l - 1) * (2 * l + 1))) / s2
        return 0.0
    if q == -1:
        # fixed by the adjoint relation <a|C_-1|b> = -<b|C_+1|a> (real basis)
        if l_to == l + 1:
            return -math.sqrt((l - m + 1) * (l - m + 2) / ((2 * l + 1) * (2 * l + 3))) / s2
        if l_to == l - 1:
            return math.sqrt((l + m) * (l + m - 1) / ((2 * l - 1) * (2 * l + 1))) / s2
        return 0.0
    raise ValueError("q must be -1, 0 or +1")


@lru_cache(maxsize=None)
def _element_cached(na, ka, ma, nb, kb, mb, q):
    lsa, ca = parabolic_to_spherical(na, ka, ma)
    lsb, cb = parabolic_to_spherical(nb, kb, mb)
    total = 0.0
    for la, cla in zip(lsa, ca):
        if cla == 0.0:
            continue
        for lb, clb in zip(lsb, cb):
            if clb == 0.0 or abs(la - lb) != 1:
                continue
            ang = _angular_c(q, lb, mb, la)
            if ang == 0.0:
                continue
            total += cla * clb * ang * radial_integral(na, la, nb, lb)
    return total


def dipole_element(state_a, state_b, q):
    """<a| r C_q |b> in units of a0 for parabolic states (n, k, m).

    q must equal m_a - m_b, otherwise the element vanishes.  Selection
    rules (parity of k, |Delta m| <= 1) are applied implicitly.
    """
    na, ka, ma = state_a
    nb, kb, mb = state_b
    if ma - mb != q:
        return 0.0
    return _element_cached(na, ka, ma, nb, kb, mb, q)


def pair_coupling(state_a, state_b):
    """(d_pi, d_sigma) couplings seen by a z-polarized drive tilted by theta.

    d_pi is the <a| r C_0 |b> element (Delta m = 0).  d_sigma is the element
    of the transverse linear component, r (C_-1 - C_+1)/sqrt(2); it is
    symmetric in a, b because that operator is Hermitian and real.
    """
    dm = state_a[2] - state_b[2]
    if dm == 0:
        return dipole_element(state_a, state_b, 0), 0.0
    if dm == +1:
        return 0.0, -dipole_element(state_a, state_b, +1) / math.sqrt(2.0)
    if dm == -1:
        return 0.0, dipole_element(state_a, state_b, -1) / math.sqrt(2.0)
    return 0.0, 0.0
