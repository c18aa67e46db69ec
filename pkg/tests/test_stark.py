"""Stark model: shifts, polarizabilities, spontaneous emission."""

import numpy as np
import pytest

from rydtrap.constants import TWO_PI
from rydtrap.errors import FieldRangeError
from rydtrap.stark import (LEVEL_E, LEVEL_G, RydbergLevel, StarkModel,
                           first_order_coeff, level_i, second_order_coeff)

from oracles import stark_shifts_spherical, AU_FIELD

HARTREE_RAD = 4.1341373335e16  # a.u. energy in rad/s


@pytest.fixture(scope="module")
def model():
    return StarkModel()


def test_level_invariants():
    assert LEVEL_E.n == 51 and LEVEL_E.m == 50 and LEVEL_E.k == 0
    assert LEVEL_G.n == 50 and LEVEL_G.m == 49 and LEVEL_G.k == 0
    with pytest.raises(Exception):
        RydbergLevel(50, 50, 0)          # |m| > n-1
    with pytest.raises(Exception):
        RydbergLevel(51, 49, 0)          # parity of k violated
    with pytest.raises(Exception):
        RydbergLevel(51, 49, 3)          # |k| beyond cap


def test_zero_field_shift_is_zero(model):
    assert model.stark_shift(LEVEL_G, 0.0) == 0.0
    assert model.stark_shift(LEVEL_E, 0.0) == 0.0


def test_circular_states_have_no_linear_shift():
    for lev in (LEVEL_E, LEVEL_G):
        assert first_order_coeff(lev.n, lev.k) == 0.0


def test_quadratic_coefficient_matches_published_alpha(model):
    # fit alpha over E in [0, 500] V/m; paper quotes -0.2 kHz/(V/m)^2
    E = np.linspace(0.0, 500.0, 26)
    for lev in (LEVEL_E, LEVEL_G):
        shifts = model.stark_shift(lev, E)
        alpha = np.polyfit(E, shifts, 2)[0] / TWO_PI  # Hz/(V/m)^2
        assert alpha == pytest.approx(-200.0, rel=0.25)


def test_level_i_slope_about_1MHz_per_V_m(model):
    slope = first_order_coeff(model.i.n, model.i.k) / TWO_PI
    assert abs(slope) == pytest.approx(1e6, rel=0.05)
    assert slope < 0  # red-detuned dressing needs the downhill state


def test_second_order_even_in_k_first_order_odd():
    for k in (1, 3):
        assert second_order_coeff(51, 47, k) == second_order_coeff(51, 47, -k)
        assert first_order_coeff(51, k) == -first_order_coeff(51, -k)


def test_e_and_g_are_high_field_seekers():
    assert second_order_coeff(51, 50, 0) < 0
    assert second_order_coeff(50, 49, 0) < 0


def test_differential_polarizability_gives_20kHz_broadening(model):
    # 2 * |d(omega_eg)/dE| * dE at E_a = 400 V/m, dE = 1 V/m
    width = model.undressed_broadening(400.0, 1.0)
    assert width / TWO_PI == pytest.approx(2 * 20e3, rel=1.0)
    # one-sided shift for +1 V/m is about 20 kHz
    one_sided = abs(model.omega_eg(401.0) - model.omega_eg(400.0)) / TWO_PI
    assert one_sided == pytest.approx(20e3, rel=0.5)


def test_differential_polarizability_of_level_with_itself_is_zero():
    assert second_order_coeff(51, 50, 0) - second_order_coeff(51, 50, 0) == 0.0


def test_field_cap_raises(model):
    with pytest.raises(FieldRangeError):
        model.stark_shift(LEVEL_G, 2e4)
    with pytest.raises(FieldRangeError):
        model.stark_shift(LEVEL_G, -1.0)


# --- perturbative formula vs spherical-basis diagonalization (oracle) ------

@pytest.mark.parametrize("n0, m, ks", [
    (50, 49, [0]),
    (51, 49, [-1, 1]),
    (51, 50, [0]),
])
def test_stark_shift_vs_manifold_diagonalization(model, n0, m, ks):
    """Second-order formula agrees with diagonalization to 1e-3 at 50 V/m."""
    E = 50.0
    diag = stark_shifts_spherical(n0, m, E, window=4) * HARTREE_RAD
    pert = np.sort([model.stark_shift(RydbergLevel(n0, m, k), E) for k in ks])
    scale = np.maximum(np.abs(pert), np.abs(second_order_coeff(n0, m, 0) * E * E))
    assert np.all(np.abs(diag - pert) / scale < 1e-3)


# --- spontaneous emission ---------------------------------------------------

def test_residual_se_rate_zero_at_zero_angle(model):
    assert model.residual_se_rate(0.0, 0.0) == 0.0
    assert model.lifetime(0.0, 0.0) == np.inf


def test_residual_lifetime_300s_at_10mrad(model):
    # Gamma = Gamma_sp sin^2(theta): 1/Gamma = 300 s at theta = 10 mrad
    assert model.lifetime(0.010, 0.0) == pytest.approx(300.0, rel=0.01)


def test_full_rate_restored_at_90_degrees(model):
    assert model.residual_se_rate(np.pi / 2, 0.0) == pytest.approx(1.0 / 30e-3)


def test_rate_monotone_in_theta(model):
    thetas = np.linspace(0, np.pi / 2, 50)
    rates = model.residual_se_rate(thetas, 0.0)
    assert np.all(np.diff(rates) > 0)


def test_surface_rate_passthrough(model):
    assert model.residual_se_rate(0.0, 0.5) == 0.5
