"""Trajectory integration and trap characterization."""

import numpy as np
import pytest

from rydtrap.constants import G_EARTH, HBAR, KB, MASS_RB85, TWO_PI
from rydtrap.dynamics import (StarkPotential, integrate_batch,
                              integrate_trajectory, mean_theta,
                              stern_gerlach_separation, trap_depth,
                              trap_frequencies, _dominant_frequency)
from rydtrap.errors import DiagnosticError, UnstableTrapError
from rydtrap.fieldmodel import AnalyticFieldModel, DriveWaveforms
from rydtrap.stark import LEVEL_E, LEVEL_G, StarkModel

from oracles import mathieu_secular_frequency


class UniformFieldModel:
    """Homogeneous static field: no Stark force at all."""

    def __init__(self, E0=400.0, f1=430.0):
        self.drives = DriveWaveforms(f1=f1, eta=1.0)

    def e2_and_grad(self, xyz, t):
        xyz = np.atleast_2d(xyz)
        return np.full(len(xyz), 400.0 ** 2), np.zeros_like(xyz)

    def magnitude_angle(self, xyz, t):
        n = len(np.atleast_2d(xyz))
        return np.full(n, 400.0), np.zeros(n)

    def field(self, xyz, t):
        out = np.zeros_like(np.atleast_2d(xyz))
        out[:, 2] = 400.0
        return out

    def in_domain(self, xyz):
        return np.ones(len(np.atleast_2d(xyz)), dtype=bool)


class HarmonicPotential:
    """Test double: exact isotropic-by-axis harmonic trap, no gravity."""

    def __init__(self, f_z, f_x, mass=MASS_RB85, f1=430.0, hard_wall=None):
        self.mass = mass
        self.w2 = (TWO_PI * np.array([f_x, f_x, f_z])) ** 2
        self.field_model = UniformFieldModel(f1=f1)
        self.hard_wall = hard_wall

    def acceleration(self, xyz, t):
        return -self.w2 * np.atleast_2d(xyz)

    def field_samples(self, xyz, t):
        return self.field_model.magnitude_angle(xyz, t)


@pytest.fixture(scope="module")
def ref_model():
    from rydtrap.fieldsolver import solve_basis_fields
    from rydtrap.geometry import AC_DRIVE_FRACTION, reference_geometry
    basis = solve_basis_fields(reference_geometry())
    drives = DriveWaveforms(ac_fraction=AC_DRIVE_FRACTION)
    return AnalyticFieldModel.fit(basis, drives)


def test_free_particle_straight_line():
    pot = StarkPotential(UniformFieldModel(), alpha=0.0, gravity=False)
    v0 = np.array([0.01, -0.005, 0.002])
    tr = integrate_trajectory(pot, [0, 0, 0], v0, 0.02, loss_radius=1.0)
    expect = np.outer(tr.t, v0)
    assert np.allclose(tr.position, expect, atol=1e-12)


def test_uniform_field_free_fall():
    """Uniform |E| has no gradient: pure gravity, z = -g t^2 / 2 to 1e-6."""
    pot = StarkPotential(UniformFieldModel(), level=LEVEL_G, gravity=True)
    tr = integrate_trajectory(pot, [0, 0, 0], [0, 0, 0], 0.02, loss_radius=1.0)
    expect = -0.5 * G_EARTH * tr.t ** 2
    err = np.abs(tr.position[:, 2] - expect)
    assert err[-1] < 1e-6 * abs(expect[-1])


def test_harmonic_double_recovers_exact_frequency():
    pot = HarmonicPotential(f_z=175.0, f_x=64.0)
    f_long, f_trans = trap_frequencies(pot, displacement=5e-6, duration=0.5)
    assert f_long == pytest.approx(175.0, rel=1e-3)
    assert f_trans == pytest.approx(64.0, rel=1e-3)


def test_no_drive_is_unstable(ref_model):
    drives = DriveWaveforms(U1=0.0, eta=ref_model.drives.eta,
                            ac_fraction=ref_model.drives.ac_fraction)
    model = AnalyticFieldModel(ref_model.coeffs, drives)
    with pytest.raises(UnstableTrapError):
        trap_frequencies(StarkPotential(model, level=LEVEL_G), duration=0.3)


def test_reference_trap_frequencies(ref_model):
    """Published values 175 / 64 Hz within +-15% (geometry reconstruction)."""
    pot = StarkPotential(ref_model, level=LEVEL_G)
    f_long, f_trans = trap_frequencies(pot, duration=0.4)
    assert f_long == pytest.approx(175.0, rel=0.15)
    assert f_trans == pytest.approx(64.0, rel=0.15)


def test_micromotion_line_at_drive_frequency(ref_model):
    pot = StarkPotential(ref_model, level=LEVEL_G)
    tr = integrate_trajectory(pot, [0, 0, 2e-5], [0, 0, 0], 0.3, rtol=1e-8)
    # isolate the fast line: window 300-600 Hz
    z = tr.position[:, 2] - tr.position[:, 2].mean()
    w = np.hanning(z.size)
    spec = np.abs(np.fft.rfft(z * w))
    freqs = np.fft.rfftfreq(z.size, tr.t[1] - tr.t[0])
    band = (freqs > 300) & (freqs < 600)
    f_micro = freqs[band][np.argmax(spec[band])]
    assert f_micro == pytest.approx(430.0, rel=0.01)


def test_energy_conservation_frozen_drives(ref_model):
    """Static drives: kinetic + potential drift < 1e-4 per macro period."""
    frozen = ref_model.drives.frozen_copy(0.0)
    model = AnalyticFieldModel(ref_model.coeffs, frozen)
    pot = StarkPotential(model, level=LEVEL_G, gravity=True)
    tr = integrate_trajectory(pot, [0, 0, 1.5e-5], [0.003, 0, 0], 0.05, rtol=1e-10)
    pts = tr.position
    kin = 0.5 * pot.mass * (tr.velocity ** 2).sum(axis=1)
    epot = pot.potential_energy(pts, 0.0)
    etot = kin + epot
    scale = max(abs(etot[0] - etot.mean()), kin.max())
    assert np.abs(etot - etot[0]).max() < 1e-4 * scale


def test_integrator_tolerance_convergence(ref_model):
    pot = StarkPotential(ref_model, level=LEVEL_G)
    kw = dict(position=[1e-5, 0, 1e-5], velocity=[0, 0.004, 0], duration=0.05)
    tr9 = integrate_trajectory(pot, rtol=1e-9, **kw)
    tr11 = integrate_trajectory(pot, rtol=1e-11, **kw)
    # halving (here: strongly tightening) tolerance moves the final position
    # by less than the coarse run's own error scale
    diff = np.linalg.norm(tr9.position[-1] - tr11.position[-1])
    assert diff < 1e-8  # 10 nm over 50 ms at 1e-9 rtol


def test_adiabaticity_margin(ref_model):
    """Drive and secular frequencies sit >= 1e3 below internal splittings."""
    model = StarkModel()
    # nearest internal gap: g -> i at the operating field
    gap = abs(model.level_energy(model.i, 398.8) - model.level_energy(LEVEL_G, 398.8))
    f_gap = gap / TWO_PI
    assert f_gap / 430.0 > 1e3
    assert f_gap / 175.0 > 1e3


# --- depth / theta / stern-gerlach ------------------------------------------

def _thermal_sampler(mass=MASS_RB85):
    def sampler(T0, n, seed):
        rng = np.random.default_rng(seed)
        pos = rng.normal(scale=0.3e-6, size=(n, 3))
        vel = rng.normal(scale=np.sqrt(KB * T0 / mass), size=(n, 3))
        vel[:, 0] += 6e-3
        return pos, vel
    return sampler


def test_depth_saturates_on_hard_wall_double():
    """Infinitely deep test double: bisection hits the box top, flagged."""
    pot = HarmonicPotential(f_z=175.0, f_x=640.0)  # tight ~ never escapes
    result = trap_depth(pot, _thermal_sampler(), n_atoms=24,
                        probe_duration=0.02, t_lo=4e-5, t_hi=6.4e-4)
    assert result["saturated"]
    assert result["depth_K"] >= 6.4e-4


def test_mean_theta_zero_for_axial_field():
    pot = StarkPotential(UniformFieldModel(), level=LEVEL_G, gravity=False)
    batch = integrate_batch(pot, [[0, 0, 0]], [[0, 0, 0]], 0.01, loss_radius=1.0)
    stats = mean_theta(batch, StarkModel())
    assert stats["mean_theta_rad"] == 0.0
    assert stats["lifetime_s"] == np.inf


def test_theta_grows_with_drive(ref_model):
    """Doubling U1 increases the mean tilt angle."""
    spec_pos = [[1e-5, 1e-5, 5e-6]]
    spec_vel = [[0.004, 0.003, 0.002]]
    out = []
    for scale in (1.0, 2.0):
        d = DriveWaveforms(U1=0.155 * scale, eta=ref_model.drives.eta,
                           ac_fraction=ref_model.drives.ac_fraction)
        m = AnalyticFieldModel(ref_model.coeffs, d)
        pot = StarkPotential(m, level=LEVEL_G)
        batch = integrate_batch(pot, spec_pos, spec_vel, 0.05, rtol=1e-8)
        out.append(mean_theta(batch)["mean_sin2"])
    assert out[1] > out[0]


def test_stern_gerlach_equal_potentials_zero_separation(ref_model):
    pot = StarkPotential(ref_model, level=LEVEL_G)
    t, sep, crossing, flags = stern_gerlach_separation(
        pot, pot, [1e-5, 0, 1e-5], [0.006, 0, 0], 0.02)
    assert np.all(sep == 0.0)
    assert np.isnan(crossing)


def test_stern_gerlach_zero_threshold_crosses_at_zero(ref_model):
    pot_e = StarkPotential(ref_model, level=LEVEL_E)
    pot_g = StarkPotential(ref_model, level=LEVEL_G)
    t, sep, crossing, flags = stern_gerlach_separation(
        pot_e, pot_g, [1e-5, 0, 0], [0.006, 0, 0], 0.005, threshold=0.0)
    assert crossing == 0.0


def test_stern_gerlach_undressed_crosses_de_broglie(ref_model):
    """e/g potential difference separates twins past 0.8 um within tens of ms."""
    pot_e = StarkPotential(ref_model, level=LEVEL_E)
    pot_g = StarkPotential(ref_model, level=LEVEL_G)
    t, sep, crossing, flags = stern_gerlach_separation(
        pot_e, pot_g, [5e-6, 0, 3e-6], [0.006, 0.002, 0.003], 0.08,
        threshold=0.8e-6, rtol=1e-9)
    assert crossing == pytest.approx(0.025, abs=0.055)  # tens of ms scale


def test_dominant_frequency_peak_interpolation():
    t = np.linspace(0, 1.0, 4097)
    x = np.cos(2 * np.pi * 123.456 * t)
    assert _dominant_frequency(t, x, 500.0) == pytest.approx(123.456, abs=0.05)
