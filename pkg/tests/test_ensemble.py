"""Thermal sampling, spin propagation, contrast reduction, T2 extraction."""

import numpy as np
import pytest

from rydtrap.constants import KB, MASS_RB85
from rydtrap.ensemble import (EnsembleSpec, Pulse, PulseSequence,
                              contrast_from_coherence, echo_revival,
                              extract_t2, propagate_spins, sample_ensemble,
                              trajectory_rngs)
from rydtrap.errors import EmptyEnsembleError, RydtrapError


def test_t0_below_classical_bound_refused():
    with pytest.raises(RydtrapError) as err:
        EnsembleSpec(T0=50e-9)
    assert "100 nK" in str(err.value)


def test_sampler_reproducible():
    spec = EnsembleSpec(T0=0.3e-6, n_atoms=64, seed=9)
    a = sample_ensemble(spec)
    b = sample_ensemble(spec)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_sampler_limit_small_temperature_small_velocities():
    spec = EnsembleSpec(T0=1.001e-7, cloud_rms=0.0, recoil_speed=0.0,
                        n_atoms=2000, seed=1)
    pos, vel = sample_ensemble(spec)
    assert np.all(pos == 0.0)
    sigma_expect = np.sqrt(KB * spec.T0 / MASS_RB85)
    assert vel.std() == pytest.approx(sigma_expect, rel=0.05)


def test_sampler_mean_velocity_is_recoil():
    n = 100000
    spec = EnsembleSpec(T0=0.3e-6, n_atoms=n, seed=2)
    pos, vel = sample_ensemble(spec)
    sigma = np.sqrt(KB * spec.T0 / MASS_RB85)
    tol = 4 * sigma / np.sqrt(n)
    assert abs(vel[:, 0].mean() - spec.recoil_speed) < tol
    assert abs(vel[:, 1].mean()) < tol
    assert abs(vel[:, 2].mean()) < tol


def test_sampler_position_rms():
    n = 100000
    spec = EnsembleSpec(T0=0.3e-6, n_atoms=n, seed=3)
    pos, _ = sample_ensemble(spec)
    for ax in range(3):
        assert pos[:, ax].std() == pytest.approx(0.3e-6, rel=0.02)


def test_trajectory_rngs_schedule_independent():
    a = trajectory_rngs(5, 8)
    b = trajectory_rngs(5, 8)
    for ra, rb in zip(a, b):
        assert ra.standard_normal() == rb.standard_normal()


# --- spin propagation --------------------------------------------------------

def _linear_phases(t, rates):
    return np.outer(t, rates)


def test_pinned_atom_keeps_unit_contrast():
    t = np.linspace(0, 1.0, 300)
    phases = np.zeros((t.size, 5))
    seq = PulseSequence.ramsey()
    coh = propagate_spins(t, phases, seq, trajectory_rngs(0, 5))
    C = contrast_from_coherence(coh)
    assert np.allclose(C, 1.0, atol=1e-12)


def test_identical_phases_keep_unit_contrast():
    t = np.linspace(0, 0.5, 200)
    phases = _linear_phases(t, np.full(9, 33.0))
    coh = propagate_spins(t, phases, PulseSequence.ramsey(), trajectory_rngs(1, 9))
    C = contrast_from_coherence(coh)
    assert np.allclose(C, 1.0, atol=1e-12)


def test_contrast_bounds_and_decay():
    rng = np.random.default_rng(4)
    t = np.linspace(0, 0.5, 400)
    phases = _linear_phases(t, rng.normal(0, 40.0, 200))
    coh = propagate_spins(t, phases, PulseSequence.ramsey(), trajectory_rngs(2, 200))
    C = contrast_from_coherence(coh)
    assert np.all(C >= 0) and np.all(C <= 1 + 1e-12)
    assert C[0] == pytest.approx(1.0)
    assert C[-1] < 0.2


def test_echo_refocuses_linear_phases_exactly():
    """phi_j = a_j t with perfect pulses: C(2 t_pi) = 1 to numerical precision."""
    rng = np.random.default_rng(5)
    t = np.linspace(0, 1.0, 2001)
    phases = _linear_phases(t, rng.normal(0, 50.0, 100))
    seq = PulseSequence.echo(t_pi=0.5, dispersion=0.0)
    coh = propagate_spins(t, phases, seq, trajectory_rngs(3, 100))
    C = contrast_from_coherence(coh)
    k = np.abs(t - 1.0).argmin()
    assert C[k] == pytest.approx(1.0, abs=1e-9)
    # dephased right before the revival
    assert C[np.abs(t - 0.8).argmin()] < 0.5


def test_pulse_dispersion_degrades_revival_monotonically():
    rng = np.random.default_rng(6)
    t = np.linspace(0, 1.0, 1001)
    phases = _linear_phases(t, rng.normal(0, 30.0, 400))
    peaks = []
    for disp in (0.0, 0.05, 0.10, 0.2):
        seq = PulseSequence.echo(t_pi=0.5, dispersion=disp)
        coh = propagate_spins(t, phases, seq, trajectory_rngs(7, 400))
        C = contrast_from_coherence(coh)
        peaks.append(C[np.abs(t - 1.0).argmin()])
    assert all(a >= b - 1e-9 for a, b in zip(peaks, peaks[1:]))
    assert peaks[0] == pytest.approx(1.0, abs=1e-9)


def test_single_trajectory_contrast_is_unity_without_dispersion():
    t = np.linspace(0, 0.3, 100)
    phases = _linear_phases(t, np.array([77.0]))
    coh = propagate_spins(t, phases, PulseSequence.ramsey(), trajectory_rngs(8, 1))
    C = contrast_from_coherence(coh)
    assert np.allclose(C, 1.0, atol=1e-12)


def test_contrast_estimator_consistency_with_n():
    """Doubling N changes C by less than the binomial error band."""
    rng = np.random.default_rng(9)
    t = np.linspace(0, 0.2, 100)
    rates = rng.normal(0, 40.0, 2000)
    cs = []
    for n in (1000, 2000):
        phases = _linear_phases(t, rates[:n])
        coh = propagate_spins(t, phases, PulseSequence.ramsey(), trajectory_rngs(10, n))
        cs.append(contrast_from_coherence(coh))
    band = 2.0 / np.sqrt(1000)
    assert np.abs(cs[0] - cs[1]).max() < band


def test_empty_ensemble_raises():
    with pytest.raises(EmptyEnsembleError):
        contrast_from_coherence(np.zeros((3, 4), dtype=complex),
                                np.zeros(4, dtype=bool))


def test_pulse_sequence_validation():
    with pytest.raises(RydtrapError):
        PulseSequence((Pulse(0.5, np.pi), Pulse(0.2, np.pi)))
    with pytest.raises(RydtrapError):
        PulseSequence((Pulse(0.0, np.pi, dispersion=-0.1),))


def test_multi_echo_structure():
    seq = PulseSequence.multi_echo(0.2, 3)
    times = [p.time for p in seq.pulses]
    assert times == pytest.approx([0.0, 0.1, 0.3, 0.5])


# --- T2 extraction ------------------------------------------------------------

def test_extract_t2_exponential_oracle():
    tau = 0.07
    t = np.linspace(0, 0.5, 2000)
    C = np.exp(-t / tau)
    got = extract_t2(t, C)
    assert got["t2"] == pytest.approx(tau * np.log(2.0), rel=1e-4)


def test_extract_t2_saturation_flag():
    t = np.linspace(0, 0.5, 100)
    got = extract_t2(t, np.full_like(t, 0.9))
    assert got["saturated"] and got["t2"] is None


def test_echo_revival_equivalent_t2():
    t = np.linspace(0, 1.2, 500)
    C = np.where(np.abs(t - 1.0) < 0.02, 0.82, 0.1)
    rev = echo_revival(t, C, 1.0)
    assert rev["peak_contrast"] == pytest.approx(0.82)
    assert rev["t2_equivalent_exponential"] == pytest.approx(
        -1.0 / np.log(0.82), rel=0.05)
