"""Thermal ensembles, coherence phase accumulation, Ramsey and echo runs.

Per-trajectory pseudo-spin propagation: instantaneous pulse rotations
(angles drawn with a Gaussian fractional dispersion per trajectory)
interleaved with free phase evolution from the dressed-transition lookup.
Trajectories integrate once in the g-level dressed potential; the e/g
difference enters only through the phase (the dressing nearly equalizes
the mechanical potentials).

The drive's y-profile and the instantaneous angle theta both modulate the
coupling multiplicatively, so they enter the table lookup as an effective
angle: cos(theta_eff) = cos(theta) * profile(y).
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from .constants import KB, MASS_RB85, RECOIL_780NM
from .dynamics import integrate_batch
from .errors import EmptyEnsembleError, FieldRangeError, RydtrapError

log = logging.getLogger(__name__)

T0_CLASSICAL_BOUND = 100e-9  # K; below this the motion is not classical


@dataclass(frozen=True)
class EnsembleSpec:
    """Thermal cloud released into the trap at temperature T0."""
    T0: float                      # K
    cloud_rms: float = 0.3e-6      # m, per-axis position rms
    center: tuple = (0.0, 0.0, 0.0)
    recoil_speed: float = RECOIL_780NM   # m/s, one photon kick along +x
    n_atoms: int = 500
    seed: int = 1234
    mass: float = MASS_RB85

    def __post_init__(self):
        if self.T0 < T0_CLASSICAL_BOUND:
            raise RydtrapError(
                f"T0 = {self.T0*1e9:.0f} nK below the 100 nK classical-motion bound")
        if self.n_atoms < 1:
            raise RydtrapError("need at least one atom")


def sample_ensemble(spec: EnsembleSpec):
    """(positions, velocities) arrays (n, 3); bit-reproducible from the seed."""
    rng = np.random.default_rng(spec.seed)
    pos = rng.normal(scale=spec.cloud_rms, size=(spec.n_atoms, 3)) + np.asarray(spec.center)
    sigma_v = np.sqrt(KB * spec.T0 / spec.mass)
    vel = rng.normal(scale=sigma_v, size=(spec.n_atoms, 3))
    vel[:, 0] += spec.recoil_speed
    return pos, vel


def trajectory_rngs(master_seed, n):
    """Independent per-trajectory RNG streams, schedule-independent."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(master_seed).spawn(n)]


# ---------------------------------------------------------------------------
# phase accumulation
# ---------------------------------------------------------------------------

def effective_theta(theta, y, config):
    """Fold the drive's y-profile into the tilt angle (same multiplicative role)."""
    c = np.cos(theta) * config.profile(y)
    return np.arccos(np.clip(c, -1.0, 1.0))


def accumulate_phase(batch, table, reference=None, strict=False):
    """phi_j(t) for each trajectory, trapezoid on the cadence grid.

    Returns (phi, ok): ok marks trajectories that stayed inside the
    tabulated (E, theta) range throughout (out-of-range atoms are treated
    like lost ones by the contrast reduction).  With strict=True an
    out-of-range sample raises instead.  reference defaults to the table's
    omega_eg(E_a, 0).
    """
    cfg = table.config
    theta_eff = effective_theta(batch.theta, batch.positions[:, :, 1], cfg)
    if strict:
        delta = table.detuning(batch.field, theta_eff)
        ok = np.ones(delta.shape[1], dtype=bool)
    else:
        delta, ok_samples = table.detuning_masked(batch.field, theta_eff)
        ok = np.all(ok_samples, axis=0)
    if reference is not None:
        delta = delta + (table.reference - reference)
    dt = np.diff(batch.t)
    mid = 0.5 * (delta[1:] + delta[:-1]) * dt[:, None]
    phi = np.concatenate([np.zeros((1, delta.shape[1])), np.cumsum(mid, axis=0)])
    return phi, ok


def phase_for_trajectory(traj, table, reference=None):
    """phi(t) for a single Trajectory (y taken from its stored positions)."""
    cfg = table.config
    theta_eff = effective_theta(traj.theta, traj.position[:, 1], cfg)
    delta = table.detuning(traj.field, theta_eff)
    if reference is not None:
        delta = delta + (table.reference - reference)
    dt = np.diff(traj.t)
    return np.concatenate([[0.0], np.cumsum(0.5 * (delta[1:] + delta[:-1]) * dt)])


# ---------------------------------------------------------------------------
# pulse sequences
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Pulse:
    time: float
    angle: float                   # nominal rotation angle, rad
    dispersion: float = 0.0        # Gaussian rms of the fractional angle error
    axis_phase: float = 0.0        # rotation axis azimuth in the equatorial plane


@dataclass(frozen=True)
class PulseSequence:
    """Ordered pulses; C(t) is read between/after them vs delay t."""
    pulses: tuple
    kind: str = "custom"

    def __post_init__(self):
        times = [p.time for p in self.pulses]
        if any(t2 <= t1 for t1, t2 in zip(times, times[1:])):
            raise RydtrapError("pulse times must be strictly increasing")
        if any(p.dispersion < 0 for p in self.pulses):
            raise RydtrapError("pulse dispersion must be >= 0")

    @classmethod
    def ramsey(cls, dispersion=0.0):
        """First pi/2 at t=0; the readout pulse is implicit in C(t)."""
        return cls((Pulse(0.0, np.pi / 2, dispersion),), kind="ramsey")

    @classmethod
    def echo(cls, t_pi=0.5, dispersion=0.10, first_dispersion=0.0):
        return cls((Pulse(0.0, np.pi / 2, first_dispersion),
                    Pulse(t_pi, np.pi, dispersion)), kind="echo")

    @classmethod
    def multi_echo(cls, period, n_pulses, dispersion=0.10, first_dispersion=0.0):
        """pi pulses at period/2 + k*period (refocusing at multiples of period)."""
        pulses = [Pulse(0.0, np.pi / 2, first_dispersion)]
        for k in range(n_pulses):
            pulses.append(Pulse(0.5 * period + k * period, np.pi, dispersion))
        return cls(tuple(pulses), kind="multi-echo")


def _rotation(angle, axis_phase):
    """SU(2) rotation about an equatorial axis."""
    c = np.cos(0.5 * angle)
    s = np.sin(0.5 * angle)
    e = np.exp(-1j * axis_phase)
    return np.array([[c, -1j * s * e], [-1j * s * np.conj(e), c]])


def propagate_spins(t, phases, sequence, rng_streams):
    """Coherence c_j(t) = 2 psi_e psi_g* of spins driven by the sequence.

    phases: (n_t, n_atoms) accumulated free-evolution phase phi_j(t).
    Pulse angles are drawn once per trajectory per pulse (Gaussian
    fractional dispersion) from the per-trajectory streams.
    """
    n_t, n = phases.shape
    psi = np.zeros((n, 2), dtype=complex)
    psi[:, 0] = 1.0  # ground state
    coh = np.zeros((n_t, n), dtype=complex)
    angles = np.empty((len(sequence.pulses), n))
    for ip, pulse in enumerate(sequence.pulses):
        for j in range(n):
            f = 1.0 + (pulse.dispersion * rng_streams[j].standard_normal()
                       if pulse.dispersion > 0 else 0.0)
            angles[ip, j] = pulse.angle * f
    pulse_times = [p.time for p in sequence.pulses]
    ip = 0
    phi_last = np.zeros(n)
    for k in range(n_t):
        # free evolution since the previous sample: e gains exp(-i dphi)
        dphi = phases[k] - phi_last
        psi[:, 1] *= np.exp(-1j * dphi)
        phi_last = phases[k]
        while ip < len(pulse_times) and t[k] >= pulse_times[ip] - 1e-15:
            for j in range(n):
                R = _rotation(angles[ip, j], sequence.pulses[ip].axis_phase)
                psi[j] = R @ psi[j]
            ip += 1
        coh[k] = 2.0 * psi[:, 1] * np.conj(psi[:, 0])
    return coh


def contrast_from_coherence(coh, alive=None):
    """C(t) = |mean_j exp(i arg c_j)| over surviving trajectories."""
    if alive is not None:
        coh = coh[:, alive]
    if coh.shape[1] == 0:
        raise EmptyEnsembleError("no surviving trajectories")
    mag = np.abs(coh)
    phasors = np.where(mag > 0, coh / np.where(mag > 0, mag, 1.0), 1.0)
    return np.abs(phasors.mean(axis=1))


@dataclass
class CoherenceResult:
    t: np.ndarray
    contrast: np.ndarray
    survival: np.ndarray
    phases: np.ndarray             # (n_t, n_atoms)
    coherence: np.ndarray          # complex (n_t, n_atoms)
    alive: np.ndarray
    spec: EnsembleSpec
    sequence: PulseSequence
    meta: dict = field(default_factory=dict)

    def contrast_at(self, t_query):
        return float(np.interp(t_query, self.t, self.contrast))


def run_sequence(spec, sequence, table, field_model, duration=None,
                 potential=None, rtol=1e-9, samples_per_period=64,
                 progress=None):
    """Full Monte Carlo: sample, integrate one trajectory per atom in the
    bare g potential, accumulate the dressed-transition phase along it,
    propagate spins, reduce to C(t).

    The trajectories deliberately use the bare g-level potential: the
    dressed branches inherit the stiffer e-like field dependence, which
    sits marginally outside the dynamic-stability region for the reference
    drive, while the bare-g motion is the stable trap the rest of the
    characterization uses.  The e/g difference enters only through the
    accumulated phase.
    """
    from .dynamics import StarkPotential
    from .stark import LEVEL_G

    if duration is None:
        duration = max(p.time for p in sequence.pulses) * 2.2 + 0.01
    pos, vel = sample_ensemble(spec)
    if potential is None:
        potential = StarkPotential(field_model, level=LEVEL_G, mass=spec.mass)
    batch = integrate_batch(potential, pos, vel, duration, rtol=rtol,
                            samples_per_period=samples_per_period,
                            progress=progress)
    phases, in_range = accumulate_phase(batch, table)
    rngs = trajectory_rngs(spec.seed + 7, spec.n_atoms)
    coh = propagate_spins(batch.t, phases, sequence, rngs)
    alive = batch.alive & in_range
    contrast = contrast_from_coherence(coh, alive)
    survival = np.array([
        float(np.mean(np.isnan(batch.loss_time) | (batch.loss_time > tk)))
        for tk in batch.t]) * float(in_range.mean())
    return CoherenceResult(batch.t, contrast, survival, phases, coh, alive,
                           spec, sequence,
                           meta={"table_reference_rad_s": table.reference,
                                 "dressing": table.config.to_dict(),
                                 "in_table_fraction": float(in_range.mean())})


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------

def extract_t2(t, contrast, threshold=0.5):
    """First downward crossing of the threshold, linearly interpolated.

    Returns dict with t2 (or None + saturated flag when the curve never
    crosses inside the sampled range).
    """
    below = np.nonzero(contrast < threshold)[0]
    if below.size == 0:
        return {"t2": None, "saturated": True, "threshold": threshold}
    k = below[0]
    if k == 0:
        return {"t2": float(t[0]), "saturated": False, "threshold": threshold}
    f = (contrast[k - 1] - threshold) / (contrast[k - 1] - contrast[k])
    return {"t2": float(t[k - 1] + f * (t[k] - t[k - 1])), "saturated": False,
            "threshold": threshold}


def echo_revival(t, contrast, t_revival, window=0.08):
    """Peak contrast near the expected revival and the equivalent-exponential T2."""
    sel = (t >= t_revival * (1 - window)) & (t <= t_revival * (1 + window))
    if not sel.any():
        raise RydtrapError("revival window outside the sampled range")
    k = np.argmax(contrast[sel])
    c_peak = float(contrast[sel][k])
    t_peak = float(t[sel][k])
    t2_equiv = -t_peak / np.log(c_peak) if 0 < c_peak < 1 else np.inf
    return {"peak_contrast": c_peak, "peak_time": t_peak,
            "t2_equivalent_exponential": float(t2_equiv)}


def frequency_spread(batch, table):
    """Ensemble spread (2 x rms) of the instantaneous transition detuning, rad/s.

    With the undressed table (Omega = 0) this is the thermal broadening of
    the bare e/g line sampled along the trajectories.
    """
    cfg = table.config
    theta_eff = effective_theta(batch.theta, batch.positions[:, :, 1], cfg)
    delta, ok = table.detuning_masked(batch.field, theta_eff)
    keep = batch.alive & np.all(ok, axis=0)
    sel = delta[:, keep] if keep.any() else delta
    return 2.0 * float(sel.std())
