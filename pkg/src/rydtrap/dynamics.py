"""Classical center-of-mass motion in the level-dependent Stark potential.

The force model uses the instantaneous adiabatic potential
U(r, t) = hbar * alpha_level * |E(r, t)|^2 (alpha < 0: high-field seeker,
trapped by dynamic stabilization) plus gravity along -z.  Batches of
trajectories integrate as one vectorized ODE system with a shared adaptive
Runge-Kutta (Dormand-Prince) stepper and dense output on a fixed sampling
cadence that resolves the micromotion.
"""

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .constants import G_EARTH, HBAR, MASS_RB85
from .errors import DiagnosticError, IntegratorError, UnstableTrapError
from .stark import second_order_coeff

LOSS_RADIUS = 5e-4          # m, atoms beyond this are counted escaped
RETENTION_RADIUS = 4e-4     # m, trap-depth criterion radius
SAMPLES_PER_PERIOD = 64
DEFAULT_RTOL = 1e-9


class StarkPotential:
    """hbar * alpha * |E|^2 potential for one level over a field model."""

    def __init__(self, field_model, alpha=None, level=None, mass=MASS_RB85,
                 gravity=True):
        if alpha is None:
            if level is None:
                raise ValueError("give alpha or level")
            alpha = second_order_coeff(level.n, level.m, level.k)
        self.alpha = alpha              # rad/s per (V/m)^2
        self.field_model = field_model
        self.mass = mass
        self.gravity = gravity

    def acceleration(self, xyz, t):
        e2, grad = self.field_model.e2_and_grad(xyz, t)
        acc = (-HBAR * self.alpha / self.mass) * grad
        if self.gravity:
            acc[:, 2] -= G_EARTH
        return acc

    def potential_energy(self, xyz, t):
        e2, _ = self.field_model.e2_and_grad(xyz, t)
        U = HBAR * self.alpha * e2
        if self.gravity:
            U = U + self.mass * G_EARTH * np.atleast_2d(xyz)[:, 2]
        return U

    def field_samples(self, xyz, t):
        return self.field_model.magnitude_angle(xyz, t)


class DressedPotential:
    """Mechanical potential of a dressed branch, from the lookup table.

    U = hbar * lambda_branch(E, theta); the force uses d(lambda)/dE only
    (the theta dependence is Hz-scale over mrad and mechanically
    negligible).
    """

    def __init__(self, field_model, table, branch="g", mass=MASS_RB85, gravity=True):
        self.field_model = field_model
        self.table = table
        self.branch = branch
        self.mass = mass
        self.gravity = gravity
        self._spline = table._lg if branch == "g" else table._le

    def acceleration(self, xyz, t):
        e2, grad_e2 = self.field_model.e2_and_grad(xyz, t)
        mag = np.sqrt(e2)
        theta = self.field_model.magnitude_angle(xyz, t)[1]
        dlam_dE = self._spline.ev(mag, theta, dx=1)
        # grad|E| = grad(E^2) / (2 |E|)
        acc = (-HBAR / self.mass) * (dlam_dE / (2.0 * mag))[:, None] * grad_e2
        if self.gravity:
            acc[:, 2] -= G_EARTH
        return acc

    def field_samples(self, xyz, t):
        return self.field_model.magnitude_angle(xyz, t)


@dataclass
class TrajectoryState:
    t: float
    position: np.ndarray
    velocity: np.ndarray
    field: float = 0.0
    theta: float = 0.0


@dataclass
class Trajectory:
    """Sampled single-atom trajectory; samples resolve the micromotion."""
    level: str
    t: np.ndarray
    position: np.ndarray     # (n, 3)
    velocity: np.ndarray     # (n, 3)
    field: np.ndarray        # |E| at the samples
    theta: np.ndarray        # angle(E, z) at the samples
    status: str = "completed"
    loss_time: float = field(default=np.nan)

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["t_s", "x_m", "y_m", "z_m", "vx_m_s", "vy_m_s",
                         "vz_m_s", "E_V_per_m", "theta_rad"])
            for k in range(self.t.size):
                wr.writerow([self.t[k], *self.position[k], *self.velocity[k],
                             self.field[k], self.theta[k]])


class BatchResult:
    """Vectorized trajectory batch: arrays shaped (n_samples, n_atoms, ...)."""

    def __init__(self, t, positions, velocities, field, theta, alive, loss_time):
        self.t = t
        self.positions = positions
        self.velocities = velocities
        self.field = field
        self.theta = theta
        self.alive = alive            # (n_atoms,) final survival
        self.loss_time = loss_time    # (n_atoms,) nan if survived

    def trajectory(self, j, level=""):
        status = "completed" if self.alive[j] else "lost"
        return Trajectory(level, self.t, self.positions[:, j], self.velocities[:, j],
                          self.field[:, j], self.theta[:, j], status,
                          self.loss_time[j])


def _sample_grid(duration, drive_period, samples_per_period):
    dt = drive_period / samples_per_period
    n = int(np.ceil(duration / dt))
    return np.linspace(0.0, duration, n + 1)


def integrate_batch(potential, positions, velocities, duration,
                    rtol=DEFAULT_RTOL, samples_per_period=SAMPLES_PER_PERIOD,
                    loss_radius=LOSS_RADIUS, t0=0.0, chunk_periods=1,
                    progress=None):
    """Integrate N atoms as one adaptive-RK system with shared step control.

    Atoms crossing loss_radius are frozen in place at the following chunk
    boundary and excluded from further dynamics.  Returns a BatchResult
    sampled on the fixed cadence grid.
    """
    pos = np.atleast_2d(np.array(positions, dtype=float))
    vel = np.atleast_2d(np.array(velocities, dtype=float))
    n = pos.shape[0]
    period = potential.field_model.drives.period
    t_grid = t0 + _sample_grid(duration, period, samples_per_period)
    alive = np.ones(n, dtype=bool)
    loss_time = np.full(n, np.nan)

    out_pos = np.empty((t_grid.size, n, 3))
    out_vel = np.empty((t_grid.size, n, 3))
    out_pos[0] = pos
    out_vel[0] = vel

    def rhs(t, y):
        p = y[: 3 * n].reshape(n, 3)
        v = y[3 * n:].reshape(n, 3)
        acc = np.zeros_like(p)
        dp = np.zeros_like(p)
        if alive.any():
            acc[alive] = potential.acceleration(p[alive], t)
            dp[alive] = v[alive]
        return np.concatenate([dp.ravel(), acc.ravel()])

    chunk_steps = max(1, int(round(chunk_periods * samples_per_period)))
    y = np.concatenate([pos.ravel(), vel.ravel()])
    k_done = 0
    while k_done < t_grid.size - 1:
        k_next = min(k_done + chunk_steps, t_grid.size - 1)
        t_eval = t_grid[k_done + 1: k_next + 1]
        sol = solve_ivp(rhs, (t_grid[k_done], t_grid[k_next]), y, method="RK45",
                        rtol=rtol, atol=1e-13, t_eval=t_eval,
                        max_step=period / 8.0)
        if not sol.success:
            raise IntegratorError(f"integrator failed: {sol.message}")
        for m in range(sol.t.size):
            k_done += 1
            out_pos[k_done] = sol.y[: 3 * n, m].reshape(n, 3)
            out_vel[k_done] = sol.y[3 * n:, m].reshape(n, 3)
        y = np.concatenate([out_pos[k_done].ravel(), out_vel[k_done].ravel()])
        # mark atoms lost at the chunk boundary
        p = out_pos[k_done]
        newly = alive & (np.linalg.norm(p, axis=1) > loss_radius)
        if potential.field_model is not None:
            newly |= alive & ~potential.field_model.in_domain(p)
        if newly.any():
            loss_time[newly] = t_grid[k_done]
            v = y[3 * n:].reshape(n, 3)
            v[newly] = 0.0
            y[3 * n:] = v.ravel()
            alive &= ~newly
        if progress is not None:
            progress(t_grid[k_done] - t0, duration)

    # field samples along the stored trajectories
    fmag = np.empty((t_grid.size, n))
    fth = np.empty((t_grid.size, n))
    for k in range(t_grid.size):
        ok = potential.field_model.in_domain(out_pos[k])
        mag = np.zeros(n)
        th = np.zeros(n)
        if ok.any():
            mag[ok], th[ok] = potential.field_samples(out_pos[k][ok], t_grid[k])
        fmag[k] = mag
        fth[k] = th
    return BatchResult(t_grid, out_pos, out_vel, fmag, fth, alive, loss_time)


def integrate_trajectory(potential, position, velocity, duration,
                         rtol=DEFAULT_RTOL, samples_per_period=SAMPLES_PER_PERIOD,
                         loss_radius=LOSS_RADIUS, level=""):
    """Single-atom convenience wrapper; loss resolved at chunk boundaries."""
    batch = integrate_batch(potential, [position], [velocity], duration,
                            rtol=rtol, samples_per_period=samples_per_period,
                            loss_radius=loss_radius)
    return batch.trajectory(0, level=level)


# ---------------------------------------------------------------------------
# trap characterization
# ---------------------------------------------------------------------------

def _dominant_frequency(t, x, f_max):
    """Frequency of the strongest spectral line below f_max (Hz)."""
    x = x - x.mean()
    w = np.hanning(x.size)
    spec = np.abs(np.fft.rfft(x * w))
    freqs = np.fft.rfftfreq(x.size, t[1] - t[0])
    sel = freqs < f_max
    spec = spec[sel]
    freqs = freqs[sel]
    k = int(np.argmax(spec[1:])) + 1
    if 0 < k < spec.size - 1:   # quadratic peak interpolation
        a, b, c = np.log(spec[k - 1] + 1e-300), np.log(spec[k] + 1e-300), np.log(spec[k + 1] + 1e-300)
        delta = 0.5 * (a - c) / (a - 2 * b + c)
        return float(freqs[k] + delta * (freqs[1] - freqs[0]))
    return float(freqs[k])


def trap_frequencies(potential, displacement=8e-6, duration=0.5,
                     rtol=1e-8):
    """(f_longitudinal, f_transverse) from small-amplitude trajectories.

    Launches one atom displaced along z and one along x, integrates over
    many macromotion periods and reads the dominant sub-drive spectral
    peak of each coordinate.
    """
    pos = np.array([[0.0, 0.0, displacement], [displacement, 0.0, 0.0]])
    vel = np.zeros_like(pos)
    batch = integrate_batch(potential, pos, vel, duration, rtol=rtol)
    if not batch.alive.all():
        raise UnstableTrapError("test trajectory left the trap region")
    span_z = np.max(np.abs(batch.positions[:, 0, 2]))
    span_x = np.max(np.abs(batch.positions[:, 1, 0]))
    if span_z > 20 * displacement or span_x > 20 * displacement:
        raise UnstableTrapError("test trajectory amplitude grew; no confinement")
    f_drive = potential.field_model.drives.f1
    f_long = _dominant_frequency(batch.t, batch.positions[:, 0, 2], 0.5 * f_drive)
    f_trans = _dominant_frequency(batch.t, batch.positions[:, 1, 0], 0.5 * f_drive)
    return f_long, f_trans


def retention_fraction(potential, sampler, T0, n_atoms, probe_duration=0.2,
                       seed=0, rtol=1e-7, radius=RETENTION_RADIUS):
    """Fraction of a T0 thermal ensemble within `radius` after the probe."""
    pos, vel = sampler(T0, n_atoms, seed)
    batch = integrate_batch(potential, pos, vel, probe_duration, rtol=rtol,
                            samples_per_period=4)
    final = batch.positions[-1]
    inside = np.linalg.norm(final, axis=1) <= radius
    return float(inside.mean()), batch


def trap_depth(potential, sampler, n_atoms=200, probe_duration=0.2,
               t_lo=20e-6, t_hi=2.56e-3, seed=0, rtol=1e-7, tol_K=5e-6):
    """Temperature at which half of the launched atoms stay within 400 um.

    Bisection over T0 with a doubling bracket search; returns a dict with
    the depth, a binomial 68% confidence band and the probe history.
    Raises DiagnosticError if the retention history is non-monotone beyond
    counting noise; flags saturation when the search box is exhausted.
    """
    history = []

    def probe(T0):
        frac, _ = retention_fraction(potential, sampler, T0, n_atoms,
                                     probe_duration, seed=seed + len(history), rtol=rtol)
        history.append((T0, frac))
        return frac

    lo, hi = t_lo, t_lo * 2
    f_lo = probe(lo)
    if f_lo < 0.5:
        raise UnstableTrapError(f"retention {f_lo:.2f} < 1/2 already at {lo*1e6:.1f} uK")
    saturated = False
    while True:
        f_hi = probe(hi)
        if f_hi < 0.5:
            break
        if hi >= t_hi:
            saturated = True
            break
        lo, f_lo = hi, f_hi
        hi = min(2 * hi, t_hi * 1.0000001)

    if saturated:
        depth = hi
    else:
        while hi - lo > tol_K:
            mid = 0.5 * (lo + hi)
            if probe(mid) >= 0.5:
                lo = mid
            else:
                hi = mid
        depth = 0.5 * (lo + hi)

    # monotonicity check within ~3 sigma binomial noise
    hist = sorted(history)
    sigma = 3.0 * np.sqrt(0.25 / n_atoms)
    for (t1, f1), (t2, f2) in zip(hist, hist[1:]):
        if f2 > f1 + 2 * sigma + 0.05:
            raise DiagnosticError(
                f"retention not monotone vs T0 beyond noise "
                f"({f1:.2f}@{t1*1e6:.0f}uK -> {f2:.2f}@{t2*1e6:.0f}uK); increase n_atoms")
    ci = 1.0 / np.sqrt(n_atoms)  # ~68% band on the crossing fraction
    return {"depth_K": depth, "ci_fraction": ci, "saturated": saturated,
            "history": hist, "n_atoms": n_atoms, "probe_duration_s": probe_duration}


def mean_theta(batch, stark_model=None, gamma_s=0.0):
    """Time-and-ensemble averaged angle statistics and the S.E. lifetime."""
    alive = batch.alive
    th = batch.theta[:, alive] if alive.any() else batch.theta
    sin2 = np.sin(th) ** 2
    mean_sin2 = float(sin2.mean())
    stats = {
        "mean_theta_rad": float(th.mean()),
        "mean_sin2": mean_sin2,
        "rms_theta_rad": float(np.sqrt((th ** 2).mean())),
    }
    if stark_model is not None:
        rate = stark_model.gamma_sp * mean_sin2 + gamma_s
        stats["lifetime_s"] = float(1.0 / rate) if rate > 0 else np.inf
    return stats


def stern_gerlach_separation(pot_a, pot_b, position, velocity, duration,
                             threshold=0.8e-6, rtol=DEFAULT_RTOL):
    """|r_a(t) - r_b(t)| for twin trajectories in two level potentials.

    Returns (t, separation, crossing_time, flags); crossing_time is the
    first interpolated crossing of `threshold` (0 threshold crosses at 0+).
    A lost trajectory flags the result as partial.
    """
    tr_a = integrate_trajectory(pot_a, position, velocity, duration, rtol=rtol)
    tr_b = integrate_trajectory(pot_b, position, velocity, duration, rtol=rtol)
    n = min(tr_a.t.size, tr_b.t.size)
    sep = np.linalg.norm(tr_a.position[:n] - tr_b.position[:n], axis=1)
    t = tr_a.t[:n]
    crossing = np.nan
    if threshold <= 0:
        crossing = 0.0
    else:
        above = np.nonzero(sep >= threshold)[0]
        if above.size:
            k = above[0]
            if k == 0:
                crossing = t[0]
            else:
                f = (threshold - sep[k - 1]) / (sep[k] - sep[k - 1])
                crossing = float(t[k - 1] + f * (t[k] - t[k - 1]))
    partial = tr_a.status != "completed" or tr_b.status != "completed"
    return t, sep, crossing, {"partial": partial,
                              "status_a": tr_a.status, "status_b": tr_b.status}
