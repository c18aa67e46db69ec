"""Total time-dependent trap field E(r, t) from basis solutions and drives.

Two interchangeable evaluators:

* GridFieldModel: bicubic-spline superposition of the solved basis fields.
* AnalyticFieldModel: homogeneous + hexapole + quadrupole closed form with
  coefficients least-squares fitted to a solved basis over a 200 um ball.
  Fast path for ensemble runs and an independent cross-check of the grid.

Both expose field(xyz, t), field_and_gradient(xyz, t) and magnitude/angle
helpers on Cartesian points (n, 3).
"""

import numpy as np

from .constants import TWO_PI
from .errors import CalibrationError, OutOfDomainError
from .geometry import GROUP_ROLES


class DriveWaveforms:
    """Drive potentials: U0 static, U1 cos(w1 t) with eta-nulled outer, U2 static.

    ac_fraction is the effective oscillating-amplitude fraction of U1 that
    the a.c. electrode groups carry (drive-swing convention and electrode
    coupling calibration; see geometry.AC_DRIVE_FRACTION).
    """

    def __init__(self, U0=0.2, U1=0.155, U2=-0.003, f1=430.0, eta=None,
                 ac_fraction=1.0):
        if f1 <= 0:
            raise ValueError("drive frequency must be positive")
        self.U0 = U0
        self.U1 = U1
        self.U2 = U2
        self.f1 = f1
        self.omega1 = TWO_PI * f1
        self.eta = eta
        self.ac_fraction = ac_fraction

    @property
    def period(self):
        return 1.0 / self.f1

    @property
    def u1_eff(self):
        return self.U1 * self.ac_fraction

    def weights(self, t):
        """Group -> applied volts at time t (eta must be calibrated)."""
        if self.eta is None:
            raise CalibrationError("eta not calibrated")
        ct = np.cos(self.omega1 * np.asarray(t))
        u1 = self.u1_eff
        return {
            "static": self.U0 * np.ones_like(ct),
            "inner_ac": u1 * ct,
            "outer_ac": -self.eta * u1 * ct,
            "quad": self.U2 * np.ones_like(ct),
        }

    def scaled(self, factor):
        return DriveWaveforms(self.U0 * factor, self.U1 * factor, self.U2 * factor,
                              self.f1, self.eta, self.ac_fraction)

    def frozen_copy(self, t0=0.0):
        """Static drives equal to the instantaneous values at t0 (diagnostics)."""
        d = DriveWaveforms(self.U0, self.U1 * np.cos(self.omega1 * t0), self.U2,
                           self.f1, self.eta, self.ac_fraction)
        d._frozen = True
        return d

    def to_dict(self):
        return {"U0_V": self.U0, "U1_V": self.U1, "U2_V": self.U2,
                "f1_Hz": self.f1, "eta": self.eta, "ac_fraction": self.ac_fraction}


def calibrate_eta(basis):
    """Outer-electrode scale nulling the oscillating field at the origin.

    Linear solve on the two a.c. basis fields at O; raises CalibrationError
    when the outer group produces no axial field there.
    """
    zero = np.zeros(1)
    _, ez_in = basis.field("inner_ac", zero, zero)
    _, ez_out = basis.field("outer_ac", zero, zero)
    if abs(ez_out[0]) < 1e-9 * max(abs(ez_in[0]), 1.0):
        raise CalibrationError("outer group produces no field at the origin")
    eta = float(ez_in[0] / ez_out[0])
    if not np.isfinite(eta):
        raise CalibrationError("eta calibration produced a non-finite value")
    return eta


def _cyl(xyz):
    xyz = np.atleast_2d(np.asarray(xyz, dtype=float))
    rho = np.hypot(xyz[:, 0], xyz[:, 1])
    return xyz, rho, xyz[:, 2]


class _BaseFieldModel:
    """Shared Cartesian plumbing over (rho, z) axisymmetric evaluators."""

    def field(self, xyz, t):
        """E (V/m), shape (n, 3), at Cartesian points xyz (n, 3), time t."""
        xyz, rho, z = _cyl(xyz)
        er, ez = self._field_cyl(rho, z, t)
        out = np.zeros_like(xyz)
        safe = rho > 0
        out[safe, 0] = er[safe] * xyz[safe, 0] / rho[safe]
        out[safe, 1] = er[safe] * xyz[safe, 1] / rho[safe]
        out[:, 2] = ez
        return out

    def magnitude_angle(self, xyz, t):
        """(|E|, theta) with theta the angle between E and the z axis."""
        E = self.field(xyz, t)
        mag = np.linalg.norm(E, axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            costh = np.where(mag > 0, np.clip(np.abs(E[:, 2]) / np.maximum(mag, 1e-300), 0, 1), 1.0)
        return mag, np.arccos(costh)

    def e2_and_grad(self, xyz, t):
        """（|E|^2, grad|E|^2) for the force evaluation, Cartesian."""
        xyz, rho, z = _cyl(xyz)
        er, ez, d = self._field_and_derivs_cyl(rho, z, t)
        e2 = er * er + ez * ez
        # d(|E|^2) = 2 (E.grad) E: cylindrical components
        de2_drho = 2.0 * (er * d["er_r"] + ez * d["ez_r"])
        de2_dz = 2.0 * (er * d["er_z"] + ez * d["ez_z"])
        grad = np.zeros_like(xyz)
        safe = rho > 0
        grad[safe, 0] = de2_drho[safe] * xyz[safe, 0] / rho[safe]
        grad[safe, 1] = de2_drho[safe] * xyz[safe, 1] / rho[safe]
        grad[:, 2] = de2_dz
        return e2, grad

    def in_domain(self, xyz):
        xyz, rho, z = _cyl(xyz)
        return self._in_domain_cyl(rho, z)


class GridFieldModel(_BaseFieldModel):
    """Spline superposition of solved basis fields under the drive waveforms.

    The four per-group potentials collapse into two effective splines at
    construction (one static, one oscillating at cos(w1 t)), which halves
    the spline evaluations in the integrator's force loop.
    """

    def __init__(self, basis, drives):
        from scipy.interpolate import RectBivariateSpline

        if drives.eta is None:
            drives.eta = calibrate_eta(basis)
        self.basis = basis
        self.drives = drives
        static = np.zeros_like(basis.potentials["static"])
        osc = np.zeros_like(static)
        u1 = drives.u1_eff
        comps = {"static": (drives.U0, 0.0), "quad": (drives.U2, 0.0),
                 "inner_ac": (0.0, u1), "outer_ac": (0.0, -drives.eta * u1)}
        for role in GROUP_ROLES:
            if role not in basis.potentials:
                continue
            w_st, w_ac = comps[role]
            static = static + w_st * basis.potentials[role]
            osc = osc + w_ac * basis.potentials[role]
        self._s_static = RectBivariateSpline(basis.r, basis.z, static, kx=3, ky=3)
        self._s_osc = RectBivariateSpline(basis.r, basis.z, osc, kx=3, ky=3)

    def _field_cyl(self, rho, z, t):
        if not np.all(self._in_domain_cyl(rho, z)):
            raise OutOfDomainError("field requested outside the solved mesh")
        ct = np.cos(self.drives.omega1 * t)
        er = -(self._s_static.ev(rho, z, dx=1) + ct * self._s_osc.ev(rho, z, dx=1))
        ez = -(self._s_static.ev(rho, z, dy=1) + ct * self._s_osc.ev(rho, z, dy=1))
        return er, ez

    def _field_and_derivs_cyl(self, rho, z, t):
        if not np.all(self._in_domain_cyl(rho, z)):
            raise OutOfDomainError("field requested outside the solved mesh")
        ct = np.cos(self.drives.omega1 * t)

        def ev(dx, dy):
            return -(self._s_static.ev(rho, z, dx=dx, dy=dy)
                     + ct * self._s_osc.ev(rho, z, dx=dx, dy=dy))

        er = ev(1, 0)
        ez = ev(0, 1)
        d = {"er_r": ev(2, 0), "er_z": ev(1, 1), "ez_r": ev(1, 1), "ez_z": ev(0, 2)}
        return er, ez, d

    def _in_domain_cyl(self, rho, z):
        return self.basis.in_domain(rho, z)


class AnalyticFieldModel(_BaseFieldModel):
    """Homogeneous + exact hexapole + exact quadrupole closed form.

    Per-group axisymmetric multipole coefficients (unit volt):
        E_z = e0 - 3 c3 (z^2 - rho^2/2) - 2 c2 z
        E_r = 3 c3 z rho + c2 rho
    i.e. potential  -e0 z + c3 (z^3 - 1.5 z rho^2) + c2 (z^2 - rho^2/2).
    """

    FIT_BALL = 2e-4   # m
    DOMAIN = 1.5e-3   # m, generous validity ball

    def __init__(self, coeffs, drives):
        # coeffs: role -> (e0, c3, c2)
        self.coeffs = coeffs
        self.drives = drives

    @classmethod
    def fit(cls, basis, drives, ball=FIT_BALL, n_samples=4000, seed=7):
        """Least-squares multipole fit of each basis field over a ball."""
        rng = np.random.default_rng(seed)
        u = rng.normal(size=(n_samples, 3))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        pts = u * (ball * rng.random(n_samples) ** (1 / 3))[:, None]
        rho = np.hypot(pts[:, 0], pts[:, 1])
        z = pts[:, 2]
        # design matrices for (E_r, E_z) stacked
        ones = np.ones_like(z)
        zero = np.zeros_like(z)
        A_r = np.column_stack([zero, 3.0 * z * rho, rho])
        A_z = np.column_stack([ones, -3.0 * (z * z - 0.5 * rho * rho), -2.0 * z])
        A = np.vstack([A_r, A_z])
        coeffs = {}
        for role in basis.roles:
            er, ez = basis.field(role, rho, z)
            sol, *_ = np.linalg.lstsq(A, np.concatenate([er, ez]), rcond=None)
            coeffs[role] = tuple(sol)
        if drives.eta is None:
            drives.eta = calibrate_eta(basis)
        return cls(coeffs, drives)

    def _field_cyl(self, rho, z, t):
        er = np.zeros_like(rho); ez = np.zeros_like(rho)
        for role, wgt in self.drives.weights(t).items():
            if role not in self.coeffs:
                continue
            e0, c3, c2 = self.coeffs[role]
            ez = ez + wgt * (e0 - 3.0 * c3 * (z * z - 0.5 * rho * rho) - 2.0 * c2 * z)
            er = er + wgt * (3.0 * c3 * z * rho + c2 * rho)
        return er, ez

    def _field_and_derivs_cyl(self, rho, z, t):
        er = np.zeros_like(rho); ez = np.zeros_like(rho)
        d = {k: np.zeros_like(rho) for k in ("er_r", "er_z", "ez_r", "ez_z")}
        for role, wgt in self.drives.weights(t).items():
            if role not in self.coeffs:
                continue
            e0, c3, c2 = self.coeffs[role]
            ez = ez + wgt * (e0 - 3.0 * c3 * (z * z - 0.5 * rho * rho) - 2.0 * c2 * z)
            er = er + wgt * (3.0 * c3 * z * rho + c2 * rho)
            d["er_r"] += wgt * (3.0 * c3 * z + c2)
            d["er_z"] += wgt * (3.0 * c3 * rho)
            d["ez_r"] += wgt * (3.0 * c3 * rho)
            d["ez_z"] += wgt * (-6.0 * c3 * z - 2.0 * c2)
        return er, ez, d

    def _in_domain_cyl(self, rho, z):
        return rho * rho + z * z <= self.DOMAIN**2


class PatchFieldModel(_BaseFieldModel):
    """Wraps a field model with a static random patch field.

    The patch is a uniform random-direction vector of the given mean
    amplitude plus a smooth zero-mean Gaussian random field (random Fourier
    modes with wavelength ~ correlation length), scaled so that |E_patch|
    has the requested rms dispersion over the 400 um ball.
    """

    N_MODES = 48
    CAL_BALL = 4e-4

    def __init__(self, base, mean_amplitude=8e-3, dispersion=0.4e-3,
                 correlation_length=0.5e-3, seed=0):
        self.base = base
        self.drives = base.drives
        self.mean_amplitude = mean_amplitude
        self.dispersion = dispersion
        self.correlation_length = correlation_length
        self.seed = seed
        rng = np.random.default_rng(seed)
        u = rng.normal(size=3)
        self._uniform = u / np.linalg.norm(u) * mean_amplitude
        if mean_amplitude == 0.0:
            self._uniform = np.zeros(3)
        k0 = TWO_PI / correlation_length
        self._kvecs = rng.normal(size=(self.N_MODES, 3))
        self._kvecs *= k0 / np.linalg.norm(self._kvecs, axis=1, keepdims=True)
        self._phases = rng.uniform(0, TWO_PI, size=(3, self.N_MODES))
        self._amp = 0.0
        if dispersion > 0.0 and mean_amplitude > 0.0:
            self._amp = 1.0
            self._amp = dispersion / self._measure_dispersion(rng)

    def _fluct(self, xyz):
        ph = xyz @ self._kvecs.T  # (n, modes)
        out = np.empty((xyz.shape[0], 3))
        for c in range(3):
            out[:, c] = np.cos(ph + self._phases[c]).sum(axis=1)
        return out * (self._amp * np.sqrt(2.0 / self.N_MODES))

    def _measure_dispersion(self, rng):
        pts = rng.normal(size=(4000, 3))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        pts *= (self.CAL_BALL * rng.random(4000) ** (1 / 3))[:, None]
        mags = np.linalg.norm(self._uniform + self._fluct(pts), axis=1)
        return float(mags.std())

    def patch_field(self, xyz):
        xyz = np.atleast_2d(np.asarray(xyz, dtype=float))
        return self._uniform + self._fluct(xyz)

    def field(self, xyz, t):
        return self.base.field(xyz, t) + self.patch_field(xyz)

    def magnitude_angle(self, xyz, t):
        E = self.field(xyz, t)
        mag = np.linalg.norm(E, axis=1)
        costh = np.clip(np.abs(E[:, 2]) / np.maximum(mag, 1e-300), 0, 1)
        return mag, np.arccos(costh)

    def e2_and_grad(self, xyz, t):
        # patch gradients are ~ dispersion / correlation length: negligible
        # against the trap's own field gradients, but kept for correctness
        xyz = np.atleast_2d(np.asarray(xyz, dtype=float))
        e2_0, grad = self.base.e2_and_grad(xyz, t)
        E0 = self.base.field(xyz, t)
        P = self.patch_field(xyz)
        e2 = e2_0 + 2.0 * np.einsum("ij,ij->i", E0, P) + np.einsum("ij,ij->i", P, P)
        return e2, grad

    def in_domain(self, xyz):
        return self.base.in_domain(xyz)


def apply_patch_field(model, mean_amplitude=8e-3, dispersion=0.4e-3,
                      correlation_length=0.5e-3, seed=0):
    """Perturbed field model with a static random patch field (seeded)."""
    if mean_amplitude == 0.0 and dispersion == 0.0:
        return model
    return PatchFieldModel(model, mean_amplitude, dispersion,
                           correlation_length, seed)
