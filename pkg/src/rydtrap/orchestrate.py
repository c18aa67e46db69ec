"""Run pipeline: solve/cache fields -> calibrate -> dress -> table -> experiment.

Each stage's product is cached on disk keyed by the relevant config hash;
summary.json is written last as the completion marker, and a partial
failure leaves failure.json naming the stage and cause.  Outputs are
deterministic for a fixed config + seed (timestamps go to the log only).
"""

import csv
import hashlib
import json
import logging
import os

import numpy as np

from . import geometry as geo
from .config import RunConfig, dump_config
from .constants import TWO_PI
from .dressing import DressingConfig, DressedTable, build_dressed_table, optimize_dressing
from .dynamics import (DressedPotential, StarkPotential, mean_theta,
                       stern_gerlach_separation, trap_depth, trap_frequencies,
                       integrate_batch)
from .ensemble import (EnsembleSpec, PulseSequence, echo_revival, extract_t2,
                       run_sequence, sample_ensemble)
from .errors import RydtrapError
from .fieldmodel import AnalyticFieldModel, DriveWaveforms, GridFieldModel, calibrate_eta
from .fieldsolver import solve_basis_fields
from .stark import LEVEL_E, LEVEL_G, StarkModel, second_order_coeff

log = logging.getLogger(__name__)


class Workspace:
    """Materialized run objects built lazily from a RunConfig."""

    def __init__(self, cfg: RunConfig):
        self.cfg = cfg
        self.out_dir = cfg.run["out_dir"]
        os.makedirs(self.out_dir, exist_ok=True)
        self.cache_dir = os.path.join(self.out_dir, "cache")
        self._basis = None
        self._field_model = None
        self._stark = None
        self._dressing = None
        self._table = None

    # --- stages -----------------------------------------------------------
    def geometry(self):
        if self.cfg.geometry == "reference":
            return geo.reference_geometry()
        return geo.load_geometry(self.cfg.geometry)

    def basis(self):
        if self._basis is None:
            g = self.geometry()
            cache = None
            if self.cfg.run["cache"] != "off":
                cache = os.path.join(self.cache_dir, f"basis_{g.content_hash()[:16]}.npz")
                if self.cfg.run["cache"] == "rebuild" and os.path.exists(cache):
                    os.remove(cache)
            self._basis = solve_basis_fields(g, cache_path=cache)
        return self._basis

    def drives(self):
        d = self.cfg.drives_si
        eta = None if d["eta"] == "auto" else d["eta"]
        ac = geo.AC_DRIVE_FRACTION if self.cfg.geometry == "reference" else 1.0
        return DriveWaveforms(U0=d["U0"], U1=d["U1"], U2=d["U2"], f1=d["f1"],
                              eta=eta, ac_fraction=ac)

    def field_model(self):
        if self._field_model is None:
            basis = self.basis()
            drives = self.drives()
            if drives.eta is None:
                drives.eta = calibrate_eta(basis)
            if self.cfg.field_mode == "analytic":
                self._field_model = AnalyticFieldModel.fit(basis, drives)
            else:
                self._field_model = GridFieldModel(basis, drives)
        return self._field_model

    def stark_model(self):
        if self._stark is None:
            a = self.cfg.atom_si
            self._stark = StarkModel(field_cap=a["field_cap"], gamma_s=a["gamma_s"],
                                     i_k=a["i_k"], omega_eg0=a["omega_eg0"],
                                     t_sp=a["t_sp"])
        return self._stark

    def field_at_origin(self):
        return float(self.field_model().magnitude_angle(np.zeros((1, 3)), 0.0)[0][0])

    def dressing_config(self):
        if self._dressing is None:
            dr = self.cfg.dressing
            E_a = self.field_at_origin()
            if dr["mode"] == "off":
                self._dressing = DressingConfig(omega_rabi=0.0, delta0=TWO_PI * 556.23e6,
                                                E_a=E_a, basis=dict(dr["basis"]))
            elif dr["mode"] == "explicit":
                self._dressing = DressingConfig(
                    omega_rabi=TWO_PI * dr["Omega0_MHz"] * 1e6,
                    delta0=TWO_PI * dr["delta0_MHz"] * 1e6,
                    E_a=E_a, basis=dict(dr["basis"]))
            else:
                box = tuple(TWO_PI * v * 1e6 for v in dr["delta0_box_MHz"])
                trace = os.path.join(self.out_dir, "dressing_trace.csv")
                cfg, _ = optimize_dressing(self.stark_model(), E_a,
                                           delta0_box=box, objective=dr["objective"],
                                           basis=dict(dr["basis"]), trace=trace)
                self._dressing = cfg
        return self._dressing

    def table(self):
        if self._table is None:
            dcfg = self.dressing_config()
            tb = self.cfg.dressing["table"]
            key_src = json.dumps([dcfg.to_dict(), tb], sort_keys=True)
            key = hashlib.sha256(key_src.encode()).hexdigest()[:16]
            cache = os.path.join(self.cache_dir, f"table_{key}.npz")
            if self.cfg.run["cache"] == "on" and os.path.exists(cache):
                try:
                    self._table = DressedTable.load(cache)
                    log.info("dressed table cache hit: %s", cache)
                    return self._table
                except Exception as ex:
                    log.warning("table cache rejected (%s); rebuilding", ex)
            if dcfg.omega_rabi == 0.0:
                # undressed: widen the field range, the bare line moves fast
                E_a = dcfg.E_a
                self._table = build_dressed_table(
                    self.stark_model(), dcfg, E_range=(E_a - 10, E_a + 10),
                    n_E=tb["n_E"], theta_max=tb["theta_max_rad"], n_theta=3)
            else:
                self._table = build_dressed_table(
                    self.stark_model(), dcfg,
                    E_range=(tb["E_min_V_per_m"], tb["E_max_V_per_m"]),
                    n_E=tb["n_E"], theta_max=tb["theta_max_rad"],
                    n_theta=tb["n_theta"])
            if self.cfg.run["cache"] != "off":
                os.makedirs(self.cache_dir, exist_ok=True)
                self._table.save(cache)
        return self._table

    def ensemble_spec(self, n_atoms=None, T0=None):
        e = self.cfg.ensemble_si
        return EnsembleSpec(T0=T0 if T0 is not None else e["T0"],
                            cloud_rms=e["cloud_rms"],
                            recoil_speed=e["recoil"],
                            n_atoms=n_atoms if n_atoms is not None else e["n_atoms"],
                            seed=self.cfg.run["seed"],
                            mass=self.cfg.atom_si["mass"])

    def level_potential(self, level_label=None):
        lev = {"g": LEVEL_G, "e": LEVEL_E}[level_label or self.cfg.ensemble_si["level"]]
        return StarkPotential(self.field_model(), level=lev,
                              mass=self.cfg.atom_si["mass"])

    def thermal_sampler(self):
        def sampler(T0, n, seed):
            spec = EnsembleSpec(T0=T0, cloud_rms=self.cfg.ensemble_si["cloud_rms"],
                                recoil_speed=self.cfg.ensemble_si["recoil"],
                                n_atoms=n, seed=self.cfg.run["seed"] + seed,
                                mass=self.cfg.atom_si["mass"])
            return sample_ensemble(spec)
        return sampler


# ---------------------------------------------------------------------------
# experiments
# ---------------------------------------------------------------------------

def _write_contrast_csv(path, result):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["t_s", "contrast", "survival", "stderr"])
        n = max(int(result.alive.sum()), 1)
        for k in range(result.t.size):
            stderr = np.sqrt(max(1.0 - result.contrast[k] ** 2, 0.0) / n)
            wr.writerow([result.t[k], result.contrast[k], result.survival[k], stderr])


def _write_phases_csv(path, result, n_checkpoints=11):
    ks = np.linspace(0, result.t.size - 1, n_checkpoints).astype(int)
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(["atom"] + [f"phi_at_{result.t[k]:.6f}s_rad" for k in ks])
        for j in range(result.phases.shape[1]):
            wr.writerow([j] + [result.phases[k, j] for k in ks])


def run_experiment(ws: Workspace, experiment, **overrides):
    """Execute one named experiment; returns the summary dict."""
    cfg = ws.cfg
    summary = {
        "experiment": experiment,
        "config_hash": cfg.config_hash(),
        "seed": cfg.run["seed"],
        "config": json.loads(dump_config(cfg)),
    }

    if experiment == "solve-field":
        basis = ws.basis()
        summary["mesh_step_m"] = basis.mesh_step
        summary["groups"] = basis.roles
        summary["E_origin_V_per_m"] = ws.field_at_origin()

    elif experiment == "calibrate":
        basis = ws.basis()
        summary["eta"] = calibrate_eta(basis)
        summary["E_origin_V_per_m"] = ws.field_at_origin()

    elif experiment == "frequencies":
        pot = ws.level_potential()
        f_long, f_trans = trap_frequencies(pot, duration=overrides.get("duration", 0.4))
        summary["f_long_Hz"] = f_long
        summary["f_trans_Hz"] = f_trans
        summary["drive_Hz"] = cfg.drives_si["f1"]

    elif experiment == "depth":
        pot = ws.level_potential()
        result = trap_depth(pot, ws.thermal_sampler(),
                            n_atoms=overrides.get("n_atoms", 200),
                            probe_duration=overrides.get("probe_duration", 0.2))
        summary["depth_uK"] = result["depth_K"] * 1e6
        summary["ci_fraction"] = result["ci_fraction"]
        summary["saturated"] = result["saturated"]
        summary["history"] = [[t * 1e6, f] for t, f in result["history"]]

    elif experiment == "lifetime":
        pot = ws.level_potential()
        spec = ws.ensemble_spec(n_atoms=overrides.get("n_atoms", 40),
                                T0=overrides.get("T0", 90e-6))
        pos, vel = sample_ensemble(spec)
        batch = integrate_batch(pot, pos, vel, overrides.get("duration", 0.1),
                                rtol=1e-8)
        stats = mean_theta(batch, ws.stark_model(), gamma_s=cfg.atom_si["gamma_s"])
        summary.update({k: v for k, v in stats.items()})
        summary["T0_uK"] = spec.T0 * 1e6
        summary["survival"] = float(batch.alive.mean())

    elif experiment == "dress-optimize":
        dcfg = ws.dressing_config()
        atom = ws.table()
        summary["dressing"] = dcfg.to_dict()
        summary["Omega0_MHz"] = dcfg.omega_rabi / TWO_PI / 1e6
        summary["Omega0_quote_MHz"] = 4.0 * dcfg.omega_rabi / TWO_PI / 1e6
        summary["delta0_MHz"] = dcfg.delta0 / TWO_PI / 1e6
        Es = np.linspace(dcfg.E_a - 1, dcfg.E_a + 1, 41)
        w = atom.omega_eg(Es, np.zeros_like(Es))
        summary["variation_over_pm1Vm_Hz"] = float((w.max() - w.min()) / TWO_PI)

    elif experiment in ("ramsey", "echo", "multi-echo"):
        table = ws.table()
        seq_cfg = cfg.sequence
        disp = seq_cfg["pulse_dispersion"]
        if experiment == "ramsey":
            seq = PulseSequence.ramsey()
            duration = seq_cfg["t_max_s"]
        elif experiment == "echo":
            seq = PulseSequence.echo(t_pi=seq_cfg["t_pi_s"], dispersion=disp)
            duration = 2.24 * seq_cfg["t_pi_s"]
        else:
            seq = PulseSequence.multi_echo(seq_cfg["period_s"], seq_cfg["n_echo"],
                                           dispersion=disp)
            duration = seq_cfg["period_s"] * (seq_cfg["n_echo"] + 0.2)
        spec = ws.ensemble_spec()
        result = run_sequence(spec, seq, table, ws.field_model(),
                              duration=overrides.get("duration", duration),
                              rtol=cfg.run["rtol"])
        _write_contrast_csv(os.path.join(ws.out_dir, "contrast.csv"), result)
        if overrides.get("phases_csv", True):
            _write_phases_csv(os.path.join(ws.out_dir, "phases.csv"), result)
        t2 = extract_t2(result.t, result.contrast)
        summary["t2_half_contrast_s"] = t2["t2"]
        summary["t2_saturated"] = t2["saturated"]
        summary["survival_final"] = float(result.alive.mean())
        summary["contrast_final"] = float(result.contrast[-1])
        if experiment == "echo":
            rev = echo_revival(result.t, result.contrast, 2 * seq_cfg["t_pi_s"])
            summary["revival"] = rev
        summary["dressing"] = table.config.to_dict()

    elif experiment == "stern-gerlach":
        table = ws.table() if overrides.get("dressed", False) else None
        fm = ws.field_model()
        mass = cfg.atom_si["mass"]
        if table is None:
            pot_e = StarkPotential(fm, level=LEVEL_E, mass=mass)
            pot_g = StarkPotential(fm, level=LEVEL_G, mass=mass)
        else:
            pot_e = DressedPotential(fm, table, branch="e", mass=mass)
            pot_g = DressedPotential(fm, table, branch="g", mass=mass)
        spec = ws.ensemble_spec(n_atoms=1)
        pos, vel = sample_ensemble(spec)
        t, sep, crossing, flags = stern_gerlach_separation(
            pot_e, pot_g, pos[0], vel[0], overrides.get("duration", 0.05),
            threshold=overrides.get("threshold", 0.8e-6))
        summary["separation_final_m"] = float(sep[-1])
        summary["crossing_time_s"] = None if np.isnan(crossing) else float(crossing)
        summary["threshold_m"] = overrides.get("threshold", 0.8e-6)
        summary["flags"] = flags
        np.savetxt(os.path.join(ws.out_dir, "separation.csv"),
                   np.column_stack([t, sep]), delimiter=",",
                   header="t_s,separation_m", comments="")

    else:
        raise RydtrapError(f"unknown experiment {experiment!r}")

    return summary


def orchestrate(cfg: RunConfig, experiment, **overrides):
    """Run an experiment end to end, writing summary.json or failure.json."""
    ws = Workspace(cfg)
    try:
        summary = run_experiment(ws, experiment, **overrides)
    except Exception as ex:
        failure = {"experiment": experiment, "stage": type(ex).__name__,
                   "cause": str(ex), "config_hash": cfg.config_hash()}
        with open(os.path.join(ws.out_dir, "failure.json"), "w") as fh:
            json.dump(failure, fh, indent=2, sort_keys=True)
        raise
    path = os.path.join(ws.out_dir, "summary.json")
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True, default=float)
    return summary
