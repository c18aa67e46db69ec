"""Declarative run configuration: strict JSON schema with unit suffixes.

Every physical quantity carries its unit in the key name; parsing converts
to SI once at this boundary and rejects unknown keys with a path-qualified
message.  An empty document yields the full reference configuration (the
published trap and dressing parameters).
"""

import hashlib
import json
from dataclasses import dataclass, field

from .constants import MASS_RB85, AMU, TWO_PI, RECOIL_780NM
from .errors import ConfigError
from .ensemble import T0_CLASSICAL_BOUND

_REFERENCE = {
    "geometry": "reference",
    "field_mode": "analytic",
    "drives": {
        "U0_V": 0.2,
        "U1_V": 0.155,
        "U2_V": -0.003,
        "omega1_Hz": 430.0,
        "eta": "auto",
    },
    "atom": {
        "mass_amu": 84.911789738,
        "T_sp_ms": 30.0,
        "gamma_s_per_s": 0.0,
        "omega_eg_GHz": 51.099,
        "stark_cap_V_per_m": 1.0e4,
        "i_level_k": -1,
    },
    "dressing": {
        "mode": "optimize",
        "Omega0_MHz": None,
        "delta0_MHz": None,
        "delta0_box_MHz": [430.0, 950.0],
        "objective": "ensemble",
        "basis": {"n_min": 47, "n_max": 54, "k_max": 4},
        "table": {
            "E_min_V_per_m": 375.0,
            "E_max_V_per_m": 425.0,
            "n_E": 201,
            "theta_max_rad": 0.02,
            "n_theta": 7,
        },
    },
    "ensemble": {
        "T0_uK": 0.3,
        "cloud_rms_um": 0.3,
        "n_atoms": 500,
        "recoil_mm_per_s": RECOIL_780NM * 1e3,
        "level": "g",
    },
    "sequence": {
        "kind": "ramsey",
        "t_max_s": 0.55,
        "t_pi_s": 0.5,
        "pulse_dispersion": 0.10,
        "period_s": 0.2,
        "n_echo": 3,
    },
    "run": {
        "seed": 12345,
        "out_dir": "out",
        "cache": "on",
        "rtol": 1.0e-9,
        "threads": 0,
    },
}


def _merge(defaults, doc, path=""):
    if not isinstance(doc, dict):
        raise ConfigError(f"{path or 'document'}: expected an object")
    out = {}
    for key, dval in defaults.items():
        if key in doc:
            v = doc[key]
            if isinstance(dval, dict) and not isinstance(v, dict):
                raise ConfigError(f"{path}{key}: expected an object")
            out[key] = _merge(dval, v, path=f"{path}{key}.") if isinstance(dval, dict) else v
        else:
            out[key] = json.loads(json.dumps(dval)) if isinstance(dval, dict) else dval
    unknown = set(doc) - set(defaults)
    if unknown:
        raise ConfigError(f"{path}{sorted(unknown)[0]}: unknown key")
    return out


def _require_number(doc, path, lo=None, hi=None, allow_none=False):
    keys = path.split(".")
    v = doc
    for k in keys:
        v = v[k]
    if v is None and allow_none:
        return None
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ConfigError(f"{path}: expected a number, got {v!r}")
    if lo is not None and v < lo:
        raise ConfigError(f"{path}: value {v} below allowed minimum {lo}")
    if hi is not None and v > hi:
        raise ConfigError(f"{path}: value {v} above allowed maximum {hi}")
    return float(v)


@dataclass
class RunConfig:
    """Validated configuration in SI units; fully determines all outputs."""
    geometry: object
    field_mode: str
    drives_si: dict
    atom_si: dict
    dressing: dict
    ensemble_si: dict
    sequence: dict
    run: dict
    raw: dict = field(repr=False, default_factory=dict)

    def config_hash(self):
        return hashlib.sha256(
            json.dumps(self.raw, sort_keys=True).encode()).hexdigest()[:16]


def parse_config(document=None):
    """Validate a config document (dict or JSON text); defaults = reference."""
    if document is None:
        document = {}
    if isinstance(document, str):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as ex:
            raise ConfigError(f"malformed JSON: {ex}") from ex
    merged = _merge(_REFERENCE, document)

    geom = merged["geometry"]
    if not (geom == "reference" or isinstance(geom, str)):
        raise ConfigError("geometry: expected 'reference' or a file path")
    if merged["field_mode"] not in ("analytic", "grid"):
        raise ConfigError("field_mode: expected 'analytic' or 'grid'")

    drives = {
        "U0": _require_number(merged, "drives.U0_V"),
        "U1": _require_number(merged, "drives.U1_V", lo=0.0),
        "U2": _require_number(merged, "drives.U2_V"),
        "f1": _require_number(merged, "drives.omega1_Hz", lo=1e-6),
    }
    eta = merged["drives"]["eta"]
    if eta != "auto":
        if not isinstance(eta, (int, float)):
            raise ConfigError("drives.eta: expected 'auto' or a number")
        eta = float(eta)
    drives["eta"] = eta

    atom = {
        "mass": _require_number(merged, "atom.mass_amu", lo=1.0, hi=300.0) * AMU,
        "t_sp": _require_number(merged, "atom.T_sp_ms", lo=1e-3) * 1e-3,
        "gamma_s": _require_number(merged, "atom.gamma_s_per_s", lo=0.0),
        "omega_eg0": TWO_PI * _require_number(merged, "atom.omega_eg_GHz", lo=1.0) * 1e9,
        "field_cap": _require_number(merged, "atom.stark_cap_V_per_m", lo=1e3),
        "i_k": int(_require_number(merged, "atom.i_level_k", lo=-1, hi=1)),
    }
    if atom["i_k"] == 0:
        raise ConfigError("atom.i_level_k: level i needs a nonzero parabolic k")

    dr = merged["dressing"]
    if dr["mode"] not in ("optimize", "explicit", "off"):
        raise ConfigError("dressing.mode: expected optimize | explicit | off")
    if dr["mode"] == "explicit":
        _require_number(merged, "dressing.Omega0_MHz", lo=0.0)
        _require_number(merged, "dressing.delta0_MHz", lo=0.0)
    box = dr["delta0_box_MHz"]
    if (not isinstance(box, list) or len(box) != 2
            or not all(isinstance(v, (int, float)) for v in box) or box[0] >= box[1]):
        raise ConfigError("dressing.delta0_box_MHz: expected [lo, hi] in MHz")

    T0 = _require_number(merged, "ensemble.T0_uK", lo=0.0) * 1e-6
    if T0 < T0_CLASSICAL_BOUND:
        raise ConfigError(
            f"ensemble.T0_uK: {T0*1e6:.3f} uK is below the 100 nK classical-motion "
            f"bound (atomic excursion must stay large against the de Broglie "
            f"wavelength)")
    ens = {
        "T0": T0,
        "cloud_rms": _require_number(merged, "ensemble.cloud_rms_um", lo=0.0) * 1e-6,
        "n_atoms": int(_require_number(merged, "ensemble.n_atoms", lo=1)),
        "recoil": _require_number(merged, "ensemble.recoil_mm_per_s", lo=0.0) * 1e-3,
        "level": merged["ensemble"]["level"],
    }
    if ens["level"] not in ("g", "e"):
        raise ConfigError("ensemble.level: expected 'g' or 'e'")

    seq = merged["sequence"]
    if seq["kind"] not in ("ramsey", "echo", "multi-echo"):
        raise ConfigError("sequence.kind: expected ramsey | echo | multi-echo")
    _require_number(merged, "sequence.t_max_s", lo=1e-4)
    _require_number(merged, "sequence.t_pi_s", lo=1e-4)
    _require_number(merged, "sequence.pulse_dispersion", lo=0.0, hi=1.0)
    _require_number(merged, "sequence.period_s", lo=1e-4)

    run = merged["run"]
    if run["cache"] not in ("on", "off", "rebuild"):
        raise ConfigError("run.cache: expected on | off | rebuild")
    _require_number(merged, "run.rtol", lo=1e-13, hi=1e-3)
    run = dict(run, seed=int(_require_number(merged, "run.seed")))

    return RunConfig(
        geometry=geom,
        field_mode=merged["field_mode"],
        drives_si=drives,
        atom_si=atom,
        dressing=dr,
        ensemble_si=ens,
        sequence=seq,
        run=run,
        raw=merged,
    )


def dump_config(cfg: RunConfig):
    """Round-trippable JSON document of the merged configuration."""
    return json.dumps(cfg.raw, indent=2, sort_keys=True)
