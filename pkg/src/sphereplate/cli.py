"""Batch command-line front end.

Usage::

    sphereplate COMMAND CONFIG [-o OUT]

The config is plain ``key = value`` text grouped in ``[sections]``. Every
output starts with a header that echoes the fully resolved configuration as
``# key = value`` lines; :func:`config_from_header` turns it back into a
config that reproduces the run. Lines starting with ``##`` carry results.

Exit status: 0 success, 2 configuration error, 3 numerical fault. Faults are
reported on stderr as one ``error: code=N kind=... message=...`` line.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import io
import math
import os
import sys
import warnings
from dataclasses import dataclass
from importlib import resources

import numpy as np
from scipy.constants import e as ELEMENTARY_CHARGE, hbar

from . import __version__
from .edgefit import HarmonicSet, fit_harmonics
from .engine import (
    DESpec,
    Geometry,
    Materials,
    ThetaTable,
    casimir_force,
    de_force,
    derive_theta,
    pfa_force,
    radial_scale,
)
from .experiment import (
    OscillatorParams,
    electrostatic_force,
    min_detectable_force,
    oscillator_psd,
    patch_force,
)
from .materials import Drude, Plasma, ThermalSpec, load_material_table
from .spectral import QuadratureSpec
from .stats import (
    BAND_COLUMNS,
    RunSeries,
    combine_errors,
    difference_band,
    median_estimate,
    normal_estimate,
    total_error,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
COMMANDS = ("force", "pfa", "de", "theta", "electrostatic", "patch", "psd", "edge-fit", "median", "band")
# rad/s per eV
EV = ELEMENTARY_CHARGE / hbar


class ConfigError(ValueError):
    """Malformed or incomplete configuration."""


def _floats(text):
    return [float(t) for t in text.replace(",", " ").split()]


def _words(text):
    return [t.strip().lower() for t in text.replace(",", " ").split() if t.strip()]


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


# section -> key -> (parser, default); default None means "unset"
SCHEMA = {
    "geometry": {"R_m": (float, "1.497e-4"), "z_grid_m": (_floats, None)},
    "material": {
        "model": (_words, "drude, plasma"),
        "omega_p_rad_s": (float, None),
        "gamma_rad_s": (float, None),
        "omega_p_eV": (float, None),
        "gamma_eV": (float, None),
        "material_table": (str, None),
    },
    "thermal": {"T_K": (float, "295.25"), "rel_tol": (float, "1e-8"), "l_max_cap": (int, "100000")},
    "quadrature": {"N": (int, "0"), "M": (int, "0"), "a_inv_m": (float, "0")},
    "de": {"theta_table": (str, None), "derive": (_bool, "true"), "derive_radius_factor": (float, "2.0")},
    "electrostatic": {"V": (float, "0.1"), "V_o": (float, "0.0")},
    "patch": {"V_rms": (float, "0.012"), "l_bar_m": (float, "2.5e-7")},
    "oscillator": {
        "kappa_N_m_rad": (float, "1.07e-9"),
        "Q": (float, "4850"),
        "f_r_Hz": (float, "306.45"),
        "b_m": (float, "2.39e-4"),
        "S_elec": (float, "0"),
        "f_grid_Hz": (_floats, None),
    },
    "edgefit": {"harmonics_file": (str, None), "confidence": (float, "0.99")},
    "stats": {
        "runs_file": (str, None),
        "confidence": (float, "0.95"),
        "t_beta": (float, "1.96"),
        "k_beta": (float, "1.11"),
        "calibration_N": (float, "2e-16"),
        "detection_N": (float, "6e-16"),
        "measurement_N": (_floats, "5e-16"),
    },
    "band": {
        "theory_csv": (str, None),
        "expt_csv": (str, None),
        "model": (str, None),
        "theory_error_N": (_floats, "0"),
        "theory_rel_error": (float, "0"),
        "expt_error_N": (_floats, "0"),
        "include_patch": (_bool, "false"),
    },
}
PATH_KEYS = {("material", "material_table"), ("de", "theta_table"), ("edgefit", "harmonics_file"),
             ("stats", "runs_file"), ("band", "theory_csv"), ("band", "expt_csv")}


@dataclass
class RunConfig:
    """Resolved configuration: parsed values plus their canonical text."""

    values: dict
    text: dict

    def get(self, section, key):
        return self.values[section][key]

    def require(self, section, key):
        v = self.values[section][key]
        if v is None:
            raise ConfigError(f"missing required key [{section}] {key}")
        return v


def gold_defaults() -> dict:
    """Shipped Drude parameters for gold, from ``data/gold.cfg``."""
    cp = configparser.ConfigParser()
    cp.optionxform = str
    cp.read_string(resources.files("sphereplate").joinpath("data/gold.cfg").read_text())
    return {k: cp["material"][k] for k in cp["material"]}


def parse_config(text: str, base_dir: str = ".") -> RunConfig:
    """Parse and validate config text; relative paths resolve against ``base_dir``."""
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc).splitlines()[0]) from None
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
        for key in cp[sec]:
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key [{sec}] {key}")

    gold = gold_defaults()
    values, canon = {}, {}
    for sec, keys in SCHEMA.items():
        values[sec], canon[sec] = {}, {}
        for key, (conv, default) in keys.items():
            raw = cp[sec][key] if cp.has_option(sec, key) else default
            if raw is None and sec == "material" and key in gold:
                raw = gold[key]
            if raw is None:
                values[sec][key] = None
                continue
            raw = raw.strip()
            if (sec, key) in PATH_KEYS and raw:
                raw = raw if os.path.isabs(raw) else os.path.normpath(os.path.join(base_dir, raw))
                if not os.path.exists(raw):
                    raise ConfigError(f"[{sec}] {key}: file not found: {raw}")
            try:
                val = conv(raw)
            except ValueError as exc:
                raise ConfigError(f"[{sec}] {key}: {exc}") from None
            values[sec][key] = val
            canon[sec][key] = raw

    # energy-unit converters live here only; the engine sees rad/s
    mat = values["material"]
    if mat["omega_p_eV"] is not None:
        mat["omega_p_rad_s"] = mat["omega_p_eV"] * EV
    if mat["gamma_eV"] is not None:
        mat["gamma_rad_s"] = mat["gamma_eV"] * EV
    for kind in mat["model"]:
        if kind not in ("drude", "plasma", "tabulated"):
            raise ConfigError(f"[material] model: unknown model '{kind}'")
    if "tabulated" in mat["model"] and not mat["material_table"]:
        raise ConfigError("[material] model=tabulated needs material_table")

    z = values["geometry"]["z_grid_m"]
    if z is not None:
        if not z or any(v <= 0 for v in z) or any(b <= a for a, b in zip(z, z[1:])):
            raise ConfigError("[geometry] z_grid_m must be positive and strictly ascending")
    if values["geometry"]["R_m"] <= 0:
        raise ConfigError("[geometry] R_m must be positive")
    return RunConfig(values, canon)


def render_config(cfg: RunConfig) -> str:
    lines = []
    for sec in SCHEMA:
        lines.append(f"[{sec}]")
        for key, raw in cfg.text[sec].items():
            lines.append(f"{key} = {raw}")
    return "\n".join(lines)


def config_from_header(output_text: str) -> str:
    """Recover the config text echoed in an output header."""
    out = []
    for line in output_text.splitlines():
        if not line.startswith("#"):
            break
        if line.startswith("##") or line.startswith("#!"):
            continue
        out.append(line[2:] if line.startswith("# ") else line[1:])
    return "\n".join(out) + "\n"


# --------------------------------------------------------------------------


def _fmt(x):
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    # shortest repr that round-trips, always in scientific notation
    return np.format_float_scientific(float(x), unique=True, trim="-")


class _Writer:
    def __init__(self, command, cfg):
        self.buf = io.StringIO()
        self.buf.write(f"#! sphereplate {__version__} command={command}\n")
        for line in render_config(cfg).splitlines():
            self.buf.write(f"# {line}\n")
        self.csv = None

    def info(self, **kv):
        self.buf.write("## " + " ".join(f"{k}={_fmt(v)}" for k, v in kv.items()) + "\n")

    def columns(self, *names):
        self.csv = csv.writer(self.buf, lineterminator="\n")
        self.csv.writerow(names)

    def row(self, *vals):
        self.csv.writerow([_fmt(v) for v in vals])

    def text(self):
        return self.buf.getvalue()


def _thermal(cfg):
    t = cfg.values["thermal"]
    return ThermalSpec(t["T_K"], t["rel_tol"], t["l_max_cap"])


def _model(cfg, kind):
    m = cfg.values["material"]
    if kind == "drude":
        return Drude(cfg.require("material", "omega_p_rad_s"), cfg.require("material", "gamma_rad_s"))
    if kind == "plasma":
        return Plasma(cfg.require("material", "omega_p_rad_s"))
    return load_material_table(m["material_table"])


def _quad(cfg):
    q = cfg.values["quadrature"]
    if not (q["N"] or q["M"] or q["a_inv_m"]):
        return None
    if q["N"] < 0 or q["M"] < 0 or q["a_inv_m"] < 0:
        raise ConfigError("[quadrature] overrides must be non-negative")

    def choose(K, geom):
        auto = QuadratureSpec.auto(geom.R, geom.z)
        N = q["N"] or auto.N
        return QuadratureSpec(N, q["M"] or 2 * N, q["a_inv_m"] or radial_scale(geom.z, K))

    return choose


def _zgrid(cfg):
    return cfg.require("geometry", "z_grid_m")


def _cmd_force(cfg, w):
    R, th, quad = cfg.get("geometry", "R_m"), _thermal(cfg), _quad(cfg)
    w.columns("z_m", "model", "F_N", "F_l0_N", "E_J", "l_used")
    for z in _zgrid(cfg):
        for kind in cfg.get("material", "model"):
            res = casimir_force(Geometry(R, z), Materials.same(_model(cfg, kind)), th, quad)
            w.row(z, kind, res.force, res.per_l[0][2], res.free_energy, res.l_used)


def _cmd_pfa(cfg, w):
    R, th = cfg.get("geometry", "R_m"), _thermal(cfg)
    w.columns("z_m", "model", "F_N")
    for z in _zgrid(cfg):
        for kind in cfg.get("material", "model"):
            w.row(z, kind, pfa_force(Geometry(R, z), Materials.same(_model(cfg, kind)), th))


def _cmd_de(cfg, w):
    R, th, quad = cfg.get("geometry", "R_m"), _thermal(cfg), _quad(cfg)
    d = cfg.values["de"]
    table = ThetaTable.load(d["theta_table"]) if d["theta_table"] else None
    spec = DESpec(table, d["derive"], d["derive_radius_factor"], quad)
    w.columns("z_m", "model", "F_N", "F_pfa_N")
    for z in _zgrid(cfg):
        for kind in cfg.get("material", "model"):
            mats, g = Materials.same(_model(cfg, kind)), Geometry(R, z)
            w.row(z, kind, de_force(g, mats, th, spec), pfa_force(g, mats, th))


def _cmd_theta(cfg, w):
    R, th, quad = cfg.get("geometry", "R_m"), _thermal(cfg), _quad(cfg)
    Rd = R * cfg.get("de", "derive_radius_factor")
    w.info(derive_radius_m=Rd)
    zs = _zgrid(cfg)
    cols = {}
    for kind in ("drude", "plasma"):
        cols[kind] = [t for _, t in derive_theta(Rd, zs, Materials.same(_model(cfg, kind)), th, quad, None)]
    # theta-table format: whitespace separated, readable by ThetaTable.load
    for z, td, tp in zip(zs, cols["drude"], cols["plasma"]):
        w.buf.write(f"{_fmt(z)} {_fmt(td)} {_fmt(tp)}\n")


def _cmd_electrostatic(cfg, w):
    R, e = cfg.get("geometry", "R_m"), cfg.values["electrostatic"]
    w.columns("z_m", "F_N")
    for z in _zgrid(cfg):
        w.row(z, electrostatic_force(z, R, e["V"], e["V_o"]))


def _cmd_patch(cfg, w):
    R, p = cfg.get("geometry", "R_m"), cfg.values["patch"]
    w.columns("z_m", "F_N", "asymptotic_ok")
    for z in _zgrid(cfg):
        w.row(z, patch_force(z, R, p["V_rms"], p["l_bar_m"], warn=False), z >= 7e-6)


def _oscillator(cfg):
    o = cfg.values["oscillator"]
    return OscillatorParams(o["kappa_N_m_rad"], o["Q"], o["f_r_Hz"], o["b_m"], cfg.get("thermal", "T_K"), o["S_elec"])


def _cmd_psd(cfg, w):
    p = _oscillator(cfg)
    w.info(min_detectable_force_N_rtHz=min_detectable_force(p))
    f = cfg.get("oscillator", "f_grid_Hz")
    if f is None:
        f = list(np.linspace(p.f_r - 5 * p.f_r / p.Q, p.f_r + 5 * p.f_r / p.Q, 101))
    w.columns("f_Hz", "S_rad2_Hz")
    for fi in f:
        w.row(fi, oscillator_psd(p, fi))


def _cmd_edge_fit(cfg, w):
    e = cfg.values["edgefit"]
    res = fit_harmonics(HarmonicSet.load(cfg.require("edgefit", "harmonics_file")), e["confidence"])
    w.info(sigma_N=res.sigma, dof=res.dof, confidence=res.confidence, b_even_rms_N=res.b_even_rms,
           c_odd_slope_N=res.c_odd_slope, c_odd_slope_ci_N=res.c_odd_slope_ci)
    w.columns("parameter", "value", "ci_half_width")
    for name, val in res.as_dict().items():
        w.row(name, val, res.ci[name])


def _read_runs(path):
    rows = np.loadtxt(path, comments="#", ndmin=2)
    if rows.shape[1] < 5:
        raise ConfigError("runs file needs z_m followed by at least 4 samples per row")
    return [RunSeries(r[0], r[1:]) for r in rows]


def _systematic(cfg, n):
    s = cfg.values["stats"]
    meas = s["measurement_N"]
    if len(meas) == 1:
        meas = meas * n
    if len(meas) != n:
        raise ConfigError("[stats] measurement_N must be a scalar or one value per separation")
    return [combine_errors([s["calibration_N"], s["detection_N"], m], s["k_beta"]) for m in meas]


def _cmd_median(cfg, w):
    s = cfg.values["stats"]
    runs = _read_runs(cfg.require("stats", "runs_file"))
    ests = [median_estimate(r, s["confidence"], s["t_beta"]) for r in runs]
    syst = _systematic(cfg, len(runs))
    i, j = ests[0].indices
    if any(e.indices != (i, j) for e in ests):
        w.info(note="sample counts differ; indices are per row")
    w.info(i=i, j=j, n=runs[0].n)
    w.columns("z_m", "F_median_N", "ci_lo_N", "ci_hi_N", "random_N", "systematic_N", "total_N",
              "F_mean_N", "random_normal_N", "i", "j")
    for r, e, sy in zip(runs, ests, syst):
        nrm = normal_estimate(r, s["t_beta"])
        w.row(r.z, e.value, e.ci[0], e.ci[1], e.random_error, sy, total_error(e.random_error, sy),
              nrm.value, nrm.random_error, e.indices[0], e.indices[1])


def _read_force_csv(path):
    with open(path) as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    rows = list(csv.DictReader(lines))
    if not rows or "z_m" not in rows[0] or "F_N" not in rows[0]:
        raise ConfigError(f"{path}: expected a CSV with z_m and F_N columns")
    return rows


def _per_z(values, n, name):
    if len(values) == 1:
        return values * n
    if len(values) != n:
        raise ConfigError(f"[band] {name} must be a scalar or one value per separation")
    return values


def _cmd_band(cfg, w):
    b = cfg.values["band"]
    theory = _read_force_csv(cfg.require("band", "theory_csv"))
    models = sorted({r.get("model", "") for r in theory})
    model = b["model"] or (models[0] if len(models) == 1 else None)
    if model is None:
        raise ConfigError(f"[band] model must select one of {models}")
    theory = [r for r in theory if r.get("model", "") == model]
    if not theory:
        raise ConfigError(f"[band] no theory rows for model '{model}'")
    n = len(theory)
    zt = [float(r["z_m"]) for r in theory]
    fth = [float(r["F_N"]) for r in theory]
    dth = _per_z(b["theory_error_N"], n, "theory_error_N")
    dth = [d + b["theory_rel_error"] * abs(f) for d, f in zip(dth, fth)]

    if b["expt_csv"]:
        ex = [r for r in _read_force_csv(b["expt_csv"]) if r.get("model", model) == model]
        dex = _per_z(b["expt_error_N"], len(ex), "expt_error_N")
        expt = [(float(r["z_m"]), float(r["F_N"]), d) for r, d in zip(ex, dex)]
    else:
        s = cfg.values["stats"]
        runs = _read_runs(cfg.require("stats", "runs_file"))
        syst = _systematic(cfg, len(runs))
        expt = []
        for r, sy in zip(runs, syst):
            e = median_estimate(r, s["confidence"], s["t_beta"])
            expt.append((r.z, e.value, total_error(e.random_error, sy)))
    if len(expt) != n:
        raise ConfigError("theory and experiment separation grids differ")

    patch = None
    if b["include_patch"]:
        p, R = cfg.values["patch"], cfg.get("geometry", "R_m")
        patch = [abs(patch_force(z, R, p["V_rms"], p["l_bar_m"], warn=False)) for z in zt]
    rows = difference_band(zip(zt, fth, dth), expt, patch)
    w.info(model=model, outside=sum(r.outside for r in rows))
    w.columns(*BAND_COLUMNS)
    for r in rows:
        w.row(*r.as_tuple())


_DISPATCH = {
    "force": _cmd_force,
    "pfa": _cmd_pfa,
    "de": _cmd_de,
    "theta": _cmd_theta,
    "electrostatic": _cmd_electrostatic,
    "patch": _cmd_patch,
    "psd": _cmd_psd,
    "edge-fit": _cmd_edge_fit,
    "median": _cmd_median,
    "band": _cmd_band,
}


def _fail(code, exc, stream):
    msg = str(exc).replace("\n", " ")
    stream.write(f"error: code={code} kind={type(exc).__name__} message={msg!r}\n")
    return code


def run(command: str, config_path: str, out_path: str | None = None, stderr=None) -> int:
    """Execute ``command`` with the config at ``config_path``; return the exit status."""
    stderr = stderr or sys.stderr
    try:
        if command not in _DISPATCH:
            raise ConfigError(f"unknown command '{command}'")
        with open(config_path) as fh:
            cfg = parse_config(fh.read(), os.path.dirname(os.path.abspath(config_path)))
    except (ConfigError, OSError, ValueError) as exc:
        return _fail(EXIT_CONFIG, exc, stderr)

    w = _Writer(command, cfg)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            _DISPATCH[command](cfg, w)
    except ConfigError as exc:
        return _fail(EXIT_CONFIG, exc, stderr)
    except (ArithmeticError, ValueError, np.linalg.LinAlgError) as exc:
        return _fail(EXIT_NUMERIC, exc, stderr)

    text = w.text()
    if out_path:
        with open(out_path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(prog="sphereplate", description="Casimir sphere-plate force toolkit")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("config", help="key = value configuration file")
    ap.add_argument("-o", "--out", help="output file (default: stdout)")
    args = ap.parse_args(argv)
    return run(args.command, args.config, args.out)


if __name__ == "__main__":
    sys.exit(main())
