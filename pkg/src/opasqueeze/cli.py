"""Command-line interface.

Usage::

    opasqueeze model    --config CFG [--format json]
    opasqueeze spectrum --config CFG [--out curves.csv]
    opasqueeze fit      --config CFG [--out report.json]
    opasqueeze correct  --config CFG [--out corrected.csv]
    opasqueeze cavity   --config builtin:opa_cavity
    opasqueeze synth    --config CFG [--seed N] [--out data.csv]

Exit codes: 0 success (including a fit that did not converge or an
unstable cavity, both reported as data), 2 invalid input, 3 domain or
physics error.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfg
from .cavity import layout_summary
from .dataio import (
    dataset_to_csv,
    read_dataset_csv,
    read_power_trace,
    rows_to_csv,
    trace_to_csv,
    w_to_mw_text,
)
from .errors import DomainError, InputError
from .estimation import ANTISQUEEZED, PARAM_NAMES, SQUEEZED, FitConfig, fit
from .quadrature import (
    OperatingPoint,
    apply_phase_jitter,
    normalize_and_correct,
    opa_variance_pair,
    to_db,
)
from .synth import (
    PRNG_NAME,
    PRNG_VERSION,
    synth_pump_sweep,
    synth_spectrum,
    synth_zero_span,
)

EXIT_OK, EXIT_INPUT, EXIT_DOMAIN = 0, 2, 3
TOOL = "opasqueeze"
_EXTERNAL_UNITS = {"efficiency": ("eta", 1.0), "threshold_power": ("P_thr_mW", 1e3),
                   "phase_jitter": ("theta_fluc_deg", 180.0 / math.pi)}


@dataclass
class Output:
    text: str
    extra: dict = field(default_factory=dict)  # file name -> content
    default_format: str = "text"


def _json(doc) -> str:
    return json.dumps(doc, indent=2) + "\n"


def _params_external(params) -> dict:
    return {
        "eta": params.efficiency,
        "P_thr_mW": params.threshold_power * 1e3,
        "theta_fluc_deg": math.degrees(params.phase_jitter),
        "cavity": {
            "T": params.cavity.coupler_transmissivity,
            "L": params.cavity.round_trip_loss,
            "round_trip_length_m": params.cavity.round_trip_length,
        },
    }


def _pumps_w(value) -> list:
    values = value if isinstance(value, list) else [value]
    return [v * 1e-3 for v in values]


def _jittered(params, pump_w, f):
    pair = opa_variance_pair(params, OperatingPoint(pump_w, f))
    return apply_phase_jitter(pair, params.phase_jitter)


# ---------------------------------------------------------------- commands


def cmd_model(config, base_dir=None, seed=None, fmt_name=None) -> Output:
    cfg.validate("model", config)
    params = cfg.squeezer_params(config["params"])
    f = float(config["frequency_Hz"])
    rows = []
    for p_w in _pumps_w(config["pump_mW"]):
        pair = _jittered(params, p_w, f)
        rows.append({
            "pump_mW": p_w * 1e3,
            "frequency_Hz": f,
            "squeezed_dB": to_db(pair.v1),
            "antisqueezed_dB": to_db(pair.v2),
            "squeezed_linear": pair.v1,
            "antisqueezed_linear": pair.v2,
        })
    if fmt_name == "json":
        return Output(_json({"schema_version": cfg.SCHEMA_VERSION, "tool": TOOL, "version": __version__,
                             "params": _params_external(params), "points": rows}))
    if fmt_name == "csv":
        cols = list(rows[0])
        return Output(rows_to_csv(cols, [[r[c] for c in cols] for r in rows]))
    lines = []
    for r in rows:
        lines.append(
            f"P = {r['pump_mW']:.6g} mW, f = {r['frequency_Hz']:.6g} Hz: "
            f"{_signed(r['squeezed_dB'])} dB / {_signed(r['antisqueezed_dB'])} dB "
            f"(linear {r['squeezed_linear']:.6g} / {r['antisqueezed_linear']:.6g})"
        )
    return Output("\n".join(lines) + "\n")


def _signed(x: float) -> str:
    s = f"{x:+.2f}"
    return "0.00" if s in ("+0.00", "-0.00") else s


def cmd_spectrum(config, base_dir=None, seed=None, fmt_name=None) -> Output:
    cfg.validate("spectrum", config)
    params = cfg.squeezer_params(config["params"])
    fr = config["frequency_Hz"]
    f_range = (fr["start"], fr["stop"], fr["n"])
    if fr["n"] < 1 or fr["start"] <= 0 or fr["stop"] < fr["start"] or (fr["n"] > 1 and fr["stop"] == fr["start"]):
        raise InputError("frequency_Hz: empty or invalid range", field="frequency_Hz")
    curves = [(params, p) for p in _pumps_w(config["pump_mW"])]
    if config.get("include_zero_phase_noise", False):
        top = max(_pumps_w(config["pump_mW"]))
        curves.append((replace(params, phase_jitter=0.0), top))
    rows = []
    for prm, p_w in curves:
        for f, sq, asq in synth_spectrum(prm, p_w, f_range):
            rows.append((w_to_mw_text(p_w), math.degrees(prm.phase_jitter), f, sq, asq))
    cols = ("pump_mW", "theta_fluc_deg", "frequency_Hz", "squeezed_dB", "antisqueezed_dB")
    if fmt_name == "json":
        return Output(_json({"schema_version": cfg.SCHEMA_VERSION, "columns": cols,
                             "rows": [[float(r[0])] + list(r[1:]) for r in rows]}))
    return Output(rows_to_csv(cols, rows), default_format="csv")


def cmd_fit(config, base_dir=None, seed=None, fmt_name=None) -> Output:
    cfg.validate("fit", config)
    base_dir = Path(base_dir or ".")
    ds_path = Path(config["dataset"])
    if not ds_path.is_absolute():
        ds_path = base_dir / ds_path
    cavity = cfg.cavity_constants(config["cavity"]) if "cavity" in config else None
    dataset = read_dataset_csv(ds_path, cavity)
    raw_bytes = ds_path.read_bytes()

    def si(doc, what):
        out = {}
        for key, value in (doc or {}).items():
            if key in ("eta", "efficiency"):
                out["efficiency"] = float(value)
            elif key in ("P_thr_mW", "P_thr_W"):
                out["threshold_power"] = value * (1e-3 if key.endswith("mW") else 1.0)
            elif key in ("theta_fluc_deg", "theta_fluc_rad"):
                out["phase_jitter"] = math.radians(value) if key.endswith("deg") else float(value)
            else:
                raise InputError(f"{what}: unknown parameter {key!r}", field=f"{what}.{key}")
        return out

    fit_cfg = FitConfig(
        residual_domain=config.get("residual_domain", "db"),
        max_iterations=config.get("max_iterations", 500),
        fixed=si(config.get("fixed"), "fixed"),
        initial=si(config.get("initial"), "initial"),
    )
    result = fit(dataset, fit_cfg)
    params = result.params

    p_all = [pt.pump_power for pt in dataset.points]
    freqs = sorted({pt.frequency for pt in dataset.points})
    n_curve = config.get("curve_points", 50)
    grid = np.linspace(min(p_all), max(p_all), n_curve)
    curve_rows = []
    for f in freqs:
        for p_w in grid:
            pair = _jittered(params, float(p_w), f)
            curve_rows.append((float(p_w) * 1e3, f, to_db(pair.v1), to_db(pair.v2)))
    curve_cols = ("pump_mW", "frequency_Hz", "squeezed_dB", "antisqueezed_dB")

    names = [_EXTERNAL_UNITS[n][0] for n in PARAM_NAMES]
    scales = np.array([_EXTERNAL_UNITS[n][1] for n in PARAM_NAMES])
    values = np.array([params.efficiency, params.threshold_power, params.phase_jitter])
    report = {
        "schema_version": cfg.SCHEMA_VERSION,
        "tool": TOOL,
        "version": __version__,
        "config_hash": cfg.config_hash(config, raw_bytes),
        "inputs": {
            "config": config,
            "dataset": {
                "path": str(config["dataset"]),
                "n_points": len(dataset),
                "csv": raw_bytes.decode(),
            },
        },
        "result": {
            "converged": result.converged,
            "message": result.message,
            "iterations": result.iterations,
            "chi_squared": result.chi_squared,
            "dof": result.dof,
            "reduced_chi_squared": result.reduced_chi_squared if result.dof > 0 else None,
            "free_parameters": [_EXTERNAL_UNITS[n][0] for n in result.free],
            "at_bound": list(result.at_bound),
            "params": dict(zip(names, (values * scales).tolist())),
            "std_errors": dict(zip(names, (result.std_errors * scales).tolist())),
            "covariance": {
                "order": ["eta", "P_thr_W", "theta_fluc_rad"],
                "scaled_by_reduced_chi_squared": result.covariance.tolist(),
                "unscaled": result.covariance_unscaled.tolist(),
            },
            "cavity": _params_external(params)["cavity"],
        },
        "model_curve": {"columns": list(curve_cols), "rows": [list(r) for r in curve_rows]},
    }
    curve_csv = rows_to_csv(curve_cols, curve_rows, {"fit_config_hash": report["config_hash"]})
    curve_name = config.get("curve_out")
    out = Output(_json(report), default_format="json")
    out.extra["curve"] = (curve_name, curve_csv)
    return out


def _source_levels(src, base_dir, name):
    if src is None:
        return None, None, None
    if "level_dB" in src:
        return None, None, 10.0 ** (src["level_dB"] / 10.0)
    path = Path(src["path"])
    if not path.is_absolute():
        path = Path(base_dir) / path
    xname, xs, ps = read_power_trace(path, source=f"{name} ({path})")
    return xname, xs, ps


def cmd_correct(config, base_dir=None, seed=None, fmt_name=None) -> Output:
    cfg.validate("correct", config)
    base_dir = base_dir or "."
    sources = {k: _source_levels(config.get(k), base_dir, k) for k in ("measured", "vacuum", "dark")}
    arrays = {k: v[2] for k, v in sources.items() if v[2] is not None}
    lengths = {k: len(v) for k, v in arrays.items() if np.ndim(v) == 1}
    if len(set(lengths.values())) > 1:
        raise InputError(f"inputs are not aligned: lengths {lengths}", field=next(iter(lengths)))
    xname, xs = "index", None
    for k in ("measured", "vacuum", "dark"):
        if sources[k][1] is not None:
            xname, xs = sources[k][0], sources[k][1]
            break
    dark = arrays.get("dark", 0.0)
    corrected = normalize_and_correct(arrays["measured"], arrays["vacuum"], dark)
    corrected = np.atleast_1d(corrected)
    n = len(corrected)
    if xs is None:
        xs = [str(i) for i in range(n)]
    rows = [(x, to_db(float(v))) for x, v in zip(xs, corrected)]
    header = {"dark_corrected": "yes" if "dark" in arrays else "no", "reference": "vacuum = 0 dB"}
    return Output(rows_to_csv((xname, "value_dB"), rows, header), default_format="csv")


def cmd_cavity(config, base_dir=None, seed=None, fmt_name=None) -> Output:
    cfg.validate("cavity", config)
    layout, loss = cfg.layout_from_doc(config)
    s = layout_summary(layout, loss)
    report = {
        "schema_version": cfg.SCHEMA_VERSION,
        "name": config.get("name", ""),
        "stable": s["stable"],
        "stability_parameter": s["stability_parameter"],
        "optical_round_trip_length_mm": s["optical_round_trip_length_m"] * 1e3,
        "physical_length_mm": s["physical_length_m"] * 1e3,
        "free_spectral_range_Hz": s["free_spectral_range_Hz"],
        "finesse": s["finesse"],
        "fwhm_Hz": s["fwhm_Hz"],
        "decay_rate_per_s": s["decay_rate_per_s"],
        "decay_linewidth_Hz": s.get("decay_linewidth_Hz"),
    }
    if s["stable"]:
        report.update(
            waist_radius_um=s["waist_radius_m"] * 1e6,
            waist_position_mm=s["waist_position_m"] * 1e3,
            rayleigh_range_mm=s["rayleigh_range_m"] * 1e3,
        )
    else:
        g = s["stability_parameter"]
        report["diagnostic"] = (
            f"no stable eigenmode: stability parameter {g:.6g} is outside the open interval (0, 1)"
        )
    if fmt_name == "csv":
        return Output(rows_to_csv(("quantity", "value"),
                                  [(k, "" if v is None else v) for k, v in report.items()]),
                      default_format="csv")
    return Output(_json(report), default_format="json")


def cmd_synth(config, base_dir=None, seed=None, fmt_name=None) -> Output:
    cfg.validate("synth", config)
    params = cfg.squeezer_params(config["params"])
    if seed is None:
        seed = config.get("seed", 0)
    spec = cfg.trace_spec(config.get("trace"), seed)
    header = {
        "generator": f"{TOOL} {__version__}",
        "seed": str(seed),
        "prng": f"{PRNG_NAME} v{PRNG_VERSION}",
        "relative_scatter": repr(float(spec.scatter)),
        "config_hash": cfg.config_hash(config, str(seed).encode()),
    }
    kind = config["kind"]
    if kind == "sweep":
        if "pump_mW" not in config or "frequency_Hz" not in config:
            raise InputError("sweep needs pump_mW and frequency_Hz", field="pump_mW")
        if isinstance(config["frequency_Hz"], dict):
            raise InputError("sweep frequency_Hz must be a single number", field="frequency_Hz")
        ds = synth_pump_sweep(
            params, _pumps_w(config["pump_mW"]), float(config["frequency_Hz"]), spec,
            pump_jitter_rel=config.get("pump_jitter_rel", 0.03),
            level_scatter_db=config.get("level_scatter_dB"),
        )
        ds = replace(ds, metadata={})
        return Output(dataset_to_csv(ds, header), default_format="csv")
    if kind == "trace":
        tag = {"sqz": SQUEEZED, "antisqz": ANTISQUEEZED}.get(config.get("quadrature", "sqz"),
                                                            config.get("quadrature"))
        pumps = _pumps_w(config.get("pump_mW", 0.0))
        if len(pumps) != 1:
            raise InputError("trace needs a single pump_mW", field="pump_mW")
        f = config.get("frequency_Hz", 5e6)
        if isinstance(f, dict):
            raise InputError("trace frequency_Hz must be a single number", field="frequency_Hz")
        trace = synth_zero_span(params, OperatingPoint(pumps[0], float(f)), tag, spec)
        return Output(trace_to_csv(trace, header), default_format="csv")
    fr = config.get("frequency_Hz")
    if not isinstance(fr, dict):
        raise InputError("spectrum needs a frequency_Hz range", field="frequency_Hz")
    rows = []
    for p_w in _pumps_w(config.get("pump_mW", [])):
        for f, sq, asq in synth_spectrum(params, p_w, (fr["start"], fr["stop"], fr["n"]), spec):
            rows.append((w_to_mw_text(p_w), f, sq, asq))
    return Output(rows_to_csv(("pump_mW", "frequency_Hz", "squeezed_dB", "antisqueezed_dB"), rows, header),
                  default_format="csv")


COMMANDS = {
    "model": cmd_model,
    "spectrum": cmd_spectrum,
    "fit": cmd_fit,
    "correct": cmd_correct,
    "cavity": cmd_cavity,
    "synth": cmd_synth,
}

_DEFAULT_CONFIGS = {
    "model": "builtin:model_operating_point",
    "spectrum": "builtin:spectrum_pump_series",
    "fit": "builtin:fit_pump_sweep",
    "cavity": "builtin:opa_cavity",
    "synth": "builtin:synth_pump_sweep",
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="JSON config file, or builtin:NAME for a bundled example")
    common.add_argument("--seed", type=int, default=None, help="override the config seed (synth)")
    common.add_argument("--out", metavar="PATH", default=None, help="output file (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"), default=None, dest="fmt")
    parser = argparse.ArgumentParser(prog=TOOL, description=__doc__.split("\n")[0])
    parser.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def _write(path: Path | None, text: str):
    if path is None:
        sys.stdout.write(text)
    else:
        path.write_bytes(text.encode())


def run(command: str, config_ref: str | None, seed=None, out=None, fmt_name=None) -> Output:
    ref = config_ref or _DEFAULT_CONFIGS.get(command)
    if ref is None:
        raise InputError(f"{command} needs --config", field="--config")
    config, base_dir = cfg.load_config(ref)
    return COMMANDS[command](config, base_dir=base_dir, seed=seed, fmt_name=fmt_name)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out_path = Path(args.out) if args.out else None
    try:
        result = run(args.command, args.config, seed=args.seed, out=out_path, fmt_name=args.fmt)
        _write(out_path, result.text)
        for key, (name, content) in result.extra.items():
            if name:
                target = Path(name)
            elif out_path is not None:
                target = out_path.with_name(out_path.stem + f"_{key}.csv")
            else:
                continue
            target.write_bytes(content.encode())
    except InputError as exc:
        print(f"{TOOL} {args.command}: input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except DomainError as exc:
        print(f"{TOOL} {args.command}: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
