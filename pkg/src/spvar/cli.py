"""Command-line entry point.

Every subcommand reads one JSON config, writes its outputs plus a manifest
into the output directory, and exits 0 on success, 2 on a configuration
problem, 3 on a data problem, and 4 on a numerical failure. Outputs are
byte-identical for identical configs and seeds, whatever --threads says.
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from . import __version__
from .bootstrap import bootstrap_bands, bootstrap_engine
from .config import (
    bootstrap_from_config,
    build_spec,
    clip_from_config,
    garch_from_config,
    garch_label,
    pattern_from_config,
    require,
    scheme_from_config,
    validate_config,
)
from .diagnostics import (
    periodic_acf,
    sample_acf,
    seasonal_demean,
    spectral_density,
    whiteness_summary,
)
from .errors import ConfigError, DataError, NumericalError
from .estimation import build_design, fit_constrained
from .identification import identify, structural_irf
from .io import (
    config_hash,
    load_json,
    params_doc,
    params_from_doc,
    read_csv_matrix,
    write_csv,
    write_json,
)
from .model import PvarSpec
from .panel import TimeSeriesPanel, diff_log
from .restrictions import build_restrictions
from .rng import substream
from .simulation import coverage_experiment, garch_shocks, simulate_spvar


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        _HANDLERS[args.command](args)
    except ConfigError as exc:
        return _fail("config", exc, 2)
    except DataError as exc:
        return _fail("data", exc, 3)
    except NumericalError as exc:
        return _fail("numerical", exc, 4)
    return 0


def _fail(category: str, exc: Exception, code: int) -> int:
    detail = " ".join(str(exc).split())
    print(f"spvar: error: [{category}] {detail}", file=sys.stderr)
    return code


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="spvar",
        description="Periodic VAR estimation, identification, and bootstrap inference",
    )
    parser.add_argument("--version", action="version", version=f"spvar {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    descriptions = {
        "fit": "estimate the model and write params.json",
        "identify": "fit and identify structural shocks; write structural.json",
        "irf": "fit, identify, and write structural responses to irf.csv",
        "bootstrap-ci": "bootstrap confidence bands; write bands.csv",
        "simulate": "generate synthetic data; write simulated.csv",
        "coverage": "Monte Carlo band coverage; write coverage.csv",
        "diagnose": "seasonality and whiteness diagnostics; write acf/sd/whiteness CSVs",
    }
    for name, desc in descriptions.items():
        p = sub.add_parser(name, help=desc)
        p.add_argument("--config", required=True, help="path to the JSON run config")
        p.add_argument("--seed", type=int, default=None, help="override the master seed")
        p.add_argument("--out", default=None, help="override the output directory")
        p.add_argument("--threads", type=int, default=None,
                       help="worker processes (default: SPVAR_THREADS or config)")
        if name in ("bootstrap-ci", "coverage"):
            p.add_argument("--b", type=int, default=None, help="override the block length")
            p.add_argument("--L", type=int, default=None, help="override the number of draws")
            p.add_argument("--alpha", type=float, default=None, help="override the band level")
    return parser


def _effective_config(args) -> dict:
    raw = load_json(args.config)
    if not isinstance(raw, dict):
        raise ConfigError(f"{args.config}: top level must be an object")
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.out is not None:
        raw["out_dir"] = args.out
    for flag, key in (("b", "b"), ("L", "L"), ("alpha", "alpha")):
        value = getattr(args, flag, None)
        if value is not None:
            boot = raw.setdefault("bootstrap", {})
            if not isinstance(boot, dict):
                raise ConfigError("bootstrap: must be an object")
            boot[key] = value
    cfg = validate_config(raw)
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("threads: must be >= 1")
        cfg["threads"] = args.threads
    elif "SPVAR_THREADS" in os.environ:
        env = os.environ["SPVAR_THREADS"]
        try:
            cfg["threads"] = int(env)
        except ValueError:
            raise ConfigError(f"SPVAR_THREADS: {env!r} is not an integer") from None
        if cfg["threads"] < 1:
            raise ConfigError("SPVAR_THREADS: must be >= 1")
    return cfg


def _out_dir(cfg: dict) -> str:
    path = cfg["out_dir"]
    os.makedirs(path, exist_ok=True)
    return path


def _write_manifest(cfg: dict, command: str):
    write_json(os.path.join(_out_dir(cfg), "manifest.json"), {
        "command": command,
        "version": __version__,
        "seed": cfg["seed"],
        "config_hash": config_hash(cfg),
    })


def _load_panel(cfg: dict, command: str) -> tuple[TimeSeriesPanel, PvarSpec]:
    path = require(cfg, "data", command)
    names, data = read_csv_matrix(path)
    if "var_names" in cfg:
        if len(cfg["var_names"]) != data.shape[1]:
            raise ConfigError(
                f"var_names: {len(cfg['var_names'])} names for {data.shape[1]} columns"
            )
        names = tuple(cfg["var_names"])
    S = require(cfg, "num_seasons", command)
    transforms = cfg.get("transforms", {})
    if transforms:
        cols = []
        for nm in transforms:
            if nm not in names:
                raise ConfigError(f"transforms.{nm}: unknown variable")
            cols.append(names.index(nm))
        data = diff_log(data, S, tuple(sorted(cols)))
    presample = None
    pre_cfg = cfg["presample"]
    if pre_cfg["policy"] == "require" and pre_cfg["rows"] > 0:
        rows = pre_cfg["rows"]
        if rows >= data.shape[0]:
            raise DataError(f"presample of {rows} rows leaves no data")
        presample, data = data[:rows], data[rows:]
    panel = TimeSeriesPanel(data=data, num_seasons=S, presample=presample,
                            var_names=names)
    return panel, build_spec(cfg, panel.num_vars, names)


def _fit_pipeline(cfg: dict, command: str):
    panel, spec = _load_panel(cfg, command)
    pattern = pattern_from_config(cfg["restrictions"], spec)
    restr = build_restrictions(spec, pattern)
    design = build_design(panel, spec, cfg["presample"]["policy"])
    result = fit_constrained(design, restr, cfg["degrees_of_freedom"])
    return panel, spec, restr, design, result


def _fit_info(result, design) -> dict:
    return {
        "free_parameters": result.restrictions.free_count,
        "num_cycles": design.num_cycles,
        "k": list(result.k),
        "gamma": result.gamma,
        "cond": result.cond,
        "stationarity_margin": result.stationarity_margin,
        "stationary": result.is_stationary,
        "sigma_pd": result.sigma_pd,
        "df_mode": result.df_mode,
    }


def cmd_fit(args):
    cfg = _effective_config(args)
    _, _, restr, design, result = _fit_pipeline(cfg, "fit")
    out = _out_dir(cfg)
    write_json(os.path.join(out, "params.json"),
               params_doc(result.params, _fit_info(result, design)))
    _write_manifest(cfg, "fit")
    print(f"fit: {restr.free_count} free parameters, {design.num_cycles} cycles, "
          f"margin {result.stationarity_margin:.4f}")


def cmd_identify(args):
    cfg = _effective_config(args)
    _, _, _, design, result = _fit_pipeline(cfg, "identify")
    scheme = scheme_from_config(cfg["identification"], design.var_names)
    sfit = identify(result.params, scheme, result.residuals)
    doc = {
        "kind": scheme.kind,
        "short_zeros": [list(z) for z in scheme.short_zeros],
        "long_zeros": [list(z) for z in scheme.long_zeros],
        "normalize": list(scheme.normalize) if scheme.normalize else None,
        "h0": sfit.h0,
        "longrun": sfit.longrun,
    }
    out = _out_dir(cfg)
    write_json(os.path.join(out, "structural.json"), doc)
    _write_manifest(cfg, "identify")
    print(f"identify: {scheme.kind}, {result.params.spec.num_seasons} impact matrices")


def cmd_irf(args):
    cfg = _effective_config(args)
    _, spec, _, design, result = _fit_pipeline(cfg, "irf")
    scheme = scheme_from_config(cfg["identification"], design.var_names)
    sfit = identify(result.params, scheme, result.residuals)
    sirf = structural_irf(sfit, cfg["horizon"])
    names = spec.var_names
    rows = []
    for s in range(1, spec.num_seasons + 1):
        for k in range(cfg["horizon"] + 1):
            for i in range(spec.num_vars):
                for j in range(spec.num_vars):
                    rows.append((s, k, names[i], f"shock{j + 1}",
                                 float(sirf.values[s - 1, k, i, j])))
    out = _out_dir(cfg)
    write_csv(os.path.join(out, "irf.csv"),
              ["season", "horizon", "response", "shock", "value"], rows)
    _write_manifest(cfg, "irf")
    print(f"irf: horizons 0..{cfg['horizon']} written")


def cmd_bootstrap_ci(args):
    cfg = _effective_config(args)
    panel, spec, restr, design, _ = _fit_pipeline(cfg, "bootstrap-ci")
    scheme = scheme_from_config(cfg["identification"], design.var_names)
    bcfg = bootstrap_from_config(cfg["bootstrap"], cfg["seed"])
    draws = bootstrap_engine(
        panel, spec, restr, scheme, bcfg, cfg["horizon"],
        df_mode=cfg["degrees_of_freedom"],
        presample_policy=cfg["presample"]["policy"],
        threads=cfg["threads"],
    )
    bands = bootstrap_bands(draws)
    names = spec.var_names
    rows = []
    for s in range(1, spec.num_seasons + 1):
        for k in range(cfg["horizon"] + 1):
            for i in range(spec.num_vars):
                for j in range(spec.num_vars):
                    rows.append((
                        s, k, names[i], f"shock{j + 1}",
                        float(bands.point.values[s - 1, k, i, j]),
                        float(bands.lower[s - 1, k, i, j]),
                        float(bands.upper[s - 1, k, i, j]),
                        bands.method,
                    ))
    out = _out_dir(cfg)
    write_csv(os.path.join(out, "bands.csv"),
              ["season", "horizon", "response", "shock", "value", "lower", "upper",
               "ci_method"],
              rows)
    _write_manifest(cfg, "bootstrap-ci")
    print(f"bootstrap-ci: {bands.num_draws} draws kept, {bands.num_failed} failed, "
          f"{bands.method} bands at alpha = {bands.alpha}, "
          f"b^3/T = {bcfg.block_diagnostic(panel.num_obs):.4g}")


def _params_from_value(value):
    doc = load_json(value) if isinstance(value, str) else value
    if not isinstance(doc, dict):
        raise ConfigError("params: must be a file path or a parameter object")
    return params_from_doc(doc)


def cmd_simulate(args):
    cfg = _effective_config(args)
    sim = require(cfg, "simulate", "simulate")
    params = _params_from_value(sim["params"])
    spec = params.spec
    scheme = scheme_from_config(cfg["identification"], spec.var_names)
    sfit = identify(params, scheme)
    garch = garch_from_config(sim["garch"])
    clip = clip_from_config(sim["clip"], spec.var_names, "simulate.clip")
    total = (sim["burn_cycles"] + sim["cycles"]) * spec.num_seasons
    shocks = garch_shocks(garch, total, spec.num_vars, substream(cfg["seed"], 0))
    panel = simulate_spvar(params, sfit.h0, shocks, sim["cycles"], clip,
                           sim["shock_map"])
    out = _out_dir(cfg)
    write_csv(os.path.join(out, "simulated.csv"), list(spec.var_names),
              [tuple(row) for row in panel.data])
    _write_manifest(cfg, "simulate")
    print(f"simulate: {panel.num_obs} rows ({sim['cycles']} cycles of "
          f"{spec.num_seasons} seasons)")


def cmd_coverage(args):
    cfg = _effective_config(args)
    cov = require(cfg, "coverage", "coverage")
    params = _params_from_value(cov["params"])
    spec = params.spec
    scheme = scheme_from_config(cfg["identification"], spec.var_names)
    if cov["h0"] == "identify":
        h0 = identify(params, scheme).h0
    else:
        h0 = np.asarray(cov["h0"], dtype=float)
        if h0.shape != (spec.num_seasons, spec.num_vars, spec.num_vars):
            raise ConfigError("coverage.h0: wrong shape")
    pattern = pattern_from_config(cfg["restrictions"], spec)
    restr = build_restrictions(spec, pattern)
    bcfg = bootstrap_from_config(cfg["bootstrap"], cfg["seed"])
    clip = clip_from_config(cov["clip"], spec.var_names, "coverage.clip")
    result = coverage_experiment(
        params, h0, garch_from_config(cov["garch"]), restr, scheme, bcfg,
        mc_reps=cov["mc_reps"], num_cycles=cov["cycles"],
        horizons=tuple(cov["horizons"]), seed=cfg["seed"], clip_rules=clip,
        burn_cycles=cov["burn_cycles"], shock_map=cov["shock_map"],
        df_mode=cfg["degrees_of_freedom"], threads=cfg["threads"],
        spec_label=cov["label"] or garch_label(cov["garch"]),
    )
    out = _out_dir(cfg)
    write_csv(os.path.join(out, "coverage.csv"),
              ["spec", "b", "N", "season", "shock", "response", "horizon",
               "coverage", "mc_se", "failures"], result.rows())
    _write_manifest(cfg, "coverage")
    print(f"coverage: {result.successes} replicates scored, "
          f"{result.failures} failed")


def cmd_diagnose(args):
    cfg = _effective_config(args)
    panel, spec = _load_panel(cfg, "diagnose")
    T = panel.num_obs
    S = spec.num_seasons
    max_lag = cfg["diagnostics"]["max_lag"] or min(2 * S, T - 1)
    smoothing = cfg["diagnostics"]["smoothing"]
    demeaned, _ = seasonal_demean(panel.data, S)
    acf_rows, sd_rows = [], []
    for i, name in enumerate(panel.var_names):
        for label, series in (("raw", panel.data[:, i]), ("demeaned", demeaned[:, i])):
            plain = sample_acf(series, max_lag)
            for h in range(max_lag + 1):
                acf_rows.append((name, label, 0, h, float(plain[h])))
            per = periodic_acf(series, S, max_lag)
            for s in range(1, S + 1):
                for h in range(max_lag + 1):
                    acf_rows.append((name, label, s, h, float(per[s - 1, h])))
            freqs, dens = spectral_density(series, smoothing)
            for f, v in zip(freqs, dens):
                sd_rows.append((name, label, float(f), float(v)))

    pattern = pattern_from_config(cfg["restrictions"], spec)
    restr = build_restrictions(spec, pattern)
    design = build_design(panel, spec, cfg["presample"]["policy"])
    result = fit_constrained(design, restr, cfg["degrees_of_freedom"])
    scheme = scheme_from_config(cfg["identification"], panel.var_names)
    sfit = identify(result.params, scheme, result.residuals)
    shock_names = tuple(f"shock{j + 1}" for j in range(spec.num_vars))
    w_lag = min(max_lag, sfit.shocks.shape[0] - 1)
    _, w_rows = whiteness_summary(sfit.shocks, w_lag, shock_names)
    white_rows = [
        (r.series, r.lag, r.acf_level, r.acf_square, r.flag_level, r.flag_square)
        for r in w_rows
    ]
    out = _out_dir(cfg)
    write_csv(os.path.join(out, "acf.csv"),
              ["series", "transform", "season", "lag", "value"], acf_rows)
    write_csv(os.path.join(out, "sd.csv"),
              ["series", "transform", "frequency", "value"], sd_rows)
    write_csv(os.path.join(out, "whiteness.csv"),
              ["series", "lag", "acf_level", "acf_square", "flag_level",
               "flag_square"], white_rows)
    _write_manifest(cfg, "diagnose")
    print(f"diagnose: lags 1..{max_lag}, smoothing half-width {smoothing}")


_HANDLERS = {
    "fit": cmd_fit,
    "identify": cmd_identify,
    "irf": cmd_irf,
    "bootstrap-ci": cmd_bootstrap_ci,
    "simulate": cmd_simulate,
    "coverage": cmd_coverage,
    "diagnose": cmd_diagnose,
}


if __name__ == "__main__":
    sys.exit(main())
