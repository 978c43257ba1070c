"""Strict parsing of the JSON run configuration.

Unknown keys anywhere are rejected, every complaint names the offending
field with its dotted path, and defaults are filled in during validation so
the effective configuration (and therefore its hash) is explicit.
"""

from __future__ import annotations

import copy

from .bootstrap import CI_METHODS, SCHEMES, BootstrapConfig
from .errors import ConfigError
from .identification import IdentScheme
from .model import PvarSpec
from .restrictions import PATTERN_PRESETS, RestrictionPattern
from .simulation import GARCH_PRESETS, SHOCK_MAPS, ClipRule, GarchSpec


def _err(path: str, msg: str):
    raise ConfigError(f"{path}: {msg}")


def _check_keys(d: dict, allowed: tuple[str, ...], path: str):
    if not isinstance(d, dict):
        _err(path, "must be an object")
    for k in d:
        if k not in allowed:
            _err(f"{path}.{k}" if path else str(k), "unknown key")


def _int(v, path, lo=None, hi=None) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        _err(path, "must be an integer")
    if lo is not None and v < lo:
        _err(path, f"must be >= {lo}")
    if hi is not None and v > hi:
        _err(path, f"must be <= {hi}")
    return v


def _num(v, path) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _err(path, "must be a number")
    return float(v)


def _str(v, path) -> str:
    if not isinstance(v, str):
        _err(path, "must be a string")
    return v


def _choice(v, choices, path) -> str:
    v = _str(v, path)
    if v not in choices:
        _err(path, f"must be one of {', '.join(choices)}")
    return v


_TOP_KEYS = (
    "data", "num_seasons", "orders", "var_names", "transforms", "presample",
    "restrictions", "degrees_of_freedom", "identification", "horizon",
    "bootstrap", "seed", "out_dir", "threads", "simulate", "coverage",
    "diagnostics",
)

_BOOT_KEYS = ("scheme", "b", "L", "alpha", "ci_method", "seed")
_IDENT_KEYS = ("kind", "short_zeros", "long_zeros", "normalize")
_NORM_KEYS = ("variable", "shock", "value")
_PRESAMPLE_KEYS = ("policy", "rows")
_PATTERN_KEYS = ("intercept", "lags")
_SIM_KEYS = ("params", "garch", "cycles", "burn_cycles", "clip", "shock_map")
_COV_KEYS = ("params", "h0", "garch", "cycles", "mc_reps", "horizons",
             "burn_cycles", "clip", "shock_map", "label")
_DIAG_KEYS = ("max_lag", "smoothing")
_GARCH_KEYS = ("a1", "b1")
_CLIP_KEYS = ("min", "max")


def validate_config(cfg: dict) -> dict:
    """Check every field, fill defaults, and return the effective config."""
    _check_keys(cfg, _TOP_KEYS, "")
    out = copy.deepcopy(cfg)

    if "data" in out:
        _str(out["data"], "data")
    if "num_seasons" in out:
        _int(out["num_seasons"], "num_seasons", lo=1)
    if "orders" in out:
        v = out["orders"]
        if isinstance(v, list):
            for i, p in enumerate(v):
                _int(p, f"orders[{i}]", lo=0)
        else:
            _int(v, "orders", lo=0)
    if "var_names" in out:
        if not isinstance(out["var_names"], list) or not out["var_names"]:
            _err("var_names", "must be a non-empty list of strings")
        for i, n in enumerate(out["var_names"]):
            _str(n, f"var_names[{i}]")
    if "transforms" in out:
        if not isinstance(out["transforms"], dict):
            _err("transforms", "must map variable names to a transform")
        for k, v in out["transforms"].items():
            _choice(v, ("diff_log",), f"transforms.{k}")

    pre = out.setdefault("presample", {"policy": "consume"})
    _check_keys(pre, _PRESAMPLE_KEYS, "presample")
    policy = _choice(pre.setdefault("policy", "consume"),
                     ("consume", "require"), "presample.policy")
    if policy == "require":
        _int(pre.setdefault("rows", 0), "presample.rows", lo=0)
    elif "rows" in pre:
        _err("presample.rows", "only meaningful with policy \"require\"")

    restr = out.setdefault("restrictions", "unrestricted")
    if isinstance(restr, str):
        _choice(restr, tuple(PATTERN_PRESETS), "restrictions")
    elif isinstance(restr, dict):
        _check_keys(restr, _PATTERN_KEYS, "restrictions")
        if "intercept" not in restr or "lags" not in restr:
            _err("restrictions", "pattern needs both \"intercept\" and \"lags\"")
    else:
        _err("restrictions", "must be a preset name or a pattern object")

    _choice(out.setdefault("degrees_of_freedom", "per_equation"),
            ("per_equation", "none"), "degrees_of_freedom")

    ident = out.setdefault("identification", "cholesky")
    if isinstance(ident, str):
        _choice(ident, ("cholesky",), "identification")
    elif isinstance(ident, dict):
        _check_keys(ident, _IDENT_KEYS, "identification")
        kind = _choice(ident.setdefault("kind", "short_long"),
                       ("cholesky", "short_long"), "identification.kind")
        for tag in ("short_zeros", "long_zeros"):
            pairs = ident.setdefault(tag, [])
            if not isinstance(pairs, list):
                _err(f"identification.{tag}", "must be a list of [variable, shock] pairs")
            for i, pair in enumerate(pairs):
                if not isinstance(pair, list) or len(pair) != 2:
                    _err(f"identification.{tag}[{i}]", "must be a [variable, shock] pair")
            if kind == "cholesky" and pairs:
                _err(f"identification.{tag}", "cholesky takes no zero restrictions")
        norm = ident.setdefault("normalize", None)
        if norm is not None:
            _check_keys(norm, _NORM_KEYS, "identification.normalize")
            for key in _NORM_KEYS:
                if key not in norm:
                    _err(f"identification.normalize.{key}", "is required")
            _int(norm["shock"], "identification.normalize.shock", lo=1)
            _num(norm["value"], "identification.normalize.value")
    else:
        _err("identification", "must be \"cholesky\" or an object")

    _int(out.setdefault("horizon", 12), "horizon", lo=0)

    boot = out.setdefault("bootstrap", {})
    _check_keys(boot, _BOOT_KEYS, "bootstrap")
    _choice(boot.setdefault("scheme", "seasonal_block"), SCHEMES, "bootstrap.scheme")
    _int(boot.setdefault("b", 1), "bootstrap.b", lo=1)
    _int(boot.setdefault("L", 499), "bootstrap.L", lo=1)
    alpha = _num(boot.setdefault("alpha", 0.32), "bootstrap.alpha")
    if not 0.0 < alpha < 1.0:
        _err("bootstrap.alpha", "must be strictly between 0 and 1")
    _choice(boot.setdefault("ci_method", "median_adjusted"), CI_METHODS,
            "bootstrap.ci_method")
    if boot.get("seed") is not None:
        _int(boot["seed"], "bootstrap.seed", lo=0)
    else:
        boot["seed"] = None

    _int(out.setdefault("seed", 0), "seed", lo=0)
    _str(out.setdefault("out_dir", "."), "out_dir")
    _int(out.setdefault("threads", 1), "threads", lo=1)

    if "simulate" in out:
        sim = out["simulate"]
        _check_keys(sim, _SIM_KEYS, "simulate")
        if "params" not in sim:
            _err("simulate.params", "is required")
        _validate_garch(sim.setdefault("garch", "G0"), "simulate.garch")
        _int(sim.get("cycles", 0), "simulate.cycles", lo=1)
        _int(sim.setdefault("burn_cycles", 10), "simulate.burn_cycles", lo=1)
        _validate_clip(sim.setdefault("clip", {}), "simulate.clip")
        _choice(sim.setdefault("shock_map", "h0"), SHOCK_MAPS, "simulate.shock_map")

    if "coverage" in out:
        cov = out["coverage"]
        _check_keys(cov, _COV_KEYS, "coverage")
        if "params" not in cov:
            _err("coverage.params", "is required")
        cov.setdefault("h0", "identify")
        _validate_garch(cov.setdefault("garch", "G0"), "coverage.garch")
        _int(cov.get("cycles", 0), "coverage.cycles", lo=1)
        _int(cov.get("mc_reps", 0), "coverage.mc_reps", lo=1)
        hs = cov.get("horizons")
        if not isinstance(hs, list) or not hs:
            _err("coverage.horizons", "must be a non-empty list of integers")
        for i, h in enumerate(hs):
            _int(h, f"coverage.horizons[{i}]", lo=0)
        _int(cov.setdefault("burn_cycles", 10), "coverage.burn_cycles", lo=1)
        _validate_clip(cov.setdefault("clip", {}), "coverage.clip")
        _choice(cov.setdefault("shock_map", "h0"), SHOCK_MAPS, "coverage.shock_map")
        _str(cov.setdefault("label", ""), "coverage.label")

    diag = out.setdefault("diagnostics", {})
    _check_keys(diag, _DIAG_KEYS, "diagnostics")
    if diag.get("max_lag") is not None:
        _int(diag["max_lag"], "diagnostics.max_lag", lo=1)
    else:
        diag["max_lag"] = None
    _int(diag.setdefault("smoothing", 0), "diagnostics.smoothing", lo=0)

    return out


def _validate_garch(v, path):
    if isinstance(v, str):
        if v not in GARCH_PRESETS:
            _err(path, f"must be one of {', '.join(GARCH_PRESETS)} or an object")
        return
    if not isinstance(v, dict):
        _err(path, "must be a preset name or {a1, b1}")
    _check_keys(v, _GARCH_KEYS, path)
    a1 = _num(v.get("a1", 0.0), f"{path}.a1")
    b1 = _num(v.get("b1", 0.0), f"{path}.b1")
    if a1 < 0 or b1 < 0 or a1 + b1 >= 1.0:
        _err(path, "needs a1 >= 0, b1 >= 0, a1 + b1 < 1")


def _validate_clip(v, path):
    if not isinstance(v, dict):
        _err(path, "must map variables to bounds")
    for name, bounds in v.items():
        _check_keys(bounds, _CLIP_KEYS, f"{path}.{name}")
        if not bounds:
            _err(f"{path}.{name}", "needs \"min\" and/or \"max\"")
        for key in bounds:
            _num(bounds[key], f"{path}.{name}.{key}")


def require(cfg: dict, key: str, command: str):
    if key not in cfg:
        raise ConfigError(f"{key}: required by the {command} command")
    return cfg[key]


def build_spec(cfg: dict, num_vars: int, var_names: tuple[str, ...]) -> PvarSpec:
    S = require(cfg, "num_seasons", "model")
    orders = require(cfg, "orders", "model")
    if isinstance(orders, int):
        orders = [orders] * S
    if len(orders) != S:
        raise ConfigError(f"orders: expected {S} entries, got {len(orders)}")
    return PvarSpec(num_seasons=S, num_vars=num_vars,
                    orders=tuple(orders), var_names=var_names)


def resolve_var(v, var_names: tuple[str, ...], path: str) -> int:
    """A 1-based index or a variable name -> 1-based index."""
    if isinstance(v, bool):
        _err(path, "must be a variable name or 1-based index")
    if isinstance(v, int):
        if not 1 <= v <= len(var_names):
            _err(path, f"index {v} outside 1..{len(var_names)}")
        return v
    if isinstance(v, str):
        if v in var_names:
            return var_names.index(v) + 1
        _err(path, f"unknown variable {v!r} (have {', '.join(var_names)})")
    _err(path, "must be a variable name or 1-based index")


def pattern_from_config(value, spec: PvarSpec) -> RestrictionPattern:
    if isinstance(value, str):
        return PATTERN_PRESETS[value](spec)
    codes_ok = ("seasonal", "constant", "zero")

    def _code(c, path):
        if isinstance(c, str):
            if c not in codes_ok:
                _err(path, f"must be one of {', '.join(codes_ok)} or a number")
            return c
        if isinstance(c, bool) or not isinstance(c, (int, float)):
            _err(path, "must be a code string or a number")
        return float(c)

    m, p = spec.num_vars, spec.max_order
    intercept = value["intercept"]
    lags = value["lags"]
    if not isinstance(intercept, list) or len(intercept) != m:
        _err("restrictions.intercept", f"must list {m} codes")
    if not isinstance(lags, list) or len(lags) != p:
        _err("restrictions.lags", f"must list {p} lag grids")
    for l, grid in enumerate(lags):
        if not isinstance(grid, list) or len(grid) != m or any(
            not isinstance(row, list) or len(row) != m for row in grid
        ):
            _err(f"restrictions.lags[{l}]", f"must be an {m}x{m} grid")
    try:
        return RestrictionPattern(
            intercept=tuple(_code(c, f"restrictions.intercept[{i}]")
                            for i, c in enumerate(intercept)),
            lags=tuple(
                tuple(
                    tuple(_code(c, f"restrictions.lags[{l}][{i}][{j}]")
                          for j, c in enumerate(row))
                    for i, row in enumerate(grid)
                )
                for l, grid in enumerate(lags)
            ),
        )
    except ValueError as exc:
        raise ConfigError(f"restrictions: {exc}") from None


def scheme_from_config(value, var_names: tuple[str, ...]) -> IdentScheme:
    if isinstance(value, str):
        return IdentScheme(kind="cholesky")
    kind = value["kind"]
    if kind == "cholesky":
        return IdentScheme(kind="cholesky")

    def _pairs(tag):
        out = []
        for i, (var, shock) in enumerate(value[tag]):
            v = resolve_var(var, var_names, f"identification.{tag}[{i}][0]")
            s = _int(shock, f"identification.{tag}[{i}][1]", lo=1, hi=len(var_names))
            out.append((v, s))
        return tuple(out)

    normalize = None
    if value.get("normalize") is not None:
        norm = value["normalize"]
        normalize = (
            resolve_var(norm["variable"], var_names, "identification.normalize.variable"),
            _int(norm["shock"], "identification.normalize.shock", lo=1, hi=len(var_names)),
            float(norm["value"]),
        )
    try:
        scheme = IdentScheme(kind="short_long", short_zeros=_pairs("short_zeros"),
                             long_zeros=_pairs("long_zeros"), normalize=normalize)
        scheme.check_dims(len(var_names))
        return scheme
    except ValueError as exc:
        raise ConfigError(f"identification: {exc}") from None


def bootstrap_from_config(boot: dict, master_seed: int) -> BootstrapConfig:
    seed = boot.get("seed")
    return BootstrapConfig(
        scheme=boot["scheme"],
        block_length=boot["b"],
        num_draws=boot["L"],
        alpha=boot["alpha"],
        ci_method=boot["ci_method"],
        seed=master_seed if seed is None else seed,
    )


def garch_from_config(value) -> GarchSpec:
    if isinstance(value, str):
        return GARCH_PRESETS[value]
    return GarchSpec(a1=float(value.get("a1", 0.0)), b1=float(value.get("b1", 0.0)))


def garch_label(value) -> str:
    if isinstance(value, str):
        return value
    return f"garch({value.get('a1', 0.0)},{value.get('b1', 0.0)})"


def clip_from_config(value: dict, var_names: tuple[str, ...], path: str) -> tuple[ClipRule, ...]:
    rules = []
    for name in value:
        bounds = value[name]
        key = int(name) if isinstance(name, str) and name.isdigit() else name
        v = resolve_var(key, var_names, f"{path}.{name}")
        rules.append(ClipRule(var=v, lo=bounds.get("min"), hi=bounds.get("max")))
    return tuple(rules)
