"""Synthetic data generation and Monte Carlo coverage experiments.

Structural shocks are independent GARCH(1,1) processes scaled to unit
unconditional variance, mapped into innovations through a season's impact
matrix. Paths start from zero lags and run through a whole-cycle burn-in so
the retained sample starts in season 1 with a valid synthesized presample.

The coverage harness wraps the full pipeline: simulate, fit, identify,
bootstrap, band, and score whether the true structural responses fall
inside, cell by cell.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .bootstrap import BootstrapConfig, bootstrap_bands, bootstrap_engine
from .errors import ConfigError, NumericalError
from .identification import IdentScheme, StructuralFit, structural_irf
from .model import PvarParams
from .panel import TimeSeriesPanel, required_presample
from .restrictions import RestrictionSet
from .rng import substream, substream_seed

SHOCK_MAPS = ("h0", "h0_inv")

#: GARCH burn-in steps discarded before shocks are used
GARCH_BURN = 500


@dataclass(frozen=True)
class GarchSpec:
    """GARCH(1,1) with unit unconditional variance: a0 = 1 - a1 - b1."""

    a1: float
    b1: float

    def __post_init__(self):
        if self.a1 < 0 or self.b1 < 0:
            raise ConfigError("GARCH coefficients must be nonnegative")
        if self.a1 + self.b1 >= 1.0:
            raise ConfigError("need a1 + b1 < 1 for a unit unconditional variance")

    @property
    def a0(self) -> float:
        return 1.0 - self.a1 - self.b1


GARCH_PRESETS = {
    "G0": GarchSpec(0.0, 0.0),
    "G1": GarchSpec(0.05, 0.9),
    "G2": GarchSpec(0.3, 0.6),
    "G3": GarchSpec(0.5, 0.0),
}


def garch_shocks(
    garch: GarchSpec, num: int, num_vars: int, rng: np.random.Generator,
    burn: int = GARCH_BURN,
) -> np.ndarray:
    """num rows of independent unit-variance GARCH(1,1) shocks per column.

    sigma2_t = a0 + a1 w_{t-1}^2 + b1 sigma2_{t-1}, started at sigma2 = 1,
    w = 0, with `burn` steps discarded. G0 (a1 = b1 = 0) short-circuits to
    the plain normal draws, which follows the same recursion exactly.
    """
    z = rng.standard_normal((burn + num, num_vars))
    if garch.a1 == 0.0 and garch.b1 == 0.0:
        return z[burn:].copy()
    out = np.empty_like(z)
    sig2 = np.ones(num_vars)
    w = np.zeros(num_vars)
    for t in range(burn + num):
        sig2 = garch.a0 + garch.a1 * w * w + garch.b1 * sig2
        w = np.sqrt(sig2) * z[t]
        out[t] = w
    return out[burn:].copy()


@dataclass(frozen=True)
class ClipRule:
    """Clamp one variable's simulated value; the clamped value feeds the lags."""

    var: int
    lo: float | None = None
    hi: float | None = None

    def __post_init__(self):
        if self.var < 1:
            raise ConfigError("clip rule variable index is 1-based")
        if self.lo is None and self.hi is None:
            raise ConfigError("clip rule needs at least one bound")


def simulate_spvar(
    params: PvarParams,
    h0: np.ndarray,
    shocks: np.ndarray,
    num_cycles: int,
    clip_rules: tuple[ClipRule, ...] = (),
    shock_map: str = "h0",
) -> TimeSeriesPanel:
    """Generate num_cycles cycles of data from the model and impact matrices.

    shocks must supply (burn_cycles + num_cycles) * S rows for some whole
    number of burn cycles; the burn segment is discarded except for its tail,
    which becomes the panel's presample. Innovations are eps_t = H0(s) w_t
    (shock_map "h0") or H0(s)^{-1} w_t ("h0_inv").
    """
    spec = params.spec
    S, m = spec.num_seasons, spec.num_vars
    if shock_map not in SHOCK_MAPS:
        raise ConfigError(f"unknown shock_map {shock_map!r}")
    shocks = np.asarray(shocks, dtype=float)
    if shocks.ndim != 2 or shocks.shape[1] != m:
        raise ConfigError("shocks must be (rows, m)")
    if num_cycles < 1:
        raise ConfigError("num_cycles must be >= 1")
    total = shocks.shape[0]
    T = num_cycles * S
    burn_rows = total - T
    if burn_rows < 0 or burn_rows % S != 0:
        raise ConfigError(
            f"shock rows ({total}) must be num_cycles*S plus a whole number "
            f"of burn cycles"
        )
    n_pre = required_presample(spec)
    if burn_rows < n_pre:
        raise ConfigError(
            f"burn-in of {burn_rows} rows cannot supply the {n_pre} presample rows"
        )
    h0 = np.asarray(h0, dtype=float).reshape(S, m, m)
    for rule in clip_rules:
        if rule.var > m:
            raise ConfigError(f"clip rule variable {rule.var} outside 1..{m}")

    season_rows = np.arange(total) % S
    if shock_map == "h0":
        eps = np.einsum("tij,tj->ti", h0[season_rows], shocks)
    else:
        eps = np.empty_like(shocks)
        for s in range(S):
            rows = season_rows == s
            eps[rows] = np.linalg.solve(h0[s], shocks[rows].T).T

    y = np.zeros((total, m))
    for t in range(total):
        s = t % S
        acc = eps[t] + params.intercepts[s]
        for j in range(1, spec.order(s + 1) + 1):
            if t - j >= 0:
                acc = acc + params.coeffs[s, j - 1] @ y[t - j]
        for rule in clip_rules:
            v = rule.var - 1
            if rule.lo is not None and acc[v] < rule.lo:
                acc[v] = rule.lo
            if rule.hi is not None and acc[v] > rule.hi:
                acc[v] = rule.hi
        y[t] = acc
    return TimeSeriesPanel(
        data=y[burn_rows:],
        num_seasons=S,
        presample=y[burn_rows - n_pre: burn_rows] if n_pre else np.zeros((0, m)),
        var_names=spec.var_names,
    )


def true_structural_irf(
    params: PvarParams, h0: np.ndarray, scheme: IdentScheme, horizon: int
) -> np.ndarray:
    """Structural responses implied by known parameters and impact matrices."""
    sfit = StructuralFit(params=params, scheme=scheme, h0=np.asarray(h0, dtype=float))
    return structural_irf(sfit, horizon).values


@dataclass
class CoverageResult:
    """Hit counts for every (season, horizon, response, shock) band cell."""

    spec_label: str
    horizons: tuple[int, ...]
    hits: np.ndarray
    successes: int
    failures: int
    var_names: tuple[str, ...]
    block_length: int
    num_cycles: int

    def coverage(self) -> np.ndarray:
        return self.hits / max(self.successes, 1)

    def mc_se(self) -> np.ndarray:
        p = self.coverage()
        return np.sqrt(p * (1.0 - p) / max(self.successes, 1))

    def rows(self):
        """Tidy (spec, b, N, season, shock, response, horizon, coverage,
        mc_se, failures) tuples, one per cell."""
        cov, se = self.coverage(), self.mc_se()
        S, _, m, _ = self.hits.shape
        out = []
        for s in range(1, S + 1):
            for j in range(1, m + 1):
                for i in range(1, m + 1):
                    for hx, h in enumerate(self.horizons):
                        out.append((
                            self.spec_label, self.block_length, self.num_cycles,
                            s, f"shock{j}", self.var_names[i - 1], h,
                            float(cov[s - 1, hx, i - 1, j - 1]),
                            float(se[s - 1, hx, i - 1, j - 1]),
                            self.failures,
                        ))
        return out


def _coverage_chunk(args) -> tuple[np.ndarray, int, int]:
    (dgp, dgp_h0, garch, restr, scheme, bconfig, num_cycles, horizons,
     burn_cycles, clip_rules, shock_map, df_mode, seed, truth, rep_lo, rep_hi) = args
    spec = dgp.spec
    S, m = spec.num_seasons, spec.num_vars
    horizon = max(horizons)
    hits = np.zeros((S, len(horizons), m, m), dtype=np.int64)
    successes = failures = 0
    hx = list(horizons)
    for rep in range(rep_lo, rep_hi):
        rng = substream(seed, rep, 1)
        shocks = garch_shocks(garch, (burn_cycles + num_cycles) * S, m, rng)
        panel = simulate_spvar(dgp, dgp_h0, shocks, num_cycles, clip_rules, shock_map)
        bcfg = replace(bconfig, seed=substream_seed(seed, rep, 2))
        try:
            draws = bootstrap_engine(panel, spec, restr, scheme, bcfg, horizon, df_mode)
            bands = bootstrap_bands(draws)
        except NumericalError:
            failures += 1
            continue
        inside = (bands.lower[:, hx] <= truth[:, hx]) & (truth[:, hx] <= bands.upper[:, hx])
        hits += inside
        successes += 1
    return hits, successes, failures


def coverage_experiment(
    dgp: PvarParams,
    dgp_h0: np.ndarray,
    garch: GarchSpec,
    restr: RestrictionSet,
    scheme: IdentScheme,
    bconfig: BootstrapConfig,
    mc_reps: int,
    num_cycles: int,
    horizons: tuple[int, ...],
    seed: int,
    clip_rules: tuple[ClipRule, ...] = (),
    burn_cycles: int = 10,
    shock_map: str = "h0",
    df_mode: str = "per_equation",
    threads: int = 1,
    spec_label: str = "",
) -> CoverageResult:
    """Empirical band coverage of the true structural responses.

    Each Monte Carlo replicate simulates a fresh sample (its own RNG
    substream), runs the bootstrap (a substream-derived seed), and checks
    band by band whether the truth is inside. Replicates whose bootstrap
    fails outright are counted, not scored.
    """
    if mc_reps < 1:
        raise ConfigError("mc_reps must be >= 1")
    if not horizons:
        raise ConfigError("need at least one horizon")
    horizons = tuple(int(h) for h in horizons)
    if any(h < 0 for h in horizons):
        raise ConfigError("horizons must be >= 0")
    truth = true_structural_irf(dgp, dgp_h0, scheme, max(horizons))

    static = (dgp, np.asarray(dgp_h0, dtype=float), garch, restr, scheme, bconfig,
              num_cycles, horizons, burn_cycles, tuple(clip_rules), shock_map,
              df_mode, seed, truth)
    if threads <= 1 or mc_reps < 2 * threads:
        hits, successes, failures = _coverage_chunk(static + (0, mc_reps))
    else:
        bounds = np.linspace(0, mc_reps, threads + 1).astype(int)
        chunks = [(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(
                _coverage_chunk, [static + (lo, hi) for lo, hi in chunks]
            ))
        hits = sum(p[0] for p in parts)
        successes = sum(p[1] for p in parts)
        failures = sum(p[2] for p in parts)

    if successes == 0:
        raise NumericalError("every Monte Carlo replicate failed")
    return CoverageResult(
        spec_label=spec_label or f"garch({garch.a1},{garch.b1})",
        horizons=horizons,
        hits=hits,
        successes=successes,
        failures=failures,
        var_names=dgp.spec.var_names,
        block_length=bconfig.resampler()[1],
        num_cycles=num_cycles,
    )
