"""Residual bootstrap confidence bands for periodic impulse responses.

Two resampling schemes move residual blocks around the sample:

  seasonal_block   blocks of length b may only land on positions whose
                   season matches where they came from (generalized
                   seasonal block bootstrap); with b = 1 this is seasonal
                   iid resampling.
  mbb              ordinary moving-blocks resampling applied to residuals
                   standardized by their season's covariance, rescaled by
                   the destination season's covariance; with b = 1 this is
                   iid resampling of standardized residuals.

Each draw regenerates a sample from the fitted dynamics, refits with the
same restrictions, re-identifies with the same scheme, and records the
structural responses. Draw l uses its own RNG substream, so results do not
depend on how draws are scheduled across workers.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalError
from .estimation import (
    COND_LIMIT,
    ZERO_RESIDUAL_RTOL,
    assemble_design,
    build_design,
    fit_constrained,
    x_row_offsets,
)
from .identification import IdentScheme, identify, structural_irf
from .model import IrfSet, PvarParams, PvarSpec, wrap_season
from .panel import TimeSeriesPanel
from .restrictions import RestrictionSet
from .rng import substream

SCHEMES = ("seasonal_block", "mbb", "seasonal_iid", "iid_standardized")
CI_METHODS = ("median_adjusted", "percentile", "hall")

#: error out when more than this fraction of draws fails
MAX_FAILURE_RATE = 0.05

_PD_TOL = 1e-12
_NORM_TOL = 1e-12


@dataclass(frozen=True)
class BootstrapConfig:
    scheme: str = "seasonal_block"
    block_length: int = 1
    num_draws: int = 499
    alpha: float = 0.32
    ci_method: str = "median_adjusted"
    seed: int = 0

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown bootstrap scheme {self.scheme!r}")
        if self.block_length < 1:
            raise ConfigError("block_length must be >= 1")
        if self.scheme in ("seasonal_iid", "iid_standardized") and self.block_length != 1:
            raise ConfigError(f"scheme {self.scheme!r} fixes block_length = 1")
        if self.num_draws < 1:
            raise ConfigError("num_draws must be >= 1")
        if not 0.0 < self.alpha < 1.0:
            raise ConfigError("alpha must be strictly between 0 and 1")
        if self.ci_method not in CI_METHODS:
            raise ConfigError(f"unknown ci_method {self.ci_method!r}")
        if self.seed < 0:
            raise ConfigError("seed must be >= 0")

    def resampler(self) -> tuple[str, int]:
        """The underlying (scheme, block length); iid schemes are b = 1 cases."""
        if self.scheme == "seasonal_iid":
            return "seasonal_block", 1
        if self.scheme == "iid_standardized":
            return "mbb", 1
        return self.scheme, self.block_length

    def block_diagnostic(self, num_obs: int) -> float:
        """b^3 / T; block resampling is only trustworthy when this is small."""
        b = self.resampler()[1]
        return b**3 / num_obs


def gsbb_block_starts(T: int, b: int) -> np.ndarray:
    """Destination block starts 1, b+1, ..., covering all T positions."""
    n_blocks = -(-T // b)
    return 1 + b * np.arange(n_blocks)


def gsbb_candidates(t: int, T: int, b: int, S: int) -> np.ndarray:
    """Admissible source starts for the destination block at position t.

    Sources are t shifted by whole cycles, kept inside 1..T-b+1 so every
    source block has full length b: t + S*j for j = -floor((t-1)/S) ..
    floor((T-b+1-t)/S). With b = 1 this is every index sharing t's season;
    with b = T the sample itself is the only block. Empty means b is too
    long for this sample.
    """
    r1 = (t - 1) // S
    r2 = (T - b + 1 - t) // S
    if r2 < -r1:
        raise ConfigError(
            f"block length b = {b} leaves no source blocks for destination {t} "
            f"(T = {T}, S = {S})"
        )
    return t + S * np.arange(-r1, r2 + 1)


def draw_gsbb_indices(T: int, b: int, S: int, rng: np.random.Generator) -> np.ndarray:
    """0-based source row for each of the T destination rows, one draw."""
    starts = gsbb_block_starts(T, b)
    cands = [gsbb_candidates(int(t), T, b, S) for t in starts]
    counts = np.array([c.size for c in cands])
    picks = rng.integers(counts)
    src0 = np.array([cands[i][picks[i]] for i in range(len(cands))]) - 1
    pos = np.arange(T)
    return src0[pos // b] + pos % b


def draw_mbb_indices(T: int, b: int, rng: np.random.Generator) -> np.ndarray:
    """0-based source rows for plain moving-blocks resampling."""
    if b > T:
        raise ConfigError(f"block length b = {b} exceeds sample length {T}")
    n_blocks = -(-T // b)
    src0 = rng.integers(0, T - b + 1, size=n_blocks)
    pos = np.arange(T)
    return src0[pos // b] + pos % b


def _sym_roots(sigma: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric square roots and inverse roots of each season's covariance."""
    vals, vecs = np.linalg.eigh(sigma)
    scale = max(1.0, float(np.max(np.abs(sigma))))
    if vals.min() <= _PD_TOL * scale:
        raise NumericalError(
            "residual standardization needs strictly positive definite "
            "innovation covariances"
        )
    roots = np.einsum("sij,sj,skj->sik", vecs, np.sqrt(vals), vecs)
    inv_roots = np.einsum("sij,sj,skj->sik", vecs, 1.0 / np.sqrt(vals), vecs)
    return roots, inv_roots


def regenerate_paths(
    params: PvarParams, pre: np.ndarray, pseudo: np.ndarray
) -> np.ndarray:
    """Run the fitted recursion over pseudo-innovations, shape (L, T, m).

    Returns (L, n_pre + T, m) paths with the shared presample rows in front.
    Row t of each path sits in season t mod S + 1 (0-based t).
    """
    spec = params.spec
    S, m = spec.num_seasons, spec.num_vars
    L, T, _ = pseudo.shape
    n_pre = pre.shape[0]
    y = np.empty((L, n_pre + T, m))
    y[:, :n_pre] = pre
    a_t = params.coeffs.transpose(0, 1, 3, 2).copy()
    for t in range(T):
        s = t % S
        acc = pseudo[:, t] + params.intercepts[s]
        for j in range(1, spec.order(s + 1) + 1):
            acc = acc + y[:, n_pre + t - j] @ a_t[s, j - 1]
        y[:, n_pre + t] = acc
    return y


@dataclass
class BootstrapDraws:
    """Point structural responses plus the surviving bootstrap draws."""

    point: IrfSet
    draws: np.ndarray
    num_requested: int
    num_failed: int
    config: BootstrapConfig


def _draw_index_matrix(
    T: int, S: int, config: BootstrapConfig, l_lo: int, l_hi: int
) -> np.ndarray:
    scheme, b = config.resampler()
    idx = np.empty((l_hi - l_lo, T), dtype=np.intp)
    for l in range(l_lo, l_hi):
        rng = substream(config.seed, l)
        if scheme == "seasonal_block":
            idx[l - l_lo] = draw_gsbb_indices(T, b, S, rng)
        else:
            idx[l - l_lo] = draw_mbb_indices(T, b, rng)
    return idx


def _pseudo_residuals(
    resid: np.ndarray, sigma: np.ndarray, idx: np.ndarray, scheme: str, S: int
) -> np.ndarray:
    if scheme == "seasonal_block":
        return resid[idx]
    roots, inv_roots = _sym_roots(sigma)
    T = resid.shape[0]
    season_rows = np.arange(T) % S
    std = np.einsum("tij,tj->ti", inv_roots[season_rows], resid)
    return np.einsum("tij,ltj->lti", roots[season_rows], std[idx])


def _batched_unrestricted_fit(
    spec: PvarSpec, y: np.ndarray, n_pre: int, k: tuple[int, ...], df_mode: str
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Per-season OLS over a whole batch of paths at once.

    Returns (intercepts (L,S,m), coeffs (L,S,p,m,m), sigma (L,S,m,m),
    alive (L,)); replicates whose design fails the conditioning guard are
    marked dead and carry placeholder values.
    """
    S, m, p = spec.num_seasons, spec.num_vars, spec.max_order
    L = y.shape[0]
    T = y.shape[1] - n_pre
    N = T // S
    if df_mode == "per_equation" and N - max(k) <= 0:
        raise NumericalError(f"{N} cycles cannot support k = {max(k)} free coordinates")
    offs = x_row_offsets(spec)
    intercepts = np.zeros((L, S, m))
    coeffs = np.zeros((L, S, p, m, m))
    sigma = np.empty((L, S, m, m))
    alive = np.ones(L, dtype=bool)
    data_scale = np.max(np.abs(y[:, n_pre:]), axis=(1, 2))
    for s in range(1, S + 1):
        cols = m * spec.order(s) + 1
        ts = np.arange(s - 1, T, S)
        xs = np.empty((L, N, cols))
        xs[:, :, 0] = 1.0
        for j in range(1, spec.order(s) + 1):
            xs[:, :, 1 + (j - 1) * m: 1 + j * m] = y[:, n_pre + ts - j]
        ys = y[:, n_pre + ts]
        q, r = np.linalg.qr(xs)
        sv = np.linalg.svd(r, compute_uv=False)
        with np.errstate(divide="ignore", invalid="ignore"):
            cond = sv[:, 0] / sv[:, -1]
        bad = ~np.isfinite(cond) | (cond * cond > COND_LIMIT)
        alive &= ~bad
        r_safe = np.where(bad[:, None, None], np.eye(cols), r)
        coef = np.linalg.solve(r_safe, q.transpose(0, 2, 1) @ ys)
        resid_s = ys - xs @ coef
        snap = np.max(np.abs(resid_s), axis=(1, 2)) <= ZERO_RESIDUAL_RTOL * data_scale
        resid_s = np.where(snap[:, None, None], 0.0, resid_s)
        df = N - (k[s - 1] if df_mode == "per_equation" else 0)
        sig = resid_s.transpose(0, 2, 1) @ resid_s / df
        sigma[:, s - 1] = 0.5 * (sig + sig.transpose(0, 2, 1))
        intercepts[:, s - 1] = coef[:, 0, :]
        for j in range(1, spec.order(s) + 1):
            coeffs[:, s - 1, j - 1] = coef[:, 1 + (j - 1) * m: 1 + j * m, :].transpose(0, 2, 1)
    return intercepts, coeffs, sigma, alive


def _batched_cholesky(sigma: np.ndarray, alive: np.ndarray) -> np.ndarray:
    """Cholesky factors for a batch, marking non-PD replicates dead.

    Exactly zero covariances (noise-free draws) factor as zero and stay
    alive; anything else must be positive definite.
    """
    L, S, m, _ = sigma.shape
    scale = max(1.0, float(np.max(np.abs(sigma))))
    vals = np.linalg.eigvalsh(sigma)
    pd = vals[..., 0] > _PD_TOL * scale
    zero = ~sigma.any(axis=(2, 3))
    alive &= (pd | zero).all(axis=1)
    safe = np.where(pd[..., None, None], sigma, np.eye(m))
    out = np.linalg.cholesky(safe)
    out[zero] = 0.0
    return out


def _batched_structural_irf(
    spec: PvarSpec,
    coeffs: np.ndarray,
    h0: np.ndarray,
    horizon: int,
    scheme: IdentScheme,
    alive: np.ndarray,
) -> np.ndarray:
    """Structural responses for a batch of parameter draws, (L,S,K+1,m,m)."""
    S, m = spec.num_seasons, spec.num_vars
    L = coeffs.shape[0]
    phi = np.zeros((L, S, horizon + 1, m, m))
    phi[:, :, 0] = np.eye(m)
    for kk in range(1, horizon + 1):
        for s in range(1, S + 1):
            acc = np.zeros((L, m, m))
            for j in range(1, min(kk, spec.order(s)) + 1):
                acc = acc + coeffs[:, s - 1, j - 1] @ phi[:, wrap_season(s - j, S) - 1, kk - j]
            phi[:, s - 1, kk] = acc
    theta = np.empty_like(phi)
    for s in range(1, S + 1):
        for kk in range(horizon + 1):
            theta[:, s - 1, kk] = phi[:, wrap_season(s + kk, S) - 1, kk] @ h0[:, s - 1]
    if scheme.normalize is not None:
        v, j, c = scheme.normalize
        for s in range(S):
            denom = h0[:, s, v - 1, j - 1]
            ok = np.abs(denom) >= _NORM_TOL
            alive &= ok
            factor = np.where(ok, c / np.where(ok, denom, 1.0), 1.0)
            theta[:, s, :, :, j - 1] *= factor[:, None, None]
    return theta


def _bootstrap_chunk(
    spec: PvarSpec,
    restr: RestrictionSet,
    scheme: IdentScheme,
    config: BootstrapConfig,
    horizon: int,
    df_mode: str,
    resid: np.ndarray,
    params: PvarParams,
    pre: np.ndarray,
    base_k: tuple[int, ...],
    l_lo: int,
    l_hi: int,
    force_scalar: bool,
) -> tuple[np.ndarray, np.ndarray]:
    """Draws l_lo..l_hi-1: returns (values (n,S,K+1,m,m), alive mask (n,))."""
    S, m = spec.num_seasons, spec.num_vars
    T = resid.shape[0]
    scheme_name, _ = config.resampler()
    idx = _draw_index_matrix(T, S, config, l_lo, l_hi)
    pseudo = _pseudo_residuals(resid, params.sigma, idx, scheme_name, S)
    y = regenerate_paths(params, pre, pseudo)
    n_pre = pre.shape[0]
    n = l_hi - l_lo

    fast = restr.is_identity and scheme.kind == "cholesky" and not force_scalar
    if fast:
        _, coeffs, sigma, alive = _batched_unrestricted_fit(spec, y, n_pre, base_k, df_mode)
        h0 = _batched_cholesky(sigma, alive)
        values = _batched_structural_irf(spec, coeffs, h0, horizon, scheme, alive)
        return values, alive

    values = np.zeros((n, S, horizon + 1, m, m))
    alive = np.ones(n, dtype=bool)
    for i in range(n):
        design = assemble_design(spec, y[i, :n_pre], y[i, n_pre:])
        try:
            refit = fit_constrained(design, restr, df_mode)
            sfit = identify(refit.params, scheme)
            values[i] = structural_irf(sfit, horizon).values
        except NumericalError:
            alive[i] = False
    return values, alive


def bootstrap_engine(
    panel: TimeSeriesPanel,
    spec: PvarSpec,
    restr: RestrictionSet,
    scheme: IdentScheme,
    config: BootstrapConfig,
    horizon: int,
    df_mode: str = "per_equation",
    presample_policy: str = "consume",
    threads: int = 1,
    _force_scalar: bool = False,
) -> BootstrapDraws:
    """Fit, identify, and bootstrap the structural responses of a panel.

    Every draw resamples the fitted residuals, regenerates a sample from the
    point estimates with the original presample, refits under the same
    restrictions, re-identifies, and stores the structural responses up to
    `horizon`. Draws that fail (ill-conditioned refit, non-PD covariance,
    impossible normalization) are dropped; more than 5% failing is an error.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    design = build_design(panel, spec, presample_policy)
    base = fit_constrained(design, restr, df_mode)
    sfit = identify(base.params, scheme, base.residuals)
    point = structural_irf(sfit, horizon)

    L = config.num_draws
    args = (spec, restr, scheme, config, horizon, df_mode,
            base.residuals, base.params, design.presample, base.k)
    if threads <= 1 or L < 2 * threads:
        values, alive = _bootstrap_chunk(*args, 0, L, _force_scalar)
    else:
        bounds = np.linspace(0, L, threads + 1).astype(int)
        chunks = [(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]
        with ProcessPoolExecutor(max_workers=len(chunks)) as pool:
            parts = list(pool.map(
                _bootstrap_chunk_star,
                [args + (lo, hi, _force_scalar) for lo, hi in chunks],
            ))
        values = np.concatenate([p[0] for p in parts], axis=0)
        alive = np.concatenate([p[1] for p in parts], axis=0)

    num_failed = int(L - alive.sum())
    if num_failed > MAX_FAILURE_RATE * L:
        raise NumericalError(
            f"{num_failed} of {L} bootstrap draws failed "
            f"(limit {MAX_FAILURE_RATE:.0%})"
        )
    return BootstrapDraws(
        point=point,
        draws=values[alive],
        num_requested=L,
        num_failed=num_failed,
        config=config,
    )


def _bootstrap_chunk_star(args):
    return _bootstrap_chunk(*args)


def order_stat_rank(q: float, L: int) -> int:
    """1-based rank ceil(q*L), clamped to 1..L."""
    return min(max(math.ceil(q * L), 1), L)


def ci_bands(
    point: np.ndarray, draws: np.ndarray, alpha: float, method: str
) -> tuple[np.ndarray, np.ndarray]:
    """Entrywise confidence bands from bootstrap draws stacked on axis 0."""
    if method not in CI_METHODS:
        raise ConfigError(f"unknown ci_method {method!r}")
    if draws.shape[0] < 1:
        raise NumericalError("no bootstrap draws to form bands from")
    L = draws.shape[0]
    srt = np.sort(draws, axis=0)
    lo = srt[order_stat_rank(alpha / 2.0, L) - 1]
    hi = srt[order_stat_rank(1.0 - alpha / 2.0, L) - 1]
    if method == "percentile":
        return lo, hi
    if method == "hall":
        return 2.0 * point - hi, 2.0 * point - lo
    med = srt[order_stat_rank(0.5, L) - 1]
    return point + lo - med, point + hi - med


@dataclass
class BandSet:
    """Point responses with entrywise lower/upper confidence bands."""

    point: IrfSet
    lower: np.ndarray
    upper: np.ndarray
    alpha: float
    method: str
    num_draws: int
    num_failed: int


def bootstrap_bands(bdraws: BootstrapDraws) -> BandSet:
    lower, upper = ci_bands(
        bdraws.point.values, bdraws.draws, bdraws.config.alpha, bdraws.config.ci_method
    )
    return BandSet(
        point=bdraws.point,
        lower=lower,
        upper=upper,
        alpha=bdraws.config.alpha,
        method=bdraws.config.ci_method,
        num_draws=bdraws.draws.shape[0],
        num_failed=bdraws.num_failed,
    )
