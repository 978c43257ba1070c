"""Constrained least-squares estimation of periodic VARs.

The sample is arranged as Z = B X + E with one column per observation: the
column of X for an observation in season s carries (1, lagged values) in
that season's row block and zeros elsewhere, so X is block-diagonal by
season up to column ordering. Restrictions beta = R gamma + r turn the
vectorized problem into ordinary least squares in gamma, solved through a
single stable factorization of W = (X' kron I_m) R; the normal-equations
condition number cond(W)^2 is the ill-conditioning guard.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import NumericalError
from .model import PvarParams, PvarSpec, stationarity_margin
from .panel import TimeSeriesPanel, resolve_presample
from .restrictions import (
    RestrictionPattern,
    RestrictionSet,
    build_restrictions,
    season_offsets,
)

#: fits whose normal-equations condition number exceeds this are refused
COND_LIMIT = 1e12

#: residuals below this fraction of the data scale are rounding dust, not
#: innovations; they snap to zero so noise-free samples give a zero covariance
ZERO_RESIDUAL_RTOL = 1e-12

DF_MODES = ("per_equation", "none")


@dataclass
class DesignMatrices:
    """Z (m, T), X (K, T), and the presample rows the lags were built from."""

    spec: PvarSpec
    z: np.ndarray
    x: np.ndarray
    presample: np.ndarray
    var_names: tuple[str, ...] = ()

    @property
    def num_obs(self) -> int:
        return self.z.shape[1]

    @property
    def num_cycles(self) -> int:
        return self.z.shape[1] // self.spec.num_seasons


def x_row_offsets(spec: PvarSpec) -> tuple[int, ...]:
    """Row offset of each season's block in X (m*p(s) + 1 rows per season)."""
    offs, acc = [], 0
    for s in range(1, spec.num_seasons + 1):
        offs.append(acc)
        acc += spec.num_vars * spec.order(s) + 1
    return tuple(offs)


def assemble_design(
    spec: PvarSpec, pre: np.ndarray, data: np.ndarray, var_names: tuple[str, ...] = ()
) -> DesignMatrices:
    """Regression pair (Z, X) from explicit presample rows and a data block."""
    S, m = spec.num_seasons, spec.num_vars
    T = data.shape[0]
    n_pre = pre.shape[0]
    ext = np.concatenate([pre, data], axis=0)
    offs = x_row_offsets(spec)
    K = offs[-1] + m * spec.order(S) + 1
    x = np.zeros((K, T))
    for s in range(1, S + 1):
        ts = np.arange(s - 1, T, S)
        off = offs[s - 1]
        x[off, ts] = 1.0
        for j in range(1, spec.order(s) + 1):
            x[off + 1 + (j - 1) * m: off + 1 + j * m, ts] = ext[n_pre + ts - j].T
    return DesignMatrices(spec=spec, z=data.T.copy(), x=x, presample=pre,
                          var_names=var_names)


def build_design(
    panel: TimeSeriesPanel, spec: PvarSpec, presample_policy: str = "consume"
) -> DesignMatrices:
    """Assemble the regression pair (Z, X) from a season-aligned panel."""
    pre, data = resolve_presample(panel, spec, presample_policy)
    return assemble_design(spec, pre, data, panel.var_names)


@dataclass
class FitResult:
    """Point estimates plus everything later stages reuse."""

    params: PvarParams
    gamma: np.ndarray
    beta: np.ndarray
    residuals: np.ndarray
    k: tuple[int, ...]
    cond: float
    stationarity_margin: float
    sigma_pd: bool
    restrictions: RestrictionSet
    df_mode: str

    @property
    def is_stationary(self) -> bool:
        return self.stationarity_margin < 1.0 - 1e-10


def estimate_sigma(residuals: np.ndarray, k: int) -> np.ndarray:
    """Innovation covariance from one season's residual rows with df divisor N - k."""
    residuals = np.asarray(residuals, dtype=float)
    N = residuals.shape[0]
    if N - k <= 0:
        raise NumericalError(f"cannot estimate a covariance from {N} rows with k = {k}")
    sig = residuals.T @ residuals / (N - k)
    return 0.5 * (sig + sig.T)


def free_counts(restr: RestrictionSet) -> tuple[tuple[int, ...], ...]:
    """Per-season, per-equation counts of free gamma coordinates."""
    spec = restr.spec
    S, m = spec.num_seasons, spec.num_vars
    offs = season_offsets(spec)
    counts = []
    for s in range(1, S + 1):
        cols = m * spec.order(s) + 1
        blk = restr.r_mat[offs[s - 1]: offs[s - 1] + m * cols].reshape(cols, m, -1)
        counts.append(tuple(
            int(np.count_nonzero(np.any(blk[:, i] != 0.0, axis=0))) for i in range(m)
        ))
    return tuple(counts)


def _season_k(restr: RestrictionSet) -> tuple[int, ...]:
    """k(s): the shared per-equation count when equations agree, else the max."""
    out = []
    for per_eq in free_counts(restr):
        out.append(per_eq[0] if len(set(per_eq)) == 1 else max(per_eq))
    return tuple(out)


def _params_from_b(spec: PvarSpec, b_mat: np.ndarray, sigma: np.ndarray) -> PvarParams:
    S, m, p = spec.num_seasons, spec.num_vars, spec.max_order
    offs = x_row_offsets(spec)
    intercepts = np.zeros((S, m))
    coeffs = np.zeros((S, p, m, m))
    for s in range(1, S + 1):
        off = offs[s - 1]
        intercepts[s - 1] = b_mat[:, off]
        for j in range(1, spec.order(s) + 1):
            coeffs[s - 1, j - 1] = b_mat[:, off + 1 + (j - 1) * m: off + 1 + j * m]
    return PvarParams(spec=spec, intercepts=intercepts, coeffs=coeffs, sigma=sigma)


def params_to_beta(params: PvarParams) -> np.ndarray:
    """Vectorize parameters back into beta order (the fit round-trip inverse)."""
    spec = params.spec
    chunks = []
    for s in range(1, spec.num_seasons + 1):
        cols = [params.nu(s)[:, None]]
        cols += [params.a(s, j) for j in range(1, spec.order(s) + 1)]
        chunks.append(np.concatenate(cols, axis=1).ravel(order="F"))
    return np.concatenate(chunks)


def _guard_cond(sv: np.ndarray, what: str) -> float:
    if sv.size == 0 or sv[-1] <= 0.0 or not np.isfinite(sv[0]):
        raise NumericalError(f"{what} is singular")
    cond = float(sv[0] / sv[-1])
    if cond * cond > COND_LIMIT:
        raise NumericalError(
            f"{what} too ill-conditioned: cond^2 = {cond * cond:.3e} > {COND_LIMIT:.0e}"
        )
    return cond


def fit_constrained(
    design: DesignMatrices, restr: RestrictionSet, df_mode: str = "per_equation"
) -> FitResult:
    """Estimate gamma by least squares under beta = R gamma + r.

    An unrestricted fit (R = I, r = 0) decouples season by season because X
    is block-diagonal; that route solves S small least-squares problems and
    gives the same minimizer as the joint solve.
    """
    if df_mode not in DF_MODES:
        raise ValueError(f"df_mode must be one of {DF_MODES}")
    spec = design.spec
    if restr.spec != spec:
        raise ValueError("design and restrictions built for different specs")
    S, m = spec.num_seasons, spec.num_vars
    T = design.num_obs
    N = design.num_cycles
    K = design.x.shape[0]
    offs = x_row_offsets(spec)

    if restr.is_identity:
        b_mat = np.zeros((m, K))
        cond = 0.0
        residuals = np.empty((T, m))
        for s in range(1, S + 1):
            cols = m * spec.order(s) + 1
            xs = design.x[offs[s - 1]: offs[s - 1] + cols, s - 1::S]
            ys = design.z[:, s - 1::S].T
            coef, _, _, sv = scipy.linalg.lstsq(xs.T, ys, lapack_driver="gelsd")
            cond = max(cond, _guard_cond(sv, f"design for season {s}"))
            b_mat[:, offs[s - 1]: offs[s - 1] + cols] = coef.T
            residuals[s - 1::S] = ys - xs.T @ coef
        beta = np.concatenate([
            b_mat[:, offs[s - 1]: offs[s - 1] + m * spec.order(s) + 1].ravel(order="F")
            for s in range(1, S + 1)
        ])
        gamma = beta.copy()
    else:
        M = restr.free_count
        r3 = restr.r_mat.reshape(K, m, M)
        w = np.einsum("qt,qig->tig", design.x, r3, optimize=True).reshape(T * m, M)
        z = design.z.T.ravel()
        if restr.r_vec.any():
            z = z - (restr.r_vec.reshape(K, m).T @ design.x).T.ravel()
        if M == 0:
            gamma = np.zeros(0)
            cond = 0.0
        else:
            gamma, _, _, sv = scipy.linalg.lstsq(w, z, lapack_driver="gelsd")
            cond = _guard_cond(sv, "restricted design W")
        beta = restr.r_mat @ gamma + restr.r_vec
        b_mat = beta.reshape(K, m).T
        residuals = (design.z - b_mat @ design.x).T

    k = _season_k(restr)
    z_scale = float(np.max(np.abs(design.z), initial=0.0))
    sigma = np.empty((S, m, m))
    for s in range(1, S + 1):
        rows = residuals[s - 1::S]
        if float(np.max(np.abs(rows), initial=0.0)) <= ZERO_RESIDUAL_RTOL * z_scale:
            residuals[s - 1::S] = 0.0
        df_k = k[s - 1] if df_mode == "per_equation" else 0
        sigma[s - 1] = estimate_sigma(residuals[s - 1::S], df_k)

    params = _params_from_b(spec, b_mat, sigma)
    return FitResult(
        params=params,
        gamma=gamma,
        beta=beta,
        residuals=residuals,
        k=k,
        cond=cond,
        stationarity_margin=stationarity_margin(params),
        sigma_pd=params.is_sigma_pd(),
        restrictions=restr,
        df_mode=df_mode,
    )


def fit(
    panel: TimeSeriesPanel,
    spec: PvarSpec,
    pattern: RestrictionPattern | RestrictionSet | None = None,
    presample_policy: str = "consume",
    df_mode: str = "per_equation",
) -> FitResult:
    """Panel-to-estimates convenience wrapper."""
    from .restrictions import unrestricted

    design = build_design(panel, spec, presample_policy)
    if pattern is None:
        pattern = unrestricted(spec)
    restr = pattern if isinstance(pattern, RestrictionSet) else build_restrictions(spec, pattern)
    return fit_constrained(design, restr, df_mode=df_mode)
