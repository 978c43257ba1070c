"""Structural identification of periodic VAR innovations.

Each season gets its own impact matrix H0(s) with Sigma(s) = H0(s) H0(s)'.
Candidates are rotations of the per-season Cholesky factor: H0 = P Q with
P = chol(Sigma) and Q orthogonal, chosen so that user-specified entries of
the impact matrix (short-run) or of the cumulative long-run matrix
C(s) H0(s) vanish. When the zero pattern has the staircase shape (some
column with m-1 zeros, another with m-2, ...) the rotation is built column
by column from exact null spaces; anything else goes through a least-squares
search over rotation angles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.optimize

from .errors import NumericalError
from .model import IrfSet, PvarParams, impulse_responses, longrun_cumulative, stack_irf

SCHEME_KINDS = ("cholesky", "short_long")
SIGN_RULES = ("positive_diag",)

#: achieved squared violation above this is an identification failure
_FEAS_TOL = 1e-16
#: impact entries smaller than this cannot be normalization divisors
_NORM_TOL = 1e-12

_ANGLE_STARTS = (0.0, 0.25 * math.pi, -0.25 * math.pi, 0.5 * math.pi,
                 -0.5 * math.pi, 0.75 * math.pi, 1.0, 2.0)


@dataclass(frozen=True)
class IdentScheme:
    """What pins down the rotation, plus sign and scale conventions.

    short_zeros / long_zeros hold 1-based (variable, shock) pairs; normalize,
    when set, is (variable, shock, value): scale shock's column so its impact
    on variable equals value, season by season.
    """

    kind: str = "cholesky"
    short_zeros: tuple[tuple[int, int], ...] = ()
    long_zeros: tuple[tuple[int, int], ...] = ()
    normalize: tuple[int, int, float] | None = None
    sign_rule: str = "positive_diag"

    def __post_init__(self):
        if self.kind not in SCHEME_KINDS:
            raise ValueError(f"unknown identification kind {self.kind!r}")
        if self.sign_rule not in SIGN_RULES:
            raise ValueError(f"unknown sign rule {self.sign_rule!r}")
        object.__setattr__(self, "short_zeros",
                           tuple((int(i), int(j)) for i, j in self.short_zeros))
        object.__setattr__(self, "long_zeros",
                           tuple((int(i), int(j)) for i, j in self.long_zeros))
        if self.kind == "cholesky" and (self.short_zeros or self.long_zeros):
            raise ValueError("cholesky identification takes no zero restrictions")
        seen = set()
        for tag, pairs in (("short", self.short_zeros), ("long", self.long_zeros)):
            for i, j in pairs:
                if (tag, i, j) in seen:
                    raise ValueError(f"duplicate {tag}-run zero ({i}, {j})")
                seen.add((tag, i, j))
        if self.normalize is not None:
            v, j, c = self.normalize
            object.__setattr__(self, "normalize", (int(v), int(j), float(c)))

    def check_dims(self, m: int):
        for i, j in self.short_zeros + self.long_zeros:
            if not (1 <= i <= m and 1 <= j <= m):
                raise ValueError(f"zero restriction ({i}, {j}) outside 1..{m}")
        if self.kind == "short_long":
            need = m * (m - 1) // 2
            have = len(self.short_zeros) + len(self.long_zeros)
            if have != need:
                raise ValueError(
                    f"exact identification of {m} shocks needs {need} zero "
                    f"restrictions, got {have}"
                )
        if self.normalize is not None:
            v, j, _ = self.normalize
            if not (1 <= v <= m and 1 <= j <= m):
                raise ValueError(f"normalization ({v}, {j}) outside 1..{m}")


@dataclass
class StructuralFit:
    """Per-season impact matrices and, when available, implied shocks.

    h0 is (S, m, m) with H0(s) H0(s)' = Sigma(s); longrun holds C(s) H0(s)
    when long-run restrictions were used; shocks are w_t = H0(s_t)^{-1}
    eps_t for the residual rows passed in (row r sits in season r mod S + 1,
    0-based).
    """

    params: PvarParams
    scheme: IdentScheme
    h0: np.ndarray
    longrun: np.ndarray | None = None
    shocks: np.ndarray | None = None


def identify_cholesky(sigma: np.ndarray) -> np.ndarray:
    """Lower-triangular factors of each season's covariance.

    An exactly zero covariance factors as the zero matrix (noise-free
    data); any other failure to factor is a genuine deficiency.
    """
    sigma = np.asarray(sigma, dtype=float)
    try:
        return np.linalg.cholesky(sigma)
    except np.linalg.LinAlgError:
        pass
    single = sigma.ndim == 2
    stack = sigma[None] if single else sigma
    out = np.zeros_like(stack)
    for idx, mat in enumerate(stack):
        if not mat.any():
            continue
        try:
            out[idx] = np.linalg.cholesky(mat)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(
                f"innovation covariance (season {idx + 1}) is not positive "
                f"definite and not zero"
            ) from exc
    return out[0] if single else out


def _apply_sign_rule(h0: np.ndarray) -> np.ndarray:
    """Flip shock signs so impact-matrix diagonals are nonnegative."""
    flip = np.where(np.diag(h0) < 0.0, -1.0, 1.0)
    return h0 * flip


def _rotation_from_angles(theta: np.ndarray, m: int) -> np.ndarray:
    q = np.eye(m)
    k = 0
    for i in range(m):
        for j in range(i + 1, m):
            c, s = math.cos(theta[k]), math.sin(theta[k])
            g = np.eye(m)
            g[i, i] = c
            g[j, j] = c
            g[i, j] = -s
            g[j, i] = s
            q = q @ g
            k += 1
    return q


def _staircase_order(counts: list[int], m: int) -> list[int] | None:
    """Column solve order when zero counts form the pattern m-1, m-2, ..., 0."""
    order = sorted(range(m), key=lambda j: -counts[j])
    if [counts[j] for j in order] != list(range(m - 1, -1, -1)):
        return None
    return order


def _solve_rotation(constraint_rows: list[np.ndarray], m: int, label: str) -> np.ndarray:
    """Orthogonal Q making every constraint row annihilate its column of Q.

    constraint_rows[j] is a (c_j, m) array; feasibility means
    constraint_rows[j] @ Q[:, j] = 0 for all j, with Q orthogonal.
    """
    counts = [rows.shape[0] for rows in constraint_rows]
    order = _staircase_order(counts, m)
    if order is not None:
        q = np.zeros((m, m))
        solved: list[np.ndarray] = []
        ok = True
        for j in order:
            block = [constraint_rows[j]] + [v[None, :] for v in solved]
            null = scipy.linalg.null_space(np.concatenate(block, axis=0))
            if null.shape[1] != 1:
                ok = False
                break
            q[:, j] = null[:, 0]
            solved.append(null[:, 0])
        if ok:
            return q

    n_angles = m * (m - 1) // 2
    rows_all = np.concatenate([r for r in constraint_rows if r.size], axis=0) \
        if any(r.size for r in constraint_rows) else np.zeros((0, m))
    col_of = np.concatenate([
        np.full(constraint_rows[j].shape[0], j, dtype=int) for j in range(m)
    ]) if rows_all.shape[0] else np.zeros(0, dtype=int)

    def violations(theta):
        qm = _rotation_from_angles(theta, m)
        return np.array([rows_all[r] @ qm[:, col_of[r]] for r in range(rows_all.shape[0])])

    if rows_all.shape[0] == 0:
        return np.eye(m)

    method = "lm" if rows_all.shape[0] >= n_angles else "trf"
    best = None
    for start in _ANGLE_STARTS:
        theta0 = np.full(n_angles, start)
        sol = scipy.optimize.least_squares(
            violations, theta0, method=method, xtol=1e-15, ftol=1e-15, gtol=1e-15
        )
        if best is None or sol.cost < best.cost:
            best = sol
    if 2.0 * best.cost > _FEAS_TOL:
        worst = float(np.max(np.abs(best.fun)))
        raise NumericalError(
            f"{label}: zero restrictions are infeasible "
            f"(largest violation {worst:.3e})"
        )
    return _rotation_from_angles(best.x, m)


def _structural_shocks(h0: np.ndarray, residuals: np.ndarray, S: int) -> np.ndarray:
    shocks = np.empty_like(residuals)
    for s in range(1, S + 1):
        rows = residuals[s - 1::S]
        if not h0[s - 1].any():
            if rows.any():
                raise NumericalError(
                    f"season {s}: zero impact matrix cannot explain nonzero residuals"
                )
            shocks[s - 1::S] = 0.0
            continue
        shocks[s - 1::S] = np.linalg.solve(h0[s - 1], rows.T).T
    return shocks


def identify_short_long(
    params: PvarParams, scheme: IdentScheme, residuals: np.ndarray | None = None
) -> StructuralFit:
    """Impact matrices satisfying the scheme's short- and long-run zeros."""
    spec = params.spec
    S, m = spec.num_seasons, spec.num_vars
    scheme.check_dims(m)
    p_fac = identify_cholesky(params.sigma)
    longrun_needed = bool(scheme.long_zeros)
    c_mats = longrun_cumulative(params) if longrun_needed else None

    h0 = np.empty((S, m, m))
    for s in range(1, S + 1):
        rows_by_col: list[list[np.ndarray]] = [[] for _ in range(m)]
        for i, j in scheme.short_zeros:
            rows_by_col[j - 1].append(p_fac[s - 1][i - 1])
        if longrun_needed:
            cp = c_mats[s - 1] @ p_fac[s - 1]
            for i, j in scheme.long_zeros:
                rows_by_col[j - 1].append(cp[i - 1])
        constraint_rows = [
            np.array(rows) if rows else np.zeros((0, m)) for rows in rows_by_col
        ]
        q = _solve_rotation(constraint_rows, m, f"season {s}")
        h0[s - 1] = _apply_sign_rule(p_fac[s - 1] @ q)

    longrun = np.einsum("sij,sjk->sik", c_mats, h0) if longrun_needed else None
    shocks = _structural_shocks(h0, residuals, S) if residuals is not None else None
    return StructuralFit(params=params, scheme=scheme, h0=h0,
                         longrun=longrun, shocks=shocks)


def identify(
    params: PvarParams, scheme: IdentScheme, residuals: np.ndarray | None = None
) -> StructuralFit:
    """Dispatch on the scheme kind."""
    if scheme.kind == "cholesky":
        scheme.check_dims(params.spec.num_vars)
        h0 = identify_cholesky(params.sigma)
        shocks = None
        if residuals is not None:
            shocks = _structural_shocks(h0, residuals, params.spec.num_seasons)
        return StructuralFit(params=params, scheme=scheme, h0=h0, shocks=shocks)
    return identify_short_long(params, scheme, residuals)


def structural_irf(sfit: StructuralFit, horizon: int) -> IrfSet:
    """Season-anchored responses to the identified shocks, horizons 0..horizon.

    The horizon-k response of arrival season s is Phi^IR_k(s) H0(s); when the
    scheme carries a normalization, each season's column is rescaled so the
    impact on the target variable is the target value.
    """
    params, scheme = sfit.params, sfit.scheme
    S = params.spec.num_seasons
    reduced = impulse_responses(params, horizon).values
    theta = np.einsum("skij,sjl->skil", reduced, sfit.h0)
    if scheme.normalize is not None:
        v, j, c = scheme.normalize
        for s in range(S):
            denom = sfit.h0[s][v - 1, j - 1]
            if abs(denom) < _NORM_TOL:
                raise NumericalError(
                    f"season {s + 1}: impact of shock {j} on variable {v} is "
                    f"{denom:.3e}; cannot normalize"
                )
            theta[s, :, :, j - 1] *= c / denom
    return IrfSet(spec=params.spec, kind="structural_ir", values=theta)


def stack_structural_irf(sfit: StructuralFit, h: int) -> np.ndarray:
    """Cycle-level structural response matrix at cycle horizon h."""
    S = sfit.params.spec.num_seasons
    return stack_irf(structural_irf(sfit, S * h + S - 1), h)
