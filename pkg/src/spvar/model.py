"""Periodic VAR containers and their linear-system transforms.

A periodic VAR lets every coefficient depend on the season of the
left-hand-side observation:

    y_t = nu(s) + A_1(s) y_{t-1} + ... + A_{p(s)}(s) y_{t-p(s)} + eps_t,

where t = S*n + s places observation t in season s (1..S) of cycle n.
Stacking one full cycle into a single Sm-dimensional observation turns the
model into an ordinary VAR whose order is P = ceil(max_s p(s) / S); that
stacked form drives the stationarity check, the cross-checks on impulse
responses, and the long-run matrices.

Seasons are numbered 1..S in every public signature. Arrays are stored
0-indexed, season s at slot s - 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import NumericalError

#: slack used when declaring a model periodically stationary
STATIONARITY_TOL = 1e-10

_SYMMETRY_TOL = 1e-10
_PSD_TOL = 1e-8

IRF_KINDS = ("ma_coefficient", "reduced_ir", "structural_ir")


def wrap_season(s: int, num_seasons: int) -> int:
    """Map an arbitrary integer season index onto 1..num_seasons cyclically."""
    return (s - 1) % num_seasons + 1


@dataclass(frozen=True)
class PvarSpec:
    """Dimensions of a periodic VAR: seasons, variables, per-season lag orders."""

    num_seasons: int
    num_vars: int
    orders: tuple[int, ...]
    var_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        if self.num_seasons < 1:
            raise ValueError("num_seasons must be >= 1")
        if self.num_vars < 1:
            raise ValueError("num_vars must be >= 1")
        object.__setattr__(self, "orders", tuple(int(p) for p in self.orders))
        if len(self.orders) != self.num_seasons:
            raise ValueError("orders must give one lag order per season")
        if any(p < 0 for p in self.orders):
            raise ValueError("lag orders must be >= 0")
        names = tuple(self.var_names) if self.var_names else tuple(
            f"y{i + 1}" for i in range(self.num_vars)
        )
        if len(names) != self.num_vars:
            raise ValueError("var_names must have one name per variable")
        object.__setattr__(self, "var_names", names)

    @property
    def max_order(self) -> int:
        return max(self.orders)

    @property
    def stacked_order(self) -> int:
        """Order P of the stacked cycle-by-cycle VAR."""
        return math.ceil(self.max_order / self.num_seasons)

    def order(self, s: int) -> int:
        return self.orders[s - 1]


@dataclass
class PvarParams:
    """One full parameter set: intercepts, lag matrices, innovation covariances.

    coeffs has shape (S, p_max, m, m) with coeffs[s-1, i-1] = A_i(s); entries
    with i > p(s) must be zero. sigma has shape (S, m, m); each Sigma(s) must
    be symmetric and is allowed to be singular (a zero-residual fit produces
    one), so only positive semi-definiteness is enforced here. Procedures that
    need a factorization check strict definiteness themselves.
    """

    spec: PvarSpec
    intercepts: np.ndarray
    coeffs: np.ndarray
    sigma: np.ndarray

    def __post_init__(self):
        S, m, p = self.spec.num_seasons, self.spec.num_vars, self.spec.max_order
        self.intercepts = np.asarray(self.intercepts, dtype=float).reshape(S, m)
        self.coeffs = np.asarray(self.coeffs, dtype=float).reshape(S, p, m, m)
        self.sigma = np.asarray(self.sigma, dtype=float).reshape(S, m, m)
        for s in range(1, S + 1):
            for i in range(self.spec.order(s) + 1, p + 1):
                if np.any(self.coeffs[s - 1, i - 1] != 0.0):
                    raise ValueError(f"A_{i}({s}) must be zero: order p({s}) = {self.spec.order(s)}")
        scale = max(1.0, float(np.max(np.abs(self.sigma))))
        if np.max(np.abs(self.sigma - self.sigma.transpose(0, 2, 1))) > _SYMMETRY_TOL * scale:
            raise ValueError("sigma matrices must be symmetric")
        self.sigma = 0.5 * (self.sigma + self.sigma.transpose(0, 2, 1))
        for s in range(S):
            if np.linalg.eigvalsh(self.sigma[s]).min() < -_PSD_TOL * scale:
                raise ValueError(f"sigma({s + 1}) has a negative eigenvalue")

    def a(self, s: int, i: int) -> np.ndarray:
        """Lag matrix A_i(s), 1-based in both arguments."""
        return self.coeffs[s - 1, i - 1]

    def nu(self, s: int) -> np.ndarray:
        return self.intercepts[s - 1]

    def sigma_eps(self, s: int) -> np.ndarray:
        return self.sigma[s - 1]

    def is_sigma_pd(self, tol: float = 1e-10) -> bool:
        """True when every Sigma(s) is strictly positive definite."""
        scale = max(1.0, float(np.max(np.abs(self.sigma))))
        return all(
            np.linalg.eigvalsh(self.sigma[s]).min() > tol * scale
            for s in range(self.spec.num_seasons)
        )


@dataclass
class StackedVar:
    """The cycle-stacked VAR(P): A0 Y_n = nu + sum_i lag_mats[i-1] Y_{n-i} + E_n.

    A0 is unit lower block-triangular; its strictly lower blocks carry the
    within-cycle dynamics, the lag matrices carry dependence on earlier cycles.
    """

    spec: PvarSpec
    a0: np.ndarray
    lag_mats: np.ndarray
    intercept: np.ndarray


def build_stacked_var(params: PvarParams) -> StackedVar:
    """Assemble the stacked form from per-season parameters.

    Block (r, c) of A0 is I for r = c and -A_{r-c}(r) for r > c; block (r, c)
    of lag matrix i is A_{S*i + r - c}(r). Lag matrices outside 1..p(r) are
    zero.
    """
    spec = params.spec
    S, m, P = spec.num_seasons, spec.num_vars, spec.stacked_order
    a0 = np.eye(S * m)
    lag_mats = np.zeros((P, S * m, S * m))
    for r in range(1, S + 1):
        rows = slice((r - 1) * m, r * m)
        for c in range(1, S + 1):
            cols = slice((c - 1) * m, c * m)
            if r > c and r - c <= spec.order(r):
                a0[rows, cols] = -params.a(r, r - c)
            for i in range(1, P + 1):
                j = S * i + r - c
                if 1 <= j <= spec.order(r):
                    lag_mats[i - 1, rows, cols] = params.a(r, j)
    return StackedVar(spec=spec, a0=a0, lag_mats=lag_mats,
                      intercept=params.intercepts.reshape(-1).copy())


def companion_matrix(stacked: StackedVar) -> np.ndarray:
    """Companion matrix of the reduced stacked VAR, size SmP x SmP."""
    S, m = stacked.spec.num_seasons, stacked.spec.num_vars
    P = stacked.lag_mats.shape[0]
    k = S * m
    if P == 0:
        return np.zeros((0, 0))
    comp = np.zeros((k * P, k * P))
    for i in range(P):
        comp[:k, i * k:(i + 1) * k] = scipy.linalg.solve_triangular(
            stacked.a0, stacked.lag_mats[i], lower=True, unit_diagonal=True
        )
    if P > 1:
        comp[k:, :-k] = np.eye(k * (P - 1))
    return comp


def stationarity_margin(params: PvarParams) -> float:
    """Spectral radius of the stacked companion matrix (0 for a pure-noise model)."""
    comp = companion_matrix(build_stacked_var(params))
    if comp.size == 0:
        return 0.0
    return float(np.abs(np.linalg.eigvals(comp)).max())


def is_periodically_stationary(params: PvarParams, tol: float = STATIONARITY_TOL) -> bool:
    return stationarity_margin(params) < 1.0 - tol


@dataclass
class IrfSet:
    """Responses indexed by season and horizon: values[s-1, k] is an m x m matrix.

    kind is one of "ma_coefficient" (weights Phi_k(s) of the MA representation
    of season s), "reduced_ir" (responses at horizon k to a unit innovation
    arriving in season s), or "structural_ir" (the same premultiplied column
    by column with the impact matrix of the arrival season).
    """

    spec: PvarSpec
    kind: str
    values: np.ndarray

    def __post_init__(self):
        if self.kind not in IRF_KINDS:
            raise ValueError(f"unknown IRF kind {self.kind!r}")
        S, m = self.spec.num_seasons, self.spec.num_vars
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 4 or self.values.shape[0] != S or self.values.shape[2:] != (m, m):
            raise ValueError("values must have shape (S, K+1, m, m)")

    @property
    def horizon(self) -> int:
        return self.values.shape[1] - 1

    def get(self, s: int, k: int) -> np.ndarray:
        """Response matrix for season s (1-based) at horizon k."""
        return self.values[s - 1, k]


def ma_coefficients(params: PvarParams, horizon: int) -> IrfSet:
    """MA weights Phi_k(s) up to the given horizon.

    Phi_0(s) = I and Phi_k(s) = sum_{j=1}^{min(k, p(s))} A_j(s)
    Phi_{k-j}(wrap(s-j)): the weight on an innovation k periods back, seen
    from an observation that sits in season s.
    """
    if horizon < 0:
        raise ValueError("horizon must be >= 0")
    spec = params.spec
    S, m = spec.num_seasons, spec.num_vars
    phi = np.zeros((S, horizon + 1, m, m))
    phi[:, 0] = np.eye(m)
    for k in range(1, horizon + 1):
        for s in range(1, S + 1):
            acc = np.zeros((m, m))
            for j in range(1, min(k, spec.order(s)) + 1):
                acc += params.a(s, j) @ phi[wrap_season(s - j, S) - 1, k - j]
            phi[s - 1, k] = acc
    return IrfSet(spec=spec, kind="ma_coefficient", values=phi)


def impulse_responses(params: PvarParams, horizon: int) -> IrfSet:
    """Responses to a unit innovation arriving in season s, k periods later.

    The responding observation sits in season wrap(s + k), so the k-th
    response of arrival season s is Phi_k(wrap(s + k)).
    """
    spec = params.spec
    S = spec.num_seasons
    phi = ma_coefficients(params, horizon).values
    out = np.empty_like(phi)
    for s in range(1, S + 1):
        for k in range(horizon + 1):
            out[s - 1, k] = phi[wrap_season(s + k, S) - 1, k]
    return IrfSet(spec=spec, kind="reduced_ir", values=out)


def stack_irf(irfset: IrfSet, h: int) -> np.ndarray:
    """Stack season-anchored responses into one Sm x Sm cycle-horizon block matrix.

    Block (r, c) is the response of season r, h cycles ahead, to an impulse
    arriving in season c of the base cycle: the response of arrival season c
    at horizon S*h + r - c (zero when that is negative). Needs the IrfSet to
    reach horizon S*h + S - 1.
    """
    if h < 0:
        raise ValueError("h must be >= 0")
    spec = irfset.spec
    S, m = spec.num_seasons, spec.num_vars
    if irfset.horizon < S * h + S - 1:
        raise ValueError(f"stacking at cycle horizon {h} needs horizon {S * h + S - 1}")
    out = np.zeros((S * m, S * m))
    for r in range(1, S + 1):
        for c in range(1, S + 1):
            k = S * h + r - c
            if k >= 0:
                out[(r - 1) * m:r * m, (c - 1) * m:c * m] = irfset.values[c - 1, k]
    return out


def stack_var_irf(params: PvarParams, h: int) -> np.ndarray:
    """Cycle-level reduced-form response matrix at cycle horizon h, size Sm x Sm."""
    if h < 0:
        raise ValueError("h must be >= 0")
    S = params.spec.num_seasons
    return stack_irf(impulse_responses(params, S * h + S - 1), h)


def longrun_cumulative(params: PvarParams) -> np.ndarray:
    """Cumulative responses C(s) = sum_k Phi^IR_k(s), shape (S, m, m).

    Uses the closed form: C(s) is the sum over r of block (r, s) of
    (A0 - sum_i lag_mats[i])^{-1}. Requires periodic stationarity.
    """
    margin = stationarity_margin(params)
    if margin >= 1.0 - STATIONARITY_TOL:
        raise NumericalError(
            f"long-run responses need a periodically stationary model "
            f"(spectral radius {margin:.6g})"
        )
    spec = params.spec
    S, m = spec.num_seasons, spec.num_vars
    stacked = build_stacked_var(params)
    total = stacked.a0 - stacked.lag_mats.sum(axis=0)
    try:
        longrun = np.linalg.inv(total)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"stacked long-run matrix is singular: {exc}") from exc
    out = np.zeros((S, m, m))
    for s in range(1, S + 1):
        cols = slice((s - 1) * m, s * m)
        for r in range(1, S + 1):
            out[s - 1] += longrun[(r - 1) * m:r * m, cols]
    return out
