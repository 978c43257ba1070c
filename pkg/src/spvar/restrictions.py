"""Linear parameter restrictions for periodic VAR estimation.

All restrictions are expressed as beta = R gamma + r, where beta stacks
vec(nu(s), A_1(s), ..., A_{p(s)}(s)) column-major, season by season, and
gamma holds the free coordinates. Patterns assign one code per coefficient
entry:

    "seasonal"   free, one coordinate per season
    "constant"   free, one coordinate shared by all seasons
    "zero"       pinned at zero
    a number     pinned at that value

gamma is laid out with every seasonal coordinate first (in beta scan order),
then every shared coordinate (in first-encounter order). An all-seasonal
pattern therefore gives R = I exactly, and an all-constant pattern with equal
lag orders gives R = (1_S kron I), the collapse onto an ordinary VAR.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError
from .model import PvarSpec

CODES = ("seasonal", "constant", "zero")

_RANK_TOL = 1e-10


def _check_code(code, where: str):
    if isinstance(code, str):
        if code not in CODES:
            raise ValueError(f"{where}: unknown code {code!r}")
        return code
    if isinstance(code, (int, float)) and not isinstance(code, bool):
        value = float(code)
        if not np.isfinite(value):
            raise ValueError(f"{where}: fixed value must be finite")
        return value
    raise ValueError(f"{where}: codes are 'seasonal', 'constant', 'zero', or a number")


@dataclass(frozen=True)
class RestrictionPattern:
    """Per-entry codes: intercept[i] for nu, lags[l-1][i][j] for A_l[i, j]."""

    intercept: tuple
    lags: tuple

    def __post_init__(self):
        object.__setattr__(
            self,
            "intercept",
            tuple(_check_code(c, f"intercept[{i + 1}]") for i, c in enumerate(self.intercept)),
        )
        lags = []
        for l, grid in enumerate(self.lags):
            rows = []
            for i, row in enumerate(grid):
                rows.append(tuple(
                    _check_code(c, f"lag {l + 1} entry ({i + 1},{j + 1})")
                    for j, c in enumerate(row)
                ))
            lags.append(tuple(rows))
        object.__setattr__(self, "lags", tuple(lags))

    def code(self, lag: int, i: int, j: int):
        """Code for entry (i, j) of A_lag; lag 0 and j ignored address nu[i]."""
        if lag == 0:
            return self.intercept[i - 1]
        return self.lags[lag - 1][i - 1][j - 1]


def unrestricted(spec: PvarSpec) -> RestrictionPattern:
    """Every coefficient free and season-specific."""
    m, p = spec.num_vars, spec.max_order
    return RestrictionPattern(
        intercept=("seasonal",) * m,
        lags=tuple(tuple(("seasonal",) * m for _ in range(m)) for _ in range(p)),
    )


def var_collapse(spec: PvarSpec) -> RestrictionPattern:
    """Every coefficient shared across seasons: the model is an ordinary VAR."""
    if len(set(spec.orders)) != 1:
        raise ValueError("var_collapse needs the same lag order in every season")
    m, p = spec.num_vars, spec.max_order
    return RestrictionPattern(
        intercept=("constant",) * m,
        lags=tuple(tuple(("constant",) * m for _ in range(m)) for _ in range(p)),
    )


def peersman(spec: PvarSpec) -> RestrictionPattern:
    """Monthly three-variable pattern: seasonality in the first two intercepts
    and in how everything loads on the first variable at lags 1-4; all other
    coefficients shared across seasons.
    """
    if spec.num_vars != 3 or spec.max_order != 9 or len(set(spec.orders)) != 1:
        raise ValueError("this preset is defined for 3 variables with 9 lags in every season")
    lags = []
    for l in range(1, 10):
        first = "seasonal" if l <= 4 else "constant"
        lags.append(tuple((first, "constant", "constant") for _ in range(3)))
    return RestrictionPattern(intercept=("seasonal", "seasonal", "constant"), lags=tuple(lags))


PATTERN_PRESETS = {
    "unrestricted": unrestricted,
    "var_collapse": var_collapse,
    "peersman": peersman,
}


@dataclass
class RestrictionSet:
    """The pair (R, r) with bookkeeping: beta = R gamma + r.

    labels names each gamma coordinate; coordinate_map[raw] is the gamma
    index feeding raw coordinate `raw` (or -1 when pinned).
    """

    spec: PvarSpec
    r_mat: np.ndarray
    r_vec: np.ndarray
    labels: tuple[str, ...] = ()
    origin: str = "custom"
    is_identity: bool = field(init=False, default=False)

    def __post_init__(self):
        self.r_mat = np.asarray(self.r_mat, dtype=float)
        self.r_vec = np.asarray(self.r_vec, dtype=float).reshape(-1)
        d = beta_length(self.spec)
        if self.r_mat.ndim != 2 or self.r_mat.shape[0] != d:
            raise ValueError(f"R must have {d} rows for this spec")
        if self.r_vec.shape[0] != d:
            raise ValueError(f"r must have length {d}")
        M = self.r_mat.shape[1]
        if M > d:
            raise ValueError("more free coordinates than raw coordinates")
        if M > 0:
            sv = np.linalg.svd(self.r_mat, compute_uv=False)
            if sv[-1] <= _RANK_TOL * max(1.0, sv[0]):
                raise NumericalError("restriction matrix R is rank deficient")
        if not self.labels:
            self.labels = tuple(f"g{j + 1}" for j in range(M))
        if len(self.labels) != M:
            raise ValueError("labels must have one entry per free coordinate")
        self.is_identity = (
            M == d
            and not self.r_vec.any()
            and np.array_equal(self.r_mat, np.eye(d))
        )

    @property
    def free_count(self) -> int:
        return self.r_mat.shape[1]


def beta_length(spec: PvarSpec) -> int:
    """Total raw coordinates: m * (m*p(s) + 1) summed over seasons."""
    m = spec.num_vars
    return sum(m * (m * spec.order(s) + 1) for s in range(1, spec.num_seasons + 1))


def season_offsets(spec: PvarSpec) -> tuple[int, ...]:
    """Start of each season's block in beta (and, divided by m, in the design rows)."""
    m = spec.num_vars
    offs, acc = [], 0
    for s in range(1, spec.num_seasons + 1):
        offs.append(acc)
        acc += m * (m * spec.order(s) + 1)
    return tuple(offs)


def _iter_raw(spec: PvarSpec):
    """Yield (raw_index, season, lag, i, j) in beta order.

    Columns of (nu(s), A_1(s), ..., A_p(s)) are scanned left to right, rows
    top to bottom within each column; lag 0 with j = 0 marks the intercept.
    """
    m = spec.num_vars
    raw = 0
    for s in range(1, spec.num_seasons + 1):
        for col in range(m * spec.order(s) + 1):
            lag = 0 if col == 0 else (col - 1) // m + 1
            j = 0 if col == 0 else (col - 1) % m + 1
            for i in range(1, m + 1):
                yield raw, s, lag, i, j
                raw += 1


def build_restrictions(spec: PvarSpec, pattern: RestrictionPattern) -> RestrictionSet:
    """Turn a code pattern into the explicit (R, r) pair."""
    m, p = spec.num_vars, spec.max_order
    if len(pattern.intercept) != m or len(pattern.lags) != p:
        raise ValueError(f"pattern shaped for m = {len(pattern.intercept)}, "
                         f"p = {len(pattern.lags)}; spec has m = {m}, p = {p}")
    for grid in pattern.lags:
        if len(grid) != m or any(len(row) != m for row in grid):
            raise ValueError("each lag grid must be m x m")

    d = beta_length(spec)
    entries = list(_iter_raw(spec))

    seasonal_ix, shared_ix, shared_order = {}, {}, []
    for raw, s, lag, i, j in entries:
        code = pattern.code(lag, i, j)
        if code == "seasonal":
            seasonal_ix[raw] = len(seasonal_ix)
        elif code == "constant":
            key = (lag, i, j)
            if key not in shared_ix:
                shared_ix[key] = len(shared_order)
                shared_order.append(key)

    n_seasonal = len(seasonal_ix)
    M = n_seasonal + len(shared_order)
    r_mat = np.zeros((d, M))
    r_vec = np.zeros(d)
    labels = [""] * M

    def _name(lag, i, j):
        return f"nu[{i}]" if lag == 0 else f"A{lag}[{i},{j}]"

    for raw, s, lag, i, j in entries:
        code = pattern.code(lag, i, j)
        if code == "seasonal":
            g = seasonal_ix[raw]
            r_mat[raw, g] = 1.0
            labels[g] = f"s{s}:{_name(lag, i, j)}"
        elif code == "constant":
            g = n_seasonal + shared_ix[(lag, i, j)]
            r_mat[raw, g] = 1.0
            labels[g] = f"all:{_name(lag, i, j)}"
        elif code == "zero":
            pass
        else:
            r_vec[raw] = code

    return RestrictionSet(spec=spec, r_mat=r_mat, r_vec=r_vec,
                          labels=tuple(labels), origin="pattern")
