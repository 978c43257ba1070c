"""Season-aligned data panels and presample handling.

A panel holds T = S*N observations whose first row sits in season 1. Fitting
a periodic VAR needs lagged values reaching back before the sample start;
those rows either come from an explicit presample block or are carved off
the front of the data, always in whole cycles so season alignment survives.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError
from .model import PvarSpec


@dataclass
class TimeSeriesPanel:
    """Observations (T, m) plus optional presample rows that precede row 0."""

    data: np.ndarray
    num_seasons: int
    presample: np.ndarray | None = None
    var_names: tuple[str, ...] = ()

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        if self.data.ndim != 2:
            raise DataError("panel data must be a 2-d array (T, m)")
        T, m = self.data.shape
        S = self.num_seasons
        if S < 1:
            raise DataError("num_seasons must be >= 1")
        if T == 0 or T % S != 0:
            raise DataError(f"sample length {T} is not a positive multiple of S = {S}")
        if not np.isfinite(self.data).all():
            raise DataError("panel data contains NaN or infinite values")
        if self.presample is not None:
            self.presample = np.asarray(self.presample, dtype=float)
            if self.presample.ndim != 2 or self.presample.shape[1] != m:
                raise DataError("presample must have the same number of columns as data")
            if not np.isfinite(self.presample).all():
                raise DataError("presample contains NaN or infinite values")
        if not self.var_names:
            self.var_names = tuple(f"y{i + 1}" for i in range(m))
        if len(self.var_names) != m:
            raise DataError("var_names must have one name per column")

    @property
    def num_obs(self) -> int:
        return self.data.shape[0]

    @property
    def num_vars(self) -> int:
        return self.data.shape[1]

    @property
    def num_cycles(self) -> int:
        return self.data.shape[0] // self.num_seasons

    def season_of(self, t: int) -> int:
        """Season of observation t (1-based position in the panel)."""
        return (t - 1) % self.num_seasons + 1


def required_presample(spec: PvarSpec) -> int:
    """Rows before the sample start needed so every observation has its lags.

    Observation t in season s reaches back to t - p(s); the worst case over
    the first cycle is max_s (p(s) - s + 1), floored at zero.
    """
    return max(0, max(spec.order(s) - s + 1 for s in range(1, spec.num_seasons + 1)))


def resolve_presample(
    panel: TimeSeriesPanel, spec: PvarSpec, policy: str = "consume"
) -> tuple[np.ndarray, np.ndarray]:
    """Split the panel into (presample rows, estimation sample).

    With explicit presample rows attached to the panel, the last
    required_presample(spec) of them are used and the data is kept whole.
    Otherwise policy "consume" carves whole cycles off the front of the data
    to serve as presample; policy "require" refuses.
    """
    if policy not in ("consume", "require"):
        raise DataError(f"unknown presample policy {policy!r}")
    if spec.num_seasons != panel.num_seasons:
        raise DataError("panel and spec disagree on the number of seasons")
    if spec.num_vars != panel.num_vars:
        raise DataError("panel and spec disagree on the number of variables")
    n_pre = required_presample(spec)
    if panel.presample is not None:
        if panel.presample.shape[0] < n_pre:
            raise DataError(
                f"presample has {panel.presample.shape[0]} rows, model needs {n_pre}"
            )
        pre = panel.presample[panel.presample.shape[0] - n_pre:]
        return pre.copy(), panel.data
    if n_pre == 0:
        return np.zeros((0, panel.num_vars)), panel.data
    if policy == "require":
        raise DataError(f"model needs {n_pre} presample rows and none were provided")
    S = panel.num_seasons
    cycles = -(-n_pre // S)
    if panel.num_cycles - cycles < 1:
        raise DataError(
            f"sample has {panel.num_cycles} cycles; consuming {cycles} for the "
            f"presample leaves no estimation sample"
        )
    cut = cycles * S
    return panel.data[cut - n_pre:cut].copy(), panel.data[cut:]


def diff_log(data: np.ndarray, num_seasons: int, columns: tuple[int, ...] | None = None) -> np.ndarray:
    """Log-difference the given columns (default all) and drop the first cycle.

    Dropping exactly one full cycle of rows keeps the remaining rows in their
    original seasons. Columns not transformed are passed through, shortened
    the same way so rows stay aligned.
    """
    data = np.asarray(data, dtype=float)
    T, m = data.shape
    S = num_seasons
    if T <= S or T % S != 0:
        raise DataError("need more than one full cycle to log-difference")
    cols = tuple(range(m)) if columns is None else columns
    out = data[S:].copy()
    for j in cols:
        col = data[:, j]
        if np.any(col <= 0):
            raise DataError(f"column {j + 1} has non-positive values; cannot take logs")
        d = np.diff(np.log(col))
        out[:, j] = d[S - 1:]
    return out
