"""Shared builders for the test suite."""

from __future__ import annotations

import numpy as np

from spvar import (
    GARCH_PRESETS,
    PvarParams,
    PvarSpec,
    garch_shocks,
    identify_cholesky,
    simulate_spvar,
    stationarity_margin,
)
from spvar.rng import substream


def random_stable_pvar(S, m, orders, seed, rho=0.6, names=None):
    """Seeded random PVAR rescaled so its cycle spectral radius is exactly rho.

    Multiplying every lag-j matrix by c**j rescales the per-step growth rate
    by c, hence the cycle radius by c**S; solving for c hits rho exactly.
    """
    rng = np.random.default_rng(seed)
    if isinstance(orders, int):
        orders = (orders,) * S
    spec = PvarSpec(num_seasons=S, num_vars=m, orders=orders, var_names=names)
    p = spec.max_order
    coeffs = rng.normal(0.0, 0.35, (S, p, m, m))
    for s in range(1, S + 1):
        coeffs[s - 1, spec.order(s):] = 0.0
    intercepts = rng.normal(0.0, 0.5, (S, m))
    b = rng.normal(0.0, 1.0, (S, m, m))
    sigma = b @ b.transpose(0, 2, 1) / m + 0.5 * np.eye(m)
    params = PvarParams(spec=spec, intercepts=intercepts, coeffs=coeffs, sigma=sigma)
    rho0 = stationarity_margin(params)
    if rho0 > 0.0 and p > 0:
        c = (rho / rho0) ** (1.0 / S)
        for j in range(1, p + 1):
            coeffs[:, j - 1] *= c**j
        params = PvarParams(spec=spec, intercepts=intercepts, coeffs=coeffs,
                            sigma=sigma)
    return params


def simulate_panel(params, seed, num_cycles, burn_cycles=10, garch=None, h0=None):
    """Sample a panel from params, Gaussian shocks unless a GarchSpec is given."""
    spec = params.spec
    if h0 is None:
        h0 = identify_cholesky(params.sigma)
    if garch is None:
        garch = GARCH_PRESETS["G0"]
    rows = (burn_cycles + num_cycles) * spec.num_seasons
    shocks = garch_shocks(garch, rows, spec.num_vars, substream(seed, 0))
    return simulate_spvar(params, h0, shocks, num_cycles)


def desk_dgp():
    """The coverage-experiment data generator: S=4, m=2, one lag, radius 0.65."""
    return random_stable_pvar(S=4, m=2, orders=1, seed=2024, rho=0.65)
