"""Resampling index laws, pseudo-sample regeneration, bands, and the engine."""

import numpy as np
import pytest
from helpers import random_stable_pvar, simulate_panel
from hypothesis import given, settings
from hypothesis import strategies as st

from spvar import (
    BootstrapConfig,
    ConfigError,
    IdentScheme,
    NumericalError,
    PvarParams,
    PvarSpec,
    TimeSeriesPanel,
    bootstrap_bands,
    bootstrap_engine,
    build_restrictions,
    ci_bands,
    draw_gsbb_indices,
    draw_mbb_indices,
    gsbb_block_starts,
    gsbb_candidates,
    order_stat_rank,
    simulate_spvar,
    unrestricted,
)
from spvar.bootstrap import (
    MAX_FAILURE_RATE,
    _pseudo_residuals,
    _sym_roots,
    regenerate_paths,
)
from spvar.rng import substream


class ForcedPicks:
    """Stands in for a Generator when a test wants chosen block sources."""

    def __init__(self, picks):
        self.picks = np.asarray(picks)

    def integers(self, *args, **kwargs):
        return self.picks


def test_config_validation():
    with pytest.raises(ConfigError):
        BootstrapConfig(scheme="wild")
    with pytest.raises(ConfigError):
        BootstrapConfig(block_length=0)
    with pytest.raises(ConfigError):
        BootstrapConfig(scheme="seasonal_iid", block_length=2)
    with pytest.raises(ConfigError):
        BootstrapConfig(num_draws=0)
    with pytest.raises(ConfigError):
        BootstrapConfig(alpha=0.0)
    with pytest.raises(ConfigError):
        BootstrapConfig(ci_method="magic")
    with pytest.raises(ConfigError):
        BootstrapConfig(seed=-1)


def test_config_resampler_mapping_and_diagnostic():
    assert BootstrapConfig(scheme="seasonal_iid").resampler() == ("seasonal_block", 1)
    assert BootstrapConfig(scheme="iid_standardized").resampler() == ("mbb", 1)
    cfg = BootstrapConfig(scheme="mbb", block_length=7)
    assert cfg.resampler() == ("mbb", 7)
    assert cfg.block_diagnostic(624) == pytest.approx(343 / 624)
    assert BootstrapConfig(scheme="seasonal_iid").block_diagnostic(100) == 0.01


def test_gsbb_block_starts():
    np.testing.assert_array_equal(gsbb_block_starts(24, 7), [1, 8, 15, 22])
    np.testing.assert_array_equal(gsbb_block_starts(6, 6), [1])
    np.testing.assert_array_equal(gsbb_block_starts(4, 1), [1, 2, 3, 4])


def test_gsbb_candidates_worked_cases():
    np.testing.assert_array_equal(gsbb_candidates(1, 24, 7, 12), [1, 13])
    np.testing.assert_array_equal(gsbb_candidates(8, 24, 7, 12), [8])
    np.testing.assert_array_equal(gsbb_candidates(22, 24, 7, 12), [10])


def test_gsbb_candidates_unit_blocks_cover_the_whole_season():
    for t in range(1, 25):
        np.testing.assert_array_equal(
            gsbb_candidates(t, 24, 1, 12),
            np.arange((t - 1) % 12 + 1, 25, 12),
        )


def test_gsbb_candidates_whole_sample_block():
    np.testing.assert_array_equal(gsbb_candidates(1, 24, 24, 12), [1])
    with pytest.raises(ConfigError):
        gsbb_candidates(24, 24, 23, 12)


def test_gsbb_draws_preserve_seasons_and_block_contiguity():
    rng = substream(99, 0)
    for b in (1, 2, 3, 5, 7, 12):
        idx = draw_gsbb_indices(24, b, 12, rng)
        assert idx.shape == (24,)
        np.testing.assert_array_equal(idx % 12, np.arange(24) % 12)
        for blk in range(-(-24 // b)):
            seg = idx[blk * b:(blk + 1) * b]
            np.testing.assert_array_equal(np.diff(seg), 1)


def test_gsbb_forced_picks_recover_the_identity():
    """T=4, S=2, b=2: choosing source starts 1 and 3 reproduces the sample."""
    idx = draw_gsbb_indices(4, 2, 2, ForcedPicks([0, 1]))
    np.testing.assert_array_equal(idx, [0, 1, 2, 3])
    idx = draw_gsbb_indices(4, 2, 2, ForcedPicks([1, 0]))
    np.testing.assert_array_equal(idx, [2, 3, 0, 1])


def test_gsbb_whole_sample_block_is_the_identity():
    idx = draw_gsbb_indices(24, 24, 12, substream(0, 1))
    np.testing.assert_array_equal(idx, np.arange(24))


def test_mbb_index_laws():
    rng = substream(7, 0)
    idx = draw_mbb_indices(20, 6, rng)
    assert idx.shape == (20,)
    assert idx.min() >= 0 and idx.max() <= 19
    for blk in range(-(-20 // 6)):
        seg = idx[blk * 6:(blk + 1) * 6]
        np.testing.assert_array_equal(np.diff(seg), 1)
    np.testing.assert_array_equal(draw_mbb_indices(9, 9, rng), np.arange(9))
    with pytest.raises(ConfigError):
        draw_mbb_indices(9, 10, rng)


def test_standardized_move_rescales_by_the_destination_season():
    """m=1 with variances (4, 1): a season-1 residual of 2 standardizes to 1
    and lands in a season-2 slot still worth 1."""
    sigma = np.array([[[4.0]], [[1.0]]])
    resid = np.array([[2.0], [0.0]])
    idx = np.array([[0, 0]])
    out = _pseudo_residuals(resid, sigma, idx, "mbb", 2)
    np.testing.assert_allclose(out, [[[2.0], [1.0]]])


def test_seasonal_scheme_moves_residuals_verbatim():
    resid = np.array([[2.0], [-3.0]])
    idx = np.array([[1, 0], [0, 1]])
    out = _pseudo_residuals(resid, np.eye(1)[None].repeat(2, 0), idx,
                            "seasonal_block", 2)
    np.testing.assert_allclose(out, [[[-3.0], [2.0]], [[2.0], [-3.0]]])


def test_sym_roots_factor_and_reject_deficiency():
    rng = np.random.default_rng(3)
    a = rng.normal(size=(3, 2, 2))
    sigma = a @ a.transpose(0, 2, 1) + 0.3 * np.eye(2)
    roots, inv_roots = _sym_roots(sigma)
    np.testing.assert_allclose(roots @ roots, sigma, atol=1e-12)
    np.testing.assert_allclose(roots @ inv_roots, np.tile(np.eye(2), (3, 1, 1)),
                               atol=1e-12)
    with pytest.raises(NumericalError):
        _sym_roots(np.zeros((1, 2, 2)))


def test_regenerate_pure_noise_returns_the_innovations():
    spec = PvarSpec(num_seasons=2, num_vars=1, orders=(0, 0))
    params = PvarParams(spec=spec, intercepts=np.zeros((2, 1)),
                        coeffs=np.zeros((2, 0, 1, 1)),
                        sigma=np.ones((2, 1, 1)))
    pseudo = np.arange(8.0).reshape(2, 4, 1)
    paths = regenerate_paths(params, np.zeros((0, 1)), pseudo)
    np.testing.assert_array_equal(paths, pseudo)


def test_regenerate_hand_recursion():
    """S=1, a=0.5, presample 1, zero innovations: the path halves each step."""
    spec = PvarSpec(num_seasons=1, num_vars=1, orders=(1,))
    params = PvarParams(spec=spec, intercepts=np.zeros((1, 1)),
                        coeffs=np.full((1, 1, 1, 1), 0.5),
                        sigma=np.ones((1, 1, 1)))
    paths = regenerate_paths(params, np.array([[1.0]]), np.zeros((1, 2, 1)))
    np.testing.assert_allclose(paths[0, :, 0], [1.0, 0.5, 0.25])


def test_regenerate_explosive_parameters_finishes():
    spec = PvarSpec(num_seasons=1, num_vars=1, orders=(1,))
    params = PvarParams(spec=spec, intercepts=np.zeros((1, 1)),
                        coeffs=np.full((1, 1, 1, 1), 3.0),
                        sigma=np.ones((1, 1, 1)))
    paths = regenerate_paths(params, np.array([[1.0]]), np.zeros((1, 10, 1)))
    assert paths.shape == (1, 11, 1)
    assert paths[0, -1, 0] == 3.0**10


def test_order_stat_rank_worked_values():
    assert order_stat_rank(0.16, 101) == 17
    assert order_stat_rank(0.5, 101) == 51
    assert order_stat_rank(0.84, 101) == 85
    assert order_stat_rank(1e-9, 101) == 1
    assert order_stat_rank(1.0, 101) == 101


@given(st.floats(min_value=0.0, max_value=1.0), st.integers(1, 2000))
@settings(max_examples=200, deadline=None)
def test_order_stat_rank_is_clamped_and_monotone(q, L):
    r = order_stat_rank(q, L)
    assert 1 <= r <= L
    assert r >= order_stat_rank(q / 2.0, L)


def test_ci_bands_worked_values():
    draws = np.arange(1.0, 102.0)
    point = np.array(0.0)
    lo, hi = ci_bands(point, draws, 0.32, "percentile")
    assert (lo, hi) == (17.0, 85.0)
    lo, hi = ci_bands(point, draws, 0.32, "hall")
    assert (lo, hi) == (-85.0, -17.0)
    lo, hi = ci_bands(point, draws, 0.32, "median_adjusted")
    assert (lo, hi) == (-34.0, 34.0)
    with pytest.raises(ConfigError):
        ci_bands(point, draws, 0.32, "magic")
    with pytest.raises(NumericalError):
        ci_bands(point, draws[:0], 0.32, "percentile")


def test_ci_bands_translation_and_width():
    rng = np.random.default_rng(11)
    draws = rng.normal(size=(57, 3))
    point = rng.normal(size=3)
    for method in ("percentile", "hall", "median_adjusted"):
        lo, hi = ci_bands(point, draws, 0.32, method)
        lo2, hi2 = ci_bands(point + 1.5, draws + 1.5, 0.32, method)
        np.testing.assert_allclose(lo2, lo + 1.5, atol=1e-12)
        np.testing.assert_allclose(hi2, hi + 1.5, atol=1e-12)
        srt = np.sort(draws, axis=0)
        want = srt[order_stat_rank(0.84, 57) - 1] - srt[order_stat_rank(0.16, 57) - 1]
        np.testing.assert_allclose(hi - lo, want, atol=1e-12)


def test_ci_bands_constant_draws_collapse():
    draws = np.full((25, 2), 3.0)
    point = np.array([1.0, 1.0])
    lo, hi = ci_bands(point, draws, 0.32, "median_adjusted")
    np.testing.assert_array_equal(lo, point)
    np.testing.assert_array_equal(hi, point)
    lo, hi = ci_bands(point, draws, 0.32, "percentile")
    np.testing.assert_array_equal(lo, draws[0])
    np.testing.assert_array_equal(hi, draws[0])


def engine_setup(seed=5, num_cycles=30, m=1):
    params = random_stable_pvar(S=2, m=m, orders=(1, 1), seed=seed, rho=0.6)
    panel = simulate_panel(params, seed=seed + 1, num_cycles=num_cycles)
    spec = params.spec
    restr = build_restrictions(spec, unrestricted(spec))
    return panel, spec, restr


def test_engine_iid_schemes_match_their_unit_block_forms():
    panel, spec, restr = engine_setup()
    scheme = IdentScheme()
    for pair in (("seasonal_iid", "seasonal_block"), ("iid_standardized", "mbb")):
        draws = []
        for name in pair:
            cfg = BootstrapConfig(scheme=name, block_length=1, num_draws=19, seed=3)
            draws.append(bootstrap_engine(panel, spec, restr, scheme, cfg,
                                          horizon=4).draws)
        np.testing.assert_array_equal(draws[0], draws[1])


def test_engine_is_deterministic_across_thread_counts():
    panel, spec, restr = engine_setup(seed=8, m=2)
    scheme = IdentScheme()
    cfg = BootstrapConfig(num_draws=24, seed=12)
    serial = bootstrap_engine(panel, spec, restr, scheme, cfg, horizon=3,
                              threads=1)
    parallel = bootstrap_engine(panel, spec, restr, scheme, cfg, horizon=3,
                                threads=3)
    np.testing.assert_array_equal(serial.draws, parallel.draws)
    assert serial.num_failed == parallel.num_failed
    again = bootstrap_engine(panel, spec, restr, scheme, cfg, horizon=3,
                             threads=1)
    np.testing.assert_array_equal(serial.draws, again.draws)


def test_engine_batched_lane_matches_scalar_lane():
    """The vectorized unrestricted-cholesky path must agree with draw-by-draw
    refitting to solver precision."""
    panel, spec, restr = engine_setup(seed=21, m=2)
    scheme = IdentScheme()
    cfg = BootstrapConfig(num_draws=16, seed=9)
    fast = bootstrap_engine(panel, spec, restr, scheme, cfg, horizon=4)
    slow = bootstrap_engine(panel, spec, restr, scheme, cfg, horizon=4,
                            _force_scalar=True)
    np.testing.assert_allclose(fast.draws, slow.draws, atol=1e-12)


def test_engine_zero_residuals_collapse_bands_onto_the_point():
    """A perfect fit leaves nothing to resample: every pseudo-sample is the
    original recursion and the bands pinch to the point estimate."""
    spec = PvarSpec(num_seasons=2, num_vars=1, orders=(1, 1))
    dgp = PvarParams(spec=spec, intercepts=np.array([[1.0], [0.5]]),
                     coeffs=np.full((2, 1, 1, 1), 0.9),
                     sigma=np.zeros((2, 1, 1)))
    shocks = np.zeros((2 * 9, 1))
    panel = simulate_spvar(dgp, np.zeros((2, 1, 1)), shocks, num_cycles=8)
    restr = build_restrictions(spec, unrestricted(spec))
    cfg = BootstrapConfig(num_draws=15, seed=2)
    draws = bootstrap_engine(panel, spec, restr, IdentScheme(), cfg, horizon=3)
    assert draws.num_failed == 0
    bands = bootstrap_bands(draws)
    np.testing.assert_allclose(bands.lower, bands.point.values, atol=1e-10)
    np.testing.assert_allclose(bands.upper, bands.point.values, atol=1e-10)


def test_engine_counts_failures_below_the_threshold(monkeypatch):
    import spvar.bootstrap as bmod

    panel, spec, restr = engine_setup(seed=31)
    real = bmod.fit_constrained
    calls = {"n": 0}

    def flaky(design, restr_, df_mode="per_equation"):
        calls["n"] += 1
        if calls["n"] == 2:  # first call is the base fit
            raise NumericalError("injected refit failure")
        return real(design, restr_, df_mode)

    monkeypatch.setattr(bmod, "fit_constrained", flaky)
    cfg = BootstrapConfig(num_draws=40, seed=4)
    draws = bootstrap_engine(panel, spec, restr, IdentScheme(), cfg, horizon=2,
                             _force_scalar=True)
    assert draws.num_failed == 1
    assert draws.draws.shape[0] == 39


def test_engine_rejects_too_many_failures(monkeypatch):
    import spvar.bootstrap as bmod

    panel, spec, restr = engine_setup(seed=41)
    real = bmod.fit_constrained
    calls = {"n": 0}

    def flaky(design, restr_, df_mode="per_equation"):
        calls["n"] += 1
        if calls["n"] > 1 and calls["n"] % 2 == 0:
            raise NumericalError("injected refit failure")
        return real(design, restr_, df_mode)

    monkeypatch.setattr(bmod, "fit_constrained", flaky)
    cfg = BootstrapConfig(num_draws=40, seed=4)
    with pytest.raises(NumericalError, match="bootstrap draws failed"):
        bootstrap_engine(panel, spec, restr, IdentScheme(), cfg, horizon=2,
                         _force_scalar=True)
    assert MAX_FAILURE_RATE == 0.05


def test_engine_single_draw_and_band_bookkeeping():
    panel, spec, restr = engine_setup(seed=51)
    cfg = BootstrapConfig(num_draws=1, seed=6, ci_method="percentile")
    draws = bootstrap_engine(panel, spec, restr, IdentScheme(), cfg, horizon=2)
    assert draws.num_requested == 1
    bands = bootstrap_bands(draws)
    np.testing.assert_array_equal(bands.lower, draws.draws[0])
    np.testing.assert_array_equal(bands.upper, draws.draws[0])
    assert bands.num_draws == 1
    assert bands.method == "percentile"
