"""Periodic vector autoregressions: restricted estimation, structural
identification, seasonal bootstrap inference, and simulation tooling."""

__version__ = "0.1.0"

from .bootstrap import (
    BandSet,
    BootstrapConfig,
    BootstrapDraws,
    bootstrap_bands,
    bootstrap_engine,
    ci_bands,
    draw_gsbb_indices,
    draw_mbb_indices,
    gsbb_block_starts,
    gsbb_candidates,
    order_stat_rank,
)
from .diagnostics import (
    periodic_acf,
    periodogram,
    sample_acf,
    seasonal_demean,
    spectral_density,
    whiteness_summary,
)
from .errors import ConfigError, DataError, NumericalError, SpvarError
from .estimation import (
    DesignMatrices,
    FitResult,
    build_design,
    estimate_sigma,
    fit,
    fit_constrained,
    params_to_beta,
)
from .identification import (
    IdentScheme,
    StructuralFit,
    identify,
    identify_cholesky,
    identify_short_long,
    stack_structural_irf,
    structural_irf,
)
from .model import (
    IrfSet,
    PvarParams,
    PvarSpec,
    StackedVar,
    build_stacked_var,
    companion_matrix,
    impulse_responses,
    is_periodically_stationary,
    longrun_cumulative,
    ma_coefficients,
    stack_irf,
    stack_var_irf,
    stationarity_margin,
    wrap_season,
)
from .panel import TimeSeriesPanel, diff_log, required_presample, resolve_presample
from .restrictions import (
    RestrictionPattern,
    RestrictionSet,
    build_restrictions,
    peersman,
    unrestricted,
    var_collapse,
)
from .simulation import (
    ClipRule,
    CoverageResult,
    GARCH_PRESETS,
    GarchSpec,
    coverage_experiment,
    garch_shocks,
    simulate_spvar,
    true_structural_irf,
)
