"""Score-driven duration models for zero-inflated count data.

The package covers the full workflow: cleaning raw tick data into duration
series, fitting score-driven models under ten observation families by
maximum likelihood, diagnosing filter stability, forecasting and scoring
out of sample, and reproducing the rounding-bias simulation study.
"""

__version__ = "0.1.0"

from .estimation import (
    FitOptions,
    FitResult,
    InvertibilityReport,
    StaticParams,
    aic,
    check_invertibility,
    fit,
    log_likelihood,
    standard_errors,
)
from .evaluation import DmResult, ForecastRecord, diebold_mariano, forecast_scores, interval_log_score
from .exceptions import (
    BoxDegenerate,
    DegenerateData,
    DurascoreError,
    EmptyAfterCleaning,
    FilterDiverged,
    HessianNotPD,
    IncompatibleObservations,
    MalformedInput,
    NonConvergence,
    ZeroVariance,
)
from .families import (
    CONTINUOUS_TAGS,
    DISCRETE_TAGS,
    FAMILY_TAGS,
    GenGammaParams,
    NbParams,
    ZinbParams,
    get_family,
    gengamma_fisher_beta,
    gengamma_log_pdf,
    gengamma_score_beta,
    nb_fisher_mu,
    nb_log_pmf,
    nb_score_mu,
    zinb_fisher_mu,
    zinb_log_pmf,
    zinb_moments,
    zinb_sample,
    zinb_score_mu,
)
from .filtering import (
    FilterPath,
    GasCoefficients,
    default_f1,
    reparam_score,
    run_filter,
    unconditional_value,
)
from .pipeline import (
    CleaningReport,
    DurationSeries,
    TickRecord,
    apply_zero_treatment,
    clean,
    durations,
    read_ticks_csv,
    session_durations,
)
from .simulation import (
    SimDesign,
    SimReport,
    exp_floor_reparam,
    exp_floor_reparam_inv,
    fit_exp_floor_geometric,
    rounding_study,
    simulate_path,
)

__all__ = [name for name in dir() if not name.startswith("_")]
