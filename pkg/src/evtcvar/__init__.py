"""CVaR estimation for heavy-tailed costs.

Two estimators of the Conditional Value-at-Risk at extreme confidence
levels — naive sample averaging and a generalized-Pareto tail estimator
with automated threshold selection — plus the simulation studies that
benchmark them head-to-head, including a risk-averse epsilon-greedy
multi-armed bandit testbed.
"""

from .bandit import (
    ArmState,
    BanditEnv,
    PullRecord,
    Schedule,
    policy_probabilities,
    run_episode,
    step,
)
from .confidence import (
    CiMethod,
    ConfidenceInterval,
    bootstrap_cvar_ci,
    delta_method_ci,
    evt_cvar_gradient,
    fisher_information,
    gpd_loglik_derivs,
)
from .distributions import (
    Distribution,
    GeneralizedPareto,
    Lognormal,
    RngStream,
    Weibull,
    cvar_exact,
    distribution_from_config,
    distribution_to_config,
    gpd_cdf,
    gpd_excess_params,
    gpd_pdf,
    gpd_quantile,
    sample_iid,
)
from .empirical import Sample, empirical_cdf, naive_quantile, sample_cvar
from .errors import (
    CiUnavailableError,
    ConfigError,
    DomainError,
    EvtCvarError,
    InsufficientDataError,
    NonIntegrableTailError,
    ParameterError,
    SelectionFailureError,
)
from .evt_estimator import (
    SA_FALLBACK_MIN,
    estimate_evt_cvar,
    evt_cvar_from_fit,
    evt_quantile,
)
from .experiments import (
    BanditMetricRow,
    ExperimentConfig,
    PRESETS,
    SingleArmMetricRow,
    compute_fraction_closer,
    compute_rmse,
    preset_config,
    run_bandit_testbed,
    run_single_arm,
    write_metrics_csv,
)
from .gpd_mle import MIN_EXCESSES, GpdFit, fit_gpd, gpd_loglik
from .threshold_select import (
    ThresholdCandidate,
    ThresholdConfig,
    ThresholdSelection,
    ad_pvalue,
    ad_statistic,
    candidate_grid,
    forward_stop,
    select_threshold,
)
from .types import CvarEstimate, Method

__version__ = "0.1.0"
