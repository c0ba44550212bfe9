"""Bull and bear market regimes from a restricted 4-state Markov-switching model."""
from .kernels import BACKEND
from .marketdata import ReturnSeries, build_weekly_series, load_daily_prices, summary_stats
from .models import GARCH11, MS2, MS4, MS4_T, MS4_UNRESTRICTED, ModelSpec, get_spec
from .regime import (
    StateParams,
    TransitionMatrix,
    check_identification,
    regime_mean,
    regime_probability,
    stationary_distribution,
)
from .inference import (
    McmcConfig,
    PosteriorSample,
    PriorSpec,
    ffbs_sample,
    gibbs_estimate,
    hamilton_filter,
    smoothed_state_probs,
)

__version__ = "0.1.0"
