"""Voice-traffic predictability toolkit.

Turns raw call-detail logs into per-user daily traffic series, quantizes
them into discrete state sequences, measures how predictable those
sequences are (entropy and the Fano bound on prediction accuracy), and
evaluates next-state predictors against that bound.
"""

from trafficpred.ingest import (
    CdrRecord,
    DailyTrafficSeries,
    ObservationWindow,
    aggregate_daily,
    parse_cdr_line,
)
from trafficpred.quantizer import QuantizationConfig, StateSequence, quantize_series
from trafficpred.entropy import (
    EntropyReport,
    entropy_report,
    random_entropy,
    real_entropy_exact,
    real_entropy_lz,
    uncorrelated_entropy,
)
from trafficpred.predictability import (
    PredictabilityReport,
    max_predictability,
    predictability_report,
)
from trafficpred.predictors import (
    MarkovModel,
    PredictionOutcome,
    PredictorSpec,
    evaluate_online,
    mf_predict,
)
from trafficpred.stationarity import AdfResult, adf_test, stationary_fraction
from trafficpred.synth import (
    MarkovSource,
    PopulationProfile,
    analytic_entropy_rate,
    analytic_optimal_accuracy,
    generate_sequence,
    generate_traffic_population,
)

__version__ = "0.1.0"

__all__ = [
    "AdfResult",
    "CdrRecord",
    "DailyTrafficSeries",
    "EntropyReport",
    "MarkovModel",
    "MarkovSource",
    "ObservationWindow",
    "PopulationProfile",
    "PredictabilityReport",
    "PredictionOutcome",
    "PredictorSpec",
    "QuantizationConfig",
    "StateSequence",
    "adf_test",
    "aggregate_daily",
    "analytic_entropy_rate",
    "analytic_optimal_accuracy",
    "entropy_report",
    "evaluate_online",
    "generate_sequence",
    "generate_traffic_population",
    "max_predictability",
    "mf_predict",
    "parse_cdr_line",
    "predictability_report",
    "quantize_series",
    "random_entropy",
    "real_entropy_exact",
    "real_entropy_lz",
    "stationary_fraction",
    "uncorrelated_entropy",
]
