"""EV charging demand forecasting toolkit.

Thin python surface over the C++ core: synthetic data, ingest and cleaning,
daily feature extraction, periodicity analysis, sequence model training and
forecasting, and feeder voltage validation.
"""

from ._evload import (
    Checkpoint,
    EvloadError,
    FeatureMatrix,
    GridCase,
    LoadProfile,
    StationSeries,
    TrainConfig,
    TrainResult,
    __version__,
    build_features,
    compare_profiles,
    compute_metrics,
    dominant_periods,
    evaluate,
    feature_names,
    filter_anomalies,
    fixture_case,
    hanning_window,
    interpolate_missing,
    make_profile,
    predict,
    q_from_p,
    read_raw_csv,
    solve_injections,
    spectrum,
    synth_series,
    train,
    write_raw_csv,
)

__all__ = [
    "Checkpoint",
    "EvloadError",
    "FeatureMatrix",
    "GridCase",
    "LoadProfile",
    "StationSeries",
    "TrainConfig",
    "TrainResult",
    "__version__",
    "build_features",
    "compare_profiles",
    "compute_metrics",
    "dominant_periods",
    "evaluate",
    "feature_names",
    "filter_anomalies",
    "fixture_case",
    "hanning_window",
    "interpolate_missing",
    "make_profile",
    "predict",
    "q_from_p",
    "read_raw_csv",
    "solve_injections",
    "spectrum",
    "synth_series",
    "train",
    "write_raw_csv",
]
