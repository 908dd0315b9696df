"""Smoke tests for the python bindings: every exported operation runs end to
end on a small fixture and returns sane shapes and values."""

import math
import os
import sys
import tempfile

import numpy as np

import evload


def check(cond, label):
    if not cond:
        raise AssertionError(label)
    print(f"ok: {label}")


def main():
    check(isinstance(evload.__version__, str), "version string")

    series = evload.synth_series(seed=11, days=70)
    check(len(series) == 70 * 96, "synth length")
    avg = series.avg_kwh()
    check(min(avg) >= 0.0, "nonnegative readings")
    check(max(avg) > 0.0, "some activity")
    peaks = series.peak_kwh()
    check(all(p >= a for p, a in zip(peaks, avg)), "peak >= avg")
    stamps = series.timestamps()
    check(stamps[0] == "2023-01-01T00:00", "first timestamp")

    with tempfile.TemporaryDirectory() as work:
        raw = os.path.join(work, "raw.csv")
        evload.write_raw_csv(series, raw)
        back, skipped = evload.read_raw_csv(raw)
        check(len(back) == len(series), "csv round-trip length")
        check(skipped == [], "no skipped rows")
        check(back.avg_kwh() == avg, "csv round-trip values")

    filled = evload.interpolate_missing(series)
    check(len(filled) == len(series), "gap-free series unchanged")
    cleaned, clipped = evload.filter_anomalies(series, 0.0, 1e6)
    check(clipped == 0, "clean series not clipped")

    features = evload.build_features(cleaned)
    check(len(features) == 70, "one feature row per day")
    check(features.cols() == 9, "feature count")
    check(evload.feature_names()[1] == "na", "column naming")
    na = features.column("na")
    check(max(na) == 1.0, "normalized to unit maximum")
    crr = features.column("crr")
    nnc = features.column("nnc")
    check(all(c == x * y for c, x, y in zip(crr, nnc, na)), "crr identity")
    mat = features.to_matrix()
    check(mat.shape == (70, 9), "matrix shape")
    check(features.maxima[1] > 0.0, "daily-average maximum retained")

    window = evload.hanning_window(8)
    check(window[0] == 0.0 and abs(window[3] - window[4]) < 1e-12, "taper")
    periods, mags = evload.dominant_periods(crr, top_k=2)
    check(len(periods) == 2 and len(mags) == 2, "period report")
    check(5.0 < periods[0] < 9.0, "weekly-ish dominant period")
    all_mags, all_periods = evload.spectrum(crr)
    check(len(all_mags) == 35, "positive-frequency bins")

    cfg = evload.TrainConfig()
    cfg.num_epochs = 15
    cfg.patience = 15
    cfg.multiplier = 1
    cfg.hidden_dim = 8
    cfg.layer_dim = 1
    cfg.learning_rate = 1e-3
    cfg.validate()
    result = evload.train(features, cfg)
    check(result.stopped_epoch >= 1, "training ran")
    history = result.history
    check(history[-1][1] < history[0][1], "train loss decreased")
    check(result.best.val_loss == min(h[2] for h in history), "best val loss")

    with tempfile.TemporaryDirectory() as work:
        path = os.path.join(work, "checkpoint.json")
        result.best.save(path)
        loaded = evload.Checkpoint.load(path)
        check(loaded.epoch == result.best.epoch, "checkpoint round-trip")

    forecast = evload.predict(result.best, features, cfg.sequence_length)
    check(forecast.shape == (cfg.prediction_steps, 9), "forecast shape")
    check(np.isfinite(forecast).all(), "finite forecast")

    scores = evload.evaluate(result.best, features, cfg)
    check(set(scores) >= {"r2", "mse", "rmse", "mae", "step_abs_error"},
          "metric keys")
    check(len(scores["step_abs_error"]) == cfg.prediction_steps,
          "per-step errors")

    m = evload.compute_metrics([1.0, 2.0, 3.0], [1.0, 2.0, 4.0])
    check(abs(m["r2"] - 11.0 / 14.0) < 1e-12, "r2 formula")

    grid = evload.fixture_case(4)
    check(grid.n_buses == 4 and grid.bus_ids == [0, 1, 2, 3], "fixture shape")
    check(abs(evload.q_from_p(1.0, 0.95) - math.tan(math.acos(0.95))) < 1e-15,
          "reactive power")
    vm, va, iters = evload.solve_injections(
        grid, np.array([0.0, 0.02, 0.03, 0.01]),
        np.array([0.0, 0.006, 0.01, 0.003]))
    check(vm[0] == 1.0 and all(vm[1:] < 1.0), "voltage sag under load")
    check(iters >= 1, "solver iterated")

    profile = evload.make_profile([1, 2, 3],
                                  np.array([[0.02, 0.03, 0.01],
                                            [0.01, 0.02, 0.02]]))
    check(profile.q.shape == (2, 3), "profile reactive shape")
    report = evload.compare_profiles(grid, profile, profile)
    check(report["max_abs"] == 0.0, "identical profiles, zero deviation")

    heavier = evload.make_profile([1, 2, 3],
                                  np.array([[0.04, 0.06, 0.02],
                                            [0.02, 0.04, 0.04]]))
    report = evload.compare_profiles(grid, profile, heavier)
    check(report["max_abs"] > 0.0, "nonzero deviation")
    check(report["dv"].shape == (2, 4), "deviation matrix shape")

    try:
        evload.compute_metrics([1.0], [1.0, 2.0])
        raise AssertionError("expected EvloadError")
    except evload.EvloadError:
        print("ok: errors surface as EvloadError")

    print("python smoke passed")


if __name__ == "__main__":
    sys.exit(main())
