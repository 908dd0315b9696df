#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <fstream>
#include <sstream>
#include <tuple>
#include <vector>

#include "evload/errors.hpp"
#include "evload/features.hpp"
#include "evload/gridval.hpp"
#include "evload/metrics.hpp"
#include "evload/series.hpp"
#include "evload/spectral.hpp"
#include "evload/synth.hpp"
#include "evload/timeutil.hpp"
#include "evload/train.hpp"
#include "evload/version.hpp"

namespace py = pybind11;
using namespace evload;

namespace {

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  return out;
}

std::vector<double> channel(const StationSeries& s,
                            double RawRecord::*member) {
  std::vector<double> v;
  v.reserve(s.size());
  for (const RawRecord& r : s.records) v.push_back(r.*member);
  return v;
}

FeatureColumn column_or_throw(const std::string& name) {
  const auto col = feature_from_name(name);
  if (!col) throw InvalidConfig("unknown feature column '" + name + "'");
  return *col;
}

py::dict metrics_dict(const MetricReport& r) {
  py::dict d;
  d["r2"] = r.r2;
  d["mse"] = r.mse;
  d["rmse"] = r.rmse;
  d["mae"] = r.mae;
  d["n_points"] = r.n_points;
  return d;
}

}  // namespace

PYBIND11_MODULE(_evload, m) {
  m.doc() = "EV charging demand forecasting toolkit";
  m.attr("__version__") = kVersion;

  py::register_exception<Error>(m, "EvloadError");

  py::class_<StationSeries>(m, "StationSeries")
      .def_readonly("station_id", &StationSeries::station_id)
      .def("__len__", &StationSeries::size)
      .def("timestamps",
           [](const StationSeries& s) {
             std::vector<std::string> out;
             out.reserve(s.size());
             for (const RawRecord& r : s.records)
               out.push_back(format_timestamp(r.timestamp));
             return out;
           })
      .def("avg_kwh",
           [](const StationSeries& s) { return channel(s, &RawRecord::avg_kwh); })
      .def("peak_kwh",
           [](const StationSeries& s) { return channel(s, &RawRecord::peak_kwh); })
      .def("last_kwh",
           [](const StationSeries& s) { return channel(s, &RawRecord::last_kwh); });

  m.def(
      "synth_series",
      [](std::uint64_t seed, int days, double period_days, double noise,
         const std::string& station_id) {
        SynthConfig cfg;
        cfg.seed = seed;
        cfg.days = days;
        cfg.period_days = period_days;
        cfg.noise = noise;
        cfg.station_id = station_id;
        return make_synthetic_series(cfg);
      },
      py::arg("seed") = 42, py::arg("days") = 365,
      py::arg("period_days") = 7.0, py::arg("noise") = 0.05,
      py::arg("station_id") = "synthetic",
      "Deterministic synthetic charging series with a weekly-style cycle");

  m.def(
      "read_raw_csv",
      [](const std::string& path) {
        auto in = open_in(path);
        ParseReport report = parse_csv(in);
        std::vector<std::string> skipped;
        for (const ParseIssue& i : report.skipped)
          skipped.push_back("line " + std::to_string(i.line) + ": " + i.message);
        return std::make_tuple(std::move(report.series), std::move(skipped));
      },
      py::arg("path"), "Returns (series, skipped_row_messages)");

  m.def(
      "write_raw_csv",
      [](const StationSeries& s, const std::string& path) {
        auto out = open_out(path);
        write_csv(s, out);
      },
      py::arg("series"), py::arg("path"));

  m.def("interpolate_missing", &interpolate_missing, py::arg("series"));

  m.def(
      "filter_anomalies",
      [](const StationSeries& s, double min_kwh, double max_kwh) {
        FilterResult r = filter_anomalies(s, Bounds{min_kwh, max_kwh});
        return std::make_tuple(std::move(r.series), r.clipped_count);
      },
      py::arg("series"), py::arg("min_kwh") = 0.0, py::arg("max_kwh") = 1e6,
      "Returns (series, clipped_count)");

  py::class_<FeatureMatrix>(m, "FeatureMatrix")
      .def("__len__", &FeatureMatrix::rows)
      .def("cols", &FeatureMatrix::cols)
      .def("dates",
           [](const FeatureMatrix& f) {
             std::vector<std::string> out;
             out.reserve(f.rows());
             for (const Date& d : f.days) out.push_back(format_date(d));
             return out;
           })
      .def("column",
           [](const FeatureMatrix& f, const std::string& name) {
             return f.column(column_or_throw(name));
           },
           py::arg("name"))
      .def("to_matrix", &FeatureMatrix::to_matrix)
      .def_property_readonly("maxima",
                             [](const FeatureMatrix& f) {
                               return std::make_tuple(f.maxima.max_nc,
                                                      f.maxima.max_da,
                                                      f.maxima.max_dm);
                             })
      .def_readonly("warnings", &FeatureMatrix::warnings);

  m.def(
      "build_features",
      [](const StationSeries& s, double epsilon, bool include_raw_da) {
        FeatureOptions opts;
        opts.epsilon = epsilon;
        opts.include_raw_da = include_raw_da;
        return build_feature_matrix(s, opts);
      },
      py::arg("series"), py::arg("epsilon") = 1e-6,
      py::arg("include_raw_da") = false);

  m.def("feature_names", [] {
    std::vector<std::string> names;
    for (int i = 0; i < kFeatureCount; ++i)
      names.push_back(feature_name(static_cast<FeatureColumn>(i)));
    return names;
  });

  m.def("hanning_window", &hanning_window, py::arg("n"));
  m.def(
      "spectrum",
      [](const std::vector<double>& values) {
        Spectrum s = fft_magnitude(values);
        std::vector<double> periods;
        periods.reserve(s.magnitudes.size());
        for (std::size_t k = 1; k <= s.magnitudes.size(); ++k)
          periods.push_back(s.period_of_bin(k));
        return std::make_tuple(s.magnitudes, periods);
      },
      py::arg("values"), "Returns (magnitudes, periods) for bins 1..n/2");
  m.def(
      "dominant_periods",
      [](const std::vector<double>& values, int top_k, double max_period) {
        const SpectrumReport r =
            dominant_periods(fft_magnitude(values), top_k, max_period);
        return std::make_tuple(r.periods, r.magnitudes);
      },
      py::arg("values"), py::arg("top_k") = 3, py::arg("max_period") = 30.0,
      "Returns (periods, magnitudes), strongest first");

  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("sequence_length", &TrainConfig::sequence_length)
      .def_readwrite("prediction_steps", &TrainConfig::prediction_steps)
      .def_readwrite("training_size", &TrainConfig::training_size)
      .def_readwrite("validation_size", &TrainConfig::validation_size)
      .def_readwrite("test_size", &TrainConfig::test_size)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("batch_size", &TrainConfig::batch_size)
      .def_readwrite("noise_level", &TrainConfig::noise_level)
      .def_readwrite("multiplier", &TrainConfig::multiplier)
      .def_readwrite("num_epochs", &TrainConfig::num_epochs)
      .def_readwrite("patience", &TrainConfig::patience)
      .def_readwrite("delta", &TrainConfig::delta)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("hidden_dim", &TrainConfig::hidden_dim)
      .def_readwrite("layer_dim", &TrainConfig::layer_dim)
      .def_readwrite("grad_clip_norm", &TrainConfig::grad_clip_norm)
      .def("validate", &TrainConfig::validate);

  py::class_<Checkpoint>(m, "Checkpoint")
      .def_readonly("epoch", &Checkpoint::epoch)
      .def_readonly("val_loss", &Checkpoint::val_loss)
      .def("save",
           [](const Checkpoint& c, const std::string& path) {
             auto out = open_out(path);
             write_checkpoint_json(c, out);
           },
           py::arg("path"))
      .def_static("load", [](const std::string& path) {
        auto in = open_in(path);
        return read_checkpoint_json(in);
      });

  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("best", &TrainResult::best)
      .def_readonly("stopped_epoch", &TrainResult::stopped_epoch)
      .def_property_readonly("history", [](const TrainResult& r) {
        std::vector<std::tuple<int, double, double>> out;
        out.reserve(r.history.size());
        for (const EpochStats& e : r.history)
          out.emplace_back(e.epoch, e.train_loss, e.val_loss);
        return out;
      });

  m.def(
      "train",
      [](const FeatureMatrix& features, const TrainConfig& config) {
        return train_loop(build_samples(features, config), config);
      },
      py::arg("features"), py::arg("config"),
      py::call_guard<py::gil_scoped_release>());

  m.def(
      "predict",
      [](const Checkpoint& ckpt, const FeatureMatrix& features,
         int sequence_length) {
        const Matrix rows = features.to_matrix();
        if (rows.rows() < sequence_length)
          throw SeriesTooShort("not enough feature rows for the window");
        const Matrix tail =
            rows.bottomRows(static_cast<Eigen::Index>(sequence_length));
        return predict_future(tail, ckpt.params, features.maxima);
      },
      py::arg("checkpoint"), py::arg("features"), py::arg("sequence_length") = 7,
      "Forecast from the trailing window, denormalized to physical units");

  m.def(
      "evaluate",
      [](const Checkpoint& ckpt, const FeatureMatrix& features,
         const TrainConfig& config, const std::vector<std::string>& columns) {
        std::vector<FeatureColumn> cols;
        for (const std::string& name : columns)
          cols.push_back(column_or_throw(name));
        const Split split = split_data(
            build_samples(features, config),
            {config.training_size, config.validation_size, config.test_size});
        const EvalResult r = evaluate_model(ckpt, split.test, cols);
        py::dict d = metrics_dict(r.report);
        d["step_abs_error"] = r.step_abs_error;
        return d;
      },
      py::arg("checkpoint"), py::arg("features"), py::arg("config"),
      py::arg("columns") = std::vector<std::string>{"na"});

  m.def(
      "compute_metrics",
      [](const std::vector<double>& pred, const std::vector<double>& target) {
        return metrics_dict(compute_metrics(pred, target));
      },
      py::arg("pred"), py::arg("target"));

  py::class_<GridCase>(m, "GridCase")
      .def_property_readonly(
          "n_buses", [](const GridCase& g) { return g.buses.size(); })
      .def_property_readonly(
          "bus_ids",
          [](const GridCase& g) {
            std::vector<int> ids;
            for (const Bus& b : g.buses) ids.push_back(b.id);
            return ids;
          })
      .def("save", [](const GridCase& g, const std::string& path) {
        auto out = open_out(path);
        write_grid_case_json(g, out);
      })
      .def_static("load", [](const std::string& path) {
        auto in = open_in(path);
        return read_grid_case_json(in);
      });

  py::class_<LoadProfile>(m, "LoadProfile")
      .def_readonly("bus_ids", &LoadProfile::bus_ids)
      .def_readonly("p", &LoadProfile::p)
      .def_readonly("q", &LoadProfile::q);

  m.def("fixture_case",
        [](int n_buses) { return build_fixture_case(n_buses); },
        py::arg("n_buses"),
        "Radial feeder with bus 0 as the slack");
  m.def("make_profile", &make_profile, py::arg("bus_ids"), py::arg("p"),
        py::arg("power_factor") = kDefaultPowerFactor);
  m.def("q_from_p", &q_from_p, py::arg("p"),
        py::arg("power_factor") = kDefaultPowerFactor);

  m.def(
      "solve_injections",
      [](const GridCase& grid, const Eigen::VectorXd& p,
         const Eigen::VectorXd& q, double tol, int max_iter) {
        const VoltageSolutionSlice s = solve_injections(grid, p, q, tol, max_iter);
        return std::make_tuple(s.vm, s.va, s.iterations);
      },
      py::arg("grid"), py::arg("p_load"), py::arg("q_load"),
      py::arg("tol") = 1e-8, py::arg("max_iter") = 50,
      "Returns (vm, va, iterations)");

  m.def(
      "compare_profiles",
      [](const GridCase& grid, const LoadProfile& actual,
         const LoadProfile& predicted, double tol, int max_iter) {
        const DeviationReport r =
            compare_profiles(grid, actual, predicted, tol, max_iter);
        py::dict d;
        d["dv"] = r.dv;
        d["max_abs"] = r.max_abs;
        d["worst_timestep"] = r.worst_timestep;
        d["worst_bus_id"] = grid.buses[r.worst_bus].id;
        return d;
      },
      py::arg("grid"), py::arg("actual"), py::arg("predicted"),
      py::arg("tol") = 1e-8, py::arg("max_iter") = 50);
}
