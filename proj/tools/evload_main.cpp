#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "evload/errors.hpp"
#include "evload/features.hpp"
#include "evload/format.hpp"
#include "evload/gridval.hpp"
#include "evload/manifest.hpp"
#include "evload/metrics.hpp"
#include "evload/series.hpp"
#include "evload/spectral.hpp"
#include "evload/synth.hpp"
#include "evload/train.hpp"
#include "evload/version.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace evload;

namespace {

constexpr std::uint64_t kDefaultSeed = 42;

// Options shared by every subcommand.
struct Common {
  std::string out_dir;
  std::string config_path;
  std::uint64_t seed = kDefaultSeed;
  CLI::Option* seed_opt = nullptr;
  CLI::Option* config_opt = nullptr;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--out-dir", c.out_dir,
                  "Output directory (default: $EVLOAD_OUT_DIR or .)");
  c.config_opt = sub->add_option("--config", c.config_path, "JSON config file");
  c.seed_opt = sub->add_option(
      "--seed", c.seed,
      "Random seed (default " + std::to_string(kDefaultSeed) +
          "; overrides the config)");
}

fs::path resolve_out_dir(const Common& c) {
  fs::path dir;
  if (!c.out_dir.empty()) {
    dir = c.out_dir;
  } else if (const char* env = std::getenv("EVLOAD_OUT_DIR");
             env && *env != '\0') {
    dir = env;
  } else {
    dir = ".";
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) {
    throw IoError("cannot create output directory '" + dir.string() +
                  "': " + ec.message());
  }
  return dir;
}

std::ifstream open_input(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
  return in;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  out << content;
  if (!out) throw IoError("failed writing '" + path.string() + "'");
}

nlohmann::json load_config_json(const Common& c) {
  if (c.config_path.empty()) return nlohmann::json::object();
  auto in = open_input(c.config_path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidConfig(std::string("unparseable config: ") + e.what());
  }
  if (!j.is_object()) throw InvalidConfig("config root must be a JSON object");
  return j;
}

// Flag beats config key beats the fixed default.
std::uint64_t resolve_seed(const Common& c, const nlohmann::json& config) {
  if (c.seed_opt && c.seed_opt->count() > 0) return c.seed;
  if (config.contains("seed")) {
    if (!config["seed"].is_number_integer() &&
        !config["seed"].is_number_unsigned()) {
      throw InvalidConfig("seed must be an integer");
    }
    return config["seed"].get<std::uint64_t>();
  }
  return kDefaultSeed;
}

TrainConfig train_config_from(const Common& c, const nlohmann::json& config) {
  TrainConfig cfg;
  if (!c.config_path.empty()) {
    auto in = open_input(c.config_path);
    cfg = parse_train_config(in);
  }
  cfg.seed = resolve_seed(c, config);
  cfg.validate();
  return cfg;
}

void update_manifest(const fs::path& out_dir, const std::string& stage,
                     const Common& c, std::uint64_t seed,
                     std::vector<std::string> inputs,
                     std::vector<std::string> outputs) {
  const fs::path path = out_dir / "manifest.json";
  RunManifest manifest;
  if (fs::exists(path)) {
    try {
      auto in = open_input(path);
      manifest = read_manifest_json(in);
    } catch (const Error&) {
      manifest = RunManifest{};  // unreadable manifests are rebuilt
    }
  }
  manifest.tool_version = kVersion;
  manifest.out_dir = out_dir.generic_string();
  StageRecord rec;
  rec.config_path = c.config_path;
  rec.input_paths = std::move(inputs);
  rec.seed = seed;
  rec.outputs = std::move(outputs);
  manifest.stages[stage] = std::move(rec);
  std::ostringstream body;
  write_manifest_json(manifest, body);
  write_file(path, body.str());
}

FeatureMatrix load_features(const fs::path& path, bool need_meta) {
  auto in = open_input(path);
  FeatureMatrix m = read_feature_csv(in);
  fs::path meta = path;
  meta.replace_extension();
  meta += ".meta.json";
  if (fs::exists(meta)) {
    auto min = open_input(meta);
    read_feature_meta_json(min, m);
  } else if (need_meta) {
    throw IoError("missing feature metadata '" + meta.string() + "'");
  }
  return m;
}

std::string meta_name_for(const std::string& csv_name) {
  fs::path p = csv_name;
  p.replace_extension();
  p += ".meta.json";
  return p.string();
}

// ---- subcommand bodies ----

struct SynthArgs {
  Common common;
  int days = 365;
  double period = 7.0;
  double noise = 0.05;
  std::string station = "synthetic";
};

void run_synth(const SynthArgs& a) {
  const auto config = load_config_json(a.common);
  const fs::path out_dir = resolve_out_dir(a.common);
  SynthConfig cfg;
  cfg.seed = resolve_seed(a.common, config);
  cfg.days = a.days;
  cfg.period_days = a.period;
  cfg.noise = a.noise;
  cfg.station_id = a.station;
  const StationSeries series = make_synthetic_series(cfg);

  std::ostringstream body;
  write_csv(series, body);
  write_file(out_dir / "raw.csv", body.str());
  update_manifest(out_dir, "synth", a.common, cfg.seed, {}, {"raw.csv"});
  std::cout << "wrote raw.csv: " << series.size() << " records over "
            << cfg.days << " days (seed " << cfg.seed << ")\n";
}

struct PreprocessArgs {
  Common common;
  std::string input;
};

void run_preprocess(const PreprocessArgs& a) {
  const auto config = load_config_json(a.common);
  const fs::path out_dir = resolve_out_dir(a.common);
  const std::uint64_t seed = resolve_seed(a.common, config);

  Bounds bounds;
  bounds.min_kwh = config.value("min_kwh", 0.0);
  bounds.max_kwh = config.value("max_kwh", 1e6);
  FeatureOptions fopts;
  fopts.epsilon = config.value("epsilon", 1e-6);
  fopts.include_raw_da = config.value("include_raw_da", false);

  auto in = open_input(a.input);
  const ParseReport report = parse_csv(in);
  for (const ParseIssue& issue : report.skipped) {
    std::cerr << a.input << ":" << issue.line << ": skipped: " << issue.message
              << '\n';
  }
  const StationSeries filled = interpolate_missing(report.series);
  std::size_t interpolated = 0;
  for (Provenance f : filled.flags) {
    if (f == Provenance::Interpolated) ++interpolated;
  }
  const FilterResult filtered = filter_anomalies(filled, bounds);
  const FeatureMatrix features = build_feature_matrix(filtered.series, fopts);
  for (const std::string& w : features.warnings) {
    std::cerr << "warning: " << w << '\n';
  }

  std::ostringstream cleaned;
  write_csv(filtered.series, cleaned);
  write_file(out_dir / "cleaned.csv", cleaned.str());
  std::ostringstream fcsv;
  write_feature_csv(features, fcsv);
  write_file(out_dir / "features.csv", fcsv.str());
  std::ostringstream fmeta;
  write_feature_meta_json(features, fmeta);
  write_file(out_dir / "features.meta.json", fmeta.str());

  update_manifest(out_dir, "preprocess", a.common, seed, {a.input},
                  {"cleaned.csv", "features.csv", "features.meta.json"});
  std::cout << "parsed " << report.series.size() << " records ("
            << report.skipped.size() << " skipped), interpolated "
            << interpolated << ", clipped " << filtered.clipped_count
            << "; features for " << features.rows() << " days\n";
}

struct AnalyzeArgs {
  Common common;
  std::string features;
  std::string column = "na";
  int top_k = 3;
  double max_period = 30.0;
  CLI::Option* column_opt = nullptr;
  CLI::Option* top_k_opt = nullptr;
  CLI::Option* max_period_opt = nullptr;
};

void run_analyze(const AnalyzeArgs& a) {
  const auto config = load_config_json(a.common);
  const fs::path out_dir = resolve_out_dir(a.common);
  const std::uint64_t seed = resolve_seed(a.common, config);

  std::string column = a.column;
  if (a.column_opt->count() == 0 && config.contains("column")) {
    column = config["column"].get<std::string>();
  }
  int top_k = a.top_k;
  if (a.top_k_opt->count() == 0 && config.contains("top_k")) {
    top_k = config["top_k"].get<int>();
  }
  double max_period = a.max_period;
  if (a.max_period_opt->count() == 0 && config.contains("max_period")) {
    max_period = config["max_period"].get<double>();
  }
  const auto col = feature_from_name(column);
  if (!col) throw InvalidConfig("unknown feature column '" + column + "'");

  const FeatureMatrix m = load_features(a.features, false);

  // The periodicity scan always runs on the correlation signal; the rolling
  // views smooth whichever column was asked for.
  const Spectrum spectrum = fft_magnitude(m.crr);
  const SpectrumReport report = dominant_periods(spectrum, top_k, max_period);

  std::vector<std::string> outputs;
  std::ostringstream sj;
  write_spectrum_report_json(report, sj);
  write_file(out_dir / "spectrum.json", sj.str());
  outputs.push_back("spectrum.json");
  std::ostringstream sc;
  write_spectrum_csv(spectrum, sc);
  write_file(out_dir / "spectrum.csv", sc.str());
  outputs.push_back("spectrum.csv");

  const std::vector<double>& values = m.column(*col);
  for (int window : {7, 14, 30}) {
    const std::vector<double> rolled = rolling_average(values, window);
    std::ostringstream rc;
    rc << "date," << column << ",rolling\n";
    for (std::size_t i = 0; i < rolled.size(); ++i) {
      rc << format_date(m.days[i]) << ',' << format_double(values[i]) << ','
         << format_double(rolled[i]) << '\n';
    }
    const std::string name = "rolling_" + std::to_string(window) + ".csv";
    write_file(out_dir / name, rc.str());
    outputs.push_back(name);
  }

  update_manifest(out_dir, "analyze", a.common, seed, {a.features}, outputs);
  std::cout << "dominant periods (days):";
  for (double p : report.periods) std::cout << ' ' << format_double(p);
  std::cout << '\n';
}

struct TrainArgs {
  Common common;
  std::string features;
};

void run_train(const TrainArgs& a) {
  const auto config = load_config_json(a.common);
  const fs::path out_dir = resolve_out_dir(a.common);
  const TrainConfig cfg = train_config_from(a.common, config);

  const FeatureMatrix features = load_features(a.features, false);
  const std::vector<SequenceSample> samples = build_samples(features, cfg);
  const TrainResult result = train_loop(samples, cfg);

  std::ostringstream ck;
  write_checkpoint_json(result.best, ck);
  write_file(out_dir / "checkpoint.json", ck.str());
  std::ostringstream hist;
  write_loss_history_csv(result.history, hist);
  write_file(out_dir / "loss_history.csv", hist.str());

  update_manifest(out_dir, "train", a.common, cfg.seed, {a.features},
                  {"checkpoint.json", "loss_history.csv"});
  std::cout << "trained " << result.stopped_epoch << " epochs on "
            << samples.size() << " windows; best epoch " << result.best.epoch
            << " (val_loss " << format_double(result.best.val_loss) << ")\n";
}

struct PredictArgs {
  Common common;
  std::string checkpoint;
  std::string features;
};

void run_predict(const PredictArgs& a) {
  const auto config = load_config_json(a.common);
  const fs::path out_dir = resolve_out_dir(a.common);
  const TrainConfig cfg = train_config_from(a.common, config);

  auto ck_in = open_input(a.checkpoint);
  const Checkpoint ckpt = read_checkpoint_json(ck_in);
  const FeatureMatrix features = load_features(a.features, true);

  const Matrix rows = features.to_matrix();
  if (rows.rows() < cfg.sequence_length) {
    throw SeriesTooShort("need at least " +
                         std::to_string(cfg.sequence_length) +
                         " days of features to forecast");
  }
  const Matrix tail =
      rows.bottomRows(static_cast<Eigen::Index>(cfg.sequence_length));
  const Matrix forecast = predict_future(tail, ckpt.params, features.maxima);

  std::ostringstream fc;
  write_forecast_csv(forecast, fc);
  write_file(out_dir / "forecast.csv", fc.str());

  update_manifest(out_dir, "predict", a.common, cfg.seed,
                  {a.checkpoint, a.features, meta_name_for(a.features)},
                  {"forecast.csv"});
  std::cout << "forecast " << forecast.rows() << " steps from the last "
            << cfg.sequence_length << " days; wrote forecast.csv\n";
}

struct EvaluateArgs {
  Common common;
  std::string checkpoint;
  std::string features;
};

void run_evaluate(const EvaluateArgs& a) {
  const auto config = load_config_json(a.common);
  const fs::path out_dir = resolve_out_dir(a.common);
  const TrainConfig cfg = train_config_from(a.common, config);

  std::vector<FeatureColumn> columns{FeatureColumn::Na};
  if (config.contains("eval_columns")) {
    columns.clear();
    for (const auto& name : config["eval_columns"]) {
      const auto col = feature_from_name(name.get<std::string>());
      if (!col) {
        throw InvalidConfig("unknown eval column '" +
                            name.get<std::string>() + "'");
      }
      columns.push_back(*col);
    }
  }

  auto ck_in = open_input(a.checkpoint);
  const Checkpoint ckpt = read_checkpoint_json(ck_in);
  const FeatureMatrix features = load_features(a.features, false);
  if (ckpt.params.dims.prediction_steps != cfg.prediction_steps ||
      ckpt.params.dims.input_dim != static_cast<int>(kFeatureCount) +
                                        (features.raw_da ? 1 : 0)) {
    throw ShapeMismatch("checkpoint dimensions disagree with the config");
  }

  const std::vector<SequenceSample> samples = build_samples(features, cfg);
  const Split split = split_data(
      samples, {cfg.training_size, cfg.validation_size, cfg.test_size});
  const EvalResult result = evaluate_model(ckpt, split.test, columns);

  std::ostringstream mc;
  write_metrics_csv(result.report, cfg.prediction_steps, mc);
  write_file(out_dir / "metrics.csv", mc.str());
  std::ostringstream ac;
  write_abs_error_csv(result.step_abs_error, ac);
  write_file(out_dir / "abs_error.csv", ac.str());

  update_manifest(out_dir, "evaluate", a.common, cfg.seed,
                  {a.checkpoint, a.features}, {"metrics.csv", "abs_error.csv"});
  std::cout << "test windows: " << split.test.size()
            << "; r2 " << format_double(result.report.r2) << ", rmse "
            << format_double(result.report.rmse) << ", mae "
            << format_double(result.report.mae) << " over "
            << result.report.n_points << " points\n";
}

struct GridArgs {
  Common common;
  std::string case_path;
  int fixture_buses = 0;
  std::string actual;
  std::string predicted;
  double tol = 1e-8;
  int max_iter = 50;
};

void run_gridcheck(const GridArgs& a) {
  const auto config = load_config_json(a.common);
  const fs::path out_dir = resolve_out_dir(a.common);
  const std::uint64_t seed = resolve_seed(a.common, config);

  GridCase grid;
  std::vector<std::string> inputs;
  if (!a.case_path.empty()) {
    auto in = open_input(a.case_path);
    grid = read_grid_case_json(in);
    inputs.push_back(a.case_path);
  } else if (a.fixture_buses > 0) {
    grid = build_fixture_case(a.fixture_buses);
  } else {
    throw InvalidConfig("pass either --case or --fixture-buses");
  }

  auto actual_in = open_input(a.actual);
  const LoadProfile actual = read_load_profile_csv(actual_in);
  auto predicted_in = open_input(a.predicted);
  const LoadProfile predicted = read_load_profile_csv(predicted_in);
  inputs.push_back(a.actual);
  inputs.push_back(a.predicted);

  const DeviationReport report =
      compare_profiles(grid, actual, predicted, a.tol, a.max_iter);

  std::ostringstream dc;
  write_deviation_csv(report, grid, dc);
  write_file(out_dir / "deviation.csv", dc.str());
  std::ostringstream ds;
  write_deviation_summary_json(report, grid, ds);
  write_file(out_dir / "deviation_summary.json", ds.str());

  update_manifest(out_dir, "gridcheck", a.common, seed, inputs,
                  {"deviation.csv", "deviation_summary.json"});
  std::cout << "max |dV| " << format_double(report.max_abs) << " pu at bus "
            << grid.buses[report.worst_bus].id << ", timestep "
            << report.worst_timestep << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"EV charging demand forecasting and grid impact toolkit"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  SynthArgs synth_args;
  auto* synth = app.add_subcommand("synth", "Generate a synthetic charging series");
  add_common(synth, synth_args.common);
  synth->add_option("--days", synth_args.days, "Days to generate");
  synth->add_option("--period", synth_args.period, "Cycle length in days");
  synth->add_option("--noise", synth_args.noise, "Relative disturbance level");
  synth->add_option("--station", synth_args.station, "Station id");

  PreprocessArgs pre_args;
  auto* pre = app.add_subcommand(
      "preprocess", "Clean a raw interval CSV and emit daily features");
  add_common(pre, pre_args.common);
  pre->add_option("--input", pre_args.input, "Raw interval CSV")->required();

  AnalyzeArgs an_args;
  auto* an = app.add_subcommand(
      "analyze", "Periodicity scan and rolling averages over the features");
  add_common(an, an_args.common);
  an->add_option("--features", an_args.features, "Feature CSV")->required();
  an_args.column_opt =
      an->add_option("--column", an_args.column, "Column to smooth");
  an_args.top_k_opt =
      an->add_option("--top-k", an_args.top_k, "Dominant periods to keep");
  an_args.max_period_opt = an->add_option("--max-period", an_args.max_period,
                                          "Longest period considered (days)");

  TrainArgs train_args;
  auto* tr = app.add_subcommand("train", "Train the forecaster on features");
  add_common(tr, train_args.common);
  tr->add_option("--features", train_args.features, "Feature CSV")->required();

  PredictArgs pred_args;
  auto* pr = app.add_subcommand("predict", "Forecast from the latest window");
  add_common(pr, pred_args.common);
  pr->add_option("--checkpoint", pred_args.checkpoint, "Checkpoint JSON")
      ->required();
  pr->add_option("--features", pred_args.features, "Feature CSV")->required();

  EvaluateArgs ev_args;
  auto* ev = app.add_subcommand("evaluate", "Score a checkpoint on the test split");
  add_common(ev, ev_args.common);
  ev->add_option("--checkpoint", ev_args.checkpoint, "Checkpoint JSON")
      ->required();
  ev->add_option("--features", ev_args.features, "Feature CSV")->required();

  GridArgs grid_args;
  auto* gc = app.add_subcommand(
      "gridcheck", "Compare feeder voltages under two load profiles");
  add_common(gc, grid_args.common);
  gc->add_option("--case", grid_args.case_path, "Grid case JSON");
  gc->add_option("--fixture-buses", grid_args.fixture_buses,
                 "Use the built-in radial feeder with N buses");
  gc->add_option("--actual", grid_args.actual, "Actual load profile CSV")
      ->required();
  gc->add_option("--predicted", grid_args.predicted,
                 "Predicted load profile CSV")
      ->required();
  gc->add_option("--tol", grid_args.tol, "Mismatch tolerance (pu)");
  gc->add_option("--max-iter", grid_args.max_iter, "Iteration cap");

  try {
    app.parse(argc, argv);
    if (synth->parsed()) run_synth(synth_args);
    if (pre->parsed()) run_preprocess(pre_args);
    if (an->parsed()) run_analyze(an_args);
    if (tr->parsed()) run_train(train_args);
    if (pr->parsed()) run_predict(pred_args);
    if (ev->parsed()) run_evaluate(ev_args);
    if (gc->parsed()) run_gridcheck(grid_args);
    return 0;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.code() << ": " << e.what() << '\n';
    return 2;
  } catch (const InvalidConfig& e) {
    std::cerr << "error: " << e.code() << ": " << e.what() << '\n';
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.code() << ": " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
}
