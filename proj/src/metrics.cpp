#include "evload/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "evload/errors.hpp"
#include "evload/format.hpp"

namespace evload {

MetricReport compute_metrics(const std::vector<double>& pred,
                             const std::vector<double>& target) {
  if (pred.size() != target.size()) {
    throw LengthMismatch("prediction and target lengths differ");
  }
  if (pred.empty()) throw InvalidSize("metrics over zero points");

  const auto n = static_cast<double>(pred.size());
  double mean = 0.0;
  for (double t : target) mean += t;
  mean /= n;

  double ss_res = 0.0, ss_tot = 0.0, abs_sum = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    const double e = pred[i] - target[i];
    ss_res += e * e;
    abs_sum += std::abs(e);
    const double d = target[i] - mean;
    ss_tot += d * d;
  }
  if (ss_tot == 0.0) {
    throw ZeroVariance("target is constant; r2 is undefined");
  }
  MetricReport r;
  r.n_points = pred.size();
  r.mse = ss_res / n;
  r.rmse = std::sqrt(r.mse);
  r.mae = abs_sum / n;
  r.r2 = 1.0 - ss_res / ss_tot;
  return r;
}

EvalResult evaluate_model(const Checkpoint& ckpt,
                          const std::vector<SequenceSample>& test,
                          const std::vector<FeatureColumn>& columns) {
  if (ckpt.params.layers.empty()) {
    throw MissingCheckpoint("checkpoint holds no model");
  }
  if (test.empty()) throw EmptySplit("no test samples");
  if (columns.empty()) throw InvalidSize("need at least one feature column");

  const int f = ckpt.params.dims.output_dim;
  const int steps = ckpt.params.dims.prediction_steps;
  for (FeatureColumn c : columns) {
    if (static_cast<int>(c) < 0 || static_cast<int>(c) >= f) {
      throw ShapeMismatch("selected column is outside the model output");
    }
  }

  std::vector<double> pred, target;
  pred.reserve(test.size() * steps * columns.size());
  target.reserve(pred.capacity());
  std::vector<double> step_abs(steps, 0.0);
  std::vector<std::size_t> step_count(steps, 0);

  constexpr std::size_t kChunk = 256;
  std::vector<std::size_t> idx;
  for (std::size_t base = 0; base < test.size(); base += kChunk) {
    const std::size_t end = std::min(test.size(), base + kChunk);
    idx.clear();
    for (std::size_t i = base; i < end; ++i) idx.push_back(i);
    const Batch batch = make_batch(test, idx);
    const ForwardResult out = forward(batch.x, ckpt.params);
    for (Eigen::Index row = 0; row < batch.y.rows(); ++row) {
      for (int step = 0; step < steps; ++step) {
        for (FeatureColumn c : columns) {
          const Eigen::Index flat = step * f + static_cast<int>(c);
          const double p = out.y(row, flat);
          const double t = batch.y(row, flat);
          pred.push_back(p);
          target.push_back(t);
          step_abs[step] += std::abs(p - t);
          ++step_count[step];
        }
      }
    }
  }

  EvalResult result;
  result.report = compute_metrics(pred, target);
  result.step_abs_error.resize(steps);
  for (int step = 0; step < steps; ++step) {
    result.step_abs_error[step] =
        step_abs[step] / static_cast<double>(step_count[step]);
  }
  return result;
}

void write_metrics_csv(const MetricReport& report, int horizon,
                       std::ostream& out) {
  out << "horizon,r2,mse,rmse,mae\n";
  out << horizon << ',' << format_double(report.r2) << ','
      << format_double(report.mse) << ',' << format_double(report.rmse) << ','
      << format_double(report.mae) << '\n';
}

void write_abs_error_csv(const std::vector<double>& step_abs_error,
                         std::ostream& out) {
  out << "step,abs_error\n";
  for (std::size_t i = 0; i < step_abs_error.size(); ++i) {
    out << (i + 1) << ',' << format_double(step_abs_error[i]) << '\n';
  }
}

}  // namespace evload
