#pragma once

#include <iosfwd>
#include <vector>

#include "evload/features.hpp"
#include "evload/train.hpp"

namespace evload {

struct MetricReport {
  double mse = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  double r2 = 0.0;
  std::size_t n_points = 0;
};

// Pointwise regression metrics; r2 is 1 - SSres/SStot with SStot taken about
// the target mean. Throws LengthMismatch on unequal lengths, InvalidSize on
// empty input, ZeroVariance when the target is constant.
MetricReport compute_metrics(const std::vector<double>& pred,
                             const std::vector<double>& target);

struct EvalResult {
  MetricReport report;               // pooled over every kept column and step
  std::vector<double> step_abs_error;  // mean absolute error per forecast step
};

// Runs the model over the test samples and pools predictions across the
// selected feature columns. Metrics are computed in normalized units.
EvalResult evaluate_model(const Checkpoint& ckpt,
                          const std::vector<SequenceSample>& test,
                          const std::vector<FeatureColumn>& columns = {
                              FeatureColumn::Na});

// horizon,r2,mse,rmse,mae (one row)
void write_metrics_csv(const MetricReport& report, int horizon,
                       std::ostream& out);

// step,abs_error with 1-based steps
void write_abs_error_csv(const std::vector<double>& step_abs_error,
                         std::ostream& out);

}  // namespace evload
