#pragma once

#include <Eigen/Core>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "evload/series.hpp"
#include "evload/timeutil.hpp"

namespace evload {

// Per-day summary of the average-power channel. nc counts intervals with a
// strictly positive reading, da is the day mean, dm the day maximum.
struct DailyAggregate {
  Date day{};
  int nc = 0;
  double da = 0.0;
  double dm = 0.0;
  int intervals = 0;  // readings that day (trailing partial days allowed)
};

// Groups by calendar day. Throws EmptySeries on empty input.
std::vector<DailyAggregate> aggregate_daily(const StationSeries& series);

// Channel maxima used for normalization; kept so predictions can be mapped
// back to physical units.
struct NormalizationMaxima {
  double max_nc = 0.0;
  double max_da = 0.0;
  double max_dm = 0.0;
};

struct NormalizedDaily {
  std::vector<double> nnc, na, nm;
  NormalizationMaxima maxima;
  std::vector<std::string> warnings;  // degenerate all-zero channels
};

// Divides each channel by its maximum over the span. An all-zero channel
// stays zero and is recorded in warnings instead of dividing by zero.
NormalizedDaily normalize_daily(const std::vector<DailyAggregate>& aggregates);

struct CorrelationSignals {
  std::vector<double> crr, crrm;    // products nnc*na and nnc*nm
  std::vector<double> crrd, crrmd;  // their discrete time derivatives
};

// Derivatives use central differences in the interior and one-sided
// differences at the endpoints, with a one-day step. Inputs must have equal
// length (LengthMismatch).
CorrelationSignals correlation_signals(const std::vector<double>& nnc,
                                       const std::vector<double>& na,
                                       const std::vector<double>& nm);

struct RatioSignals {
  std::vector<double> r, rm;  // nnc/na and nnc/nm, guarded
};

// Guarded division: a denominator at or below epsilon yields 0 when the
// numerator is 0 and the cap 1/epsilon otherwise; finite quotients are
// clamped to [0, 1/epsilon].
RatioSignals ratio_signals(const std::vector<double>& nnc,
                           const std::vector<double>& na,
                           const std::vector<double>& nm,
                           double epsilon = 1e-6);

// Trailing mean over up to `window` samples; shorter prefixes average what is
// available. Throws WindowTooLarge if window exceeds the length, InvalidSize
// if window < 1.
std::vector<double> rolling_average(const std::vector<double>& column,
                                    int window);

// Column order of the assembled matrix.
enum class FeatureColumn : int {
  Nnc = 0,
  Na,
  Nm,
  Crr,
  CrrM,
  CrrD,
  CrrMD,
  R,
  Rm,
};

inline constexpr int kFeatureCount = 9;

const char* feature_name(FeatureColumn c);
std::optional<FeatureColumn> feature_from_name(std::string_view name);

// Maps a normalized value back to physical units. Only the three
// max-normalized channels rescale; every other column passes through.
double denormalize_value(FeatureColumn c, double v,
                         const NormalizationMaxima& maxima);

// Daily feature table: one row per day, kFeatureCount columns, plus an
// optional unnormalized daily-average column.
struct FeatureMatrix {
  std::vector<Date> days;
  std::vector<double> nnc, na, nm, crr, crrm, crrd, crrmd, r, rm;
  std::optional<std::vector<double>> raw_da;
  NormalizationMaxima maxima;
  std::vector<std::string> warnings;

  std::size_t rows() const { return days.size(); }
  int cols() const { return kFeatureCount + (raw_da ? 1 : 0); }

  const std::vector<double>& column(FeatureColumn c) const;
  std::vector<double>& column(FeatureColumn c);

  // rows() x cols() dense copy in FeatureColumn order, raw da last if present.
  Eigen::MatrixXd to_matrix() const;
};

struct FeatureOptions {
  double epsilon = 1e-6;
  bool include_raw_da = false;
};

FeatureMatrix build_feature_matrix(const StationSeries& series,
                                   const FeatureOptions& opts = {});
FeatureMatrix build_feature_matrix(const std::vector<DailyAggregate>& aggregates,
                                   const FeatureOptions& opts = {});

// CSV columns: date,nnc,na,nm,crr,crrd,crrm,crrmd,r,rm[,da]. Values are
// written with round-trip precision; normalization maxima and warnings live
// in a JSON sidecar.
void write_feature_csv(const FeatureMatrix& m, std::ostream& out);
FeatureMatrix read_feature_csv(std::istream& in);
void write_feature_meta_json(const FeatureMatrix& m, std::ostream& out);
void read_feature_meta_json(std::istream& in, FeatureMatrix& m);

}  // namespace evload
