#include "evload/features.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include "json.hpp"
#include <ostream>

#include "evload/csvio.hpp"
#include "evload/errors.hpp"
#include "evload/format.hpp"

namespace evload {

std::vector<DailyAggregate> aggregate_daily(const StationSeries& series) {
  if (series.records.empty()) {
    throw EmptySeries("cannot aggregate an empty series");
  }
  std::vector<DailyAggregate> days;
  for (const RawRecord& r : series.records) {
    const Date day = date_of(r.timestamp);
    if (days.empty() || days.back().day != day) {
      days.push_back({day, 0, 0.0, 0.0, 0});
    }
    DailyAggregate& agg = days.back();
    if (r.avg_kwh > 0.0) ++agg.nc;
    agg.da += r.avg_kwh;  // running sum until the final division
    agg.dm = std::max(agg.dm, r.avg_kwh);
    ++agg.intervals;
  }
  for (DailyAggregate& agg : days) {
    agg.da /= static_cast<double>(agg.intervals);
  }
  return days;
}

NormalizedDaily normalize_daily(const std::vector<DailyAggregate>& aggregates) {
  NormalizedDaily out;
  const std::size_t n = aggregates.size();
  out.nnc.resize(n);
  out.na.resize(n);
  out.nm.resize(n);
  for (const DailyAggregate& a : aggregates) {
    out.maxima.max_nc = std::max(out.maxima.max_nc, static_cast<double>(a.nc));
    out.maxima.max_da = std::max(out.maxima.max_da, a.da);
    out.maxima.max_dm = std::max(out.maxima.max_dm, a.dm);
  }
  auto scale = [&](double maximum, const char* name, auto getter,
                   std::vector<double>& dst) {
    if (maximum <= 0.0) {
      // All-zero channel: leave it at zero rather than divide by zero.
      out.warnings.push_back(std::string("channel ") + name +
                             " is identically zero; left unnormalized");
      std::fill(dst.begin(), dst.end(), 0.0);
      return;
    }
    for (std::size_t i = 0; i < aggregates.size(); ++i) {
      dst[i] = getter(aggregates[i]) / maximum;
    }
  };
  scale(out.maxima.max_nc, "nc",
        [](const DailyAggregate& a) { return static_cast<double>(a.nc); },
        out.nnc);
  scale(out.maxima.max_da, "da", [](const DailyAggregate& a) { return a.da; },
        out.na);
  scale(out.maxima.max_dm, "dm", [](const DailyAggregate& a) { return a.dm; },
        out.nm);
  return out;
}

namespace {

// Central differences inside, one-sided at the ends, unit step.
std::vector<double> discrete_derivative(const std::vector<double>& y) {
  const std::size_t n = y.size();
  std::vector<double> d(n, 0.0);
  if (n < 2) return d;
  d[0] = y[1] - y[0];
  d[n - 1] = y[n - 1] - y[n - 2];
  for (std::size_t i = 1; i + 1 < n; ++i) {
    d[i] = (y[i + 1] - y[i - 1]) / 2.0;
  }
  return d;
}

}  // namespace

CorrelationSignals correlation_signals(const std::vector<double>& nnc,
                                       const std::vector<double>& na,
                                       const std::vector<double>& nm) {
  if (nnc.size() != na.size() || nnc.size() != nm.size()) {
    throw LengthMismatch("normalized channels must have equal length");
  }
  CorrelationSignals out;
  const std::size_t n = nnc.size();
  out.crr.resize(n);
  out.crrm.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.crr[i] = nnc[i] * na[i];
    out.crrm[i] = nnc[i] * nm[i];
  }
  out.crrd = discrete_derivative(out.crr);
  out.crrmd = discrete_derivative(out.crrm);
  return out;
}

namespace {

double guarded_ratio(double num, double den, double epsilon) {
  const double cap = 1.0 / epsilon;
  if (den <= epsilon) {
    return num == 0.0 ? 0.0 : cap;
  }
  return std::clamp(num / den, 0.0, cap);
}

}  // namespace

RatioSignals ratio_signals(const std::vector<double>& nnc,
                           const std::vector<double>& na,
                           const std::vector<double>& nm, double epsilon) {
  if (nnc.size() != na.size() || nnc.size() != nm.size()) {
    throw LengthMismatch("normalized channels must have equal length");
  }
  if (!(epsilon > 0.0)) {
    throw InvalidConfig("ratio epsilon must be positive");
  }
  RatioSignals out;
  const std::size_t n = nnc.size();
  out.r.resize(n);
  out.rm.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    out.r[i] = guarded_ratio(nnc[i], na[i], epsilon);
    out.rm[i] = guarded_ratio(nnc[i], nm[i], epsilon);
  }
  return out;
}

std::vector<double> rolling_average(const std::vector<double>& column,
                                    int window) {
  if (window < 1) throw InvalidSize("rolling window must be at least 1");
  if (static_cast<std::size_t>(window) > column.size()) {
    throw WindowTooLarge("rolling window " + std::to_string(window) +
                         " exceeds column length " +
                         std::to_string(column.size()));
  }
  std::vector<double> out(column.size());
  for (std::size_t i = 0; i < column.size(); ++i) {
    const std::size_t lo = i + 1 >= static_cast<std::size_t>(window)
                               ? i + 1 - static_cast<std::size_t>(window)
                               : 0;
    double sum = 0.0;
    for (std::size_t j = lo; j <= i; ++j) sum += column[j];
    out[i] = sum / static_cast<double>(i - lo + 1);
  }
  return out;
}

const char* feature_name(FeatureColumn c) {
  switch (c) {
    case FeatureColumn::Nnc: return "nnc";
    case FeatureColumn::Na: return "na";
    case FeatureColumn::Nm: return "nm";
    case FeatureColumn::Crr: return "crr";
    case FeatureColumn::CrrM: return "crrm";
    case FeatureColumn::CrrD: return "crrd";
    case FeatureColumn::CrrMD: return "crrmd";
    case FeatureColumn::R: return "r";
    case FeatureColumn::Rm: return "rm";
  }
  return "?";
}

std::optional<FeatureColumn> feature_from_name(std::string_view name) {
  for (int i = 0; i < kFeatureCount; ++i) {
    const auto c = static_cast<FeatureColumn>(i);
    if (name == feature_name(c)) return c;
  }
  return std::nullopt;
}

double denormalize_value(FeatureColumn c, double v,
                         const NormalizationMaxima& maxima) {
  switch (c) {
    case FeatureColumn::Nnc: return v * maxima.max_nc;
    case FeatureColumn::Na: return v * maxima.max_da;
    case FeatureColumn::Nm: return v * maxima.max_dm;
    default: return v;
  }
}

const std::vector<double>& FeatureMatrix::column(FeatureColumn c) const {
  switch (c) {
    case FeatureColumn::Nnc: return nnc;
    case FeatureColumn::Na: return na;
    case FeatureColumn::Nm: return nm;
    case FeatureColumn::Crr: return crr;
    case FeatureColumn::CrrM: return crrm;
    case FeatureColumn::CrrD: return crrd;
    case FeatureColumn::CrrMD: return crrmd;
    case FeatureColumn::R: return r;
    case FeatureColumn::Rm: return rm;
  }
  return nnc;
}

std::vector<double>& FeatureMatrix::column(FeatureColumn c) {
  return const_cast<std::vector<double>&>(
      static_cast<const FeatureMatrix&>(*this).column(c));
}

Eigen::MatrixXd FeatureMatrix::to_matrix() const {
  const auto n = static_cast<Eigen::Index>(rows());
  Eigen::MatrixXd m(n, cols());
  for (int c = 0; c < kFeatureCount; ++c) {
    const auto& col = column(static_cast<FeatureColumn>(c));
    for (Eigen::Index i = 0; i < n; ++i) m(i, c) = col[i];
  }
  if (raw_da) {
    for (Eigen::Index i = 0; i < n; ++i) m(i, kFeatureCount) = (*raw_da)[i];
  }
  return m;
}

FeatureMatrix build_feature_matrix(
    const std::vector<DailyAggregate>& aggregates, const FeatureOptions& opts) {
  if (aggregates.empty()) {
    throw EmptySeries("cannot build features from zero days");
  }
  FeatureMatrix m;
  m.days.reserve(aggregates.size());
  for (const DailyAggregate& a : aggregates) m.days.push_back(a.day);

  NormalizedDaily norm = normalize_daily(aggregates);
  CorrelationSignals corr = correlation_signals(norm.nnc, norm.na, norm.nm);
  RatioSignals ratio = ratio_signals(norm.nnc, norm.na, norm.nm, opts.epsilon);

  m.nnc = std::move(norm.nnc);
  m.na = std::move(norm.na);
  m.nm = std::move(norm.nm);
  m.crr = std::move(corr.crr);
  m.crrm = std::move(corr.crrm);
  m.crrd = std::move(corr.crrd);
  m.crrmd = std::move(corr.crrmd);
  m.r = std::move(ratio.r);
  m.rm = std::move(ratio.rm);
  m.maxima = norm.maxima;
  m.warnings = std::move(norm.warnings);
  if (opts.include_raw_da) {
    std::vector<double> raw;
    raw.reserve(aggregates.size());
    for (const DailyAggregate& a : aggregates) raw.push_back(a.da);
    m.raw_da = std::move(raw);
  }
  return m;
}

FeatureMatrix build_feature_matrix(const StationSeries& series,
                                   const FeatureOptions& opts) {
  return build_feature_matrix(aggregate_daily(series), opts);
}

namespace {

// File column order. It differs from FeatureColumn order (crrd before crrm).
constexpr FeatureColumn kCsvOrder[] = {
    FeatureColumn::Nnc,  FeatureColumn::Na, FeatureColumn::Nm,
    FeatureColumn::Crr,  FeatureColumn::CrrD, FeatureColumn::CrrM,
    FeatureColumn::CrrMD, FeatureColumn::R,  FeatureColumn::Rm,
};

}  // namespace

void write_feature_csv(const FeatureMatrix& m, std::ostream& out) {
  out << "date";
  for (FeatureColumn c : kCsvOrder) out << ',' << feature_name(c);
  if (m.raw_da) out << ",da";
  out << '\n';
  for (std::size_t i = 0; i < m.rows(); ++i) {
    out << format_date(m.days[i]);
    for (FeatureColumn c : kCsvOrder) {
      out << ',' << format_double(m.column(c)[i]);
    }
    if (m.raw_da) out << ',' << format_double((*m.raw_da)[i]);
    out << '\n';
  }
}

FeatureMatrix read_feature_csv(std::istream& in) {
  CsvReader reader(in);
  std::vector<std::string> fields;
  std::size_t line = 0;
  if (!reader.next_row(fields, line)) {
    throw EmptyInput("feature file has no header row");
  }
  if (fields.empty() || fields[0] != "date") {
    throw MalformedHeader("feature file must start with a 'date' column");
  }
  std::vector<FeatureColumn> order;
  bool has_raw = false;
  for (std::size_t i = 1; i < fields.size(); ++i) {
    if (fields[i] == "da" && i + 1 == fields.size()) {
      has_raw = true;
      break;
    }
    const auto col = feature_from_name(fields[i]);
    if (!col) {
      throw MalformedHeader("unknown feature column '" + fields[i] + "'");
    }
    order.push_back(*col);
  }
  if (order.size() != static_cast<std::size_t>(kFeatureCount)) {
    throw MalformedHeader("feature file must contain all feature columns");
  }

  FeatureMatrix m;
  if (has_raw) m.raw_da.emplace();
  const std::size_t expected = 1 + order.size() + (has_raw ? 1 : 0);
  while (reader.next_row(fields, line)) {
    if (fields.size() != expected) {
      throw MalformedHeader("feature row at line " + std::to_string(line) +
                            " has " + std::to_string(fields.size()) +
                            " fields, expected " + std::to_string(expected));
    }
    const auto day = parse_date(fields[0]);
    if (!day) {
      throw MalformedHeader("bad date at line " + std::to_string(line));
    }
    m.days.push_back(*day);
    for (std::size_t i = 0; i < order.size(); ++i) {
      const auto v = parse_double(fields[1 + i]);
      if (!v) {
        throw MalformedHeader("bad value at line " + std::to_string(line));
      }
      m.column(order[i]).push_back(*v);
    }
    if (has_raw) {
      const auto v = parse_double(fields.back());
      if (!v) {
        throw MalformedHeader("bad value at line " + std::to_string(line));
      }
      m.raw_da->push_back(*v);
    }
  }
  if (m.days.empty()) {
    throw EmptyInput("feature file has no data rows");
  }
  return m;
}

void write_feature_meta_json(const FeatureMatrix& m, std::ostream& out) {
  nlohmann::ordered_json j;
  j["format"] = "evload_features";
  j["version"] = 1;
  j["rows"] = m.rows();
  j["normalization_maxima"] = {{"max_nc", m.maxima.max_nc},
                               {"max_da", m.maxima.max_da},
                               {"max_dm", m.maxima.max_dm}};
  j["warnings"] = m.warnings;
  out << j.dump(2) << '\n';
}

void read_feature_meta_json(std::istream& in, FeatureMatrix& m) {
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedHeader(std::string("bad feature metadata: ") + e.what());
  }
  if (!j.contains("normalization_maxima")) {
    throw MalformedHeader("feature metadata lacks normalization_maxima");
  }
  const auto& nm = j["normalization_maxima"];
  m.maxima.max_nc = nm.at("max_nc").get<double>();
  m.maxima.max_da = nm.at("max_da").get<double>();
  m.maxima.max_dm = nm.at("max_dm").get<double>();
  if (j.contains("warnings")) {
    m.warnings = j["warnings"].get<std::vector<std::string>>();
  }
}

}  // namespace evload
