#include "evload/series.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>

#include "evload/csvio.hpp"
#include "evload/errors.hpp"
#include "evload/format.hpp"

namespace evload {

char provenance_code(Provenance p) {
  switch (p) {
    case Provenance::Measured: return 'm';
    case Provenance::Interpolated: return 'i';
    case Provenance::Clipped: return 'c';
  }
  return '?';
}

std::optional<Provenance> provenance_from_code(std::string_view code) {
  if (code == "m") return Provenance::Measured;
  if (code == "i") return Provenance::Interpolated;
  if (code == "c") return Provenance::Clipped;
  return std::nullopt;
}

namespace {

std::size_t find_column(const std::vector<std::string>& header,
                        const std::string& name, bool required) {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  if (required) {
    throw MalformedHeader("required column '" + name + "' not found");
  }
  return header.size();
}

}  // namespace

ParseReport parse_csv(std::istream& in, const CsvSchema& schema) {
  CsvReader reader(in);
  std::vector<std::string> fields;
  std::size_t line = 0;

  if (!reader.next_row(fields, line)) {
    throw EmptyInput("input has no header row");
  }
  const std::size_t ts_col = find_column(fields, schema.timestamp, true);
  const std::size_t avg_col = find_column(fields, schema.avg, true);
  const std::size_t peak_col = find_column(fields, schema.peak, true);
  const std::size_t last_col = find_column(fields, schema.last, true);
  const std::size_t flag_col = find_column(fields, schema.flag, false);
  const std::size_t station_col = find_column(fields, schema.station_id, false);
  const std::size_t min_cols =
      std::max({ts_col, avg_col, peak_col, last_col}) + 1;

  ParseReport report;

  while (reader.next_row(fields, line)) {
    if (station_col < fields.size() && !fields[station_col].empty()) {
      if (report.series.station_id.empty()) {
        report.series.station_id = fields[station_col];
      } else if (fields[station_col] != report.series.station_id) {
        report.skipped.push_back(
            {line, "row belongs to station '" + fields[station_col] + "'"});
        continue;
      }
    }
    if (fields.size() < min_cols) {
      report.skipped.push_back({line, "row has too few fields"});
      continue;
    }
    const auto ts = parse_timestamp(fields[ts_col]);
    if (!ts) {
      report.skipped.push_back(
          {line, "unparseable timestamp '" + fields[ts_col] + "'"});
      continue;
    }
    const auto avg = parse_double(fields[avg_col]);
    const auto peak = parse_double(fields[peak_col]);
    const auto last = parse_double(fields[last_col]);
    if (!avg || !peak || !last) {
      report.skipped.push_back({line, "unparseable numeric value"});
      continue;
    }
    Provenance flag = Provenance::Measured;
    if (flag_col < fields.size()) {
      if (const auto parsed = provenance_from_code(fields[flag_col])) {
        flag = *parsed;
      }
    }
    report.series.records.push_back({*ts, *avg, *peak, *last});
    report.series.flags.push_back(flag);
  }

  if (report.series.records.empty()) {
    throw EmptyInput("input has no parseable data rows");
  }

  // Stable sort by timestamp; flags travel with their records.
  std::vector<std::size_t> order(report.series.records.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return report.series.records[a].timestamp <
           report.series.records[b].timestamp;
  });
  std::vector<RawRecord> sorted_records(order.size());
  std::vector<Provenance> sorted_flags(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    sorted_records[i] = report.series.records[order[i]];
    sorted_flags[i] = report.series.flags[order[i]];
  }
  for (std::size_t i = 1; i < sorted_records.size(); ++i) {
    if (sorted_records[i].timestamp == sorted_records[i - 1].timestamp) {
      throw DuplicateTimestamp("duplicate timestamp " +
                               format_timestamp(sorted_records[i].timestamp));
    }
  }
  report.series.records = std::move(sorted_records);
  report.series.flags = std::move(sorted_flags);
  return report;
}

void write_csv(const StationSeries& series, std::ostream& out,
               const CsvSchema& schema) {
  out << schema.timestamp << ',' << schema.avg << ',' << schema.peak << ','
      << schema.last << ',' << schema.flag << ',' << schema.station_id << '\n';
  for (std::size_t i = 0; i < series.records.size(); ++i) {
    const RawRecord& r = series.records[i];
    out << format_timestamp(r.timestamp) << ',' << format_double(r.avg_kwh)
        << ',' << format_double(r.peak_kwh) << ',' << format_double(r.last_kwh)
        << ',' << provenance_code(series.flags[i]) << ','
        << series.station_id << '\n';
  }
}

StationSeries interpolate_missing(const StationSeries& series) {
  if (series.records.empty()) {
    throw AllMissing("cannot interpolate an empty series");
  }
  const auto period = StationSeries::kSamplePeriod;
  StationSeries out;
  out.station_id = series.station_id;

  out.records.push_back(series.records.front());
  out.flags.push_back(series.flags.front());
  for (std::size_t i = 1; i < series.records.size(); ++i) {
    const RawRecord& prev = series.records[i - 1];
    const RawRecord& next = series.records[i];
    const auto gap = next.timestamp - prev.timestamp;
    if (gap.count() % period.count() != 0) {
      throw MisalignedTimestamp(
          "gap between " + format_timestamp(prev.timestamp) + " and " +
          format_timestamp(next.timestamp) +
          " is not a multiple of the sample period");
    }
    const long steps = gap / period;
    for (long k = 1; k < steps; ++k) {
      const double t = static_cast<double>(k) / static_cast<double>(steps);
      RawRecord filled;
      filled.timestamp = prev.timestamp + k * period;
      filled.avg_kwh = prev.avg_kwh + t * (next.avg_kwh - prev.avg_kwh);
      filled.peak_kwh = prev.peak_kwh + t * (next.peak_kwh - prev.peak_kwh);
      filled.last_kwh = prev.last_kwh + t * (next.last_kwh - prev.last_kwh);
      out.records.push_back(filled);
      out.flags.push_back(Provenance::Interpolated);
    }
    out.records.push_back(next);
    out.flags.push_back(series.flags[i]);
  }
  return out;
}

namespace {

// Replaces out-of-bounds entries of one channel in place; returns the indices
// that changed.
std::vector<char> repair_channel(std::vector<double>& values,
                                 const Bounds& bounds) {
  const std::size_t n = values.size();
  std::vector<char> changed(n, 0);
  auto valid = [&](double v) {
    return std::isfinite(v) && v >= bounds.min_kwh && v <= bounds.max_kwh;
  };

  std::vector<std::size_t> valid_idx;
  valid_idx.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (valid(values[i])) valid_idx.push_back(i);
  }
  if (valid_idx.empty()) {
    // No usable reading on this channel; clamp everything to the bounds.
    for (std::size_t i = 0; i < n; ++i) {
      const double v = std::isfinite(values[i]) ? values[i] : bounds.min_kwh;
      const double repl = std::clamp(v, bounds.min_kwh, bounds.max_kwh);
      if (repl != values[i] || !std::isfinite(values[i])) {
        values[i] = repl;
        changed[i] = 1;
      }
    }
    return changed;
  }

  std::size_t next_pos = 0;  // index into valid_idx of the next valid point
  for (std::size_t i = 0; i < n; ++i) {
    if (valid(values[i])) continue;
    while (next_pos < valid_idx.size() && valid_idx[next_pos] < i) ++next_pos;
    double repl;
    if (next_pos == 0) {
      repl = values[valid_idx.front()];
    } else if (next_pos == valid_idx.size()) {
      repl = values[valid_idx.back()];
    } else {
      const std::size_t lo = valid_idx[next_pos - 1];
      const std::size_t hi = valid_idx[next_pos];
      const double t = static_cast<double>(i - lo) / static_cast<double>(hi - lo);
      repl = values[lo] + t * (values[hi] - values[lo]);
    }
    values[i] = repl;
    changed[i] = 1;
  }
  return changed;
}

}  // namespace

FilterResult filter_anomalies(const StationSeries& series, const Bounds& bounds) {
  if (!(bounds.min_kwh >= 0.0) || !(bounds.max_kwh > bounds.min_kwh)) {
    throw InvalidConfig("anomaly bounds require 0 <= min_kwh < max_kwh");
  }
  FilterResult result;
  result.series = series;
  const std::size_t n = series.records.size();
  if (n == 0) return result;

  std::vector<double> avg(n), peak(n), last(n);
  for (std::size_t i = 0; i < n; ++i) {
    avg[i] = series.records[i].avg_kwh;
    peak[i] = series.records[i].peak_kwh;
    last[i] = series.records[i].last_kwh;
  }
  const auto avg_changed = repair_channel(avg, bounds);
  const auto peak_changed = repair_channel(peak, bounds);
  const auto last_changed = repair_channel(last, bounds);

  for (std::size_t i = 0; i < n; ++i) {
    RawRecord& r = result.series.records[i];
    r.avg_kwh = avg[i];
    r.peak_kwh = peak[i];
    r.last_kwh = last[i];
    bool touched = avg_changed[i] || peak_changed[i] || last_changed[i];
    // Interpolated replacements can land slightly below avg; restore the
    // record invariant.
    if (r.peak_kwh < r.avg_kwh) {
      r.peak_kwh = r.avg_kwh;
      touched = true;
    }
    if (touched) {
      result.series.flags[i] = Provenance::Clipped;
      ++result.clipped_count;
    }
  }
  return result;
}

}  // namespace evload
