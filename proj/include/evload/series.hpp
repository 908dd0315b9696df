#pragma once

#include <chrono>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "evload/timeutil.hpp"

namespace evload {

// How a record's values came to be. Measured rows are untouched input;
// Interpolated rows were synthesized to fill timestamp gaps; Clipped rows had
// at least one out-of-bounds value replaced during anomaly filtering.
enum class Provenance : std::uint8_t { Measured, Interpolated, Clipped };

char provenance_code(Provenance p);
std::optional<Provenance> provenance_from_code(std::string_view code);

// One metering interval. After cleaning, peak_kwh >= avg_kwh >= 0 holds.
struct RawRecord {
  TimePoint timestamp{};
  double avg_kwh = 0.0;
  double peak_kwh = 0.0;
  double last_kwh = 0.0;
};

// Interval series for one station, sorted by timestamp, no duplicates.
// flags runs parallel to records.
struct StationSeries {
  static constexpr std::chrono::minutes kSamplePeriod{15};

  std::string station_id;
  std::vector<RawRecord> records;
  std::vector<Provenance> flags;

  std::size_t size() const { return records.size(); }
};

// Column names of the input CSV. Flag and station columns are read when
// present and always written, so a written series parses back losslessly.
// Rows naming a second station are reported, not mixed in.
struct CsvSchema {
  std::string timestamp = "timestamp";
  std::string avg = "avg_kwh";
  std::string peak = "peak_kwh";
  std::string last = "last_kwh";
  std::string flag = "flag";
  std::string station_id = "station";
};

struct ParseIssue {
  std::size_t line = 0;  // 1-based line in the input
  std::string message;
};

struct ParseReport {
  StationSeries series;
  std::vector<ParseIssue> skipped;
};

// Reads records. Rows with unparseable timestamps or values are reported in
// `skipped`, never silently dropped. Throws MalformedHeader if a required
// column is missing, EmptyInput if no row parses, DuplicateTimestamp on a
// repeated timestamp. Output is sorted ascending.
ParseReport parse_csv(std::istream& in, const CsvSchema& schema = {});

void write_csv(const StationSeries& series, std::ostream& out,
               const CsvSchema& schema = {});

// Fills timestamp gaps on the 15-minute grid by linear interpolation per
// channel, flagging new rows Interpolated. Gap lengths must be integer
// multiples of the sample period (MisalignedTimestamp otherwise). Idempotent.
// Throws AllMissing on an empty series.
StationSeries interpolate_missing(const StationSeries& series);

struct Bounds {
  double min_kwh = 0.0;
  double max_kwh = 0.0;
};

struct FilterResult {
  StationSeries series;
  std::size_t clipped_count = 0;  // records with at least one replaced value
};

// Replaces out-of-bounds values with a linear interpolation between the
// nearest in-bounds neighbors on the same channel (nearest single neighbor at
// the ends, bound clamp if a channel has no valid value at all) and flags the
// record Clipped. Also raises peak to avg where peak < avg so the record
// invariant holds. Total: never throws on data, only on invalid bounds.
FilterResult filter_anomalies(const StationSeries& series, const Bounds& bounds);

}  // namespace evload
