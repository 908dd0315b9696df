#include "evload/synth.hpp"

#include <algorithm>
#include <cmath>

#include "evload/errors.hpp"
#include "evload/rng.hpp"

namespace evload {

StationSeries make_synthetic_series(const SynthConfig& config) {
  if (config.days < 1) throw InvalidConfig("need at least one day");
  if (!(config.period_days > 1.0)) {
    throw InvalidConfig("period must exceed one day");
  }
  if (config.noise < 0.0) throw InvalidConfig("noise must be non-negative");
  const Date start{std::chrono::year{config.start_year},
                   std::chrono::month{config.start_month},
                   std::chrono::day{config.start_day}};
  if (!start.ok()) throw InvalidConfig("bad start date");

  constexpr int kIntervalsPerDay = 96;
  constexpr int kActiveStart = 28;  // 07:00
  constexpr double kPi = 3.1415926535897932384626433832795;

  Rng rng(config.seed);
  StationSeries series;
  series.station_id = config.station_id;
  series.records.reserve(static_cast<std::size_t>(config.days) *
                         kIntervalsPerDay);

  const TimePoint t0{std::chrono::sys_days{start}};
  // Demand level wanders around 1 as an AR(1) walk; successive days are
  // strongly correlated but the level a week out stays genuinely uncertain.
  double level = 1.0;
  for (int day = 0; day < config.days; ++day) {
    level = 1.0 + 0.95 * (level - 1.0) + rng.gaussian(config.noise);
    level = std::clamp(level, 0.35, 1.65);
    const double cycle =
        std::sin(2.0 * kPi * static_cast<double>(day) / config.period_days);
    const double intensity = (1.0 + 0.45 * cycle) * level;
    const double occupancy = 0.55 + 0.30 * cycle;

    const double count_noise = rng.gaussian(config.noise);
    const int active = std::clamp(
        static_cast<int>(std::lround(48.0 * occupancy * (1.0 + count_noise))),
        4, 64);

    for (int slot = 0; slot < kIntervalsPerDay; ++slot) {
      RawRecord rec;
      rec.timestamp = t0 + std::chrono::minutes{
                               (day * kIntervalsPerDay + slot) * 15};
      const int offset = slot - kActiveStart;
      if (offset >= 0 && offset < active) {
        const double shape =
            0.6 + 0.4 * std::sin(kPi * (offset + 0.5) / active);
        const double wobble = 1.0 + rng.gaussian(config.noise * 0.4);
        rec.avg_kwh = std::max(0.0, intensity * shape * wobble);
        if (rec.avg_kwh > 0.0) {
          rec.peak_kwh = rec.avg_kwh * (1.2 + 0.2 * rng.uniform());
          rec.last_kwh = rec.avg_kwh * (0.4 + 0.6 * rng.uniform());
        }
      }
      series.records.push_back(rec);
    }
  }
  series.flags.assign(series.records.size(), Provenance::Measured);
  return series;
}

}  // namespace evload
