#pragma once

#include <cstdint>
#include <string>

#include "evload/series.hpp"

namespace evload {

// Settings for the seeded synthetic charging fixture: a weekly sinusoid
// drives both how many intervals see charging each day and how intense the
// charging is. A slowly wandering demand level (weather, campus events)
// multiplies the per-interval energy, and Gaussian disturbances sit on top;
// `noise` scales all of it.
struct SynthConfig {
  std::uint64_t seed = 42;
  int days = 365;
  double period_days = 7.0;
  double noise = 0.05;  // relative day-level and interval-level disturbance
  std::string station_id = "synthetic";
  int start_year = 2023;
  unsigned start_month = 1;
  unsigned start_day = 1;
};

// 96 intervals per day, a contiguous active window starting mid-morning, a
// half-sine intensity profile across the window, zero demand outside it.
// peak >= avg >= 0 holds everywhere.
StationSeries make_synthetic_series(const SynthConfig& config);

}  // namespace evload
