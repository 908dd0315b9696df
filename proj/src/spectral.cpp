#include "evload/spectral.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include "json.hpp"
#include <ostream>

#include "evload/errors.hpp"
#include "evload/format.hpp"

namespace evload {

std::vector<double> hanning_window(std::size_t n) {
  if (n < 2) throw InvalidSize("window needs at least 2 points");
  std::vector<double> w(n);
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  for (std::size_t t = 0; t < n; ++t) {
    w[t] = 0.5 * (1.0 - std::cos(kTwoPi * static_cast<double>(t) /
                                 static_cast<double>(n - 1)));
  }
  return w;
}

Spectrum fft_magnitude(const std::vector<double>& signal) {
  const std::size_t n = signal.size();
  if (n < 4) throw LengthTooShort("need at least 4 samples for a spectrum");

  double mean = 0.0;
  for (double v : signal) mean += v;
  mean /= static_cast<double>(n);

  const std::vector<double> w = hanning_window(n);
  std::vector<double> x(n);
  for (std::size_t t = 0; t < n; ++t) x[t] = (signal[t] - mean) * w[t];

  // Direct transform; n stays small enough that O(n^2) with a per-bin
  // rotation recurrence is plenty fast and keeps results bit-reproducible.
  Spectrum spec;
  spec.n = n;
  const std::size_t half = n / 2;
  spec.magnitudes.resize(half);
  constexpr double kTwoPi = 6.283185307179586476925286766559;
  for (std::size_t k = 1; k <= half; ++k) {
    const double angle = -kTwoPi * static_cast<double>(k) / static_cast<double>(n);
    const std::complex<double> rot(std::cos(angle), std::sin(angle));
    std::complex<double> phase(1.0, 0.0);
    std::complex<double> acc(0.0, 0.0);
    for (std::size_t t = 0; t < n; ++t) {
      acc += x[t] * phase;
      phase *= rot;
    }
    spec.magnitudes[k - 1] = std::abs(acc);
  }
  return spec;
}

SpectrumReport dominant_periods(const Spectrum& spectrum, int top_k,
                                double max_period) {
  if (top_k < 1) throw InvalidSize("top_k must be at least 1");
  if (!(max_period > 1.0)) {
    throw InvalidSize("max_period must exceed one sample");
  }
  const auto& mag = spectrum.magnitudes;
  const std::size_t bins = mag.size();

  struct Peak {
    std::size_t k;
    double magnitude;
  };
  std::vector<Peak> peaks;
  for (std::size_t j = 0; j < bins; ++j) {
    const std::size_t k = j + 1;
    const double period = spectrum.period_of_bin(k);
    if (period > max_period || period <= 1.0) continue;
    const bool above_prev = j == 0 || mag[j] > mag[j - 1];
    const bool above_next = j + 1 == bins || mag[j] > mag[j + 1];
    if (above_prev && above_next && mag[j] > 0.0) {
      peaks.push_back({k, mag[j]});
    }
  }
  if (peaks.empty()) {
    throw NoPeaks("no dominant period found");
  }
  // Strongest first; on a tie the longer period (smaller bin) wins.
  std::sort(peaks.begin(), peaks.end(), [](const Peak& a, const Peak& b) {
    if (a.magnitude != b.magnitude) return a.magnitude > b.magnitude;
    return a.k < b.k;
  });
  SpectrumReport report;
  const std::size_t take = std::min<std::size_t>(peaks.size(), top_k);
  for (std::size_t i = 0; i < take; ++i) {
    report.periods.push_back(spectrum.period_of_bin(peaks[i].k));
    report.magnitudes.push_back(peaks[i].magnitude);
  }
  return report;
}

void write_spectrum_report_json(const SpectrumReport& report,
                                std::ostream& out) {
  nlohmann::ordered_json j;
  j["periods"] = report.periods;
  j["magnitudes"] = report.magnitudes;
  out << j.dump(2) << '\n';
}

void write_spectrum_csv(const Spectrum& spectrum, std::ostream& out) {
  out << "period,magnitude\n";
  for (std::size_t j = 0; j < spectrum.magnitudes.size(); ++j) {
    out << format_double(spectrum.period_of_bin(j + 1)) << ','
        << format_double(spectrum.magnitudes[j]) << '\n';
  }
}

}  // namespace evload
