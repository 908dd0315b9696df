#pragma once

#include <cstddef>
#include <iosfwd>
#include <vector>

namespace evload {

// Raised-cosine taper: w(t) = 0.5 * (1 - cos(2*pi*t / (n - 1))), n >= 2.
std::vector<double> hanning_window(std::size_t n);

// Magnitudes of the positive-frequency bins of a tapered, mean-removed
// signal. Bin k (1-based, k = 1 .. n/2) corresponds to a period of n/k
// samples.
struct Spectrum {
  std::size_t n = 0;               // input length
  std::vector<double> magnitudes;  // magnitudes[j] is bin k = j + 1

  std::size_t bins() const { return magnitudes.size(); }
  double period_of_bin(std::size_t k) const {
    return static_cast<double>(n) / static_cast<double>(k);
  }
};

// Removes the mean, applies the taper, then evaluates the transform
// directly. Input length must be at least 4 (LengthTooShort).
Spectrum fft_magnitude(const std::vector<double>& signal);

// Dominant cycle lengths: strict local maxima of the magnitude over bins,
// restricted to periods within (1, max_period] samples, strongest first,
// ties broken toward the longer period. Throws NoPeaks when nothing
// qualifies.
struct SpectrumReport {
  std::vector<double> periods;
  std::vector<double> magnitudes;
};

SpectrumReport dominant_periods(const Spectrum& spectrum, int top_k = 3,
                                double max_period = 30.0);

// {"periods": [...], "magnitudes": [...]}
void write_spectrum_report_json(const SpectrumReport& report, std::ostream& out);

// period,magnitude rows for every bin.
void write_spectrum_csv(const Spectrum& spectrum, std::ostream& out);

}  // namespace evload
