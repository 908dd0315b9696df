#include <cmath>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "evload/errors.hpp"
#include "evload/spectral.hpp"

using namespace evload;

namespace {
constexpr double kPi = 3.141592653589793238462643383279;
}

TEST_CASE("hanning window endpoints and symmetry") {
  const std::vector<double> w = hanning_window(4);
  REQUIRE(w.size() == 4);
  CHECK(w[0] == 0.0);
  CHECK(w[1] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(w[2] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(w[3] == doctest::Approx(0.0).epsilon(1e-15));

  const std::vector<double> w9 = hanning_window(9);
  CHECK(w9[4] == doctest::Approx(1.0).epsilon(1e-15));  // odd length peaks at 1
  for (std::size_t i = 0; i < w9.size(); ++i) {
    CHECK(w9[i] == doctest::Approx(w9[8 - i]).epsilon(1e-12));
  }
}

TEST_CASE("transform magnitudes match an external reference") {
  // sin(2*pi*t/8) + 0.5 over 32 samples, mean removed and tapered; the
  // reference magnitudes were computed with an FFT library.
  std::vector<double> sig(32);
  for (std::size_t t = 0; t < sig.size(); ++t) {
    sig[t] = std::sin(2.0 * kPi * static_cast<double>(t) / 8.0) + 0.5;
  }
  const Spectrum s = fft_magnitude(sig);
  REQUIRE(s.n == 32);
  REQUIRE(s.bins() == 16);
  const struct {
    std::size_t k;
    double mag;
  } expected[] = {
      {1, 0.02663381131994983}, {2, 0.08529927140992195},
      {3, 4.060536819443222},   {4, 7.747388210548265},
      {5, 4.05892418053263},    {16, 0.0021454705033809914},
  };
  for (const auto& e : expected) {
    CHECK(s.magnitudes[e.k - 1] == doctest::Approx(e.mag).epsilon(1e-9));
  }
  CHECK(s.period_of_bin(4) == 8.0);
}

TEST_CASE("a constant signal has no spectral content") {
  const Spectrum s = fft_magnitude(std::vector<double>(64, 3.7));
  for (double m : s.magnitudes) CHECK(m < 1e-12);
}

TEST_CASE("magnitudes scale linearly with the signal") {
  std::vector<double> sig(40), twice(40);
  for (std::size_t t = 0; t < sig.size(); ++t) {
    sig[t] = std::sin(2.0 * kPi * static_cast<double>(t) / 10.0);
    twice[t] = 2.0 * sig[t];
  }
  const Spectrum a = fft_magnitude(sig);
  const Spectrum b = fft_magnitude(twice);
  for (std::size_t i = 0; i < a.bins(); ++i) {
    CHECK(b.magnitudes[i] == doctest::Approx(2.0 * a.magnitudes[i])
                                 .epsilon(1e-12));
  }
}

TEST_CASE("input length checks") {
  CHECK_THROWS_AS(fft_magnitude({1.0, 2.0, 3.0}), LengthTooShort);
}

TEST_CASE("dominant period selection") {
  // Hand-built spectrum for n = 60: local maxima at bins 3 (period 20),
  // 8 (period 7.5) and 25 (period 2.4).
  Spectrum s;
  s.n = 60;
  s.magnitudes.assign(30, 0.1);
  s.magnitudes[2] = 5.0;   // bin 3
  s.magnitudes[7] = 9.0;   // bin 8
  s.magnitudes[24] = 3.0;  // bin 25

  const SpectrumReport top2 = dominant_periods(s, 2, 30.0);
  REQUIRE(top2.periods.size() == 2);
  CHECK(top2.periods[0] == 7.5);
  CHECK(top2.periods[1] == 20.0);
  CHECK(top2.magnitudes[0] == 9.0);

  SUBCASE("max_period filters long cycles") {
    const SpectrumReport r = dominant_periods(s, 3, 10.0);
    CHECK(r.periods == std::vector<double>{7.5, 2.4});
  }

  SUBCASE("a peak in the last bin is found with a one-sided test") {
    Spectrum s2;
    s2.n = 8;
    s2.magnitudes = {0.1, 0.1, 0.1, 5.0};  // bin 4, period exactly 2
    const SpectrumReport r = dominant_periods(s2, 3, 30.0);
    CHECK(r.periods == std::vector<double>{2.0});
  }

  SUBCASE("ties prefer the longer period") {
    Spectrum s3;
    s3.n = 24;
    s3.magnitudes.assign(12, 0.0);
    s3.magnitudes[1] = 4.0;  // bin 2, period 12
    s3.magnitudes[5] = 4.0;  // bin 6, period 4
    const SpectrumReport r = dominant_periods(s3, 2, 30.0);
    CHECK(r.periods == std::vector<double>{12.0, 4.0});
  }

  SUBCASE("no qualifying peak throws") {
    Spectrum flat;
    flat.n = 16;
    flat.magnitudes.assign(8, 0.0);
    CHECK_THROWS_AS(dominant_periods(flat, 2, 30.0), NoPeaks);
  }
}

TEST_CASE("spectrum serialization") {
  Spectrum s;
  s.n = 8;
  s.magnitudes = {1.5, 0.25, 0.125, 0.0625};
  std::ostringstream csv;
  write_spectrum_csv(s, csv);
  CHECK(csv.str() ==
        "period,magnitude\n8,1.5\n4,0.25\n2.6666666666666665,0.125\n2,0.0625\n");

  SpectrumReport report;
  report.periods = {8.0, 4.0};
  report.magnitudes = {1.5, 0.25};
  std::ostringstream js;
  write_spectrum_report_json(report, js);
  CHECK(js.str().find("\"periods\"") != std::string::npos);
  CHECK(js.str().find("8.0") != std::string::npos);
}
