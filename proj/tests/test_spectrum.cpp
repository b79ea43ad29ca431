#include <doctest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "emg/errors.hpp"
#include "emg/rng.hpp"
#include "emg/spectrum.hpp"

using namespace emg;

namespace {

constexpr double kFs = 2000.0;

std::vector<double> sine(double freq_hz, size_t n, double amp = 1.0, double phase = 0.0) {
  std::vector<double> x(n);
  for (size_t i = 0; i < n; ++i)
    x[i] = amp * std::sin(2.0 * M_PI * freq_hz * static_cast<double>(i) / kFs + phase);
  return x;
}

double spectrum_power(const PowerSpectrum& psd) {
  return std::accumulate(psd.density.begin(), psd.density.end(), 0.0) * psd.delta_f;
}

double mean_square(const std::vector<double>& x) {
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return acc / static_cast<double>(x.size());
}

}  // namespace

TEST_CASE("the default grid has 5 Hz bins up to Nyquist") {
  const auto x = sine(100.0, 4000);
  const PowerSpectrum psd = welch_psd(x, kFs);
  CHECK(psd.delta_f == doctest::Approx(5.0));
  REQUIRE(psd.freqs.size() == 201);  // 400-sample window -> 201 one-sided bins
  CHECK(psd.freqs.front() == 0.0);
  CHECK(psd.freqs.back() == doctest::Approx(1000.0));
  CHECK(psd.freqs[20] == doctest::Approx(100.0));
}

TEST_CASE("window count follows the 50 percent overlap rule") {
  // hop = 200 samples; windows start while start + 400 <= n
  CHECK(welch_psd(sine(50.0, 400), kFs).n_windows == 1);
  CHECK(welch_psd(sine(50.0, 599), kFs).n_windows == 1);  // partial tail dropped
  CHECK(welch_psd(sine(50.0, 600), kFs).n_windows == 2);
  CHECK(welch_psd(sine(50.0, 4000), kFs).n_windows == 19);
}

TEST_CASE("a bin-centered tone concentrates its power in that bin") {
  const double amp = 3.2e-3;
  const auto x = sine(100.0, 4000, amp);
  const PowerSpectrum psd = welch_psd(x, kFs);

  size_t arg = 0;
  for (size_t i = 1; i < psd.density.size(); ++i)
    if (psd.density[i] > psd.density[arg]) arg = i;
  CHECK(psd.freqs[arg] == doctest::Approx(100.0));

  // Parseval: total spectral power matches the mean square (tone power A^2/2)
  const double p = spectrum_power(psd);
  CHECK(p == doctest::Approx(amp * amp / 2.0).epsilon(0.05));
  CHECK(p == doctest::Approx(mean_square(x)).epsilon(0.05));
}

TEST_CASE("Parseval holds for band-limited noise") {
  Rng rng(401);
  std::vector<double> x(8000);
  // sum of many random mid-band tones = stationary band-limited signal
  for (int t = 0; t < 40; ++t) {
    const double f = rng.uniform(30.0, 400.0);
    const double ph = rng.uniform(0.0, 2.0 * M_PI);
    const auto tone = sine(f, x.size(), 0.1, ph);
    for (size_t i = 0; i < x.size(); ++i) x[i] += tone[i];
  }
  const PowerSpectrum psd = welch_psd(x, kFs);
  CHECK(spectrum_power(psd) == doctest::Approx(mean_square(x)).epsilon(0.05));
}

TEST_CASE("density scales with the square of the amplitude") {
  const auto x1 = sine(235.0, 4000, 1.0);
  const auto x2 = sine(235.0, 4000, 2.0);
  const PowerSpectrum p1 = welch_psd(x1, kFs);
  const PowerSpectrum p2 = welch_psd(x2, kFs);
  const size_t k = 47;  // 235 Hz bin
  CHECK(p2.density[k] == doctest::Approx(4.0 * p1.density[k]).epsilon(1e-9));
}

TEST_CASE("per-window mean removal zeroes the DC bin") {
  std::vector<double> x = sine(100.0, 4000, 1.0);
  for (auto& v : x) v += 5.0;  // large offset
  const PowerSpectrum psd = welch_psd(x, kFs);
  // residual DC is window-sidelobe leakage of the tone, orders of magnitude
  // below both the tone bin and the unremoved offset
  CHECK(psd.density[0] < 1e-5 * psd.density[20]);
  const PowerSpectrum ref = welch_psd(sine(100.0, 4000, 1.0), kFs);
  CHECK(psd.density[20] == doctest::Approx(ref.density[20]).epsilon(1e-9));
}

TEST_CASE("spectra are nonnegative and deterministic") {
  Rng rng(77);
  std::vector<double> x(3000);
  for (auto& v : x) v = rng.gaussian();
  const PowerSpectrum a = welch_psd(x, kFs);
  const PowerSpectrum b = welch_psd(x, kFs);
  for (size_t i = 0; i < a.density.size(); ++i) {
    CHECK(a.density[i] >= 0.0);
    CHECK(a.density[i] == b.density[i]);
  }
}

TEST_CASE("welch options are validated") {
  const auto x = sine(100.0, 4000);
  WelchOptions bad;
  bad.window_s = 0.0;
  CHECK_THROWS_AS(welch_psd(x, kFs, bad), ConfigError);
  bad = {};
  bad.overlap_frac = 1.0;
  CHECK_THROWS_AS(welch_psd(x, kFs, bad), ConfigError);
  CHECK_THROWS_AS(welch_psd(sine(100.0, 399), kFs), InsufficientDataError);
}
