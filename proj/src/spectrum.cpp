#include "emg/spectrum.hpp"

#include <fftw3.h>

#include <cmath>
#include <map>
#include <mutex>

#include "emg/errors.hpp"
#include "emg/kernels.hpp"

namespace emg {

namespace {

// FFTW plan creation is not thread-safe; execution via the new-array API is.
// Plans are cached per transform size and made alignment-agnostic.
class RfftPlans {
 public:
  static RfftPlans& instance() {
    static RfftPlans p;
    return p;
  }

  fftw_plan get(size_t n) {
    std::lock_guard<std::mutex> lock(mu_);
    auto it = plans_.find(n);
    if (it != plans_.end()) return it->second;
    std::vector<double> in(n);
    std::vector<fftw_complex> out(n / 2 + 1);
    fftw_plan p = fftw_plan_dft_r2c_1d(static_cast<int>(n), in.data(), out.data(),
                                       FFTW_ESTIMATE | FFTW_UNALIGNED);
    plans_.emplace(n, p);
    return p;
  }

 private:
  std::mutex mu_;
  std::map<size_t, fftw_plan> plans_;
};

std::vector<double> hamming(size_t m) {
  std::vector<double> w(m);
  for (size_t i = 0; i < m; ++i)
    w[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * static_cast<double>(i) / static_cast<double>(m - 1));
  return w;
}

}  // namespace

PowerSpectrum welch_psd(std::span<const double> x, double sample_rate_hz,
                        const WelchOptions& opts) {
  if (!(opts.window_s > 0.0)) throw ConfigError("window length must be positive");
  if (!(opts.overlap_frac >= 0.0 && opts.overlap_frac < 1.0))
    throw ConfigError("overlap fraction must lie in [0, 1)");

  const size_t m = static_cast<size_t>(std::llround(opts.window_s * sample_rate_hz));
  if (m < 2) throw ConfigError("window shorter than two samples");
  if (x.size() < m) throw InsufficientDataError("segment shorter than one Welch window");

  const size_t step = std::max<size_t>(1, static_cast<size_t>(
      std::llround(static_cast<double>(m) * (1.0 - opts.overlap_frac))));
  const size_t n_bins = m / 2 + 1;
  const std::vector<double> win = hamming(m);
  const double win_power = kernels::active().sum_sq(win.data(), m);  // sum w^2

  const auto& k = kernels::active();
  fftw_plan plan = RfftPlans::instance().get(m);

  std::vector<double> buf(m);
  std::vector<fftw_complex> spec(n_bins);
  std::vector<double> acc(n_bins, 0.0);

  int n_windows = 0;
  for (size_t start = 0; start + m <= x.size(); start += step) {
    const double* seg = x.data() + start;
    const double mean = k.sum(seg, m) / static_cast<double>(m);
    k.detrend_window(seg, mean, win.data(), buf.data(), m);
    fftw_execute_dft_r2c(plan, buf.data(), spec.data());
    k.accum_power(&spec[0][0], acc.data(), n_bins);
    ++n_windows;
  }

  PowerSpectrum psd;
  psd.delta_f = sample_rate_hz / static_cast<double>(m);
  psd.n_windows = n_windows;
  psd.freqs.resize(n_bins);
  psd.density.resize(n_bins);
  const double scale = 1.0 / (sample_rate_hz * win_power * n_windows);
  for (size_t i = 0; i < n_bins; ++i) {
    psd.freqs[i] = static_cast<double>(i) * psd.delta_f;
    // one-sided: double everything except DC and (for even m) Nyquist
    const bool edge = i == 0 || (m % 2 == 0 && i == n_bins - 1);
    psd.density[i] = acc[i] * scale * (edge ? 1.0 : 2.0);
  }
  return psd;
}

}  // namespace emg
