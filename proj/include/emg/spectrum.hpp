#pragma once

#include <span>
#include <vector>

namespace emg {

// One-sided power spectral density on a uniform grid 0..fs/2.
struct PowerSpectrum {
  std::vector<double> freqs;    // Hz, ascending, freqs[k] = k * delta_f
  std::vector<double> density;  // V^2/Hz, >= 0
  double delta_f = 0.0;         // Hz
  int n_windows = 0;
};

struct WelchOptions {
  double window_s = 0.2;       // Hamming window length (200 ms -> 5 Hz bins at 2 kHz)
  double overlap_frac = 0.5;   // final partial window dropped
};

// Welch's averaged periodogram: per-window mean removal, Hamming taper,
// window-power-corrected scaling so that sum(S) * delta_f approximates the
// mean square of the segment.
PowerSpectrum welch_psd(std::span<const double> x, double sample_rate_hz,
                        const WelchOptions& opts = {});

}  // namespace emg
