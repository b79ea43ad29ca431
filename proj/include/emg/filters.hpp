#pragma once

#include <span>
#include <vector>

namespace emg {

// One normalized biquad section (a0 == 1).
struct Biquad {
  double b0, b1, b2;
  double a1, a2;
};

// Cascade of second-order sections. All design routines fold gain into the
// numerators, so the cascade is fully described by its sections.
struct SosCascade {
  std::vector<Biquad> sections;

  // Zero-state single pass, transposed direct form II.
  void filter_inplace(std::span<double> x) const;

  // Zero-state forward-backward pass. Zero phase; magnitude is the squared
  // single-pass response. Edge transients are the caller's problem (recording
  // warm-up flags).
  void filtfilt(std::span<double> x) const;

  // |H(e^{j 2 pi f / fs})| for the single pass.
  double magnitude(double freq_hz, double sample_rate_hz) const;
};

// Butterworth bandpass from an order-n lowpass prototype (total order 2n,
// n sections). n must be even. Peak gain 1 at the geometric center.
SosCascade butter_bandpass(int prototype_order, double low_hz, double high_hz,
                           double sample_rate_hz);

// Plain Butterworth lowpass, order n (n/2 sections), DC gain 1. n even.
SosCascade butter_lowpass(int order, double cutoff_hz, double sample_rate_hz);

// Two-pole/two-zero notch, unit gain away from center, -3 dB bandwidth
// width_hz centered on center_hz.
SosCascade iir_notch(double center_hz, double width_hz, double sample_rate_hz);

// One notch per harmonic of base_hz up to max_hz (inclusive).
SosCascade notch_bank(double base_hz, double width_hz, double max_hz, double sample_rate_hz);

}  // namespace emg
