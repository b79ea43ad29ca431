#include "emg/filters.hpp"

#include <algorithm>
#include <cmath>
#include <complex>

#include "emg/errors.hpp"

namespace emg {

namespace {

using cplx = std::complex<double>;

// Bilinear map of one analog pole/zero, fs2 = 2 * sample rate.
cplx bilinear(cplx s, double fs2) { return (fs2 + s) / (fs2 - s); }

// Denominator coefficients from a digital conjugate pole pair.
Biquad pole_pair_section(cplx z) {
  Biquad s{1.0, 0.0, 0.0, 0.0, 0.0};
  s.a1 = -2.0 * z.real();
  s.a2 = std::norm(z);
  return s;
}

double prewarp(double freq_hz, double fs) {
  return 2.0 * fs * std::tan(M_PI * freq_hz / fs);
}

cplx section_response(const Biquad& s, cplx e1, cplx e2) {
  return (s.b0 + s.b1 * e1 + s.b2 * e2) / (1.0 + s.a1 * e1 + s.a2 * e2);
}

double cascade_magnitude(const std::vector<Biquad>& sections, double w) {
  const cplx e1 = std::exp(cplx(0.0, -w));
  const cplx e2 = e1 * e1;
  cplx h(1.0, 0.0);
  for (const auto& s : sections) h *= section_response(s, e1, e2);
  return std::abs(h);
}

// Butterworth prototype poles in the upper half plane, unit cutoff.
std::vector<cplx> butter_uhp_poles(int order) {
  std::vector<cplx> poles;
  for (int k = 0; k < order; ++k) {
    const double theta = M_PI * (2.0 * k + order + 1.0) / (2.0 * order);
    cplx p(std::cos(theta), std::sin(theta));
    if (p.imag() > 1e-12) poles.push_back(p);
  }
  return poles;
}

}  // namespace

void SosCascade::filter_inplace(std::span<double> x) const {
  for (const auto& s : sections) {
    double s1 = 0.0, s2 = 0.0;
    for (double& v : x) {
      const double y = s.b0 * v + s1;
      s1 = s.b1 * v - s.a1 * y + s2;
      s2 = s.b2 * v - s.a2 * y;
      v = y;
    }
  }
}

void SosCascade::filtfilt(std::span<double> x) const {
  filter_inplace(x);
  std::reverse(x.begin(), x.end());
  filter_inplace(x);
  std::reverse(x.begin(), x.end());
}

double SosCascade::magnitude(double freq_hz, double sample_rate_hz) const {
  return cascade_magnitude(sections, 2.0 * M_PI * freq_hz / sample_rate_hz);
}

SosCascade butter_lowpass(int order, double cutoff_hz, double sample_rate_hz) {
  if (order < 2 || order % 2 != 0) throw ConfigError("filter order must be even and >= 2");
  if (cutoff_hz <= 0.0 || cutoff_hz >= sample_rate_hz / 2.0)
    throw ConfigError("cutoff must lie in (0, Nyquist)");

  const double wc = prewarp(cutoff_hz, sample_rate_hz);
  const double fs2 = 2.0 * sample_rate_hz;
  SosCascade c;
  for (cplx p : butter_uhp_poles(order)) {
    Biquad s = pole_pair_section(bilinear(p * wc, fs2));
    s.b0 = 1.0;
    s.b1 = 2.0;
    s.b2 = 1.0;
    // unit DC gain per section
    const double g = (1.0 + s.a1 + s.a2) / 4.0;
    s.b0 *= g;
    s.b1 *= g;
    s.b2 *= g;
    c.sections.push_back(s);
  }
  return c;
}

SosCascade butter_bandpass(int prototype_order, double low_hz, double high_hz,
                           double sample_rate_hz) {
  if (prototype_order < 2 || prototype_order % 2 != 0)
    throw ConfigError("filter order must be even and >= 2");
  if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < sample_rate_hz / 2.0))
    throw ConfigError("bandpass edges must satisfy 0 < low < high < Nyquist");

  const double wl = prewarp(low_hz, sample_rate_hz);
  const double wh = prewarp(high_hz, sample_rate_hz);
  const double bw = wh - wl;
  const double w0sq = wl * wh;
  const double fs2 = 2.0 * sample_rate_hz;

  SosCascade c;
  for (cplx p : butter_uhp_poles(prototype_order)) {
    // lowpass -> bandpass: s^2 - p*bw*s + w0^2 = 0
    const cplx pb = p * bw;
    const cplx disc = std::sqrt(pb * pb * 0.25 - w0sq);
    for (cplx s_pole : {pb * 0.5 + disc, pb * 0.5 - disc}) {
      Biquad s = pole_pair_section(bilinear(s_pole, fs2));
      // zeros at z = +1 and z = -1 (analog zeros at 0 and infinity)
      s.b0 = 1.0;
      s.b1 = 0.0;
      s.b2 = -1.0;
      c.sections.push_back(s);
    }
  }

  // Normalize peak gain to 1 at the (maximally flat) center frequency,
  // spreading the correction evenly over sections.
  const double f_center = (sample_rate_hz / M_PI) * std::atan(std::sqrt(w0sq) / fs2);
  const double raw = c.magnitude(f_center, sample_rate_hz);
  const double g = std::pow(1.0 / raw, 1.0 / static_cast<double>(c.sections.size()));
  for (auto& s : c.sections) {
    s.b0 *= g;
    s.b2 *= g;
  }
  return c;
}

SosCascade iir_notch(double center_hz, double width_hz, double sample_rate_hz) {
  if (width_hz <= 0.0) throw ConfigError("notch width must be positive");
  if (center_hz <= 0.0 || center_hz >= sample_rate_hz / 2.0)
    throw ConfigError("notch center must lie in (0, Nyquist)");

  const double w0 = 2.0 * M_PI * center_hz / sample_rate_hz;
  const double q = center_hz / width_hz;
  const double alpha = std::sin(w0) / (2.0 * q);
  const double a0 = 1.0 + alpha;

  SosCascade c;
  Biquad s;
  s.b0 = 1.0 / a0;
  s.b1 = -2.0 * std::cos(w0) / a0;
  s.b2 = 1.0 / a0;
  s.a1 = -2.0 * std::cos(w0) / a0;
  s.a2 = (1.0 - alpha) / a0;
  c.sections.push_back(s);
  return c;
}

SosCascade notch_bank(double base_hz, double width_hz, double max_hz, double sample_rate_hz) {
  if (width_hz <= 0.0) throw ConfigError("notch width must be positive");
  if (base_hz <= 0.0) throw ConfigError("base frequency must be positive");
  SosCascade c;
  for (double f = base_hz; f <= max_hz + 1e-9; f += base_hz) {
    if (f >= sample_rate_hz / 2.0)
      throw ConfigError("notch harmonic at or above Nyquist");
    SosCascade one = iir_notch(f, width_hz, sample_rate_hz);
    c.sections.push_back(one.sections.front());
  }
  return c;
}

}  // namespace emg
