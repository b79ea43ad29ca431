#include "emg/signal.hpp"

#include <algorithm>
#include <cmath>

#include "emg/kernels.hpp"

namespace emg {

namespace {

size_t edge_guard_samples(const Recording& rec) {
  return static_cast<size_t>(std::llround(kEdgeGuardSeconds * rec.sample_rate_hz()));
}

Recording filtered_copy(const Recording& rec, const SosCascade& cascade) {
  Recording out = rec;
  for (int c = 0; c < out.n_channels(); ++c) cascade.filtfilt(out.channel(c));
  out.warmup_samples = std::max(out.warmup_samples,
                                std::min(edge_guard_samples(rec), rec.n_samples() / 2));
  return out;
}

}  // namespace

RawRecording bandpass_filter(const RawRecording& rec, double low_hz, double high_hz, int order) {
  if (rec.n_samples() < 1 || rec.n_channels() < 1) throw InputError("empty recording");
  if (!(low_hz < high_hz && high_hz < rec.sample_rate_hz() / 2.0))
    throw ConfigError("bandpass cutoffs must satisfy low < high < Nyquist");
  return filtered_copy(rec, butter_bandpass(order, low_hz, high_hz, rec.sample_rate_hz()));
}

RawRecording notch_powerline(const RawRecording& rec, double base_hz, double width_hz,
                             int order, double max_hz) {
  if (rec.n_samples() < 1) throw InputError("empty recording");
  if (order != 2) throw ConfigError("only 2nd-order notches are supported");
  return filtered_copy(rec, notch_bank(base_hz, width_hz, max_hz, rec.sample_rate_hz()));
}

ChannelMask detect_open_channels(const RawRecording& rec, double window_s, double rms_floor_v) {
  if (window_s <= 0.0) throw ConfigError("window must be positive");
  if (rms_floor_v < 0.0) throw ConfigError("RMS floor must be nonnegative");
  const size_t w = static_cast<size_t>(std::llround(window_s * rec.sample_rate_hz()));
  if (w < 1 || w > rec.n_samples()) throw ConfigError("window longer than recording");

  ChannelMask mask;
  mask.open.resize(rec.n_channels(), false);
  mask.first_offending_window.resize(rec.n_channels(), -1);
  const double floor_sq = rms_floor_v * rms_floor_v * static_cast<double>(w);

  for (int c = 0; c < rec.n_channels(); ++c) {
    auto x = rec.channel(c);
    // running sum of squares over the sliding window
    double acc = kernels::active().sum_sq(x.data(), w);
    if (acc < floor_sq) {
      mask.open[c] = true;
      mask.first_offending_window[c] = 0;
      continue;
    }
    for (size_t i = w; i < x.size(); ++i) {
      acc += x[i] * x[i] - x[i - w] * x[i - w];
      if (acc < floor_sq) {
        mask.open[c] = true;
        mask.first_offending_window[c] = static_cast<long>(i - w + 1);
        break;
      }
    }
  }

  // An all-open mask is legal here; consumers that need a usable channel
  // (segmentation, feature extraction) reject it.
  return mask;
}

EnvelopeRecording compute_envelope(const RawRecording& rec, double cutoff_hz, int order) {
  if (rec.n_samples() < 1) throw InputError("empty recording");
  const SosCascade lp = butter_lowpass(order, cutoff_hz, rec.sample_rate_hz());

  EnvelopeRecording env = rec;
  for (int c = 0; c < env.n_channels(); ++c) {
    auto x = env.channel(c);
    kernels::active().rectify(x.data(), x.data(), x.size());
    lp.filtfilt(x);
    kernels::active().clamp_nonneg(x.data(), x.size());
  }
  env.warmup_samples = std::max(env.warmup_samples,
                                std::min(edge_guard_samples(rec), rec.n_samples() / 2));
  env.provenance = rec.provenance.empty() ? rec.meta.session : rec.provenance;
  return env;
}

}  // namespace emg
