#include "emg/segmentation.hpp"

#include <cmath>

#include "emg/errors.hpp"

namespace emg {

namespace {

// Reduced envelope trace: grid mean over usable channels, or one channel.
std::vector<double> reduce(const EnvelopeRecording& env, const SegmentOptions& opts,
                           const ChannelMask* mask) {
  const size_t n = env.n_samples();
  std::vector<double> r(n, 0.0);
  if (opts.reduction == ChannelReduction::per_channel) {
    if (opts.channel < 0 || opts.channel >= env.n_channels())
      throw InputError("per-channel segmentation needs a valid channel index");
    auto x = env.channel(opts.channel);
    r.assign(x.begin(), x.end());
    return r;
  }
  int used = 0;
  for (int c = 0; c < env.n_channels(); ++c) {
    if (mask != nullptr && mask->open[c]) continue;
    auto x = env.channel(c);
    for (size_t i = 0; i < n; ++i) r[i] += x[i];
    ++used;
  }
  if (used == 0) throw InputError("no usable channels for grid-mean envelope");
  for (double& v : r) v /= used;
  return r;
}

}  // namespace

SegmentSet segment_isometric(const EnvelopeRecording& env, const SegmentOptions& opts,
                             const ChannelMask* mask) {
  if (env.n_samples() == 0) throw InputError("empty envelope");
  if (!(opts.threshold_frac > 0.0 && opts.threshold_frac < 1.0))
    throw ConfigError("threshold fraction must lie in (0, 1)");

  const std::vector<double> r = reduce(env, opts, mask);
  const size_t n = r.size();
  const size_t guard = std::min(env.warmup_samples, n / 2);

  double peak = 0.0;
  for (size_t i = guard; i < n - guard; ++i) peak = std::max(peak, r[i]);
  if (guard * 2 >= n) {
    for (double v : r) peak = std::max(peak, v);
  }
  const double thresh = opts.threshold_frac * peak;
  const size_t min_len = static_cast<size_t>(std::llround(opts.min_duration_s * env.sample_rate_hz()));

  SegmentSet out;
  out.recording_id = env.provenance.empty() ? env.meta.session : env.provenance;
  out.method = SegmentationMethod::isometric_threshold;

  size_t run_start = 0;
  bool in_run = false;
  for (size_t i = 0; i <= n; ++i) {
    const bool above = i < n && r[i] > thresh;
    if (above && !in_run) {
      run_start = i;
      in_run = true;
    } else if (!above && in_run) {
      in_run = false;
      if (i - run_start >= min_len && i > run_start)
        out.segments.push_back({run_start, i, {}});
    }
  }

  if (out.segments.empty()) throw EmptySegmentationError("no contraction exceeded the threshold");
  return out;
}

SegmentSet apply_manual_segments(const std::string& recording_id, double sample_rate_hz,
                                 size_t n_samples, const std::vector<ManualBoundary>& boundaries) {
  if (boundaries.empty()) throw EmptySegmentationError("empty boundary list");

  SegmentSet out;
  out.recording_id = recording_id;
  out.method = SegmentationMethod::manual;

  const double duration = static_cast<double>(n_samples) / sample_rate_hz;
  double prev_end = -1.0;
  for (const auto& b : boundaries) {
    if (!(b.start_s < b.end_s)) throw InputError("boundary start must precede end");
    if (b.start_s < 0.0 || b.end_s > duration + 1e-9)
      throw InputError("boundary outside recording duration");
    if (b.start_s < prev_end) throw InputError("boundaries overlap or are unsorted");
    prev_end = b.end_s;

    const size_t s = static_cast<size_t>(std::llround(b.start_s * sample_rate_hz));
    const size_t e = std::min(n_samples, static_cast<size_t>(std::llround(b.end_s * sample_rate_hz)));
    if (e <= s) throw InputError("boundary shorter than one sample");
    out.segments.push_back({s, e, b.label});
  }
  return out;
}

}  // namespace emg
