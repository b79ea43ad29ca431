#include "emg/features.hpp"

#include <cmath>

#include "emg/errors.hpp"
#include "emg/kernels.hpp"

namespace emg {

double total_power(const PowerSpectrum& psd) {
  return kernels::active().sum(psd.density.data(), psd.density.size()) * psd.delta_f;
}

double median_frequency(const PowerSpectrum& psd) {
  const double p = total_power(psd);
  if (p <= 0.0) throw UndefinedFeatureError("median frequency undefined for zero total power");
  const double target = 0.5 * p;
  double cum = 0.0;
  for (size_t i = 0; i < psd.density.size(); ++i) {
    cum += psd.density[i] * psd.delta_f;
    if (cum >= target) return psd.freqs[i];
  }
  return psd.freqs.back();  // rounding fell just short of the target
}

double mean_frequency(const PowerSpectrum& psd) {
  const auto& k = kernels::active();
  const double p = k.sum(psd.density.data(), psd.density.size());
  if (p <= 0.0) throw UndefinedFeatureError("mean frequency undefined for zero total power");
  return k.dot(psd.freqs.data(), psd.density.data(), psd.density.size()) / p;
}

double peak_frequency(const PowerSpectrum& psd) {
  double best = -1.0;
  size_t arg = 0;
  for (size_t i = 0; i < psd.density.size(); ++i) {
    if (psd.density[i] > best) {
      best = psd.density[i];
      arg = i;
    }
  }
  if (best <= 0.0) throw UndefinedFeatureError("peak frequency undefined for zero spectrum");
  return psd.freqs[arg];
}

namespace {

std::span<const double> segment_view(const Recording& rec, const ContractionSegment& seg,
                                     int channel) {
  if (channel < 0 || channel >= rec.n_channels()) throw InputError("bad channel index");
  if (seg.end_sample > rec.n_samples() || seg.start_sample >= seg.end_sample)
    throw InputError("segment outside recording");
  return rec.channel(channel).subspan(seg.start_sample, seg.length());
}

}  // namespace

double integrated_emg(const EnvelopeRecording& env, const ContractionSegment& seg, int channel) {
  auto x = segment_view(env, seg, channel);
  const double dt = 1.0 / env.sample_rate_hz();
  if (x.size() < 2) return 0.0;
  const double s = kernels::active().sum(x.data(), x.size());
  return (s - 0.5 * (x.front() + x.back())) * dt;
}

double max_envelope(const EnvelopeRecording& env, const ContractionSegment& seg, int channel) {
  auto x = segment_view(env, seg, channel);
  return kernels::active().max_val(x.data(), x.size());
}

PowerSpectrum welch_psd(const RawRecording& rec, const ContractionSegment& seg, int channel,
                        const WelchOptions& opts) {
  return welch_psd(segment_view(rec, seg, channel), rec.sample_rate_hz(), opts);
}

ContractionFeatures extract_features(const RawRecording& filtered, const EnvelopeRecording& env,
                                     const ContractionSegment& seg, int channel, int contraction,
                                     const WelchOptions& opts) {
  ContractionFeatures f;
  f.channel = channel;
  f.contraction = contraction;

  const PowerSpectrum psd = welch_psd(filtered, seg, channel, opts);
  f.total_power_v2 = total_power(psd);
  if (f.total_power_v2 > 0.0) {
    f.mnf_hz = mean_frequency(psd);
    f.mdf_hz = median_frequency(psd);
    f.pkf_hz = peak_frequency(psd);
  }
  f.iemg_vs = integrated_emg(env, seg, channel);
  f.max_env_v = max_envelope(env, seg, channel);
  return f;
}

FeatureSet average_features(std::span<const ContractionFeatures> per_contraction) {
  if (per_contraction.empty()) throw InputError("cannot average an empty contraction list");
  FeatureSet out;
  out.channel = per_contraction.front().channel;
  out.n_contractions = static_cast<int>(per_contraction.size());
  for (const auto& f : per_contraction) {
    if (f.channel != out.channel) throw InputError("mixed channels in feature average");
    for (int i = 0; i < kNumFeatures; ++i) out.mean[i] += f.get(static_cast<Feature>(i));
  }
  for (double& v : out.mean) v /= out.n_contractions;
  return out;
}

RecordingFeatures extract_recording_features(const RawRecording& filtered,
                                             const EnvelopeRecording& env,
                                             const SegmentSet& segments,
                                             const ChannelMask* mask,
                                             const WelchOptions& opts) {
  if (segments.segments.empty()) throw EmptySegmentationError("no segments to extract from");
  RecordingFeatures out;
  const int nc = filtered.n_channels();
  out.per_contraction.resize(nc);
  out.averaged.resize(nc);

  for (int c = 0; c < nc; ++c) {
    out.averaged[c].channel = c;
    if (mask != nullptr && mask->open[c]) continue;
    auto& rows = out.per_contraction[c];
    for (size_t s = 0; s < segments.segments.size(); ++s) {
      rows.push_back(extract_features(filtered, env, segments.segments[s], c,
                                      static_cast<int>(s), opts));
    }
    out.averaged[c] = average_features(rows);
  }
  return out;
}

}  // namespace emg
