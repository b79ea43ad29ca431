#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "emg/recording.hpp"
#include "emg/segmentation.hpp"
#include "emg/spectrum.hpp"

namespace emg {

// The six features, in the fixed order used throughout exports.
enum class Feature { mnf = 0, mdf, pkf, total_power, iemg, max_env };

inline constexpr int kNumFeatures = 6;
inline constexpr std::array<const char*, kNumFeatures> kFeatureNames = {
    "mnf_hz", "mdf_hz", "pkf_hz", "total_power_v2", "iemg_vs", "max_env_v"};

// True for features that scale with signal amplitude (total power, iEMG,
// max envelope); frequency-domain features are amplitude-invariant.
inline bool is_amplitude_feature(Feature f) {
  return f == Feature::total_power || f == Feature::iemg || f == Feature::max_env;
}

// One channel, one contraction.
struct ContractionFeatures {
  double mnf_hz = 0.0;
  double mdf_hz = 0.0;
  double pkf_hz = 0.0;
  double total_power_v2 = 0.0;
  double iemg_vs = 0.0;
  double max_env_v = 0.0;
  int channel = -1;
  int contraction = -1;

  double get(Feature f) const {
    switch (f) {
      case Feature::mnf: return mnf_hz;
      case Feature::mdf: return mdf_hz;
      case Feature::pkf: return pkf_hz;
      case Feature::total_power: return total_power_v2;
      case Feature::iemg: return iemg_vs;
      case Feature::max_env: return max_env_v;
    }
    return 0.0;
  }
};

// Contraction-averaged values for one channel.
struct FeatureSet {
  std::array<double, kNumFeatures> mean{};
  int n_contractions = 0;
  int channel = -1;

  double get(Feature f) const { return mean[static_cast<int>(f)]; }
};

// Spectral features (Eqs. of the power spectrum)

// P = sum S * delta_f over the one-sided grid.
double total_power(const PowerSpectrum& psd);

// Smallest grid frequency at which the cumulative power reaches half the
// total. Throws UndefinedFeatureError for an all-zero spectrum.
double median_frequency(const PowerSpectrum& psd);

// Power-weighted mean frequency. Throws UndefinedFeatureError when total
// power is zero.
double mean_frequency(const PowerSpectrum& psd);

// Grid frequency of maximal density; ties break toward the lowest frequency.
double peak_frequency(const PowerSpectrum& psd);

// Envelope features

// Trapezoidal integral of the envelope over the segment, V*s.
double integrated_emg(const EnvelopeRecording& env, const ContractionSegment& seg, int channel);

// Maximum envelope sample within the segment, volts (no normalization).
double max_envelope(const EnvelopeRecording& env, const ContractionSegment& seg, int channel);

// Welch PSD of one channel restricted to one contraction.
PowerSpectrum welch_psd(const RawRecording& rec, const ContractionSegment& seg, int channel,
                        const WelchOptions& opts = {});

// All six features for one (channel, contraction).
ContractionFeatures extract_features(const RawRecording& filtered, const EnvelopeRecording& env,
                                     const ContractionSegment& seg, int channel, int contraction,
                                     const WelchOptions& opts = {});

// Arithmetic mean of each feature over the contraction list (all entries must
// share one channel).
FeatureSet average_features(std::span<const ContractionFeatures> per_contraction);

// Per-channel feature table for a whole recording: channels x contractions,
// plus averaged sets. Masked channels get n_contractions == 0.
struct RecordingFeatures {
  std::vector<std::vector<ContractionFeatures>> per_contraction;  // [channel][contraction]
  std::vector<FeatureSet> averaged;                               // [channel]
};

RecordingFeatures extract_recording_features(const RawRecording& filtered,
                                             const EnvelopeRecording& env,
                                             const SegmentSet& segments,
                                             const ChannelMask* mask = nullptr,
                                             const WelchOptions& opts = {});

}  // namespace emg
