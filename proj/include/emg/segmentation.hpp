#pragma once

#include <optional>
#include <string>
#include <vector>

#include "emg/recording.hpp"

namespace emg {

// Half-open sample interval identified as one contraction.
struct ContractionSegment {
  size_t start_sample = 0;
  size_t end_sample = 0;  // exclusive
  std::string label;

  size_t length() const { return end_sample - start_sample; }
};

enum class SegmentationMethod { isometric_threshold, manual };

struct SegmentSet {
  std::string recording_id;
  std::vector<ContractionSegment> segments;  // sorted, non-overlapping
  SegmentationMethod method = SegmentationMethod::isometric_threshold;
};

enum class ChannelReduction { grid_mean, per_channel };

struct SegmentOptions {
  ChannelReduction reduction = ChannelReduction::grid_mean;
  double threshold_frac = 0.2;   // of the envelope maximum, strict >
  double min_duration_s = 0.5;   // shorter runs discarded
  int channel = -1;              // for per_channel reduction
};

// Threshold the envelope at > threshold_frac * max. The max is taken outside
// the warm-up guard; runs themselves may extend into it. The mask (when
// given) restricts the grid-mean to usable channels.
SegmentSet segment_isometric(const EnvelopeRecording& env, const SegmentOptions& opts = {},
                             const ChannelMask* mask = nullptr);

struct ManualBoundary {
  double start_s = 0.0;
  double end_s = 0.0;
  std::string label;
};

// Externally supplied boundaries (STS / TUG). Boundaries must be sorted,
// non-overlapping and inside the recording.
SegmentSet apply_manual_segments(const std::string& recording_id, double sample_rate_hz,
                                 size_t n_samples, const std::vector<ManualBoundary>& boundaries);

}  // namespace emg
