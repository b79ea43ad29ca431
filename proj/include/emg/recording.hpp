#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "emg/errors.hpp"
#include "emg/geometry.hpp"

namespace emg {

struct RecordingMeta {
  std::string session;
  std::string muscle;    // GM | TA | ST | TFL (free-form for fixtures)
  std::string exercise;  // ISO | STS | TUG
  int shift_index = 0;
};

// Multichannel time series, channel-major storage. Channel count always
// equals grid.rows * grid.cols; fixtures use small grids (1x1, 2x2).
// warmup_samples marks the filter warm-up guard at each end of the recording;
// filtering stages set it, segmentation honors it.
class Recording {
 public:
  Recording(double sample_rate_hz, GridLayout grid, size_t n_samples)
      : sample_rate_hz_(sample_rate_hz),
        grid_(grid),
        n_samples_(n_samples),
        data_(static_cast<size_t>(grid.n_channels()) * n_samples, 0.0) {
    if (sample_rate_hz <= 0.0) throw InputError("sample rate must be positive");
    if (!grid.valid()) throw InputError("invalid grid layout");
    if (n_samples < 1) throw InputError("recording must have at least one sample");
  }

  double sample_rate_hz() const { return sample_rate_hz_; }
  const GridLayout& grid() const { return grid_; }
  int n_channels() const { return grid_.n_channels(); }
  size_t n_samples() const { return n_samples_; }
  double duration_s() const { return static_cast<double>(n_samples_) / sample_rate_hz_; }

  std::span<double> channel(int c) {
    return {data_.data() + static_cast<size_t>(c) * n_samples_, n_samples_};
  }
  std::span<const double> channel(int c) const {
    return {data_.data() + static_cast<size_t>(c) * n_samples_, n_samples_};
  }

  RecordingMeta meta;
  size_t warmup_samples = 0;
  std::string provenance;  // id of the source recording, for envelopes

 private:
  double sample_rate_hz_;
  GridLayout grid_;
  size_t n_samples_;
  std::vector<double> data_;
};

using RawRecording = Recording;
// Envelope samples are nonnegative by construction (rectified, low-passed,
// clamped); same container shape as the source it came from.
using EnvelopeRecording = Recording;

// open[c] == true means channel c is unusable. first_offending_window holds
// the start sample of the first window whose RMS fell below the floor (-1 for
// closed channels).
struct ChannelMask {
  std::vector<bool> open;
  std::vector<long> first_offending_window;

  int n_open() const {
    int k = 0;
    for (bool b : open) k += b ? 1 : 0;
    return k;
  }
  int n_closed() const { return static_cast<int>(open.size()) - n_open(); }
};

}  // namespace emg
