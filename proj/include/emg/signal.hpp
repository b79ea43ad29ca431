#pragma once

#include "emg/filters.hpp"
#include "emg/recording.hpp"

namespace emg {

// Deterministic preprocessing of raw multichannel sEMG. All filtering is
// forward-backward (zero phase), applied with zero initial state; the first
// and last edge_guard_s seconds are flagged via warmup_samples rather than
// deleted.

inline constexpr double kEdgeGuardSeconds = 0.5;

// 20-450 Hz Butterworth bandpass, prototype order 8 (16th-order cascade).
RawRecording bandpass_filter(const RawRecording& rec, double low_hz = 20.0,
                             double high_hz = 450.0, int order = 8);

// Notches at base_hz and every harmonic up to max_hz, each width_hz wide.
RawRecording notch_powerline(const RawRecording& rec, double base_hz = 60.0,
                             double width_hz = 2.0, int order = 2, double max_hz = 450.0);

// A channel is open iff the RMS within any sliding window of window_s seconds
// falls below rms_floor_v. Defaults: 0.5 s window, 0.5 uV floor.
ChannelMask detect_open_channels(const RawRecording& rec, double window_s = 0.5,
                                 double rms_floor_v = 0.5e-6);

// Rectify and low-pass at cutoff_hz (order-8 Butterworth, forward-backward),
// clamping negative filter output to zero. Input is expected to be
// bandpassed/notched already (documented contract, not enforced).
EnvelopeRecording compute_envelope(const RawRecording& rec, double cutoff_hz = 2.0,
                                   int order = 8);

}  // namespace emg
