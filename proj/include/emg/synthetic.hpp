#pragma once

#include <cstdint>
#include <tuple>
#include <utility>
#include <vector>

#include "emg/geometry.hpp"
#include "emg/recording.hpp"

namespace emg {

struct MotorUnit {
  Point2 position_cm{};        // skin coordinates, same frame as the unshifted grid
  double firing_rate_hz = 10.0;
  double amplitude_v = 1e-3;
  double duration_ms = 6.0;    // biphasic pulse length scale; spectral peak near 100 Hz
  double decay_length_cm = 1.0;
};

struct ReapplicationLaw {
  enum class Kind { none, uniform } kind = Kind::none;
  double lo = 1.0;
  double hi = 1.0;
};

struct ScenarioConfig {
  std::vector<MotorUnit> units;
  double duration_s = 10.0;
  double sample_rate = 2000.0;
  double noise_sigma_v = 0.0;
  double powerline_amp_v = 0.0;
  ShiftTransform shift{};
  ReapplicationLaw reapplication{};
  // Active intervals (start_s, end_s) during which units fire; empty means the
  // whole recording.
  std::vector<std::pair<double, double>> activity;
  std::uint64_t seed = 0;
  // Spike trains draw from source_seed so a session can replay the same
  // voluntary drive across reapplications; 0 means use seed.
  std::uint64_t source_seed = 0;
  RecordingMeta meta{};
};

// Per channel: sum over units of (Poisson spike train convolved with the unit
// waveform), scaled by amplitude * exp(-r / decay_length) at the shifted
// electrode position, then powerline and white noise, then the per-channel
// reapplication gain on the whole channel.
RawRecording simulate_recording(const ScenarioConfig& cfg, const GridLayout& layout = {});

struct SurfaceSpec {
  enum class Kind { plane, cylinder } kind = Kind::plane;
  double radius_cm = 0.0;  // cylinder only; axis along y

  static SurfaceSpec plane() { return {}; }
  static SurfaceSpec cylinder(double radius_cm) {
    return {Kind::cylinder, radius_cm};
  }
};

// Scan triple for one shift: fiducials fixed on the surface, pre corners at
// the nominal pose, post corners at the shifted pose. Pre and post scans get
// random rigid scanner poses; the no-array scan defines the reference frame.
// noise_sigma_cm is the scanner's RMS 3D point error, split evenly over the
// three axes.
std::tuple<ScanData, ScanData, ScanData> synth_scan_triple(const GridLayout& layout,
                                                           const ShiftTransform& shift,
                                                           const SurfaceSpec& surface,
                                                           double noise_sigma_cm,
                                                           std::uint64_t seed);

}  // namespace emg
