#pragma once

#include <string>
#include <vector>

#include "emg/geometry.hpp"
#include "emg/recording.hpp"
#include "emg/segmentation.hpp"

namespace emg {

// Recording container: one UTF-8 JSON header line, then little-endian float32
// samples, channel-major. Byte-exact across platforms.
void write_recording(const std::string& path, const Recording& rec);
Recording read_recording(const std::string& path);

// Small-fixture CSV: header row of channel labels, one row per sample.
// Sample rate and layout are not stored in the CSV and must be supplied.
Recording read_recording_csv(const std::string& path, double sample_rate_hz,
                             const GridLayout& grid);

void write_scan(const std::string& path, const ScanData& scan);
ScanData read_scan(const std::string& path);

struct ManualSegmentRow {
  std::string recording_id;
  double start_s = 0.0;
  double end_s = 0.0;
  std::string label;
};

// CSV with header recording_id,start_s,end_s,label.
std::vector<ManualSegmentRow> read_manual_segments(const std::string& path);
void write_manual_segments(const std::string& path, const std::vector<ManualSegmentRow>& rows);

}  // namespace emg
