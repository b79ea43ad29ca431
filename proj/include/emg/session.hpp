#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "emg/geometry.hpp"
#include "emg/synthetic.hpp"

namespace emg {

struct ManifestEntry {
  std::string muscle;    // GM | TA | ST | TFL
  std::string exercise;  // ISO | STS | TUG
  int shift_index = 0;   // 0 = initial placement, 1-3 = shift regions
  std::string recording;
  std::string segments;  // optional manual-boundaries CSV
  std::string scan_pre, scan_post, scan_bare;  // required for shift_index >= 1

  std::string id() const;  // muscle_exercise_sN
};

struct SessionManifest {
  std::string participant;
  std::vector<ManifestEntry> entries;
  std::string base_dir;  // relative paths resolve against this
};

// Parses, validates, and stat-checks every referenced file (recording headers
// and scans included). Throws LoadError naming the entry and field.
SessionManifest load_manifest(const std::string& path);
void write_manifest(const std::string& path, const SessionManifest& manifest);

struct PipelineConfig {
  std::uint64_t seed = 1;
  std::string out_dir;
  int threads = 1;
  bool emit_volts = false;
  bool weight_self_pairs = false;
  double same_location_max_sep_cm = 0.5;
  double open_window_s = 0.5;
  double open_rms_floor_v = 0.5e-6;
  // Empty runs every stratum; "feature,muscle,exercise" or "combined" narrows
  // the written output.
  std::string stratum;
};

struct EntryOutcome {
  std::string id;
  bool ok = false;
  std::string error;
};

struct PipelineResult {
  std::vector<EntryOutcome> entries;
  int n_strata_written = 0;
  int n_pair_failures = 0;  // shift pairs that could not be analyzed
  std::string out_dir;
};

// preprocess -> mask -> envelope -> segment -> features per entry, then per
// shift pair: extract shift, map channels, distance curves, same-location
// summary, residual tests. Entry failures are isolated; outputs land under
// config.out_dir, byte-identical for a fixed seed regardless of threads.
PipelineResult run_pipeline(const SessionManifest& manifest, const PipelineConfig& config);

struct SessionSpec {
  std::string participant = "SYN01";
  std::vector<std::string> muscles = {"GM", "TA", "ST", "TFL"};
  std::vector<std::string> exercises = {"ISO", "STS", "TUG"};
  std::vector<ShiftTransform> shifts = {{1.0, 0.0, 0.0}, {0.0, -2.0, 10.0}, {2.0, 1.0, -20.0}};
  ReapplicationLaw reapplication{ReapplicationLaw::Kind::uniform, 0.9, 1.1};
  int units_per_muscle = 12;
  double decay_length_cm = 1.5;
  double noise_sigma_v = 5e-6;
  double powerline_amp_v = 2e-5;
  double scan_noise_sigma_cm = 0.0;
  std::uint64_t seed = 1;
};

// Emits a full on-disk session (recordings, scans, manual segments, manifest)
// with ground truth baked in; returns the manifest path.
std::string generate_session(const SessionSpec& spec, const std::string& out_dir);

// Scenario/session JSON used by the simulate subcommand.
ScenarioConfig parse_scenario_json(const std::string& path);
SessionSpec parse_session_spec_json(const std::string& path);

}  // namespace emg
