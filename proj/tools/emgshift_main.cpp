#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "emg/analysis.hpp"
#include "emg/errors.hpp"
#include "emg/features.hpp"
#include "emg/geometry.hpp"
#include "emg/recording_io.hpp"
#include "emg/report.hpp"
#include "emg/segmentation.hpp"
#include "emg/session.hpp"
#include "emg/signal.hpp"
#include "emg/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace emg;

namespace {

// Exit codes: 0 ok, 2 usage/config, 3 data, 4 analysis degeneracy.
constexpr int kExitOk = 0;
constexpr int kExitUsage = 2;
constexpr int kExitData = 3;
constexpr int kExitDegenerate = 4;

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  const json j = json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw LoadError(path + ": malformed JSON");
  return j;
}

struct AnalyzeArgs {
  std::string manifest_path;
  std::string config_path;
  std::string out_dir;
  std::string stratum;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool weight_self_pairs = false;
};

// --config supplies defaults; explicit flags win.
PipelineConfig build_pipeline_config(const AnalyzeArgs& args) {
  PipelineConfig cfg;
  if (!args.config_path.empty()) {
    const json j = load_json(args.config_path);
    try {
      cfg.seed = j.value("seed", cfg.seed);
      cfg.threads = j.value("threads", cfg.threads);
      cfg.stratum = j.value("stratum", cfg.stratum);
      cfg.weight_self_pairs = j.value("weight_self_pairs", cfg.weight_self_pairs);
      cfg.same_location_max_sep_cm =
          j.value("same_location_max_sep_cm", cfg.same_location_max_sep_cm);
      cfg.open_window_s = j.value("open_window_s", cfg.open_window_s);
      cfg.open_rms_floor_v = j.value("open_rms_floor_v", cfg.open_rms_floor_v);
    } catch (const json::exception& e) {
      throw ConfigError(args.config_path + ": bad config value: " + e.what());
    }
  }
  if (args.seed) cfg.seed = *args.seed;
  if (args.threads) cfg.threads = *args.threads;
  if (!args.stratum.empty()) cfg.stratum = args.stratum;
  if (args.weight_self_pairs) cfg.weight_self_pairs = true;
  cfg.out_dir = args.out_dir;
  if (cfg.threads < 1) throw ConfigError("threads must be >= 1");
  return cfg;
}

int run_simulate(const std::string& config_path, std::optional<std::uint64_t> seed,
                 const std::string& out_dir) {
  const json j = load_json(config_path);
  const std::string kind = j.value("kind", std::string("recording"));
  fs::create_directories(out_dir);
  if (kind == "session") {
    SessionSpec spec = parse_session_spec_json(config_path);
    if (seed) spec.seed = *seed;
    const std::string manifest = generate_session(spec, out_dir);
    std::cout << manifest << "\n";
  } else if (kind == "recording") {
    ScenarioConfig cfg = parse_scenario_json(config_path);
    if (seed) cfg.seed = *seed;
    const RawRecording rec = simulate_recording(cfg);
    const std::string path = (fs::path(out_dir) / "recording.emg").string();
    write_recording(path, rec);
    std::cout << path << "\n";
  } else {
    throw ConfigError(config_path + ": unknown scenario kind: " + kind);
  }
  return kExitOk;
}

int run_preprocess(const std::string& in_path, const std::string& out_path) {
  const RawRecording raw = read_recording(in_path);
  RawRecording filtered = notch_powerline(bandpass_filter(raw));
  filtered.provenance = fs::path(in_path).filename().string();
  write_recording(out_path, filtered);
  const ChannelMask mask = detect_open_channels(filtered);
  std::cout << "wrote " << out_path << " (" << mask.n_closed() << "/" << filtered.n_channels()
            << " channels usable)\n";
  return kExitOk;
}

SegmentSet segment_recording(const RawRecording& raw, const std::string& segments_path,
                             const std::string& id) {
  const RawRecording filtered = notch_powerline(bandpass_filter(raw));
  const ChannelMask mask = detect_open_channels(filtered);
  const EnvelopeRecording env = compute_envelope(filtered);
  if (!segments_path.empty()) {
    std::vector<ManualBoundary> bounds;
    for (const auto& r : read_manual_segments(segments_path))
      if (id.empty() || r.recording_id == id) bounds.push_back({r.start_s, r.end_s, r.label});
    if (bounds.empty()) throw InputError(segments_path + ": no rows match recording " + id);
    return apply_manual_segments(id, env.sample_rate_hz(), env.n_samples(), bounds);
  }
  SegmentSet set = segment_isometric(env, {}, &mask);
  set.recording_id = id;
  return set;
}

int run_segment(const std::string& in_path, const std::string& segments_path,
                std::string id, const std::string& out_path) {
  const RawRecording raw = read_recording(in_path);
  if (id.empty()) id = fs::path(in_path).stem().string();
  const SegmentSet set = segment_recording(raw, segments_path, id);
  CsvTable t;
  t.header = {"index", "start_s", "end_s", "label", "method"};
  const char* method = set.method == SegmentationMethod::manual ? "manual" : "isometric";
  for (size_t k = 0; k < set.segments.size(); ++k) {
    const auto& s = set.segments[k];
    t.rows.push_back({std::to_string(k),
                      format_double(static_cast<double>(s.start_sample) / raw.sample_rate_hz()),
                      format_double(static_cast<double>(s.end_sample) / raw.sample_rate_hz()),
                      s.label, method});
  }
  write_csv(out_path, t);
  std::cout << set.segments.size() << " segments -> " << out_path << "\n";
  return kExitOk;
}

int run_features(const std::string& in_path, const std::string& segments_path,
                 std::string id, const std::string& out_path) {
  const RawRecording raw = read_recording(in_path);
  if (id.empty()) id = fs::path(in_path).stem().string();
  const RawRecording filtered = notch_powerline(bandpass_filter(raw));
  const ChannelMask mask = detect_open_channels(filtered);
  const EnvelopeRecording env = compute_envelope(filtered);
  const SegmentSet set = segment_recording(raw, segments_path, id);
  const RecordingFeatures feats = extract_recording_features(filtered, env, set, &mask);

  CsvTable t;
  t.header = {"channel", "open", "n_contractions"};
  for (const char* name : kFeatureNames) t.header.push_back(name);
  for (int c = 0; c < raw.n_channels(); ++c) {
    std::vector<std::string> row = {std::to_string(c), mask.open[c] ? "1" : "0",
                                    std::to_string(feats.averaged[c].n_contractions)};
    for (int f = 0; f < kNumFeatures; ++f)
      row.push_back(format_double(feats.averaged[c].get(static_cast<Feature>(f))));
    t.rows.push_back(row);
  }
  write_csv(out_path, t);
  std::cout << "features for " << raw.n_channels() << " channels -> " << out_path << "\n";
  return kExitOk;
}

int run_shift(const std::string& pre_path, const std::string& post_path,
              const std::string& bare_path) {
  const ScanData pre = read_scan(pre_path);
  const ScanData post = read_scan(post_path);
  const ScanData bare = read_scan(bare_path);
  const ShiftTransform s = extract_shift(pre, post, bare);
  std::printf("x=%.3f y=%.3f theta=%.3f\n", s.x_cm, s.y_cm, s.theta_deg);
  return kExitOk;
}

int run_analyze(const AnalyzeArgs& args) {
  const SessionManifest manifest = load_manifest(args.manifest_path);
  const PipelineConfig cfg = build_pipeline_config(args);
  const PipelineResult res = run_pipeline(manifest, cfg);
  int failed = 0;
  for (const auto& e : res.entries)
    if (!e.ok) {
      ++failed;
      std::cerr << "entry " << e.id << " failed: " << e.error << "\n";
    }
  std::cout << res.entries.size() - failed << "/" << res.entries.size() << " entries, "
            << res.n_strata_written << " strata -> " << res.out_dir << "\n";
  return kExitOk;
}

int run_report(const std::string& analysis_dir, bool emit_volts) {
  const int n = render_report(analysis_dir, emit_volts);
  std::cout << n << " plots -> " << analysis_dir << "\n";
  return kExitOk;
}

int run_selftest(const std::string& out_dir, std::uint64_t seed, int threads) {
  SessionSpec spec;
  spec.seed = seed;
  const fs::path out(out_dir);
  const std::string manifest_path = generate_session(spec, (out / "session").string());
  const SessionManifest manifest = load_manifest(manifest_path);
  PipelineConfig cfg;
  cfg.seed = seed;
  cfg.threads = threads;
  cfg.out_dir = (out / "analysis").string();
  const PipelineResult res = run_pipeline(manifest, cfg);
  for (const auto& e : res.entries)
    if (!e.ok) {
      std::cerr << "selftest entry " << e.id << " failed: " << e.error << "\n";
      return kExitData;
    }
  if (res.n_pair_failures > 0) {
    std::cerr << "selftest: " << res.n_pair_failures << " shift pairs failed\n";
    return kExitData;
  }
  const int n_plots = render_report(cfg.out_dir, true);
  std::cout << "selftest ok: " << res.entries.size() << " entries, " << res.n_strata_written
            << " strata, " << n_plots << " plots -> " << out_dir << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"HDsEMG electrode-shift analysis"};
  app.require_subcommand(1);

  std::string config_path, out_dir, in_path, segments_path, rec_id;
  std::string pre_path, post_path, bare_path, manifest_path, analysis_dir, stratum;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  bool emit_volts = false, weight_self_pairs = false;

  auto* sim = app.add_subcommand("simulate", "Generate a synthetic recording or session");
  sim->add_option("--config", config_path, "Scenario or session JSON")
      ->envname("EMGSHIFT_CONFIG")
      ->required();
  sim->add_option("--seed", seed, "Override the configured seed");
  sim->add_option("--out", out_dir, "Output directory")->required();

  auto* pre = app.add_subcommand("preprocess", "Bandpass and notch a recording");
  pre->add_option("--in", in_path, "Input recording")->required();
  pre->add_option("--out", out_dir, "Output recording path")->required();

  auto* seg = app.add_subcommand("segment", "Detect or apply contraction segments");
  seg->add_option("--in", in_path, "Input recording")->required();
  seg->add_option("--segments", segments_path, "Manual boundaries CSV");
  seg->add_option("--id", rec_id, "Recording id for manual boundary rows");
  seg->add_option("--out", out_dir, "Output CSV path")->required();

  auto* feat = app.add_subcommand("features", "Per-channel contraction-averaged features");
  feat->add_option("--in", in_path, "Input recording")->required();
  feat->add_option("--segments", segments_path, "Manual boundaries CSV");
  feat->add_option("--id", rec_id, "Recording id for manual boundary rows");
  feat->add_option("--out", out_dir, "Output CSV path")->required();

  auto* shf = app.add_subcommand("shift", "Recover (x, y, theta) from a scan triple");
  shf->add_option("--pre", pre_path, "Pre scan JSON")->required();
  shf->add_option("--post", post_path, "Post scan JSON")->required();
  shf->add_option("--bare", bare_path, "Bare scan JSON")->required();

  auto* ana = app.add_subcommand("analyze", "Run the full pipeline over a session manifest");
  ana->add_option("--manifest", manifest_path, "Session manifest JSON")->required();
  ana->add_option("--config", config_path, "Pipeline config JSON")->envname("EMGSHIFT_CONFIG");
  ana->add_option("--seed", seed, "Bootstrap seed");
  ana->add_option("--threads", threads, "Worker threads for entry processing");
  ana->add_option("--stratum", stratum, "feature,muscle,exercise or combined");
  ana->add_flag("--weight-self-pairs", weight_self_pairs, "Include d=0 pairs in fits");
  ana->add_option("--out", out_dir, "Output directory")->required();

  auto* rep = app.add_subcommand("report", "Render SVG plots from analyze output");
  rep->add_option("--analysis", analysis_dir, "analyze output directory")->required();
  rep->add_flag("--emit-volts", emit_volts, "Also write absolute-units tables");

  auto* self = app.add_subcommand("selftest", "Simulate, analyze, and report end to end");
  self->add_option("--out", out_dir, "Output directory")->required();
  self->add_option("--seed", seed, "Session seed");
  self->add_option("--threads", threads, "Worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return kExitUsage;
  }

  try {
    if (sim->parsed()) return run_simulate(config_path, seed, out_dir);
    if (pre->parsed()) return run_preprocess(in_path, out_dir);
    if (seg->parsed()) return run_segment(in_path, segments_path, rec_id, out_dir);
    if (feat->parsed()) return run_features(in_path, segments_path, rec_id, out_dir);
    if (shf->parsed()) return run_shift(pre_path, post_path, bare_path);
    if (ana->parsed()) {
      AnalyzeArgs args{manifest_path, config_path, out_dir, stratum,
                       seed, threads, weight_self_pairs};
      return run_analyze(args);
    }
    if (rep->parsed()) return run_report(analysis_dir, emit_volts);
    if (self->parsed()) return run_selftest(out_dir, seed.value_or(1), threads.value_or(1));
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const UnfittableError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const DegenerateSampleError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const DegenerateRegistrationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const InsufficientDataError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const UndefinedFeatureError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const InsufficientOverlapError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const EmptySegmentationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDegenerate;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
