#include "emg/session.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>
#include <tuple>

#include <nlohmann/json.hpp>

#include "emg/analysis.hpp"
#include "emg/errors.hpp"
#include "emg/features.hpp"
#include "emg/recording_io.hpp"
#include "emg/report.hpp"
#include "emg/rng.hpp"
#include "emg/segmentation.hpp"
#include "emg/signal.hpp"
#include "emg/stats.hpp"

namespace emg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::set<std::string> kMuscles = {"GM", "TA", "ST", "TFL"};
const std::set<std::string> kExercises = {"ISO", "STS", "TUG"};
constexpr const char* kManifestFormat = "session.v1";

std::string resolve(const std::string& base, const std::string& path) {
  if (path.empty()) return path;
  fs::path p(path);
  if (p.is_absolute() || base.empty()) return path;
  return (fs::path(base) / p).lexically_normal().string();
}

void require_file(const std::string& path, const std::string& entry_id, const char* field) {
  if (!fs::exists(path))
    throw LoadError("entry " + entry_id + ": " + field + " file missing: " + path);
}

// Header-only sanity parse of a recording file.
void check_recording_header(const std::string& path, const std::string& entry_id) {
  std::ifstream in(path, std::ios::binary);
  std::string line;
  if (!in || !std::getline(in, line))
    throw LoadError("entry " + entry_id + ": unreadable recording header: " + path);
  const json h = json::parse(line, nullptr, false);
  if (h.is_discarded() || !h.contains("format") || h["format"] != "emg.v1")
    throw LoadError("entry " + entry_id + ": not a recording file: " + path);
}

json shift_to_json(const ShiftTransform& s) {
  return {{"x_cm", s.x_cm}, {"y_cm", s.y_cm}, {"theta_deg", s.theta_deg}};
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw LoadError(path + ": cannot open for writing");
  f << text;
  if (!f) throw LoadError(path + ": write failed");
}

}  // namespace

std::string ManifestEntry::id() const {
  return muscle + "_" + exercise + "_s" + std::to_string(shift_index);
}

SessionManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  const json j = json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw LoadError(path + ": malformed JSON");

  SessionManifest m;
  m.base_dir = fs::path(path).parent_path().string();
  try {
    if (j.at("format").get<std::string>() != kManifestFormat)
      throw LoadError(path + ": unknown manifest format");
    m.participant = j.at("participant").get<std::string>();
    std::set<std::tuple<std::string, std::string, int>> seen;
    for (const auto& e : j.at("entries")) {
      ManifestEntry entry;
      entry.muscle = e.at("muscle").get<std::string>();
      entry.exercise = e.at("exercise").get<std::string>();
      entry.shift_index = e.at("shift_index").get<int>();
      entry.recording = e.at("recording").get<std::string>();
      entry.segments = e.value("segments", std::string{});
      if (e.contains("scans")) {
        const auto& s = e.at("scans");
        entry.scan_pre = s.at("pre").get<std::string>();
        entry.scan_post = s.at("post").get<std::string>();
        entry.scan_bare = s.at("bare").get<std::string>();
      }
      const std::string id = entry.id();
      if (!kMuscles.count(entry.muscle))
        throw LoadError("entry " + id + ": unknown muscle " + entry.muscle);
      if (!kExercises.count(entry.exercise))
        throw LoadError("entry " + id + ": unknown exercise " + entry.exercise);
      if (entry.shift_index < 0 || entry.shift_index > 3)
        throw LoadError("entry " + id + ": shift_index outside 0..3");
      if (entry.shift_index >= 1 &&
          (entry.scan_pre.empty() || entry.scan_post.empty() || entry.scan_bare.empty()))
        throw LoadError("entry " + id + ": shifted entries need a pre/post/bare scan triple");
      if (!seen.insert({entry.muscle, entry.exercise, entry.shift_index}).second)
        throw LoadError("entry " + id + ": duplicate muscle/exercise/shift combination");

      const std::string rec_path = resolve(m.base_dir, entry.recording);
      require_file(rec_path, id, "recording");
      check_recording_header(rec_path, id);
      if (!entry.segments.empty()) {
        const std::string seg_path = resolve(m.base_dir, entry.segments);
        require_file(seg_path, id, "segments");
        read_manual_segments(seg_path);
      }
      if (entry.shift_index >= 1) {
        for (const auto& [field, p] : {std::pair<const char*, std::string>{"pre scan", entry.scan_pre},
                                       {"post scan", entry.scan_post},
                                       {"bare scan", entry.scan_bare}}) {
          const std::string sp = resolve(m.base_dir, p);
          require_file(sp, id, field);
          read_scan(sp);
        }
      }
      m.entries.push_back(std::move(entry));
    }
  } catch (const json::exception& e) {
    throw LoadError(path + ": schema violation: " + e.what());
  }
  return m;
}

void write_manifest(const std::string& path, const SessionManifest& manifest) {
  json entries = json::array();
  for (const auto& e : manifest.entries) {
    json je = {{"muscle", e.muscle},
               {"exercise", e.exercise},
               {"shift_index", e.shift_index},
               {"recording", e.recording}};
    if (!e.segments.empty()) je["segments"] = e.segments;
    if (e.shift_index >= 1)
      je["scans"] = {{"pre", e.scan_pre}, {"post", e.scan_post}, {"bare", e.scan_bare}};
    entries.push_back(je);
  }
  const json j = {{"format", kManifestFormat},
                  {"participant", manifest.participant},
                  {"entries", entries}};
  write_text_file(path, j.dump(2) + "\n");
}

namespace {

struct EntryData {
  bool ok = false;
  std::string error;
  RecordingFeatures features;
  ChannelMask mask;
  SegmentSet segments;
  GridLayout grid;
  double sample_rate = 0.0;
};

EntryData process_entry(const ManifestEntry& entry, const SessionManifest& manifest,
                        const PipelineConfig& config) {
  EntryData d;
  Recording raw = read_recording(resolve(manifest.base_dir, entry.recording));
  raw.meta.muscle = entry.muscle;
  raw.meta.exercise = entry.exercise;
  raw.meta.shift_index = entry.shift_index;
  d.grid = raw.grid();
  d.sample_rate = raw.sample_rate_hz();

  const Recording filtered = notch_powerline(bandpass_filter(raw));
  d.mask = detect_open_channels(filtered, config.open_window_s, config.open_rms_floor_v);
  if (d.mask.n_closed() == 0) throw InputError("all channels are open");
  const EnvelopeRecording env = compute_envelope(filtered);

  if (!entry.segments.empty()) {
    const auto rows = read_manual_segments(resolve(manifest.base_dir, entry.segments));
    std::vector<ManualBoundary> bounds;
    for (const auto& r : rows)
      if (r.recording_id == entry.id()) bounds.push_back({r.start_s, r.end_s, r.label});
    if (bounds.empty())
      throw InputError("segments file has no rows for recording " + entry.id());
    d.segments = apply_manual_segments(entry.id(), env.sample_rate_hz(), env.n_samples(), bounds);
  } else {
    d.segments = segment_isometric(env, {}, &d.mask);
    d.segments.recording_id = entry.id();
  }
  d.features = extract_recording_features(filtered, env, d.segments, &d.mask);
  d.ok = true;
  return d;
}

struct PairData {
  int shift_index = 0;
  std::string error;  // nonempty = pair unusable
  ShiftTransform shift;
  ShiftDiagnostics diag;
  ChannelMap map;
  std::vector<double> displacement_cm;
  const EntryData* post = nullptr;
};

struct Group {
  std::string muscle, exercise;
  const EntryData* ref = nullptr;  // shift 0
  std::string ref_error;
  std::vector<PairData> pairs;
};

struct StratumData {
  std::vector<PairDifference> pairs;
  int excluded_zero_ref = 0;
  SameLocationDiffs sl;
  bool has_fit = false;
  FitResult fit;
  bool has_sl = false;
  SameLocationSummary sl_summary;
  std::vector<double> residuals;
  std::map<int, ResidualTest> pair_tests;  // keyed by shift index
  bool has_pooled_test = false;
  ResidualTest pooled_test;
};

using StratumKeyT = std::tuple<int, std::string, std::string>;  // feature, muscle, exercise

std::string stratum_dir_name(const StratumKeyT& key) {
  return std::string(kFeatureNames[std::get<0>(key)]) + "_" + std::get<1>(key) + "_" +
         std::get<2>(key);
}

std::string feature_unit(Feature f) {
  switch (f) {
    case Feature::mnf:
    case Feature::mdf:
    case Feature::pkf: return "Hz";
    case Feature::total_power: return "V^2";
    case Feature::iemg: return "V*s";
    case Feature::max_env: return "V";
  }
  return "";
}

// The per-stratum bootstrap seed; stable across thread counts and runs.
std::uint64_t stratum_seed(std::uint64_t base, const std::string& feature,
                           const std::string& muscle, const std::string& exercise) {
  return mix_seed(base, {fnv1a(feature), fnv1a(muscle), fnv1a(exercise)});
}

struct StratumFilter {
  bool all = true;
  bool combined_only = false;
  std::string feature, muscle, exercise;

  static StratumFilter parse(const std::string& text) {
    StratumFilter f;
    if (text.empty()) return f;
    f.all = false;
    if (text == "combined") {
      f.combined_only = true;
      return f;
    }
    std::istringstream ss(text);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ss, part, ',')) parts.push_back(part);
    if (parts.size() != 3)
      throw ConfigError("stratum filter must be feature,muscle,exercise or combined");
    bool known = false;
    for (const char* name : kFeatureNames) known = known || parts[0] == name;
    if (!known) throw ConfigError("unknown feature in stratum filter: " + parts[0]);
    f.feature = parts[0];
    f.muscle = parts[1];
    f.exercise = parts[2];
    return f;
  }

  bool want_stratum(const StratumKeyT& key) const {
    if (all) return true;
    if (combined_only) return false;
    return kFeatureNames[std::get<0>(key)] == feature && std::get<1>(key) == muscle &&
           std::get<2>(key) == exercise;
  }
  bool want_combined() const { return all || combined_only; }
};

json fit_to_json(const StratumData& s) {
  if (!s.has_fit) return nullptr;
  return {{"a_pct", s.fit.a},           {"lambda_cm", s.fit.lambda_cm},
          {"rss", s.fit.rss},           {"tss", s.fit.tss},
          {"n_points", s.fit.n_points}, {"converged", s.fit.converged},
          {"amplitude_null", s.fit.amplitude_null}, {"poor_fit", s.fit.poor_fit}};
}

json sl_to_json(const StratumData& s) {
  if (!s.has_sl) return nullptr;
  return {{"median_pct", s.sl_summary.median_pct},
          {"q1_pct", s.sl_summary.q1},
          {"q3_pct", s.sl_summary.q3},
          {"n_pairs", s.sl_summary.n_pairs},
          {"n_excluded_zero_ref", s.sl_summary.n_excluded_zero_ref}};
}

json residual_to_json(const ResidualTest& t) {
  return {{"n_residuals", static_cast<int>(t.residuals.size())},
          {"p_zero_median", t.p_zero_median},
          {"p_same_location_median", t.p_same_location_median},
          {"reject_zero", t.reject_zero},
          {"reject_same_location", t.reject_same_location},
          {"underpowered", t.underpowered}};
}

void write_stratum_outputs(const fs::path& dir, const StratumKeyT& key, StratumData& s,
                           std::uint64_t seed) {
  fs::create_directories(dir);
  const std::string feature = kFeatureNames[std::get<0>(key)];
  const std::string& muscle = std::get<1>(key);
  const std::string& exercise = std::get<2>(key);
  const std::string context = feature + " " + muscle + " " + exercise;

  CsvTable curve;
  curve.comments = {"stratum " + context, "seed " + std::to_string(seed)};
  curve.header = {"distance_cm", "mean_pct", "ci_lo_pct", "ci_hi_pct", "n"};
  for (const auto& p : mean_curve_with_ci(s.pairs, 0.95, seed))
    curve.rows.push_back({format_double(p.distance_cm), format_double(p.mean_pct),
                          format_double(p.lo), format_double(p.hi), std::to_string(p.n)});
  write_csv((dir / "curve.csv").string(), curve);

  if (s.has_fit) {
    CsvTable fit;
    fit.comments = {"stratum " + context};
    fit.header = {"a_pct", "lambda_cm", "rss", "tss", "n_points", "converged", "amplitude_null",
                  "poor_fit"};
    fit.rows.push_back({format_double(s.fit.a), format_double(s.fit.lambda_cm),
                        format_double(s.fit.rss), format_double(s.fit.tss),
                        std::to_string(s.fit.n_points), s.fit.converged ? "1" : "0",
                        s.fit.amplitude_null ? "1" : "0", s.fit.poor_fit ? "1" : "0"});
    write_csv((dir / "fit.csv").string(), fit);
  }

  CsvTable sl;
  sl.comments = {"stratum " + context};
  sl.header = {"feature", "muscle", "exercise", "median_pct", "q1_pct", "q3_pct",
               "n_pairs", "n_excluded_zero_ref", "median_abs", "q1_abs", "q3_abs", "unit"};
  {
    std::vector<std::string> row = {feature, muscle, exercise};
    if (s.has_sl) {
      row.insert(row.end(), {format_double(s.sl_summary.median_pct),
                             format_double(s.sl_summary.q1), format_double(s.sl_summary.q3),
                             std::to_string(s.sl_summary.n_pairs),
                             std::to_string(s.sl_summary.n_excluded_zero_ref)});
    } else {
      row.insert(row.end(), {"nan", "nan", "nan", "0",
                             std::to_string(s.sl.n_excluded_zero_ref)});
    }
    if (!s.sl.abs_diffs.empty()) {
      row.insert(row.end(), {format_double(quantile(s.sl.abs_diffs, 0.5)),
                             format_double(quantile(s.sl.abs_diffs, 0.25)),
                             format_double(quantile(s.sl.abs_diffs, 0.75))});
    } else {
      row.insert(row.end(), {"nan", "nan", "nan"});
    }
    row.push_back(feature_unit(static_cast<Feature>(std::get<0>(key))));
    sl.rows.push_back(row);
  }
  write_csv((dir / "same_location.csv").string(), sl);

  if (s.has_sl) {
    CsvTable frac;
    frac.comments = {"stratum " + context,
                     "threshold_pct " + format_double(s.sl_summary.median_pct)};
    frac.header = {"distance_cm", "fraction", "n"};
    for (const auto& p : fraction_below(s.pairs, s.sl_summary.median_pct))
      frac.rows.push_back(
          {format_double(p.distance_cm), format_double(p.fraction), std::to_string(p.n)});
    write_csv((dir / "fraction.csv").string(), frac);
  }

  CsvTable resid;
  resid.comments = {"stratum " + context};
  resid.header = {"shift_index", "n_residuals", "p_zero_median", "p_same_location_median",
                  "reject_zero", "reject_same_location", "underpowered"};
  for (const auto& [k, t] : s.pair_tests)
    resid.rows.push_back({std::to_string(k), std::to_string(t.residuals.size()),
                          format_double(t.p_zero_median),
                          format_double(t.p_same_location_median), t.reject_zero ? "1" : "0",
                          t.reject_same_location ? "1" : "0", t.underpowered ? "1" : "0"});
  if (s.has_pooled_test) {
    const auto& t = s.pooled_test;
    resid.rows.push_back({"pooled", std::to_string(t.residuals.size()),
                          format_double(t.p_zero_median),
                          format_double(t.p_same_location_median), t.reject_zero ? "1" : "0",
                          t.reject_same_location ? "1" : "0", t.underpowered ? "1" : "0"});
  }
  write_csv((dir / "residuals.csv").string(), resid);
}

void finalize_stratum(StratumData& s, const std::vector<Group>& groups, int feature_idx,
                      bool combined, const std::string& muscle, const std::string& exercise,
                      const FitOptions& fit_opts, double max_sep_cm) {
  // Fit over pooled intra-recording pairs.
  try {
    s.fit = fit_inverse_exponential(s.pairs, fit_opts);
    s.has_fit = true;
  } catch (const UnfittableError&) {
    s.has_fit = false;
  }

  // Pool same-location diffs over the matching shift pairs.
  const Feature f = static_cast<Feature>(feature_idx);
  for (const auto& g : groups) {
    if (!combined && (g.muscle != muscle || g.exercise != exercise)) continue;
    if (!g.ref) continue;
    for (const auto& p : g.pairs) {
      if (!p.error.empty()) continue;
      auto d = same_location_diffs(g.ref->features.averaged, p.post->features.averaged, p.map, f,
                                   max_sep_cm);
      s.sl.diffs.insert(s.sl.diffs.end(), d.diffs.begin(), d.diffs.end());
      s.sl.abs_diffs.insert(s.sl.abs_diffs.end(), d.abs_diffs.begin(), d.abs_diffs.end());
      s.sl.n_excluded_zero_ref += d.n_excluded_zero_ref;
    }
  }
  if (!s.sl.diffs.empty()) {
    s.sl_summary = summarize_same_location(s.sl, f);
    s.sl_summary.feature = f;
    s.has_sl = true;
  }

  // Residuals need the fit and the same-location median.
  if (!s.has_fit || !s.has_sl) return;
  for (const auto& g : groups) {
    if (!combined && (g.muscle != muscle || g.exercise != exercise)) continue;
    if (!g.ref) continue;
    for (const auto& p : g.pairs) {
      if (!p.error.empty()) continue;
      auto vals = same_channel_residual_values(g.ref->features.averaged,
                                               p.post->features.averaged, p.map, s.fit,
                                               p.displacement_cm, f);
      if (vals.empty()) continue;
      if (!combined) {
        s.pair_tests.emplace(p.shift_index,
                             residual_test_from_values(vals, f, s.sl_summary.median_pct));
      }
      s.residuals.insert(s.residuals.end(), vals.begin(), vals.end());
    }
  }
  if (!s.residuals.empty()) {
    s.pooled_test = residual_test_from_values(s.residuals, f, s.sl_summary.median_pct);
    s.has_pooled_test = true;
  }
}

}  // namespace

PipelineResult run_pipeline(const SessionManifest& manifest, const PipelineConfig& config) {
  if (config.out_dir.empty()) throw ConfigError("pipeline needs an output directory");
  const StratumFilter filter = StratumFilter::parse(config.stratum);
  const fs::path out(config.out_dir);
  fs::create_directories(out);

  PipelineResult result;
  result.out_dir = config.out_dir;

  // Entries are independent; slots keep the output order fixed regardless of
  // scheduling.
  std::vector<EntryData> slots(manifest.entries.size());
  {
    const int n_threads =
        std::max(1, std::min<int>(config.threads, static_cast<int>(manifest.entries.size())));
    std::atomic<size_t> next{0};
    auto worker = [&]() {
      for (;;) {
        const size_t i = next.fetch_add(1);
        if (i >= manifest.entries.size()) break;
        try {
          slots[i] = process_entry(manifest.entries[i], manifest, config);
        } catch (const std::exception& e) {
          slots[i].ok = false;
          slots[i].error = e.what();
        }
      }
    };
    if (n_threads == 1) {
      worker();
    } else {
      std::vector<std::thread> pool;
      for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
      for (auto& t : pool) t.join();
    }
  }

  for (size_t i = 0; i < manifest.entries.size(); ++i)
    result.entries.push_back({manifest.entries[i].id(), slots[i].ok, slots[i].error});

  // Group by muscle/exercise; build shift pairs against the shift-0 entry.
  std::map<std::pair<std::string, std::string>, Group> groups;
  for (size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    auto& g = groups[{e.muscle, e.exercise}];
    g.muscle = e.muscle;
    g.exercise = e.exercise;
    if (e.shift_index == 0) {
      if (slots[i].ok)
        g.ref = &slots[i];
      else
        g.ref_error = slots[i].error;
    }
  }
  for (size_t i = 0; i < manifest.entries.size(); ++i) {
    const auto& e = manifest.entries[i];
    if (e.shift_index == 0) continue;
    auto& g = groups[{e.muscle, e.exercise}];
    PairData p;
    p.shift_index = e.shift_index;
    p.post = &slots[i];
    if (!slots[i].ok) {
      p.error = "entry failed: " + slots[i].error;
    } else if (!g.ref) {
      p.error = g.ref_error.empty() ? "no shift-0 reference entry"
                                    : "reference entry failed: " + g.ref_error;
    } else {
      try {
        const ScanData pre = read_scan(resolve(manifest.base_dir, e.scan_pre));
        const ScanData post = read_scan(resolve(manifest.base_dir, e.scan_post));
        const ScanData bare = read_scan(resolve(manifest.base_dir, e.scan_bare));
        p.shift = extract_shift(pre, post, bare, slots[i].grid, {}, &p.diag);
        const auto pre_pos = electrode_positions(slots[i].grid, {});
        const auto post_pos = electrode_positions(slots[i].grid, p.shift);
        p.map = closest_channel_map(pre_pos, post_pos);
        p.displacement_cm.resize(pre_pos.size());
        for (size_t c = 0; c < pre_pos.size(); ++c)
          p.displacement_cm[c] = distance(pre_pos[c], post_pos[c]);
      } catch (const std::exception& ex) {
        p.error = ex.what();
      }
    }
    if (!p.error.empty()) ++result.n_pair_failures;
    groups[{e.muscle, e.exercise}].pairs.push_back(std::move(p));
  }

  std::vector<Group> group_list;
  for (auto& [key, g] : groups) group_list.push_back(std::move(g));

  // Pool intra-recording pair differences per stratum.
  std::map<StratumKeyT, StratumData> strata;
  for (size_t i = 0; i < manifest.entries.size(); ++i) {
    if (!slots[i].ok) continue;
    const auto& e = manifest.entries[i];
    const auto pw = intra_pairwise(slots[i].features.averaged, slots[i].grid, slots[i].mask);
    for (int f = 0; f < kNumFeatures; ++f) {
      auto& s = strata[{f, e.muscle, e.exercise}];
      s.pairs.insert(s.pairs.end(), pw.pairs[f].begin(), pw.pairs[f].end());
      s.excluded_zero_ref += pw.excluded_zero_ref[f];
    }
  }

  const FitOptions fit_opts{config.weight_self_pairs};
  for (auto& [key, s] : strata)
    finalize_stratum(s, group_list, std::get<0>(key), false, std::get<1>(key),
                     std::get<2>(key), fit_opts, config.same_location_max_sep_cm);

  // Combined aggregation per feature across muscles and exercises.
  std::map<int, StratumData> combined;
  for (const auto& [key, s] : strata) {
    auto& c = combined[std::get<0>(key)];
    c.pairs.insert(c.pairs.end(), s.pairs.begin(), s.pairs.end());
    c.excluded_zero_ref += s.excluded_zero_ref;
  }
  for (auto& [f, c] : combined)
    finalize_stratum(c, group_list, f, true, "", "", fit_opts,
                     config.same_location_max_sep_cm);

  // Emit the tree. Everything below is serial and deterministically ordered.
  json entries_meta = json::array();
  for (const auto& o : result.entries)
    entries_meta.push_back({{"id", o.id}, {"ok", o.ok}, {"error", o.error}});
  const json run_meta = {
      {"format", "analysis.v1"},
      {"participant", manifest.participant},
      {"seed", config.seed},
      {"config",
       {{"same_location_max_sep_cm", config.same_location_max_sep_cm},
        {"open_window_s", config.open_window_s},
        {"open_rms_floor_v", config.open_rms_floor_v},
        {"weight_self_pairs", config.weight_self_pairs},
        {"stratum", config.stratum}}},
      {"entries", entries_meta},
      {"pair_failures", result.n_pair_failures}};
  write_text_file((out / "run_meta.json").string(), run_meta.dump(2) + "\n");

  fs::create_directories(out / "entries");
  for (size_t i = 0; i < manifest.entries.size(); ++i) {
    if (!slots[i].ok) continue;
    const auto& e = manifest.entries[i];
    const fs::path dir = out / "entries" / e.id();
    fs::create_directories(dir);

    CsvTable seg;
    seg.comments = {"recording " + e.id()};
    seg.header = {"index", "start_s", "end_s", "label", "method"};
    const char* method =
        slots[i].segments.method == SegmentationMethod::manual ? "manual" : "isometric";
    for (size_t k = 0; k < slots[i].segments.segments.size(); ++k) {
      const auto& sgm = slots[i].segments.segments[k];
      seg.rows.push_back({std::to_string(k),
                          format_double(static_cast<double>(sgm.start_sample) / slots[i].sample_rate),
                          format_double(static_cast<double>(sgm.end_sample) / slots[i].sample_rate),
                          sgm.label, method});
    }
    write_csv((dir / "segments.csv").string(), seg);

    CsvTable feat;
    feat.comments = {"recording " + e.id()};
    feat.header = {"channel", "open", "n_contractions"};
    for (const char* name : kFeatureNames) feat.header.push_back(name);
    for (int c = 0; c < slots[i].grid.n_channels(); ++c) {
      std::vector<std::string> row = {std::to_string(c), slots[i].mask.open[c] ? "1" : "0",
                                      std::to_string(slots[i].features.averaged[c].n_contractions)};
      for (int f = 0; f < kNumFeatures; ++f)
        row.push_back(format_double(slots[i].features.averaged[c].get(static_cast<Feature>(f))));
      feat.rows.push_back(row);
    }
    write_csv((dir / "features.csv").string(), feat);
  }

  fs::create_directories(out / "shifts");
  for (const auto& g : group_list) {
    for (const auto& p : g.pairs) {
      const std::string name = g.muscle + "_" + g.exercise + "_s" + std::to_string(p.shift_index);
      json j;
      if (p.error.empty()) {
        double med_sep = 0.0;
        if (!p.map.separation_cm.empty()) med_sep = quantile(p.map.separation_cm, 0.5);
        j = {{"pair", name},
             {"shift", shift_to_json(p.shift)},
             {"pre_residual_rms_cm", p.diag.pre_residual_rms_cm},
             {"post_residual_rms_cm", p.diag.post_residual_rms_cm},
             {"median_separation_cm", med_sep}};
      } else {
        j = {{"pair", name}, {"error", p.error}};
      }
      write_text_file((out / "shifts" / (name + ".json")).string(), j.dump(2) + "\n");
    }
  }

  json summary_strata = json::object();
  for (auto& [key, s] : strata) {
    if (!filter.want_stratum(key)) continue;
    const std::uint64_t seed =
        stratum_seed(config.seed, kFeatureNames[std::get<0>(key)], std::get<1>(key),
                     std::get<2>(key));
    write_stratum_outputs(out / "strata" / stratum_dir_name(key), key, s, seed);
    ++result.n_strata_written;

    json js = {{"feature", kFeatureNames[std::get<0>(key)]},
               {"muscle", std::get<1>(key)},
               {"exercise", std::get<2>(key)},
               {"n_pairs", static_cast<int>(s.pairs.size())},
               {"excluded_zero_ref", s.excluded_zero_ref},
               {"fit", fit_to_json(s)},
               {"same_location", sl_to_json(s)}};
    js["residual_tests"] = json::object();
    for (const auto& [k, t] : s.pair_tests)
      js["residual_tests"][std::to_string(k)] = residual_to_json(t);
    if (s.has_pooled_test) js["residual_tests"]["pooled"] = residual_to_json(s.pooled_test);
    summary_strata[stratum_dir_name(key)] = js;
  }

  json summary_combined = json::object();
  if (filter.want_combined()) {
    for (auto& [f, c] : combined) {
      const StratumKeyT key{f, "ALL", "ALL"};
      const std::uint64_t seed = stratum_seed(config.seed, kFeatureNames[f], "ALL", "ALL");
      write_stratum_outputs(out / "combined" / kFeatureNames[f], key, c, seed);
      ++result.n_strata_written;

      json js = {{"feature", kFeatureNames[f]},
                 {"n_pairs", static_cast<int>(c.pairs.size())},
                 {"excluded_zero_ref", c.excluded_zero_ref},
                 {"fit", fit_to_json(c)},
                 {"same_location", sl_to_json(c)}};
      if (c.has_pooled_test) js["residual_test"] = residual_to_json(c.pooled_test);
      summary_combined[kFeatureNames[f]] = js;
    }
  }

  const json summary = {{"format", "summary.v1"},
                        {"strata", summary_strata},
                        {"combined", summary_combined}};
  write_text_file((out / "summary.json").string(), summary.dump(2) + "\n");
  return result;
}

namespace {

struct ExerciseProtocol {
  double duration_s;
  std::vector<std::pair<double, double>> activity;
  bool manual_segments;
};

ExerciseProtocol protocol_for(const std::string& exercise) {
  if (exercise == "ISO") return {14.0, {{1.0, 4.0}, {5.5, 8.5}, {10.0, 13.0}}, false};
  if (exercise == "STS")
    return {16.0, {{1.0, 3.0}, {4.0, 6.0}, {7.0, 9.0}, {10.0, 12.0}, {13.0, 15.0}}, true};
  return {12.0, {{1.5, 10.5}}, true};  // TUG
}

std::vector<MotorUnit> muscle_units(const SessionSpec& spec, const std::string& muscle,
                                    const GridLayout& layout) {
  Rng rng(mix_seed(spec.seed, {fnv1a("units"), fnv1a(muscle)}));
  const double w = (layout.cols - 1) * layout.pitch_cm;
  const double h = (layout.rows - 1) * layout.pitch_cm;
  std::vector<MotorUnit> units(spec.units_per_muscle);
  for (auto& u : units) {
    u.position_cm = {rng.uniform(0.0, w), rng.uniform(0.0, h)};
    u.firing_rate_hz = rng.uniform(8.0, 15.0);
    u.amplitude_v = rng.uniform(2e-4, 5e-4);
    u.duration_ms = 6.0;
    u.decay_length_cm = spec.decay_length_cm;
  }
  return units;
}

}  // namespace

std::string generate_session(const SessionSpec& spec, const std::string& out_dir) {
  if (spec.shifts.empty() || spec.shifts.size() > 3)
    throw ConfigError("session needs 1 to 3 shift regions");
  const GridLayout layout;
  const fs::path out(out_dir);
  fs::create_directories(out / "rec");
  fs::create_directories(out / "scans");
  fs::create_directories(out / "seg");

  SessionManifest manifest;
  manifest.participant = spec.participant;
  manifest.base_dir = out_dir;

  for (const auto& muscle : spec.muscles) {
    const auto units = muscle_units(spec, muscle, layout);
    for (const auto& exercise : spec.exercises) {
      const auto proto = protocol_for(exercise);
      const std::uint64_t drive_seed =
          mix_seed(spec.seed, {fnv1a("drive"), fnv1a(muscle), fnv1a(exercise)});

      for (int k = 0; k <= static_cast<int>(spec.shifts.size()); ++k) {
        ManifestEntry entry;
        entry.muscle = muscle;
        entry.exercise = exercise;
        entry.shift_index = k;
        const std::string id = entry.id();

        ScenarioConfig cfg;
        cfg.units = units;
        cfg.duration_s = proto.duration_s;
        cfg.sample_rate = 2000.0;
        cfg.noise_sigma_v = spec.noise_sigma_v;
        cfg.powerline_amp_v = spec.powerline_amp_v;
        cfg.shift = k == 0 ? ShiftTransform{} : spec.shifts[k - 1];
        cfg.reapplication = k == 0 ? ReapplicationLaw{} : spec.reapplication;
        cfg.activity = proto.activity;
        cfg.seed = mix_seed(spec.seed, {fnv1a(muscle), fnv1a(exercise),
                                        static_cast<std::uint64_t>(k)});
        cfg.source_seed = drive_seed;
        cfg.meta = {spec.participant, muscle, exercise, k};

        const RawRecording rec = simulate_recording(cfg, layout);
        entry.recording = "rec/" + id + ".emg";
        write_recording((out / entry.recording).string(), rec);

        if (proto.manual_segments) {
          std::vector<ManualSegmentRow> rows;
          for (size_t r = 0; r < proto.activity.size(); ++r)
            rows.push_back({id, proto.activity[r].first, proto.activity[r].second,
                            "rep" + std::to_string(r)});
          entry.segments = "seg/" + id + ".csv";
          write_manual_segments((out / entry.segments).string(), rows);
        }

        if (k >= 1) {
          const auto [pre, post, bare] = synth_scan_triple(
              layout, cfg.shift, SurfaceSpec::plane(), spec.scan_noise_sigma_cm,
              mix_seed(spec.seed, {fnv1a("scan"), fnv1a(muscle), fnv1a(exercise),
                                   static_cast<std::uint64_t>(k)}));
          entry.scan_pre = "scans/" + id + "_pre.json";
          entry.scan_post = "scans/" + id + "_post.json";
          entry.scan_bare = "scans/" + id + "_bare.json";
          write_scan((out / entry.scan_pre).string(), pre);
          write_scan((out / entry.scan_post).string(), post);
          write_scan((out / entry.scan_bare).string(), bare);
        }
        manifest.entries.push_back(std::move(entry));
      }
    }
  }
  const std::string manifest_path = (out / "manifest.json").string();
  write_manifest(manifest_path, manifest);
  return manifest_path;
}

namespace {

json load_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  const json j = json::parse(ss.str(), nullptr, false);
  if (j.is_discarded()) throw LoadError(path + ": malformed JSON");
  return j;
}

ShiftTransform shift_from_json(const json& j) {
  ShiftTransform s;
  s.x_cm = j.value("x_cm", 0.0);
  s.y_cm = j.value("y_cm", 0.0);
  s.theta_deg = j.value("theta_deg", 0.0);
  return s;
}

ReapplicationLaw reapplication_from_json(const json& j) {
  ReapplicationLaw law;
  const auto kind = j.value("kind", std::string("none"));
  if (kind == "none") {
    law.kind = ReapplicationLaw::Kind::none;
  } else if (kind == "uniform") {
    law.kind = ReapplicationLaw::Kind::uniform;
    law.lo = j.at("lo").get<double>();
    law.hi = j.at("hi").get<double>();
    if (!(law.lo > 0.0 && law.hi >= law.lo))
      throw ConfigError("reapplication gain bounds must satisfy 0 < lo <= hi");
  } else {
    throw ConfigError("unknown reapplication kind: " + kind);
  }
  return law;
}

}  // namespace

ScenarioConfig parse_scenario_json(const std::string& path) {
  const json j = load_json_file(path);
  try {
    ScenarioConfig cfg;
    if (!j.contains("seed")) throw ConfigError(path + ": scenario seed is mandatory");
    cfg.seed = j.at("seed").get<std::uint64_t>();
    cfg.source_seed = j.value("source_seed", std::uint64_t{0});
    cfg.duration_s = j.at("duration_s").get<double>();
    cfg.sample_rate = j.value("sample_rate", 2000.0);
    cfg.noise_sigma_v = j.value("noise_sigma_v", 0.0);
    cfg.powerline_amp_v = j.value("powerline_amp_v", 0.0);
    if (j.contains("shift")) cfg.shift = shift_from_json(j.at("shift"));
    if (j.contains("reapplication"))
      cfg.reapplication = reapplication_from_json(j.at("reapplication"));
    if (j.contains("activity"))
      for (const auto& w : j.at("activity"))
        cfg.activity.emplace_back(w.at(0).get<double>(), w.at(1).get<double>());
    for (const auto& u : j.at("units")) {
      MotorUnit mu;
      mu.position_cm = {u.at("x_cm").get<double>(), u.at("y_cm").get<double>()};
      mu.firing_rate_hz = u.at("firing_rate_hz").get<double>();
      mu.amplitude_v = u.at("amplitude_v").get<double>();
      mu.duration_ms = u.value("duration_ms", 6.0);
      mu.decay_length_cm = u.at("decay_length_cm").get<double>();
      cfg.units.push_back(mu);
    }
    if (j.contains("metadata")) {
      const auto& md = j.at("metadata");
      cfg.meta.session = md.value("session", std::string{});
      cfg.meta.muscle = md.value("muscle", std::string{});
      cfg.meta.exercise = md.value("exercise", std::string{});
      cfg.meta.shift_index = md.value("shift_index", 0);
    }
    return cfg;
  } catch (const json::exception& e) {
    throw LoadError(path + ": scenario schema violation: " + e.what());
  }
}

SessionSpec parse_session_spec_json(const std::string& path) {
  const json j = load_json_file(path);
  try {
    SessionSpec spec;
    if (!j.contains("seed")) throw ConfigError(path + ": session seed is mandatory");
    spec.seed = j.at("seed").get<std::uint64_t>();
    spec.participant = j.value("participant", spec.participant);
    if (j.contains("muscles"))
      spec.muscles = j.at("muscles").get<std::vector<std::string>>();
    if (j.contains("exercises"))
      spec.exercises = j.at("exercises").get<std::vector<std::string>>();
    if (j.contains("shifts")) {
      spec.shifts.clear();
      for (const auto& s : j.at("shifts")) spec.shifts.push_back(shift_from_json(s));
    }
    if (j.contains("reapplication"))
      spec.reapplication = reapplication_from_json(j.at("reapplication"));
    spec.units_per_muscle = j.value("units_per_muscle", spec.units_per_muscle);
    spec.decay_length_cm = j.value("decay_length_cm", spec.decay_length_cm);
    spec.noise_sigma_v = j.value("noise_sigma_v", spec.noise_sigma_v);
    spec.powerline_amp_v = j.value("powerline_amp_v", spec.powerline_amp_v);
    spec.scan_noise_sigma_cm = j.value("scan_noise_sigma_cm", spec.scan_noise_sigma_cm);
    return spec;
  } catch (const json::exception& e) {
    throw LoadError(path + ": session schema violation: " + e.what());
  }
}

}  // namespace emg
