#include "emg/recording_io.hpp"

#include <bit>
#include <cstdint>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "emg/errors.hpp"

namespace emg {

using nlohmann::json;

namespace {

constexpr const char* kRecordingFormat = "emg.v1";
constexpr const char* kScanFormat = "scan.v1";

void append_f32_le(std::string& out, float v) {
  const auto bits = std::bit_cast<std::uint32_t>(v);
  out.push_back(static_cast<char>(bits & 0xff));
  out.push_back(static_cast<char>((bits >> 8) & 0xff));
  out.push_back(static_cast<char>((bits >> 16) & 0xff));
  out.push_back(static_cast<char>((bits >> 24) & 0xff));
}

float read_f32_le(const unsigned char* p) {
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) |
                             (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) |
                             (static_cast<std::uint32_t>(p[3]) << 24);
  return std::bit_cast<float>(bits);
}

json parse_json(const std::string& text, const std::string& path) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw LoadError(path + ": malformed JSON");
  return j;
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw LoadError(path + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

void write_recording(const std::string& path, const Recording& rec) {
  json header = {
      {"format", kRecordingFormat},
      {"sample_rate_hz", rec.sample_rate_hz()},
      {"n_channels", rec.n_channels()},
      {"n_samples", rec.n_samples()},
      {"grid", {{"rows", rec.grid().rows}, {"cols", rec.grid().cols},
                {"pitch_cm", rec.grid().pitch_cm}}},
      {"metadata", {{"session", rec.meta.session}, {"muscle", rec.meta.muscle},
                    {"exercise", rec.meta.exercise}, {"shift_index", rec.meta.shift_index}}},
      {"warmup_samples", rec.warmup_samples},
      {"provenance", rec.provenance},
  };
  std::string out = header.dump();
  out.push_back('\n');
  out.reserve(out.size() + 4 * static_cast<size_t>(rec.n_channels()) * rec.n_samples());
  for (int c = 0; c < rec.n_channels(); ++c)
    for (double v : rec.channel(c)) append_f32_le(out, static_cast<float>(v));

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw LoadError(path + ": cannot open for writing");
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw LoadError(path + ": write failed");
}

Recording read_recording(const std::string& path) {
  const std::string blob = slurp(path);
  const size_t nl = blob.find('\n');
  if (nl == std::string::npos) throw LoadError(path + ": missing header line");
  const json h = parse_json(blob.substr(0, nl), path);
  try {
    if (h.at("format").get<std::string>() != kRecordingFormat)
      throw LoadError(path + ": unknown recording format");
    GridLayout grid;
    grid.rows = h.at("grid").at("rows").get<int>();
    grid.cols = h.at("grid").at("cols").get<int>();
    grid.pitch_cm = h.at("grid").at("pitch_cm").get<double>();
    const auto n_channels = h.at("n_channels").get<int>();
    const auto n_samples = h.at("n_samples").get<size_t>();
    if (n_channels != grid.rows * grid.cols)
      throw LoadError(path + ": channel count does not match the grid");

    const size_t need = 4 * static_cast<size_t>(n_channels) * n_samples;
    if (blob.size() - nl - 1 != need)
      throw LoadError(path + ": payload size mismatch");

    Recording rec(h.at("sample_rate_hz").get<double>(), grid, n_samples);
    const auto& md = h.at("metadata");
    rec.meta.session = md.at("session").get<std::string>();
    rec.meta.muscle = md.at("muscle").get<std::string>();
    rec.meta.exercise = md.at("exercise").get<std::string>();
    rec.meta.shift_index = md.at("shift_index").get<int>();
    rec.warmup_samples = h.value("warmup_samples", size_t{0});
    rec.provenance = h.value("provenance", std::string{});

    const auto* p = reinterpret_cast<const unsigned char*>(blob.data() + nl + 1);
    for (int c = 0; c < n_channels; ++c) {
      auto ch = rec.channel(c);
      for (size_t i = 0; i < n_samples; ++i, p += 4) ch[i] = read_f32_le(p);
    }
    return rec;
  } catch (const json::exception& e) {
    throw LoadError(path + ": header field error: " + e.what());
  }
}

Recording read_recording_csv(const std::string& path, double sample_rate_hz,
                             const GridLayout& grid) {
  std::ifstream in(path);
  if (!in) throw LoadError(path + ": cannot open");
  std::string line;
  if (!std::getline(in, line)) throw LoadError(path + ": empty file");

  auto split = [](const std::string& s) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    return out;
  };
  const auto labels = split(line);
  if (static_cast<int>(labels.size()) != grid.n_channels())
    throw LoadError(path + ": header column count does not match the grid");

  std::vector<std::vector<double>> cols(labels.size());
  size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != labels.size())
      throw LoadError(path + ": row " + std::to_string(row) + " has wrong column count");
    for (size_t c = 0; c < cells.size(); ++c) {
      try {
        cols[c].push_back(std::stod(cells[c]));
      } catch (const std::exception&) {
        throw LoadError(path + ": row " + std::to_string(row) + " has a non-numeric cell");
      }
    }
  }
  if (cols[0].empty()) throw LoadError(path + ": no sample rows");

  Recording rec(sample_rate_hz, grid, cols[0].size());
  for (int c = 0; c < grid.n_channels(); ++c) {
    auto ch = rec.channel(c);
    for (size_t i = 0; i < cols[c].size(); ++i) ch[i] = cols[c][i];
  }
  return rec;
}

void write_scan(const std::string& path, const ScanData& scan) {
  auto points = [](const std::vector<LabeledPoint>& pts) {
    json arr = json::array();
    for (const auto& p : pts)
      arr.push_back({{"label", p.label}, {"x", p.p.x}, {"y", p.p.y}, {"z", p.p.z}});
    return arr;
  };
  const char* kind = scan.kind == ScanKind::pre    ? "pre"
                     : scan.kind == ScanKind::post ? "post"
                                                   : "no_array";
  json j = {{"format", kScanFormat},
            {"kind", kind},
            {"fiducials", points(scan.fiducials)},
            {"corners", points(scan.corners)}};
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw LoadError(path + ": cannot open for writing");
  f << j.dump(2) << '\n';
  if (!f) throw LoadError(path + ": write failed");
}

ScanData read_scan(const std::string& path) {
  const json j = parse_json(slurp(path), path);
  try {
    if (j.at("format").get<std::string>() != kScanFormat)
      throw LoadError(path + ": unknown scan format");
    ScanData scan;
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "pre")
      scan.kind = ScanKind::pre;
    else if (kind == "post")
      scan.kind = ScanKind::post;
    else if (kind == "no_array")
      scan.kind = ScanKind::no_array;
    else
      throw LoadError(path + ": unknown scan kind " + kind);
    auto points = [&](const json& arr) {
      std::vector<LabeledPoint> out;
      for (const auto& e : arr)
        out.push_back({e.at("label").get<std::string>(),
                       {e.at("x").get<double>(), e.at("y").get<double>(),
                        e.at("z").get<double>()}});
      return out;
    };
    scan.fiducials = points(j.at("fiducials"));
    scan.corners = points(j.at("corners"));
    return scan;
  } catch (const json::exception& e) {
    throw LoadError(path + ": field error: " + e.what());
  }
}

std::vector<ManualSegmentRow> read_manual_segments(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(path + ": cannot open");
  std::string line;
  if (!std::getline(in, line)) throw LoadError(path + ": empty file");
  if (line != "recording_id,start_s,end_s,label")
    throw LoadError(path + ": unexpected header: " + line);

  std::vector<ManualSegmentRow> rows;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ss(line);
    ManualSegmentRow row;
    std::string start, end;
    if (!std::getline(ss, row.recording_id, ',') || !std::getline(ss, start, ',') ||
        !std::getline(ss, end, ','))
      throw LoadError(path + ": row " + std::to_string(lineno) + " is malformed");
    std::getline(ss, row.label);
    try {
      row.start_s = std::stod(start);
      row.end_s = std::stod(end);
    } catch (const std::exception&) {
      throw LoadError(path + ": row " + std::to_string(lineno) + " has non-numeric bounds");
    }
    rows.push_back(row);
  }
  return rows;
}

void write_manual_segments(const std::string& path, const std::vector<ManualSegmentRow>& rows) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw LoadError(path + ": cannot open for writing");
  f << "recording_id,start_s,end_s,label\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%s,%.10g,%.10g,%s\n", r.recording_id.c_str(), r.start_s,
                  r.end_s, r.label.c_str());
    f << buf;
  }
  if (!f) throw LoadError(path + ": write failed");
}

}  // namespace emg
