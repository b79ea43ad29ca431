#include "emg/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "emg/errors.hpp"

namespace emg {

namespace fs = std::filesystem;

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw LoadError(path + ": cannot open for writing");
  auto check = [&](const std::string& cell) {
    if (cell.find_first_of(",\n\r") != std::string::npos)
      throw InputError("csv cell contains a separator: " + cell);
    return cell;
  };
  for (const auto& c : table.comments) f << "# " << c << '\n';
  for (size_t i = 0; i < table.header.size(); ++i)
    f << (i ? "," : "") << check(table.header[i]);
  f << '\n';
  for (const auto& row : table.rows) {
    for (size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << check(row[i]);
    f << '\n';
  }
  if (!f) throw LoadError(path + ": write failed");
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw LoadError(path + ": cannot open");
  CsvTable table;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      std::string c = line.substr(1);
      if (!c.empty() && c[0] == ' ') c.erase(0, 1);
      table.comments.push_back(c);
      continue;
    }
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(line);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (!line.empty() && line.back() == ',') cells.push_back("");
    if (!have_header) {
      table.header = cells;
      have_header = true;
    } else {
      table.rows.push_back(cells);
    }
  }
  if (!have_header) throw LoadError(path + ": no header row");
  return table;
}

int csv_column(const CsvTable& table, const std::string& name) {
  for (size_t i = 0; i < table.header.size(); ++i)
    if (table.header[i] == name) return static_cast<int>(i);
  throw LoadError("csv column missing: " + name);
}

namespace {

std::string fmt2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string fmt_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4g", v);
  return buf;
}

// Round the axis maximum up to 1/2/5 times a power of ten.
double nice_ceil(double v) {
  if (v <= 0.0) return 1.0;
  const double mag = std::pow(10.0, std::floor(std::log10(v)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (v <= m * mag * (1.0 + 1e-12)) return m * mag;
  }
  return 10.0 * mag;
}

}  // namespace

std::string render_curve_svg(const CurvePlotInput& input) {
  const double width = 640.0, height = 420.0;
  const double ml = 64.0, mr = 20.0, mt = 40.0, mb = 48.0;
  const double pw = width - ml - mr, ph = height - mt - mb;

  double xmax = 0.0, ymax = 0.0;
  for (const auto& r : input.rows) {
    xmax = std::max(xmax, r.distance_cm);
    ymax = std::max({ymax, r.hi, r.mean});
  }
  if (input.has_sl_median) ymax = std::max(ymax, input.sl_median);
  xmax = xmax > 0.0 ? xmax : 1.0;
  ymax = nice_ceil(ymax * 1.05);

  auto px = [&](double x) { return ml + pw * (x / xmax); };
  auto py = [&](double y) { return mt + ph * (1.0 - y / ymax); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\" viewBox=\"0 0 " << width << " " << height << "\">\n";
  svg << "<rect width=\"" << width << "\" height=\"" << height << "\" fill=\"white\"/>\n";
  svg << "<text x=\"" << fmt2(ml) << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\""
      << " fill=\"#222\">" << input.title << "</text>\n";

  for (int i = 0; i <= 5; ++i) {
    const double yv = ymax * i / 5.0;
    const double y = py(yv);
    svg << "<line x1=\"" << fmt2(ml) << "\" y1=\"" << fmt2(y) << "\" x2=\"" << fmt2(ml + pw)
        << "\" y2=\"" << fmt2(y) << "\" stroke=\"#ddd\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << fmt2(ml - 8.0) << "\" y=\"" << fmt2(y + 4.0)
        << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#444\""
        << " text-anchor=\"end\">" << fmt_tick(yv) << "</text>\n";
  }
  const int n_xticks = xmax <= 10.0 ? static_cast<int>(std::ceil(xmax)) : 10;
  for (int i = 0; i <= n_xticks; ++i) {
    const double xv = xmax * i / n_xticks;
    const double x = px(xv);
    svg << "<line x1=\"" << fmt2(x) << "\" y1=\"" << fmt2(mt + ph) << "\" x2=\"" << fmt2(x)
        << "\" y2=\"" << fmt2(mt + ph + 5.0) << "\" stroke=\"#444\" stroke-width=\"1\"/>\n";
    svg << "<text x=\"" << fmt2(x) << "\" y=\"" << fmt2(mt + ph + 18.0)
        << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\"#444\""
        << " text-anchor=\"middle\">" << fmt_tick(xv) << "</text>\n";
  }
  svg << "<line x1=\"" << fmt2(ml) << "\" y1=\"" << fmt2(mt + ph) << "\" x2=\"" << fmt2(ml + pw)
      << "\" y2=\"" << fmt2(mt + ph) << "\" stroke=\"#444\" stroke-width=\"1\"/>\n";
  svg << "<line x1=\"" << fmt2(ml) << "\" y1=\"" << fmt2(mt) << "\" x2=\"" << fmt2(ml)
      << "\" y2=\"" << fmt2(mt + ph) << "\" stroke=\"#444\" stroke-width=\"1\"/>\n";
  svg << "<text x=\"" << fmt2(ml + pw / 2.0) << "\" y=\"" << fmt2(height - 10.0)
      << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#222\""
      << " text-anchor=\"middle\">electrode distance (cm)</text>\n";
  svg << "<text x=\"16\" y=\"" << fmt2(mt + ph / 2.0)
      << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"#222\" text-anchor=\"middle\""
      << " transform=\"rotate(-90 16 " << fmt2(mt + ph / 2.0) << ")\">" << input.y_label
      << "</text>\n";

  if (!input.rows.empty()) {
    std::ostringstream band;
    for (size_t i = 0; i < input.rows.size(); ++i)
      band << (i ? " " : "") << fmt2(px(input.rows[i].distance_cm)) << ","
           << fmt2(py(input.rows[i].lo));
    for (size_t i = input.rows.size(); i-- > 0;)
      band << " " << fmt2(px(input.rows[i].distance_cm)) << "," << fmt2(py(input.rows[i].hi));
    svg << "<polygon points=\"" << band.str()
        << "\" fill=\"#9ecae8\" fill-opacity=\"0.5\" stroke=\"none\"/>\n";

    std::ostringstream line;
    for (size_t i = 0; i < input.rows.size(); ++i)
      line << (i ? " " : "") << fmt2(px(input.rows[i].distance_cm)) << ","
           << fmt2(py(input.rows[i].mean));
    svg << "<polyline points=\"" << line.str()
        << "\" fill=\"none\" stroke=\"#1f77b4\" stroke-width=\"2\"/>\n";
  }
  if (input.has_sl_median) {
    const double y = py(input.sl_median);
    svg << "<line x1=\"" << fmt2(ml) << "\" y1=\"" << fmt2(y) << "\" x2=\"" << fmt2(ml + pw)
        << "\" y2=\"" << fmt2(y)
        << "\" stroke=\"#d62728\" stroke-width=\"1.5\" stroke-dasharray=\"6 4\"/>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

namespace {

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw LoadError(path + ": cannot open for writing");
  f << text;
  if (!f) throw LoadError(path + ": write failed");
}

bool render_stratum_plot(const fs::path& dir) {
  const fs::path curve_path = dir / "curve.csv";
  if (!fs::exists(curve_path)) return false;
  const CsvTable curve = read_csv(curve_path.string());

  CurvePlotInput input;
  const int cd = csv_column(curve, "distance_cm");
  const int cm = csv_column(curve, "mean_pct");
  const int cl = csv_column(curve, "ci_lo_pct");
  const int ch = csv_column(curve, "ci_hi_pct");
  for (const auto& row : curve.rows)
    input.rows.push_back({std::stod(row[cd]), std::stod(row[cm]), std::stod(row[cl]),
                          std::stod(row[ch])});

  for (const auto& c : curve.comments) {
    const std::string key = "stratum ";
    if (c.rfind(key, 0) == 0) input.title = c.substr(key.size());
  }
  if (input.title.empty()) input.title = dir.filename().string();
  input.y_label = "mean absolute difference (%)";

  const fs::path sl_path = dir / "same_location.csv";
  if (fs::exists(sl_path)) {
    const CsvTable sl = read_csv(sl_path.string());
    const int cmed = csv_column(sl, "median_pct");
    const int cn = csv_column(sl, "n_pairs");
    if (!sl.rows.empty() && std::stoi(sl.rows[0][cn]) > 0) {
      input.sl_median = std::stod(sl.rows[0][cmed]);
      input.has_sl_median = true;
    }
  }
  write_text((dir / "plot.svg").string(), render_curve_svg(input));
  return true;
}

}  // namespace

int render_report(const std::string& analysis_dir, bool emit_volts) {
  const fs::path root(analysis_dir);
  if (!fs::exists(root)) throw LoadError(analysis_dir + ": no such directory");

  std::vector<fs::path> dirs;
  for (const char* sub : {"strata", "combined"}) {
    const fs::path p = root / sub;
    if (!fs::exists(p)) continue;
    for (const auto& e : fs::directory_iterator(p))
      if (e.is_directory()) dirs.push_back(e.path());
  }
  std::sort(dirs.begin(), dirs.end());

  int n_plots = 0;
  CsvTable volts;
  volts.header = {"feature", "muscle",   "exercise", "median_abs",
                  "q1_abs",  "q3_abs",   "unit",     "n_pairs"};
  for (const auto& dir : dirs) {
    if (render_stratum_plot(dir)) ++n_plots;
    if (!emit_volts) continue;
    const fs::path sl_path = dir / "same_location.csv";
    if (!fs::exists(sl_path)) continue;
    const CsvTable sl = read_csv(sl_path.string());
    if (sl.rows.empty()) continue;
    const auto& row = sl.rows[0];
    if (std::stoi(row[csv_column(sl, "n_pairs")]) <= 0) continue;
    volts.rows.push_back({row[csv_column(sl, "feature")], row[csv_column(sl, "muscle")],
                          row[csv_column(sl, "exercise")], row[csv_column(sl, "median_abs")],
                          row[csv_column(sl, "q1_abs")], row[csv_column(sl, "q3_abs")],
                          row[csv_column(sl, "unit")], row[csv_column(sl, "n_pairs")]});
  }
  if (emit_volts) {
    volts.comments.push_back("same-location median absolute differences in feature units");
    write_csv((root / "volts_table.csv").string(), volts);
  }
  return n_plots;
}

}  // namespace emg
