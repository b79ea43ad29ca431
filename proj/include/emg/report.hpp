#pragma once

#include <string>
#include <vector>

namespace emg {

// %.10g, enough to round-trip the values the pipeline emits and stable across
// reruns.
std::string format_double(double v);

struct CsvTable {
  std::vector<std::string> comments;  // "# ..." lines kept verbatim
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);

// Column lookup; throws LoadError when the column is absent.
int csv_column(const CsvTable& table, const std::string& name);

// Mean curve with CI band and a dashed same-location median line, drawn purely
// from parsed CSV values so the plot is reproducible from the CSV alone.
struct CurvePlotInput {
  std::string title;
  std::string y_label;
  struct Row {
    double distance_cm, mean, lo, hi;
  };
  std::vector<Row> rows;
  double sl_median = 0.0;
  bool has_sl_median = false;
};

std::string render_curve_svg(const CurvePlotInput& input);

// Regenerates plot.svg files under an analyze output directory from the CSVs
// sitting next to them. Returns the number of plots written.
int render_report(const std::string& analysis_dir, bool emit_volts);

}  // namespace emg
