#pragma once

#include <string>
#include <utility>
#include <vector>

namespace tsastat {

/// Header row plus string cells. Numeric cells are formatted by the caller
/// (format_g17 for anything that must survive a text round trip).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

/// 17 significant digits: enough to reproduce a double exactly when reparsed.
std::string format_g17(double v);

/// Shorter form for human-facing numbers in markdown and SVG labels.
std::string format_g6(double v);

void write_csv(const std::string& path, const CsvTable& table);
CsvTable read_csv(const std::string& path);

std::string markdown_table(const CsvTable& table);

/// One polyline per series on shared axes. Output is plain deterministic SVG
/// text with no timestamps, so identical inputs give identical bytes.
struct ChartSeries {
  std::string name;
  std::vector<std::pair<double, double>> points;
};
void write_svg_line_chart(const std::string& path, const std::string& title,
                          const std::string& x_label, const std::string& y_label,
                          const std::vector<ChartSeries>& series);

void write_svg_bar_chart(const std::string& path, const std::string& title,
                         const std::vector<std::string>& labels,
                         const std::vector<double>& values);

/// Collects the known CSV outputs under run_dir into report.md and writes
/// summary.csv with one row per (file, numeric column, column sum) so the
/// report can be checked against its sources. Missing directory is an error;
/// unchanged inputs produce byte-identical output.
void write_consolidated_report(const std::string& run_dir);

}  // namespace tsastat
