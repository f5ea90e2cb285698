#include "tsastat/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "tsastat/errors.hpp"

namespace tsastat {

namespace {

std::string csv_escape(const std::string& cell) {
  if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::vector<std::string> csv_split(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(cell);
      cell.clear();
    } else if (c != '\r') {
      cell += c;
    }
  }
  cells.push_back(cell);
  return cells;
}

bool parse_cell(const std::string& cell, double& out) {
  if (cell.empty()) return false;
  size_t consumed = 0;
  try {
    out = std::stod(cell, &consumed);
  } catch (const std::exception&) {
    return false;
  }
  return consumed == cell.size();
}

std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

constexpr int kWidth = 640;
constexpr int kHeight = 400;
constexpr int kMargin = 60;
const char* kPalette[] = {"#1f6fb2", "#c24d2c", "#3a7d44", "#7d3a78", "#b2921f", "#2c7f8c"};

struct Range {
  double lo = 0.0, hi = 1.0;
  void widen(double v) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (hi <= lo) hi = lo + 1.0;
  }
  double place(double v, double a, double b) const { return a + (v - lo) / (hi - lo) * (b - a); }
};

void svg_header(std::ofstream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\""
      << kHeight << "\" viewBox=\"0 0 " << kWidth << " " << kHeight << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\" "
      << "font-family=\"sans-serif\">" << xml_escape(title) << "</text>\n";
}

}  // namespace

std::string format_g17(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string format_g6(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

void write_csv(const std::string& path, const CsvTable& table) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write csv: " + path);
  for (size_t i = 0; i < table.header.size(); ++i)
    out << (i ? "," : "") << csv_escape(table.header[i]);
  out << '\n';
  for (const auto& row : table.rows) {
    if (row.size() != table.header.size())
      throw ConfigError("csv row width does not match header: " + path);
    for (size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << csv_escape(row[i]);
    out << '\n';
  }
  if (!out) throw ConfigError("csv write failed: " + path);
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open csv: " + path);
  CsvTable table;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    auto cells = csv_split(line);
    if (first) {
      table.header = std::move(cells);
      first = false;
    } else {
      if (cells.size() != table.header.size())
        throw ConfigError("csv row width does not match header: " + path);
      table.rows.push_back(std::move(cells));
    }
  }
  if (first) throw ConfigError("csv file is empty: " + path);
  return table;
}

std::string markdown_table(const CsvTable& table) {
  std::ostringstream out;
  out << '|';
  for (const auto& h : table.header) out << ' ' << h << " |";
  out << "\n|";
  for (size_t i = 0; i < table.header.size(); ++i) out << " --- |";
  out << '\n';
  for (const auto& row : table.rows) {
    out << '|';
    for (const auto& cell : row) out << ' ' << cell << " |";
    out << '\n';
  }
  return out.str();
}

void write_svg_line_chart(const std::string& path, const std::string& title,
                          const std::string& x_label, const std::string& y_label,
                          const std::vector<ChartSeries>& series) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write svg: " + path);
  Range xr, yr;
  bool any = false;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      if (!any) {
        xr.lo = xr.hi = x;
        yr.lo = yr.hi = y;
        any = true;
      }
      xr.widen(x);
      yr.widen(y);
    }
  xr.finish();
  yr.finish();
  const double x0 = kMargin, x1 = kWidth - kMargin;
  const double y0 = kHeight - kMargin, y1 = kMargin;

  svg_header(out, title);
  out << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0
      << "\" stroke=\"black\"/>\n"
      << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x0 << "\" y2=\"" << y1
      << "\" stroke=\"black\"/>\n"
      << "<text x=\"" << (x0 + x1) / 2 << "\" y=\"" << kHeight - 16
      << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">"
      << xml_escape(x_label) << "</text>\n"
      << "<text x=\"16\" y=\"" << (y0 + y1) / 2
      << "\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\" "
      << "transform=\"rotate(-90 16 " << (y0 + y1) / 2 << ")\">" << xml_escape(y_label)
      << "</text>\n"
      << "<text x=\"" << x0 << "\" y=\"" << y0 + 16
      << "\" font-size=\"10\" font-family=\"sans-serif\">" << format_g6(xr.lo) << "</text>\n"
      << "<text x=\"" << x1 << "\" y=\"" << y0 + 16
      << "\" text-anchor=\"end\" font-size=\"10\" font-family=\"sans-serif\">" << format_g6(xr.hi)
      << "</text>\n"
      << "<text x=\"" << x0 - 6 << "\" y=\"" << y0
      << "\" text-anchor=\"end\" font-size=\"10\" font-family=\"sans-serif\">" << format_g6(yr.lo)
      << "</text>\n"
      << "<text x=\"" << x0 - 6 << "\" y=\"" << y1
      << "\" text-anchor=\"end\" font-size=\"10\" font-family=\"sans-serif\">" << format_g6(yr.hi)
      << "</text>\n";
  for (size_t s = 0; s < series.size(); ++s) {
    const char* color = kPalette[s % (sizeof(kPalette) / sizeof(kPalette[0]))];
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : series[s].points)
      out << format_g6(xr.place(x, x0, x1)) << ',' << format_g6(yr.place(y, y0, y1)) << ' ';
    out << "\"/>\n";
    out << "<text x=\"" << x1 - 4 << "\" y=\"" << y1 + 14 * (1 + static_cast<int>(s))
        << "\" text-anchor=\"end\" font-size=\"11\" font-family=\"sans-serif\" fill=\"" << color
        << "\">" << xml_escape(series[s].name) << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw ConfigError("svg write failed: " + path);
}

void write_svg_bar_chart(const std::string& path, const std::string& title,
                         const std::vector<std::string>& labels,
                         const std::vector<double>& values) {
  if (labels.size() != values.size())
    throw ConfigError("bar chart labels and values differ in length");
  if (values.empty()) throw ConfigError("bar chart has no values");
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write svg: " + path);
  Range yr;
  yr.lo = 0.0;
  yr.hi = values[0];
  for (double v : values) yr.widen(v);
  yr.finish();
  const double x0 = kMargin, x1 = kWidth - kMargin;
  const double y0 = kHeight - kMargin, y1 = kMargin;
  const double slot = (x1 - x0) / static_cast<double>(values.size());

  svg_header(out, title);
  out << "<line x1=\"" << x0 << "\" y1=\"" << y0 << "\" x2=\"" << x1 << "\" y2=\"" << y0
      << "\" stroke=\"black\"/>\n";
  for (size_t i = 0; i < values.size(); ++i) {
    const double bx = x0 + slot * (static_cast<double>(i) + 0.2);
    const double bw = slot * 0.6;
    const double by = yr.place(values[i], y0, y1);
    const char* color = kPalette[i % (sizeof(kPalette) / sizeof(kPalette[0]))];
    out << "<rect x=\"" << format_g6(bx) << "\" y=\"" << format_g6(std::min(by, y0))
        << "\" width=\"" << format_g6(bw) << "\" height=\"" << format_g6(std::abs(y0 - by))
        << "\" fill=\"" << color << "\"/>\n"
        << "<text x=\"" << format_g6(bx + bw / 2) << "\" y=\"" << y0 + 16
        << "\" text-anchor=\"middle\" font-size=\"10\" font-family=\"sans-serif\">"
        << xml_escape(labels[i]) << "</text>\n"
        << "<text x=\"" << format_g6(bx + bw / 2) << "\" y=\"" << format_g6(std::min(by, y0) - 4)
        << "\" text-anchor=\"middle\" font-size=\"10\" font-family=\"sans-serif\">"
        << format_g6(values[i]) << "</text>\n";
  }
  out << "</svg>\n";
  if (!out) throw ConfigError("svg write failed: " + path);
}

void write_consolidated_report(const std::string& run_dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(run_dir)) throw ConfigError("missing run directory: " + run_dir);

  // Fixed scan order keeps the report byte-stable across reruns.
  const std::vector<std::string> known = {"metrics.csv",       "attack_summary.csv",
                                          "universal_summary.csv", "cert.csv",
                                          "curve.csv",         "advtrain.csv",
                                          "bounds.csv"};
  std::ostringstream md;
  md << "# Run report\n";
  CsvTable summary;
  summary.header = {"file", "column", "rows", "sum"};
  bool found = false;
  for (const auto& name : known) {
    const fs::path path = fs::path(run_dir) / name;
    if (!fs::exists(path)) continue;
    found = true;
    const CsvTable table = read_csv(path.string());
    md << "\n## " << name << "\n\n" << markdown_table(table);
    for (size_t col = 0; col < table.header.size(); ++col) {
      double total = 0.0;
      bool numeric = !table.rows.empty();
      for (const auto& row : table.rows) {
        double v = 0.0;
        if (!parse_cell(row[col], v)) {
          numeric = false;
          break;
        }
        total += v;
      }
      if (numeric)
        summary.rows.push_back({name, table.header[col], std::to_string(table.rows.size()),
                                format_g17(total)});
    }
  }
  if (!found) throw ConfigError("run directory has no known csv outputs: " + run_dir);

  std::ofstream out(fs::path(run_dir) / "report.md");
  if (!out) throw ConfigError("cannot write report.md under " + run_dir);
  out << md.str();
  if (!out) throw ConfigError("report.md write failed under " + run_dir);
  write_csv((fs::path(run_dir) / "summary.csv").string(), summary);
}

}  // namespace tsastat
