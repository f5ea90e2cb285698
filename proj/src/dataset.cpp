#include "tsastat/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include "tsastat/errors.hpp"
#include "tsastat/random.hpp"

namespace tsastat {

namespace {

constexpr double kPi = 3.141592653589793238462643383279502884;

std::vector<std::string> split_fields(const std::string& line) {
  std::string normalized = line;
  for (char& c : normalized)
    if (c == ',' || c == '\t') c = ' ';
  std::istringstream in(normalized);
  std::vector<std::string> fields;
  std::string field;
  while (in >> field) fields.push_back(field);
  return fields;
}

double parse_value(const std::string& field, int row) {
  size_t consumed = 0;
  double value = 0.0;
  try {
    value = std::stod(field, &consumed);
  } catch (const std::exception&) {
    consumed = 0;
  }
  if (consumed != field.size())
    throw ConfigError("non-numeric field \"" + field + "\" on row " + std::to_string(row));
  return value;
}

bool all_numeric(const std::vector<std::string>& labels) {
  for (const auto& s : labels) {
    size_t consumed = 0;
    try {
      std::stod(s, &consumed);
    } catch (const std::exception&) {
      return false;
    }
    if (consumed != s.size()) return false;
  }
  return true;
}

struct RawRow {
  std::string label;
  std::vector<double> values;
};

std::vector<RawRow> read_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset file: " + path);
  std::vector<RawRow> rows;
  std::string line;
  int lineno = 0;
  size_t width = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto fields = split_fields(line);
    if (fields.empty()) continue;  // blank lines are allowed anywhere
    if (fields.size() < 2)
      throw ConfigError("row " + std::to_string(lineno) + " has a label but no values");
    RawRow row;
    row.label = fields[0];
    for (size_t i = 1; i < fields.size(); ++i)
      row.values.push_back(parse_value(fields[i], lineno));
    if (width == 0)
      width = row.values.size();
    else if (row.values.size() != width)
      throw ConfigError("ragged file: row " + std::to_string(lineno) + " has " +
                        std::to_string(row.values.size()) + " values, expected " +
                        std::to_string(width));
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw ConfigError("dataset file is empty: " + path);
  return rows;
}

LabeledDataset assemble(const std::string& path, std::vector<RawRow> rows, int channels,
                        std::vector<std::string> class_names, bool extend_mapping) {
  if (channels < 1) throw ConfigError("channel count must be at least 1");
  if (rows.size() % static_cast<size_t>(channels) != 0)
    throw ConfigError("row count " + std::to_string(rows.size()) +
                      " is not a multiple of the channel count " + std::to_string(channels));
  if (extend_mapping) {
    for (const auto& row : rows)
      if (std::find(class_names.begin(), class_names.end(), row.label) == class_names.end())
        class_names.push_back(row.label);
    if (all_numeric(class_names))
      std::sort(class_names.begin(), class_names.end(),
                [](const std::string& a, const std::string& b) {
                  return std::stod(a) < std::stod(b);
                });
    else
      std::sort(class_names.begin(), class_names.end());
  }
  std::map<std::string, int> index;
  for (size_t i = 0; i < class_names.size(); ++i)
    index[class_names[i]] = static_cast<int>(i);

  LabeledDataset ds;
  ds.name = path;
  ds.class_names = class_names;
  ds.class_count = static_cast<int>(class_names.size());
  const Eigen::Index steps = static_cast<Eigen::Index>(rows[0].values.size());
  for (size_t r = 0; r < rows.size(); r += static_cast<size_t>(channels)) {
    const std::string& label = rows[r].label;
    auto it = index.find(label);
    if (it == index.end())
      throw ConfigError("unknown label \"" + label + "\": not present in the training mapping");
    Tensor x(channels, steps);
    for (int c = 0; c < channels; ++c) {
      const RawRow& row = rows[r + static_cast<size_t>(c)];
      if (row.label != label)
        throw ConfigError("channel rows of one instance disagree on the label (\"" + label +
                          "\" vs \"" + row.label + "\")");
      for (Eigen::Index t = 0; t < steps; ++t) x(c, t) = row.values[static_cast<size_t>(t)];
    }
    ds.instances.push_back(std::move(x));
    ds.labels.push_back(it->second);
  }
  return ds;
}

}  // namespace

LabeledDataset load_delimited(const std::string& path, int channels) {
  return assemble(path, read_rows(path), channels, {}, true);
}

LabeledDataset load_delimited(const std::string& path, int channels,
                              const std::vector<std::string>& class_names) {
  return assemble(path, read_rows(path), channels, class_names, false);
}

void save_delimited(const std::string& path, const LabeledDataset& ds) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write dataset file: " + path);
  char buf[64];
  for (int i = 0; i < ds.size(); ++i) {
    const Tensor& x = ds.instances[static_cast<size_t>(i)];
    const int label = ds.labels[static_cast<size_t>(i)];
    const std::string label_text =
        static_cast<size_t>(label) < ds.class_names.size()
            ? ds.class_names[static_cast<size_t>(label)]
            : std::to_string(label);
    for (Eigen::Index c = 0; c < x.rows(); ++c) {
      out << label_text;
      for (Eigen::Index t = 0; t < x.cols(); ++t) {
        std::snprintf(buf, sizeof(buf), "%.17g", x(c, t));
        out << '\t' << buf;
      }
      out << '\n';
    }
  }
  if (!out) throw ConfigError("write failed: " + path);
}

Vector cbf_template(int label, int steps) {
  if (label < 0 || label > 2) throw ConfigError("cbf_template: label must be 0, 1, or 2");
  if (steps < 8) throw ConfigError("cbf_template: series too short");
  // Mean onset and duration of the generator's random ranges.
  const int a = steps * 3 / 16;
  const int b = a + steps / 2;
  Vector t = Vector::Zero(steps);
  for (int i = a; i < b; ++i) {
    const double ramp = static_cast<double>(i - a) / (b - a);
    if (label == 0) t[i] = 6.0;
    if (label == 1) t[i] = 6.0 * ramp;
    if (label == 2) t[i] = 6.0 * (1.0 - ramp);
  }
  return t;
}

LabeledDataset gen_cbf(int count_per_class, int steps, std::uint64_t seed) {
  if (count_per_class < 1) throw ConfigError("gen_cbf: count per class must be at least 1");
  if (steps < 8) throw ConfigError("gen_cbf: series too short");
  auto rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> onset(steps / 8, steps / 4);
  std::uniform_int_distribution<int> duration(steps / 4, 3 * steps / 4);

  LabeledDataset ds;
  ds.name = "cbf";
  ds.class_count = 3;
  ds.class_names = {"cylinder", "bell", "funnel"};
  for (int label = 0; label < 3; ++label) {
    for (int i = 0; i < count_per_class; ++i) {
      const int a = onset(rng);
      const int b = std::min(steps, a + duration(rng));
      const double amplitude = 6.0 + normal(rng);
      Tensor x(1, steps);
      for (int t = 0; t < steps; ++t) {
        double shape = 0.0;
        if (t >= a && t < b) {
          const double ramp = static_cast<double>(t - a) / (b - a);
          if (label == 0) shape = 1.0;
          if (label == 1) shape = ramp;
          if (label == 2) shape = 1.0 - ramp;
        }
        x(0, t) = amplitude * shape + normal(rng);
      }
      ds.instances.push_back(std::move(x));
      ds.labels.push_back(label);
    }
  }
  return ds;
}

LabeledDataset gen_synthetic_control(int count_per_class, int steps, std::uint64_t seed) {
  if (count_per_class < 1)
    throw ConfigError("gen_synthetic_control: count per class must be at least 1");
  if (steps < 6) throw ConfigError("gen_synthetic_control: series too short");
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> noise(-3.0, 3.0);
  std::uniform_real_distribution<double> cycle_amp(10.0, 15.0);
  std::uniform_real_distribution<double> cycle_period(10.0, 15.0);
  std::uniform_real_distribution<double> gradient(0.2, 0.5);
  std::uniform_real_distribution<double> shift_size(7.5, 20.0);
  std::uniform_int_distribution<int> shift_point(steps / 3, 2 * steps / 3);
  const double mean = 30.0;
  const double scale = 2.0;

  LabeledDataset ds;
  ds.name = "synthetic-control";
  ds.class_count = 6;
  ds.class_names = {"normal",           "cyclic",       "increasing_trend",
                    "decreasing_trend", "upward_shift", "downward_shift"};
  for (int label = 0; label < 6; ++label) {
    for (int i = 0; i < count_per_class; ++i) {
      const double amp = cycle_amp(rng);
      const double period = cycle_period(rng);
      const double slope = gradient(rng);
      const double shift = shift_size(rng);
      const int change = shift_point(rng);
      Tensor x(1, steps);
      for (int t = 0; t < steps; ++t) {
        double y = mean + noise(rng) * scale;
        switch (label) {
          case 1: y += amp * std::sin(2.0 * kPi * t / period); break;
          case 2: y += slope * t; break;
          case 3: y -= slope * t; break;
          case 4: y += t >= change ? shift : 0.0; break;
          case 5: y -= t >= change ? shift : 0.0; break;
          default: break;
        }
        x(0, t) = y;
      }
      ds.instances.push_back(std::move(x));
      ds.labels.push_back(label);
    }
  }
  return ds;
}

LabeledDataset znormalize(const LabeledDataset& ds) {
  LabeledDataset out = ds;
  out.unscaled_channels.clear();
  for (int i = 0; i < out.size(); ++i) {
    Tensor& x = out.instances[static_cast<size_t>(i)];
    for (Eigen::Index c = 0; c < x.rows(); ++c) {
      const double mu = x.row(c).mean();
      const double sigma =
          std::sqrt((x.row(c) - mu).square().sum() / static_cast<double>(x.cols()));
      if (sigma > 0.0)
        x.row(c) = (x.row(c) - mu) / sigma;
      else
        out.unscaled_channels.emplace_back(i, static_cast<int>(c));
    }
  }
  return out;
}

std::vector<LabeledDataset> split(const LabeledDataset& ds, const std::vector<double>& fractions,
                                  std::uint64_t seed) {
  if (fractions.empty()) throw ConfigError("split: no fractions given");
  double total = 0.0;
  for (double f : fractions) {
    if (f < 0.0) throw ConfigError("split: negative fraction");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ConfigError("split: fractions must sum to 1");

  const int parts = static_cast<int>(fractions.size());
  std::vector<LabeledDataset> out(static_cast<size_t>(parts));
  for (auto& part : out) {
    part.name = ds.name;
    part.class_count = ds.class_count;
    part.class_names = ds.class_names;
  }

  auto rng = make_rng(seed);
  for (int label = 0; label < ds.class_count; ++label) {
    std::vector<int> members;
    for (int i = 0; i < ds.size(); ++i)
      if (ds.labels[static_cast<size_t>(i)] == label) members.push_back(i);
    std::shuffle(members.begin(), members.end(), rng);

    // Largest-remainder allocation keeps each part within 1 of the exact share.
    const int m = static_cast<int>(members.size());
    std::vector<int> counts(static_cast<size_t>(parts));
    std::vector<std::pair<double, int>> remainders;
    int assigned = 0;
    for (int p = 0; p < parts; ++p) {
      const double exact = m * fractions[static_cast<size_t>(p)];
      counts[static_cast<size_t>(p)] = static_cast<int>(std::floor(exact));
      assigned += counts[static_cast<size_t>(p)];
      remainders.emplace_back(exact - std::floor(exact), p);
    }
    std::stable_sort(remainders.begin(), remainders.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int k = 0; k < m - assigned; ++k)
      ++counts[static_cast<size_t>(remainders[static_cast<size_t>(k)].second)];

    int cursor = 0;
    for (int p = 0; p < parts; ++p) {
      for (int k = 0; k < counts[static_cast<size_t>(p)]; ++k) {
        const int idx = members[static_cast<size_t>(cursor++)];
        out[static_cast<size_t>(p)].instances.push_back(ds.instances[static_cast<size_t>(idx)]);
        out[static_cast<size_t>(p)].labels.push_back(label);
      }
    }
  }
  return out;
}

}  // namespace tsastat
