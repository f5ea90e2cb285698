#include "tsastat/run_config.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include "tsastat/errors.hpp"

namespace tsastat {

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

long long parse_int(const std::string& value, const std::string& key) {
  size_t consumed = 0;
  long long v = 0;
  try {
    v = std::stoll(value, &consumed);
  } catch (const std::exception&) {
    consumed = 0;
  }
  if (consumed != value.size())
    throw ConfigError("config key " + key + ": expected an integer, got \"" + value + "\"");
  return v;
}

double parse_double(const std::string& value, const std::string& key) {
  size_t consumed = 0;
  double v = 0.0;
  try {
    v = std::stod(value, &consumed);
  } catch (const std::exception&) {
    consumed = 0;
  }
  if (consumed != value.size())
    throw ConfigError("config key " + key + ": expected a number, got \"" + value + "\"");
  return v;
}

bool parse_bool(const std::string& value, const std::string& key) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  throw ConfigError("config key " + key + ": expected true or false, got \"" + value + "\"");
}

struct Entry {
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
};

struct Registry {
  std::vector<std::string> order;
  std::map<std::string, Entry> entries;

  void str(const std::string& key, std::string RunConfig::* field) {
    order.push_back(key);
    entries[key] = {[field](const RunConfig& c) { return c.*field; },
                    [field](RunConfig& c, const std::string& v, const std::string&) {
                      c.*field = v;
                    }};
  }
  void num(const std::string& key, int RunConfig::* field) {
    order.push_back(key);
    entries[key] = {[field](const RunConfig& c) { return std::to_string(c.*field); },
                    [field](RunConfig& c, const std::string& v, const std::string& k) {
                      c.*field = static_cast<int>(parse_int(v, k));
                    }};
  }
  void num(const std::string& key, double RunConfig::* field) {
    order.push_back(key);
    entries[key] = {[field](const RunConfig& c) { return format_double(c.*field); },
                    [field](RunConfig& c, const std::string& v, const std::string& k) {
                      c.*field = parse_double(v, k);
                    }};
  }
  void num(const std::string& key, std::uint64_t RunConfig::* field) {
    order.push_back(key);
    entries[key] = {[field](const RunConfig& c) { return std::to_string(c.*field); },
                    [field](RunConfig& c, const std::string& v, const std::string& k) {
                      size_t consumed = 0;
                      std::uint64_t parsed = 0;
                      try {
                        parsed = std::stoull(v, &consumed);
                      } catch (const std::exception&) {
                        consumed = 0;
                      }
                      if (consumed != v.size())
                        throw ConfigError("config key " + k +
                                          ": expected an unsigned integer, got \"" + v + "\"");
                      c.*field = parsed;
                    }};
  }
  void flag(const std::string& key, bool RunConfig::* field) {
    order.push_back(key);
    entries[key] = {[field](const RunConfig& c) { return c.*field ? "true" : "false"; },
                    [field](RunConfig& c, const std::string& v, const std::string& k) {
                      c.*field = parse_bool(v, k);
                    }};
  }
};

const Registry& registry() {
  static const Registry reg = [] {
    Registry r;
    r.str("command", &RunConfig::command);
    r.str("dataset", &RunConfig::dataset);
    r.str("generate", &RunConfig::generate);
    r.num("count", &RunConfig::count);
    r.num("channels", &RunConfig::channels);
    r.num("train_frac", &RunConfig::train_frac);
    r.str("arch", &RunConfig::arch);
    r.num("epochs", &RunConfig::epochs);
    r.num("batch", &RunConfig::batch);
    r.num("learning_rate", &RunConfig::learning_rate);
    r.num("momentum", &RunConfig::momentum);
    r.num("target_class", &RunConfig::target_class);
    r.num("rho", &RunConfig::rho);
    r.num("beta_label", &RunConfig::beta_label);
    r.num("beta_stat", &RunConfig::beta_stat);
    r.num("degree", &RunConfig::degree);
    r.str("features", &RunConfig::features);
    r.str("norm", &RunConfig::norm);
    r.num("eta", &RunConfig::eta);
    r.num("max_iters", &RunConfig::max_iters);
    r.num("loss_threshold", &RunConfig::loss_threshold);
    r.num("init_scale", &RunConfig::init_scale);
    r.num("attack_count", &RunConfig::attack_count);
    r.flag("universal", &RunConfig::universal);
    r.num("fool_target", &RunConfig::fool_target);
    r.num("universal_epochs", &RunConfig::universal_epochs);
    r.str("attack_kind", &RunConfig::attack_kind);
    r.num("eps", &RunConfig::eps);
    r.num("pgd_steps", &RunConfig::pgd_steps);
    r.num("pgd_step_size", &RunConfig::pgd_step_size);
    r.num("mu_p", &RunConfig::mu_p);
    r.num("sigma", &RunConfig::sigma);
    r.num("max_samples", &RunConfig::max_samples);
    r.flag("independent_draws", &RunConfig::independent_draws);
    r.num("cert_count", &RunConfig::cert_count);
    r.str("delta_grid", &RunConfig::delta_grid);
    r.num("augment_count", &RunConfig::augment_count);
    r.flag("gaussian_arm", &RunConfig::gaussian_arm);
    r.str("checkpoint", &RunConfig::checkpoint);
    r.str("eval_checkpoint", &RunConfig::eval_checkpoint);
    r.str("transform_path", &RunConfig::transform_path);
    r.str("out", &RunConfig::out);
    r.num("seed", &RunConfig::seed);
    r.num("workers", &RunConfig::workers);
    r.flag("plots", &RunConfig::plots);
    r.flag("verbose", &RunConfig::verbose);
    return r;
  }();
  return reg;
}

std::string normalize_key(const std::string& key) {
  std::string k = key;
  for (char& c : k)
    if (c == '-') c = '_';
  return k;
}

}  // namespace

RunConfig default_config() { return RunConfig{}; }

const std::vector<std::string>& config_keys() { return registry().order; }

std::string get_entry(const RunConfig& cfg, const std::string& key) {
  const auto& reg = registry();
  auto it = reg.entries.find(normalize_key(key));
  if (it == reg.entries.end()) throw ConfigError("unknown config key: " + key);
  return it->second.get(cfg);
}

void set_entry(RunConfig& cfg, const std::string& key, const std::string& value) {
  const auto& reg = registry();
  const std::string k = normalize_key(key);
  auto it = reg.entries.find(k);
  if (it == reg.entries.end()) throw ConfigError("unknown config key: " + key);
  it->second.set(cfg, value, k);
}

std::vector<std::string> apply_config_file(RunConfig& cfg, const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::vector<std::string> applied;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    // Trim both ends.
    const auto begin = line.find_first_not_of(" \t\r");
    if (begin == std::string::npos) continue;
    const auto end = line.find_last_not_of(" \t\r");
    line = line.substr(begin, end - begin + 1);
    const size_t eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + " is not key=value: " + line);
    std::string key = line.substr(0, eq);
    std::string value = line.substr(eq + 1);
    const auto key_end = key.find_last_not_of(" \t");
    key = key_end == std::string::npos ? "" : key.substr(0, key_end + 1);
    const auto value_begin = value.find_first_not_of(" \t");
    value = value_begin == std::string::npos ? "" : value.substr(value_begin);
    if (key.empty())
      throw ConfigError("config line " + std::to_string(lineno) + " has an empty key");
    set_entry(cfg, key, value);
    applied.push_back(normalize_key(key));
  }
  return applied;
}

void write_manifest(const std::string& path, const RunConfig& cfg) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write manifest: " + path);
  for (const auto& key : config_keys()) out << key << " = " << get_entry(cfg, key) << '\n';
  if (!out) throw ConfigError("manifest write failed: " + path);
}

RunConfig load_manifest(const std::string& path) {
  RunConfig cfg = default_config();
  apply_config_file(cfg, path);
  return cfg;
}

bool env_seed(std::uint64_t& out) {
  const char* raw = std::getenv("TSASTAT_SEED");
  if (raw == nullptr || *raw == '\0') return false;
  const std::string value(raw);
  size_t consumed = 0;
  std::uint64_t parsed = 0;
  try {
    parsed = std::stoull(value, &consumed);
  } catch (const std::exception&) {
    consumed = 0;
  }
  if (consumed != value.size())
    throw ConfigError("TSASTAT_SEED is not an unsigned integer: " + value);
  out = parsed;
  return true;
}

}  // namespace tsastat
