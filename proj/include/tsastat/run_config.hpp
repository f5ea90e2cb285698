#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace tsastat {

/// Fully resolved settings for one CLI run. Every field has a usable default;
/// a config file, then command-line flags, override it in that order. The text
/// form (write_manifest) lists every field, so a manifest reloads as a config
/// file and reproduces the run exactly.
struct RunConfig {
  std::string command;

  // Data source: either a delimited file or a built-in generator (cbf, sc).
  std::string dataset;
  std::string generate = "cbf";
  int count = 100;
  int channels = 1;
  double train_frac = 0.5;

  // Training.
  std::string arch = "a1";
  int epochs = 50;
  int batch = 32;
  double learning_rate = 0.01;
  double momentum = 0.9;

  // Attack.
  int target_class = 0;
  double rho = -20.0;
  double beta_label = 1.0;
  double beta_stat = 1.0;
  int degree = 2;
  std::string features;
  std::string norm = "linf";
  double eta = 0.01;
  int max_iters = 5000;
  double loss_threshold = 0.1;
  double init_scale = 0.01;
  int attack_count = 100;
  bool universal = false;
  double fool_target = 0.5;
  int universal_epochs = 20;
  std::string attack_kind = "tsastat";
  double eps = 0.2;
  int pgd_steps = 10;
  double pgd_step_size = 0.05;

  // Certification.
  double mu_p = 0.1;
  double sigma = 1.0;
  int max_samples = 5000;
  bool independent_draws = false;
  int cert_count = 50;
  std::string delta_grid = "0,0.05,0.1,0.15,0.2";

  // Adversarial training.
  int augment_count = 0;
  bool gaussian_arm = false;

  // Files and execution.
  std::string checkpoint;
  std::string eval_checkpoint;
  std::string transform_path;
  std::string out = "runs/out";
  std::uint64_t seed = 42;
  int workers = 0;
  bool plots = false;
  bool verbose = false;
};

RunConfig default_config();

/// Keys in manifest order. Keys use underscores; set_entry also accepts dashes.
const std::vector<std::string>& config_keys();

std::string get_entry(const RunConfig& cfg, const std::string& key);

/// Parses and assigns one key/value pair; unknown keys and malformed values
/// raise ConfigError.
void set_entry(RunConfig& cfg, const std::string& key, const std::string& value);

/// Reads a flat key=value file ('#' starts a comment, blank lines ignored).
/// Returns the normalized keys that were assigned, in file order.
std::vector<std::string> apply_config_file(RunConfig& cfg, const std::string& path);

/// Writes every key in fixed order. Doubles use 17 significant digits, so a
/// reloaded manifest reproduces the config bit for bit.
void write_manifest(const std::string& path, const RunConfig& cfg);

/// Defaults plus the manifest file.
RunConfig load_manifest(const std::string& path);

/// True when TSASTAT_SEED is set; the parsed value lands in `out`.
bool env_seed(std::uint64_t& out);

}  // namespace tsastat
