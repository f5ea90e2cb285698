#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <random>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "tsastat/attack.hpp"
#include "tsastat/certify.hpp"
#include "tsastat/dataset.hpp"
#include "tsastat/errors.hpp"
#include "tsastat/network.hpp"
#include "tsastat/poly_transform.hpp"
#include "tsastat/random.hpp"
#include "tsastat/report.hpp"
#include "tsastat/run_config.hpp"
#include "tsastat/stat_features.hpp"

namespace fs = std::filesystem;
using namespace tsastat;

namespace {

// Fixed seed stream ids so every command derives the same data and model
// seeds from the run seed.
constexpr std::uint64_t kSeedData = 1;
constexpr std::uint64_t kSeedSplit = 2;
constexpr std::uint64_t kSeedInit = 3;
constexpr std::uint64_t kSeedTrain = 4;
constexpr std::uint64_t kSeedUniversal = 5;
constexpr std::uint64_t kSeedAdvAttack = 6;
constexpr std::uint64_t kSeedAdvTrain = 7;
constexpr std::uint64_t kSeedGaussNoise = 8;
constexpr std::uint64_t kSeedGaussTrain = 9;
constexpr std::uint64_t kSeedInstance = 0xA7700;
constexpr std::uint64_t kSeedCert = 0xCE8700;

const std::map<std::string, std::string>& flag_help() {
  static const std::map<std::string, std::string> help = {
      {"dataset", "Delimited label-first dataset file (overrides --generate)"},
      {"generate", "Built-in generator when no dataset file is given: cbf or sc"},
      {"count", "Instances per class for the generator"},
      {"channels", "Channels per instance when loading a dataset file"},
      {"train_frac", "Fraction of the data used for training (stratified)"},
      {"arch", "Network architecture: a0, a1, or a2"},
      {"epochs", "Training epochs"},
      {"batch", "Mini-batch size"},
      {"learning_rate", "SGD learning rate"},
      {"momentum", "SGD momentum"},
      {"target_class", "Label the attack drives predictions toward"},
      {"rho", "Confidence floor of the hinge label loss (negative)"},
      {"beta_label", "Weight of the label loss term"},
      {"beta_stat", "Weight of the statistical constraint term"},
      {"degree", "Polynomial transformation degree (0-3)"},
      {"features", "Comma list of constrained statistics (default mean,stddev,skewness,rms)"},
      {"norm", "Constraint norm: linf or l2"},
      {"eta", "Attack learning rate"},
      {"max_iters", "Gradient step budget per attack"},
      {"loss_threshold", "Stop when the combined loss falls below this"},
      {"init_scale", "Half-width of the uniform coefficient initialization"},
      {"attack_count", "Number of test instances to attack"},
      {"universal", "Optimize one transform per source class instead of per instance"},
      {"fool_target", "Universal mode: stop once this held-in fooling rate is reached"},
      {"universal_epochs", "Universal mode: maximum passes over the data"},
      {"attack_kind", "tsastat, fgs, or pgd"},
      {"eps", "Perturbation radius for fgs/pgd and Gaussian augmentation"},
      {"pgd_steps", "PGD iteration count"},
      {"pgd_step_size", "PGD per-step size"},
      {"mu_p", "Certification mean shift applied to every channel"},
      {"sigma", "Certification noise variance per channel"},
      {"max_samples", "Monte-Carlo samples per certified instance"},
      {"independent_draws", "Use independent noise for EP and E0 instead of paired draws"},
      {"cert_count", "Number of test instances to certify"},
      {"delta_grid", "Comma list of shift magnitudes for the accuracy curve"},
      {"augment_count", "Training inputs to attack for augmentation (0 = all)"},
      {"gaussian_arm", "Also retrain a Gaussian-noise-augmented comparison model"},
      {"checkpoint", "Model checkpoint to load"},
      {"eval_checkpoint", "Second checkpoint evaluated black-box on the results"},
      {"transform_path", "Existing transform bundle to evaluate instead of optimizing"},
      {"out", "Output directory for this run"},
      {"seed", "Run seed (TSASTAT_SEED is the fallback when unset)"},
      {"workers", "Worker threads (0 = all cores); results do not depend on it"},
      {"plots", "Also write SVG charts next to the CSV outputs"},
      {"verbose", "Print per-epoch progress to stderr"},
  };
  return help;
}

std::string dashed(const std::string& key) {
  std::string out = key;
  for (char& c : out)
    if (c == '_') c = '-';
  return out;
}

/// Collects which flags the user actually passed so the precedence
/// CLI > config file > defaults can be applied after parsing.
struct FlagCapture {
  CLI::App* cmd = nullptr;
  std::string config_path;
  std::map<std::string, std::string> values;
  std::vector<std::pair<std::string, CLI::Option*>> options;
  std::vector<std::pair<std::string, CLI::Option*>> toggles;

  explicit FlagCapture(CLI::App* app) : cmd(app) {
    cmd->add_option("--config", config_path, "Flat key=value config file");
  }
  void add(const std::vector<std::string>& keys) {
    for (const auto& key : keys) {
      auto* opt = cmd->add_option("--" + dashed(key), values[key], flag_help().at(key));
      options.emplace_back(key, opt);
    }
  }
  void add_toggles(const std::vector<std::string>& keys) {
    for (const auto& key : keys) {
      auto* opt = cmd->add_flag("--" + dashed(key), flag_help().at(key));
      toggles.emplace_back(key, opt);
    }
  }

  RunConfig resolve(const std::string& command) const {
    RunConfig cfg = default_config();
    std::vector<std::string> file_keys;
    if (!config_path.empty()) file_keys = apply_config_file(cfg, config_path);
    bool seed_given =
        std::find(file_keys.begin(), file_keys.end(), "seed") != file_keys.end();
    for (const auto& [key, opt] : options)
      if (opt->count() > 0) {
        set_entry(cfg, key, values.at(key));
        if (key == "seed") seed_given = true;
      }
    for (const auto& [key, opt] : toggles)
      if (opt->count() > 0) set_entry(cfg, key, "true");
    if (!seed_given) {
      std::uint64_t s = 0;
      if (env_seed(s)) cfg.seed = s;
    }
    cfg.command = command;
    return cfg;
  }
};

struct DataBundle {
  LabeledDataset train;
  LabeledDataset test;
};

DataBundle prepare_data(const RunConfig& cfg) {
  LabeledDataset all;
  if (!cfg.dataset.empty())
    all = load_delimited(cfg.dataset, cfg.channels);
  else if (cfg.generate == "cbf")
    all = gen_cbf(cfg.count, 128, derive_seed(cfg.seed, kSeedData));
  else if (cfg.generate == "sc")
    all = gen_synthetic_control(cfg.count, 30, derive_seed(cfg.seed, kSeedData));
  else
    throw ConfigError("unknown generator \"" + cfg.generate + "\" (expected cbf or sc)");
  all = znormalize(all);
  if (cfg.train_frac <= 0.0 || cfg.train_frac >= 1.0)
    throw ConfigError("train_frac must be strictly between 0 and 1");
  auto parts =
      split(all, {cfg.train_frac, 1.0 - cfg.train_frac}, derive_seed(cfg.seed, kSeedSplit));
  return {std::move(parts[0]), std::move(parts[1])};
}

AttackConfig attack_config(const RunConfig& cfg) {
  AttackConfig a;
  a.target_class = cfg.target_class;
  a.rho = cfg.rho;
  a.beta_label = cfg.beta_label;
  a.beta_stat = cfg.beta_stat;
  a.degree = cfg.degree;
  if (!cfg.features.empty()) a.features = parse_feature_list(cfg.features);
  a.eta = cfg.eta;
  a.max_iters = cfg.max_iters;
  a.loss_threshold = cfg.loss_threshold;
  a.norm = norm_from_name(cfg.norm);
  a.init_scale = cfg.init_scale;
  a.seed = cfg.seed;
  return a;
}

NoiseSpec noise_spec(const RunConfig& cfg, Eigen::Index channels) {
  NoiseSpec s;
  s.mu_p = Vector::Constant(channels, cfg.mu_p);
  s.sigma = diagonal_covariance(static_cast<int>(channels), cfg.sigma);
  s.max_samples = cfg.max_samples;
  s.independent_draws = cfg.independent_draws;
  s.workers = cfg.workers;
  return s;
}

std::vector<double> parse_grid(const std::string& csv) {
  std::vector<double> grid;
  std::string item;
  std::istringstream in(csv);
  while (std::getline(in, item, ',')) {
    size_t consumed = 0;
    double v = 0.0;
    try {
      v = std::stod(item, &consumed);
    } catch (const std::exception&) {
      consumed = 0;
    }
    if (consumed != item.size())
      throw ConfigError("delta_grid entry is not a number: \"" + item + "\"");
    grid.push_back(v);
  }
  if (grid.empty()) throw ConfigError("delta_grid is empty");
  return grid;
}

void start_run(const RunConfig& cfg) {
  fs::create_directories(cfg.out);
  write_manifest((fs::path(cfg.out) / "manifest.txt").string(), cfg);
}

Network require_checkpoint(const RunConfig& cfg) {
  if (cfg.checkpoint.empty())
    throw ConfigError("this command needs --checkpoint (train one with the train command)");
  return Network::load(cfg.checkpoint);
}

void write_history_csv(const std::string& path, const std::vector<EpochStats>& history) {
  CsvTable t;
  t.header = {"epoch", "train_loss", "train_accuracy", "val_accuracy"};
  for (const auto& e : history)
    t.rows.push_back({std::to_string(e.epoch), format_g17(e.train_loss),
                      format_g17(e.train_accuracy), format_g17(e.val_accuracy)});
  write_csv(path, t);
}

int cmd_train(const RunConfig& cfg) {
  start_run(cfg);
  DataBundle data = prepare_data(cfg);
  const Tensor& first = data.train.instances.at(0);
  Network net = Network::make(cfg.arch, first.rows(), first.cols(), data.train.class_count,
                              derive_seed(cfg.seed, kSeedInit));
  TrainConfig tc{cfg.epochs, cfg.batch,   cfg.learning_rate,
                 cfg.momentum, derive_seed(cfg.seed, kSeedTrain), cfg.verbose};
  auto history = train(net, data.train.instances, data.train.labels, data.test.instances,
                       data.test.labels, tc);
  const std::string ckpt = (fs::path(cfg.out) / "model.ckpt").string();
  net.save(ckpt);
  write_history_csv((fs::path(cfg.out) / "metrics.csv").string(), history);
  if (cfg.plots) {
    ChartSeries train_acc{"train accuracy", {}}, val_acc{"test accuracy", {}};
    for (const auto& e : history) {
      train_acc.points.emplace_back(e.epoch, e.train_accuracy);
      val_acc.points.emplace_back(e.epoch, e.val_accuracy);
    }
    write_svg_line_chart((fs::path(cfg.out) / "metrics.svg").string(), "training history",
                         "epoch", "accuracy", {train_acc, val_acc});
  }
  std::printf("clean_test_accuracy %s\n", format_g17(history.back().val_accuracy).c_str());
  std::printf("checkpoint %s\n", ckpt.c_str());
  return 0;
}

int attack_universal(const RunConfig& cfg, const DataBundle& data, const Network& net) {
  TransformBundle bundle;
  if (!cfg.transform_path.empty()) {
    bundle = load_bundle(cfg.transform_path);
  } else {
    AttackConfig base = attack_config(cfg);
    base.seed = derive_seed(cfg.seed, kSeedUniversal);
    bundle = universal_attack(net, data.train.instances, base, 1.0 - cfg.fool_target,
                              cfg.universal_epochs);
    save_bundle(bundle, (fs::path(cfg.out) / "transforms.json").string());
  }
  // Black-box transfer: evaluate the bundle on a second model without touching
  // its gradients.
  Network alt;
  const Network* eval_net = &net;
  if (!cfg.eval_checkpoint.empty()) {
    alt = Network::load(cfg.eval_checkpoint);
    eval_net = &alt;
  }

  CsvTable summary;
  summary.header = {"split", "count", "fooled", "fooling_rate"};
  double held_out = 0.0;
  for (const auto& [name, part] : {std::pair<const char*, const LabeledDataset&>{"train", data.train},
                                   {"test", data.test}}) {
    std::vector<Tensor> sources;
    for (const auto& x : part.instances)
      if (eval_net->predict(x) != cfg.target_class) sources.push_back(x);
    const double rate =
        sources.empty() ? 0.0 : fooling_rate(*eval_net, bundle, sources, cfg.target_class);
    const int fooled = static_cast<int>(std::lround(rate * static_cast<double>(sources.size())));
    summary.rows.push_back({name, std::to_string(sources.size()), std::to_string(fooled),
                            format_g17(rate)});
    if (std::string(name) == "test") held_out = rate;
  }
  write_csv((fs::path(cfg.out) / "universal_summary.csv").string(), summary);
  std::printf("universal_fooling_test %s\n", format_g17(held_out).c_str());
  return 0;
}

int cmd_attack(const RunConfig& cfg) {
  start_run(cfg);
  DataBundle data = prepare_data(cfg);
  Network net = require_checkpoint(cfg);
  if (cfg.universal) {
    if (cfg.attack_kind != "tsastat")
      throw ConfigError("universal mode supports only attack_kind tsastat");
    return attack_universal(cfg, data, net);
  }

  Network alt;
  const Network* transfer_net = nullptr;
  if (!cfg.eval_checkpoint.empty()) {
    alt = Network::load(cfg.eval_checkpoint);
    transfer_net = &alt;
  }

  const int count = std::min(cfg.attack_count, data.test.size());
  if (count < 1) throw ConfigError("no test instances to attack");
  fs::create_directories(fs::path(cfg.out) / "transforms");
  std::ofstream jsonl(fs::path(cfg.out) / "results.jsonl");
  if (!jsonl) throw ConfigError("cannot write results.jsonl under " + cfg.out);

  const bool baseline = cfg.attack_kind != "tsastat";
  if (baseline && cfg.attack_kind != "fgs" && cfg.attack_kind != "pgd")
    throw ConfigError("unknown attack_kind \"" + cfg.attack_kind + "\"");

  std::vector<AttackResult> results;
  int flipped = 0, transfer_hits = 0;
  std::map<int, std::pair<int, int>> per_source;  // source class -> (count, fooled)
  for (int i = 0; i < count; ++i) {
    const Tensor& x = data.test.instances[static_cast<size_t>(i)];
    nlohmann::json rec;
    rec["index"] = i;
    rec["true_label"] = data.test.labels[static_cast<size_t>(i)];
    if (!baseline) {
      AttackConfig ac = attack_config(cfg);
      ac.seed = derive_seed(cfg.seed, kSeedInstance + static_cast<std::uint64_t>(i));
      AttackResult r = instance_attack(net, x, ac);
      const std::string tpath = "transforms/instance_" + std::to_string(i) + ".json";
      save_transform(r.transform, (fs::path(cfg.out) / tpath).string());
      rec["source_class"] = r.source_class;
      rec["target_class"] = cfg.target_class;
      rec["predicted"] = r.predicted;
      rec["succeeded"] = r.succeeded;
      rec["iterations"] = r.iterations_used;
      rec["final_loss"] = r.final_loss;
      double worst = 0.0;
      for (double d : r.stat_deviations) worst = std::max(worst, d);
      rec["stat_deviation_max"] = worst;
      rec["transform"] = tpath;
      if (transfer_net != nullptr) {
        const int tp = transfer_net->predict(r.adversarial);
        rec["transfer_predicted"] = tp;
        if (tp == cfg.target_class) ++transfer_hits;
      }
      auto& bucket = per_source[r.source_class];
      ++bucket.first;
      if (r.succeeded) ++bucket.second;
      results.push_back(std::move(r));
    } else {
      const int source = net.predict(x);
      const Tensor adv = cfg.attack_kind == "fgs"
                             ? fgs_attack(net, x, cfg.eps)
                             : pgd_attack(net, x, cfg.eps, cfg.pgd_steps, cfg.pgd_step_size);
      const int predicted = net.predict(adv);
      rec["source_class"] = source;
      rec["predicted"] = predicted;
      rec["kind"] = cfg.attack_kind;
      rec["flipped"] = predicted != source;
      if (predicted != source) ++flipped;
      auto& bucket = per_source[source];
      ++bucket.first;
      if (predicted != source) ++bucket.second;
    }
    jsonl << rec.dump() << '\n';
  }

  CsvTable summary;
  if (!baseline) {
    const double ae = alpha_eff(results);
    summary.header = {"attack_kind", "target_class", "count", "succeeded", "alpha_eff"};
    int succeeded = 0;
    for (const auto& r : results) succeeded += r.succeeded ? 1 : 0;
    std::vector<std::string> row = {"tsastat", std::to_string(cfg.target_class),
                                    std::to_string(count), std::to_string(succeeded),
                                    format_g17(ae)};
    if (transfer_net != nullptr) {
      summary.header.push_back("transfer_alpha_eff");
      row.push_back(format_g17(static_cast<double>(transfer_hits) / count));
    }
    summary.rows.push_back(row);
    std::printf("alpha_eff %s\n", format_g17(ae).c_str());
  } else {
    summary.header = {"attack_kind", "count", "flipped", "flip_rate"};
    summary.rows.push_back({cfg.attack_kind, std::to_string(count), std::to_string(flipped),
                            format_g17(static_cast<double>(flipped) / count)});
    std::printf("flip_rate %s\n", format_g17(static_cast<double>(flipped) / count).c_str());
  }
  write_csv((fs::path(cfg.out) / "attack_summary.csv").string(), summary);

  if (cfg.plots && !per_source.empty()) {
    std::vector<std::string> labels;
    std::vector<double> rates;
    for (const auto& [cls, bucket] : per_source) {
      labels.push_back("class " + std::to_string(cls));
      rates.push_back(bucket.first > 0 ? static_cast<double>(bucket.second) / bucket.first : 0.0);
    }
    write_svg_bar_chart((fs::path(cfg.out) / "attack_rates.svg").string(),
                        "fooling rate by source class", labels, rates);
  }
  return 0;
}

struct CertRow {
  int index = 0;
  int true_label = 0;
  CertificationReport report;
};

std::vector<CertRow> certify_subset(const RunConfig& cfg, const Network& net,
                                    const LabeledDataset& part) {
  const int count = std::min(cfg.cert_count, part.size());
  if (count < 1) throw ConfigError("no test instances to certify");
  std::vector<CertRow> rows;
  for (int i = 0; i < count; ++i) {
    NoiseSpec spec = noise_spec(cfg, part.instances[static_cast<size_t>(i)].rows());
    spec.seed = derive_seed(cfg.seed, kSeedCert + static_cast<std::uint64_t>(i));
    CertRow row;
    row.index = i;
    row.true_label = part.labels[static_cast<size_t>(i)];
    row.report = certify(net, part.instances[static_cast<size_t>(i)], spec);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<double> curve_from(const std::vector<CertRow>& rows,
                               const std::vector<double>& grid) {
  std::vector<double> curve;
  for (double dh : grid) {
    int hit = 0;
    for (const auto& r : rows)
      if (r.report.verdict != Verdict::Declined && r.report.delta >= dh &&
          r.report.predicted_label == r.true_label)
        ++hit;
    curve.push_back(static_cast<double>(hit) / static_cast<double>(rows.size()));
  }
  return curve;
}

int cmd_certify(const RunConfig& cfg) {
  start_run(cfg);
  DataBundle data = prepare_data(cfg);
  Network net = require_checkpoint(cfg);
  auto rows = certify_subset(cfg, net, data.test);

  CsvTable cert;
  cert.header = {"index",  "true_label", "verdict",    "predicted_label",
                 "delta",  "alpha_star", "ep_top",     "samples"};
  for (const auto& r : rows)
    cert.rows.push_back({std::to_string(r.index), std::to_string(r.true_label),
                         verdict_name(r.report.verdict), std::to_string(r.report.predicted_label),
                         format_g17(r.report.delta), format_g17(r.report.alpha_star),
                         format_g17(r.report.ep.maxCoeff()), std::to_string(r.report.samples_used)});
  write_csv((fs::path(cfg.out) / "cert.csv").string(), cert);

  // Statistical-feature ranges implied by each certified shift. Both readings
  // of the skewness/kurtosis conversion are reported side by side with a flag
  // wherever they disagree.
  CsvTable bounds;
  bounds.header = {"index",        "channel",     "delta",        "rms_literal",
                   "rms_root",     "skew_literal", "skew_bound",  "skew_disagrees",
                   "kurt_literal", "kurt_bound",  "kurt_disagrees"};
  for (const auto& r : rows) {
    if (r.report.verdict == Verdict::Declined || r.report.delta <= 0.0) continue;
    const Tensor& x = data.test.instances[static_cast<size_t>(r.index)];
    std::vector<FeatureBounds> fb;
    try {
      fb = convert_bounds(r.report.delta, x);
    } catch (const NumericalError&) {
      continue;  // degenerate constant channel, nothing to report
    }
    for (size_t c = 0; c < fb.size(); ++c)
      bounds.rows.push_back({std::to_string(r.index), std::to_string(c),
                             format_g17(r.report.delta), format_g17(fb[c].rms_literal),
                             format_g17(fb[c].rms_root), format_g17(fb[c].skew_literal),
                             format_g17(fb[c].skew_bound), fb[c].skew_discrepancy ? "1" : "0",
                             format_g17(fb[c].kurt_literal), format_g17(fb[c].kurt_bound),
                             fb[c].kurt_discrepancy ? "1" : "0"});
  }
  write_csv((fs::path(cfg.out) / "bounds.csv").string(), bounds);

  const auto grid = parse_grid(cfg.delta_grid);
  const auto curve = curve_from(rows, grid);
  CsvTable curve_csv;
  curve_csv.header = {"delta_hat", "certified_accuracy"};
  for (size_t i = 0; i < grid.size(); ++i)
    curve_csv.rows.push_back({format_g17(grid[i]), format_g17(curve[i])});
  write_csv((fs::path(cfg.out) / "curve.csv").string(), curve_csv);

  if (cfg.plots) {
    ChartSeries s{"certified accuracy", {}};
    for (size_t i = 0; i < grid.size(); ++i) s.points.emplace_back(grid[i], curve[i]);
    write_svg_line_chart((fs::path(cfg.out) / "curve.svg").string(),
                         "certified accuracy vs shift", "delta_hat", "accuracy", {s});
  }
  std::printf("certified_at_0 %s\n", format_g17(curve.front()).c_str());
  return 0;
}

int cmd_advtrain(RunConfig cfg) {
  fs::create_directories(cfg.out);
  DataBundle data = prepare_data(cfg);

  Network base;
  const std::string base_ckpt = (fs::path(cfg.out) / "model.ckpt").string();
  if (!cfg.checkpoint.empty()) {
    base = Network::load(cfg.checkpoint);
  } else {
    const Tensor& first = data.train.instances.at(0);
    base = Network::make(cfg.arch, first.rows(), first.cols(), data.train.class_count,
                         derive_seed(cfg.seed, kSeedInit));
    TrainConfig tc{cfg.epochs, cfg.batch,   cfg.learning_rate,
                   cfg.momentum, derive_seed(cfg.seed, kSeedTrain), cfg.verbose};
    train(base, data.train.instances, data.train.labels, data.test.instances, data.test.labels,
          tc);
  }
  base.save(base_ckpt);
  const std::string adv_ckpt = (fs::path(cfg.out) / "model_adv.ckpt").string();
  // The manifest records both checkpoints; a rerun resumes from the saved
  // base model, which reproduces the original run exactly.
  cfg.checkpoint = base_ckpt;
  cfg.eval_checkpoint = adv_ckpt;
  write_manifest((fs::path(cfg.out) / "manifest.txt").string(), cfg);

  AdvTrainConfig ac;
  if (cfg.attack_kind == "tsastat")
    ac.kind = AttackKind::TsaStat;
  else if (cfg.attack_kind == "fgs")
    ac.kind = AttackKind::Fgs;
  else if (cfg.attack_kind == "pgd")
    ac.kind = AttackKind::Pgd;
  else
    throw ConfigError("unknown attack_kind \"" + cfg.attack_kind + "\"");
  ac.attack = attack_config(cfg);
  ac.attack.seed = derive_seed(cfg.seed, kSeedAdvAttack);
  ac.eps = cfg.eps;
  ac.pgd_steps = cfg.pgd_steps;
  ac.pgd_step_size = cfg.pgd_step_size;
  ac.augment_count = cfg.augment_count;
  ac.train = TrainConfig{cfg.epochs,   cfg.batch,
                         cfg.learning_rate, cfg.momentum,
                         derive_seed(cfg.seed, kSeedAdvTrain), cfg.verbose};

  Network hardened = base;
  AdvTrainReport rep = adversarial_train(hardened, data.train.instances, data.train.labels,
                                         data.test.instances, data.test.labels, ac);
  hardened.save(adv_ckpt);

  CsvTable table;
  table.header = {"arm", "clean_before", "clean_after", "augmented"};
  table.rows.push_back({"adversarial", format_g17(rep.clean_before), format_g17(rep.clean_after),
                        std::to_string(rep.augmented)});

  Network gaussian;
  bool has_gaussian = false;
  if (cfg.gaussian_arm) {
    // Comparison arm: same augmentation budget, plain Gaussian noise instead
    // of optimized transforms.
    gaussian = base;
    const int total = data.train.size();
    const int budget = cfg.augment_count > 0 ? std::min(cfg.augment_count, total) : total;
    std::vector<int> order(static_cast<size_t>(total));
    for (int i = 0; i < total; ++i) order[static_cast<size_t>(i)] = i;
    auto pick_rng = make_rng(derive_seed(cfg.seed, kSeedGaussNoise));
    std::shuffle(order.begin(), order.end(), pick_rng);
    std::vector<Tensor> aug_x = data.train.instances;
    std::vector<int> aug_y = data.train.labels;
    std::normal_distribution<double> normal(0.0, 1.0);
    for (int k = 0; k < budget; ++k) {
      const int idx = order[static_cast<size_t>(k)];
      Tensor noisy = data.train.instances[static_cast<size_t>(idx)];
      auto rng = make_rng(derive_seed(cfg.seed, kSeedGaussNoise + 1000 + static_cast<std::uint64_t>(idx)));
      for (Eigen::Index r = 0; r < noisy.rows(); ++r)
        for (Eigen::Index c = 0; c < noisy.cols(); ++c) noisy(r, c) += cfg.eps * normal(rng);
      aug_x.push_back(std::move(noisy));
      aug_y.push_back(data.train.labels[static_cast<size_t>(idx)]);
    }
    const double before = accuracy(gaussian, data.test.instances, data.test.labels);
    TrainConfig gt = ac.train;
    gt.seed = derive_seed(cfg.seed, kSeedGaussTrain);
    train(gaussian, aug_x, aug_y, data.test.instances, data.test.labels, gt);
    const double after = accuracy(gaussian, data.test.instances, data.test.labels);
    gaussian.save((fs::path(cfg.out) / "model_gaussian.ckpt").string());
    table.rows.push_back({"gaussian", format_g17(before), format_g17(after),
                          std::to_string(budget)});
    has_gaussian = true;
  }
  write_csv((fs::path(cfg.out) / "advtrain.csv").string(), table);

  // Certified-accuracy curves over the same instances and noise seeds for a
  // paired before/after comparison.
  const auto grid = parse_grid(cfg.delta_grid);
  auto before_rows = certify_subset(cfg, base, data.test);
  auto after_rows = certify_subset(cfg, hardened, data.test);
  const auto before_curve = curve_from(before_rows, grid);
  const auto after_curve = curve_from(after_rows, grid);
  std::vector<double> gaussian_curve;
  if (has_gaussian) gaussian_curve = curve_from(certify_subset(cfg, gaussian, data.test), grid);

  CsvTable curve_csv;
  curve_csv.header = {"delta_hat", "before", "after"};
  if (has_gaussian) curve_csv.header.push_back("gaussian");
  for (size_t i = 0; i < grid.size(); ++i) {
    std::vector<std::string> row = {format_g17(grid[i]), format_g17(before_curve[i]),
                                    format_g17(after_curve[i])};
    if (has_gaussian) row.push_back(format_g17(gaussian_curve[i]));
    curve_csv.rows.push_back(row);
  }
  write_csv((fs::path(cfg.out) / "curve.csv").string(), curve_csv);

  if (cfg.plots) {
    std::vector<ChartSeries> series(2);
    series[0].name = "before";
    series[1].name = "after";
    for (size_t i = 0; i < grid.size(); ++i) {
      series[0].points.emplace_back(grid[i], before_curve[i]);
      series[1].points.emplace_back(grid[i], after_curve[i]);
    }
    if (has_gaussian) {
      series.push_back({"gaussian", {}});
      for (size_t i = 0; i < grid.size(); ++i)
        series[2].points.emplace_back(grid[i], gaussian_curve[i]);
    }
    write_svg_line_chart((fs::path(cfg.out) / "curve.svg").string(),
                         "certified accuracy before and after", "delta_hat", "accuracy", series);
  }

  std::printf("clean_before %s\n", format_g17(rep.clean_before).c_str());
  std::printf("clean_after %s\n", format_g17(rep.clean_after).c_str());
  std::printf("certified_at_0_before %s\n", format_g17(before_curve.front()).c_str());
  std::printf("certified_at_0_after %s\n", format_g17(after_curve.front()).c_str());
  return 0;
}

int cmd_report(const RunConfig& cfg) {
  if (cfg.out.empty()) throw ConfigError("report needs a run directory");
  write_consolidated_report(cfg.out);
  write_manifest((fs::path(cfg.out) / "report_manifest.txt").string(), cfg);
  std::printf("report %s\n", (fs::path(cfg.out) / "report.md").string().c_str());
  return 0;
}

int dispatch(const RunConfig& cfg) {
  if (cfg.command == "train") return cmd_train(cfg);
  if (cfg.command == "attack") return cmd_attack(cfg);
  if (cfg.command == "certify") return cmd_certify(cfg);
  if (cfg.command == "advtrain") return cmd_advtrain(cfg);
  if (cfg.command == "report") return cmd_report(cfg);
  throw ConfigError("manifest has an unknown command: \"" + cfg.command + "\"");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Statistically constrained adversarial attacks and certification "
               "for time-series classifiers"};
  app.require_subcommand(1);

  auto* train_cmd = app.add_subcommand("train", "Train a 1D CNN and write a checkpoint");
  FlagCapture train_fc(train_cmd);
  train_fc.add({"dataset", "generate", "count", "channels", "train_frac", "arch", "epochs",
                "batch", "learning_rate", "momentum", "seed", "out", "workers"});
  train_fc.add_toggles({"plots", "verbose"});

  auto* attack_cmd =
      app.add_subcommand("attack", "Run instance, universal, or baseline attacks");
  FlagCapture attack_fc(attack_cmd);
  attack_fc.add({"dataset", "generate", "count", "channels", "train_frac", "checkpoint",
                 "eval_checkpoint", "transform_path", "target_class", "rho", "beta_label",
                 "beta_stat", "degree", "features", "norm", "eta", "max_iters",
                 "loss_threshold", "init_scale", "attack_count", "fool_target",
                 "universal_epochs", "attack_kind", "eps", "pgd_steps", "pgd_step_size",
                 "seed", "out", "workers"});
  attack_fc.add_toggles({"universal", "plots", "verbose"});

  auto* certify_cmd =
      app.add_subcommand("certify", "Monte-Carlo certification of mean-shift robustness");
  FlagCapture certify_fc(certify_cmd);
  certify_fc.add({"dataset", "generate", "count", "channels", "train_frac", "checkpoint",
                  "mu_p", "sigma", "max_samples", "cert_count", "delta_grid", "seed", "out",
                  "workers"});
  certify_fc.add_toggles({"independent_draws", "plots"});

  auto* advtrain_cmd =
      app.add_subcommand("advtrain", "Retrain with adversarial augmentation and compare");
  FlagCapture advtrain_fc(advtrain_cmd);
  advtrain_fc.add({"dataset", "generate", "count", "channels", "train_frac", "arch", "epochs",
                   "batch", "learning_rate", "momentum", "checkpoint", "attack_kind",
                   "target_class", "rho", "beta_label", "beta_stat", "degree", "features",
                   "norm", "eta", "max_iters", "loss_threshold", "init_scale", "eps",
                   "pgd_steps", "pgd_step_size", "augment_count", "mu_p", "sigma",
                   "max_samples", "cert_count", "delta_grid", "seed", "out", "workers"});
  advtrain_fc.add_toggles({"gaussian_arm", "plots", "verbose"});

  auto* report_cmd =
      app.add_subcommand("report", "Consolidate a run directory into markdown tables");
  std::string report_dir;
  report_cmd->add_option("dir", report_dir, "Run directory to summarize")->required();

  auto* rerun_cmd = app.add_subcommand("rerun", "Re-execute a command from its manifest");
  std::string manifest_path;
  rerun_cmd->add_option("manifest", manifest_path, "Manifest written by a previous run")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (app.got_subcommand(train_cmd)) return dispatch(train_fc.resolve("train"));
    if (app.got_subcommand(attack_cmd)) return dispatch(attack_fc.resolve("attack"));
    if (app.got_subcommand(certify_cmd)) return dispatch(certify_fc.resolve("certify"));
    if (app.got_subcommand(advtrain_cmd)) return dispatch(advtrain_fc.resolve("advtrain"));
    if (app.got_subcommand(report_cmd)) {
      RunConfig cfg = default_config();
      cfg.command = "report";
      cfg.out = report_dir;
      return cmd_report(cfg);
    }
    if (app.got_subcommand(rerun_cmd)) return dispatch(load_manifest(manifest_path));
    throw ConfigError("no command given");
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const NumericalError& e) {
    std::fprintf(stderr, "numerical error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
}
