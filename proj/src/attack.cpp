#include "tsastat/attack.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "tsastat/errors.hpp"
#include "tsastat/random.hpp"

namespace tsastat {

namespace {

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

std::vector<StatFeature> loss_features(const AttackConfig& cfg) {
  return cfg.features.empty() ? default_pool_skewness() : cfg.features;
}

void validate(const Network& net, const Tensor& x, const AttackConfig& cfg) {
  require(cfg.rho < 0.0, "attack: rho must be negative");
  require(cfg.eta > 0.0, "attack: eta must be positive");
  require(cfg.max_iters >= 1, "attack: max_iters must be at least 1");
  require(cfg.loss_threshold > cfg.rho, "attack: loss threshold below the hinge floor");
  require(cfg.init_scale >= 0.0, "attack: init_scale must be nonnegative");
  require(cfg.target_class >= 0 && cfg.target_class < net.label_count(),
          "attack: target class out of range");
  require(net.label_count() >= 2, "attack: need at least two classes");
  require(x.rows() == net.channels() && x.cols() == net.steps(),
          "attack: input shape does not match network");
}

/// The shared optimization graph: input leaf -> transform -> logits ->
/// hinge label loss, plus the statistical term computed between the
/// transform output and the input leaf with identical in-graph formulas.
struct AttackGraph {
  Graph g;
  Graph::NodeId loss = -1;
  std::vector<std::string> names;
  int degree;

  AttackGraph(const Network& net, const AttackConfig& cfg) : degree(cfg.degree) {
    Graph::NodeId x = g.leaf("x", net.channels(), net.steps(), /*differentiable=*/false);
    Graph::NodeId pt = transform_node(g, x, cfg.degree);
    names = coeff_leaf_names(cfg.degree);
    Graph::NodeId logits = net.logits_node(g, pt, /*trainable=*/false);
    Graph::NodeId margin =
        g.sub(g.max_excluding(logits, cfg.target_class), g.pick(logits, cfg.target_class));
    Graph::NodeId label = g.max2(margin, g.constant(scalar_tensor(cfg.rho), "rho"));
    loss = g.scale(label, cfg.beta_label);
    if (cfg.beta_stat != 0.0)
      loss = g.add(loss, g.scale(stat_loss_between(g, pt, x, loss_features(cfg), cfg.norm),
                                 cfg.beta_stat));
    g.mark_output("loss", loss);
  }

  void bind_input(const Tensor& x) { g.bind("x", x); }
  void bind_coeffs(const PolyTransform& t) { bind_transform(g, t); }
  PolyTransform coeffs() const { return read_transform(g, degree); }

  double eval() {
    g.forward();
    const double value = g.value(loss)(0, 0);
    if (!std::isfinite(value)) throw NumericalError("attack loss went non-finite");
    return value;
  }

  /// One plain gradient-descent step on the coefficients; assumes eval()
  /// ran on the current bindings.
  void step(double eta) {
    g.backward(loss);
    for (const std::string& name : names) g.leaf_value(name) -= eta * g.leaf_gradient(name);
  }
};

AttackResult finish(const Network& net, const Tensor& x, const AttackConfig& cfg,
                    PolyTransform transform, double loss, int iterations, int source) {
  AttackResult r;
  transform.source_class = source;
  r.adversarial = apply(transform, x);
  r.transform = std::move(transform);
  r.final_loss = loss;
  r.iterations_used = iterations;
  r.source_class = source;
  r.predicted = net.predict(r.adversarial);
  r.succeeded = r.predicted == cfg.target_class;
  r.stat_deviations = stat_deviations(r.adversarial, x, loss_features(cfg), cfg.norm);
  return r;
}

}  // namespace

AttackResult instance_attack(const Network& net, const Tensor& x, const AttackConfig& cfg) {
  validate(net, x, cfg);
  const int source = net.predict(x);

  if (source == cfg.target_class) {
    // Already classified as the target: nothing to optimize. The label term
    // is computed directly; the statistical term is exactly zero.
    Vector z = net.logits(x);
    double other = -std::numeric_limits<double>::infinity();
    for (int y = 0; y < net.label_count(); ++y)
      if (y != cfg.target_class) other = std::max(other, z[y]);
    const double label_loss = std::max(other - z[cfg.target_class], cfg.rho);
    AttackResult r = finish(net, x, cfg, identity_init(x.rows(), x.cols(), cfg.degree),
                            cfg.beta_label * label_loss, 0, source);
    return r;
  }

  AttackGraph ag(net, cfg);
  ag.bind_input(x);
  ag.bind_coeffs(random_init(x.rows(), x.cols(), cfg.degree, cfg.init_scale,
                             derive_seed(cfg.seed, static_cast<std::uint64_t>(source))));

  double best_loss = std::numeric_limits<double>::infinity();
  PolyTransform best;
  int best_iters = 0;
  for (int it = 0; it <= cfg.max_iters; ++it) {
    const double loss = ag.eval();
    if (loss < best_loss) {
      best_loss = loss;
      best = ag.coeffs();
      best_iters = it;
    }
    if (loss < cfg.loss_threshold)
      return finish(net, x, cfg, ag.coeffs(), loss, it, source);
    if (it == cfg.max_iters) break;
    ag.step(cfg.eta);
  }
  return finish(net, x, cfg, std::move(best), best_loss, best_iters, source);
}

TransformBundle universal_attack(const Network& net, const std::vector<Tensor>& inputs,
                                 const AttackConfig& cfg, double e_t, int max_epochs) {
  require(!inputs.empty(), "universal attack: empty input list");
  require(e_t >= 0.0 && e_t < 1.0, "universal attack: e_t must be in [0, 1)");
  require(max_epochs >= 1, "universal attack: max_epochs must be at least 1");
  for (const Tensor& x : inputs) validate(net, x, cfg);

  TransformBundle bundle;
  for (int c = 0; c < net.label_count(); ++c) {
    bundle[c] = identity_init(net.channels(), net.steps(), cfg.degree);
    bundle[c].source_class = c;
  }
  std::vector<int> source(inputs.size());
  for (size_t i = 0; i < inputs.size(); ++i) source[i] = net.predict(inputs[i]);

  if (fooling_rate(net, bundle, inputs, cfg.target_class) >= 1.0 - e_t) return bundle;

  AttackGraph ag(net, cfg);
  std::set<int> randomized;
  for (int epoch = 0; epoch < max_epochs; ++epoch) {
    for (size_t i = 0; i < inputs.size(); ++i) {
      const int c = source[i];
      if (c == cfg.target_class) continue;
      if (randomized.insert(c).second) {
        bundle[c] = random_init(net.channels(), net.steps(), cfg.degree, cfg.init_scale,
                                derive_seed(cfg.seed, static_cast<std::uint64_t>(c)));
        bundle[c].source_class = c;
      }
      ag.bind_input(inputs[i]);
      ag.bind_coeffs(bundle[c]);
      ag.eval();
      ag.step(cfg.eta);
      PolyTransform updated = ag.coeffs();
      updated.source_class = c;
      bundle[c] = std::move(updated);
    }
    if (fooling_rate(net, bundle, inputs, cfg.target_class) >= 1.0 - e_t) break;
  }
  return bundle;
}

double fooling_rate(const Network& net, const TransformBundle& bundle,
                    const std::vector<Tensor>& inputs, int target_class) {
  require(!inputs.empty(), "fooling_rate: empty input list");
  size_t fooled = 0;
  for (const Tensor& x : inputs) {
    const int c = net.predict(x);
    auto it = bundle.find(c);
    const Tensor adv = it == bundle.end() ? x : apply(it->second, x);
    if (net.predict(adv) == target_class) ++fooled;
  }
  return static_cast<double>(fooled) / static_cast<double>(inputs.size());
}

double alpha_eff(const std::vector<AttackResult>& results) {
  require(!results.empty(), "alpha_eff: empty result list");
  size_t ok = 0;
  for (const AttackResult& r : results) ok += r.succeeded ? 1 : 0;
  return static_cast<double>(ok) / static_cast<double>(results.size());
}

Tensor fgs_attack(const Network& net, const Tensor& x, double eps) {
  require(eps >= 0.0, "fgs: eps must be nonnegative");
  Graph g;
  Graph::NodeId input = g.leaf("x", x.rows(), x.cols());
  Graph::NodeId logits = net.logits_node(g, input, /*trainable=*/false);
  Graph::NodeId ce = g.softmax_cross_entropy(logits, net.predict(x));
  g.bind("x", x);
  g.forward();
  g.backward(ce);
  return x + eps * g.leaf_gradient("x").sign();
}

Tensor pgd_attack(const Network& net, const Tensor& x, double eps, int steps, double step_size) {
  require(eps >= 0.0, "pgd: eps must be nonnegative");
  require(steps >= 1, "pgd: needs at least one step");
  require(step_size >= 0.0, "pgd: step size must be nonnegative");
  Graph g;
  Graph::NodeId input = g.leaf("x", x.rows(), x.cols());
  Graph::NodeId logits = net.logits_node(g, input, /*trainable=*/false);
  Graph::NodeId ce = g.softmax_cross_entropy(logits, net.predict(x));
  Tensor cur = x;
  for (int s = 0; s < steps; ++s) {
    g.bind("x", cur);
    g.forward();
    g.backward(ce);
    cur += step_size * g.leaf_gradient("x").sign();
    cur = cur.min(x + eps).max(x - eps);  // exact projection onto the inf-ball
  }
  return cur;
}

AttackKind attack_kind_from_name(const std::string& name) {
  if (name == "tsastat") return AttackKind::TsaStat;
  if (name == "fgs") return AttackKind::Fgs;
  if (name == "pgd") return AttackKind::Pgd;
  throw ConfigError("unknown attack kind '" + name + "' (expected tsastat, fgs or pgd)");
}

std::string attack_kind_name(AttackKind k) {
  switch (k) {
    case AttackKind::TsaStat: return "tsastat";
    case AttackKind::Fgs: return "fgs";
    case AttackKind::Pgd: return "pgd";
  }
  return "?";
}

AdvTrainReport adversarial_train(Network& net, const std::vector<Tensor>& train_x,
                                 const std::vector<int>& train_y,
                                 const std::vector<Tensor>& test_x,
                                 const std::vector<int>& test_y, const AdvTrainConfig& cfg) {
  require(!train_x.empty() && train_x.size() == train_y.size(),
          "adversarial_train: bad training set");
  require(cfg.augment_count >= 0, "adversarial_train: augment_count must be nonnegative");

  AdvTrainReport report;
  report.clean_before = test_x.empty() ? 0.0 : accuracy(net, test_x, test_y);

  const size_t total = train_x.size();
  const size_t count =
      cfg.augment_count == 0 ? total : std::min(static_cast<size_t>(cfg.augment_count), total);
  std::vector<size_t> order(total);
  std::iota(order.begin(), order.end(), size_t{0});
  auto rng = make_rng(derive_seed(cfg.train.seed, 0xADF00Du));
  std::shuffle(order.begin(), order.end(), rng);

  std::vector<Tensor> aug_x = train_x;
  std::vector<int> aug_y = train_y;
  for (size_t j = 0; j < count; ++j) {
    const size_t idx = order[j];
    Tensor adv;
    switch (cfg.kind) {
      case AttackKind::TsaStat: {
        AttackConfig ac = cfg.attack;
        ac.target_class = (train_y[idx] + 1) % net.label_count();
        ac.seed = derive_seed(cfg.attack.seed, idx);
        adv = instance_attack(net, train_x[idx], ac).adversarial;
        break;
      }
      case AttackKind::Fgs:
        adv = fgs_attack(net, train_x[idx], cfg.eps);
        break;
      case AttackKind::Pgd:
        adv = pgd_attack(net, train_x[idx], cfg.eps, cfg.pgd_steps, cfg.pgd_step_size);
        break;
    }
    aug_x.push_back(std::move(adv));
    aug_y.push_back(train_y[idx]);  // adversarial copies keep the true label
  }
  report.augmented = static_cast<int>(count);
  report.history = train(net, aug_x, aug_y, test_x, test_y, cfg.train);
  report.clean_after = test_x.empty() ? 0.0 : accuracy(net, test_x, test_y);
  return report;
}

}  // namespace tsastat
