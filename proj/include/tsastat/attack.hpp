#pragma once

#include <cstdint>
#include <vector>

#include "tsastat/network.hpp"
#include "tsastat/poly_transform.hpp"
#include "tsastat/stat_features.hpp"
#include "tsastat/tensor.hpp"

namespace tsastat {

/// Targeted attacks that optimize polynomial transformation coefficients by
/// plain gradient descent on
///   L = beta_label * max( max_{y != yt} Z_y(PT(X)) - Z_yt(PT(X)), rho )
///     + beta_stat  * sum_i || S_i(PT(X)) - S_i(X) ||
/// The statistical term is a soft constraint: deviations are driven down by
/// the loss and reported per feature, never enforced by projection.
struct AttackConfig {
  int target_class = 0;
  double rho = -20.0;         // confidence floor of the hinge, must be < 0
  double beta_label = 1.0;
  double beta_stat = 1.0;
  int degree = 2;             // polynomial degree, 0..3
  std::vector<StatFeature> features;  // empty means {mean, stddev, skewness, rms}
  double eta = 0.01;          // coefficient learning rate
  int max_iters = 5000;
  double loss_threshold = 0.1;
  StatNorm norm = StatNorm::Linf;
  double init_scale = 0.01;   // uniform half-width of the random start
  std::uint64_t seed = 0;
};

struct AttackResult {
  PolyTransform transform;
  Tensor adversarial;               // always exactly apply(transform, x)
  double final_loss = 0.0;
  int iterations_used = 0;          // gradient steps behind the returned coefficients
  bool succeeded = false;           // predict(net, adversarial) == target_class
  int source_class = -1;            // clean prediction of x
  int predicted = -1;               // prediction on adversarial
  std::vector<double> stat_deviations;  // one per configured feature
};

/// Optimize one transform for one input. Returns immediately with the
/// identity transform when x already predicts the target. Stops when the
/// loss drops under loss_threshold; if max_iters is exhausted, returns the
/// coefficients with the lowest loss seen.
AttackResult instance_attack(const Network& net, const Tensor& x, const AttackConfig& cfg);

/// Per-source-class transforms shared across inputs. Each epoch sweeps the
/// input list and applies one gradient step per input whose clean
/// prediction differs from the target, on the coefficients of that
/// prediction's class. Stops once the empirical fooling rate over the
/// inputs reaches 1 - e_t or max_epochs is exhausted. Classes that never
/// receive an update keep identity coefficients; a class's first update
/// starts from a seeded random initialization. With a single input the
/// update trajectory coincides with instance_attack under the same config.
TransformBundle universal_attack(const Network& net, const std::vector<Tensor>& inputs,
                                 const AttackConfig& cfg, double e_t, int max_epochs);

/// Fraction of inputs steered to the target when each input is transformed
/// by the bundle entry of its clean predicted class (identity if missing).
double fooling_rate(const Network& net, const TransformBundle& bundle,
                    const std::vector<Tensor>& inputs, int target_class);

/// Fraction of results with succeeded=true.
double alpha_eff(const std::vector<AttackResult>& results);

/// Additive baselines. Both perturb within the elementwise eps-ball around
/// x using the cross-entropy loss at x's own predicted label; pgd with one
/// step of size eps reproduces fgs exactly.
Tensor fgs_attack(const Network& net, const Tensor& x, double eps);
Tensor pgd_attack(const Network& net, const Tensor& x, double eps, int steps, double step_size);

enum class AttackKind { TsaStat, Fgs, Pgd };
AttackKind attack_kind_from_name(const std::string& name);
std::string attack_kind_name(AttackKind k);

struct AdvTrainConfig {
  AttackKind kind = AttackKind::TsaStat;
  AttackConfig attack;        // used by the tsastat kind; target is ignored
  double eps = 0.2;           // fgs / pgd radius
  int pgd_steps = 10;
  double pgd_step_size = 0.05;
  int augment_count = 0;      // how many training inputs to attack, 0 = all
  TrainConfig train;          // continued-training settings
};

struct AdvTrainReport {
  double clean_before = 0.0;  // test accuracy of the incoming network
  double clean_after = 0.0;
  int augmented = 0;          // adversarial examples added
  std::vector<EpochStats> history;
};

/// Attack a (seeded) sample of the training inputs, keep the true labels,
/// append the adversarial copies to the training set and continue training
/// the network on the mix. TSA-STAT generation targets each input's next
/// class id cyclically so every attack is a real label change.
AdvTrainReport adversarial_train(Network& net, const std::vector<Tensor>& train_x,
                                 const std::vector<int>& train_y,
                                 const std::vector<Tensor>& test_x,
                                 const std::vector<int>& test_y, const AdvTrainConfig& cfg);

}  // namespace tsastat
