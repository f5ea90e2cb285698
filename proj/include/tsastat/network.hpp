#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tsastat/autodiff.hpp"
#include "tsastat/tensor.hpp"

namespace tsastat {

/// 1D-CNN classifiers over n x T series. Three stock architectures:
///   a0: Conv(66,k12) -> Pool(12) -> Dense(1024)
///   a1: Conv(20,k12) -> Pool(2)  -> Dense(512)
///   a2: Conv(100,k5) -> Conv(50,k5) -> Pool(4) -> Dense(200) -> Dense(100)
/// each with ReLU after every conv and hidden dense layer and a linear
/// output layer producing one logit per class. Convolutions are valid-mode
/// stride 1; pooling stride equals the pool width with the remainder
/// dropped.
enum class LayerKind { Conv1D, MaxPool, Dense, Relu, Flatten, OutputDense };

struct LayerSpec {
  LayerKind kind;
  int a = 0;  // Conv1D: filters; MaxPool: width; Dense: units
  int b = 0;  // Conv1D: kernel size
};

struct ArchSpec {
  std::string name;
  std::vector<LayerSpec> layers;
};

ArchSpec arch_by_name(const std::string& name);

class Network {
public:
  /// He-uniform fan-in initialized weights, zero biases, seedable.
  static Network make(const std::string& arch_name, Eigen::Index channels,
                      Eigen::Index steps, int label_count, std::uint64_t seed);
  static Network make_custom(ArchSpec arch, Eigen::Index channels, Eigen::Index steps,
                             int label_count, std::uint64_t seed);

  /// Pre-softmax scores, one per class. Stateless and safe to call from
  /// concurrent threads on a frozen network.
  Vector logits(const Tensor& x) const;
  /// argmax of logits; ties go to the lowest class id.
  int predict(const Tensor& x) const;

  /// Append the network's computation to a graph reading from node x.
  /// trainable=true creates differentiable parameter leaves (bound to the
  /// current values) so optimizers can update them through leaf_value();
  /// trainable=false bakes the parameters in as constants for attacks that
  /// only need gradients with respect to the input.
  Graph::NodeId logits_node(Graph& g, Graph::NodeId x, bool trainable = false) const;

  /// Copy parameters back from a graph built with trainable=true.
  void absorb_parameters(const Graph& g);

  const ArchSpec& arch() const { return arch_; }
  Eigen::Index channels() const { return channels_; }
  Eigen::Index steps() const { return steps_; }
  int label_count() const { return label_count_; }
  std::uint64_t init_seed() const { return init_seed_; }

  const std::vector<std::pair<std::string, Tensor>>& parameters() const { return params_; }
  Tensor& parameter(const std::string& name);

  void save(const std::string& path) const;
  static Network load(const std::string& path);

private:
  ArchSpec arch_;
  Eigen::Index channels_ = 0;
  Eigen::Index steps_ = 0;
  int label_count_ = 0;
  std::uint64_t init_seed_ = 0;
  std::vector<std::pair<std::string, Tensor>> params_;  // checkpoint order
};

int argmax(const Vector& v);

struct EpochStats {
  int epoch = 0;
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
};

struct TrainConfig {
  int epochs = 50;
  int batch = 32;
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::uint64_t seed = 0;
  bool verbose = false;
};

/// Mini-batch SGD with momentum on softmax cross-entropy. Deterministic
/// under a fixed seed (per-epoch derived shuffle). Throws NumericalError if
/// the loss ever goes non-finite. val_x may be empty (val_accuracy 0).
std::vector<EpochStats> train(Network& net, const std::vector<Tensor>& x,
                              const std::vector<int>& y, const std::vector<Tensor>& val_x,
                              const std::vector<int>& val_y, const TrainConfig& cfg);

/// Fraction of examples whose prediction matches the label.
double accuracy(const Network& net, const std::vector<Tensor>& x, const std::vector<int>& y);

}  // namespace tsastat
