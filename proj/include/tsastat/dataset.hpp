#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "tsastat/tensor.hpp"

namespace tsastat {

/// In-memory dataset: one n-by-T tensor per instance plus contiguous 0-based labels.
/// class_names records the original label text in label-id order, so files written
/// back out carry the labels they came in with.
struct LabeledDataset {
  std::string name;
  int class_count = 0;
  std::vector<Tensor> instances;
  std::vector<int> labels;
  std::vector<std::string> class_names;
  /// (instance, channel) pairs left unscaled by znormalize because sigma was 0.
  std::vector<std::pair<int, int>> unscaled_channels;

  int size() const { return static_cast<int>(instances.size()); }
};

/// Reads a label-first delimited file (tab, comma, or space separated). Each row is
/// one channel: label followed by T values. With channels > 1, that many consecutive
/// rows form one instance and must carry the same label. Labels are remapped to
/// contiguous 0-based ids; the mapping sorts numerically when every label parses as
/// a number, lexicographically otherwise.
LabeledDataset load_delimited(const std::string& path, int channels = 1);

/// Same, but labels must already appear in class_names (train-time mapping); an
/// unseen label is an error instead of a new class.
LabeledDataset load_delimited(const std::string& path, int channels,
                              const std::vector<std::string>& class_names);

/// Writes the dataset in the load_delimited layout with 17 significant digits,
/// which round-trips doubles exactly.
void save_delimited(const std::string& path, const LabeledDataset& ds);

/// Cylinder-bell-funnel generator: 3 classes, random onset/duration/amplitude,
/// unit Gaussian noise. Instances are grouped by class, count per class each.
LabeledDataset gen_cbf(int count_per_class, int steps = 128, std::uint64_t seed = 0);

/// Noise-free class template used by gen_cbf, exposed for shape checks.
Vector cbf_template(int label, int steps = 128);

/// Synthetic-control generator: 6 classes (normal, cyclic, increasing trend,
/// decreasing trend, upward shift, downward shift).
LabeledDataset gen_synthetic_control(int count_per_class, int steps = 30,
                                     std::uint64_t seed = 0);

/// Per-channel per-instance standardization to mean 0 and std 1. A constant
/// channel is left untouched and recorded in unscaled_channels.
LabeledDataset znormalize(const LabeledDataset& ds);

/// Stratified split into one part per fraction. Fractions must sum to 1. Within
/// each class, instances are shuffled with the seed and dealt out so every part's
/// per-class count is within 1 of the exact proportion.
std::vector<LabeledDataset> split(const LabeledDataset& ds,
                                  const std::vector<double>& fractions,
                                  std::uint64_t seed);

}  // namespace tsastat
