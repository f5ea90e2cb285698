#pragma once

#include <string>
#include <vector>

#include "tsastat/autodiff.hpp"
#include "tsastat/tensor.hpp"

namespace tsastat {

/// Per-channel statistical features of a multivariate series stored as an
/// n x T array (one row per channel). All moments use the population (1/T)
/// convention, which makes RMS^2 = Mean^2 + StdDev^2 an exact identity.
enum class StatFeature {
  Mean,
  StdDev,
  Skewness,
  Kurtosis,
  RootMeanSquare,
  Median,
  Mode,
  InterquartileRange,
  AutoCorrelation,
  Identity
};

std::string feature_name(StatFeature f);
StatFeature feature_from_name(const std::string& name);
std::vector<StatFeature> parse_feature_list(const std::string& csv);

/// True for the features a gradient can flow through (the set allowed in
/// attack losses): Mean, StdDev, Skewness, Kurtosis, RootMeanSquare and
/// Identity. Median, Mode, InterquartileRange and AutoCorrelation are
/// evaluated numerically for reporting only.
bool feature_differentiable(StatFeature f);

/// The two default constraint pools used by the attacks.
std::vector<StatFeature> default_pool_skewness();
std::vector<StatFeature> default_pool_kurtosis();

/// One value per channel (n x 1), except Identity which returns the series
/// itself. Throws ConfigError for T too short and NumericalError for a
/// zero-variance channel under Skewness or Kurtosis.
Tensor compute_feature(const Tensor& x, StatFeature f);
std::vector<Tensor> feature_set(const Tensor& x, const std::vector<StatFeature>& ids);

enum class StatNorm { Linf, L2 };

StatNorm norm_from_name(const std::string& name);
std::string norm_name(StatNorm n);

/// Per-feature deviation ||S_i(a) - S_i(b)|| with the chosen norm over the
/// channel vector (or the full signal for Identity).
std::vector<double> stat_deviations(const Tensor& a, const Tensor& b,
                                    const std::vector<StatFeature>& ids,
                                    StatNorm norm = StatNorm::Linf);

/// Sum of the per-feature deviations.
double stat_distance(const Tensor& a, const Tensor& b, const std::vector<StatFeature>& ids,
                     StatNorm norm = StatNorm::Linf);

/// Graph node evaluating a differentiable feature of the n x T node x.
Graph::NodeId feature_node(Graph& g, Graph::NodeId x, StatFeature f);

/// Graph node for sum_i ||S_i(transformed) - S_i(reference)||. Both sides
/// use the same in-graph formulas, so the loss is exactly zero (with zero
/// gradient) when the two nodes carry identical values. All ids must be
/// differentiable.
Graph::NodeId stat_loss_between(Graph& g, Graph::NodeId transformed, Graph::NodeId reference,
                                const std::vector<StatFeature>& ids,
                                StatNorm norm = StatNorm::Linf);

/// Same loss against a fixed reference series baked in as a constant node.
Graph::NodeId stat_loss_node(Graph& g, Graph::NodeId transformed, const Tensor& reference,
                             const std::vector<StatFeature>& ids,
                             StatNorm norm = StatNorm::Linf);

}  // namespace tsastat
