#include "tsastat/stat_features.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "tsastat/errors.hpp"

namespace tsastat {

namespace {

constexpr int kModeBins = 16;

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

/// Linearly interpolated quantile of one channel (the common "type 7" rule:
/// h = (T-1)p, interpolate between the two bracketing order statistics).
double quantile(std::vector<double>& sorted_scratch, double p) {
  std::sort(sorted_scratch.begin(), sorted_scratch.end());
  const double h = static_cast<double>(sorted_scratch.size() - 1) * p;
  const size_t lo = static_cast<size_t>(h);
  if (lo + 1 >= sorted_scratch.size()) return sorted_scratch.back();
  const double frac = h - static_cast<double>(lo);
  return sorted_scratch[lo] + frac * (sorted_scratch[lo + 1] - sorted_scratch[lo]);
}

double channel_mode(const Tensor& x, Eigen::Index c) {
  const double lo = x.row(c).minCoeff();
  const double hi = x.row(c).maxCoeff();
  if (hi == lo) return lo;
  const double width = (hi - lo) / kModeBins;
  int counts[kModeBins] = {};
  for (Eigen::Index t = 0; t < x.cols(); ++t) {
    int bin = static_cast<int>((x(c, t) - lo) / width);
    bin = std::min(bin, kModeBins - 1);
    ++counts[bin];
  }
  int best = 0;
  for (int b = 1; b < kModeBins; ++b)
    if (counts[b] > counts[best]) best = b;  // tie keeps the lowest bin
  return lo + (best + 0.5) * width;
}

double vector_norm(const Tensor& v, StatNorm norm) {
  if (norm == StatNorm::Linf) return v.abs().maxCoeff();
  return std::sqrt(v.square().sum());
}

}  // namespace

std::string feature_name(StatFeature f) {
  switch (f) {
    case StatFeature::Mean: return "mean";
    case StatFeature::StdDev: return "stddev";
    case StatFeature::Skewness: return "skewness";
    case StatFeature::Kurtosis: return "kurtosis";
    case StatFeature::RootMeanSquare: return "rms";
    case StatFeature::Median: return "median";
    case StatFeature::Mode: return "mode";
    case StatFeature::InterquartileRange: return "iqr";
    case StatFeature::AutoCorrelation: return "autocorr";
    case StatFeature::Identity: return "identity";
  }
  return "?";
}

StatFeature feature_from_name(const std::string& name) {
  for (StatFeature f :
       {StatFeature::Mean, StatFeature::StdDev, StatFeature::Skewness, StatFeature::Kurtosis,
        StatFeature::RootMeanSquare, StatFeature::Median, StatFeature::Mode,
        StatFeature::InterquartileRange, StatFeature::AutoCorrelation, StatFeature::Identity})
    if (feature_name(f) == name) return f;
  throw ConfigError("unknown statistical feature '" + name + "'");
}

std::vector<StatFeature> parse_feature_list(const std::string& csv) {
  std::vector<StatFeature> ids;
  std::istringstream in(csv);
  std::string token;
  while (std::getline(in, token, ',')) {
    if (token.empty()) continue;
    ids.push_back(feature_from_name(token));
  }
  require(!ids.empty(), "empty feature list '" + csv + "'");
  return ids;
}

bool feature_differentiable(StatFeature f) {
  switch (f) {
    case StatFeature::Mean:
    case StatFeature::StdDev:
    case StatFeature::Skewness:
    case StatFeature::Kurtosis:
    case StatFeature::RootMeanSquare:
    case StatFeature::Identity:
      return true;
    default:
      return false;
  }
}

std::vector<StatFeature> default_pool_skewness() {
  return {StatFeature::Mean, StatFeature::StdDev, StatFeature::Skewness,
          StatFeature::RootMeanSquare};
}

std::vector<StatFeature> default_pool_kurtosis() {
  return {StatFeature::Mean, StatFeature::StdDev, StatFeature::Kurtosis,
          StatFeature::RootMeanSquare};
}

Tensor compute_feature(const Tensor& x, StatFeature f) {
  const Eigen::Index n = x.rows();
  const Eigen::Index T = x.cols();
  require(n >= 1 && T >= 1, "compute_feature: empty series");
  const double invT = 1.0 / static_cast<double>(T);

  auto centered_moment = [&](int k) {
    Tensor mu = x.rowwise().mean();
    Tensor centered = x - mu.replicate(1, T);
    Tensor powed = centered;
    for (int i = 1; i < k; ++i) powed *= centered;
    return Tensor(powed.rowwise().sum() * invT);
  };
  auto stddev = [&] { return Tensor(centered_moment(2).sqrt()); };
  auto check_sigma = [&](const Tensor& sigma, const char* what) {
    for (Eigen::Index c = 0; c < n; ++c)
      if (sigma(c, 0) <= 0.0)
        throw NumericalError(std::string(what) + ": channel " + std::to_string(c) +
                             " has zero standard deviation");
  };

  switch (f) {
    case StatFeature::Mean:
      return x.rowwise().mean();
    case StatFeature::StdDev:
      require(T >= 2, "stddev needs T >= 2");
      return stddev();
    case StatFeature::Skewness: {
      require(T >= 2, "skewness needs T >= 2");
      Tensor sigma = stddev();
      check_sigma(sigma, "skewness");
      return centered_moment(3) / (sigma * sigma * sigma);
    }
    case StatFeature::Kurtosis: {
      require(T >= 2, "kurtosis needs T >= 2");
      Tensor sigma = stddev();
      check_sigma(sigma, "kurtosis");
      return centered_moment(4) / (sigma * sigma * sigma * sigma) - 3.0;
    }
    case StatFeature::RootMeanSquare:
      return (x.square().rowwise().sum() * invT).sqrt();
    case StatFeature::Median: {
      Tensor out(n, 1);
      std::vector<double> scratch(static_cast<size_t>(T));
      for (Eigen::Index c = 0; c < n; ++c) {
        for (Eigen::Index t = 0; t < T; ++t) scratch[static_cast<size_t>(t)] = x(c, t);
        out(c, 0) = quantile(scratch, 0.5);
      }
      return out;
    }
    case StatFeature::Mode: {
      Tensor out(n, 1);
      for (Eigen::Index c = 0; c < n; ++c) out(c, 0) = channel_mode(x, c);
      return out;
    }
    case StatFeature::InterquartileRange: {
      Tensor out(n, 1);
      std::vector<double> scratch(static_cast<size_t>(T));
      for (Eigen::Index c = 0; c < n; ++c) {
        for (Eigen::Index t = 0; t < T; ++t) scratch[static_cast<size_t>(t)] = x(c, t);
        const double q3 = quantile(scratch, 0.75);  // scratch stays sorted
        const double q1 = quantile(scratch, 0.25);
        out(c, 0) = q3 - q1;
      }
      return out;
    }
    case StatFeature::AutoCorrelation: {
      // Lag-1 normalized autocovariance; a constant channel reports 0.
      require(T >= 2, "autocorr needs T >= 2");
      Tensor mu = x.rowwise().mean();
      Tensor centered = x - mu.replicate(1, T);
      Tensor out(n, 1);
      for (Eigen::Index c = 0; c < n; ++c) {
        const double denom = centered.row(c).square().sum();
        if (denom == 0.0) {
          out(c, 0) = 0.0;
          continue;
        }
        double num = 0.0;
        for (Eigen::Index t = 0; t + 1 < T; ++t) num += centered(c, t) * centered(c, t + 1);
        out(c, 0) = num / denom;
      }
      return out;
    }
    case StatFeature::Identity:
      return x;
  }
  throw ConfigError("compute_feature: unhandled feature");
}

std::vector<Tensor> feature_set(const Tensor& x, const std::vector<StatFeature>& ids) {
  require(!ids.empty(), "feature_set: empty feature list");
  std::vector<Tensor> out;
  out.reserve(ids.size());
  for (StatFeature f : ids) out.push_back(compute_feature(x, f));
  return out;
}

StatNorm norm_from_name(const std::string& name) {
  if (name == "linf") return StatNorm::Linf;
  if (name == "l2") return StatNorm::L2;
  throw ConfigError("unknown norm '" + name + "' (expected linf or l2)");
}

std::string norm_name(StatNorm n) { return n == StatNorm::Linf ? "linf" : "l2"; }

std::vector<double> stat_deviations(const Tensor& a, const Tensor& b,
                                    const std::vector<StatFeature>& ids, StatNorm norm) {
  require(same_shape(a, b), "stat_deviations: shape mismatch " + shape_string(a) + " vs " +
                                shape_string(b));
  std::vector<double> out;
  out.reserve(ids.size());
  for (StatFeature f : ids) {
    Tensor diff = compute_feature(a, f) - compute_feature(b, f);
    out.push_back(vector_norm(diff, norm));
  }
  return out;
}

double stat_distance(const Tensor& a, const Tensor& b, const std::vector<StatFeature>& ids,
                     StatNorm norm) {
  double total = 0.0;
  for (double d : stat_deviations(a, b, ids, norm)) total += d;
  return total;
}

Graph::NodeId feature_node(Graph& g, Graph::NodeId x, StatFeature f) {
  require(feature_differentiable(f),
          "feature '" + feature_name(f) + "' cannot be used in a differentiable loss");
  const Eigen::Index T = g.value(x).cols();
  const double invT = 1.0 / static_cast<double>(T);

  auto mean_node = [&] { return g.scale(g.row_sum(x), invT); };
  auto central = [&](int k) {
    Graph::NodeId centered = g.bcast_sub(x, mean_node());
    return g.scale(g.row_sum(g.pow_int(centered, k)), invT);
  };

  switch (f) {
    case StatFeature::Mean:
      return mean_node();
    case StatFeature::StdDev:
      return g.sqrt(central(2));
    case StatFeature::Skewness:
      return g.divide(central(3), g.pow_int(g.sqrt(central(2)), 3));
    case StatFeature::Kurtosis:
      return g.add_scalar(g.divide(central(4), g.pow_int(central(2), 2)), -3.0);
    case StatFeature::RootMeanSquare:
      return g.sqrt(g.scale(g.row_sum(g.pow_int(x, 2)), invT));
    case StatFeature::Identity:
      return x;
    default:
      throw ConfigError("feature '" + feature_name(f) + "' has no graph form");
  }
}

Graph::NodeId stat_loss_between(Graph& g, Graph::NodeId transformed, Graph::NodeId reference,
                                const std::vector<StatFeature>& ids, StatNorm norm) {
  require(!ids.empty(), "stat loss: empty feature list");
  require(same_shape(g.value(transformed), g.value(reference)),
          "stat loss: reference shape mismatch");
  Graph::NodeId total = -1;
  for (StatFeature f : ids) {
    Graph::NodeId diff = g.sub(feature_node(g, transformed, f), feature_node(g, reference, f));
    Graph::NodeId term = norm == StatNorm::Linf
                             ? g.max_all(g.abs(diff))
                             : g.sqrt(g.sum(g.pow_int(diff, 2)));
    total = total < 0 ? term : g.add(total, term);
  }
  return total;
}

Graph::NodeId stat_loss_node(Graph& g, Graph::NodeId transformed, const Tensor& reference,
                             const std::vector<StatFeature>& ids, StatNorm norm) {
  require(same_shape(g.value(transformed), reference),
          "stat loss: reference shape mismatch");
  return stat_loss_between(g, transformed, g.constant(reference, "stat_reference"), ids, norm);
}

}  // namespace tsastat
