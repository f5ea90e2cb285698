#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "tsastat/autodiff.hpp"
#include "tsastat/tensor.hpp"

namespace tsastat {

/// Elementwise polynomial transformation of an n x T series:
///   PT(X) = sum_k a_k * X^k   (Hadamard powers, a_k all n x T).
/// Degree 0 reproduces constant additive fields; degree >= 1 adds
/// input-dependent terms that no constant additive perturbation can encode.
struct PolyTransform {
  std::vector<Tensor> coeffs;  // a_0 .. a_d, one shared shape
  int source_class = -1;       // class this transform was fit for, -1 if n/a

  int degree() const { return static_cast<int>(coeffs.size()) - 1; }
  Eigen::Index rows() const { return coeffs.empty() ? 0 : coeffs.front().rows(); }
  Eigen::Index cols() const { return coeffs.empty() ? 0 : coeffs.front().cols(); }
};

/// Per-class transforms produced by universal attacks.
using TransformBundle = std::map<int, PolyTransform>;

/// a_1 = 1, everything else 0: apply() is the identity map.
PolyTransform identity_init(Eigen::Index n, Eigen::Index T, int degree);

/// Identity plus uniform noise in [-scale, scale] on every coefficient.
PolyTransform random_init(Eigen::Index n, Eigen::Index T, int degree, double scale,
                          std::uint64_t seed);

Tensor apply(const PolyTransform& t, const Tensor& x);

/// Degree-1 transform with |a_0| > eps somewhere while apply(x) reproduces x
/// up to rounding error: a_0 = 2*eps and a_1 = 1 - a_0/x wherever
/// |x| > 1e-6, identity elsewhere.
/// The input-dependent a_1 term cancels a_0, which a constant additive field
/// cannot do. Throws if every channel of x is constant.
std::pair<PolyTransform, Tensor> theorem1_witness(const Tensor& x, double eps);

/// Graph node PT(x) with coefficient leaves named prefix+"0" .. prefix+"d"
/// (created here, differentiable, shaped like x).
Graph::NodeId transform_node(Graph& g, Graph::NodeId x, int degree,
                             const std::string& prefix = "a");

/// Coefficient leaf names used by transform_node.
std::vector<std::string> coeff_leaf_names(int degree, const std::string& prefix = "a");

/// Copy coefficients into / out of a graph built by transform_node.
void bind_transform(Graph& g, const PolyTransform& t, const std::string& prefix = "a");
PolyTransform read_transform(const Graph& g, int degree, const std::string& prefix = "a");

// JSON round trip ("tsastat-pt-v1"; bundles wrap a transform list).
std::string transform_to_json(const PolyTransform& t);
PolyTransform transform_from_json(const std::string& text);
void save_transform(const PolyTransform& t, const std::string& path);
PolyTransform load_transform(const std::string& path);
void save_bundle(const TransformBundle& bundle, const std::string& path);
TransformBundle load_bundle(const std::string& path);

}  // namespace tsastat
