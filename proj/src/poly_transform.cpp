#include "tsastat/poly_transform.hpp"

#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "tsastat/errors.hpp"
#include "tsastat/random.hpp"

namespace tsastat {

namespace {

using nlohmann::json;

constexpr const char* kTransformFormat = "tsastat-pt-v1";
constexpr const char* kBundleFormat = "tsastat-pt-bundle-v1";
constexpr double kWitnessFloor = 1e-6;  // |x| below this keeps identity coefficients

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

void check_transform(const PolyTransform& t) {
  require(!t.coeffs.empty(), "transform has no coefficients");
  require(t.degree() <= 3, "transform degree " + std::to_string(t.degree()) +
                               " unsupported (max 3)");
  for (const Tensor& a : t.coeffs)
    require(same_shape(a, t.coeffs.front()), "transform coefficients disagree on shape");
}

json transform_json(const PolyTransform& t) {
  json coeffs = json::array();
  for (const Tensor& a : t.coeffs) {
    json flat = json::array();
    for (Eigen::Index i = 0; i < a.size(); ++i) flat.push_back(a.data()[i]);
    coeffs.push_back(std::move(flat));
  }
  json j;
  j["format"] = kTransformFormat;
  j["degree"] = t.degree();
  j["shape"] = {t.rows(), t.cols()};
  j["coeffs"] = std::move(coeffs);
  if (t.source_class >= 0)
    j["source_class"] = t.source_class;
  else
    j["source_class"] = nullptr;
  return j;
}

PolyTransform transform_from(const json& j) {
  require(j.value("format", "") == kTransformFormat,
          "transform file has wrong or missing format tag");
  const int degree = j.at("degree").get<int>();
  const auto shape = j.at("shape").get<std::vector<Eigen::Index>>();
  require(shape.size() == 2 && shape[0] > 0 && shape[1] > 0, "transform shape invalid");
  const auto& coeffs = j.at("coeffs");
  require(static_cast<int>(coeffs.size()) == degree + 1,
          "transform coefficient count disagrees with degree");
  PolyTransform t;
  for (const auto& flat : coeffs) {
    require(static_cast<Eigen::Index>(flat.size()) == shape[0] * shape[1],
            "transform coefficient length disagrees with shape");
    Tensor a(shape[0], shape[1]);
    Eigen::Index i = 0;
    for (const auto& v : flat) a.data()[i++] = v.get<double>();
    t.coeffs.push_back(std::move(a));
  }
  if (j.contains("source_class") && !j.at("source_class").is_null())
    t.source_class = j.at("source_class").get<int>();
  check_transform(t);
  return t;
}

json parse_file(const std::string& path) {
  std::ifstream in(path);
  require(in.good(), "cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse '" + path + "': " + e.what());
  }
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  require(out.good(), "cannot write '" + path + "'");
  out << text << "\n";
  require(out.good(), "write to '" + path + "' failed");
}

}  // namespace

PolyTransform identity_init(Eigen::Index n, Eigen::Index T, int degree) {
  require(n > 0 && T > 0, "identity_init: shape must be positive");
  require(degree >= 0 && degree <= 3, "identity_init: degree must be in 0..3");
  PolyTransform t;
  for (int k = 0; k <= degree; ++k) t.coeffs.push_back(Tensor::Zero(n, T));
  if (degree >= 1) t.coeffs[1].setOnes();
  return t;
}

PolyTransform random_init(Eigen::Index n, Eigen::Index T, int degree, double scale,
                          std::uint64_t seed) {
  require(scale >= 0.0, "random_init: scale must be nonnegative");
  PolyTransform t = identity_init(n, T, degree);
  if (scale == 0.0) return t;
  auto rng = make_rng(seed);
  std::uniform_real_distribution<double> noise(-scale, scale);
  for (Tensor& a : t.coeffs)
    for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] += noise(rng);
  return t;
}

Tensor apply(const PolyTransform& t, const Tensor& x) {
  check_transform(t);
  require(same_shape(t.coeffs.front(), x),
          "transform shape " + shape_string(t.coeffs.front()) + " does not match input " +
              shape_string(x));
  Tensor out = t.coeffs[0];
  Tensor xk = Tensor::Ones(x.rows(), x.cols());
  for (int k = 1; k <= t.degree(); ++k) {
    xk *= x;
    out += t.coeffs[static_cast<size_t>(k)] * xk;
  }
  return out;
}

std::pair<PolyTransform, Tensor> theorem1_witness(const Tensor& x, double eps) {
  require(eps > 0.0, "theorem1_witness: eps must be positive");
  bool varied = false;
  for (Eigen::Index c = 0; c < x.rows() && !varied; ++c)
    varied = x.row(c).maxCoeff() > x.row(c).minCoeff();
  if (!varied)
    throw ConfigError(
        "theorem1_witness: every channel is constant, so the input-dependent "
        "cancellation term cannot exist");

  PolyTransform t = identity_init(x.rows(), x.cols(), 1);
  bool placed = false;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    if (std::abs(v) <= kWitnessFloor) continue;
    const double a0 = 2.0 * eps;
    t.coeffs[0].data()[i] = a0;
    t.coeffs[1].data()[i] = 1.0 - a0 / v;
    placed = true;
  }
  require(placed, "theorem1_witness: no element exceeds the magnitude floor");
  return {t, apply(t, x)};
}

std::vector<std::string> coeff_leaf_names(int degree, const std::string& prefix) {
  std::vector<std::string> names;
  for (int k = 0; k <= degree; ++k) names.push_back(prefix + std::to_string(k));
  return names;
}

Graph::NodeId transform_node(Graph& g, Graph::NodeId x, int degree,
                             const std::string& prefix) {
  require(degree >= 0 && degree <= 3, "transform_node: degree must be in 0..3");
  const Eigen::Index n = g.value(x).rows();
  const Eigen::Index T = g.value(x).cols();
  Graph::NodeId out = g.leaf(prefix + "0", n, T);
  for (int k = 1; k <= degree; ++k) {
    Graph::NodeId ak = g.leaf(prefix + std::to_string(k), n, T);
    out = g.add(out, g.mul(ak, g.pow_int(x, k)));
  }
  return out;
}

void bind_transform(Graph& g, const PolyTransform& t, const std::string& prefix) {
  check_transform(t);
  for (int k = 0; k <= t.degree(); ++k)
    g.bind(prefix + std::to_string(k), t.coeffs[static_cast<size_t>(k)]);
}

PolyTransform read_transform(const Graph& g, int degree, const std::string& prefix) {
  PolyTransform t;
  for (int k = 0; k <= degree; ++k)
    t.coeffs.push_back(g.leaf_value(prefix + std::to_string(k)));
  check_transform(t);
  return t;
}

std::string transform_to_json(const PolyTransform& t) {
  check_transform(t);
  return transform_json(t).dump();
}

PolyTransform transform_from_json(const std::string& text) {
  try {
    return transform_from(json::parse(text));
  } catch (const json::exception& e) {
    throw ConfigError(std::string("cannot parse transform: ") + e.what());
  }
}

void save_transform(const PolyTransform& t, const std::string& path) {
  check_transform(t);
  write_file(path, transform_json(t).dump());
}

PolyTransform load_transform(const std::string& path) { return transform_from(parse_file(path)); }

void save_bundle(const TransformBundle& bundle, const std::string& path) {
  json list = json::array();
  for (const auto& [cls, t] : bundle) {
    PolyTransform tagged = t;
    tagged.source_class = cls;
    list.push_back(transform_json(tagged));
  }
  json j;
  j["format"] = kBundleFormat;
  j["transforms"] = std::move(list);
  write_file(path, j.dump());
}

TransformBundle load_bundle(const std::string& path) {
  json j = parse_file(path);
  require(j.value("format", "") == kBundleFormat,
          "bundle file has wrong or missing format tag");
  TransformBundle bundle;
  for (const auto& tj : j.at("transforms")) {
    PolyTransform t = transform_from(tj);
    require(t.source_class >= 0, "bundle transform lacks a source class");
    bundle[t.source_class] = std::move(t);
  }
  return bundle;
}

}  // namespace tsastat
