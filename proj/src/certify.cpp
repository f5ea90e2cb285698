#include "tsastat/certify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

#include <json.hpp>

#include "tsastat/errors.hpp"
#include "tsastat/random.hpp"

namespace tsastat {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kAlphaLow = 1.0 + 0x1p-10;
constexpr double kAlphaHigh = 64.0;
constexpr int kAlphaGridPoints = 512;

void require(bool ok, const std::string& message) {
  if (!ok) throw ConfigError(message);
}

void check_distribution(const Vector& p, const char* name) {
  require(p.size() >= 1, std::string(name) + " is empty");
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    require(p[i] >= 0.0, std::string(name) + " has a negative entry");
    total += p[i];
  }
  require(std::abs(total - 1.0) <= 1e-9, std::string(name) + " does not sum to 1");
}

double log_det(const Matrix& m, const char* name) {
  const double det = m.determinant();
  if (det <= 0.0)
    throw NumericalError(std::string(name) + " has non-positive determinant");
  return std::log(det);
}

/// p^(1-alpha) with the p=0 limits spelled out.
double power_term(double p, double one_minus_alpha) {
  if (p == 0.0) return one_minus_alpha > 0.0 ? 0.0 : kInf;
  return std::pow(p, one_minus_alpha);
}

void validate_top_two(double p1, double p2) {
  require(p1 >= 0.0 && p2 >= 0.0 && p1 <= 1.0, "top-two probabilities out of range");
  require(p1 >= p2, "p1 must be the larger probability");
  require(p1 + p2 <= 1.0 + 1e-12, "top-two probabilities exceed 1");
}

int vector_argmax(const Vector& v) {
  int best = 0;
  for (int i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;  // tie keeps the lowest index
  return best;
}

}  // namespace

double renyi_discrete(const Vector& p, const Vector& q, double alpha) {
  require(alpha > 0.0 && alpha != 1.0, "renyi_discrete: alpha must be positive and not 1");
  require(p.size() == q.size(), "renyi_discrete: distribution sizes differ");
  check_distribution(p, "P");
  check_distribution(q, "Q");
  if ((p.array() == q.array()).all()) return 0.0;  // identical arguments are exactly divergence-free
  double total = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;  // zero mass contributes nothing for alpha > 0
    if (q[i] == 0.0) {
      if (alpha > 1.0) return kInf;
      continue;  // q^(1-alpha) -> 0 for alpha < 1
    }
    total += std::pow(p[i], alpha) * std::pow(q[i], 1.0 - alpha);
  }
  if (total == 0.0) return kInf;
  return std::log(total) / (alpha - 1.0);
}

double renyi_gaussian(const Vector& mu1, const Matrix& sigma1, const Vector& mu2,
                      const Matrix& sigma2, double alpha, GaussianVariant variant) {
  require(alpha > 0.0 && alpha != 1.0, "renyi_gaussian: alpha must be positive and not 1");
  const Eigen::Index n = mu1.size();
  require(mu2.size() == n && sigma1.rows() == n && sigma1.cols() == n && sigma2.rows() == n &&
              sigma2.cols() == n,
          "renyi_gaussian: dimension mismatch");
  const Matrix sigma_alpha = alpha * sigma1 + (1.0 - alpha) * sigma2;
  const Vector d = mu1 - mu2;

  double quad;
  if (variant == GaussianVariant::PaperLiteral) {
    quad = 0.5 * alpha * d.dot(sigma_alpha * d);
  } else {
    Eigen::LLT<Matrix> llt(sigma_alpha);
    if (llt.info() != Eigen::Success)
      throw NumericalError("renyi_gaussian: Sigma_alpha is not positive definite");
    quad = 0.5 * alpha * d.dot(llt.solve(d));
  }
  const double log_term = log_det(sigma_alpha, "Sigma_alpha") -
                          (1.0 - alpha) * log_det(sigma1, "Sigma1") -
                          alpha * log_det(sigma2, "Sigma2");
  return quad - log_term / (2.0 * (alpha - 1.0));
}

double lemma3_lower_bound(double p1, double p2, double alpha) {
  require(alpha > 0.0 && alpha != 1.0, "lemma3: alpha must be positive and not 1");
  validate_top_two(p1, p2);
  if (p1 == p2) return 0.0;  // power mean collapses, log argument is exactly 1
  const double r = 1.0 - alpha;
  const double t1 = power_term(p1, r);
  const double t2 = power_term(p2, r);
  const double mean = 0.5 * (t1 + t2);
  double inner;
  if (std::isinf(mean))
    inner = 0.0;  // p2 = 0 with alpha > 1: the power mean vanishes in the limit
  else
    inner = std::pow(mean, 1.0 / r);
  const double arg = 1.0 - p1 - p2 + 2.0 * inner;
  if (arg <= 0.0) return kInf;
  return -std::log(arg);
}

Theorem2Result theorem2_bound_scalar(double p1, double p2, double sigma_sum) {
  require(sigma_sum > 0.0, "theorem2: covariance sum must be positive");
  validate_top_two(p1, p2);
  Theorem2Result result;
  if (p1 == p2) return result;  // lemma3 is 0 at every alpha

  auto maximand = [&](double alpha) {
    return 2.0 / (alpha * sigma_sum) * lemma3_lower_bound(p1, p2, alpha);
  };

  const double ratio = kAlphaHigh / kAlphaLow;
  double best_alpha = kAlphaLow;
  double best_value = -kInf;
  int best_index = 0;
  for (int i = 0; i < kAlphaGridPoints; ++i) {
    const double alpha =
        kAlphaLow * std::pow(ratio, static_cast<double>(i) / (kAlphaGridPoints - 1));
    const double value = maximand(alpha);
    if (value > best_value) {
      best_value = value;
      best_alpha = alpha;
      best_index = i;
    }
  }

  if (std::isinf(best_value)) {
    result.delta = kInf;
    result.alpha_star = best_alpha;
    return result;
  }

  // Golden-section refinement between the grid neighbors of the best point.
  const int lo_i = std::max(0, best_index - 1);
  const int hi_i = std::min(kAlphaGridPoints - 1, best_index + 1);
  double a = kAlphaLow * std::pow(ratio, static_cast<double>(lo_i) / (kAlphaGridPoints - 1));
  double b = kAlphaLow * std::pow(ratio, static_cast<double>(hi_i) / (kAlphaGridPoints - 1));
  constexpr double invphi = 0.6180339887498949;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = maximand(c);
  double fd = maximand(d);
  for (int it = 0; it < 200 && b - a > 1e-13 * b; ++it) {
    if (fc > fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = maximand(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = maximand(d);
    }
  }
  const double refined_alpha = fc > fd ? c : d;
  const double refined_value = std::max(fc, fd);
  if (refined_value > best_value) {
    best_value = refined_value;
    best_alpha = refined_alpha;
  }

  if (best_value <= 0.0) return result;  // delta 0, no maximizing alpha
  result.delta = std::sqrt(best_value);
  result.alpha_star = best_alpha;
  return result;
}

Theorem2Result theorem2_bound(double p1, double p2, const Matrix& sigma) {
  require(sigma.rows() == sigma.cols() && sigma.rows() >= 1, "theorem2: covariance not square");
  return theorem2_bound_scalar(p1, p2, sigma.sum());
}

Matrix diagonal_covariance(int n, double sigma) {
  require(n >= 1 && sigma > 0.0, "diagonal_covariance: bad parameters");
  return sigma * Matrix::Identity(n, n);
}

Matrix gen_spd_covariance(int n, double sigma, std::uint64_t seed) {
  require(n >= 1 && sigma > 0.0, "gen_spd_covariance: bad parameters");
  auto rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix a(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) a(i, j) = normal(rng);
  Matrix s = a * a.transpose();
  Vector scale(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (s(i, i) <= 0.0) return diagonal_covariance(n, sigma);  // measure-zero fallback
    scale[i] = std::sqrt(sigma / s(i, i));
  }
  s = scale.asDiagonal() * s * scale.asDiagonal();
  for (Eigen::Index i = 0; i < n; ++i) {
    s(i, i) = sigma;  // exact diagonal
    for (Eigen::Index j = 0; j < i; ++j) s(j, i) = s(i, j);  // exact symmetry
  }
  return s;
}

std::string verdict_name(Verdict v) {
  switch (v) {
    case Verdict::Certified: return "certified";
    case Verdict::CertifiedTrivially: return "certified_trivially";
    case Verdict::Declined: return "declined";
  }
  return "?";
}

CertificationReport certify(const std::function<int(const Tensor&)>& predict, int label_count,
                            const Tensor& x, const NoiseSpec& noise) {
  const Eigen::Index n = x.rows();
  const Eigen::Index steps = x.cols();
  require(label_count >= 2, "certify: need at least two classes");
  require(noise.mu_p.size() == n, "certify: mu_p length does not match channel count");
  require(noise.sigma.rows() == n && noise.sigma.cols() == n,
          "certify: covariance shape does not match channel count");
  require(noise.max_samples >= 1, "certify: max_samples must be positive");

  Eigen::LLT<Matrix> llt(noise.sigma);
  if (llt.info() != Eigen::Success)
    throw NumericalError("certify: covariance is not positive definite");
  const Matrix chol = llt.matrixL();

  const int total = noise.max_samples;
  auto run_range = [&](int begin, int end, std::vector<long>& count_p,
                       std::vector<long>& count_0) {
    Vector z(n);
    Tensor noise_p(n, steps), noise_0(n, steps);
    for (int i = begin; i < end; ++i) {
      auto rng = make_rng(derive_seed(noise.seed, static_cast<std::uint64_t>(i)));
      std::normal_distribution<double> normal(0.0, 1.0);
      for (Eigen::Index t = 0; t < steps; ++t) {
        for (Eigen::Index j = 0; j < n; ++j) z[j] = normal(rng);
        noise_p.col(t) = (noise.mu_p + chol * z).array();
        if (noise.independent_draws)
          for (Eigen::Index j = 0; j < n; ++j) z[j] = normal(rng);
        noise_0.col(t) = (chol * z).array();
      }
      const int yp = predict(x + noise_p);
      const int y0 = predict(x + noise_0);
      require(yp >= 0 && yp < label_count && y0 >= 0 && y0 < label_count,
              "certify: predictor returned an out-of-range label");
      ++count_p[static_cast<size_t>(yp)];
      ++count_0[static_cast<size_t>(y0)];
    }
  };

  std::vector<long> count_p(static_cast<size_t>(label_count), 0);
  std::vector<long> count_0(static_cast<size_t>(label_count), 0);
  int workers = noise.workers > 0 ? noise.workers
                                  : static_cast<int>(std::thread::hardware_concurrency());
  workers = std::max(1, std::min(workers, total));
  if (workers == 1) {
    run_range(0, total, count_p, count_0);
  } else {
    // Per-sample derived seeds make the partition irrelevant to the counts.
    std::vector<std::vector<long>> locals_p(workers,
                                            std::vector<long>(static_cast<size_t>(label_count), 0));
    std::vector<std::vector<long>> locals_0 = locals_p;
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<size_t>(workers));
    const int chunk = (total + workers - 1) / workers;
    for (int w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          run_range(w * chunk, std::min(total, (w + 1) * chunk), locals_p[static_cast<size_t>(w)],
                    locals_0[static_cast<size_t>(w)]);
        } catch (...) {
          errors[static_cast<size_t>(w)] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors)
      if (e) std::rethrow_exception(e);
    for (int w = 0; w < workers; ++w)
      for (int j = 0; j < label_count; ++j) {
        count_p[static_cast<size_t>(j)] += locals_p[static_cast<size_t>(w)][static_cast<size_t>(j)];
        count_0[static_cast<size_t>(j)] += locals_0[static_cast<size_t>(w)][static_cast<size_t>(j)];
      }
  }

  CertificationReport report;
  report.samples_used = total;
  report.ep = Vector(label_count);
  report.e0 = Vector(label_count);
  for (int j = 0; j < label_count; ++j) {
    report.ep[j] = static_cast<double>(count_p[static_cast<size_t>(j)]) / total;
    report.e0[j] = static_cast<double>(count_0[static_cast<size_t>(j)]) / total;
  }

  const int top_p = vector_argmax(report.ep);
  const int top_0 = vector_argmax(report.e0);
  report.predicted_label = top_p;
  if (top_p != top_0) {
    report.verdict = Verdict::Declined;
    return report;
  }
  if (report.ep[top_p] == 1.0) {
    report.verdict = Verdict::CertifiedTrivially;
    report.delta = noise.mu_p.cwiseAbs().maxCoeff();
    return report;
  }
  double p1 = -1.0, p2 = -1.0;
  for (int j = 0; j < label_count; ++j) {
    const double v = report.ep[j];
    if (v > p1) {
      p2 = p1;
      p1 = v;
    } else if (v > p2) {
      p2 = v;
    }
  }
  const Theorem2Result t2 = theorem2_bound(p1, p2, noise.sigma);
  report.verdict = Verdict::Certified;
  report.delta = t2.delta;
  report.alpha_star = t2.alpha_star;
  return report;
}

CertificationReport certify(const Network& net, const Tensor& x, const NoiseSpec& noise) {
  return certify([&net](const Tensor& t) { return net.predict(t); }, net.label_count(), x,
                 noise);
}

std::string report_to_json(const CertificationReport& report) {
  nlohmann::json j;
  j["format"] = "tsastat-cert-v1";
  j["verdict"] = verdict_name(report.verdict);
  j["predicted_label"] = report.predicted_label;
  j["delta"] = report.delta;
  j["alpha_star"] = report.alpha_star;
  j["samples_used"] = report.samples_used;
  j["ep"] = std::vector<double>(report.ep.data(), report.ep.data() + report.ep.size());
  j["e0"] = std::vector<double>(report.e0.data(), report.e0.data() + report.e0.size());
  return j.dump();
}

std::vector<FeatureBounds> convert_bounds(double delta, const Tensor& series) {
  require(delta >= 0.0, "convert_bounds: delta must be nonnegative");
  require(series.size() > 0, "convert_bounds: empty series");
  const Eigen::Index T = series.cols();
  std::vector<FeatureBounds> out;
  for (Eigen::Index c = 0; c < series.rows(); ++c) {
    const double mu = series.row(c).mean();
    const double var = (series.row(c) - mu).square().sum() / static_cast<double>(T);
    const double sigma = std::sqrt(var);
    if (sigma <= 0.0)
      throw NumericalError("convert_bounds: channel " + std::to_string(c) +
                           " has zero standard deviation");
    auto moment = [&](double offset, int k) {
      return ((series.row(c) - mu - offset).pow(k)).sum() / static_cast<double>(T);
    };
    FeatureBounds fb;
    fb.mean = mu;
    fb.sigma = sigma;
    fb.rms_literal = delta * delta + var;
    fb.rms_root = std::sqrt(fb.rms_literal);
    const double sigma3 = sigma * sigma * sigma;
    const double sigma4 = sigma3 * sigma;
    const double g_plus = moment(delta, 3);
    const double g_minus = moment(-delta, 3);
    fb.skew_literal = std::abs(g_plus) / sigma3;
    fb.skew_bound = std::max(std::abs(g_plus), std::abs(g_minus)) / sigma3;
    fb.skew_discrepancy = fb.skew_bound > fb.skew_literal;
    const double k_plus = moment(delta, 4);
    const double k_minus = moment(-delta, 4);
    fb.kurt_literal = k_plus / sigma4 - 3.0;
    fb.kurt_bound = std::max(k_plus, k_minus) / sigma4 - 3.0;
    fb.kurt_discrepancy = fb.kurt_bound > fb.kurt_literal;
    out.push_back(fb);
  }
  return out;
}

}  // namespace tsastat
