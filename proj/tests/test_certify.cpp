#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include <json.hpp>

#include "tsastat/certify.hpp"
#include "tsastat/errors.hpp"
#include "tsastat/random.hpp"

using namespace tsastat;

namespace {

constexpr double kAlphaLow = 1.0 + 0x1p-10;
constexpr double kAlphaHigh = 64.0;

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

double phi(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

// Direct transcription of the top-two divergence floor in extended
// precision, used as an oracle for the double implementation.
long double lemma3_direct(long double p1, long double p2, long double alpha) {
  const long double r = 1.0L - alpha;
  const long double mean = 0.5L * (std::pow(p1, r) + std::pow(p2, r));
  const long double inner = std::pow(mean, 1.0L / r);
  return -std::log(1.0L - p1 - p2 + 2.0L * inner);
}

// The classifier certified analytically in the tests: class 1 iff the
// channel mean is positive.
int mean_sign_classifier(const Tensor& x) { return x.mean() > 0.0 ? 1 : 0; }

}  // namespace

TEST_CASE("discrete divergence of a distribution against itself is exactly zero") {
  const Vector p = vec({0.3, 0.2, 0.5});
  CHECK(renyi_discrete(p, p, 2.0) == 0.0);
  CHECK(renyi_discrete(p, p, 0.5) == 0.0);
  CHECK(renyi_discrete(p, p, 17.5) == 0.0);
}

TEST_CASE("discrete divergence matches closed forms") {
  const Vector p = vec({0.5, 0.5});
  const Vector q = vec({0.25, 0.75});
  // D_2 = ln sum p^2/q = ln(0.25/0.25 + 0.25/0.75) = ln(4/3).
  CHECK(std::abs(renyi_discrete(p, q, 2.0) - std::log(4.0 / 3.0)) <= 1e-9);

  // alpha -> 1 approaches the KL divergence.
  double kl = 0.0;
  for (int i = 0; i < 2; ++i) kl += p[i] * std::log(p[i] / q[i]);
  CHECK(std::abs(renyi_discrete(p, q, 1.0 + 1e-6) - kl) <= 1e-6);
  CHECK(std::abs(renyi_discrete(p, q, 1.0 - 1e-6) - kl) <= 1e-6);
}

TEST_CASE("discrete divergence handles zero mass correctly") {
  const Vector p = vec({0.6, 0.4, 0.0});
  const Vector q = vec({0.5, 0.0, 0.5});
  CHECK(std::isinf(renyi_discrete(p, q, 2.0)));  // q vanishes where p does not
  CHECK(std::isfinite(renyi_discrete(p, q, 0.5)));
  CHECK(std::isfinite(renyi_discrete(q, p, 2.0)) == false);  // p=0.5 over q=0
}

TEST_CASE("discrete divergence rejects malformed input") {
  const Vector p = vec({0.5, 0.5});
  CHECK_THROWS_AS(renyi_discrete(p, vec({0.3, 0.3}), 2.0), ConfigError);
  CHECK_THROWS_AS(renyi_discrete(p, vec({1.5, -0.5}), 2.0), ConfigError);
  CHECK_THROWS_AS(renyi_discrete(p, vec({0.2, 0.3, 0.5}), 2.0), ConfigError);
  CHECK_THROWS_AS(renyi_discrete(p, p, 1.0), ConfigError);
  CHECK_THROWS_AS(renyi_discrete(p, p, -2.0), ConfigError);
}

TEST_CASE("gaussian divergence with shared covariance has a closed form") {
  // Equal covariances: Sigma_alpha = Sigma, the log-determinant term
  // cancels and D_alpha = (alpha/2) d^T Sigma^{-1} d.
  const double sigma2 = 2.0;
  const double d = 0.7;
  for (double alpha : {1.5, 2.0, 4.0, 13.0}) {
    const double got = renyi_gaussian(vec({d}), Matrix::Constant(1, 1, sigma2), vec({0.0}),
                                      Matrix::Constant(1, 1, sigma2), alpha,
                                      GaussianVariant::InverseForm);
    CHECK(got == doctest::Approx(alpha * d * d / (2.0 * sigma2)).epsilon(1e-12));
  }

  // Multivariate alpha -> 1 limit against the KL divergence.
  Matrix sigma(2, 2);
  sigma << 2.0, 0.3, 0.3, 1.0;
  const Vector mu1 = vec({0.4, -0.2});
  const Vector mu2 = vec({0.0, 0.1});
  const Vector diff = mu1 - mu2;
  const double kl = 0.5 * diff.dot(sigma.llt().solve(diff));
  const double near_one =
      renyi_gaussian(mu1, sigma, mu2, sigma, 1.0 + 1e-8, GaussianVariant::InverseForm);
  CHECK(std::abs(near_one - kl) <= 1e-6);
}

TEST_CASE("gaussian divergence variants follow their stated formulas") {
  Matrix s1(2, 2), s2(2, 2);
  s1 << 2.0, 0.4, 0.4, 1.5;
  s2 << 1.0, -0.2, -0.2, 2.5;
  const Vector mu1 = vec({0.3, -0.6});
  const Vector mu2 = vec({-0.1, 0.2});
  const double alpha = 1.8;

  const Matrix sa = alpha * s1 + (1.0 - alpha) * s2;
  const Vector d = mu1 - mu2;
  const double log_term = std::log(sa.determinant()) -
                          (1.0 - alpha) * std::log(s1.determinant()) -
                          alpha * std::log(s2.determinant());
  const double shared = -log_term / (2.0 * (alpha - 1.0));

  const double literal =
      renyi_gaussian(mu1, s1, mu2, s2, alpha, GaussianVariant::PaperLiteral);
  CHECK(literal == doctest::Approx(0.5 * alpha * d.dot(sa * d) + shared).epsilon(1e-12));

  const double inverse =
      renyi_gaussian(mu1, s1, mu2, s2, alpha, GaussianVariant::InverseForm);
  CHECK(inverse == doctest::Approx(0.5 * alpha * d.dot(sa.llt().solve(d)) + shared).epsilon(1e-12));
  CHECK(literal != inverse);
}

TEST_CASE("a sampling estimate validates the inverse-form gaussian divergence") {
  // One dimension, shared variance; t = (p/q)^(alpha-1) under x ~ P has
  // mean exp((alpha-1) D_alpha), so ln(mean)/(alpha-1) estimates D_alpha.
  const double mu1 = 0.7, mu2 = 0.0, var = 2.0, alpha = 2.5;
  const double exact = renyi_gaussian(vec({mu1}), Matrix::Constant(1, 1, var), vec({mu2}),
                                      Matrix::Constant(1, 1, var), alpha,
                                      GaussianVariant::InverseForm);

  const int n = 1000000;
  auto rng = make_rng(314159);
  std::normal_distribution<double> normal(mu1, std::sqrt(var));
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = normal(rng);
    const double log_ratio = ((x - mu2) * (x - mu2) - (x - mu1) * (x - mu1)) / (2.0 * var);
    const double t = std::exp((alpha - 1.0) * log_ratio);
    sum += t;
    sum_sq += t * t;
  }
  const double mean = sum / n;
  const double sd = std::sqrt(std::max(0.0, sum_sq / n - mean * mean));
  const double estimate = std::log(mean) / (alpha - 1.0);
  const double se = sd / (mean * std::sqrt(static_cast<double>(n)) * (alpha - 1.0));
  CHECK(std::abs(estimate - exact) <= 3.0 * se);
}

TEST_CASE("gaussian divergence rejects indefinite covariances") {
  CHECK_THROWS_AS(renyi_gaussian(vec({0.0}), Matrix::Constant(1, 1, -1.0), vec({1.0}),
                                 Matrix::Constant(1, 1, 1.0), 2.0, GaussianVariant::InverseForm),
                  NumericalError);
  // Sigma_alpha = 2*1 - 1*3 < 0 even though both inputs are positive.
  CHECK_THROWS_AS(renyi_gaussian(vec({0.0}), Matrix::Constant(1, 1, 1.0), vec({1.0}),
                                 Matrix::Constant(1, 1, 3.0), 2.0, GaussianVariant::InverseForm),
                  NumericalError);
  CHECK_THROWS_AS(renyi_gaussian(vec({0.0, 0.0}), Matrix::Identity(2, 2), vec({1.0}),
                                 Matrix::Identity(1, 1), 2.0, GaussianVariant::InverseForm),
                  ConfigError);
}

TEST_CASE("top-two divergence floor special cases") {
  CHECK(lemma3_lower_bound(0.3, 0.3, 2.0) == 0.0);
  CHECK(lemma3_lower_bound(0.5, 0.5, 7.0) == 0.0);
  CHECK(lemma3_lower_bound(0.7, 0.0, 2.0) == doctest::Approx(-std::log(0.3)).epsilon(1e-14));
  CHECK(std::isinf(lemma3_lower_bound(1.0, 0.0, 2.0)));
  CHECK_THROWS_AS(lemma3_lower_bound(0.2, 0.5, 2.0), ConfigError);
  CHECK_THROWS_AS(lemma3_lower_bound(0.8, 0.4, 2.0), ConfigError);
  CHECK_THROWS_AS(lemma3_lower_bound(0.8, 0.1, 1.0), ConfigError);
  CHECK_THROWS_AS(lemma3_lower_bound(-0.1, -0.2, 2.0), ConfigError);
}

TEST_CASE("top-two divergence floor matches an extended-precision transcription") {
  for (double p1 : {0.4, 0.6, 0.9, 0.97})
    for (double p2 : {0.01, 0.1, 0.3})
      for (double alpha : {0.5, 1.5, 2.0, 4.0, 8.0}) {
        if (p2 > p1 || p1 + p2 > 1.0) continue;
        const double got = lemma3_lower_bound(p1, p2, alpha);
        const double want = static_cast<double>(lemma3_direct(p1, p2, alpha));
        INFO("p1=", p1, " p2=", p2, " alpha=", alpha);
        CHECK(got == doctest::Approx(want).epsilon(1e-12));
      }
}

TEST_CASE("radius bound degenerates exactly on a top-two tie") {
  const Theorem2Result r = theorem2_bound_scalar(0.5, 0.5, 4.0);
  CHECK(r.delta == 0.0);
  CHECK(r.alpha_star == 0.0);
}

TEST_CASE("radius bound diverges when the prediction is unanimous") {
  const Theorem2Result r = theorem2_bound_scalar(1.0, 0.0, 4.0);
  CHECK(std::isinf(r.delta));
  CHECK(r.alpha_star == kAlphaLow);
}

TEST_CASE("radius bound scales as the inverse square root of the covariance sum") {
  const double base = theorem2_bound_scalar(0.9, 0.05, 3.0).delta;
  const double scaled = theorem2_bound_scalar(0.9, 0.05, 12.0).delta;
  CHECK(base > 0.0);
  CHECK(std::abs(base / scaled - 2.0) <= 1e-10 * 2.0);
  // The maximizing alpha does not depend on the covariance scale.
  CHECK(theorem2_bound_scalar(0.9, 0.05, 3.0).alpha_star ==
        theorem2_bound_scalar(0.9, 0.05, 12.0).alpha_star);
}

TEST_CASE("matrix radius bound reduces to the scalar form on the covariance sum") {
  Matrix sigma(2, 2);
  sigma << 2.0, 0.5, 0.5, 3.0;
  const Theorem2Result a = theorem2_bound(0.8, 0.15, sigma);
  const Theorem2Result b = theorem2_bound_scalar(0.8, 0.15, sigma.sum());
  CHECK(a.delta == b.delta);
  CHECK(a.alpha_star == b.alpha_star);
}

TEST_CASE("radius bound agrees with a dense grid search") {
  const double sigma_sum = 5.0;
  const int grid = 100000;
  for (auto [p1, p2] : std::vector<std::pair<double, double>>{{0.6, 0.3},
                                                              {0.75, 0.2},
                                                              {0.9, 0.05},
                                                              {0.97, 0.01},
                                                              {0.55, 0.45},
                                                              {0.99, 0.003},
                                                              {0.5, 0.1},
                                                              {0.8, 0.0}}) {
    double best = 0.0;
    for (int i = 0; i < grid; ++i) {
      const double alpha =
          kAlphaLow * std::pow(kAlphaHigh / kAlphaLow, static_cast<double>(i) / (grid - 1));
      const double value =
          2.0 / (alpha * sigma_sum) * lemma3_lower_bound(p1, p2, alpha);
      best = std::max(best, value);
    }
    const double want = std::sqrt(best);
    const double got = theorem2_bound_scalar(p1, p2, sigma_sum).delta;
    INFO("p1=", p1, " p2=", p2);
    CHECK(got == doctest::Approx(want).epsilon(1e-6));
    CHECK(got + 1e-12 >= want);  // refinement only ever improves on the grid
  }
}

TEST_CASE("generated covariances are symmetric, unit-scaled and reproducible") {
  const Matrix s = gen_spd_covariance(4, 2.5, 77);
  CHECK(s.rows() == 4);
  for (int i = 0; i < 4; ++i) {
    CHECK(s(i, i) == 2.5);
    for (int j = 0; j < 4; ++j) CHECK(s(i, j) == s(j, i));
  }
  Eigen::LLT<Matrix> llt(s);
  CHECK(llt.info() == Eigen::Success);

  const Matrix again = gen_spd_covariance(4, 2.5, 77);
  CHECK((s - again).cwiseAbs().maxCoeff() == 0.0);
  const Matrix other = gen_spd_covariance(4, 2.5, 78);
  CHECK((s - other).cwiseAbs().maxCoeff() > 0.0);

  const Matrix diag = diagonal_covariance(3, 0.5);
  CHECK(diag(0, 0) == 0.5);
  CHECK(diag(0, 1) == 0.0);
}

TEST_CASE("certification of a mean-threshold classifier lands in the binomial band") {
  // n=1, T=16, per-step noise std 4 averages to std 1 on the channel mean.
  // The input mean is 2 and the shift adds 0.2, so the class-1 rate under
  // the shifted noise is Phi(2.2).
  const Eigen::Index T = 16;
  const Tensor x = Tensor::Constant(1, T, 2.0);
  NoiseSpec noise;
  noise.mu_p = vec({0.2});
  noise.sigma = Matrix::Constant(1, 1, 16.0);
  noise.max_samples = 5000;
  noise.seed = 99;
  noise.workers = 1;

  const CertificationReport report = certify(mean_sign_classifier, 2, x, noise);
  CHECK(report.samples_used == 5000);
  CHECK(report.predicted_label == 1);
  CHECK(report.verdict == Verdict::Certified);

  const double p = phi(2.2);
  const double band = 2.576 * std::sqrt(p * (1.0 - p) / 5000.0) + 0.5 / 5000.0;
  CHECK(std::abs(report.ep[1] - p) <= band);
  const double p0 = phi(2.0);
  const double band0 = 2.576 * std::sqrt(p0 * (1.0 - p0) / 5000.0) + 0.5 / 5000.0;
  CHECK(std::abs(report.e0[1] - p0) <= band0);

  // The reported radius is exactly the top-two bound on EP.
  const Theorem2Result t2 = theorem2_bound(report.ep[1], report.ep[0], noise.sigma);
  CHECK(report.delta == t2.delta);
  CHECK(report.alpha_star == t2.alpha_star);
  CHECK(report.delta > 0.0);
}

TEST_CASE("certification declines when the shift flips the majority vote") {
  const Tensor x = Tensor::Constant(1, 16, -0.1);
  NoiseSpec noise;
  noise.mu_p = vec({3.0});
  noise.sigma = Matrix::Constant(1, 1, 16.0);
  noise.max_samples = 5000;
  noise.seed = 101;
  noise.workers = 1;
  const CertificationReport report = certify(mean_sign_classifier, 2, x, noise);
  CHECK(report.verdict == Verdict::Declined);
  CHECK(report.predicted_label == 1);
  CHECK(report.delta == 0.0);
}

TEST_CASE("a constant classifier certifies trivially at the shift magnitude") {
  const Tensor x = Tensor::Zero(2, 8);
  NoiseSpec noise;
  noise.mu_p = vec({0.5, -2.0});
  noise.sigma = diagonal_covariance(2, 1.0);
  noise.max_samples = 200;
  noise.seed = 103;
  noise.workers = 1;
  const auto constant = [](const Tensor&) { return 1; };
  const CertificationReport report = certify(constant, 3, x, noise);
  CHECK(report.verdict == Verdict::CertifiedTrivially);
  CHECK(report.delta == 2.0);
  CHECK(report.ep[1] == 1.0);
  CHECK(report.e0[1] == 1.0);
}

TEST_CASE("worker count does not change the certification outcome") {
  const Tensor x = Tensor::Constant(1, 16, 2.0);
  NoiseSpec noise;
  noise.mu_p = vec({0.2});
  noise.sigma = Matrix::Constant(1, 1, 16.0);
  noise.max_samples = 1000;
  noise.seed = 107;

  noise.workers = 1;
  const CertificationReport serial = certify(mean_sign_classifier, 2, x, noise);
  noise.workers = 4;
  const CertificationReport parallel = certify(mean_sign_classifier, 2, x, noise);
  CHECK((serial.ep - parallel.ep).cwiseAbs().maxCoeff() == 0.0);
  CHECK((serial.e0 - parallel.e0).cwiseAbs().maxCoeff() == 0.0);
  CHECK(serial.delta == parallel.delta);
  CHECK(serial.verdict == parallel.verdict);
}

TEST_CASE("shared draws change only the zero-shift arm") {
  const Tensor x = Tensor::Constant(1, 8, 1.0);
  NoiseSpec noise;
  noise.mu_p = vec({0.3});
  noise.sigma = Matrix::Constant(1, 1, 4.0);
  noise.max_samples = 3;
  noise.seed = 109;
  noise.workers = 1;

  // Capture the actual inputs the classifier sees: with one worker, calls
  // alternate shifted, zero-shift, shifted, ...
  std::vector<Tensor> seen;
  const auto spy = [&seen](const Tensor& t) {
    seen.push_back(t);
    return 0;
  };

  certify(spy, 2, x, noise);
  const std::vector<Tensor> shared = std::move(seen);
  seen.clear();
  noise.independent_draws = true;
  certify(spy, 2, x, noise);
  const std::vector<Tensor> independent = std::move(seen);

  REQUIRE(shared.size() == 6);
  REQUIRE(independent.size() == 6);
  for (size_t i = 0; i < 6; i += 2) {
    // The first column is drawn before any redraw, so it matches across
    // modes; the extra redraws then shift the stream for later columns.
    CHECK(shared[i](0, 0) == independent[i](0, 0));
    CHECK((shared[i] - independent[i]).abs().maxCoeff() > 0.0);
    // The zero-shift arm redraws, so it must differ.
    CHECK((shared[i + 1] - independent[i + 1]).abs().maxCoeff() > 0.0);
    // Under shared draws the two arms differ by exactly the shift.
    CHECK((shared[i] - shared[i + 1] - 0.3).abs().maxCoeff() <= 1e-12);
    // Under independent draws they do not.
    CHECK((independent[i] - independent[i + 1] - 0.3).abs().maxCoeff() > 1e-6);
  }
}

TEST_CASE("certification validates its inputs") {
  const Tensor x = Tensor::Zero(1, 8);
  NoiseSpec noise;
  noise.mu_p = vec({0.1, 0.2});  // wrong length
  noise.sigma = Matrix::Constant(1, 1, 1.0);
  noise.max_samples = 10;
  CHECK_THROWS_AS(certify(mean_sign_classifier, 2, x, noise), ConfigError);

  noise.mu_p = vec({0.1});
  noise.max_samples = 0;
  CHECK_THROWS_AS(certify(mean_sign_classifier, 2, x, noise), ConfigError);

  noise.max_samples = 10;
  noise.sigma = Matrix::Constant(1, 1, -2.0);
  CHECK_THROWS_AS(certify(mean_sign_classifier, 2, x, noise), NumericalError);

  // A predictor returning garbage is caught even inside worker threads.
  noise.sigma = Matrix::Constant(1, 1, 1.0);
  noise.workers = 4;
  noise.max_samples = 64;
  const auto broken = [](const Tensor&) { return 7; };
  CHECK_THROWS_AS(certify(broken, 2, x, noise), ConfigError);
}

TEST_CASE("certification reports serialize with the expected fields") {
  const Tensor x = Tensor::Constant(1, 16, 2.0);
  NoiseSpec noise;
  noise.mu_p = vec({0.2});
  noise.sigma = Matrix::Constant(1, 1, 16.0);
  noise.max_samples = 500;
  noise.seed = 113;
  noise.workers = 1;
  const CertificationReport report = certify(mean_sign_classifier, 2, x, noise);
  const auto j = nlohmann::json::parse(report_to_json(report));
  CHECK(j.at("format") == "tsastat-cert-v1");
  CHECK(j.at("verdict") == "certified");
  CHECK(j.at("predicted_label") == 1);
  CHECK(j.at("samples_used") == 500);
  CHECK(j.at("delta").get<double>() == report.delta);
  CHECK(j.at("ep").size() == 2);
  CHECK(j.at("ep")[1].get<double>() == report.ep[1]);
}

TEST_CASE("feature bound conversions match a dense offset sweep") {
  auto rng = make_rng(211);
  std::normal_distribution<double> normal(0.4, 1.3);
  Tensor series(2, 50);
  for (Eigen::Index r = 0; r < 2; ++r)
    for (Eigen::Index t = 0; t < 50; ++t) series(r, t) = normal(rng);
  const double delta = 0.37;
  const auto bounds = convert_bounds(delta, series);
  REQUIRE(bounds.size() == 2);

  for (Eigen::Index c = 0; c < 2; ++c) {
    const double mu = series.row(c).mean();
    const double var = (series.row(c) - mu).square().sum() / 50.0;
    const double sigma = std::sqrt(var);
    const FeatureBounds& fb = bounds[static_cast<size_t>(c)];
    CHECK(fb.mean == mu);
    CHECK(fb.sigma == doctest::Approx(sigma).epsilon(1e-15));
    CHECK(fb.rms_literal == delta * delta + var);
    CHECK(std::abs(fb.rms_root * fb.rms_root - fb.rms_literal) <= 1e-10);

    double worst_skew = 0.0, worst_kurt = -std::numeric_limits<double>::infinity();
    const int grid = 10000;
    for (int i = 0; i <= grid; ++i) {
      const double off = -delta + 2.0 * delta * i / grid;
      const double g = ((series.row(c) - mu - off).pow(3)).sum() / 50.0;
      const double k = ((series.row(c) - mu - off).pow(4)).sum() / 50.0;
      worst_skew = std::max(worst_skew, std::abs(g) / (sigma * sigma * sigma));
      worst_kurt = std::max(worst_kurt, k / (var * var) - 3.0);
    }
    CHECK(fb.skew_bound == doctest::Approx(worst_skew).epsilon(1e-6));
    CHECK(fb.kurt_bound == doctest::Approx(worst_kurt).epsilon(1e-6));
    CHECK(fb.skew_bound + 1e-12 >= worst_skew);
    CHECK(fb.kurt_bound + 1e-12 >= worst_kurt);
  }
}

TEST_CASE("asymmetric series trigger the bound-versus-literal discrepancy flag") {
  Tensor skewed(1, 4);
  skewed << 0.0, 0.0, 0.0, 10.0;  // strongly positive third moment
  const auto b = convert_bounds(0.25, skewed);
  CHECK(b[0].skew_discrepancy);
  CHECK(b[0].kurt_discrepancy);
  CHECK(b[0].skew_bound > b[0].skew_literal);
  CHECK(b[0].kurt_bound > b[0].kurt_literal);

  Tensor symmetric(1, 4);
  symmetric << 1.0, 2.0, 3.0, 4.0;  // third central moment exactly zero
  const auto s = convert_bounds(0.25, symmetric);
  CHECK_FALSE(s[0].skew_discrepancy);
  CHECK_FALSE(s[0].kurt_discrepancy);
  CHECK(s[0].skew_bound == s[0].skew_literal);
}

TEST_CASE("feature bound conversions reject degenerate input") {
  CHECK_THROWS_AS(convert_bounds(-0.1, Tensor::Zero(1, 4)), ConfigError);
  CHECK_THROWS_AS(convert_bounds(0.1, Tensor::Constant(1, 4, 3.0)), NumericalError);
}
