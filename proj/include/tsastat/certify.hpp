#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tsastat/network.hpp"
#include "tsastat/tensor.hpp"

namespace tsastat {

/// Renyi divergence of order alpha between discrete distributions,
/// (1/(alpha-1)) ln sum_i P_i^alpha Q_i^(1-alpha). Returns +infinity when
/// the divergence diverges (e.g. Q_i = 0 < P_i with alpha > 1).
double renyi_discrete(const Vector& p, const Vector& q, double alpha);

/// Renyi divergence between multivariate Gaussians with
/// Sigma_alpha = alpha*Sigma1 + (1-alpha)*Sigma2. The PaperLiteral variant
/// evaluates the quadratic term as (alpha/2) d^T Sigma_alpha d; InverseForm
/// uses Sigma_alpha^{-1}, which is the only variant that matches sampling
/// estimates. Both share the log-determinant term.
enum class GaussianVariant { PaperLiteral, InverseForm };
double renyi_gaussian(const Vector& mu1, const Matrix& sigma1, const Vector& mu2,
                      const Matrix& sigma2, double alpha, GaussianVariant variant);

/// -ln(1 - p1 - p2 + 2*(0.5*(p1^(1-alpha) + p2^(1-alpha)))^(1/(1-alpha)))
/// for the top-two class probabilities p1 >= p2. Returns +infinity when the
/// log argument reaches zero (p1 = 1); p2 = 0 with alpha > 1 takes the
/// limit where the inner power mean vanishes.
double lemma3_lower_bound(double p1, double p2, double alpha);

/// delta = sqrt( max_alpha (2 / (alpha * sum(Sigma))) * lemma3(p1,p2,alpha) )
/// maximized over alpha in [1 + 2^-10, 64] by a 512-point log-spaced grid
/// plus golden-section refinement; 0 when no alpha gives a positive value.
struct Theorem2Result {
  double delta = 0.0;
  double alpha_star = 0.0;  // 0 when no alpha contributed
};
Theorem2Result theorem2_bound(double p1, double p2, const Matrix& sigma);
Theorem2Result theorem2_bound_scalar(double p1, double p2, double sigma_sum);

struct NoiseSpec {
  Vector mu_p;                     // per-channel mean shift, length n
  Matrix sigma;                    // n x n covariance, positive definite
  int max_samples = 5000;
  bool independent_draws = false;  // true: n_P and n_0 use separate draws
  std::uint64_t seed = 0;
  int workers = 0;                 // 0 = hardware concurrency
};

/// sigma on the whole diagonal, zero elsewhere.
Matrix diagonal_covariance(int n, double sigma);
/// Seeded A A^T rescaled symmetrically so every diagonal entry equals
/// sigma exactly; positive semi-definite by construction.
Matrix gen_spd_covariance(int n, double sigma, std::uint64_t seed);

enum class Verdict { Certified, CertifiedTrivially, Declined };
std::string verdict_name(Verdict v);

struct CertificationReport {
  Verdict verdict = Verdict::Declined;
  int predicted_label = -1;      // argmax of EP
  double delta = 0.0;            // 0 when declined
  double alpha_star = 0.0;
  Vector ep, e0;                 // empirical prediction distributions
  int samples_used = 0;
};

/// Monte-Carlo certification: MAX paired noise draws (per time step, one
/// independent n-dimensional Gaussian, tiled across the T columns), class
/// histograms EP (mean-shifted noise) and E0 (zero-mean noise), then the
/// verdict split: Declined when the argmaxes differ, CertifiedTrivially
/// with delta = ||mu_P||_inf when EP is one-hot, otherwise Certified with
/// the Theorem-2 delta from EP's top-two probabilities. Per-sample derived
/// seeds make serial and parallel runs identical. By default n_P and n_0
/// share each underlying standard-normal draw (variance reduction for the
/// argmax comparison); independent_draws restores fully separate draws.
CertificationReport certify(const std::function<int(const Tensor&)>& predict, int label_count,
                            const Tensor& x, const NoiseSpec& noise);
CertificationReport certify(const Network& net, const Tensor& x, const NoiseSpec& noise);

/// JSON serialization, format tag "tsastat-cert-v1".
std::string report_to_json(const CertificationReport& report);

/// Certified-bound conversions for other features of one channel with mean
/// mu, standard deviation sigma and third/fourth moment sums taken about
/// mu + offset: G(offset) = sum((x_i - mu - offset)^3)/T and K likewise.
/// Each conversion carries the formula printed in the source derivation
/// (evaluated at offset +delta) next to the interval-consistent bound
/// max over offsets in [-delta, +delta], which lands on an endpoint since
/// G is strictly decreasing and K is convex. The two disagree whenever the
/// third central moment pushes the extreme to -delta; the discrepancy flag
/// surfaces that instead of silently picking one. The RMS conversion
/// delta^2 + sigma^2 is dimensionally a squared RMS; the square root is
/// reported alongside.
struct FeatureBounds {
  double mean = 0.0;             // channel mean
  double sigma = 0.0;            // channel standard deviation
  double rms_literal = 0.0;      // delta^2 + sigma^2
  double rms_root = 0.0;         // sqrt(delta^2 + sigma^2)
  double skew_literal = 0.0;     // |G(+delta)| / sigma^3
  double skew_bound = 0.0;       // max(|G(-delta)|, |G(+delta)|) / sigma^3
  bool skew_discrepancy = false;
  double kurt_literal = 0.0;     // K(+delta) / sigma^4 - 3
  double kurt_bound = 0.0;       // max(K(-delta), K(+delta)) / sigma^4 - 3
  bool kurt_discrepancy = false;
};
std::vector<FeatureBounds> convert_bounds(double delta, const Tensor& series);

}  // namespace tsastat
