#pragma once

// Computable quantities behind signal destruction by random signflips: the
// decay coefficient, norm-based sufficient and necessary conditions, rate
// regimes for outer-product signals, factor-loading delocalization and
// perceptibility of factors relative to a noise edge.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "sfpa/error.hpp"
#include "sfpa/matrix.hpp"
#include "sfpa/parallel.hpp"
#include "sfpa/random.hpp"

namespace sfpa {

// rho_inf(X) = max_i c_(i) sqrt(log i), where c_(1) >= c_(2) >= ... are the
// column max-abs values of the symmetric embedding [0 X; X^T 0], i.e. the row
// and column max-abs values of X.
inline double decay_coefficient(const DataMatrix& x) {
  const Matrix a = x.values().cwiseAbs();
  std::vector<double> c;
  c.reserve(x.n() + x.p());
  for (Eigen::Index j = 0; j < a.cols(); ++j) c.push_back(a.col(j).maxCoeff());
  for (Eigen::Index i = 0; i < a.rows(); ++i) c.push_back(a.row(i).maxCoeff());
  std::sort(c.begin(), c.end(), std::greater<>());
  double rho = 0.0;
  for (std::size_t i = 1; i < c.size(); ++i)
    rho = std::max(rho, c[i] * std::sqrt(std::log(static_cast<double>(i + 1))));
  return rho;
}

// The five sign-invariant lower bounds on ||S|| that must vanish for
// E||R o S|| -> 0.
struct NecessaryNorms {
  double max_entry = 0.0;           // ||S||_{inf,inf}
  double frobenius_over_sqrt_n = 0.0;
  double frobenius_over_sqrt_p = 0.0;
  double induced_1_over_sqrt_n = 0.0;   // max column abs sum / sqrt(n)
  double induced_inf_over_sqrt_p = 0.0; // max row abs sum / sqrt(p)
};

struct DestructionReport {
  double two_inf = 0.0;    // max column l2 norm
  double two_inf_t = 0.0;  // max row l2 norm
  double rho_inf = 0.0;
  std::size_t rank = 0;
  double rank_bound_term = 0.0;  // sqrt(rank * two_inf * two_inf_t)
  double abs_opnorm = 0.0;       // || |S| ||
  double opnorm = 0.0;
  double upper_bound_op = 0.0;   // two_inf + two_inf_t + rho_inf
  double k = 4.0;
  double entrywise_k = 0.0;      // ||S||_{k,k}
  double two_k_sum = 0.0;        // ||S||_{2,k}^k + ||S^T||_{2,k}^k
  NecessaryNorms necessary;
};

// Numeric rank: singular values above 1e-10 * sigma_1.
inline std::size_t numeric_rank(const SingularSpectrum& s) {
  if (s.values.empty() || s.values.front() == 0.0) return 0;
  const double cut = 1e-10 * s.values.front();
  return static_cast<std::size_t>(std::count_if(s.values.begin(), s.values.end(), [&](double v) { return v > cut; }));
}

inline DestructionReport destruction_report(const DataMatrix& s, double k_for_entrywise = 4.0) {
  if (!(k_for_entrywise >= 2.0) || !std::isfinite(k_for_entrywise))
    throw InputError("entrywise exponent k must be >= 2");
  DestructionReport r;
  const double n = static_cast<double>(s.n());
  const double p = static_cast<double>(s.p());
  const SingularSpectrum sv = singular_values(s);
  const DataMatrix abs_s(Matrix(s.values().cwiseAbs()));

  r.two_inf = norm(s, NormKind::two_inf());
  r.two_inf_t = norm(s, NormKind::two_inf_transpose());
  r.rho_inf = decay_coefficient(s);
  r.rank = numeric_rank(sv);
  r.rank_bound_term = std::sqrt(static_cast<double>(r.rank) * r.two_inf * r.two_inf_t);
  r.abs_opnorm = leading_singular_value(abs_s);
  r.opnorm = sv.values.front();
  r.upper_bound_op = r.two_inf + r.two_inf_t + r.rho_inf;
  r.k = k_for_entrywise;
  r.entrywise_k = norm(s, NormKind::entrywise(k_for_entrywise));
  r.two_k_sum = std::pow(norm(s, NormKind::two_k(k_for_entrywise)), k_for_entrywise) +
                std::pow(norm(s.transpose(), NormKind::two_k(k_for_entrywise)), k_for_entrywise);

  const double fro = norm(s, NormKind::frobenius());
  r.necessary.max_entry = norm(s, NormKind::inf_inf());
  r.necessary.frobenius_over_sqrt_n = fro / std::sqrt(n);
  r.necessary.frobenius_over_sqrt_p = fro / std::sqrt(p);
  r.necessary.induced_1_over_sqrt_n = norm(s, NormKind::induced_1()) / std::sqrt(n);
  r.necessary.induced_inf_over_sqrt_p = norm(s, NormKind::induced_inf()) / std::sqrt(p);
  return r;
}

struct FlipNormEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  std::size_t trials = 0;
};

// Sample mean and standard error of ||R o S|| over independent signflips;
// draw t uses stream seed.child(t).
inline FlipNormEstimate monte_carlo_flip_norm(const DataMatrix& s, std::size_t trials, const SeedSpec& seed,
                                              std::size_t threads = 0) {
  if (trials < 2) throw InputError("monte_carlo_flip_norm needs at least 2 trials");
  std::vector<double> draws(trials);
  parallel_for(trials, threads, [&](std::size_t t) {
    draws[t] = leading_singular_value(signflip(s, gen_rademacher(seed.child(t), s.n(), s.p())));
  });
  FlipNormEstimate out;
  out.trials = trials;
  double sum = 0.0;
  for (double d : draws) sum += d;
  out.mean = sum / static_cast<double>(trials);
  double ss = 0.0;
  for (double d : draws) ss += (d - out.mean) * (d - out.mean);
  out.stderr_ = std::sqrt(ss / static_cast<double>(trials - 1) / static_cast<double>(trials));
  return out;
}

// sum_i theta_i (||u_i||_inf + ||v_i||_inf); vanishing along a sequence of
// sizes is sufficient for destroying a sum of outer products.
inline double outer_product_condition(std::span<const double> strengths, std::span<const double> u_inf_norms,
                                      std::span<const double> v_inf_norms) {
  if (strengths.size() != u_inf_norms.size() || strengths.size() != v_inf_norms.size())
    throw InputError("outer_product_condition: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < strengths.size(); ++i) {
    if (strengths[i] < 0 || u_inf_norms[i] < 0 || v_inf_norms[i] < 0)
      throw InputError("outer_product_condition: inputs must be nonnegative");
    acc += strengths[i] * (u_inf_norms[i] + v_inf_norms[i]);
  }
  return acc;
}

enum class Verdict { converges, not_covered };

inline const char* to_string(Verdict v) { return v == Verdict::converges ? "converges" : "not_covered"; }

// Exponents: ||u||_inf, ||v||_inf = O(p^{-alpha1} log^{-alpha2} p),
// theta = O(p^{beta1} log^{beta2} p), rank = O(p^{nu1} log^{nu2} p).
struct RateRegime {
  double alpha1 = 0, alpha2 = 0, beta1 = 0, beta2 = 0, nu1 = 0, nu2 = 0;
  Verdict verdict_l1 = Verdict::not_covered;
  Verdict verdict_as = Verdict::not_covered;  // deterministic signals
};

inline RateRegime classify_rate_regime(double alpha1, double alpha2, double beta1, double beta2, double nu1 = 0.0,
                                       double nu2 = 0.0) {
  RateRegime r{alpha1, alpha2, beta1, beta2, nu1, nu2};
  const double lead = nu1 + beta1;
  const bool strict = alpha1 > lead;
  const bool tie = alpha1 == lead && alpha2 > nu2 + beta2;
  r.verdict_l1 = strict || tie ? Verdict::converges : Verdict::not_covered;
  r.verdict_as = strict ? Verdict::converges : Verdict::not_covered;
  return r;
}

// Whether unit vectors can delocalize at the given rates at all.
inline bool delocalization_feasible(double alpha1, double alpha2) {
  if (alpha1 > 0.0 && alpha1 < 0.5) return true;
  if (alpha1 == 0.0) return alpha2 >= 0.0;
  if (alpha1 == 0.5) return alpha2 <= 0.0;
  return false;
}

struct LoadingCheck {
  double sum_inf = 0.0;    // sum_k ||f_k||_inf
  double scaled_l2 = 0.0;  // n^{-1/2} (log n)^{1/2} sum_k ||f_k||_2
};

// `loadings` is p x r with one scaled loading vector per column.
inline LoadingCheck factor_loading_check(const DataMatrix& loadings, std::size_t n) {
  if (n < 2) throw InputError("factor_loading_check needs n >= 2");
  const Matrix& f = loadings.values();
  LoadingCheck out;
  double l2 = 0.0;
  for (Eigen::Index k = 0; k < f.cols(); ++k) {
    out.sum_inf += f.col(k).cwiseAbs().maxCoeff();
    l2 += f.col(k).norm();
  }
  const double dn = static_cast<double>(n);
  out.scaled_l2 = std::sqrt(std::log(dn) / dn) * l2;
  return out;
}

enum class Perceptibility { perceptible, imperceptible, marginal };

inline const char* to_string(Perceptibility p) {
  switch (p) {
    case Perceptibility::perceptible:
      return "perceptible";
    case Perceptibility::imperceptible:
      return "imperceptible";
    default:
      return "marginal";
  }
}

struct PerceptibilityVerdict {
  std::vector<Perceptibility> labels;
  double noise_edge = 0.0;
  double margin = 0.0;
};

inline PerceptibilityVerdict perceptibility(const SingularSpectrum& data_sv, double noise_edge, double epsilon) {
  if (!(epsilon >= 0.0)) throw InputError("perceptibility margin must be >= 0");
  PerceptibilityVerdict out{{}, noise_edge, epsilon};
  out.labels.reserve(data_sv.size());
  for (double s : data_sv.values) {
    if (s > noise_edge + epsilon)
      out.labels.push_back(Perceptibility::perceptible);
    else if (s < noise_edge - epsilon)
      out.labels.push_back(Perceptibility::imperceptible);
    else
      out.labels.push_back(Perceptibility::marginal);
  }
  return out;
}

}  // namespace sfpa
