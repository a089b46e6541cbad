#pragma once

// Dense data matrices, the matrix norms used throughout the library, singular
// value computation and empirical spectral distributions.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "sfpa/error.hpp"

namespace sfpa {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// n x p real matrix (samples x features) with finite entries.
class DataMatrix {
 public:
  DataMatrix() : values_(1, 1) { values_.setZero(); }

  explicit DataMatrix(Matrix values) : values_(std::move(values)) {
    if (values_.rows() < 1 || values_.cols() < 1)
      throw InputError("data matrix must have at least one row and one column");
    if (!values_.allFinite()) throw InputError("data matrix contains non-finite entries");
  }

  DataMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    const auto n = static_cast<Eigen::Index>(rows.size());
    const auto p = n ? static_cast<Eigen::Index>(rows.begin()->size()) : 0;
    Matrix m(n, p);
    Eigen::Index i = 0;
    for (const auto& row : rows) {
      if (static_cast<Eigen::Index>(row.size()) != p) throw InputError("ragged initializer list");
      Eigen::Index j = 0;
      for (double v : row) m(i, j++) = v;
      ++i;
    }
    *this = DataMatrix(std::move(m));
  }

  static DataMatrix zeros(std::size_t n, std::size_t p) {
    return DataMatrix(Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p)));
  }

  std::size_t n() const noexcept { return static_cast<std::size_t>(values_.rows()); }
  std::size_t p() const noexcept { return static_cast<std::size_t>(values_.cols()); }
  std::size_t min_dim() const noexcept { return std::min(n(), p()); }
  double aspect_ratio() const noexcept { return static_cast<double>(p()) / static_cast<double>(n()); }

  double operator()(std::size_t i, std::size_t j) const {
    return values_(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  }

  const Matrix& values() const noexcept { return values_; }

  DataMatrix transpose() const { return DataMatrix(Matrix(values_.transpose())); }

  friend bool operator==(const DataMatrix& a, const DataMatrix& b) {
    return a.values_.rows() == b.values_.rows() && a.values_.cols() == b.values_.cols() &&
           a.values_ == b.values_;
  }

 private:
  Matrix values_;
};

// Descending singular values of an n x p matrix.
struct SingularSpectrum {
  std::vector<double> values;
  std::size_t n = 0;
  std::size_t p = 0;

  std::size_t size() const noexcept { return values.size(); }
  double operator[](std::size_t k) const { return values[k]; }
};

enum class SpectrumBackend {
  bidiagonal,  // divide-and-conquer SVD on the bidiagonal form
  gram,        // symmetric eigensolver on the smaller Gram matrix; faster, less accurate for tiny values
};

inline SingularSpectrum singular_values(const DataMatrix& x,
                                        SpectrumBackend backend = SpectrumBackend::bidiagonal) {
  SingularSpectrum out;
  out.n = x.n();
  out.p = x.p();
  const Matrix& a = x.values();
  if (backend == SpectrumBackend::bidiagonal) {
    Eigen::BDCSVD<Matrix> svd(a);
    const Vector& s = svd.singularValues();
    out.values.assign(s.data(), s.data() + s.size());
  } else {
    Matrix g = a.cols() <= a.rows() ? Matrix(a.transpose() * a) : Matrix(a * a.transpose());
    Eigen::SelfAdjointEigenSolver<Matrix> es(g, Eigen::EigenvaluesOnly);
    const Vector& ev = es.eigenvalues();
    out.values.resize(static_cast<std::size_t>(ev.size()));
    for (Eigen::Index i = 0; i < ev.size(); ++i)
      out.values[static_cast<std::size_t>(i)] = std::sqrt(std::max(ev(i), 0.0));
  }
  std::stable_sort(out.values.begin(), out.values.end(), std::greater<>());
  return out;
}

struct FullSvd {};

// Power iteration on X^T X (or X X^T, whichever is smaller). Stops once the
// eigen-residual ||G v - lambda v|| drops below tol * lambda.
struct PowerIteration {
  double tol = 1e-10;
  std::size_t max_iter = 5000;
};

using LeadingMethod = std::variant<FullSvd, PowerIteration>;

namespace detail {

inline double power_iteration(const Matrix& a, const PowerIteration& opts) {
  if (!(opts.tol > 0)) throw InputError("power iteration tolerance must be positive");
  if (a.squaredNorm() == 0.0) return 0.0;
  const bool right = a.cols() <= a.rows();
  const Eigen::Index dim = right ? a.cols() : a.rows();

  // Fixed-seed start vector: deterministic and almost surely not orthogonal to
  // the leading singular vector.
  std::mt19937_64 eng(0x5f3759dfULL);
  std::normal_distribution<double> gauss;
  Vector v(dim);
  for (Eigen::Index i = 0; i < dim; ++i) v(i) = gauss(eng);
  v.normalize();

  Vector w, y;
  double lambda = 0.0;
  double residual = 0.0;
  for (std::size_t it = 1; it <= opts.max_iter; ++it) {
    if (right) {
      w.noalias() = a * v;
      y.noalias() = a.transpose() * w;
    } else {
      w.noalias() = a.transpose() * v;
      y.noalias() = a * w;
    }
    lambda = v.dot(y);
    residual = (y - lambda * v).norm();
    if (residual <= opts.tol * lambda) return std::sqrt(std::max(lambda, 0.0));
    const double len = y.norm();
    if (len == 0.0) return 0.0;
    v = y / len;
  }
  throw ConvergenceError("power iteration did not converge", std::sqrt(std::max(lambda, 0.0)),
                         residual, opts.max_iter);
}

}  // namespace detail

inline double leading_singular_value(const DataMatrix& x, LeadingMethod method = FullSvd{}) {
  if (const auto* it = std::get_if<PowerIteration>(&method))
    return detail::power_iteration(x.values(), *it);
  return singular_values(x).values.front();
}

// The k largest singular values by Lanczos on the smaller Gram operator with
// full reorthogonalization. Ritz values are accepted once every residual is
// below tol * sigma_1^2; the Krylov space grows up to the full dimension, where
// the result is exact. Breakdown restarts from a fresh orthogonal vector, so
// repeated singular values are found.
inline SingularSpectrum top_singular_values(const DataMatrix& x, std::size_t k, double tol = 1e-10) {
  const Matrix& a = x.values();
  const bool right = a.cols() <= a.rows();
  const Eigen::Index dim = right ? a.cols() : a.rows();
  if (k < 1) throw InputError("top_singular_values needs k >= 1");
  k = std::min<std::size_t>(k, static_cast<std::size_t>(dim));

  SingularSpectrum out;
  out.n = x.n();
  out.p = x.p();
  const double scale = a.squaredNorm();
  if (scale == 0.0) {
    out.values.assign(k, 0.0);
    return out;
  }

  std::mt19937_64 eng(0x2545f491ULL);
  std::normal_distribution<double> gauss;
  auto random_unit = [&](const Matrix& basis, Eigen::Index used) {
    Vector v(dim);
    for (;;) {
      for (Eigen::Index i = 0; i < dim; ++i) v(i) = gauss(eng);
      for (int pass = 0; pass < 2; ++pass)
        v.noalias() -= basis.leftCols(used) * (basis.leftCols(used).transpose() * v);
      const double len = v.norm();
      if (len > 1e-8) return Vector(v / len);
    }
  };

  Matrix g = Matrix::Zero(dim, dim);
  if (right)
    g.selfadjointView<Eigen::Lower>().rankUpdate(a.transpose());
  else
    g.selfadjointView<Eigen::Lower>().rankUpdate(a);

  Matrix q(dim, dim);
  std::vector<double> alpha, beta;
  q.col(0) = random_unit(q, 0);
  Vector w;
  Eigen::Index m = 0;
  Eigen::Index next_check = std::max<Eigen::Index>(static_cast<Eigen::Index>(k) + 8, 32);
  for (;;) {
    w.noalias() = g.selfadjointView<Eigen::Lower>() * q.col(m);
    alpha.push_back(q.col(m).dot(w));
    for (int pass = 0; pass < 2; ++pass) w.noalias() -= q.leftCols(m + 1) * (q.leftCols(m + 1).transpose() * w);
    double b = w.norm();
    ++m;

    const bool full = m == dim;
    const bool breakdown = b <= 1e-12 * std::sqrt(scale);
    if (full || breakdown || m >= next_check) {
      next_check = std::max(m + 8, m + m / 4);
      Eigen::SelfAdjointEigenSolver<Matrix> es;
      const Vector d = Eigen::Map<const Vector>(alpha.data(), m);
      const Vector e = m > 1 ? Vector(Eigen::Map<const Vector>(beta.data(), m - 1)) : Vector();
      es.computeFromTridiagonal(d, e, Eigen::ComputeEigenvectors);
      const Vector& ev = es.eigenvalues();
      const double top = ev(m - 1);
      bool converged = !breakdown && static_cast<std::size_t>(m) >= k;
      for (std::size_t i = 0; i < k && converged; ++i) {
        const Eigen::Index idx = m - 1 - static_cast<Eigen::Index>(i);
        converged = std::abs(b * es.eigenvectors()(m - 1, idx)) <= tol * top;
      }
      if (converged || full) {
        for (std::size_t i = 0; i < k; ++i)
          out.values.push_back(std::sqrt(std::max(ev(m - 1 - static_cast<Eigen::Index>(i)), 0.0)));
        return out;
      }
    }
    if (breakdown) {
      // Invariant subspace found; continue in its orthogonal complement.
      q.col(m) = random_unit(q, m);
      b = 0.0;
    } else {
      q.col(m) = w / b;
    }
    beta.push_back(b);
  }
}

// Norms of the form ||A||_p (induced), ||A||_{p,q} (entrywise, column-wise
// inner norm) and Schatten norms.
enum class NormType {
  op,
  frobenius,
  induced_1,          // max absolute column sum
  induced_inf,        // max absolute row sum
  entrywise,          // ||A||_{k,k}
  two_inf,            // max column l2 norm
  two_inf_transpose,  // max row l2 norm
  inf_inf,            // max absolute entry
  two_k,              // l_k norm of the column l2 norms
  schatten,
};

struct NormKind {
  NormType type = NormType::op;
  double k = 2.0;

  static constexpr NormKind op() { return {NormType::op, 2.0}; }
  static constexpr NormKind frobenius() { return {NormType::frobenius, 2.0}; }
  static constexpr NormKind induced_1() { return {NormType::induced_1, 1.0}; }
  static constexpr NormKind induced_inf() { return {NormType::induced_inf, 1.0}; }
  static constexpr NormKind entrywise(double k) { return {NormType::entrywise, k}; }
  static constexpr NormKind two_inf() { return {NormType::two_inf, 2.0}; }
  static constexpr NormKind two_inf_transpose() { return {NormType::two_inf_transpose, 2.0}; }
  static constexpr NormKind inf_inf() { return {NormType::inf_inf, 1.0}; }
  static constexpr NormKind two_k(double k) { return {NormType::two_k, k}; }
  static constexpr NormKind schatten(double k) { return {NormType::schatten, k}; }
};

inline double norm(const DataMatrix& x, NormKind which) {
  const Matrix& a = x.values();
  switch (which.type) {
    case NormType::op:
      return leading_singular_value(x);
    case NormType::frobenius:
      return a.norm();
    case NormType::induced_1:
      return a.cwiseAbs().colwise().sum().maxCoeff();
    case NormType::induced_inf:
      return a.cwiseAbs().rowwise().sum().maxCoeff();
    case NormType::inf_inf:
      return a.cwiseAbs().maxCoeff();
    case NormType::two_inf:
      return a.colwise().norm().maxCoeff();
    case NormType::two_inf_transpose:
      return a.rowwise().norm().maxCoeff();
    case NormType::entrywise:
      if (!(which.k >= 1.0) || !std::isfinite(which.k)) throw InputError("entrywise norm needs k >= 1");
      return std::pow(a.cwiseAbs().array().pow(which.k).sum(), 1.0 / which.k);
    case NormType::two_k: {
      if (!(which.k >= 1.0) || !std::isfinite(which.k)) throw InputError("(2,k) norm needs k >= 1");
      return std::pow(a.colwise().norm().array().pow(which.k).sum(), 1.0 / which.k);
    }
    case NormType::schatten: {
      if (!(which.k >= 1.0) || !std::isfinite(which.k)) throw InputError("Schatten norm needs k >= 1");
      double s = 0.0;
      for (double v : singular_values(x).values) s += std::pow(v, which.k);
      return std::pow(s, 1.0 / which.k);
    }
  }
  throw InputError("unknown norm kind");
}

enum class SpectrumKind { singular, eigenvalue };

// Uniform distribution on a set of singular values or eigenvalues.
class EmpiricalSpectralDistribution {
 public:
  EmpiricalSpectralDistribution(std::vector<double> points, SpectrumKind kind)
      : points_(std::move(points)), kind_(kind) {
    std::sort(points_.begin(), points_.end());
  }

  const std::vector<double>& points() const noexcept { return points_; }
  SpectrumKind kind() const noexcept { return kind_; }
  std::size_t size() const noexcept { return points_.size(); }

  // Right-continuous step CDF: fraction of points <= x.
  double cdf(double x) const {
    if (points_.empty()) return 0.0;
    const auto it = std::upper_bound(points_.begin(), points_.end(), x);
    return static_cast<double>(it - points_.begin()) / static_cast<double>(points_.size());
  }

  // Normalized histogram (densities) over [edges[b], edges[b+1]); the last bin
  // is closed on the right.
  std::vector<double> histogram(std::span<const double> edges) const {
    if (edges.size() < 2) throw InputError("histogram needs at least two bin edges");
    if (!std::is_sorted(edges.begin(), edges.end())) throw InputError("bin edges must be sorted");
    std::vector<double> out(edges.size() - 1, 0.0);
    if (points_.empty()) return out;
    for (double x : points_) {
      if (x < edges.front() || x > edges.back()) continue;
      auto it = std::upper_bound(edges.begin(), edges.end(), x);
      auto bin = static_cast<std::size_t>(it - edges.begin());
      bin = bin == 0 ? 0 : bin - 1;
      if (bin >= out.size()) bin = out.size() - 1;
      out[bin] += 1.0;
    }
    const double total = static_cast<double>(points_.size());
    for (std::size_t b = 0; b < out.size(); ++b) {
      const double width = edges[b + 1] - edges[b];
      out[b] = width > 0 ? out[b] / (total * width) : 0.0;
    }
    return out;
  }

  // Rightmost point of the support.
  double upper_edge() const { return points_.empty() ? 0.0 : points_.back(); }

 private:
  std::vector<double> points_;
  SpectrumKind kind_;
};

inline EmpiricalSpectralDistribution esd(const SingularSpectrum& s, SpectrumKind kind) {
  std::vector<double> pts = s.values;
  if (kind == SpectrumKind::eigenvalue)
    for (double& v : pts) v *= v;
  return EmpiricalSpectralDistribution(std::move(pts), kind);
}

// sup_x |F_a(x) - F_b(x)| between two empirical distributions.
inline double ks_distance(const EmpiricalSpectralDistribution& a,
                          const EmpiricalSpectralDistribution& b) {
  double d = 0.0;
  for (const auto* pts : {&a.points(), &b.points()})
    for (double x : *pts) d = std::max(d, std::abs(a.cdf(x) - b.cdf(x)));
  return d;
}

// sup_x |F(x) - G(x)| for an empirical F and a continuous CDF G. Checks both
// sides of every jump.
template <class Cdf>
double ks_distance(const EmpiricalSpectralDistribution& a, Cdf&& cdf) {
  const auto& pts = a.points();
  const double m = static_cast<double>(pts.size());
  double d = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double g = cdf(pts[i]);
    d = std::max({d, std::abs(static_cast<double>(i + 1) / m - g), std::abs(static_cast<double>(i) / m - g)});
  }
  return d;
}

}  // namespace sfpa
