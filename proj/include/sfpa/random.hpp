#pragma once

// Seeded generation of signflips, column permutations, variance profiles and
// spiked signal-plus-noise models.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "sfpa/error.hpp"
#include "sfpa/matrix.hpp"

namespace sfpa {

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace detail

using Engine = std::mt19937_64;

// A reproducible random stream: (master_seed, stream_id) fully determines the
// generator state.
struct SeedSpec {
  std::uint64_t master_seed = 0;
  std::uint64_t stream_id = 0;

  // Stream `k` nested under this one, e.g. trial k of run `stream_id`.
  SeedSpec child(std::uint64_t k) const noexcept {
    return {detail::splitmix64(master_seed ^ detail::splitmix64(stream_id + 0x632be59bd9b4e019ULL)), k};
  }

  friend bool operator==(const SeedSpec&, const SeedSpec&) = default;
};

inline Engine make_engine(const SeedSpec& seed) {
  const std::uint64_t a = detail::splitmix64(seed.master_seed);
  const std::uint64_t b = detail::splitmix64(a ^ detail::splitmix64(seed.stream_id));
  const std::uint64_t c = detail::splitmix64(b);
  std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                    static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32),
                    static_cast<std::uint32_t>(c), static_cast<std::uint32_t>(c >> 32)};
  return Engine(seq);
}

// Matrix of i.i.d. +-1 entries.
class RademacherMatrix {
 public:
  explicit RademacherMatrix(Matrix signs) : signs_(std::move(signs)) {
    if (!(signs_.array().abs() == 1.0).all()) throw InputError("Rademacher entries must be +1 or -1");
  }

  std::size_t n() const noexcept { return static_cast<std::size_t>(signs_.rows()); }
  std::size_t p() const noexcept { return static_cast<std::size_t>(signs_.cols()); }
  const Matrix& signs() const noexcept { return signs_; }

 private:
  Matrix signs_;
};

inline RademacherMatrix gen_rademacher(const SeedSpec& seed, std::size_t n, std::size_t p) {
  if (n < 1 || p < 1) throw InputError("Rademacher matrix needs n, p >= 1");
  Engine eng = make_engine(seed);
  Matrix s(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  double* data = s.data();
  const std::size_t total = n * p;
  std::uint64_t bits = 0;
  for (std::size_t i = 0; i < total; ++i) {
    if (i % 64 == 0) bits = eng();
    data[i] = (bits & 1ULL) ? 1.0 : -1.0;
    bits >>= 1;
  }
  return RademacherMatrix(std::move(s));
}

inline DataMatrix signflip(const DataMatrix& x, const RademacherMatrix& r) {
  if (x.n() != r.n() || x.p() != r.p()) throw InputError("signflip: shape mismatch");
  return DataMatrix(Matrix(x.values().cwiseProduct(r.signs())));
}

// One permutation of {0..n-1} per column.
class ColumnPermutation {
 public:
  ColumnPermutation(std::size_t n, std::vector<std::vector<std::size_t>> perms)
      : n_(n), perms_(std::move(perms)) {
    std::vector<char> seen(n_);
    for (const auto& pi : perms_) {
      if (pi.size() != n_) throw InputError("column permutation has wrong length");
      std::fill(seen.begin(), seen.end(), 0);
      for (std::size_t v : pi) {
        if (v >= n_ || seen[v]) throw InputError("column permutation is not a bijection");
        seen[v] = 1;
      }
    }
  }

  static ColumnPermutation identity(std::size_t n, std::size_t p) {
    std::vector<std::size_t> id(n);
    std::iota(id.begin(), id.end(), std::size_t{0});
    return ColumnPermutation(n, std::vector<std::vector<std::size_t>>(p, id));
  }

  std::size_t n() const noexcept { return n_; }
  std::size_t p() const noexcept { return perms_.size(); }
  const std::vector<std::size_t>& column(std::size_t j) const { return perms_[j]; }

 private:
  std::size_t n_;
  std::vector<std::vector<std::size_t>> perms_;
};

inline ColumnPermutation gen_column_permutation(const SeedSpec& seed, std::size_t n, std::size_t p) {
  if (n < 1 || p < 1) throw InputError("column permutation needs n, p >= 1");
  Engine eng = make_engine(seed);
  std::vector<std::vector<std::size_t>> perms(p, std::vector<std::size_t>(n));
  for (auto& pi : perms) {
    std::iota(pi.begin(), pi.end(), std::size_t{0});
    std::shuffle(pi.begin(), pi.end(), eng);
  }
  return ColumnPermutation(n, std::move(perms));
}

// out(i, j) = x(pi_j(i), j)
inline DataMatrix permute_columns(const DataMatrix& x, const ColumnPermutation& pi) {
  if (x.n() != pi.n() || x.p() != pi.p()) throw InputError("permute_columns: shape mismatch");
  const Matrix& a = x.values();
  Matrix out(a.rows(), a.cols());
  for (Eigen::Index j = 0; j < a.cols(); ++j) {
    const auto& col = pi.column(static_cast<std::size_t>(j));
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      out(i, j) = a(static_cast<Eigen::Index>(col[static_cast<std::size_t>(i)]), j);
  }
  return DataMatrix(std::move(out));
}

// Nonnegative n x p matrix T; noise entry (i, j) has variance T(i,j)^2 / n.
class VarianceProfile {
 public:
  explicit VarianceProfile(Matrix t) : t_(std::move(t)) {
    if (t_.rows() < 1 || t_.cols() < 1) throw InputError("variance profile must be non-empty");
    if (!t_.allFinite() || (t_.array() < 0).any())
      throw InputError("variance profile entries must be finite and nonnegative");
  }

  // Every entry has variance t2 / n.
  static VarianceProfile homogeneous(std::size_t n, std::size_t p, double t2 = 1.0) {
    check_t2(t2);
    return VarianceProfile(Matrix::Constant(idx(n), idx(p), std::sqrt(t2)));
  }

  // Consecutive blocks of rows; block b covers round(fraction_b * n) rows (the
  // last block takes the remainder) with variance t2_b / n.
  static VarianceProfile row_blocks(std::size_t n, std::size_t p,
                                    std::span<const std::pair<double, double>> blocks) {
    const auto counts = block_counts(n, blocks);
    Matrix t(idx(n), idx(p));
    std::size_t row = 0;
    for (std::size_t b = 0; b < blocks.size(); ++b) {
      const double s = std::sqrt(blocks[b].second);
      for (std::size_t c = 0; c < counts[b]; ++c) t.row(idx(row++)).setConstant(s);
    }
    return VarianceProfile(std::move(t));
  }

  // Features split by `feature_fraction`: the first group has variance lo/n for
  // the first half of the samples and hi/n for the rest; remaining features have
  // variance rest/n throughout.
  static VarianceProfile feature_sample_grid(std::size_t n, std::size_t p, double feature_fraction = 0.8,
                                             double lo = 0.5, double hi = 1.5, double rest = 1.0) {
    check_t2(lo);
    check_t2(hi);
    check_t2(rest);
    if (!(feature_fraction >= 0.0 && feature_fraction <= 1.0))
      throw InputError("feature fraction must lie in [0, 1]");
    const auto grid_features = static_cast<std::size_t>(std::llround(feature_fraction * static_cast<double>(p)));
    const std::size_t half = n / 2;
    Matrix t(idx(n), idx(p));
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t i = 0; i < n; ++i)
        t(idx(i), idx(j)) = std::sqrt(j < grid_features ? (i < half ? lo : hi) : rest);
    return VarianceProfile(std::move(t));
  }

  std::size_t n() const noexcept { return static_cast<std::size_t>(t_.rows()); }
  std::size_t p() const noexcept { return static_cast<std::size_t>(t_.cols()); }
  const Matrix& t() const noexcept { return t_; }

  // Per-row mean of T^2 (the row variances times n for row-constant profiles).
  std::vector<double> row_mean_squares() const {
    Vector v = t_.array().square().rowwise().mean();
    return {v.data(), v.data() + v.size()};
  }

  // eta_j^2 = (1/n) sum_i T_ij^2
  std::vector<double> column_mean_squares() const {
    Vector v = t_.array().square().colwise().mean().transpose();
    return {v.data(), v.data() + v.size()};
  }

 private:
  static Eigen::Index idx(std::size_t v) { return static_cast<Eigen::Index>(v); }
  static void check_t2(double t2) {
    if (!(t2 >= 0.0) || !std::isfinite(t2)) throw InputError("variance must be finite and nonnegative");
  }
  static std::vector<std::size_t> block_counts(std::size_t n, std::span<const std::pair<double, double>> blocks) {
    if (blocks.empty()) throw InputError("row_blocks needs at least one block");
    double total = 0.0;
    for (const auto& [fraction, t2] : blocks) {
      if (!(fraction >= 0.0)) throw InputError("block fractions must be nonnegative");
      check_t2(t2);
      total += fraction;
    }
    if (std::abs(total - 1.0) > 1e-9) throw InputError("block fractions must sum to 1");
    std::vector<std::size_t> counts(blocks.size());
    std::size_t used = 0;
    for (std::size_t b = 0; b + 1 < blocks.size(); ++b) {
      counts[b] = std::min(n - used, static_cast<std::size_t>(std::llround(blocks[b].first * static_cast<double>(n))));
      used += counts[b];
    }
    counts.back() = n - used;
    return counts;
  }

  Matrix t_;
};

// Sharp sub-Gaussian, zero-mean, unit-variance noise families.
enum class NoiseDist { gaussian, rademacher, uniform_pm_sqrt3 };

inline Matrix sample_unit_noise(Engine& eng, std::size_t n, std::size_t p, NoiseDist dist) {
  Matrix e(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  double* data = e.data();
  const std::size_t total = n * p;
  switch (dist) {
    case NoiseDist::gaussian: {
      std::normal_distribution<double> g;
      for (std::size_t i = 0; i < total; ++i) data[i] = g(eng);
      break;
    }
    case NoiseDist::rademacher: {
      std::uint64_t bits = 0;
      for (std::size_t i = 0; i < total; ++i) {
        if (i % 64 == 0) bits = eng();
        data[i] = (bits & 1ULL) ? 1.0 : -1.0;
        bits >>= 1;
      }
      break;
    }
    case NoiseDist::uniform_pm_sqrt3: {
      const double r = std::sqrt(3.0);
      std::uniform_real_distribution<double> u(-r, r);
      for (std::size_t i = 0; i < total; ++i) data[i] = u(eng);
      break;
    }
  }
  return e;
}

// Uniform direction on the unit sphere in R^dim.
inline Vector sample_unit_vector(Engine& eng, std::size_t dim) {
  std::normal_distribution<double> g;
  Vector v(static_cast<Eigen::Index>(dim));
  double len = 0.0;
  do {
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = g(eng);
    len = v.norm();
  } while (len == 0.0);
  return v / len;
}

// X = S + N with S = sum_i theta_i u_i v_i^T and N = n^{-1/2} (T o E).
struct SpikeModel {
  DataMatrix x;
  DataMatrix signal;
  DataMatrix noise;
  std::vector<Vector> left;
  std::vector<Vector> right;
};

inline SpikeModel gen_spike_model(const SeedSpec& seed, std::size_t n, std::size_t p,
                                  std::span<const double> strengths, const VarianceProfile& profile,
                                  NoiseDist noise_dist = NoiseDist::gaussian) {
  if (n < 1 || p < 1) throw InputError("spike model needs n, p >= 1");
  if (profile.n() != n || profile.p() != p) throw InputError("variance profile shape mismatch");
  for (double theta : strengths)
    if (!(theta >= 0.0) || !std::isfinite(theta)) throw InputError("spike strengths must be finite and >= 0");

  Engine eng = make_engine(seed);
  SpikeModel out;
  Matrix s = Matrix::Zero(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(p));
  for (double theta : strengths) {
    Vector u = sample_unit_vector(eng, n);
    Vector v = sample_unit_vector(eng, p);
    s.noalias() += theta * u * v.transpose();
    out.left.push_back(std::move(u));
    out.right.push_back(std::move(v));
  }
  Matrix noise = sample_unit_noise(eng, n, p, noise_dist);
  noise.array() *= profile.t().array() / std::sqrt(static_cast<double>(n));
  out.x = DataMatrix(Matrix(s + noise));
  out.signal = DataMatrix(std::move(s));
  out.noise = DataMatrix(std::move(noise));
  return out;
}

}  // namespace sfpa
