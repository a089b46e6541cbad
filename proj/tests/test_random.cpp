#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

#include "sfpa/matrix.hpp"
#include "sfpa/random.hpp"

using namespace sfpa;

namespace {

// Two-sample Kolmogorov-Smirnov statistic, written out independently of the
// library's ESD code.
double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

}  // namespace

TEST(SeedSpec, ChildStreamsAreDistinctAndStable) {
  const SeedSpec s{42, 7};
  EXPECT_EQ(s.child(3), s.child(3));
  EXPECT_FALSE(s.child(3) == s.child(4));
  EXPECT_FALSE(s.child(0) == s);
  std::set<std::pair<std::uint64_t, std::uint64_t>> seen;
  for (std::uint64_t k = 0; k < 1000; ++k) {
    const auto c = s.child(k);
    seen.insert({c.master_seed, c.stream_id});
  }
  EXPECT_EQ(seen.size(), 1000u);
}

TEST(Rademacher, DeterministicAndSigned) {
  const auto a = gen_rademacher({1, 2}, 30, 20);
  const auto b = gen_rademacher({1, 2}, 30, 20);
  const auto c = gen_rademacher({1, 3}, 30, 20);
  EXPECT_EQ(a.signs(), b.signs());
  EXPECT_NE(a.signs(), c.signs());
  EXPECT_TRUE((a.signs().array().abs() == 1.0).all());
}

TEST(Rademacher, MeanNearZero) {
  const auto r = gen_rademacher({99, 0}, 100, 100);
  EXPECT_LE(std::abs(r.signs().mean()), 0.04);
}

TEST(Rademacher, RejectsNonSigns) {
  Matrix m = Matrix::Ones(2, 2);
  m(0, 1) = 0.5;
  EXPECT_THROW(RademacherMatrix{m}, InputError);
}

TEST(Signflip, ElementaryCases) {
  const DataMatrix x{{1, -2, 3}, {4, 5, -6}};
  EXPECT_EQ(signflip(x, RademacherMatrix(Matrix::Ones(2, 3))), x);
  const DataMatrix neg = signflip(x, RademacherMatrix(Matrix(-Matrix::Ones(2, 3))));
  EXPECT_EQ(neg.values(), Matrix(-x.values()));
  const auto s0 = singular_values(x);
  const auto s1 = singular_values(neg);
  for (std::size_t k = 0; k < s0.size(); ++k) EXPECT_NEAR(s0[k], s1[k], 1e-12);
  const DataMatrix y = signflip(x, gen_rademacher({5, 5}, 2, 3));
  EXPECT_EQ(y.values().cwiseAbs(), x.values().cwiseAbs());
  EXPECT_EQ(y.values().norm(), x.values().norm());
  EXPECT_THROW(signflip(x, gen_rademacher({5, 5}, 3, 2)), InputError);
}

TEST(ColumnPermutation, IdentityAndValidation) {
  const DataMatrix x{{1, 2}, {3, 4}, {5, 6}};
  EXPECT_EQ(permute_columns(x, ColumnPermutation::identity(3, 2)), x);
  EXPECT_THROW(ColumnPermutation(3, {{0, 1, 1}, {0, 1, 2}}), InputError);
  EXPECT_THROW(ColumnPermutation(3, {{0, 1, 3}}), InputError);
  EXPECT_THROW(permute_columns(x, ColumnPermutation::identity(3, 3)), InputError);
}

TEST(ColumnPermutation, EntryRuleAndColumnMultisets) {
  std::mt19937_64 eng(3);
  std::normal_distribution<double> g;
  Matrix m(40, 6);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(eng);
  const DataMatrix x(m);
  const auto pi = gen_column_permutation({8, 1}, 40, 6);
  const DataMatrix y = permute_columns(x, pi);
  for (std::size_t j = 0; j < 6; ++j) {
    std::vector<std::size_t> image = pi.column(j);
    std::sort(image.begin(), image.end());
    for (std::size_t i = 0; i < 40; ++i) EXPECT_EQ(image[i], i);
    for (std::size_t i = 0; i < 40; ++i) EXPECT_EQ(y(i, j), x(pi.column(j)[i], j));
    std::vector<double> a(m.col(j).data(), m.col(j).data() + 40);
    std::vector<double> b(y.values().col(j).data(), y.values().col(j).data() + 40);
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    EXPECT_EQ(a, b);
  }
  const auto again = gen_column_permutation({8, 1}, 40, 6);
  for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(again.column(j), pi.column(j));
}

TEST(VarianceProfile, Constructors) {
  const auto h = VarianceProfile::homogeneous(4, 3, 2.0);
  EXPECT_TRUE((h.t().array() == std::sqrt(2.0)).all());

  const std::vector<std::pair<double, double>> blocks{{0.9, 0.4}, {0.1, 1.0}};
  const auto r = VarianceProfile::row_blocks(500, 300, blocks);
  const auto rows = r.row_mean_squares();
  EXPECT_EQ(std::count_if(rows.begin(), rows.end(), [](double v) { return std::abs(v - 0.4) < 1e-12; }), 450);
  EXPECT_EQ(std::count_if(rows.begin(), rows.end(), [](double v) { return std::abs(v - 1.0) < 1e-12; }), 50);

  const std::vector<std::pair<double, double>> bad{{0.5, 1.0}, {0.4, 1.0}};
  EXPECT_THROW(VarianceProfile::row_blocks(10, 3, bad), InputError);
  const std::vector<std::pair<double, double>> negative{{1.0, -1.0}};
  EXPECT_THROW(VarianceProfile::row_blocks(10, 3, negative), InputError);
}

TEST(VarianceProfile, FeatureSampleGridIsColumnHomogenized) {
  const auto g = VarianceProfile::feature_sample_grid(500, 300);
  for (double c : g.column_mean_squares()) EXPECT_NEAR(c, 1.0, 1e-12);
  const Matrix t2 = g.t().array().square();
  EXPECT_NEAR(t2(0, 0), 0.5, 1e-12);
  EXPECT_NEAR(t2(499, 0), 1.5, 1e-12);
  EXPECT_NEAR(t2(0, 299), 1.0, 1e-12);
}

TEST(SpikeModel, NoSpikeIsPureNoise) {
  const auto m = gen_spike_model({1, 0}, 20, 10, {}, VarianceProfile::homogeneous(20, 10));
  EXPECT_EQ(m.x, m.noise);
  EXPECT_EQ(m.signal.values().norm(), 0.0);
  EXPECT_TRUE(m.left.empty());
}

TEST(SpikeModel, UnitVectorsAndDecomposition) {
  const std::vector<double> theta{2.0, 1.0};
  const auto m = gen_spike_model({3, 0}, 50, 30, theta, VarianceProfile::homogeneous(50, 30));
  ASSERT_EQ(m.left.size(), 2u);
  for (const auto& u : m.left) EXPECT_NEAR(u.norm(), 1.0, 1e-12);
  for (const auto& v : m.right) EXPECT_NEAR(v.norm(), 1.0, 1e-12);
  EXPECT_LE((m.x.values() - m.signal.values() - m.noise.values()).cwiseAbs().maxCoeff(), 1e-15);
  const Matrix s = 2.0 * m.left[0] * m.right[0].transpose() + 1.0 * m.left[1] * m.right[1].transpose();
  EXPECT_LE((s - m.signal.values()).cwiseAbs().maxCoeff(), 1e-15);
  EXPECT_THROW(gen_spike_model({3, 0}, 50, 30, theta, VarianceProfile::homogeneous(30, 50)), InputError);
  const std::vector<double> negative{-1.0};
  EXPECT_THROW(gen_spike_model({3, 0}, 5, 3, negative, VarianceProfile::homogeneous(5, 3)), InputError);
}

TEST(SpikeModel, NoiseDistributionsHaveUnitVariance) {
  for (auto dist : {NoiseDist::gaussian, NoiseDist::rademacher, NoiseDist::uniform_pm_sqrt3}) {
    Engine eng = make_engine({11, static_cast<std::uint64_t>(dist)});
    const Matrix e = sample_unit_noise(eng, 200, 200, dist);
    EXPECT_NEAR(e.mean(), 0.0, 0.02);
    EXPECT_NEAR(e.array().square().mean(), 1.0, 0.03);
    if (dist == NoiseDist::rademacher) {
      EXPECT_TRUE((e.array().abs() == 1.0).all());
    }
    if (dist == NoiseDist::uniform_pm_sqrt3) {
      EXPECT_LE(e.cwiseAbs().maxCoeff(), std::sqrt(3.0));
    }
  }
}

TEST(SpikeModel, LeadingValueNearBbpPrediction) {
  // sigma_1 -> sqrt((1 + theta^2)(gamma + theta^2)) / theta above the transition.
  const double theta = 2.0, gamma = 0.6;
  const double bbp = std::sqrt((1 + theta * theta) * (gamma + theta * theta)) / theta;
  EXPECT_NEAR(bbp, 2.398, 1e-3);
  const std::vector<double> strengths{theta};
  const auto prof = VarianceProfile::homogeneous(500, 300);
  int inside = 0;
  for (std::uint64_t s = 0; s < 100; ++s) {
    const auto m = gen_spike_model({s, 0}, 500, 300, strengths, prof);
    const double s1 = top_singular_values(m.x, 1)[0];
    inside += s1 >= 2.0 && s1 <= 2.6;
  }
  EXPECT_GE(inside, 99);
}

TEST(SpikeModel, SignflipPreservesNoiseLeadingValueDistribution) {
  const auto prof = VarianceProfile::homogeneous(500, 300);
  std::vector<double> original, flipped;
  for (std::uint64_t t = 0; t < 200; ++t) {
    const auto a = gen_spike_model({2024, t}, 500, 300, {}, prof);
    original.push_back(top_singular_values(a.noise, 1)[0]);
    const auto b = gen_spike_model({2025, t}, 500, 300, {}, prof);
    flipped.push_back(top_singular_values(signflip(b.noise, gen_rademacher({2026, t}, 500, 300)), 1)[0]);
  }
  // Asymptotic two-sample critical value at level 0.01.
  const double n = 200.0;
  const double critical = 1.628 * std::sqrt((n + n) / (n * n));
  EXPECT_LT(ks_two_sample(original, flipped), critical);
}
