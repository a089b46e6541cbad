#pragma once

// Simulation experiments: rank-one spikes in homogeneous and heterogeneous
// noise swept over signal strength, leading noise singular value
// distributions, and the spectrum homogenization demo.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "sfpa/error.hpp"
#include "sfpa/matrix.hpp"
#include "sfpa/pa.hpp"
#include "sfpa/parallel.hpp"
#include "sfpa/random.hpp"
#include "sfpa/spectral_law.hpp"

namespace sfpa {

namespace profile {
struct Homogeneous {
  double t2 = 1.0;
};
struct RowBlocks {
  std::vector<std::pair<double, double>> blocks;  // (fraction of rows, variance * n)
};
struct FeatureSampleGrid {
  double feature_fraction = 0.8;
  double lo = 0.5;
  double hi = 1.5;
  double rest = 1.0;
};
struct Custom {
  Matrix t;
};
}  // namespace profile

using ProfileSpec = std::variant<profile::Homogeneous, profile::RowBlocks, profile::FeatureSampleGrid, profile::Custom>;

inline VarianceProfile make_profile(const ProfileSpec& spec, std::size_t n, std::size_t p) {
  struct Visitor {
    std::size_t n, p;
    VarianceProfile operator()(const profile::Homogeneous& h) const { return VarianceProfile::homogeneous(n, p, h.t2); }
    VarianceProfile operator()(const profile::RowBlocks& r) const { return VarianceProfile::row_blocks(n, p, r.blocks); }
    VarianceProfile operator()(const profile::FeatureSampleGrid& g) const {
      return VarianceProfile::feature_sample_grid(n, p, g.feature_fraction, g.lo, g.hi, g.rest);
    }
    VarianceProfile operator()(const profile::Custom& c) const {
      if (static_cast<std::size_t>(c.t.rows()) != n || static_cast<std::size_t>(c.t.cols()) != p)
        throw InputError("custom profile shape mismatch");
      return VarianceProfile(c.t);
    }
  };
  return std::visit(Visitor{n, p}, spec);
}

// 90% of samples at variance 0.4/n, 10% at 1/n.
inline ProfileSpec hetero_rows_profile() { return profile::RowBlocks{{{0.9, 0.4}, {0.1, 1.0}}}; }

// First half of samples at 1/(10n), second half at 9/(10n).
inline ProfileSpec homogenization_profile() { return profile::RowBlocks{{{0.5, 0.1}, {0.5, 0.9}}}; }

inline std::vector<double> default_theta_grid() {
  std::vector<double> g;
  for (int i = 0; i <= 16; ++i) g.push_back(0.25 * i);
  return g;
}

struct SweepConfig {
  std::size_t n = 500;
  std::size_t p = 300;
  std::size_t runs = 100;
  std::size_t trials = 10;
  double alpha = 95.0;
  std::vector<double> theta_grid = default_theta_grid();
  std::uint64_t seed = 0;
  NoiseDist noise = NoiseDist::gaussian;
  SpectrumBackend backend = SpectrumBackend::gram;
  std::size_t threads = 0;
};

// One of the four method / comparison combinations.
struct SweepArm {
  PaMethod method;
  Comparison comparison;
  std::vector<double> mean_k;                        // per theta
  std::vector<std::vector<std::size_t>> histogram;   // per theta, counts of k = 0..max_k
  std::vector<std::vector<std::size_t>> selections;  // per theta, k_hat of every run
};

struct SweepResult {
  std::string experiment;
  SweepConfig config;
  std::vector<SweepArm> arms;  // signflip/pairwise, signflip/upper-edge, permutation/pairwise, permutation/upper-edge
  std::size_t max_k = 0;       // largest k_hat observed; histogram width - 1
  std::size_t dominance_violations = 0;

  const SweepArm& arm(PaMethod m, Comparison c) const {
    for (const auto& a : arms)
      if (a.method == m && a.comparison == c) return a;
    throw InputError("no such sweep arm");
  }
};

inline constexpr std::size_t kSweepRankCut = 8;

// Seed layout: run r uses SeedSpec{seed, r} for every theta (common random
// numbers across the sweep); child 0 draws the data, child 1 the signflips,
// child 2 the permutations.
inline SweepResult run_sweep(const std::string& name, const ProfileSpec& spec, const SweepConfig& cfg) {
  if (cfg.runs < 1) throw InputError("sweep needs runs >= 1");
  if (cfg.trials < 1) throw InputError("sweep needs trials >= 1");
  if (cfg.theta_grid.empty()) throw InputError("sweep needs a non-empty theta grid");
  const VarianceProfile prof = make_profile(spec, cfg.n, cfg.p);
  const std::size_t thetas = cfg.theta_grid.size();
  constexpr std::array<std::pair<PaMethod, Comparison>, 4> kArms{{
      {PaMethod::signflip, Comparison::pairwise},
      {PaMethod::signflip, Comparison::upper_edge},
      {PaMethod::permutation, Comparison::pairwise},
      {PaMethod::permutation, Comparison::upper_edge},
  }};

  std::vector<std::array<std::size_t, 4>> picks(thetas * cfg.runs);
  parallel_for(thetas * cfg.runs, cfg.threads, [&](std::size_t job) {
    const std::size_t ti = job / cfg.runs;
    const std::size_t r = job % cfg.runs;
    const SeedSpec run_seed{cfg.seed, r};
    const double theta = cfg.theta_grid[ti];
    const SpikeModel model =
        gen_spike_model(run_seed.child(0), cfg.n, cfg.p, std::span<const double>(&theta, 1), prof, cfg.noise);
    // Top spectra only; a job whose selection reaches the cut is rescored
    // from full spectra.
    const std::size_t full_rank = model.x.min_dim() - 1;
    const std::size_t cut = std::min(kSweepRankCut, full_rank);
    const SingularSpectrum data_top = top_singular_values(model.x, cut + 1);
    std::optional<SingularSpectrum> data_full;
    for (std::size_t m = 0; m < 2; ++m) {
      PaConfig pc;
      pc.method = m == 0 ? PaMethod::signflip : PaMethod::permutation;
      pc.alpha = cfg.alpha;
      pc.trials = cfg.trials;
      pc.seed = run_seed.child(1 + m);
      pc.backend = cfg.backend;
      pc.threads = 1;
      pc.max_rank = cut;
      std::vector<std::vector<double>> nulls(cfg.trials);
      for (std::size_t t = 0; t < cfg.trials; ++t)
        nulls[t] = top_singular_values(null_matrix(model.x, pc.method, pc.seed, t), cut).values;
      pc.comparison = Comparison::pairwise;
      auto pair = run_pa_given_nulls(data_top, nulls, pc);
      pc.comparison = Comparison::upper_edge;
      auto edge = run_pa_given_nulls(data_top, nulls, pc);
      if ((pair.capped || edge.capped) && cut < full_rank) {
        if (!data_full) data_full = singular_values(model.x, cfg.backend);
        pc.max_rank.reset();
        pc.comparison = Comparison::pairwise;
        const auto full_nulls = generate_nulls(model.x, pc);
        pair = run_pa_given_nulls(*data_full, full_nulls, pc);
        pc.comparison = Comparison::upper_edge;
        edge = run_pa_given_nulls(*data_full, full_nulls, pc);
      }
      picks[job][2 * m] = pair.k_hat;
      picks[job][2 * m + 1] = edge.k_hat;
    }
  });

  SweepResult out;
  out.experiment = name;
  out.config = cfg;
  for (const auto& pk : picks)
    for (std::size_t a = 0; a < 4; ++a) out.max_k = std::max(out.max_k, pk[a]);
  for (std::size_t a = 0; a < 4; ++a) {
    SweepArm arm{kArms[a].first, kArms[a].second, {}, {}, {}};
    for (std::size_t ti = 0; ti < thetas; ++ti) {
      std::vector<std::size_t> hist(out.max_k + 1, 0);
      std::vector<std::size_t> sel(cfg.runs);
      double sum = 0.0;
      for (std::size_t r = 0; r < cfg.runs; ++r) {
        const std::size_t k = picks[ti * cfg.runs + r][a];
        sel[r] = k;
        ++hist[k];
        sum += static_cast<double>(k);
      }
      arm.mean_k.push_back(sum / static_cast<double>(cfg.runs));
      arm.histogram.push_back(std::move(hist));
      arm.selections.push_back(std::move(sel));
    }
    out.arms.push_back(std::move(arm));
  }
  for (const auto& pk : picks) {
    if (pk[1] > pk[0]) ++out.dominance_violations;
    if (pk[3] > pk[2]) ++out.dominance_violations;
  }
  return out;
}

inline SweepResult experiment_homogeneous(const SweepConfig& cfg) {
  return run_sweep("homogeneous", profile::Homogeneous{1.0}, cfg);
}

inline SweepResult experiment_hetero_rows(const SweepConfig& cfg) {
  return run_sweep("hetero-rows", hetero_rows_profile(), cfg);
}

inline SweepResult experiment_hetero_grid(const SweepConfig& cfg) {
  return run_sweep("hetero-grid", profile::FeatureSampleGrid{}, cfg);
}

// Leading singular values of the noise N, its column permutation N_pi and its
// signflip R o N over independent draws.
struct NoiseSvSamples {
  std::vector<double> original;
  std::vector<double> permuted;
  std::vector<double> signflipped;
};

// Draw t uses SeedSpec{seed, t}: child 0 noise, child 1 permutation, child 2 signs.
inline NoiseSvSamples noise_sv_distributions(std::uint64_t seed, std::size_t trials, const ProfileSpec& spec,
                                             std::size_t n, std::size_t p, NoiseDist noise = NoiseDist::gaussian,
                                             SpectrumBackend backend = SpectrumBackend::gram,
                                             std::size_t threads = 0) {
  if (trials < 10) throw InputError("noise_sv_distributions needs trials >= 10");
  const VarianceProfile prof = make_profile(spec, n, p);
  NoiseSvSamples out;
  out.original.resize(trials);
  out.permuted.resize(trials);
  out.signflipped.resize(trials);
  parallel_for(trials, threads, [&](std::size_t t) {
    const SeedSpec s{seed, t};
    const DataMatrix noise_m = gen_spike_model(s.child(0), n, p, {}, prof, noise).noise;
    out.original[t] = singular_values(noise_m, backend).values.front();
    out.permuted[t] =
        singular_values(permute_columns(noise_m, gen_column_permutation(s.child(1), n, p)), backend).values.front();
    out.signflipped[t] =
        singular_values(signflip(noise_m, gen_rademacher(s.child(2), n, p)), backend).values.front();
  });
  return out;
}

struct HomogenizationDemo {
  EmpiricalSpectralDistribution noise{{}, SpectrumKind::eigenvalue};
  EmpiricalSpectralDistribution signflipped{{}, SpectrumKind::eigenvalue};
  EmpiricalSpectralDistribution permuted{{}, SpectrumKind::eigenvalue};
  SpectralLaw row_law;       // H = row variances
  SpectralLaw permuted_law;  // H = column mean squares
  double ks_signflipped_row = 0.0;
  double ks_permuted_permuted = 0.0;
  double ks_permuted_row = 0.0;
};

// Eigenvalue spectra of N^T N, (R o N)^T (R o N) and N_pi^T N_pi for the
// half/half row-variance profile, alongside both limiting laws.
inline HomogenizationDemo homogenization_demo(std::uint64_t seed, std::size_t n = 500, std::size_t p = 300,
                                              std::size_t grid_points = 800, std::size_t threads = 0) {
  const VarianceProfile prof = make_profile(homogenization_profile(), n, p);
  const SeedSpec s{seed, 0};
  const DataMatrix noise_m = gen_spike_model(s.child(0), n, p, {}, prof).noise;
  const DataMatrix flipped = signflip(noise_m, gen_rademacher(s.child(1), n, p));
  const DataMatrix permuted = permute_columns(noise_m, gen_column_permutation(s.child(2), n, p));

  HomogenizationDemo out;
  out.noise = esd(singular_values(noise_m), SpectrumKind::eigenvalue);
  out.signflipped = esd(singular_values(flipped), SpectrumKind::eigenvalue);
  out.permuted = esd(singular_values(permuted), SpectrumKind::eigenvalue);

  const double gamma = static_cast<double>(p) / static_cast<double>(n);
  const auto rows = prof.row_mean_squares();
  const auto cols = prof.column_mean_squares();
  const MixtureH h_rows = MixtureH::empirical(rows);
  const MixtureH h_cols = MixtureH::empirical(cols);
  const double hi = 1.2 * std::max(h_rows.max_t(), h_cols.max_t()) * (1.0 + std::sqrt(gamma)) * (1.0 + std::sqrt(gamma));
  InversionOptions inv;
  inv.threads = threads;
  out.row_law = density_by_inversion(LawKind::row_variance, gamma, h_rows, linear_grid(0.0, hi, grid_points), inv);
  out.permuted_law =
      density_by_inversion(LawKind::permuted_column, gamma, h_cols, linear_grid(0.0, hi, grid_points), inv);

  out.ks_signflipped_row = ks_distance(out.signflipped, [&](double x) { return out.row_law.cdf(x); });
  out.ks_permuted_permuted = ks_distance(out.permuted, [&](double x) { return out.permuted_law.cdf(x); });
  out.ks_permuted_row = ks_distance(out.permuted, [&](double x) { return out.row_law.cdf(x); });
  return out;
}

}  // namespace sfpa
