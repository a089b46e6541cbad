#pragma once

// Parallel analysis: choose the number of factors by comparing the data's
// singular values against those of randomized null copies (signflipped or
// column-permuted), with pairwise or upper-edge thresholds.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sfpa/error.hpp"
#include "sfpa/matrix.hpp"
#include "sfpa/parallel.hpp"
#include "sfpa/random.hpp"

namespace sfpa {

enum class PaMethod { signflip, permutation };
enum class Comparison { pairwise, upper_edge };

inline const char* to_string(PaMethod m) { return m == PaMethod::signflip ? "signflip" : "permutation"; }
inline const char* to_string(Comparison c) { return c == Comparison::pairwise ? "pairwise" : "upper-edge"; }

struct PaConfig {
  PaMethod method = PaMethod::signflip;
  Comparison comparison = Comparison::pairwise;
  double alpha = 95.0;  // percentile in (0, 100]
  std::size_t trials = 10;
  std::optional<std::size_t> max_rank;  // defaults to min(n, p) - 1
  SeedSpec seed;
  SpectrumBackend backend = SpectrumBackend::bidiagonal;
  // Used for the null's leading singular value under upper-edge comparison.
  LeadingMethod edge_method = FullSvd{};
  std::size_t threads = 0;  // 0 = default_thread_count()
};

struct SelectionResult {
  std::size_t k_hat = 0;
  SingularSpectrum data_sv;
  std::vector<double> null_percentiles;  // threshold used at each index k
  std::vector<bool> trace;               // data_sv[k] > null_percentiles[k]
  bool capped = false;                   // no stop before max_rank
  std::size_t max_rank = 0;
  PaMethod method = PaMethod::signflip;
  Comparison comparison = Comparison::pairwise;
  double alpha = 95.0;
  std::size_t trials = 0;
  SeedSpec seed;
  std::vector<std::string> warnings;
};

// Nearest-rank percentile: the ceil(alpha/100 * T)-th smallest sample.
inline double percentile(std::span<const double> samples, double alpha) {
  if (samples.empty()) throw InputError("percentile of an empty sample");
  if (!(alpha > 0.0 && alpha <= 100.0)) throw InputError("percentile alpha must lie in (0, 100]");
  const double count = static_cast<double>(samples.size());
  auto rank = static_cast<std::size_t>(std::ceil(alpha * count / 100.0 - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, samples.size());
  std::vector<double> v(samples.begin(), samples.end());
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(rank - 1), v.end());
  return v[rank - 1];
}

namespace detail {

inline void validate(const PaConfig& cfg) {
  if (!(cfg.alpha > 0.0 && cfg.alpha <= 100.0)) throw InputError("alpha must lie in (0, 100]");
  if (cfg.trials < 1) throw InputError("number of trials must be at least 1");
}

inline std::size_t resolve_max_rank(const PaConfig& cfg, std::size_t spectrum_size) {
  if (spectrum_size == 0) throw InputError("empty data spectrum");
  const std::size_t limit = spectrum_size - 1;
  if (cfg.max_rank && *cfg.max_rank > limit)
    throw InputError("max_rank must not exceed min(n, p) - 1 = " + std::to_string(limit));
  return cfg.max_rank.value_or(limit);
}

}  // namespace detail

// The randomized copy of `x` for trial t, drawn from stream seed.child(t).
inline DataMatrix null_matrix(const DataMatrix& x, PaMethod method, const SeedSpec& seed, std::size_t trial) {
  const SeedSpec stream = seed.child(trial);
  if (method == PaMethod::signflip) return signflip(x, gen_rademacher(stream, x.n(), x.p()));
  return permute_columns(x, gen_column_permutation(stream, x.n(), x.p()));
}

// Null singular values for every trial: the full spectrum under pairwise
// comparison, only the leading value under upper-edge comparison.
inline std::vector<std::vector<double>> generate_nulls(const DataMatrix& x, const PaConfig& cfg) {
  detail::validate(cfg);
  std::vector<std::vector<double>> nulls(cfg.trials);
  parallel_for(cfg.trials, cfg.threads, [&](std::size_t t) {
    const DataMatrix y = null_matrix(x, cfg.method, cfg.seed, t);
    if (cfg.comparison == Comparison::pairwise) {
      nulls[t] = singular_values(y, cfg.backend).values;
    } else if (std::holds_alternative<PowerIteration>(cfg.edge_method)) {
      nulls[t] = {leading_singular_value(y, cfg.edge_method)};
    } else {
      nulls[t] = {singular_values(y, cfg.backend).values.front()};
    }
  });
  return nulls;
}

// Scores precomputed null spectra (one vector per trial). Pure function of its
// inputs and independent of trial order.
inline SelectionResult run_pa_given_nulls(const SingularSpectrum& data_sv,
                                          const std::vector<std::vector<double>>& null_sv_per_trial,
                                          const PaConfig& cfg) {
  detail::validate(cfg);
  const std::size_t max_rank = detail::resolve_max_rank(cfg, data_sv.size());
  if (null_sv_per_trial.size() != cfg.trials)
    throw InputError("expected " + std::to_string(cfg.trials) + " null spectra, got " +
                     std::to_string(null_sv_per_trial.size()));
  const std::size_t needed = cfg.comparison == Comparison::pairwise ? max_rank : 1;
  for (const auto& s : null_sv_per_trial)
    if (s.size() < needed) throw InputError("null spectrum shorter than the scanned rank range");

  SelectionResult out;
  out.data_sv = data_sv;
  out.max_rank = max_rank;
  out.method = cfg.method;
  out.comparison = cfg.comparison;
  out.alpha = cfg.alpha;
  out.trials = cfg.trials;
  out.seed = cfg.seed;

  std::vector<double> column(cfg.trials);
  auto threshold_at = [&](std::size_t k) {
    for (std::size_t t = 0; t < cfg.trials; ++t) column[t] = null_sv_per_trial[t][k];
    return percentile(column, cfg.alpha);
  };
  out.null_percentiles.resize(max_rank);
  if (cfg.comparison == Comparison::upper_edge) {
    if (max_rank > 0) std::fill(out.null_percentiles.begin(), out.null_percentiles.end(), threshold_at(0));
  } else {
    for (std::size_t k = 0; k < max_rank; ++k) out.null_percentiles[k] = threshold_at(k);
  }

  out.trace.resize(max_rank);
  std::optional<std::size_t> stop;
  for (std::size_t k = 0; k < max_rank; ++k) {
    out.trace[k] = data_sv[k] > out.null_percentiles[k];
    if (!stop && !out.trace[k]) stop = k;
  }
  out.k_hat = stop.value_or(max_rank);
  out.capped = !stop.has_value();
  if (out.capped)
    out.warnings.push_back("selection reached max_rank = " + std::to_string(max_rank) +
                           " without the stop condition triggering");
  return out;
}

inline SelectionResult run_pa(const DataMatrix& x, const PaConfig& cfg) {
  detail::validate(cfg);
  const SingularSpectrum data_sv = singular_values(x, cfg.backend);
  detail::resolve_max_rank(cfg, data_sv.size());
  return run_pa_given_nulls(data_sv, generate_nulls(x, cfg), cfg);
}

}  // namespace sfpa
