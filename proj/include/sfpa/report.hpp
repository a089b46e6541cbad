#pragma once

// JSON and CSV serialization of results.

#include <cstddef>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "sfpa/diagnostics.hpp"
#include "sfpa/io.hpp"
#include "sfpa/matrix.hpp"
#include "sfpa/pa.hpp"
#include "sfpa/random.hpp"
#include "sfpa/sim.hpp"
#include "sfpa/spectral_law.hpp"

namespace sfpa {

using Json = nlohmann::ordered_json;

inline Json to_json(const SeedSpec& s) { return Json{{"master_seed", s.master_seed}, {"stream_id", s.stream_id}}; }

inline Json to_json(const MixtureH& h) {
  Json atoms = Json::array();
  for (const auto& a : h.atoms()) atoms.push_back(Json{{"t", a.t}, {"w", a.w}});
  return atoms;
}

inline Json to_json(const SelectionResult& r) {
  Json trace = Json::array();
  for (bool b : r.trace) trace.push_back(b);
  return Json{
      {"k_hat", r.k_hat},
      {"method", to_string(r.method)},
      {"comparison", to_string(r.comparison)},
      {"alpha", r.alpha},
      {"trials", r.trials},
      {"max_rank", r.max_rank},
      {"capped", r.capped},
      {"seed", to_json(r.seed)},
      {"data_sv", r.data_sv.values},
      {"null_percentiles", r.null_percentiles},
      {"trace", trace},
      {"warnings", r.warnings},
  };
}

inline void write_selection_csv(std::ostream& out, const SelectionResult& r) {
  out << "k,data_sv,threshold,above\n";
  for (std::size_t k = 0; k < r.null_percentiles.size(); ++k)
    out << k + 1 << ',' << format_double(r.data_sv[k]) << ',' << format_double(r.null_percentiles[k]) << ','
        << (r.trace[k] ? 1 : 0) << '\n';
}

inline Json to_json(const SpectralLaw& law) {
  return Json{
      {"law", to_string(law.source)},
      {"gamma", law.gamma},
      {"H", to_json(law.h)},
      {"epsilon", law.epsilon},
      {"upper_edge", law.upper_edge},
      {"singular_upper_edge", law.singular_upper_edge()},
      {"mass", law.mass},
      {"grid_min", law.grid.empty() ? 0.0 : law.grid.front()},
      {"grid_max", law.grid.empty() ? 0.0 : law.grid.back()},
      {"grid_points", law.grid.size()},
      {"warnings", law.warnings},
  };
}

inline void write_law_csv(std::ostream& out, const SpectralLaw& law) {
  out << "x,density\n";
  for (std::size_t i = 0; i < law.grid.size(); ++i)
    out << format_double(law.grid[i]) << ',' << format_double(law.density[i]) << '\n';
}

inline Json to_json(const DestructionReport& r) {
  return Json{
      {"two_inf", r.two_inf},
      {"two_inf_t", r.two_inf_t},
      {"rho_inf", r.rho_inf},
      {"rank", r.rank},
      {"rank_bound_term", r.rank_bound_term},
      {"abs_opnorm", r.abs_opnorm},
      {"opnorm", r.opnorm},
      {"upper_bound_op", r.upper_bound_op},
      {"k", r.k},
      {"entrywise_k", r.entrywise_k},
      {"two_k_sum", r.two_k_sum},
      {"necessary_norms",
       Json{
           {"max_entry", r.necessary.max_entry},
           {"frobenius_over_sqrt_n", r.necessary.frobenius_over_sqrt_n},
           {"frobenius_over_sqrt_p", r.necessary.frobenius_over_sqrt_p},
           {"induced_1_over_sqrt_n", r.necessary.induced_1_over_sqrt_n},
           {"induced_inf_over_sqrt_p", r.necessary.induced_inf_over_sqrt_p},
       }},
  };
}

inline Json to_json(const FlipNormEstimate& e) {
  return Json{{"mean", e.mean}, {"stderr", e.stderr_}, {"trials", e.trials}};
}

inline Json to_json(const RateRegime& r) {
  return Json{
      {"alpha1", r.alpha1}, {"alpha2", r.alpha2}, {"beta1", r.beta1},
      {"beta2", r.beta2},   {"nu1", r.nu1},       {"nu2", r.nu2},
      {"verdict_L1", to_string(r.verdict_l1)},    {"verdict_as", to_string(r.verdict_as)},
  };
}

inline Json to_json(const SweepResult& s) {
  Json arms = Json::array();
  for (const auto& a : s.arms)
    arms.push_back(Json{{"method", to_string(a.method)},
                        {"comparison", to_string(a.comparison)},
                        {"mean_k", a.mean_k},
                        {"histogram", a.histogram}});
  return Json{
      {"experiment", s.experiment},
      {"n", s.config.n},
      {"p", s.config.p},
      {"runs", s.config.runs},
      {"trials", s.config.trials},
      {"alpha", s.config.alpha},
      {"seed", s.config.seed},
      {"theta_grid", s.config.theta_grid},
      {"max_k", s.max_k},
      {"dominance_violations", s.dominance_violations},
      {"arms", arms},
  };
}

inline void write_sweep_csv(std::ostream& out, const SweepResult& s) {
  out << "theta,method,rule,mean_k";
  for (std::size_t k = 0; k <= s.max_k; ++k) out << ",freq_" << k;
  out << '\n';
  for (std::size_t ti = 0; ti < s.config.theta_grid.size(); ++ti) {
    for (const auto& a : s.arms) {
      out << format_double(s.config.theta_grid[ti]) << ',' << to_string(a.method) << ',' << to_string(a.comparison)
          << ',' << format_double(a.mean_k[ti]);
      for (std::size_t c : a.histogram[ti]) out << ',' << c;
      out << '\n';
    }
  }
}

inline void write_noise_sv_csv(std::ostream& out, const NoiseSvSamples& s) {
  out << "draw,original,permuted,signflipped\n";
  for (std::size_t t = 0; t < s.original.size(); ++t)
    out << t << ',' << format_double(s.original[t]) << ',' << format_double(s.permuted[t]) << ','
        << format_double(s.signflipped[t]) << '\n';
}

// Histogram densities of the three empirical spectra next to both solved
// laws evaluated at the bin centres.
inline void write_homogenization_csv(std::ostream& out, const HomogenizationDemo& d, std::size_t bins = 60) {
  const double hi = d.row_law.grid.back();
  const auto edges = linear_grid(0.0, hi, bins + 1);
  const auto noise = d.noise.histogram(edges);
  const auto flipped = d.signflipped.histogram(edges);
  const auto permuted = d.permuted.histogram(edges);
  auto law_at = [](const SpectralLaw& law, double x) {
    const auto& g = law.grid;
    if (x <= g.front() || x >= g.back()) return 0.0;
    const auto it = std::upper_bound(g.begin(), g.end(), x);
    const std::size_t i = static_cast<std::size_t>(it - g.begin()) - 1;
    const double f = (x - g[i]) / (g[i + 1] - g[i]);
    return law.density[i] + f * (law.density[i + 1] - law.density[i]);
  };
  out << "bin_lo,bin_hi,noise,signflipped,permuted,row_law,permuted_law\n";
  for (std::size_t b = 0; b < bins; ++b) {
    const double mid = 0.5 * (edges[b] + edges[b + 1]);
    out << format_double(edges[b]) << ',' << format_double(edges[b + 1]) << ',' << format_double(noise[b]) << ','
        << format_double(flipped[b]) << ',' << format_double(permuted[b]) << ','
        << format_double(law_at(d.row_law, mid)) << ',' << format_double(law_at(d.permuted_law, mid)) << '\n';
  }
}

inline Json to_json(const HomogenizationDemo& d) {
  return Json{
      {"row_law", to_json(d.row_law)},
      {"permuted_law", to_json(d.permuted_law)},
      {"noise_top_eigenvalue", d.noise.upper_edge()},
      {"signflipped_top_eigenvalue", d.signflipped.upper_edge()},
      {"permuted_top_eigenvalue", d.permuted.upper_edge()},
      {"ks_signflipped_vs_row_law", d.ks_signflipped_row},
      {"ks_permuted_vs_permuted_law", d.ks_permuted_permuted},
      {"ks_permuted_vs_row_law", d.ks_permuted_row},
  };
}

}  // namespace sfpa
