#pragma once

// Limiting spectral laws of noise Gram matrices N^T N under a variance profile:
//
//   row-variance law    z + 1/m = \int t / (1 + gamma t m) dH(t)
//                       (H = distribution of the row variances, times n)
//   permuted-column law 1 + 1/(gamma(zm+1) - 1) = \int gamma t / (gamma t (zm+1) + z - t) dH(t)
//                       (H = distribution of the column mean squares)
//
// m is the Stieltjes transform of the p x p eigenvalue law. Densities come
// from Stieltjes inversion, density(x) = Im m(x + i eps) / pi.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <map>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sfpa/error.hpp"
#include "sfpa/parallel.hpp"

namespace sfpa {

using Complex = std::complex<double>;

struct Atom {
  double t = 0.0;
  double w = 0.0;
};

// Finite mixture of point masses sum_k w_k delta_{t_k}.
class MixtureH {
 public:
  MixtureH() = default;

  // Weights must sum to 1 within 1e-9; they are renormalized exactly.
  explicit MixtureH(std::vector<Atom> atoms) : atoms_(std::move(atoms)) {
    if (atoms_.empty()) throw InputError("mixture needs at least one atom");
    double total = 0.0;
    for (const auto& a : atoms_) {
      if (!(a.t >= 0.0) || !std::isfinite(a.t)) throw InputError("atom locations must be finite and >= 0");
      if (!(a.w >= 0.0) || !std::isfinite(a.w)) throw InputError("atom weights must be finite and >= 0");
      total += a.w;
    }
    if (std::abs(total - 1.0) > 1e-9)
      throw InputError("atom weights sum to " + std::to_string(total) + ", expected 1");
    for (auto& a : atoms_) a.w /= total;
  }

  static MixtureH point(double t) { return MixtureH({{t, 1.0}}); }

  // Empirical distribution of `values`; equal values share one atom.
  static MixtureH empirical(std::span<const double> values) {
    if (values.empty()) throw InputError("empirical mixture of no values");
    std::map<double, double> counts;
    for (double v : values) counts[v] += 1.0;
    std::vector<Atom> atoms;
    for (const auto& [t, c] : counts) atoms.push_back({t, c / static_cast<double>(values.size())});
    return MixtureH(std::move(atoms));
  }

  // Quadrature atoms (trapezoid weights) for a density sampled on a grid.
  static MixtureH from_density(std::span<const double> grid, std::span<const double> density) {
    if (grid.size() < 2 || grid.size() != density.size())
      throw InputError("density quadrature needs matching grid and density of length >= 2");
    std::vector<Atom> atoms(grid.size());
    double total = 0.0;
    for (std::size_t i = 0; i < grid.size(); ++i) {
      const double left = i > 0 ? grid[i] - grid[i - 1] : 0.0;
      const double right = i + 1 < grid.size() ? grid[i + 1] - grid[i] : 0.0;
      atoms[i] = {grid[i], 0.5 * (left + right) * density[i]};
      total += atoms[i].w;
    }
    if (!(total > 0)) throw InputError("density integrates to zero");
    for (auto& a : atoms) a.w /= total;
    return MixtureH(std::move(atoms));
  }

  const std::vector<Atom>& atoms() const noexcept { return atoms_; }

  double max_t() const {
    double m = 0.0;
    for (const auto& a : atoms_) m = std::max(m, a.t);
    return m;
  }

  double mean() const {
    double m = 0.0;
    for (const auto& a : atoms_) m += a.w * a.t;
    return m;
  }

  bool degenerate_at_zero() const { return max_t() == 0.0; }

 private:
  std::vector<Atom> atoms_;
};

enum class LawKind { row_variance, permuted_column };

inline const char* to_string(LawKind k) { return k == LawKind::row_variance ? "row" : "permuted"; }

struct StieltjesSolution {
  Complex z;
  Complex m;
  double residual = 0.0;
  std::size_t iterations = 0;
};

struct SolverOptions {
  double tol = 1e-11;
  std::size_t max_iter = 200000;
  double damping = 0.5;
  double fallback_damping = 0.1;
  // Iterations between Newton polishing attempts; 0 disables polishing.
  std::size_t newton_every = 50;
  std::optional<Complex> initial;  // initial m; defaults to -1/z
};

namespace detail {

// Canonical form z + 1/x = c * sum_k w_k t_k / (1 + s t_k x) solved for x in C+.
struct CanonicalEquation {
  double c;
  double s;
  const MixtureH* h;

  Complex integral(Complex x) const {
    Complex acc = 0.0;
    for (const auto& a : h->atoms()) acc += a.w * a.t / (1.0 + s * a.t * x);
    return c * acc;
  }
  Complex integral_derivative(Complex x) const {
    Complex acc = 0.0;
    for (const auto& a : h->atoms()) {
      const Complex d = 1.0 + s * a.t * x;
      acc -= a.w * s * a.t * a.t / (d * d);
    }
    return c * acc;
  }
  Complex residual(Complex z, Complex x) const { return z + 1.0 / x - integral(x); }
  Complex map(Complex z, Complex x) const { return 1.0 / (integral(x) - z); }
};

inline CanonicalEquation canonical(LawKind kind, double gamma, const MixtureH& h) {
  if (kind == LawKind::row_variance) return {1.0, gamma, &h};
  return {gamma, 1.0, &h};
}

// m of the p x p law from the canonical unknown, and back.
inline Complex to_m(LawKind kind, double gamma, Complex z, Complex x) {
  if (kind == LawKind::row_variance) return x;
  return (x + (1.0 - gamma) / z) / gamma;
}
inline Complex from_m(LawKind kind, double gamma, Complex z, Complex m) {
  if (kind == LawKind::row_variance) return m;
  return gamma * m - (1.0 - gamma) / z;
}

inline double displayed_residual(LawKind kind, double gamma, const MixtureH& h, Complex z, Complex m) {
  if (kind == LawKind::row_variance) {
    Complex acc = 0.0;
    for (const auto& a : h.atoms()) acc += a.w * a.t / (1.0 + gamma * a.t * m);
    return std::abs(z + 1.0 / m - acc);
  }
  const Complex w = z * m + 1.0;
  Complex acc = 0.0;
  for (const auto& a : h.atoms()) acc += a.w * gamma * a.t / (gamma * a.t * w + z - a.t);
  return std::abs(1.0 + 1.0 / (gamma * w - 1.0) - acc);
}

inline bool admissible(Complex x) { return std::isfinite(x.real()) && std::isfinite(x.imag()) && x.imag() > 0.0; }

}  // namespace detail

// Solves one of the two law equations at z (Im z > 0) by damped fixed-point
// iteration x <- (1 - lambda) x + lambda G(x), with lambda dropping to the
// fallback value when the residual stops decreasing, and periodic Newton
// polishing once the iterate is close.
inline StieltjesSolution solve_stieltjes(LawKind kind, Complex z, double gamma, const MixtureH& h,
                                         const SolverOptions& opts = {}) {
  if (!(z.imag() > 0.0)) throw InputError("Stieltjes solver needs Im z > 0");
  if (!(gamma > 0.0) || !std::isfinite(gamma)) throw InputError("aspect ratio gamma must be positive");
  if (!(opts.tol > 0.0)) throw InputError("solver tolerance must be positive");
  const auto eq = detail::canonical(kind, gamma, h);

  Complex x = detail::from_m(kind, gamma, z, opts.initial.value_or(-1.0 / z));
  if (!detail::admissible(x)) x = -1.0 / z;

  auto finish = [&](Complex xs, std::size_t it) -> std::optional<StieltjesSolution> {
    const Complex m = detail::to_m(kind, gamma, z, xs);
    if (!detail::admissible(xs) || !(m.imag() > 0.0)) return std::nullopt;
    const double r = detail::displayed_residual(kind, gamma, h, z, m);
    if (std::abs(eq.residual(z, xs)) <= opts.tol && r <= opts.tol) return StieltjesSolution{z, m, r, it};
    return std::nullopt;
  };

  double lambda = opts.damping;
  double best = std::abs(eq.residual(z, x));
  std::size_t stalls = 0;
  for (std::size_t it = 0; it <= opts.max_iter; ++it) {
    if (auto done = finish(x, it)) return *done;

    if (opts.newton_every && it > 0 && it % opts.newton_every == 0) {
      Complex y = x;
      for (int step = 0; step < 30; ++step) {
        const Complex f = eq.residual(z, y);
        const Complex df = -1.0 / (y * y) - eq.integral_derivative(y);
        if (df == 0.0) break;
        y -= f / df;
        if (!detail::admissible(y)) break;
        if (auto done = finish(y, it)) return *done;
      }
    }

    const Complex g = eq.map(z, x);
    Complex next = (1.0 - lambda) * x + lambda * g;
    if (!detail::admissible(next)) next = Complex(x.real(), 0.5 * x.imag());
    x = next;
    const double r = std::abs(eq.residual(z, x));
    if (r < best) {
      best = r;
      stalls = 0;
    } else if (++stalls > 20 && lambda > opts.fallback_damping) {
      lambda = opts.fallback_damping;
      stalls = 0;
    }
  }
  const Complex m = detail::to_m(kind, gamma, z, x);
  throw ConvergenceError("Stieltjes fixed point did not converge at z = (" + std::to_string(z.real()) + ", " +
                             std::to_string(z.imag()) + ")",
                         m, detail::displayed_residual(kind, gamma, h, z, m), opts.max_iter);
}

inline StieltjesSolution solve_stieltjes_row_law(Complex z, double gamma, const MixtureH& h,
                                                 const SolverOptions& opts = {}) {
  return solve_stieltjes(LawKind::row_variance, z, gamma, h, opts);
}

inline StieltjesSolution solve_stieltjes_permuted_law(Complex z, double gamma, const MixtureH& h,
                                                      const SolverOptions& opts = {}) {
  return solve_stieltjes(LawKind::permuted_column, z, gamma, h, opts);
}

namespace detail {

// Solves at x + i eps. Small eps is reached by continuation from a larger
// imaginary part, each stage warm-started from the previous one.
inline StieltjesSolution solve_near_axis(LawKind kind, double x, double eps, double gamma, const MixtureH& h,
                                         const SolverOptions& opts) {
  const double scale = std::max(1.0, h.max_t()) * (1.0 + std::sqrt(gamma)) * (1.0 + std::sqrt(gamma));
  double start = 1e-2 * scale;
  if (eps >= start) return solve_stieltjes(kind, Complex(x, eps), gamma, h, opts);
  SolverOptions stage = opts;
  StieltjesSolution sol = solve_stieltjes(kind, Complex(x, start), gamma, h, stage);
  for (double e = start / 4.0;; e /= 4.0) {
    const double cur = std::max(e, eps);
    stage.initial = sol.m;
    sol = solve_stieltjes(kind, Complex(x, cur), gamma, h, stage);
    if (cur == eps) return sol;
  }
}

}  // namespace detail

struct SpectralLaw {
  std::vector<double> grid;
  std::vector<double> density;
  double upper_edge = 0.0;  // eigenvalue scale
  double gamma = 1.0;
  double epsilon = 0.0;
  double mass = 0.0;  // trapezoid integral of the density over the grid
  LawKind source = LawKind::row_variance;
  MixtureH h;
  std::vector<std::string> warnings;

  // Cumulative trapezoid integral of the density, normalized by `mass`.
  double cdf(double x) const {
    if (grid.empty() || x < grid.front()) return 0.0;
    if (x >= grid.back()) return 1.0;
    double acc = 0.0;
    for (std::size_t i = 0; i + 1 < grid.size(); ++i) {
      const double a = grid[i];
      const double b = grid[i + 1];
      if (x >= b) {
        acc += 0.5 * (density[i] + density[i + 1]) * (b - a);
        continue;
      }
      const double frac = (x - a) / (b - a);
      const double fx = density[i] + frac * (density[i + 1] - density[i]);
      acc += 0.5 * (density[i] + fx) * (x - a);
      break;
    }
    return mass > 0 ? std::min(1.0, acc / mass) : 0.0;
  }

  // Upper edge of the corresponding singular-value law.
  double singular_upper_edge() const { return std::sqrt(std::max(upper_edge, 0.0)); }
};

struct InversionOptions {
  std::optional<double> epsilon;  // default 1e-3 * grid span
  double edge_threshold = 1e-4;
  SolverOptions solver;
  std::size_t threads = 0;
};

inline double upper_edge(const SpectralLaw& law, double threshold = 1e-4);

inline SpectralLaw density_by_inversion(LawKind kind, double gamma, const MixtureH& h, std::vector<double> grid,
                                        const InversionOptions& opts = {}) {
  if (grid.size() < 2) throw InputError("density grid needs at least two points");
  if (!std::is_sorted(grid.begin(), grid.end()) || grid.front() == grid.back())
    throw InputError("density grid must be sorted and non-degenerate");
  const double eps = opts.epsilon.value_or(1e-3 * (grid.back() - grid.front()));
  if (!(eps > 0.0)) throw InputError("inversion epsilon must be positive");

  SpectralLaw law;
  law.gamma = gamma;
  law.epsilon = eps;
  law.source = kind;
  law.h = h;
  law.density.assign(grid.size(), 0.0);
  if (!h.degenerate_at_zero()) {
    parallel_for(grid.size(), opts.threads, [&](std::size_t i) {
      try {
        const auto sol = detail::solve_near_axis(kind, grid[i], eps, gamma, h, opts.solver);
        law.density[i] = std::max(0.0, sol.m.imag() / std::numbers::pi);
      } catch (const ConvergenceError& e) {
        throw ConvergenceError("density inversion failed at x = " + std::to_string(grid[i]) + ": " + e.what(),
                               e.last_iterate(), e.residual(), e.iterations());
      }
    });
  }
  law.grid = std::move(grid);
  for (std::size_t i = 0; i + 1 < law.grid.size(); ++i)
    law.mass += 0.5 * (law.density[i] + law.density[i + 1]) * (law.grid[i + 1] - law.grid[i]);
  if (!h.degenerate_at_zero() && std::abs(law.mass - 1.0) > 1e-3)
    law.warnings.push_back("density integrates to " + std::to_string(law.mass) +
                           " over the grid; widen the grid or reduce epsilon");
  law.upper_edge = h.degenerate_at_zero() ? 0.0 : upper_edge(law, opts.edge_threshold);
  return law;
}

// Right end of the support: the largest abscissa where the density exceeds
// `threshold`, located on the grid and refined by bisection. Both stages
// re-evaluate the density at a tiny imaginary part so inversion smoothing does
// not leak past the edge.
inline double upper_edge(const SpectralLaw& law, double threshold) {
  if (law.h.degenerate_at_zero()) return 0.0;
  if (law.grid.empty()) throw InputError("spectral law has no grid");
  const double span = law.grid.back() - law.grid.front();
  const double eps = std::min(law.epsilon, 1e-9 * std::max(1.0, span));
  SolverOptions opts;
  auto dens = [&](double x) {
    return detail::solve_near_axis(law.source, x, eps, law.gamma, law.h, opts).m.imag() / std::numbers::pi;
  };
  std::optional<std::size_t> last;
  for (std::size_t i = law.grid.size(); i-- > 0;) {
    if (dens(law.grid[i]) > threshold) {
      last = i;
      break;
    }
  }
  if (!last) throw InputError("density never exceeds the edge threshold on the grid");
  if (*last + 1 == law.grid.size()) throw InputError("support extends past the end of the grid");
  double lo = law.grid[*last];
  double hi = law.grid[*last + 1];
  for (int it = 0; it < 60 && hi - lo > 1e-12 * std::max(1.0, std::abs(hi)); ++it) {
    const double mid = 0.5 * (lo + hi);
    (dens(mid) > threshold ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

// Closed-form Marchenko-Pastur eigenvalue density for variance scale sigma2
// and ratio gamma <= 1 (no atom at zero).
inline double marchenko_pastur_density(double x, double gamma, double sigma2 = 1.0) {
  const double a = sigma2 * (1.0 - std::sqrt(gamma)) * (1.0 - std::sqrt(gamma));
  const double b = sigma2 * (1.0 + std::sqrt(gamma)) * (1.0 + std::sqrt(gamma));
  if (x <= a || x >= b) return 0.0;
  return std::sqrt((b - x) * (x - a)) / (2.0 * std::numbers::pi * gamma * sigma2 * x);
}

// Uniform grid of `steps` points on [lo, hi].
inline std::vector<double> linear_grid(double lo, double hi, std::size_t steps) {
  if (steps < 2 || !(hi > lo)) throw InputError("grid needs steps >= 2 and hi > lo");
  std::vector<double> g(steps);
  for (std::size_t i = 0; i < steps; ++i)
    g[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(steps - 1);
  return g;
}

}  // namespace sfpa
