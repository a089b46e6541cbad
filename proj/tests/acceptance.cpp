// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <sys/wait.h>
#include <unistd.h>

#include "sfpa/sfpa.hpp"

using namespace sfpa;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  if (!pass) ++failures;
  std::cout << "criterion " << id << ": " << (pass ? "PASS" : "FAIL") << "  " << detail << std::endl;
}

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

std::size_t count_k(const SweepArm& arm, std::size_t ti, std::size_t k) {
  return k < arm.histogram[ti].size() ? arm.histogram[ti][k] : 0;
}

std::size_t theta_index(const SweepResult& r, double theta) {
  const auto& g = r.config.theta_grid;
  return static_cast<std::size_t>(std::find(g.begin(), g.end(), theta) - g.begin());
}

Matrix gaussian(std::uint64_t seed, Eigen::Index n, Eigen::Index p) {
  std::mt19937_64 eng(seed);
  std::normal_distribution<double> g;
  Matrix m(n, p);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = g(eng);
  return m;
}

struct Moments {
  double mean = 0.0;
  double se = 0.0;
};

Moments moments(const std::vector<double>& v) {
  const double n = static_cast<double>(v.size());
  Moments m;
  for (double x : v) m.mean += x;
  m.mean /= n;
  double ss = 0.0;
  for (double x : v) ss += (x - m.mean) * (x - m.mean);
  m.se = std::sqrt(ss / (n - 1) / n);
  return m;
}

// Marchenko-Pastur density written out from the edges a, b.
double mp_density(double x, double gamma) {
  const double a = (1 - std::sqrt(gamma)) * (1 - std::sqrt(gamma));
  const double b = (1 + std::sqrt(gamma)) * (1 + std::sqrt(gamma));
  if (x <= a || x >= b) return 0.0;
  return std::sqrt((b - x) * (x - a)) / (2 * std::numbers::pi * gamma * x);
}

int shell(const std::string& cmd) {
  const int status = std::system((cmd + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

SweepConfig desk_config() {
  SweepConfig c;
  c.runs = 100;
  c.seed = 0;
  return c;
}

void criterion_1() {
  const auto t0 = Clock::now();
  auto cfg = desk_config();
  cfg.theta_grid = {0.0};
  const auto r = experiment_homogeneous(cfg);
  const double secs = seconds_since(t0);
  const auto pair = count_k(r.arm(PaMethod::signflip, Comparison::pairwise), 0, 0);
  const auto edge = count_k(r.arm(PaMethod::signflip, Comparison::upper_edge), 0, 0);
  report(1, pair >= 90 && edge >= 95 && secs < 120,
         "signflip k=0 runs: pairwise " + std::to_string(pair) + "/100 (need >= 90), upper-edge " +
             std::to_string(edge) + "/100 (need >= 95); " + fmt(secs, 3) + " s");
}

void criteria_2_3() {
  const auto r = experiment_homogeneous(desk_config());
  const std::size_t t3 = theta_index(r, 3.0);
  std::string counts;
  bool ok2 = true;
  for (const auto& arm : r.arms) {
    const auto ones = count_k(arm, t3, 1);
    ok2 = ok2 && ones >= 95;
    counts += std::string(to_string(arm.method)) + "/" + to_string(arm.comparison) + " " + std::to_string(ones) + " ";
  }
  report(2, ok2, "theta=3 runs selecting exactly 1: " + counts + "(need >= 95 each)");

  double worst = 0.0, worst_theta = 0.0;
  for (std::size_t ti = 0; ti < r.config.theta_grid.size(); ++ti) {
    for (auto c : {Comparison::pairwise, Comparison::upper_edge}) {
      const double d = std::abs(r.arm(PaMethod::signflip, c).mean_k[ti] - r.arm(PaMethod::permutation, c).mean_k[ti]);
      if (d > worst) {
        worst = d;
        worst_theta = r.config.theta_grid[ti];
      }
    }
  }
  report(3, worst <= 0.2,
         "max |mean k signflip - mean k permutation| = " + fmt(worst) + " at theta " + fmt(worst_theta) +
             " (need <= 0.2)");
}

void criterion_4() {
  auto cfg = desk_config();
  cfg.theta_grid = {2.0};
  const auto r = experiment_hetero_rows(cfg);
  const double s = r.arm(PaMethod::signflip, Comparison::pairwise).mean_k[0];
  const double p = r.arm(PaMethod::permutation, Comparison::pairwise).mean_k[0];
  report(4, s >= 0.8 && s <= 1.2 && p >= 1.5,
         "theta=2 pairwise mean k: signflip " + fmt(s) + " (need [0.8, 1.2]), permutation " + fmt(p) +
             " (need >= 1.5)");
}

void criterion_5() {
  const auto s = noise_sv_distributions(0, 200, hetero_rows_profile(), 500, 300);
  const auto o = moments(s.original), p = moments(s.permuted), f = moments(s.signflipped);
  const double z = (o.mean - p.mean) / std::hypot(o.se, p.se);
  const double gap = std::abs(f.mean - o.mean);
  const double allowed = 3.0 * std::hypot(f.se, o.se);
  report(5, p.mean < o.mean && z >= 5.0 && gap <= allowed,
         "mean sigma1: original " + fmt(o.mean, 6) + ", permuted " + fmt(p.mean, 6) + ", signflipped " +
             fmt(f.mean, 6) + "; z(original - permuted) = " + fmt(z) + " (need >= 5); |signflipped - original| = " +
             fmt(gap, 3) + " vs 3 SE = " + fmt(allowed, 3));
}

void criterion_6() {
  const auto t0 = Clock::now();
  const auto d = homogenization_demo(0);
  const double secs = seconds_since(t0);
  report(6, d.ks_signflipped_row <= 0.08 && d.ks_permuted_permuted <= 0.08 && d.ks_permuted_row >= 0.15 && secs < 60,
         "KS(signflipped, row law) = " + fmt(d.ks_signflipped_row) + " (need <= 0.08), KS(permuted, permuted law) = " +
             fmt(d.ks_permuted_permuted) + " (need <= 0.08), KS(permuted, row law) = " + fmt(d.ks_permuted_row) +
             " (need >= 0.15); " + fmt(secs, 3) + " s");
}

void criterion_7() {
  bool ok = true;
  std::string detail;
  for (double gamma : {0.3, 0.6, 1.0}) {
    const double a = (1 - std::sqrt(gamma)) * (1 - std::sqrt(gamma));
    const double b = (1 + std::sqrt(gamma)) * (1 + std::sqrt(gamma));
    const double hi = 1.25 * b;
    InversionOptions opts;
    opts.epsilon = 1e-6;
    const auto law =
        density_by_inversion(LawKind::row_variance, gamma, MixtureH::point(1.0), linear_grid(hi / 400, hi, 400), opts);
    double sup = 0.0;
    double lower = law.grid.back();
    for (std::size_t i = 0; i < law.grid.size(); ++i) {
      sup = std::max(sup, std::abs(law.density[i] - mp_density(law.grid[i], gamma)));
      if (law.density[i] > 1e-4) lower = std::min(lower, law.grid[i]);
    }
    const bool good = sup <= 0.02 && std::abs(law.upper_edge - b) <= 0.02 && std::abs(lower - a) <= 0.02;
    ok = ok && good;
    detail += "gamma " + fmt(gamma, 2) + ": sup " + fmt(sup, 3) + ", edges [" + fmt(lower) + ", " +
              fmt(law.upper_edge) + "] vs [" + fmt(a) + ", " + fmt(b) + "]; ";
  }
  report(7, ok, detail + "(need sup <= 0.02, edges within 0.02)");
}

void criterion_8() {
  constexpr int kInstances = 20;
  int chain = 0, weyl = 0, sandwich = 0, rho = 0, dominance = 0;
  for (int s = 0; s < kInstances; ++s) {
    const auto us = static_cast<std::uint64_t>(s);
    {
      const Matrix m = gaussian(1000 + us, 15 + s, 8 + s % 6);
      const auto r = destruction_report(DataMatrix(m));
      const double t = 1e-12;
      const bool ok = r.necessary.max_entry <= std::min(r.two_inf, r.two_inf_t) + t &&
                      r.necessary.frobenius_over_sqrt_p <= r.two_inf + t &&
                      r.necessary.frobenius_over_sqrt_n <= r.two_inf_t + t &&
                      r.necessary.induced_1_over_sqrt_n <= r.two_inf + t &&
                      r.necessary.induced_inf_over_sqrt_p <= r.two_inf_t + t &&
                      std::max(r.two_inf, r.two_inf_t) <= r.opnorm * (1 + 1e-9);
      chain += ok;
    }
    {
      const Matrix a = gaussian(2000 + us, 25, 12);
      const Matrix b = 0.3 * gaussian(3000 + us, 25, 12);
      const auto sa = singular_values(DataMatrix(a));
      const auto sab = singular_values(DataMatrix(Matrix(a + b)));
      const double bound = singular_values(DataMatrix(b))[0];
      bool ok = true;
      for (std::size_t k = 0; k < sa.size(); ++k) ok = ok && std::abs(sab[k] - sa[k]) <= bound * (1 + 1e-12);
      weyl += ok;
    }
    {
      const Matrix m = gaussian(4000 + us, 40, 2) * gaussian(5000 + us, 2, 40);
      const DataMatrix x(m);
      const double l = norm(x, NormKind::two_inf()) + norm(x, NormKind::two_inf_transpose());
      const double mean = monte_carlo_flip_norm(x, 20, {us, 7}).mean;
      sandwich += mean >= l / 10.0 && mean <= 10.0 * l;
    }
    {
      const Matrix m = gaussian(6000 + us, 6 + s % 4, 4 + s % 3);
      const Eigen::Index n = m.rows(), p = m.cols();
      Matrix e = Matrix::Zero(n + p, n + p);
      e.topRightCorner(n, p) = m;
      e.bottomLeftCorner(p, n) = m.transpose();
      std::vector<double> c;
      for (Eigen::Index j = 0; j < e.cols(); ++j) c.push_back(e.col(j).cwiseAbs().maxCoeff());
      std::sort(c.begin(), c.end(), std::greater<>());
      double brute = 0.0;
      for (std::size_t i = 0; i < c.size(); ++i) brute = std::max(brute, c[i] * std::sqrt(std::log(i + 1.0)));
      rho += decay_coefficient(DataMatrix(m)) == brute;
    }
    {
      const std::vector<double> theta{0.3 * s};
      const auto model = gen_spike_model({us, 11}, 120, 70, theta, VarianceProfile::homogeneous(120, 70));
      bool ok = true;
      for (auto method : {PaMethod::signflip, PaMethod::permutation}) {
        PaConfig cfg;
        cfg.method = method;
        cfg.seed = {us, 12};
        const auto nulls = generate_nulls(model.x, cfg);
        const auto data = singular_values(model.x);
        const auto pair = run_pa_given_nulls(data, nulls, cfg);
        cfg.comparison = Comparison::upper_edge;
        ok = ok && run_pa_given_nulls(data, nulls, cfg).k_hat <= pair.k_hat;
      }
      dominance += ok;
    }
  }
  const bool pass = chain == kInstances && weyl == kInstances && sandwich == kInstances && rho == kInstances &&
                    dominance == kInstances;
  auto frac = [&](int v) { return std::to_string(v) + "/" + std::to_string(kInstances); };
  report(8, pass,
         "necessary-norm chain " + frac(chain) + ", Weyl " + frac(weyl) + ", rank-2 sandwich " + frac(sandwich) +
             ", rho brute force " + frac(rho) + ", upper-edge <= pairwise " + frac(dominance));
}

void criterion_9() {
#ifdef SFPA_CLI_PATH
  const std::string cli = std::string("'") + SFPA_CLI_PATH + "'";
  const fs::path dir = fs::temp_directory_path() / ("sfpa_acceptance_" + std::to_string(::getpid()));
  fs::create_directories(dir);
  const fs::path input = dir / "x.csv";
  {
    const std::vector<double> theta{2.5};
    const auto m = gen_spike_model({42, 0}, 150, 90, theta, VarianceProfile::homogeneous(150, 90));
    write_matrix_csv(input.string(), m.x);
  }
  bool ok = true;
  for (const char* fmt_name : {"json", "csv"}) {
    std::vector<std::string> outs;
    for (const char* run : {"a", "b", "c"}) {
      const std::string threads = std::string(run) == "c" ? "4" : "1";
      const fs::path out = dir / (std::string("select_") + run + "." + fmt_name);
      ok = ok && shell(cli + " --threads " + threads + " select --input '" + input.string() + "' --seed 5 --format " +
                       fmt_name + " --output '" + out.string() + "'") == 0;
      outs.push_back(slurp(out));
    }
    ok = ok && !outs[0].empty() && outs[0] == outs[1] && outs[0] == outs[2];
  }
  for (const char* experiment : {"homogeneous", "noise-sv"}) {
    std::vector<std::string> outs;
    for (const char* run : {"a", "b", "c"}) {
      const std::string threads = std::string(run) == "c" ? "4" : "1";
      const fs::path out = dir / (std::string(experiment) + "_" + run);
      ok = ok && shell(cli + " --threads " + threads + " simulate --experiment " + experiment +
                       " --runs 10 --n 100 --p 60 --seed 9 --out-dir '" + out.string() + "'") == 0;
      std::string all;
      for (const auto& f : {std::string(experiment) + ".csv", std::string(experiment) + ".json"})
        all += slurp(out / f) + '\x1f';
      outs.push_back(all);
    }
    ok = ok && outs[0].size() > 2 && outs[0] == outs[1] && outs[0] == outs[2];
  }
  fs::remove_all(dir);
  report(9, ok, "select (json, csv) and simulate (homogeneous, noise-sv) outputs byte-identical across runs and "
                "--threads 1/4");
#else
  report(9, false, "CLI not built");
#endif
}

void criterion_10() {
  int mismatches = 0;
  for (int i = 0; i <= 20; ++i) {
    for (int j = 0; j <= 20; ++j) {
      const auto r = classify_rate_regime(0.05 * i, 0.0, 0.05 * j, 0.0);
      const bool converges = r.verdict_l1 == Verdict::converges;
      mismatches += converges != (i > j);
    }
  }
  report(10, mismatches == 0, "21x21 (alpha1, beta1) grid: " + std::to_string(mismatches) + " cells disagree with alpha1 > beta1");
}

}  // namespace

int main() {
  const std::vector<std::function<void()>> steps{criterion_1, criteria_2_3, criterion_4, criterion_5, criterion_6,
                                                 criterion_7, criterion_8,  criterion_9, criterion_10};
  for (const auto& step : steps) {
    try {
      step();
    } catch (const std::exception& e) {
      ++failures;
      std::cout << "error: " << e.what() << std::endl;
    }
  }
  std::cout << (failures ? std::to_string(failures) + " criteria failed" : std::string("all criteria passed"))
            << std::endl;
  return failures ? 1 : 0;
}
