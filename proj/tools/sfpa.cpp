// sfpa: rank selection by signflip / permutation parallel analysis, noise
// diagnostics, limiting spectral laws and simulation sweeps.
//
// Exit codes: 0 ok, 2 usage or invalid argument, 3 I/O or parse failure,
// 4 numeric failure.

#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "sfpa/sfpa.hpp"

namespace {

using sfpa::Json;

enum Exit { kOk = 0, kUsage = 2, kIo = 3, kNumeric = 4 };

struct Common {
  std::size_t threads = 0;
  bool timing = false;
};

std::size_t resolve_threads(std::size_t flag) { return flag ? flag : sfpa::default_thread_count(); }

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw sfpa::IoError("cannot write '" + path + "'");
  out << text;
  out.flush();
  if (!out) throw sfpa::IoError("write to '" + path + "' failed");
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json envelope(const std::string& command, Json config, Json result, std::uint64_t seed) {
  return Json{{"command", command}, {"seed", seed}, {"config", std::move(config)}, {"result", std::move(result)}};
}

void stamp_time(Json& report, const Common& common, std::chrono::steady_clock::time_point start) {
  if (!common.timing) return;
  report["wall_time_seconds"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

struct InputOpts {
  std::string path;
  std::string delimiter = ",";
  bool header = false;
  std::string missing_token;
  std::string preprocess = "impute";
};

void add_input_flags(CLI::App* cmd, InputOpts& in, bool with_preprocess) {
  cmd->add_option("--input", in.path, "Matrix file (CSV or SFPA binary)")->required();
  cmd->add_option("--delimiter", in.delimiter, "CSV field delimiter")->capture_default_str();
  cmd->add_flag("--header", in.header, "CSV has a header row");
  cmd->add_option("--missing-token", in.missing_token, "CSV token marking a missing cell (default: empty)");
  if (with_preprocess)
    cmd->add_option("--preprocess", in.preprocess,
                    "Comma-separated steps: impute, center_rows, center_columns, scale_columns, or none")
        ->capture_default_str();
}

sfpa::DataMatrix load_input(const InputOpts& in, std::vector<std::string>& warnings) {
  if (in.delimiter.size() != 1) throw sfpa::InputError("--delimiter must be a single character");
  sfpa::CsvOptions opts;
  opts.delimiter = in.delimiter.front();
  opts.has_header = in.header;
  opts.missing_token = in.missing_token;
  const auto loaded = sfpa::read_matrix(in.path, opts);
  const auto steps = sfpa::parse_preprocess_steps(in.preprocess);
  return sfpa::apply_preprocess(loaded.matrix, loaded.missing, steps, &warnings);
}

Json steps_json(const std::string& text) {
  Json out = Json::array();
  for (auto s : sfpa::parse_preprocess_steps(text)) out.push_back(sfpa::to_string(s));
  return out;
}

// ---- select ----

struct SelectOpts {
  InputOpts input;
  std::string method = "signflip";
  std::string comparison = "pairwise";
  double alpha = 95.0;
  std::size_t trials = 10;
  std::uint64_t seed = 0;
  std::optional<std::size_t> max_rank;
  std::string output;
  std::string format = "json";
};

int cmd_select(const SelectOpts& o, const Common& common) {
  const auto start = std::chrono::steady_clock::now();
  std::vector<std::string> warnings;
  const sfpa::DataMatrix x = load_input(o.input, warnings);

  sfpa::PaConfig cfg;
  cfg.method = o.method == "signflip" ? sfpa::PaMethod::signflip : sfpa::PaMethod::permutation;
  cfg.comparison = o.comparison == "pairwise" ? sfpa::Comparison::pairwise : sfpa::Comparison::upper_edge;
  cfg.alpha = o.alpha;
  cfg.trials = o.trials;
  cfg.max_rank = o.max_rank;
  cfg.seed = sfpa::SeedSpec{o.seed, 0};
  cfg.threads = resolve_threads(common.threads);
  sfpa::SelectionResult r = sfpa::run_pa(x, cfg);
  r.warnings.insert(r.warnings.begin(), warnings.begin(), warnings.end());
  for (const auto& w : r.warnings) std::cerr << "warning: " << w << '\n';

  if (!o.output.empty()) {
    if (o.format == "csv") {
      std::ostringstream os;
      sfpa::write_selection_csv(os, r);
      write_text(o.output, os.str());
    } else {
      Json config{{"input", o.input.path},
                  {"n", x.n()},
                  {"p", x.p()},
                  {"method", o.method},
                  {"comparison", o.comparison},
                  {"alpha", o.alpha},
                  {"trials", o.trials},
                  {"max_rank", o.max_rank ? Json(*o.max_rank) : Json(nullptr)},
                  {"preprocess", steps_json(o.input.preprocess)}};
      Json report = envelope("select", std::move(config), sfpa::to_json(r), o.seed);
      stamp_time(report, common, start);
      write_text(o.output, dump(report));
    }
  }
  std::cout << r.k_hat << '\n';
  return kOk;
}

// ---- simulate ----

struct SimulateOpts {
  std::string experiment;
  std::size_t runs = 100;
  std::uint64_t seed = 0;
  std::string out_dir;
  std::size_t n = 500;
  std::size_t p = 300;
  std::size_t trials = 10;
  double alpha = 95.0;
  std::string noise = "gaussian";
};

sfpa::NoiseDist parse_noise(const std::string& s) {
  if (s == "gaussian") return sfpa::NoiseDist::gaussian;
  if (s == "rademacher") return sfpa::NoiseDist::rademacher;
  return sfpa::NoiseDist::uniform_pm_sqrt3;
}

void prepare_out_dir(const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw sfpa::IoError("cannot create output directory '" + dir + "'");
  // Probe writability up front so a long simulation does not fail at the end.
  const fs::path probe = fs::path(dir) / ".sfpa_write_probe";
  {
    std::ofstream out(probe);
    if (!out) throw sfpa::IoError("output directory '" + dir + "' is not writable");
  }
  fs::remove(probe, ec);
}

double mean_of(const std::vector<double>& v) {
  double s = 0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double stderr_of(const std::vector<double>& v) {
  const double m = mean_of(v);
  double ss = 0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1) / static_cast<double>(v.size()));
}

int cmd_simulate(const SimulateOpts& o, const Common& common) {
  const auto start = std::chrono::steady_clock::now();
  prepare_out_dir(o.out_dir);
  const std::filesystem::path dir(o.out_dir);
  const std::size_t threads = resolve_threads(common.threads);
  std::vector<std::string> written;
  auto emit = [&](const std::string& name, const std::string& text) {
    const std::string path = (dir / name).string();
    write_text(path, text);
    written.push_back(path);
  };

  if (o.experiment == "noise-sv") {
    const auto s = sfpa::noise_sv_distributions(o.seed, o.runs, sfpa::hetero_rows_profile(), o.n, o.p,
                                                parse_noise(o.noise), sfpa::SpectrumBackend::gram, threads);
    std::ostringstream csv;
    sfpa::write_noise_sv_csv(csv, s);
    emit("noise-sv.csv", csv.str());
    auto summary = [](const std::vector<double>& v) {
      return Json{{"mean", mean_of(v)}, {"stderr", stderr_of(v)}};
    };
    const double z_perm = (mean_of(s.original) - mean_of(s.permuted)) /
                          std::hypot(stderr_of(s.original), stderr_of(s.permuted));
    const double z_flip = (mean_of(s.signflipped) - mean_of(s.original)) /
                          std::hypot(stderr_of(s.original), stderr_of(s.signflipped));
    Json result{{"original", summary(s.original)},
                {"permuted", summary(s.permuted)},
                {"signflipped", summary(s.signflipped)},
                {"z_original_minus_permuted", z_perm},
                {"z_signflipped_minus_original", z_flip}};
    Json config{{"experiment", o.experiment}, {"draws", o.runs}, {"n", o.n}, {"p", o.p}, {"noise", o.noise}};
    Json report = envelope("simulate", std::move(config), std::move(result), o.seed);
    stamp_time(report, common, start);
    emit("noise-sv.json", dump(report));
  } else if (o.experiment == "homogenization-demo") {
    const auto d = sfpa::homogenization_demo(o.seed, o.n, o.p, 800, threads);
    std::ostringstream hist, row, perm;
    sfpa::write_homogenization_csv(hist, d);
    sfpa::write_law_csv(row, d.row_law);
    sfpa::write_law_csv(perm, d.permuted_law);
    emit("homogenization-demo.csv", hist.str());
    emit("homogenization-row-law.csv", row.str());
    emit("homogenization-permuted-law.csv", perm.str());
    Json config{{"experiment", o.experiment}, {"n", o.n}, {"p", o.p}};
    Json report = envelope("simulate", std::move(config), sfpa::to_json(d), o.seed);
    stamp_time(report, common, start);
    emit("homogenization-demo.json", dump(report));
  } else {
    sfpa::SweepConfig cfg;
    cfg.n = o.n;
    cfg.p = o.p;
    cfg.runs = o.runs;
    cfg.trials = o.trials;
    cfg.alpha = o.alpha;
    cfg.seed = o.seed;
    cfg.noise = parse_noise(o.noise);
    cfg.threads = threads;
    sfpa::SweepResult r;
    if (o.experiment == "homogeneous")
      r = sfpa::experiment_homogeneous(cfg);
    else if (o.experiment == "hetero-rows")
      r = sfpa::experiment_hetero_rows(cfg);
    else
      r = sfpa::experiment_hetero_grid(cfg);
    std::ostringstream csv;
    sfpa::write_sweep_csv(csv, r);
    emit(o.experiment + ".csv", csv.str());
    Json config{{"experiment", o.experiment}, {"noise", o.noise}};
    Json report = envelope("simulate", std::move(config), sfpa::to_json(r), o.seed);
    stamp_time(report, common, start);
    emit(o.experiment + ".json", dump(report));
  }
  for (const auto& w : written) std::cout << w << '\n';
  return kOk;
}

// ---- law ----

struct LawOpts {
  std::string law = "row";
  double gamma = 0.0;
  std::string atoms;
  std::string grid;
  std::optional<double> epsilon;
  std::string output;
  std::string density_csv;
};

double parse_number(const std::string& field, const std::string& what) {
  try {
    std::size_t used = 0;
    const double v = std::stod(field, &used);
    if (used != field.size() || !std::isfinite(v)) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw sfpa::InputError("invalid number '" + field + "' in " + what);
  }
}

std::vector<std::string> split_on(const std::string& s, char c) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(s);
  while (std::getline(is, cur, c)) out.push_back(cur);
  if (!s.empty() && s.back() == c) out.emplace_back();
  return out;
}

sfpa::MixtureH parse_atoms(const std::string& text) {
  std::vector<sfpa::Atom> atoms;
  for (const auto& item : split_on(text, ',')) {
    const auto tw = split_on(item, ':');
    if (tw.size() != 2) throw sfpa::InputError("--atoms expects t:w pairs, got '" + item + "'");
    atoms.push_back({parse_number(tw[0], "--atoms"), parse_number(tw[1], "--atoms")});
  }
  if (atoms.empty()) throw sfpa::InputError("--atoms is empty");
  return sfpa::MixtureH(std::move(atoms));
}

std::vector<double> parse_grid(const std::string& text) {
  const auto parts = split_on(text, ':');
  if (parts.size() != 3) throw sfpa::InputError("--grid expects min:max:steps");
  const double lo = parse_number(parts[0], "--grid");
  const double hi = parse_number(parts[1], "--grid");
  const double steps = parse_number(parts[2], "--grid");
  if (!(hi > lo)) throw sfpa::InputError("--grid needs max > min");
  if (steps < 2 || steps != std::floor(steps)) throw sfpa::InputError("--grid steps must be an integer >= 2");
  return sfpa::linear_grid(lo, hi, static_cast<std::size_t>(steps));
}

int cmd_law(const LawOpts& o, const Common& common) {
  const auto start = std::chrono::steady_clock::now();
  if (!(o.gamma > 0.0) || !std::isfinite(o.gamma)) throw sfpa::InputError("--gamma must be positive");
  const sfpa::MixtureH h = parse_atoms(o.atoms);
  const sfpa::LawKind kind = o.law == "row" ? sfpa::LawKind::row_variance : sfpa::LawKind::permuted_column;
  std::vector<double> grid;
  if (o.grid.empty()) {
    const double r = 1.0 + std::sqrt(o.gamma);
    grid = sfpa::linear_grid(0.0, 1.25 * std::max(h.max_t(), 1e-12) * r * r, 801);
  } else {
    grid = parse_grid(o.grid);
  }
  sfpa::InversionOptions inv;
  inv.epsilon = o.epsilon;
  inv.threads = resolve_threads(common.threads);
  const sfpa::SpectralLaw law = sfpa::density_by_inversion(kind, o.gamma, h, grid, inv);
  for (const auto& w : law.warnings) std::cerr << "warning: " << w << '\n';

  if (!o.density_csv.empty()) {
    std::ostringstream os;
    sfpa::write_law_csv(os, law);
    write_text(o.density_csv, os.str());
  }
  if (!o.output.empty()) {
    Json config{{"law", o.law}, {"gamma", o.gamma}, {"atoms", o.atoms}, {"grid", o.grid},
                {"epsilon", o.epsilon ? Json(*o.epsilon) : Json(nullptr)}};
    Json report = envelope("law", std::move(config), sfpa::to_json(law), 0);
    report.erase("seed");
    stamp_time(report, common, start);
    write_text(o.output, dump(report));
  }
  std::cout << sfpa::format_double(law.upper_edge) << '\n';
  return kOk;
}

// ---- diagnose ----

struct DiagnoseOpts {
  InputOpts input;
  std::optional<std::size_t> flip_trials;
  std::uint64_t seed = 0;
  double k = 4.0;
  std::string output;
};

int cmd_diagnose(DiagnoseOpts o, const Common& common) {
  const auto start = std::chrono::steady_clock::now();
  if (o.flip_trials && *o.flip_trials < 2) throw sfpa::InputError("--flip-trials needs at least 2 draws");
  std::vector<std::string> warnings;
  const sfpa::DataMatrix s = load_input(o.input, warnings);
  for (const auto& w : warnings) std::cerr << "warning: " << w << '\n';

  Json result = sfpa::to_json(sfpa::destruction_report(s, o.k));
  if (o.flip_trials) {
    const auto est =
        sfpa::monte_carlo_flip_norm(s, *o.flip_trials, sfpa::SeedSpec{o.seed, 0}, resolve_threads(common.threads));
    result["monte_carlo_flip_norm"] = sfpa::to_json(est);
  }
  Json config{{"input", o.input.path},
              {"n", s.n()},
              {"p", s.p()},
              {"k", o.k},
              {"flip_trials", o.flip_trials ? Json(*o.flip_trials) : Json(nullptr)},
              {"preprocess", steps_json(o.input.preprocess)}};
  Json report = envelope("diagnose", std::move(config), std::move(result), o.seed);
  stamp_time(report, common, start);
  if (o.output.empty())
    std::cout << dump(report);
  else
    write_text(o.output, dump(report));
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Signflip and permutation parallel analysis"};
  app.require_subcommand(1);
  Common common;
  app.add_option("--threads", common.threads, "Worker threads (0: SFPA_THREADS or hardware count)");
  app.add_flag("--timing", common.timing, "Include wall time in JSON reports");

  SelectOpts sel;
  auto* select = app.add_subcommand("select", "Select the number of factors");
  add_input_flags(select, sel.input, true);
  select->add_option("--method", sel.method)->check(CLI::IsMember({"signflip", "permutation"}))->capture_default_str();
  select->add_option("--comparison", sel.comparison)
      ->check(CLI::IsMember({"pairwise", "upper-edge"}))
      ->capture_default_str();
  select->add_option("--alpha", sel.alpha, "Null percentile in (0, 100]")
      ->check(CLI::Range(std::nextafter(0.0, 1.0), 100.0))
      ->capture_default_str();
  select->add_option("--trials", sel.trials, "Null draws")->check(CLI::PositiveNumber)->capture_default_str();
  select->add_option("--seed", sel.seed)->capture_default_str();
  select->add_option("--max-rank", sel.max_rank, "Largest rank considered (default min(n, p) - 1)")
      ->check(CLI::PositiveNumber);
  select->add_option("--output", sel.output, "Report path");
  select->add_option("--format", sel.format)->check(CLI::IsMember({"json", "csv"}))->capture_default_str();

  SimulateOpts sim;
  auto* simulate = app.add_subcommand("simulate", "Run a simulation experiment");
  simulate->add_option("--experiment", sim.experiment)
      ->required()
      ->check(CLI::IsMember({"homogeneous", "hetero-rows", "hetero-grid", "noise-sv", "homogenization-demo"}));
  simulate->add_option("--runs", sim.runs, "Runs per theta, or draws for noise-sv")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  simulate->add_option("--seed", sim.seed)->capture_default_str();
  simulate->add_option("--out-dir", sim.out_dir)->required();
  simulate->add_option("--n", sim.n, "Samples")->check(CLI::PositiveNumber)->capture_default_str();
  simulate->add_option("--p", sim.p, "Features")->check(CLI::PositiveNumber)->capture_default_str();
  simulate->add_option("--trials", sim.trials, "Null draws per selection")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  simulate->add_option("--alpha", sim.alpha)->check(CLI::Range(std::nextafter(0.0, 1.0), 100.0))->capture_default_str();
  simulate->add_option("--noise", sim.noise)
      ->check(CLI::IsMember({"gaussian", "rademacher", "uniform"}))
      ->capture_default_str();

  LawOpts law;
  auto* law_cmd = app.add_subcommand("law", "Solve a limiting spectral law");
  law_cmd->add_option("--law", law.law)->check(CLI::IsMember({"row", "permuted"}))->capture_default_str();
  law_cmd->add_option("--gamma", law.gamma, "Aspect ratio p/n")->required();
  law_cmd->add_option("--atoms", law.atoms, "Mixture atoms t1:w1,t2:w2,...")->required();
  law_cmd->add_option("--grid", law.grid, "Evaluation grid min:max:steps");
  law_cmd->add_option("--epsilon", law.epsilon, "Imaginary offset for inversion");
  law_cmd->add_option("--output", law.output, "JSON report path");
  law_cmd->add_option("--density-csv", law.density_csv, "Density CSV path");

  DiagnoseOpts diag;
  diag.input.preprocess = "none";
  auto* diagnose = app.add_subcommand("diagnose", "Signal destruction diagnostics");
  add_input_flags(diagnose, diag.input, true);
  diagnose->add_option("--flip-trials", diag.flip_trials, "Monte Carlo draws of ||R o S|| (>= 2)");
  diagnose->add_option("--seed", diag.seed)->capture_default_str();
  diagnose->add_option("--k", diag.k, "Entrywise norm exponent (>= 2)")->capture_default_str();
  diagnose->add_option("--output", diag.output, "Report path (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*select) return cmd_select(sel, common);
    if (*simulate) return cmd_simulate(sim, common);
    if (*law_cmd) return cmd_law(law, common);
    return cmd_diagnose(diag, common);
  } catch (const sfpa::InputError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const sfpa::ParseError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const sfpa::IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const sfpa::ConvergenceError& e) {
    std::cerr << "error: " << e.what() << " (residual " << e.residual() << ")\n";
    return kNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumeric;
  }
}
