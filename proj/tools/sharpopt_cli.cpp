#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sharpopt/config.hpp"
#include "sharpopt/experiments.hpp"
#include "sharpopt/rng.hpp"

namespace fs = std::filesystem;
using namespace sharpopt;

namespace {

struct Options {
  std::string task = "sparse";
  int n = 100000;
  int N = 0;
  int k = 5;
  std::vector<double> multiples = {4.0};
  int m = 0;
  std::string solver = "polyak-rmd";
  std::string p = "auto";
  std::string noise = "none";
  std::vector<std::uint64_t> seeds = {0};
  double tol = 1e-6;
  double eps_target = 0.0;
  long budget = 50'000'000;
  long round_cap = 10'000'000;
  bool no_e_scale = false;
  double L = 0.0;
  double mu = 0.0;
  int jobs = 1;
  std::string out = "out";
  std::string mode = "convergence";
  std::vector<int> dims;
  std::vector<int> k_primes;
  int trials = 200;
  std::string what = "conditioning";
};

Task parse_task(const std::string& s) {
  if (s == "sparse") return Task::SparseRecovery;
  if (s == "matrix") return Task::MatrixSensing;
  if (s == "phase") return Task::PhaseRetrieval;
  if (s == "covariance") return Task::CovarianceI;
  if (s == "covariance-diff") return Task::CovarianceII;
  throw std::invalid_argument("task: unknown value '" + s + "'");
}

SolverChoice parse_solver(const std::string& s) {
  if (s == "rmd") return SolverChoice::Rmd;
  if (s == "polyak-rmd") return SolverChoice::PolyakRmd;
  if (s == "adaptive-rmd") return SolverChoice::AdaptiveRmd;
  if (s == "polyak-gd") return SolverChoice::PolyakGd;
  throw std::invalid_argument("solver: unknown value '" + s + "'");
}

double parse_p(const std::string& s) {
  if (s == "auto") return 0.0;
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw std::invalid_argument("p: expected 'auto' or a number, got '" + s + "'");
  }
  if (pos != s.size()) throw std::invalid_argument("p: expected 'auto' or a number, got '" + s + "'");
  if (!(v > 1.0) || v > 2.0) throw std::invalid_argument("p: value must lie in (1, 2]");
  return v;
}

NoiseSpec parse_noise(const std::string& s) {
  if (s == "none") return NoiseSpec::none();
  auto colon = s.find(':');
  const std::string head = s.substr(0, colon);
  const std::string arg = colon == std::string::npos ? "" : s.substr(colon + 1);
  auto number = [&](const char* what) {
    std::size_t pos = 0;
    double v = 0.0;
    try {
      v = std::stod(arg, &pos);
    } catch (const std::exception&) {
      throw std::invalid_argument(std::string("noise: expected ") + what + " after '" + head + ":'");
    }
    if (pos != arg.size())
      throw std::invalid_argument(std::string("noise: expected ") + what + " after '" + head + ":'");
    return v;
  };
  if (head == "dense") return NoiseSpec::dense(number("a norm"));
  if (head == "sparse") return NoiseSpec::sparse(number("a fraction"), false);
  if (head == "sparse-adv") return NoiseSpec::sparse(number("a fraction"), true);
  throw std::invalid_argument("noise: unknown value '" + s + "'");
}

std::string join_doubles(const std::vector<double>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ',';
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v[i]);
    os << buf;
  }
  return os.str();
}

template <typename T>
std::string join_ints(const std::vector<T>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) os << ',';
    os << v[i];
  }
  return os.str();
}

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string canonical_echo(const Options& o, const std::string& verb) {
  std::vector<std::pair<std::string, std::string>> kv = {
      {"verb", verb},
      {"task", o.task},
      {"n", std::to_string(o.n)},
      {"N", std::to_string(o.N)},
      {"k", std::to_string(o.k)},
      {"m-multiple", join_doubles(o.multiples)},
      {"m", std::to_string(o.m)},
      {"solver", o.solver},
      {"p", o.p},
      {"noise", o.noise},
      {"seed", join_ints(o.seeds)},
      {"tol", format_double(o.tol)},
      {"eps-target", format_double(o.eps_target)},
      {"budget", std::to_string(o.budget)},
      {"round-cap", std::to_string(o.round_cap)},
      {"no-e-scale", o.no_e_scale ? "true" : "false"},
      {"L", format_double(o.L)},
      {"mu", format_double(o.mu)},
      {"jobs", std::to_string(o.jobs)},
      {"mode", o.mode},
      {"dims", join_ints(o.dims)},
      {"k-prime", join_ints(o.k_primes)},
      {"trials", std::to_string(o.trials)},
      {"what", o.what},
  };
  return canonical_config(std::move(kv));
}

RunSettings make_run_settings(const Options& o) {
  RunSettings rs;
  rs.solver = parse_solver(o.solver);
  rs.p = parse_p(o.p);
  rs.dist_tol = o.tol;
  rs.eps_target = o.eps_target;
  rs.budget = o.budget;
  rs.round_cap = o.round_cap;
  rs.scale_l_by_e = !o.no_e_scale;
  rs.L_override = o.L;
  rs.mu_override = o.mu;
  return rs;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("out: cannot write " + path.string());
  os << text;
}

std::string trace_name(const SweepCell& c) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "trace_%s_%s_n%d_m%d_seed%llu.csv", to_string(c.task).c_str(),
                to_string(c.solver).c_str(), c.n, c.m, static_cast<unsigned long long>(c.seed));
  return buf;
}

int exit_code_for(const std::vector<SweepCell>& cells) {
  for (const SweepCell& c : cells)
    if (c.status == SolveStatus::RoundStalled || c.status == SolveStatus::BudgetExhausted ||
        c.status == SolveStatus::OracleInconsistent)
      return 2;
  return 0;
}

nlohmann::ordered_json signal_json(const Signal& s) {
  nlohmann::ordered_json j;
  switch (s.kind()) {
    case SignalKind::Vector: j["kind"] = "vector"; break;
    case SignalKind::Symmetric: j["kind"] = "symmetric"; break;
    case SignalKind::Rectangular: j["kind"] = "rectangular"; break;
  }
  j["rows"] = s.rows();
  j["cols"] = s.cols();
  auto flat = nlohmann::ordered_json::array();
  for (Eigen::Index c = 0; c < s.cols(); ++c)
    for (Eigen::Index r = 0; r < s.rows(); ++r) flat.push_back(s.data()(r, c));
  j["data"] = std::move(flat);
  return j;
}

int cmd_generate(const Options& o, const Provenance& prov, const std::string& echo) {
  const Task task = parse_task(o.task);
  const long T = threshold(task, o.n, o.N, o.k);
  const int m = o.m > 0 ? o.m : std::max(1, int(std::lround(o.multiples.front() * double(T))));
  Instance inst = generate_instance(task, o.n, o.N, o.k, m, o.seeds.front());
  NoisyData data = apply_noise(inst, parse_noise(o.noise), inst.seed);

  fs::create_directories(o.out);
  inst.op->save((fs::path(o.out) / "operator.bin").string(), false);

  nlohmann::ordered_json j;
  j["provenance"] = {{"tool", prov.tool},
                     {"version", prov.version},
                     {"config_hash", prov.config_hash},
                     {"seed", prov.seed}};
  j["config"] = echo;
  j["task"] = to_string(task);
  j["n"] = inst.n;
  j["N"] = inst.N;
  j["k"] = inst.k;
  j["m"] = inst.m;
  j["threshold"] = inst.T;
  j["threshold_extrapolated"] = threshold_extrapolated(task);
  j["seed"] = inst.seed;
  j["x_true"] = signal_json(inst.x_true);
  auto b = nlohmann::ordered_json::array();
  for (Eigen::Index i = 0; i < data.b.size(); ++i) b.push_back(data.b(i));
  j["b"] = std::move(b);
  write_text(fs::path(o.out) / "instance.json", j.dump(2) + "\n");
  std::cout << "wrote " << (fs::path(o.out) / "instance.json").string() << " and operator.bin (T="
            << T << ", m=" << m << ")\n";
  return 0;
}

int cmd_run(const Options& o, const Provenance& prov, const std::string& echo) {
  const Task task = parse_task(o.task);
  const long T = threshold(task, o.n, o.N, o.k);
  const int m = o.m > 0 ? o.m : std::max(1, int(std::lround(o.multiples.front() * double(T))));
  Instance inst = generate_instance(task, o.n, o.N, o.k, m, o.seeds.front());
  RunRecord rec = run_instance(inst, parse_noise(o.noise), make_run_settings(o));

  fs::create_directories(o.out);
  {
    std::ofstream os(fs::path(o.out) / "trace.csv", std::ios::binary);
    rec.trace.write_csv(os, prov.line());
  }
  write_text(fs::path(o.out) / "summary.json", run_summary_json(inst, rec, prov, echo));

  std::cout << "status=" << to_string(rec.result.status) << " steps=" << rec.result.total_steps
            << " final_value=" << rec.result.value << " final_dist=" << rec.final_dist << "\n";
  const bool bad = rec.result.status == SolveStatus::RoundStalled ||
                   rec.result.status == SolveStatus::BudgetExhausted ||
                   rec.result.status == SolveStatus::OracleInconsistent;
  return bad ? 2 : 0;
}

int cmd_sweep(const Options& o, const Provenance& prov, const std::string& echo,
              bool multiples_given, bool seeds_given) {
  SweepConfig cfg;
  cfg.task = parse_task(o.task);
  cfg.n = o.n;
  cfg.N = o.N;
  cfg.k = o.k;
  cfg.m_override = o.m;
  cfg.noise = parse_noise(o.noise);
  cfg.run = make_run_settings(o);
  cfg.jobs = o.jobs;
  cfg.rip_trials = o.trials;
  cfg.seeds = seeds_given ? o.seeds
                          : std::vector<std::uint64_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};

  fs::create_directories(o.out);
  if (o.mode == "rip") {
    cfg.multiples = multiples_given ? o.multiples : std::vector<double>{2.0, 4.0, 8.0};
    cfg.k_primes = o.k_primes.empty() ? std::vector<int>{1, 5, 10} : o.k_primes;
    auto cells = run_rip_sweep(cfg);
    write_text(fs::path(o.out) / "summary.json", rip_summary_json(cells, prov, echo));
    std::cout << "wrote " << (fs::path(o.out) / "summary.json").string() << " (" << cells.size()
              << " cells)\n";
    return 0;
  }

  SweepResult result;
  if (o.mode == "dimension") {
    cfg.multiples = multiples_given ? o.multiples : std::vector<double>{4.0};
    cfg.dims = o.dims.empty() ? std::vector<int>{1000, 10000} : o.dims;
    cfg.solvers = {SolverChoice::PolyakRmd, SolverChoice::PolyakGd};
    result = run_dimension_sweep(cfg);
  } else if (o.mode == "convergence") {
    cfg.multiples = multiples_given ? o.multiples : std::vector<double>{1.0, 2.0, 3.0, 4.0};
    cfg.solvers = {parse_solver(o.solver)};
    result = run_convergence_sweep(cfg);
  } else {
    throw std::invalid_argument("mode: unknown value '" + o.mode + "'");
  }

  write_text(fs::path(o.out) / "summary.json", sweep_summary_json(result, prov, echo));
  {
    std::ofstream os(fs::path(o.out) / "plot_data.csv", std::ios::binary);
    if (!os) throw std::runtime_error("out: cannot write plot_data.csv");
    write_plot_csv(result, os, prov);
  }
  for (std::size_t i = 0; i < result.cells.size(); ++i) {
    std::ofstream os(fs::path(o.out) / trace_name(result.cells[i]), std::ios::binary);
    result.traces[i].write_csv(os, prov.line());
  }
  std::cout << "wrote " << (fs::path(o.out) / "summary.json").string() << " ("
            << result.cells.size() << " cells)\n";
  return exit_code_for(result.cells);
}

int cmd_estimate(const Options& o) {
  const Task task = parse_task(o.task);
  const long T = threshold(task, o.n, o.N, o.k);
  const int m = o.m > 0 ? o.m : std::max(1, int(std::lround(o.multiples.front() * double(T))));
  Instance inst = generate_instance(task, o.n, o.N, o.k, m, o.seeds.front());
  NoisyData data = apply_noise(inst, parse_noise(o.noise), inst.seed);
  auto obj = std::make_shared<PenaltyObjective>(build_default(task, inst.op, data.b, inst.k));

  SharpnessOptions sharp_opts;
  sharp_opts.trials = o.trials;
  LipschitzOptions lip_opts;
  lip_opts.trials = o.trials;

  std::cout << "task=" << to_string(task) << " n=" << inst.n << " k=" << inst.k << " m=" << inst.m
            << " T=" << T << " seed=" << inst.seed << "\n";
  if (o.what == "sharpness" || o.what == "conditioning") {
    if (o.what == "sharpness") {
      const double mu = estimate_sharpness(*obj, inst.x_true, sharp_opts,
                                           derive_seed(inst.seed, 5));
      std::cout << "mu_hat=" << mu << "\n";
    } else {
      ConditioningEstimate ce =
          estimate_conditioning(*obj, inst.x_true, sharp_opts, lip_opts, inst.seed);
      std::cout << "mu_hat=" << ce.mu_hat << " L_hat=" << ce.L_hat << " kappa_hat=" << ce.kappa_hat
                << " r=" << ce.r << " ell=" << ce.ell << "\n";
    }
  } else if (o.what == "lipschitz") {
    const double L = estimate_lipschitz(*obj, inst.op->zero_domain(), lip_opts,
                                        derive_seed(inst.seed, 4));
    std::cout << "L_hat=" << L << "\n";
  } else if (o.what == "rip") {
    const std::vector<int> kps = o.k_primes.empty() ? std::vector<int>{o.k} : o.k_primes;
    for (int kp : kps) {
      RipEstimate est = estimate_rip(*inst.op, kp, o.trials, derive_seed(inst.seed, 6));
      std::cout << "k_prime=" << kp << " rip_lower=" << est.lower << " rip_upper=" << est.upper
                << " ratio=" << (est.lower > 0 ? est.upper / est.lower : 0.0) << "\n";
    }
  } else {
    throw std::invalid_argument("what: unknown value '" + o.what + "'");
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Sharp-recovery solvers: restarted mirror descent for exact-penalty formulations"};
  app.require_subcommand(1);
  app.set_config("--config", "", "Config file (key=value lines; keys mirror the long flags)");
  app.allow_config_extras(false);

  app.add_option("--task", o.task, "Recovery task: sparse|matrix|phase|covariance|covariance-diff")
      ->capture_default_str();
  app.add_option("--n", o.n, "Signal dimension n")->capture_default_str();
  app.add_option("--N", o.N, "Second dimension for matrix sensing (0 = square)")
      ->capture_default_str();
  app.add_option("--k", o.k, "Sparsity or rank of the planted signal")->capture_default_str();
  app.add_option("--m-multiple", o.multiples,
                 "Measurement multiples of the threshold T; run/generate/estimate use the first "
                 "entry (sweep defaults: convergence 1,2,3,4; dimension 4; rip 2,4,8)")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--m", o.m, "Absolute measurement count (overrides --m-multiple when > 0)")
      ->capture_default_str();
  app.add_option("--solver", o.solver, "rmd|polyak-rmd|adaptive-rmd|polyak-gd")
      ->capture_default_str();
  app.add_option("--p", o.p, "Geometry exponent in (1,2] or 'auto' (= 1 + 1/ln dim)")
      ->capture_default_str();
  app.add_option("--noise", o.noise, "none | dense:NORM | sparse:ALPHA | sparse-adv:ALPHA")
      ->capture_default_str();
  app.add_option("--seed", o.seeds, "Seed list (sweep default when omitted: 0..9)")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--tol", o.tol, "Recovery tolerance on ||x - x_true||_1 (<= 0 disables)")
      ->capture_default_str();
  app.add_option("--eps-target", o.eps_target, "Value-gap target (0 = derive from --tol)")
      ->capture_default_str();
  app.add_option("--budget", o.budget, "Global oracle-step budget")->capture_default_str();
  app.add_option("--round-cap", o.round_cap, "Per-round safety cap for polyak-rmd")
      ->capture_default_str();
  app.add_flag("--no-e-scale", o.no_e_scale,
               "Feed the raw L (not e*L) into l1-geometry step sizes")
      ->capture_default_str();
  app.add_option("--L", o.L, "Lipschitz override (0 = estimate)")->capture_default_str();
  app.add_option("--mu", o.mu, "Sharpness override for rmd (0 = estimate)")->capture_default_str();
  app.add_option("--jobs", o.jobs, "Parallel sweep workers")->capture_default_str();
  app.add_option("--out", o.out, "Output directory (created if missing)")->capture_default_str();
  app.add_option("--mode", o.mode, "Sweep mode: convergence|dimension|rip")->capture_default_str();
  app.add_option("--dims", o.dims, "Dimension grid for sweep --mode dimension (default 1000,10000)")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--k-prime", o.k_primes, "Support/rank grid for RIP estimation (default 1,5,10)")
      ->delimiter(',')
      ->capture_default_str();
  app.add_option("--trials", o.trials, "Trial count for estimators")->capture_default_str();
  app.add_option("--what", o.what, "estimate target: sharpness|lipschitz|conditioning|rip")
      ->capture_default_str();

  CLI::App* sub_generate = app.add_subcommand("generate", "Generate an instance and operator");
  CLI::App* sub_run = app.add_subcommand("run", "Run one solver on one instance");
  CLI::App* sub_sweep = app.add_subcommand("sweep", "Run a sweep grid");
  CLI::App* sub_estimate = app.add_subcommand("estimate", "Print conditioning/RIP estimates");
  for (CLI::App* sub : {sub_generate, sub_run, sub_sweep, sub_estimate}) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    std::cout << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    std::cout << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }

  const bool multiples_given = app.count("--m-multiple") > 0;
  const bool seeds_given = app.count("--seed") > 0;
  if (o.seeds.empty()) {
    std::cerr << "config error: seed: list is empty\n";
    return 1;
  }

  std::string verb = sub_generate->parsed()   ? "generate"
                     : sub_run->parsed()      ? "run"
                     : sub_sweep->parsed()    ? "sweep"
                                              : "estimate";
  Options effective = o;
  if (sub_sweep->parsed() && !seeds_given)
    effective.seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  const std::string echo = canonical_echo(effective, verb);
  Provenance prov;
  prov.version = kToolVersion;
  prov.config_hash = config_hash(echo);
  prov.seed = effective.seeds.front();

  try {
    if (sub_generate->parsed()) return cmd_generate(o, prov, echo);
    if (sub_run->parsed()) return cmd_run(o, prov, echo);
    if (sub_sweep->parsed()) return cmd_sweep(o, prov, echo, multiples_given, seeds_given);
    if (sub_estimate->parsed()) return cmd_estimate(o);
    return 1;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
