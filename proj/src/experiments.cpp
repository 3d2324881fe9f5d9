#include "sharpopt/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <thread>
#include <utility>

#include "json.hpp"
#include "sharpopt/rng.hpp"

namespace sharpopt {

namespace {

using ordered_json = nlohmann::ordered_json;

constexpr std::uint64_t kSignalDomain = 1;
constexpr std::uint64_t kOperatorDomain = 2;
constexpr std::uint64_t kNoiseDomain = 3;
constexpr std::uint64_t kLipschitzDomain = 4;
constexpr std::uint64_t kSharpnessDomain = 5;
constexpr std::uint64_t kRipDomain = 6;

SensingModel model_for(Task task) {
  switch (task) {
    case Task::SparseRecovery: return SensingModel::SparseVector;
    case Task::MatrixSensing: return SensingModel::MatrixDense;
    case Task::PhaseRetrieval: return SensingModel::CovarianceRankOne;
    case Task::CovarianceI: return SensingModel::CovarianceRankOne;
    case Task::CovarianceII: return SensingModel::CovarianceDifference;
  }
  throw std::logic_error("model_for: unknown task");
}

int domain_cols(Task task, int n, int N) {
  switch (task) {
    case Task::SparseRecovery: return 0;
    case Task::MatrixSensing: return N > 0 ? N : n;
    default: return n;
  }
}

}  // namespace

long threshold(Task task, int n, int N, int k) {
  if (n < 1) throw std::invalid_argument("threshold: n must be positive");
  switch (task) {
    case Task::SparseRecovery: {
      if (k < 1 || k >= n) throw std::invalid_argument("threshold: need 1 <= k < n");
      return static_cast<long>(std::ceil(2.0 * k * std::log(double(n) / k) + 1.25 * k + 1.0));
    }
    case Task::MatrixSensing: {
      const int NN = N > 0 ? N : n;
      if (k < 1 || k > std::min(n, NN))
        throw std::invalid_argument("threshold: need 1 <= k <= min(n, N)");
      return 3L * k * (long(n) + NN - k) + 1;
    }
    case Task::PhaseRetrieval:
      return 2L * n;
    case Task::CovarianceI:
    case Task::CovarianceII:
      if (k < 1 || k > n) throw std::invalid_argument("threshold: need 1 <= k <= n");
      return 3L * n * k;
  }
  throw std::logic_error("threshold: unknown task");
}

bool threshold_extrapolated(Task task) {
  return task == Task::CovarianceI || task == Task::CovarianceII;
}

Instance generate_instance(Task task, int n, int N, int k, int m, std::uint64_t seed) {
  if (n < 1) throw std::invalid_argument("generate_instance: n must be positive");
  if (m < 1) throw std::invalid_argument("generate_instance: m must be positive");

  Instance inst;
  inst.task = task;
  inst.n = n;
  inst.k = k;
  inst.m = m;
  inst.seed = seed;
  inst.N = domain_cols(task, n, N);

  CounterRng rng(derive_seed(seed, kSignalDomain), 0);
  switch (task) {
    case Task::SparseRecovery: {
      if (k < 1 || k >= n) throw std::invalid_argument("generate_instance: need 1 <= k < n");
      Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
      for (Eigen::Index i : sample_without_replacement(rng, n, k)) x(i) = rng.next_normal();
      const double s = x.lpNorm<1>();
      if (!(s > 0.0)) throw std::runtime_error("generate_instance: degenerate sparse draw");
      inst.x_true = Signal::vector(x / s);
      break;
    }
    case Task::MatrixSensing: {
      if (k < 1 || k > std::min(n, inst.N))
        throw std::invalid_argument("generate_instance: need 1 <= k <= min(n, N)");
      Eigen::MatrixXd G = normal_matrix(rng, n, inst.N);
      Eigen::BDCSVD<Eigen::MatrixXd> svd(G, Eigen::ComputeThinU | Eigen::ComputeThinV);
      Eigen::VectorXd sv = svd.singularValues().head(k);
      Eigen::MatrixXd X = svd.matrixU().leftCols(k) * sv.asDiagonal() *
                          svd.matrixV().leftCols(k).transpose();
      inst.x_true = Signal::rectangular(X / sv.sum());
      break;
    }
    case Task::PhaseRetrieval: {
      Eigen::VectorXd g = normal_vector(rng, n);
      g /= g.norm();
      inst.x_true = Signal::symmetric(g * g.transpose());
      break;
    }
    case Task::CovarianceI:
    case Task::CovarianceII: {
      if (k < 1 || k > n) throw std::invalid_argument("generate_instance: need 1 <= k <= n");
      Eigen::MatrixXd F = normal_matrix(rng, n, k);
      Eigen::MatrixXd X = F * F.transpose();
      inst.x_true = Signal::symmetric(X / X.trace());
      break;
    }
  }

  inst.T = threshold(task, n, inst.N, k);
  inst.op = std::make_shared<SensingOperator>(SensingOperator::build(
      model_for(task), n, inst.N, m, Scaling::EllTwo, derive_seed(seed, kOperatorDomain)));
  inst.b = inst.op->apply(inst.x_true);
  return inst;
}

NoiseSpec NoiseSpec::none() { return NoiseSpec{}; }

NoiseSpec NoiseSpec::dense(double norm) {
  if (!(norm >= 0.0)) throw std::invalid_argument("noise: dense norm must be nonnegative");
  NoiseSpec s;
  s.mode = Mode::Dense;
  s.dense_norm = norm;
  return s;
}

NoiseSpec NoiseSpec::dense_vector(Eigen::VectorXd delta) {
  NoiseSpec s;
  s.mode = Mode::Dense;
  s.dense_norm = delta.norm();
  s.delta = std::move(delta);
  return s;
}

NoiseSpec NoiseSpec::sparse(double alpha, bool adversarial) {
  if (!(alpha >= 0.0 && alpha <= 1.0))
    throw std::invalid_argument("noise: alpha must lie in [0, 1]");
  NoiseSpec s;
  s.mode = Mode::SparseCorruption;
  s.alpha = alpha;
  s.adversarial = adversarial;
  return s;
}

NoisyData apply_noise(const Instance& inst, const NoiseSpec& noise, std::uint64_t seed) {
  NoisyData out;
  out.b = inst.b;
  out.delta = Eigen::VectorXd::Zero(inst.m);
  switch (noise.mode) {
    case NoiseSpec::Mode::None:
      return out;
    case NoiseSpec::Mode::Dense: {
      if (noise.delta.size() > 0) {
        if (noise.delta.size() != inst.m)
          throw std::invalid_argument("noise: delta length does not match m");
        out.delta = noise.delta;
      } else if (noise.dense_norm > 0.0) {
        CounterRng rng(derive_seed(seed, kNoiseDomain), 0);
        Eigen::VectorXd g = normal_vector(rng, inst.m);
        out.delta = g * (noise.dense_norm / g.norm());
      }
      out.b += out.delta;
      out.delta = out.b - inst.b;
      return out;
    }
    case NoiseSpec::Mode::SparseCorruption: {
      if (!(noise.alpha >= 0.0 && noise.alpha <= 1.0))
        throw std::invalid_argument("noise: alpha must lie in [0, 1]");
      const long count =
          std::min<long>(inst.m, static_cast<long>(std::ceil(noise.alpha * inst.m)));
      if (count == 0) return out;
      CounterRng rng(derive_seed(seed, kNoiseDomain), 0);
      auto idx = sample_without_replacement(rng, inst.m, count);
      Eigen::VectorXd mags = inst.b.cwiseAbs();
      std::vector<double> sorted(mags.data(), mags.data() + mags.size());
      std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
      const double median = sorted[sorted.size() / 2];
      // Adversarial corruption zeros the chosen entries. Data consistent with
      // a shrunken signal is the worst case here: inflated entries fight the
      // regularizer, so the minimizer would stay put no matter how large they
      // are, while zeroed entries pull it toward zero as soon as the corrupted
      // fraction outweighs the regularizer's margin.
      for (Eigen::Index i : idx)
        out.b(i) = noise.adversarial ? 0.0 : median * rng.next_normal();
      out.delta = out.b - inst.b;
      return out;
    }
  }
  throw std::logic_error("apply_noise: unknown mode");
}

std::string to_string(SolverChoice s) {
  switch (s) {
    case SolverChoice::Rmd: return "rmd";
    case SolverChoice::PolyakRmd: return "polyak-rmd";
    case SolverChoice::AdaptiveRmd: return "adaptive-rmd";
    case SolverChoice::PolyakGd: return "polyak-gd";
  }
  return "unknown";
}

std::string to_string(Task t) {
  switch (t) {
    case Task::SparseRecovery: return "sparse";
    case Task::MatrixSensing: return "matrix";
    case Task::PhaseRetrieval: return "phase";
    case Task::CovarianceI: return "covariance";
    case Task::CovarianceII: return "covariance-diff";
  }
  return "unknown";
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::Converged: return "converged";
    case SolveStatus::DistReached: return "dist-reached";
    case SolveStatus::BudgetExhausted: return "budget-exhausted";
    case SolveStatus::RoundStalled: return "round-stalled";
    case SolveStatus::OracleInconsistent: return "oracle-inconsistent";
  }
  return "unknown";
}

RunRecord run_instance(const Instance& inst, const NoiseSpec& noise, const RunSettings& settings) {
  if (!inst.op) throw std::invalid_argument("run_instance: instance has no operator");
  NoisyData data = apply_noise(inst, noise, inst.seed);
  auto obj = std::make_shared<PenaltyObjective>(build_default(inst.task, inst.op, data.b, inst.k));

  RunRecord rec;
  const FirstOrderOracle* oracle = obj.get();
  std::shared_ptr<ThresholdedObjective> thr;
  if (noise.mode == NoiseSpec::Mode::Dense) {
    const double noise_norm = obj->w_norm() == ResidualNorm::EllOne ? data.delta.lpNorm<1>()
                                                                    : data.delta.norm();
    thr = std::make_shared<ThresholdedObjective>(
        thresholded(obj, obj->base_value(inst.x_true), noise_norm));
    oracle = thr.get();
    rec.f_star = thr->threshold();
  } else {
    rec.f_star = obj->value(inst.x_true);
  }

  const Signal x0 = inst.op->zero_domain();
  const double v0 = oracle->value(x0);
  rec.eps0 = std::max(v0 - rec.f_star, 1e-12);

  Geometry geom = settings.p > 0.0 ? Geometry(settings.p) : Geometry::for_dim(x0.spectral_dim());
  rec.p_used = geom.p;
  rec.L_used = settings.L_override > 0.0
                   ? settings.L_override
                   : estimate_lipschitz(*obj, x0, LipschitzOptions{},
                                        derive_seed(inst.seed, kLipschitzDomain));
  const double L_sched =
      settings.scale_l_by_e && geom.p < 2.0 ? std::exp(1.0) * rec.L_used : rec.L_used;

  RunMonitor mon;
  mon.trace() = ConvergenceTrace(settings.trace_capacity);
  // A nonpositive tolerance disables the distance stop but keeps the metric.
  mon.set_truth(inst.x_true, settings.dist_tol > 0.0 ? settings.dist_tol : -1.0);
  mon.set_budget(settings.budget);

  const double eps_target =
      settings.eps_target > 0.0
          ? settings.eps_target
          : (settings.dist_tol > 0.0 ? 0.1 * settings.dist_tol : 1e-9);

  switch (settings.solver) {
    case SolverChoice::PolyakRmd: {
      PolyakRmdOptions o;
      o.eps0 = rec.eps0;
      o.eps_target = eps_target;
      o.L = L_sched;
      o.round_cap = std::min(settings.round_cap, settings.budget);
      rec.result = polyak_rmd(*oracle, rec.f_star, x0, geom, o, &mon);
      break;
    }
    case SolverChoice::Rmd: {
      const double mu = settings.mu_override > 0.0
                            ? settings.mu_override
                            : estimate_sharpness(*oracle, inst.x_true, SharpnessOptions{},
                                                 derive_seed(inst.seed, kSharpnessDomain));
      SolverSchedule sched = SolverSchedule::theorem(rec.eps0, eps_target, mu, L_sched, geom.p);
      rec.result = rmd(*oracle, x0, geom, sched, &mon);
      break;
    }
    case SolverChoice::AdaptiveRmd: {
      AdaptiveRmdOptions o;
      o.eps0 = rec.eps0;
      o.eps_target = eps_target;
      o.L = L_sched;
      o.budget = settings.budget;
      rec.result = adaptive_rmd(*oracle, x0, geom, o, &mon);
      break;
    }
    case SolverChoice::PolyakGd: {
      rec.result = polyak_gd(*oracle, rec.f_star, x0, eps_target, settings.budget, &mon);
      break;
    }
  }
  rec.steps_to_dist = mon.steps_to_dist();
  rec.final_dist = mon.final_dist(rec.result.x);
  rec.trace = mon.trace();
  return rec;
}

namespace {

struct CellSpec {
  Task task = Task::SparseRecovery;
  SolverChoice solver = SolverChoice::PolyakRmd;
  double multiple = 0.0;
  int n = 0, N = 0, k = 0, m = 0;
  std::uint64_t seed = 0;
};

SweepResult run_cells(const std::vector<CellSpec>& specs, const SweepConfig& cfg) {
  SweepResult out;
  out.cells.resize(specs.size());
  out.traces.assign(specs.size(), ConvergenceTrace(cfg.run.trace_capacity));
  std::atomic<std::size_t> next{0};
  auto work = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= specs.size()) return;
      const CellSpec& s = specs[i];
      Instance inst = generate_instance(s.task, s.n, s.N, s.k, s.m, s.seed);
      RunSettings rs = cfg.run;
      rs.solver = s.solver;
      RunRecord rec = run_instance(inst, cfg.noise, rs);

      SweepCell c;
      c.task = s.task;
      c.solver = s.solver;
      c.multiple = s.multiple;
      c.n = s.n;
      c.m = s.m;
      c.seed = s.seed;
      c.steps_to_dist = rec.steps_to_dist;
      c.total_steps = rec.result.total_steps;
      c.max_round_steps = rec.result.max_round_steps;
      c.rounds = rec.result.rounds;
      c.L_used = rec.L_used;
      c.f_star = rec.f_star;
      c.final_value = rec.result.value;
      c.final_dist = rec.final_dist;
      c.status = rec.result.status;
      c.recovered = rec.steps_to_dist >= 0 ||
                    (cfg.run.dist_tol > 0.0 && std::isfinite(rec.final_dist) &&
                     rec.final_dist <= cfg.run.dist_tol);
      if (s.solver != SolverChoice::PolyakGd && rec.result.max_round_steps > 0)
        c.mu_suggested = std::sqrt(std::exp(3.0) * rec.L_used * rec.L_used *
                                   std::log(std::max(double(s.n), 2.0)) /
                                   double(rec.result.max_round_steps));
      out.cells[i] = std::move(c);
      out.traces[i] = std::move(rec.trace);
    }
  };
  const int jobs = std::max(1, cfg.jobs);
  if (jobs == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (int t = 0; t < jobs; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  return out;
}

}  // namespace

SweepResult run_convergence_sweep(const SweepConfig& cfg) {
  if (cfg.multiples.empty() && cfg.m_override <= 0)
    throw std::invalid_argument("multiples: grid is empty");
  if (cfg.seeds.empty()) throw std::invalid_argument("seed: grid is empty");
  const long T = threshold(cfg.task, cfg.n, cfg.N, cfg.k);
  const std::vector<double> mults = cfg.m_override > 0
                                        ? std::vector<double>{double(cfg.m_override) / double(T)}
                                        : cfg.multiples;
  std::vector<CellSpec> specs;
  for (double mult : mults)
    for (SolverChoice sol : cfg.solvers)
      for (std::uint64_t seed : cfg.seeds) {
        CellSpec s;
        s.task = cfg.task;
        s.solver = sol;
        s.multiple = mult;
        s.n = cfg.n;
        s.N = cfg.N;
        s.k = cfg.k;
        s.m = cfg.m_override > 0 ? cfg.m_override
                                 : std::max(1, int(std::lround(mult * double(T))));
        s.seed = seed;
        specs.push_back(s);
      }
  return run_cells(specs, cfg);
}

SweepResult run_dimension_sweep(const SweepConfig& cfg) {
  if (cfg.dims.empty()) throw std::invalid_argument("dims: grid is empty");
  if (cfg.multiples.empty()) throw std::invalid_argument("multiples: grid is empty");
  if (cfg.seeds.empty()) throw std::invalid_argument("seed: grid is empty");
  std::vector<CellSpec> specs;
  for (int n : cfg.dims) {
    const long T = threshold(cfg.task, n, 0, cfg.k);
    for (double mult : cfg.multiples)
      for (SolverChoice sol : cfg.solvers)
        for (std::uint64_t seed : cfg.seeds) {
          CellSpec s;
          s.task = cfg.task;
          s.solver = sol;
          s.multiple = mult;
          s.n = n;
          s.N = 0;
          s.k = cfg.k;
          s.m = std::max(1, int(std::lround(mult * double(T))));
          s.seed = seed;
          specs.push_back(s);
        }
  }
  return run_cells(specs, cfg);
}

std::vector<RipCell> run_rip_sweep(const SweepConfig& cfg) {
  if (cfg.k_primes.empty()) throw std::invalid_argument("k-prime: grid is empty");
  if (cfg.multiples.empty() && cfg.m_override <= 0)
    throw std::invalid_argument("multiples: grid is empty");
  if (cfg.seeds.empty()) throw std::invalid_argument("seed: grid is empty");
  std::vector<RipCell> out;
  for (int kp : cfg.k_primes) {
    const long T = threshold(cfg.task, cfg.n, cfg.N, kp);
    const std::vector<double> mults = cfg.m_override > 0
                                          ? std::vector<double>{double(cfg.m_override) / double(T)}
                                          : cfg.multiples;
    for (double mult : mults)
      for (std::uint64_t seed : cfg.seeds) {
        const int m = cfg.m_override > 0 ? cfg.m_override
                                         : std::max(1, int(std::lround(mult * double(T))));
        SensingOperator op =
            SensingOperator::build(model_for(cfg.task), cfg.n, domain_cols(cfg.task, cfg.n, cfg.N),
                                   m, Scaling::EllTwo, derive_seed(seed, kOperatorDomain));
        RipEstimate est = estimate_rip(op, kp, cfg.rip_trials, derive_seed(seed, kRipDomain));
        RipCell cell;
        cell.k_prime = kp;
        cell.multiple = mult;
        cell.m = m;
        cell.seed = seed;
        cell.lower = est.lower;
        cell.upper = est.upper;
        cell.ratio = est.lower > 0.0 ? est.upper / est.lower
                                     : std::numeric_limits<double>::infinity();
        out.push_back(cell);
      }
  }
  return out;
}

std::string Provenance::line() const {
  char buf[256];
  std::snprintf(buf, sizeof(buf), "# tool=%s version=%s config_hash=%s seed=%llu", tool.c_str(),
                version.c_str(), config_hash.c_str(),
                static_cast<unsigned long long>(seed));
  return buf;
}

namespace {

ordered_json provenance_json(const Provenance& prov) {
  ordered_json j;
  j["tool"] = prov.tool;
  j["version"] = prov.version;
  j["config_hash"] = prov.config_hash;
  j["seed"] = prov.seed;
  return j;
}

ordered_json cell_json(const SweepCell& c) {
  ordered_json j;
  j["task"] = to_string(c.task);
  j["solver"] = to_string(c.solver);
  j["multiple"] = c.multiple;
  j["n"] = c.n;
  j["m"] = c.m;
  j["seed"] = c.seed;
  j["status"] = to_string(c.status);
  j["recovered"] = c.recovered;
  j["steps_to_dist"] = c.steps_to_dist;
  j["total_steps"] = c.total_steps;
  j["max_round_steps"] = c.max_round_steps;
  j["rounds"] = c.rounds;
  j["mu_suggested"] = c.mu_suggested;
  j["L_used"] = c.L_used;
  j["f_star"] = c.f_star;
  j["final_value"] = c.final_value;
  j["final_dist"] = c.final_dist;
  return j;
}

}  // namespace

std::string sweep_summary_json(const SweepResult& result, const Provenance& prov,
                               const std::string& config_echo) {
  ordered_json j;
  j["provenance"] = provenance_json(prov);
  j["config"] = config_echo;
  j["cells"] = ordered_json::array();
  for (const SweepCell& c : result.cells) j["cells"].push_back(cell_json(c));
  return j.dump(2) + "\n";
}

std::string rip_summary_json(const std::vector<RipCell>& cells, const Provenance& prov,
                             const std::string& config_echo) {
  ordered_json j;
  j["provenance"] = provenance_json(prov);
  j["config"] = config_echo;
  j["cells"] = ordered_json::array();
  for (const RipCell& c : cells) {
    ordered_json cj;
    cj["k_prime"] = c.k_prime;
    cj["multiple"] = c.multiple;
    cj["m"] = c.m;
    cj["seed"] = c.seed;
    cj["rip_lower"] = c.lower;
    cj["rip_upper"] = c.upper;
    cj["ratio"] = c.ratio;
    j["cells"].push_back(cj);
  }
  return j.dump(2) + "\n";
}

std::string run_summary_json(const Instance& inst, const RunRecord& rec, const Provenance& prov,
                             const std::string& config_echo) {
  ordered_json j;
  j["provenance"] = provenance_json(prov);
  j["config"] = config_echo;
  ordered_json ji;
  ji["task"] = to_string(inst.task);
  ji["n"] = inst.n;
  ji["N"] = inst.N;
  ji["k"] = inst.k;
  ji["m"] = inst.m;
  ji["threshold"] = inst.T;
  ji["threshold_extrapolated"] = threshold_extrapolated(inst.task);
  ji["seed"] = inst.seed;
  j["instance"] = ji;
  ordered_json jr;
  jr["status"] = to_string(rec.result.status);
  jr["f_star"] = rec.f_star;
  jr["eps0"] = rec.eps0;
  jr["L_used"] = rec.L_used;
  jr["p_used"] = rec.p_used;
  jr["total_steps"] = rec.result.total_steps;
  jr["max_round_steps"] = rec.result.max_round_steps;
  jr["rounds"] = rec.result.rounds;
  jr["stalled_round"] = rec.result.stalled_round;
  jr["steps_to_dist"] = rec.steps_to_dist;
  jr["final_value"] = rec.result.value;
  jr["final_dist"] = rec.final_dist;
  j["run"] = jr;
  return j.dump(2) + "\n";
}

void write_plot_csv(const SweepResult& result, std::ostream& os, const Provenance& prov) {
  os << prov.line() << "\n";
  os << "m_multiple,seed,iter_thousands,distance\n";
  char buf[160];
  for (std::size_t i = 0; i < result.cells.size(); ++i) {
    const SweepCell& c = result.cells[i];
    for (const TraceRow& row : result.traces[i].rows()) {
      if (std::isnan(row.dist_to_truth)) continue;
      std::snprintf(buf, sizeof(buf), "%.6g,%llu,%.6g,%.10g\n", c.multiple,
                    static_cast<unsigned long long>(c.seed), double(row.iter) / 1000.0,
                    row.dist_to_truth);
      os << buf;
    }
  }
}

}  // namespace sharpopt
