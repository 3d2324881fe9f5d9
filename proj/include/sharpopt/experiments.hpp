#pragma once

#include <cstdint>
#include <memory>
#include <ostream>
#include <string>
#include <vector>

#include "sharpopt/objective.hpp"
#include "sharpopt/solvers.hpp"

namespace sharpopt {

/// Measurement count at which recovery becomes information-theoretically
/// possible for each task. Sparse: ceil(2k ln(n/k) + 1.25k + 1). Low-rank
/// sensing: 3k(n + N - k) + 1. Phase retrieval: 2n. The covariance tasks use
/// 3nk, an extrapolation from the low-rank count (no sharp constant is
/// established for them here).
long threshold(Task task, int n, int N, int k);

/// True for the covariance tasks, whose threshold constant is extrapolated
/// rather than backed by a table value; surfaced in output metadata.
bool threshold_extrapolated(Task task);

struct Instance {
  Task task = Task::SparseRecovery;
  int n = 0;
  int N = 0;
  int k = 0;
  int m = 0;
  long T = 0;
  std::uint64_t seed = 0;
  Signal x_true;
  std::shared_ptr<const SensingOperator> op;
  Eigen::VectorXd b;
};

/// Draws the planted signal (normalized so its base regularizer value is 1),
/// builds the sensing operator, and takes exact measurements. Sub-seeds are
/// derived from `seed` so the instance is reproducible bit for bit.
Instance generate_instance(Task task, int n, int N, int k, int m, std::uint64_t seed);

struct NoiseSpec {
  enum class Mode { None, Dense, SparseCorruption };
  Mode mode = Mode::None;
  Eigen::VectorXd delta;     // explicit dense perturbation; drawn when empty
  double dense_norm = 0.0;   // target l2 norm of a drawn dense perturbation
  double alpha = 0.0;        // corrupted fraction for SparseCorruption
  bool adversarial = false;  // zero the entries instead of resampling

  static NoiseSpec none();
  static NoiseSpec dense(double norm);
  static NoiseSpec dense_vector(Eigen::VectorXd delta);
  static NoiseSpec sparse(double alpha, bool adversarial = false);
};

struct NoisyData {
  Eigen::VectorXd b;
  Eigen::VectorXd delta;  // b - clean measurements
};

/// Corrupted entries of SparseCorruption are resampled as Gaussians scaled by
/// the median |b_i| (or zeroed in adversarial mode).
NoisyData apply_noise(const Instance& inst, const NoiseSpec& noise, std::uint64_t seed);

enum class SolverChoice { Rmd, PolyakRmd, AdaptiveRmd, PolyakGd };

std::string to_string(SolverChoice s);
std::string to_string(Task t);
std::string to_string(SolveStatus s);

struct RunSettings {
  SolverChoice solver = SolverChoice::PolyakRmd;
  double p = 0.0;           // <= 0 selects 1 + 1/ln(dim)
  double dist_tol = 1e-6;   // <= 0 disables the distance stop
  double eps_target = 0.0;  // <= 0 derives one from dist_tol
  long budget = 50'000'000;
  long round_cap = 10'000'000;
  bool scale_l_by_e = true;  // l1-geometry schedules consume e*L
  double L_override = 0.0;
  double mu_override = 0.0;  // fixed-schedule rmd only
  std::size_t trace_capacity = 4096;
};

struct RunRecord {
  SolveResult result;
  double f_star = 0.0;
  double eps0 = 0.0;
  double L_used = 0.0;   // raw l1-scale Lipschitz estimate
  double p_used = 0.0;
  long steps_to_dist = -1;
  double final_dist = 0.0;
  ConvergenceTrace trace{16};
};

/// Wires noise into the objective (dense noise runs against the thresholded
/// objective whose optimal value is known exactly) and dispatches the solver.
RunRecord run_instance(const Instance& inst, const NoiseSpec& noise, const RunSettings& settings);

struct SweepConfig {
  Task task = Task::SparseRecovery;
  int n = 10000;
  int N = 0;
  int k = 5;
  std::vector<double> multiples = {1.0, 2.0, 3.0, 4.0};
  std::vector<int> dims;       // dimension sweep grid
  std::vector<int> k_primes;   // rip sweep grid
  std::vector<std::uint64_t> seeds = {0};
  int m_override = 0;          // absolute m; ignores multiples when set
  NoiseSpec noise;
  RunSettings run;
  std::vector<SolverChoice> solvers = {SolverChoice::PolyakRmd};
  int jobs = 1;
  int rip_trials = 200;
};

struct SweepCell {
  Task task = Task::SparseRecovery;
  SolverChoice solver = SolverChoice::PolyakRmd;
  double multiple = 0.0;
  int n = 0;
  int m = 0;
  std::uint64_t seed = 0;
  long steps_to_dist = -1;
  long total_steps = 0;
  long max_round_steps = 0;
  int rounds = 0;
  double mu_suggested = 0.0;
  double L_used = 0.0;
  double f_star = 0.0;
  double final_value = 0.0;
  double final_dist = 0.0;
  SolveStatus status = SolveStatus::Converged;
  bool recovered = false;
};

struct SweepResult {
  std::vector<SweepCell> cells;
  std::vector<ConvergenceTrace> traces;  // parallel to cells
};

/// Grid = multiples x solvers x seeds at fixed (task, n, N, k).
SweepResult run_convergence_sweep(const SweepConfig& cfg);

/// Grid = dims x multiples x solvers x seeds; n varies, m = multiple * T(n).
SweepResult run_dimension_sweep(const SweepConfig& cfg);

struct RipCell {
  int k_prime = 0;
  double multiple = 0.0;
  int m = 0;
  std::uint64_t seed = 0;
  double lower = 0.0;
  double upper = 0.0;
  double ratio = 0.0;  // upper / lower
};

std::vector<RipCell> run_rip_sweep(const SweepConfig& cfg);

struct Provenance {
  std::string tool = "sharpopt";
  std::string version;
  std::string config_hash;
  std::uint64_t seed = 0;

  std::string line() const;  // single-line comment form for CSV headers
};

/// Deterministic summary: provenance block, the canonical config echo, then
/// one record per cell in grid order. No wall-clock content.
std::string sweep_summary_json(const SweepResult& result, const Provenance& prov,
                               const std::string& config_echo);
std::string rip_summary_json(const std::vector<RipCell>& cells, const Provenance& prov,
                             const std::string& config_echo);
std::string run_summary_json(const Instance& inst, const RunRecord& rec, const Provenance& prov,
                             const std::string& config_echo);

/// Long-form plot table: m_multiple,seed,iter_thousands,distance.
void write_plot_csv(const SweepResult& result, std::ostream& os, const Provenance& prov);

}  // namespace sharpopt
