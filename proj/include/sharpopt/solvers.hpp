#pragma once

#include <vector>

#include "sharpopt/objective.hpp"
#include "sharpopt/signal.hpp"
#include "sharpopt/trace.hpp"

namespace sharpopt {

/// Inverse mirror map of h(x) = 0.5 * ||x - anchor||_p^2:
/// anchor + sign(theta) |theta|^{q-1} / ||theta||_q^{q-2}, applied to the
/// spectrum for matrix kinds. theta = 0 maps to the anchor.
Signal mirror_inverse(const Signal& theta, const Signal& anchor, const Geometry& geom);

/// Gradient of h(x) = 0.5 * ||x - anchor||_p^2 at x; inverse of the above.
Signal mirror_forward(const Signal& x, const Signal& anchor, const Geometry& geom);

struct StopRule {
  enum class Kind { MaxIters, ValueBelow, Improvement };
  Kind kind = Kind::MaxIters;
  double target = 0.0;   // value bound or improvement amount
  long cap = 0;          // step cap for every kind

  static StopRule max_iters(long t);
  static StopRule value_below(double target, long cap);
  static StopRule improvement(double amount, long cap);
};

enum class SolveStatus { Converged, DistReached, BudgetExhausted, RoundStalled, OracleInconsistent };

struct SolveResult {
  Signal x;
  double value = 0.0;
  long total_steps = 0;
  long max_round_steps = 0;
  int rounds = 0;
  int stalled_round = -1;
  SolveStatus status = SolveStatus::Converged;
};

struct MirrorState {
  Signal anchor;
  Signal theta;
  Signal x;
  Signal x_best;
  double value = 0.0;
  double f_best = 0.0;
  long steps = 0;
};

/// Subgradient mirror descent with a fixed step size from a fixed anchor.
/// The anchor counts as iteration zero and is eligible as the best iterate.
SolveResult mirror_descent(const FirstOrderOracle& f, const Signal& anchor, const Geometry& geom,
                           double eta, const StopRule& stop, RunMonitor* mon = nullptr,
                           int round = 0);

/// Restart schedule of Theorem-style RMD: eps_k = eps0 e^{-k/2},
/// K = ceil(2 ln(eps0/eps)), t = ceil(e L^2 / (mu^2 (p-1))),
/// eta_k = (p-1) eps_k / L^2. L is measured in the p-norm geometry.
struct SolverSchedule {
  double eps0 = 0.0, eps_target = 0.0, mu = 0.0, L = 0.0, p = 2.0;
  int K = 0;
  long t_inner = 0;
  std::vector<double> eps_k, eta_k;

  static SolverSchedule theorem(double eps0, double eps_target, double mu, double L_p, double p);
};

/// Restarted mirror descent with fixed round length t_inner.
SolveResult rmd(const FirstOrderOracle& f, const Signal& x0, const Geometry& geom,
                const SolverSchedule& schedule, RunMonitor* mon = nullptr);

struct PolyakRmdOptions {
  double eps0 = 1.0;
  double eps_target = 1e-9;
  double L = 1.0;               // Lipschitz bound in the p-norm geometry
  long round_cap = 10'000'000;  // per-round safety cap
};

/// Restarted mirror descent with known optimal value: round k stops as soon
/// as some iterate reaches f_star + eps_k. A round that exhausts round_cap
/// reports RoundStalled naming the round.
SolveResult polyak_rmd(const FirstOrderOracle& f, double f_star, const Signal& x0,
                       const Geometry& geom, const PolyakRmdOptions& opts,
                       RunMonitor* mon = nullptr);

struct AdaptiveRmdOptions {
  double eps0 = 1.0;
  double eps_target = 1e-9;
  double L = 1.0;  // Lipschitz bound in the p-norm geometry
  long budget = 50'000'000;
};

struct AdaptiveRmdDebug {
  std::vector<std::vector<double>> anchor_values;  // per worker, in restart order
  std::vector<std::vector<double>> passed_values;  // values posted downstream
  std::vector<int> restarts;
  long rounds = 0;
};

/// K = 1 + ceil(lg(eps0/eps)) parallel workers on the epsilon ladder
/// eps_i = eps0 2^{-i}, eta_i = (p-1) eps_i / L^2, simulated in lockstep
/// (one inner step per worker per round, messages delivered at round
/// boundaries). Worker i restarts when it improves its anchor by eps_i or
/// receives an iterate from worker i-1 that does; each restart passes the
/// new anchor to worker i+1. Terminates once the bottom worker's anchor has
/// improved on f(x0) by eps0 - eps_target, which certifies a gap of at most
/// eps_target whenever the starting gap was at most eps0, or once the step
/// budget is spent; returns the bottom worker's best iterate.
SolveResult adaptive_rmd(const FirstOrderOracle& f, const Signal& x0, const Geometry& geom,
                         const AdaptiveRmdOptions& opts, RunMonitor* mon = nullptr,
                         AdaptiveRmdDebug* debug = nullptr);

/// Euclidean Polyak subgradient method. A zero subgradient with positive gap
/// means f_star was misreported; that run ends with OracleInconsistent.
SolveResult polyak_gd(const FirstOrderOracle& f, double f_star, const Signal& x0,
                      double eps_target, long max_steps, RunMonitor* mon = nullptr);

}  // namespace sharpopt
