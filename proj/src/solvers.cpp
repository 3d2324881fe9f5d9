#include "sharpopt/solvers.hpp"

#include <cmath>
#include <stdexcept>

namespace sharpopt {

namespace {

// Maps nonnegative magnitudes a -> |a|^{q-1} / ||a||_q^{q-2}, computed on
// max-normalized values so large q never overflows pow().
Eigen::ArrayXd inverse_map_magnitudes(const Eigen::ArrayXd& a, double q) {
  const double peak = a.size() ? a.maxCoeff() : 0.0;
  if (!(peak > 0.0)) return Eigen::ArrayXd::Zero(a.size());
  Eigen::ArrayXd t = a / peak;
  Eigen::ArrayXd tq1 = t.pow(q - 1.0);
  const double nq = std::pow((tq1 * t).sum(), 1.0 / q);
  return tq1 * (peak / std::pow(nq, q - 2.0));
}

// Maps nonnegative magnitudes a -> |a|^{p-1} * ||a||_p^{2-p}.
Eigen::ArrayXd forward_map_magnitudes(const Eigen::ArrayXd& a, double p) {
  const double peak = a.size() ? a.maxCoeff() : 0.0;
  if (!(peak > 0.0)) return Eigen::ArrayXd::Zero(a.size());
  Eigen::ArrayXd t = a / peak;
  Eigen::ArrayXd tp1 = t.pow(p - 1.0);
  const double np = std::pow((tp1 * t).sum(), 1.0 / p);
  return tp1 * (peak * std::pow(np, 2.0 - p));
}

Signal map_signal(const Signal& s, double exponent, bool inverse) {
  auto mapper = [&](const Eigen::ArrayXd& mags) {
    return inverse ? inverse_map_magnitudes(mags, exponent)
                   : forward_map_magnitudes(mags, exponent);
  };
  if (s.kind() == SignalKind::Vector) {
    Eigen::ArrayXd vals = s.data().reshaped().array();
    Eigen::ArrayXd mapped = mapper(vals.abs());
    Signal out = Signal::zeros_like(s);
    out.data().reshaped().array() = vals.sign() * mapped;
    return out;
  }
  SpectralDecomposition dec = decompose(s);
  Eigen::ArrayXd vals = dec.values.array();
  Eigen::VectorXd mapped = (vals.sign() * mapper(vals.abs())).matrix();
  Signal out = recompose(dec, mapped, s.kind());
  if (s.kind() == SignalKind::Symmetric) out.symmetrize();
  return out;
}

void check_same_shape(const Signal& a, const Signal& b, const char* what) {
  if (a.kind() != b.kind() || a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument(std::string(what) + ": mismatched signal shapes");
}

}  // namespace

Signal mirror_inverse(const Signal& theta, const Signal& anchor, const Geometry& geom) {
  check_same_shape(theta, anchor, "mirror_inverse");
  if (geom.q == 2.0) {
    Signal out = anchor + theta;
    if (out.kind() == SignalKind::Symmetric) out.symmetrize();
    return out;
  }
  return anchor + map_signal(theta, geom.q, true);
}

Signal mirror_forward(const Signal& x, const Signal& anchor, const Geometry& geom) {
  check_same_shape(x, anchor, "mirror_forward");
  Signal diff = x - anchor;
  if (geom.p == 2.0) return diff;
  return map_signal(diff, geom.p, false);
}

StopRule StopRule::max_iters(long t) {
  if (t < 0) throw std::invalid_argument("stop rule: iteration count must be >= 0");
  StopRule s;
  s.kind = Kind::MaxIters;
  s.cap = t;
  return s;
}

StopRule StopRule::value_below(double target, long cap) {
  if (cap < 0) throw std::invalid_argument("stop rule: cap must be >= 0");
  if (!std::isfinite(target)) throw std::invalid_argument("stop rule: target must be finite");
  StopRule s;
  s.kind = Kind::ValueBelow;
  s.target = target;
  s.cap = cap;
  return s;
}

StopRule StopRule::improvement(double amount, long cap) {
  if (cap < 0) throw std::invalid_argument("stop rule: cap must be >= 0");
  if (!(amount >= 0.0)) throw std::invalid_argument("stop rule: improvement must be >= 0");
  StopRule s;
  s.kind = Kind::Improvement;
  s.target = amount;
  s.cap = cap;
  return s;
}

SolveResult mirror_descent(const FirstOrderOracle& f, const Signal& anchor, const Geometry& geom,
                           double eta, const StopRule& stop, RunMonitor* mon, int round) {
  if (stop.cap < 0) throw std::invalid_argument("mirror_descent: negative step cap");
  if (stop.cap > 0 && !(eta > 0.0)) throw std::invalid_argument("mirror_descent: eta must be positive");

  MirrorState st;
  st.anchor = anchor;
  st.theta = Signal::zeros_like(anchor);
  st.x = anchor;
  Evaluation ev = f.value_and_subgrad(anchor);
  st.value = ev.value;
  st.x_best = anchor;
  st.f_best = ev.value;
  const double anchor_value = ev.value;

  SolveResult out;
  auto finish = [&](SolveStatus status) {
    out.x = st.x_best;
    out.value = st.f_best;
    out.total_steps = st.steps;
    out.max_round_steps = st.steps;
    out.rounds = 1;
    out.status = status;
    return out;
  };
  auto satisfied = [&]() {
    switch (stop.kind) {
      case StopRule::Kind::ValueBelow: return st.f_best <= stop.target;
      case StopRule::Kind::Improvement: return anchor_value - st.f_best >= stop.target;
      case StopRule::Kind::MaxIters: return false;
    }
    return false;
  };

  if (mon) {
    MonitorSignal sig = mon->observe(st.x, ev.value, st.f_best, false, round);
    if (sig == MonitorSignal::DistReached) {
      finish(SolveStatus::DistReached);
      out.x = st.x;
      out.value = ev.value;
      return out;
    }
    if (sig == MonitorSignal::BudgetExhausted) return finish(SolveStatus::BudgetExhausted);
  }
  if (satisfied()) return finish(SolveStatus::Converged);

  while (st.steps < stop.cap) {
    st.theta -= eta * ev.subgrad;
    st.x = mirror_inverse(st.theta, st.anchor, geom);
    ev = f.value_and_subgrad(st.x);
    ++st.steps;
    st.value = ev.value;
    if (ev.value < st.f_best) {
      st.f_best = ev.value;
      st.x_best = st.x;
    }
    if (mon) {
      MonitorSignal sig = mon->observe(st.x, ev.value, st.f_best, true, round);
      if (sig == MonitorSignal::DistReached) {
        finish(SolveStatus::DistReached);
        out.x = st.x;
        out.value = ev.value;
        return out;
      }
      if (sig == MonitorSignal::BudgetExhausted) return finish(SolveStatus::BudgetExhausted);
    }
    if (satisfied()) return finish(SolveStatus::Converged);
  }
  return finish(stop.kind == StopRule::Kind::MaxIters ? SolveStatus::Converged
                                                      : SolveStatus::BudgetExhausted);
}

SolverSchedule SolverSchedule::theorem(double eps0, double eps_target, double mu, double L_p,
                                       double p) {
  if (!(eps0 > 0.0) || !(eps_target > 0.0))
    throw std::invalid_argument("schedule: accuracies must be positive");
  if (!(mu > 0.0) || !(L_p > 0.0)) throw std::invalid_argument("schedule: mu and L must be positive");
  if (!(p > 1.0) || p > 2.0) throw std::invalid_argument("schedule: p must lie in (1, 2]");

  SolverSchedule s;
  s.eps0 = eps0;
  s.eps_target = eps_target;
  s.mu = mu;
  s.L = L_p;
  s.p = p;
  const double ratio = eps0 / eps_target;
  s.K = ratio > 1.0 ? static_cast<int>(std::ceil(2.0 * std::log(ratio))) : 0;
  const double t = std::exp(1.0) * L_p * L_p / (mu * mu * (p - 1.0));
  s.t_inner = static_cast<long>(std::ceil(t));
  s.eps_k.resize(s.K);
  s.eta_k.resize(s.K);
  for (int k = 0; k < s.K; ++k) {
    s.eps_k[k] = eps0 * std::exp(-0.5 * (k + 1));
    s.eta_k[k] = (p - 1.0) * s.eps_k[k] / (L_p * L_p);
  }
  return s;
}

SolveResult rmd(const FirstOrderOracle& f, const Signal& x0, const Geometry& geom,
                const SolverSchedule& schedule, RunMonitor* mon) {
  SolveResult out;
  out.x = x0;
  out.rounds = 0;
  Signal x = x0;
  for (int k = 0; k < schedule.K; ++k) {
    SolveResult rr = mirror_descent(f, x, geom, schedule.eta_k[k],
                                    StopRule::max_iters(schedule.t_inner), mon, k + 1);
    out.total_steps += rr.total_steps;
    out.max_round_steps = std::max(out.max_round_steps, rr.total_steps);
    out.rounds = k + 1;
    x = rr.x;
    out.x = rr.x;
    out.value = rr.value;
    if (rr.status != SolveStatus::Converged) {
      out.status = rr.status;
      return out;
    }
  }
  if (schedule.K == 0) out.value = f.value(x0);
  out.status = SolveStatus::Converged;
  return out;
}

SolveResult polyak_rmd(const FirstOrderOracle& f, double f_star, const Signal& x0,
                       const Geometry& geom, const PolyakRmdOptions& opts, RunMonitor* mon) {
  if (!(opts.eps0 > 0.0) || !(opts.eps_target > 0.0) || !(opts.L > 0.0))
    throw std::invalid_argument("polyak_rmd: eps0, eps_target and L must be positive");
  const double ratio = opts.eps0 / opts.eps_target;
  const int K = ratio > 1.0 ? static_cast<int>(std::ceil(2.0 * std::log(ratio))) : 0;

  SolveResult out;
  out.x = x0;
  Signal x = x0;
  for (int k = 1; k <= K; ++k) {
    const double eps_k = opts.eps0 * std::exp(-0.5 * k);
    const double eta_k = (geom.p - 1.0) * eps_k / (opts.L * opts.L);
    SolveResult rr = mirror_descent(f, x, geom, eta_k,
                                    StopRule::value_below(f_star + eps_k, opts.round_cap), mon, k);
    out.total_steps += rr.total_steps;
    out.max_round_steps = std::max(out.max_round_steps, rr.total_steps);
    out.rounds = k;
    x = rr.x;
    out.x = rr.x;
    out.value = rr.value;
    if (rr.status == SolveStatus::DistReached) {
      out.status = rr.status;
      return out;
    }
    if (rr.status == SolveStatus::BudgetExhausted) {
      const bool global = mon && mon->budget_spent();
      out.status = global ? SolveStatus::BudgetExhausted : SolveStatus::RoundStalled;
      if (!global) out.stalled_round = k;
      return out;
    }
  }
  if (K == 0) out.value = f.value(x0);
  out.status = SolveStatus::Converged;
  return out;
}

SolveResult adaptive_rmd(const FirstOrderOracle& f, const Signal& x0, const Geometry& geom,
                         const AdaptiveRmdOptions& opts, RunMonitor* mon,
                         AdaptiveRmdDebug* debug) {
  if (!(opts.eps0 > 0.0) || !(opts.eps_target > 0.0) || !(opts.L > 0.0))
    throw std::invalid_argument("adaptive_rmd: eps0, eps_target and L must be positive");
  if (opts.eps_target >= opts.eps0) {
    SolveResult done;
    done.x = x0;
    done.value = f.value(x0);
    done.status = SolveStatus::Converged;
    if (debug) *debug = AdaptiveRmdDebug{};
    return done;
  }
  const double ratio = opts.eps0 / opts.eps_target;
  const int K = 1 + static_cast<int>(std::ceil(std::log2(ratio)));

  struct Worker {
    double eps = 0.0;
    double eta = 0.0;
    Signal anchor;
    Signal theta;
    Signal x;
    double anchor_value = 0.0;
    Evaluation ev;
    Signal x_best;
    double f_best = 0.0;
    long restarts = 0;
    bool has_msg = false;
    Signal msg_x;
    double msg_value = 0.0;
  };

  Evaluation ev0 = f.value_and_subgrad(x0);
  long steps = 0;
  auto observed = [&](const Worker& w, int idx, int round) -> MonitorSignal {
    if (!mon) return MonitorSignal::Continue;
    // The bottom worker is the one whose output is returned; it owns the trace.
    if (idx == K - 1) return mon->observe(w.x, w.ev.value, w.f_best, true, round);
    mon->count_step();
    return mon->budget_spent() ? MonitorSignal::BudgetExhausted : MonitorSignal::Continue;
  };

  std::vector<Worker> ws(K);
  for (int i = 0; i < K; ++i) {
    Worker& w = ws[i];
    w.eps = opts.eps0 * std::pow(2.0, -(i + 1));
    w.eta = (geom.p - 1.0) * w.eps / (opts.L * opts.L);
    w.anchor = x0;
    w.theta = Signal::zeros_like(x0);
    w.x = x0;
    w.anchor_value = ev0.value;
    w.ev = ev0;
    w.x_best = x0;
    w.f_best = ev0.value;
  }
  if (mon) mon->observe(x0, ev0.value, ev0.value, false, 0);

  if (debug) {
    debug->rounds = 0;
    debug->restarts.assign(K, 0);
    debug->anchor_values.assign(K, {ev0.value});
    debug->passed_values.assign(K, {});
  }

  SolveResult out;
  out.x = x0;
  out.value = ev0.value;
  auto finish = [&](SolveStatus status) {
    const Worker& bottom = ws[K - 1];
    out.x = bottom.x_best;
    out.value = bottom.f_best;
    out.total_steps = steps;
    out.max_round_steps = steps;
    out.rounds = static_cast<int>(bottom.restarts);
    out.status = status;
    if (debug)
      for (int i = 0; i < K; ++i) debug->restarts[i] = ws[i].restarts;
    return out;
  };

  // Messages posted during round r are delivered at the start of round r+1.
  std::vector<bool> pending(K, false);
  std::vector<Signal> pending_x(K);
  std::vector<double> pending_value(K, 0.0);

  long round = 0;
  while (steps < opts.budget) {
    ++round;
    if (debug) debug->rounds = round;
    for (int i = 0; i < K; ++i) {
      if (pending[i]) {
        ws[i].has_msg = true;
        ws[i].msg_x = pending_x[i];
        ws[i].msg_value = pending_value[i];
        pending[i] = false;
      }
    }
    for (int i = 0; i < K; ++i) {
      Worker& w = ws[i];
      bool restarted = false;
      if (w.has_msg) {
        w.has_msg = false;
        if (w.msg_value <= w.anchor_value - w.eps) {
          w.anchor = w.msg_x;
          w.anchor_value = w.msg_value;
          w.theta = Signal::zeros_like(w.anchor);
          w.x = w.anchor;
          w.ev = f.value_and_subgrad(w.anchor);
          ++steps;
          if (w.ev.value < w.f_best) {
            w.f_best = w.ev.value;
            w.x_best = w.x;
          }
          MonitorSignal sig = observed(w, i, static_cast<int>(round));
          if (sig == MonitorSignal::DistReached) {
            finish(SolveStatus::DistReached);
            out.x = w.x;
            out.value = w.ev.value;
            return out;
          }
          if (sig == MonitorSignal::BudgetExhausted) return finish(SolveStatus::BudgetExhausted);
          ++w.restarts;
          restarted = true;
        }
      }
      if (!restarted) {
        w.theta -= w.eta * w.ev.subgrad;
        w.x = mirror_inverse(w.theta, w.anchor, geom);
        w.ev = f.value_and_subgrad(w.x);
        ++steps;
        if (w.ev.value < w.f_best) {
          w.f_best = w.ev.value;
          w.x_best = w.x;
        }
        MonitorSignal sig = observed(w, i, static_cast<int>(round));
        if (sig == MonitorSignal::DistReached) {
          finish(SolveStatus::DistReached);
          out.x = w.x;
          out.value = w.ev.value;
          return out;
        }
        if (sig == MonitorSignal::BudgetExhausted) return finish(SolveStatus::BudgetExhausted);
        if (w.ev.value <= w.anchor_value - w.eps) {
          w.anchor = w.x;
          w.anchor_value = w.ev.value;
          w.theta = Signal::zeros_like(w.anchor);
          ++w.restarts;
          restarted = true;
        }
      }
      if (restarted) {
        if (debug) debug->anchor_values[i].push_back(w.anchor_value);
        if (i + 1 < K) {
          pending[i + 1] = true;
          pending_x[i + 1] = w.anchor;
          pending_value[i + 1] = w.anchor_value;
          if (debug) debug->passed_values[i].push_back(w.anchor_value);
        }
        if (i == K - 1) {
          // Certified stop: once the bottom anchor has improved by
          // eps0 - eps_target its gap is at most eps_target whenever
          // f(x0) - f* <= eps0 held.
          if (w.anchor_value <= ev0.value - (opts.eps0 - opts.eps_target))
            return finish(SolveStatus::Converged);
        }
      }
    }
  }
  return finish(SolveStatus::BudgetExhausted);
}

SolveResult polyak_gd(const FirstOrderOracle& f, double f_star, const Signal& x0,
                      double eps_target, long max_steps, RunMonitor* mon) {
  if (!(eps_target >= 0.0)) throw std::invalid_argument("polyak_gd: eps_target must be nonnegative");
  SolveResult out;
  Signal x = x0;
  Evaluation ev = f.value_and_subgrad(x);
  out.x = x;
  out.value = ev.value;
  Signal x_best = x;
  double f_best = ev.value;
  long steps = 0;
  auto finish = [&](SolveStatus status) {
    out.x = x_best;
    out.value = f_best;
    out.total_steps = steps;
    out.max_round_steps = steps;
    out.rounds = 1;
    out.status = status;
    return out;
  };
  if (mon) {
    MonitorSignal sig = mon->observe(x, ev.value, f_best, false, 0);
    if (sig == MonitorSignal::DistReached) {
      finish(SolveStatus::DistReached);
      out.x = x;
      out.value = ev.value;
      return out;
    }
    if (sig == MonitorSignal::BudgetExhausted) return finish(SolveStatus::BudgetExhausted);
  }
  while (true) {
    const double gap = ev.value - f_star;
    if (gap <= eps_target) return finish(SolveStatus::Converged);
    const double gn2 = ev.subgrad.data().squaredNorm();
    if (!(gn2 > 0.0)) return finish(SolveStatus::OracleInconsistent);
    if (steps >= max_steps) return finish(SolveStatus::BudgetExhausted);
    x -= (gap / gn2) * ev.subgrad;
    if (x.kind() == SignalKind::Symmetric) x.symmetrize();
    ev = f.value_and_subgrad(x);
    ++steps;
    if (ev.value < f_best) {
      f_best = ev.value;
      x_best = x;
    }
    if (mon) {
      MonitorSignal sig = mon->observe(x, ev.value, f_best, true, 0);
      if (sig == MonitorSignal::DistReached) {
        finish(SolveStatus::DistReached);
        out.x = x;
        out.value = ev.value;
        return out;
      }
      if (sig == MonitorSignal::BudgetExhausted) return finish(SolveStatus::BudgetExhausted);
    }
  }
}

}  // namespace sharpopt
