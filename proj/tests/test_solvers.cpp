#include <cmath>
#include <memory>

#include "doctest.h"
#include "sharpopt/rng.hpp"
#include "sharpopt/solvers.hpp"

using namespace sharpopt;

namespace {

struct L1Gap final : FirstOrderOracle {
  Signal center;
  explicit L1Gap(Signal c) : center(std::move(c)) {}
  double value(const Signal& x) const override { return norm_p(x - center, 1.0); }
  Evaluation value_and_subgrad(const Signal& x) const override {
    Signal d = x - center;
    if (d.kind() == SignalKind::Vector) {
      Eigen::VectorXd g = d.data().col(0).unaryExpr(
          [](double t) { return t > 0.0 ? 1.0 : (t < 0.0 ? -1.0 : 0.0); });
      return {value(x), Signal::vector(std::move(g))};
    }
    SpectralDecomposition dec = decompose(d);
    double mx = dec.values.size() > 0 ? dec.values.array().abs().maxCoeff() : 0.0;
    Eigen::VectorXd s = dec.values.unaryExpr([mx](double t) {
      double tol = kSpectralRelTol * mx;
      return t > tol ? 1.0 : (t < -tol ? -1.0 : 0.0);
    });
    Signal g = d.kind() == SignalKind::Symmetric
                   ? Signal::symmetric(dec.U * s.asDiagonal() * dec.V.transpose())
                   : Signal::rectangular(dec.U * s.asDiagonal() * dec.V.transpose());
    return {value(x), std::move(g)};
  }
};

struct L2Gap final : FirstOrderOracle {
  double value(const Signal& x) const override { return norm_p(x, 2.0); }
  Evaluation value_and_subgrad(const Signal& x) const override {
    double v = value(x);
    if (v == 0.0) return {0.0, Signal::zeros_like(x)};
    Signal g = x;
    g *= 1.0 / v;
    return {v, std::move(g)};
  }
};

struct Constant final : FirstOrderOracle {
  double c;
  explicit Constant(double v) : c(v) {}
  double value(const Signal&) const override { return c; }
  Evaluation value_and_subgrad(const Signal& x) const override {
    return {c, Signal::zeros_like(x)};
  }
};

struct Linear final : FirstOrderOracle {
  Signal slope;
  explicit Linear(Signal s) : slope(std::move(s)) {}
  double value(const Signal& x) const override { return dual_pair(slope, x); }
  Evaluation value_and_subgrad(const Signal& x) const override {
    return {value(x), slope};
  }
};

Signal random_signal(CounterRng& rng, SignalKind kind, int n, int N) {
  switch (kind) {
    case SignalKind::Vector: return Signal::vector(normal_vector(rng, n));
    case SignalKind::Symmetric: return Signal::symmetric(normal_matrix(rng, n, n));
    case SignalKind::Rectangular: return Signal::rectangular(normal_matrix(rng, n, N));
  }
  return Signal{};
}

Eigen::MatrixXd random_orthogonal(CounterRng& rng, int n) {
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(normal_matrix(rng, n, n));
  return qr.householderQ();
}

// Dual points with component (or spectral) ratio <= 3. The q-1 power of the
// inverse map expands that ratio, and the materialized primal point carries
// only ~16 digits of dynamic range against the anchor, so wider inputs are
// not representable after mapping.
Signal conditioned_dual(CounterRng& rng, SignalKind kind, int n, int N) {
  const int r = kind == SignalKind::Rectangular ? std::min(n, N) : n;
  Eigen::VectorXd vals(r);
  for (int i = 0; i < r; ++i) {
    vals(i) = std::pow(3.0, rng.next_uniform()) / 3.0;
    if (kind != SignalKind::Rectangular && rng.next_below(2) == 0) vals(i) = -vals(i);
  }
  if (kind == SignalKind::Vector) return Signal::vector(std::move(vals));
  Eigen::MatrixXd u = random_orthogonal(rng, n);
  if (kind == SignalKind::Symmetric)
    return Signal::symmetric(u * vals.asDiagonal() * u.transpose());
  Eigen::MatrixXd v = random_orthogonal(rng, N);
  return Signal::rectangular(u.leftCols(r) * vals.asDiagonal() * v.leftCols(r).transpose());
}

}  // namespace

TEST_CASE("mirror inverse frozen values") {
  Geometry geom(1.5);
  Signal anchor = Signal::vector(Eigen::VectorXd::Zero(2));
  Eigen::VectorXd th(2);
  th << 2.0, 1.0;
  Signal x = mirror_inverse(Signal::vector(th), anchor, geom);
  CHECK(x.data()(0, 0) == doctest::Approx(1.9229994270765445).epsilon(1e-13));
  CHECK(x.data()(1, 0) == doctest::Approx(0.4807498567691361).epsilon(1e-13));

  th << 2.0, 0.0;
  Signal y = mirror_inverse(Signal::vector(th), anchor, geom);
  CHECK(y.data()(0, 0) == doctest::Approx(2.0).epsilon(1e-13));
  CHECK(y.data()(1, 0) == 0.0);

  th << -3.0, 0.5;
  Signal neg = mirror_inverse(Signal::vector(th), anchor, geom);
  CHECK(neg.data()(0, 0) < 0.0);
  CHECK(neg.data()(1, 0) > 0.0);
}

TEST_CASE("mirror maps preserve the norm pairing") {
  CounterRng rng(301, 0);
  for (double p : {1.1, 1.3, 1.5, 1.9, 2.0}) {
    Geometry geom(p);
    for (int t = 0; t < 20; ++t) {
      Signal anchor = Signal::vector(Eigen::VectorXd::Zero(8));
      Signal theta = random_signal(rng, SignalKind::Vector, 8, 0);
      Signal x = mirror_inverse(theta, anchor, geom);
      CHECK(norm_p(x - anchor, geom.p) ==
            doctest::Approx(norm_p(theta, geom.q)).epsilon(1e-10));
    }
  }
}

TEST_CASE("mirror roundtrip across kinds and exponents") {
  CounterRng rng(302, 0);
  const std::pair<SignalKind, std::pair<int, int>> kinds[] = {
      {SignalKind::Vector, {10, 0}},
      {SignalKind::Symmetric, {6, 6}},
      {SignalKind::Rectangular, {5, 7}},
  };
  for (double p : {1.08, 1.5, 2.0}) {
    Geometry geom(p);
    for (auto& [kind, dims] : kinds) {
      for (int t = 0; t < 15; ++t) {
        Signal anchor = random_signal(rng, kind, dims.first, dims.second);
        Signal theta = conditioned_dual(rng, kind, dims.first, dims.second);
        Signal x = mirror_inverse(theta, anchor, geom);
        Signal back = mirror_forward(x, anchor, geom);
        CHECK(norm_p(back - theta, 2.0) <= 1e-8 * (1.0 + norm_p(theta, 2.0)));

        Signal pt = random_signal(rng, kind, dims.first, dims.second);
        Signal fwd = mirror_forward(pt, anchor, geom);
        Signal again = mirror_inverse(fwd, anchor, geom);
        CHECK(norm_p(again - pt, 2.0) <= 1e-8 * (1.0 + norm_p(pt, 2.0)));
      }
    }
  }
}

TEST_CASE("euclidean geometry reduces to plain translation") {
  CounterRng rng(303, 0);
  Geometry geom(2.0);
  Signal anchor = random_signal(rng, SignalKind::Vector, 6, 0);
  Signal theta = random_signal(rng, SignalKind::Vector, 6, 0);
  Signal x = mirror_inverse(theta, anchor, geom);
  CHECK(norm_p(x - (anchor + theta), 2.0) <= 1e-12);
  Signal back = mirror_forward(x, anchor, geom);
  CHECK(norm_p(back - theta, 2.0) <= 1e-12);
}

TEST_CASE("zero dual point maps to the anchor") {
  CounterRng rng(304, 0);
  for (double p : {1.2, 1.7}) {
    Geometry geom(p);
    Signal anchor = random_signal(rng, SignalKind::Symmetric, 5, 5);
    Signal zero = Signal::zeros_like(anchor);
    Signal x = mirror_inverse(zero, anchor, geom);
    CHECK(norm_p(x - anchor, 2.0) <= 1e-14);
    Signal fwd = mirror_forward(anchor, anchor, geom);
    CHECK(norm_p(fwd, 2.0) <= 1e-14);
  }
}

TEST_CASE("stop rule factories validate") {
  CHECK(StopRule::max_iters(5).cap == 5);
  CHECK(StopRule::value_below(1.0, 10).kind == StopRule::Kind::ValueBelow);
  CHECK(StopRule::improvement(0.5, 10).kind == StopRule::Kind::Improvement);
  CHECK_THROWS_AS(StopRule::max_iters(-1), std::invalid_argument);
  CHECK_THROWS_AS(StopRule::value_below(1.0, -2), std::invalid_argument);
  CHECK_THROWS_AS(StopRule::improvement(-0.5, 10), std::invalid_argument);
}

TEST_CASE("mirror descent with zero iterations returns the anchor") {
  CounterRng rng(305, 0);
  Signal c = random_signal(rng, SignalKind::Vector, 6, 0);
  L1Gap f{c};
  Signal x0 = random_signal(rng, SignalKind::Vector, 6, 0);
  SolveResult res = mirror_descent(f, x0, Geometry(1.5), 0.1, StopRule::max_iters(0));
  CHECK(res.total_steps == 0);
  CHECK(res.value == doctest::Approx(f.value(x0)));
  CHECK(norm_p(res.x - x0, 2.0) == 0.0);
}

TEST_CASE("one euclidean step on a linear objective") {
  Signal slope = Signal::vector((Eigen::VectorXd(3) << 1.0, -2.0, 0.5).finished());
  Linear f{slope};
  Signal x0 = Signal::vector(Eigen::VectorXd::Ones(3));
  const double eta = 0.25;
  SolveResult res = mirror_descent(f, x0, Geometry(2.0), eta, StopRule::max_iters(1));
  Signal want = x0 + (-eta) * slope;
  CHECK(res.total_steps == 1);
  CHECK(norm_p(res.x - want, 2.0) <= 1e-12);
  CHECK(res.value == doctest::Approx(f.value(want)));
}

TEST_CASE("mirror descent value below rule stops early") {
  CounterRng rng(306, 0);
  Signal c = random_signal(rng, SignalKind::Vector, 10, 0);
  L1Gap f{c};
  Signal x0 = Signal::zeros_like(c);
  Geometry geom = Geometry::for_dim(10);
  const double L = std::exp(1.0);
  const double eps = 0.5 * f.value(x0);
  const double eta = (geom.p - 1.0) * eps / (L * L);
  SolveResult res = mirror_descent(f, x0, geom, eta, StopRule::value_below(eps, 100000));
  CHECK(res.status == SolveStatus::Converged);
  CHECK(res.value <= eps);
  CHECK(res.total_steps < 100000);
}

TEST_CASE("schedule invariants") {
  SolverSchedule s = SolverSchedule::theorem(1.0, 1e-3, 0.5, 2.0, 1.5);
  CHECK(s.K == int(std::ceil(2.0 * std::log(1.0 / 1e-3))));
  CHECK(s.t_inner == long(std::ceil(std::exp(1.0) * 4.0 / (0.25 * 0.5))));
  REQUIRE(int(s.eps_k.size()) == s.K);
  for (int k = 0; k < s.K; ++k) {
    CHECK(s.eps_k[k] == doctest::Approx(std::exp(-(k + 1) / 2.0)).epsilon(1e-12));
    CHECK(s.eta_k[k] == doctest::Approx(0.5 * s.eps_k[k] / 4.0).epsilon(1e-12));
  }
  for (int k = 1; k < s.K; ++k) CHECK(s.eps_k[k] < s.eps_k[k - 1]);

  CHECK(SolverSchedule::theorem(1.0, 2.0, 1.0, 1.0, 1.5).K == 0);
  CHECK_THROWS_AS(SolverSchedule::theorem(0.0, 1e-3, 1.0, 1.0, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(SolverSchedule::theorem(1.0, 0.0, 1.0, 1.0, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(SolverSchedule::theorem(1.0, 1e-3, 0.0, 1.0, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(SolverSchedule::theorem(1.0, 1e-3, 1.0, 0.0, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(SolverSchedule::theorem(1.0, 1e-3, 1.0, 1.0, 2.5), std::invalid_argument);
  CHECK_THROWS_AS(SolverSchedule::theorem(1.0, 1e-3, 1.0, 1.0, 1.0), std::invalid_argument);
}

TEST_CASE("rmd drives the synthetic gap below target") {
  const int n = 20;
  CounterRng rng(307, 0);
  Eigen::VectorXd c = normal_vector(rng, n);
  c /= c.lpNorm<1>();
  L1Gap f{Signal::vector(c)};
  Signal x0 = Signal::zeros_like(f.center);
  Geometry geom = Geometry::for_dim(n);
  const double L = std::exp(1.0);
  const double eps0 = f.value(x0);
  const double eps = 1e-4;
  SolverSchedule sched = SolverSchedule::theorem(eps0, eps, 1.0, L, geom.p);
  RunMonitor mon;
  SolveResult res = rmd(f, x0, geom, sched, &mon);
  CHECK(res.value <= eps * (1.0 + 1e-9));
  CHECK(res.rounds == sched.K);
  CHECK(res.total_steps <= long(sched.K) * sched.t_inner);
  CHECK(mon.total_steps() == res.total_steps);

  SolverSchedule empty = SolverSchedule::theorem(1.0, 2.0, 1.0, 1.0, geom.p);
  SolveResult none = rmd(f, x0, geom, empty);
  CHECK(none.total_steps == 0);
  CHECK(none.value == doctest::Approx(f.value(x0)));
}

TEST_CASE("per-round gap contraction matches the schedule") {
  const int n = 50;
  CounterRng rng(308, 0);
  Eigen::VectorXd c = normal_vector(rng, n);
  c /= c.lpNorm<1>();
  L1Gap f{Signal::vector(c)};
  Signal x0 = Signal::zeros_like(f.center);
  Geometry geom = Geometry::for_dim(n);
  const double eps0 = f.value(x0);
  SolverSchedule sched = SolverSchedule::theorem(eps0, eps0 * 1e-3, 1.0, std::exp(1.0), geom.p);

  Signal anchor = x0;
  double anchor_value = f.value(x0);
  for (int k = 0; k < sched.K; ++k) {
    SolveResult round = mirror_descent(f, anchor, geom, sched.eta_k[size_t(k)],
                                       StopRule::max_iters(sched.t_inner));
    CHECK(round.value <= sched.eps_k[size_t(k)] * (1.0 + 1e-9));
    CHECK(round.value <= anchor_value + 1e-12);
    anchor = round.x;
    anchor_value = round.value;
  }
}

TEST_CASE("polyak rmd stops instantly at the optimum") {
  CounterRng rng(309, 0);
  Signal c = random_signal(rng, SignalKind::Vector, 8, 0);
  L1Gap f{c};
  PolyakRmdOptions opts;
  opts.eps0 = 1.0;
  opts.eps_target = 1e-6;
  opts.L = std::exp(1.0);
  SolveResult res = polyak_rmd(f, 0.0, c, Geometry(1.5), opts);
  CHECK(res.status == SolveStatus::Converged);
  CHECK(res.total_steps == 0);
  CHECK(res.value == 0.0);
}

TEST_CASE("polyak rmd converges and reports round structure") {
  const int n = 30;
  CounterRng rng(310, 0);
  Eigen::VectorXd c = normal_vector(rng, n);
  c /= c.lpNorm<1>();
  L1Gap f{Signal::vector(c)};
  Signal x0 = Signal::zeros_like(f.center);
  Geometry geom = Geometry::for_dim(n);
  PolyakRmdOptions opts;
  opts.eps0 = f.value(x0);
  opts.eps_target = 1e-7;
  opts.L = std::exp(1.0);
  RunMonitor mon;
  SolveResult res = polyak_rmd(f, 0.0, x0, geom, opts, &mon);
  CHECK(res.status == SolveStatus::Converged);
  CHECK(res.value <= 1e-7 * (1.0 + 1e-9));
  CHECK(res.rounds == int(std::ceil(2.0 * std::log(opts.eps0 / opts.eps_target))));
  CHECK(res.max_round_steps <= res.total_steps);
  CHECK(res.stalled_round == -1);

  const auto& rows = mon.trace().rows();
  REQUIRE(!rows.empty());
  for (std::size_t i = 1; i < rows.size(); ++i)
    CHECK(rows[i].best_value <= rows[i - 1].best_value + 1e-15);
}

TEST_CASE("polyak rmd reports a stalled round") {
  CounterRng rng(311, 0);
  Eigen::VectorXd c = normal_vector(rng, 12);
  L1Gap f{Signal::vector(c)};
  Signal x0 = Signal::zeros_like(f.center);
  PolyakRmdOptions opts;
  opts.eps0 = f.value(x0);
  opts.eps_target = opts.eps0 * 1e-6;
  opts.L = std::exp(1.0);
  opts.round_cap = 2;
  SolveResult res = polyak_rmd(f, 0.0, x0, Geometry::for_dim(12), opts);
  CHECK(res.status == SolveStatus::RoundStalled);
  CHECK(res.stalled_round >= 0);
}

TEST_CASE("polyak rmd respects the global budget") {
  CounterRng rng(312, 0);
  Eigen::VectorXd c = normal_vector(rng, 12);
  L1Gap f{Signal::vector(c)};
  Signal x0 = Signal::zeros_like(f.center);
  PolyakRmdOptions opts;
  opts.eps0 = f.value(x0);
  opts.eps_target = opts.eps0 * 1e-8;
  opts.L = std::exp(1.0);
  RunMonitor mon;
  mon.set_budget(25);
  SolveResult res = polyak_rmd(f, 0.0, x0, Geometry::for_dim(12), opts, &mon);
  CHECK(res.status == SolveStatus::BudgetExhausted);
  CHECK(res.total_steps <= 25);
}

TEST_CASE("adaptive rmd ladder bottoms out at half the target") {
  CounterRng rng(313, 0);
  Eigen::VectorXd c = normal_vector(rng, 16);
  c /= c.lpNorm<1>();
  L1Gap f{Signal::vector(c)};
  Signal x0 = Signal::zeros_like(f.center);
  AdaptiveRmdOptions opts;
  opts.eps0 = f.value(x0);
  opts.eps_target = opts.eps0 / 3.0;
  opts.L = std::exp(1.0);
  AdaptiveRmdDebug dbg;
  adaptive_rmd(f, x0, Geometry::for_dim(16), opts, nullptr, &dbg);
  const int K = 1 + int(std::ceil(std::log2(3.0)));
  CHECK(int(dbg.anchor_values.size()) == K);
  CHECK(opts.eps0 * std::pow(2.0, -K) <= opts.eps_target / 2.0 + 1e-15);
}

TEST_CASE("adaptive rmd reaches the target gap") {
  const int n = 24;
  CounterRng rng(314, 0);
  Eigen::VectorXd c = normal_vector(rng, n);
  c /= c.lpNorm<1>();
  L1Gap f{Signal::vector(c)};
  Signal x0 = Signal::zeros_like(f.center);
  AdaptiveRmdOptions opts;
  opts.eps0 = f.value(x0);
  opts.eps_target = opts.eps0 * 1e-3;
  opts.L = std::exp(1.0);
  RunMonitor mon;
  AdaptiveRmdDebug dbg;
  SolveResult res = adaptive_rmd(f, x0, Geometry::for_dim(n), opts, &mon, &dbg);
  CHECK(res.value <= opts.eps_target * (1.0 + 1e-9));
  CHECK(res.status == SolveStatus::Converged);

  for (std::size_t w = 0; w < dbg.anchor_values.size(); ++w) {
    const double eps_w = opts.eps0 * std::pow(2.0, -(double(w) + 1.0));
    const auto& vals = dbg.anchor_values[w];
    for (std::size_t j = 1; j < vals.size(); ++j)
      CHECK(vals[j] <= vals[j - 1] - eps_w + 1e-9);
  }
  for (std::size_t w = 0; w + 1 < dbg.anchor_values.size(); ++w)
    for (double posted : dbg.passed_values[w])
      CHECK(posted <= dbg.anchor_values[w].front());
}

TEST_CASE("adaptive rmd validates its options") {
  CounterRng rng(315, 0);
  L1Gap f{Signal::vector(normal_vector(rng, 4))};
  Signal x0 = Signal::zeros_like(f.center);
  AdaptiveRmdOptions opts;
  opts.eps0 = 1.0;
  opts.eps_target = 2.0;
  SolveResult res = adaptive_rmd(f, x0, Geometry(1.5), opts);
  CHECK(res.status == SolveStatus::Converged);
  CHECK(res.total_steps == 0);
  CHECK(res.value == doctest::Approx(f.value(x0)));
  opts.eps_target = 0.0;
  CHECK_THROWS_AS(adaptive_rmd(f, x0, Geometry(1.5), opts), std::invalid_argument);
}

TEST_CASE("polyak gd solves the norm objective in one step") {
  Signal x0 = Signal::vector((Eigen::VectorXd(3) << 3.0, -4.0, 0.0).finished());
  L2Gap f;
  SolveResult res = polyak_gd(f, 0.0, x0, 1e-12, 100);
  CHECK(res.status == SolveStatus::Converged);
  CHECK(res.total_steps == 1);
  CHECK(res.value <= 1e-12);
}

TEST_CASE("polyak gd flags an inconsistent oracle") {
  Signal x0 = Signal::vector(Eigen::VectorXd::Ones(3));
  Constant f{1.0};
  SolveResult res = polyak_gd(f, 0.0, x0, 1e-9, 100);
  CHECK(res.status == SolveStatus::OracleInconsistent);
}

TEST_CASE("polyak gd iteration count grows with dimension on l1 objectives") {
  long prev = 0;
  for (int n : {4, 16, 64}) {
    CounterRng rng(316, std::uint64_t(n));
    Eigen::VectorXd c = normal_vector(rng, n);
    c /= c.lpNorm<1>();
    L1Gap f{Signal::vector(c)};
    Signal x0 = Signal::zeros_like(f.center);
    SolveResult res = polyak_gd(f, 0.0, x0, 1e-6, 2'000'000);
    CHECK(res.status == SolveStatus::Converged);
    CHECK(res.total_steps > prev);
    prev = res.total_steps;
  }
}

TEST_CASE("monitor dist stop returns the triggering iterate") {
  const int n = 16;
  CounterRng rng(317, 0);
  Eigen::VectorXd c = normal_vector(rng, n);
  c /= c.lpNorm<1>();
  L1Gap f{Signal::vector(c)};
  Signal x0 = Signal::zeros_like(f.center);
  Geometry geom = Geometry::for_dim(n);
  PolyakRmdOptions opts;
  opts.eps0 = f.value(x0);
  opts.eps_target = opts.eps0 * 1e-9;
  opts.L = std::exp(1.0);
  RunMonitor mon;
  mon.set_truth(f.center, 1e-3);
  SolveResult res = polyak_rmd(f, 0.0, x0, geom, opts, &mon);
  CHECK(res.status == SolveStatus::DistReached);
  CHECK(mon.dist_reached());
  CHECK(mon.steps_to_dist() >= 0);
  CHECK(norm_p(res.x - f.center, 1.0) <= 1e-3);
}
