#include "sharpopt/trace.hpp"

#include <cmath>

namespace sharpopt {

ConvergenceTrace::ConvergenceTrace(std::size_t capacity) : capacity_(std::max<std::size_t>(capacity, 16)) {}

bool ConvergenceTrace::would_keep(long iter, bool restart) const {
  return restart || iter % stride_ == 0;
}

void ConvergenceTrace::add(const TraceRow& row) {
  if (!would_keep(row.iter, row.restart)) return;
  rows_.push_back(row);
  if (rows_.size() > capacity_) {
    stride_ *= 2;
    std::vector<TraceRow> kept;
    kept.reserve(rows_.size() / 2 + 8);
    for (const TraceRow& r : rows_)
      if (r.restart || r.iter % stride_ == 0) kept.push_back(r);
    rows_.swap(kept);
  }
}

void ConvergenceTrace::write_csv(std::ostream& os, const std::string& provenance_line) const {
  if (!provenance_line.empty()) os << provenance_line << "\n";
  os << "iter,round,value,best_value,dist_to_truth,elapsed_s,restart\n";
  char buf[64];
  for (const TraceRow& r : rows_) {
    os << r.iter << ',' << r.round << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", r.value);
    os << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", r.best_value);
    os << buf << ',';
    if (std::isnan(r.dist_to_truth)) {
      os << ',';
    } else {
      std::snprintf(buf, sizeof(buf), "%.17g", r.dist_to_truth);
      os << buf << ',';
    }
    std::snprintf(buf, sizeof(buf), "%.6f", r.elapsed_s);
    os << buf << ',' << (r.restart ? 1 : 0) << "\n";
  }
}

RunMonitor::RunMonitor() : start_(std::chrono::steady_clock::now()) {}

void RunMonitor::set_truth(Signal truth, double dist_tol) {
  truth_ = std::move(truth);
  dist_tol_ = dist_tol;
}

double RunMonitor::exact_dist(const Signal& x) const { return norm_p(x - *truth_, 1.0); }

double RunMonitor::final_dist(const Signal& x) const {
  if (!truth_) return std::numeric_limits<double>::quiet_NaN();
  return exact_dist(x);
}

MonitorSignal RunMonitor::observe(const Signal& x, double value, double best_value,
                                  bool counts_step, int round) {
  if (counts_step) ++steps_;
  bool restart = round != last_round_;
  last_round_ = round;

  bool within_tol = false;
  if (truth_ && dist_tol_ >= 0.0 && steps_to_dist_ < 0) {
    // Frobenius lower-bounds the nuclear distance, so the cheap check can
    // rule out the expensive one for matrix iterates.
    double fro = (x.data() - truth_->data()).norm();
    if (fro <= dist_tol_ && exact_dist(x) <= dist_tol_) {
      steps_to_dist_ = steps_;
      within_tol = true;
    }
  }

  if (trace_.would_keep(steps_, restart)) {
    TraceRow row;
    row.iter = steps_;
    row.round = round;
    row.value = value;
    row.best_value = best_value;
    if (truth_) row.dist_to_truth = exact_dist(x);
    row.elapsed_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
    row.restart = restart;
    trace_.add(row);
  }

  if (within_tol) return MonitorSignal::DistReached;
  if (steps_ >= budget_) return MonitorSignal::BudgetExhausted;
  return MonitorSignal::Continue;
}

MonitorSignal RunMonitor::count_step() {
  ++steps_;
  return steps_ >= budget_ ? MonitorSignal::BudgetExhausted : MonitorSignal::Continue;
}

}  // namespace sharpopt
