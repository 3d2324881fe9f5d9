#pragma once

#include <chrono>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "sharpopt/signal.hpp"

namespace sharpopt {

struct TraceRow {
  long iter = 0;
  int round = 0;
  double value = 0.0;
  double best_value = 0.0;
  double dist_to_truth = std::numeric_limits<double>::quiet_NaN();
  double elapsed_s = 0.0;
  bool restart = false;
};

/// Bounded in-memory trace. When the capacity is exceeded the stride doubles
/// and every other plain row is dropped; restart rows and row zero survive,
/// so the kept set depends only on the observed iteration sequence.
class ConvergenceTrace {
 public:
  explicit ConvergenceTrace(std::size_t capacity = 4096);

  bool would_keep(long iter, bool restart) const;
  void add(const TraceRow& row);
  const std::vector<TraceRow>& rows() const { return rows_; }

  /// CSV with columns iter,round,value,best_value,dist_to_truth,elapsed_s,restart.
  void write_csv(std::ostream& os, const std::string& provenance_line) const;

 private:
  std::size_t capacity_;
  long stride_ = 1;
  std::vector<TraceRow> rows_;
};

enum class MonitorSignal { Continue, DistReached, BudgetExhausted };

/// Shared bookkeeping threaded through every solver: step counting against a
/// global budget, distance-to-truth stopping, and trace recording.
class RunMonitor {
 public:
  RunMonitor();

  void set_truth(Signal truth, double dist_tol);
  void set_budget(long max_steps) { budget_ = max_steps; }

  ConvergenceTrace& trace() { return trace_; }
  const ConvergenceTrace& trace() const { return trace_; }

  /// Called once per oracle evaluation. counts_step is false for anchor
  /// re-evaluations (iteration zero of a round).
  MonitorSignal observe(const Signal& x, double value, double best_value, bool counts_step,
                        int round);
  /// Budget-only bump for side evaluations that carry no recordable iterate.
  MonitorSignal count_step();

  long total_steps() const { return steps_; }
  bool budget_spent() const { return steps_ >= budget_; }
  long steps_to_dist() const { return steps_to_dist_; }
  bool dist_reached() const { return steps_to_dist_ >= 0; }
  double final_dist(const Signal& x) const;

 private:
  double exact_dist(const Signal& x) const;

  std::optional<Signal> truth_;
  double dist_tol_ = -1.0;
  long budget_ = std::numeric_limits<long>::max();
  long steps_ = 0;
  long steps_to_dist_ = -1;
  int last_round_ = -1;
  ConvergenceTrace trace_;
  std::chrono::steady_clock::time_point start_;
};

}  // namespace sharpopt
