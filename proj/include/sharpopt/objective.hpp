#pragma once

#include <cstdint>
#include <memory>

#include "sharpopt/sensing.hpp"
#include "sharpopt/signal.hpp"

namespace sharpopt {

enum class BaseRegularizer { L1Norm, NuclearNorm, Trace };
enum class ConeConstraint { None, PsdCone };
enum class ResidualNorm { EllOne, EllTwo };

enum class Task { SparseRecovery, MatrixSensing, PhaseRetrieval, CovarianceI, CovarianceII };

struct Evaluation {
  double value = 0.0;
  Signal subgrad;
};

/// Value plus one subgradient, computed together so shared work (residuals,
/// spectral factorizations) is done once per point.
class FirstOrderOracle {
 public:
  virtual ~FirstOrderOracle() = default;
  virtual double value(const Signal& x) const = 0;
  virtual Evaluation value_and_subgrad(const Signal& x) const = 0;
};

/// Sum of negative eigenvalue magnitudes: the nuclear-norm distance from x
/// to the PSD cone.
double dist_psd(const Signal& x);

/// f(x) = base(x) + r * ||A(x) - b||_w + ell * dist_psd(x).
class PenaltyObjective : public FirstOrderOracle {
 public:
  PenaltyObjective(BaseRegularizer base, std::shared_ptr<const SensingOperator> op,
                   Eigen::VectorXd b, double r, double ell, ConeConstraint cone,
                   ResidualNorm w_norm);

  double value(const Signal& x) const override;
  Evaluation value_and_subgrad(const Signal& x) const override;
  double base_value(const Signal& x) const;

  BaseRegularizer base() const { return base_; }
  const SensingOperator& op() const { return *op_; }
  std::shared_ptr<const SensingOperator> op_ptr() const { return op_; }
  const Eigen::VectorXd& b() const { return b_; }
  double r() const { return r_; }
  double ell() const { return ell_; }
  ConeConstraint cone() const { return cone_; }
  ResidualNorm w_norm() const { return w_norm_; }

 private:
  BaseRegularizer base_;
  std::shared_ptr<const SensingOperator> op_;
  Eigen::VectorXd b_;
  double r_;
  double ell_;
  ConeConstraint cone_;
  ResidualNorm w_norm_;
};

/// Penalty parameters for each recovery task: l1 / nuclear base with
/// r = 3 sqrt(k) and an l2 residual for sparse and matrix sensing; trace
/// base, l1 residual and PSD penalty ell = 2 with r = 3 (phase retrieval)
/// or r = 3 sqrt(k) (covariance models).
PenaltyObjective build_default(Task task, std::shared_ptr<const SensingOperator> op,
                               Eigen::VectorXd b, int k);

/// max(f, f_star + 3 r ||delta||): restores sharpness under dense noise.
/// Below or at the threshold the subgradient is the zero signal.
class ThresholdedObjective : public FirstOrderOracle {
 public:
  ThresholdedObjective(std::shared_ptr<const FirstOrderOracle> inner, double threshold);
  double value(const Signal& x) const override;
  Evaluation value_and_subgrad(const Signal& x) const override;
  double threshold() const { return threshold_; }

 private:
  std::shared_ptr<const FirstOrderOracle> inner_;
  double threshold_;
};

ThresholdedObjective thresholded(std::shared_ptr<const PenaltyObjective> obj, double f_star,
                                 double noise_norm);

struct SharpnessOptions {
  int trials = 200;
  int radii = 8;
  double radius_min_frac = 1e-4;
  double radius_max_frac = 1.0;
  /// Support/rank budget for the structured directions; 0 infers twice the
  /// support (or rank) of x_sharp.
  int structured_budget = 0;
};

/// min over sampled directions and radii of
/// [f(x + t d) - f(x)] / (t ||d||_1). Directions: 40% dense Gaussian, 40%
/// sparse/low-rank, 20% signed coordinate or eigenvector directions; radii
/// log-spaced over [radius_min_frac, radius_max_frac] * ||x_sharp||_1.
/// Throws if a sampled point beats x_sharp (sharpness undefined there).
double estimate_sharpness(const FirstOrderOracle& f, const Signal& x_sharp,
                          const SharpnessOptions& opts, std::uint64_t seed);

struct LipschitzOptions {
  int trials = 100;
  int rip_trials = 100;
};

/// max of sampled ratios |f(x) - f(y)| / ||x - y||_1 near the center and the
/// analytic bound 1 + r * rip_1^+ + ell.
double estimate_lipschitz(const PenaltyObjective& obj, const Signal& center,
                          const LipschitzOptions& opts, std::uint64_t seed);

struct ConditioningEstimate {
  double mu_hat = 0.0;
  double L_hat = 0.0;
  double r = 0.0;
  double ell = 0.0;
  double kappa_hat = 0.0;

  /// Enforces mu_hat <= L_hat and kappa_hat = L_hat / mu_hat.
  static ConditioningEstimate make(double mu_hat, double L_hat, double r, double ell);
};

ConditioningEstimate estimate_conditioning(const PenaltyObjective& obj, const Signal& x_sharp,
                                           const SharpnessOptions& sharp_opts,
                                           const LipschitzOptions& lip_opts, std::uint64_t seed);

}  // namespace sharpopt
