#pragma once

#include <cstdint>
#include <string>

#include "sharpopt/signal.hpp"

namespace sharpopt {

enum class SensingModel {
  SparseVector,        // rows a_i^T acting on R^n
  MatrixDense,         // dense frames <A_i, X> on R^{n x N}
  MatrixBilinear,      // a_i^T X b_i on R^{n x N}
  CovarianceRankOne,   // a_i^T X a_i on S^n
  CovarianceDifference // a_i^T X a_i - b_i^T X b_i on S^n
};

/// Variance convention for the Gaussian atoms. EllTwo draws entries with
/// variance 1/m, EllOne with 1/m^2; the distinction only applies to
/// SparseVector and MatrixDense. The bilinear and covariance models always
/// use their fixed conventions (1/m per entry; 1/(2m) for the difference
/// model) and pair with l1 measurement norms.
enum class Scaling { EllTwo, EllOne };

struct RipEstimate {
  int k_prime = 0;
  int trials = 0;
  double lower = 0.0;
  double upper = 0.0;
};

/// Gaussian measurement operator with dense, deterministically regenerable
/// atoms. Atom i is drawn from substream i of the operator seed, so equal
/// (model, dims, m, scaling, seed) rebuild bit-identical operators.
class SensingOperator {
 public:
  static SensingOperator build(SensingModel model, int n, int N, int m, Scaling scaling,
                               std::uint64_t seed);
  /// Wraps explicitly supplied atoms (tests, dense deserialization).
  static SensingOperator from_dense(SensingModel model, int n, int N, Scaling scaling,
                                    std::uint64_t seed, Eigen::MatrixXd a, Eigen::MatrixXd b);

  Eigen::VectorXd apply(const Signal& x) const;
  Signal adjoint(const Eigen::VectorXd& w) const;
  /// A*(e_i), materialized.
  Signal adjoint_atom(int i) const;

  SensingModel model() const { return model_; }
  int n() const { return n_; }
  int N() const { return N_; }
  int m() const { return m_; }
  Scaling scaling() const { return scaling_; }
  std::uint64_t seed() const { return seed_; }
  SignalKind domain_kind() const;
  Signal zero_domain() const;
  /// Measurement-space norm used for RIP ratios: l2 only for the EllTwo
  /// scaling of the SparseVector/MatrixDense models, l1 otherwise.
  bool ell_one_measurements() const;
  double measurement_norm(const Eigen::VectorXd& w) const;

  const Eigen::MatrixXd& atoms_a() const { return A_; }
  const Eigen::MatrixXd& atoms_b() const { return B_; }

  /// Binary container. with_atoms=false writes the header only; load
  /// regenerates the payload from the seed. with_atoms=true writes the dense
  /// atoms for cross-implementation comparisons.
  void save(const std::string& path, bool with_atoms) const;
  static SensingOperator load(const std::string& path);

 private:
  SensingOperator() = default;

  SensingModel model_ = SensingModel::SparseVector;
  int n_ = 0, N_ = 0, m_ = 0;
  Scaling scaling_ = Scaling::EllTwo;
  std::uint64_t seed_ = 0;
  Eigen::MatrixXd A_;  // SparseVector: m x n; MatrixDense: m x n*N (vec rows); else m x n
  Eigen::MatrixXd B_;  // MatrixBilinear: m x N; CovarianceDifference: m x n
};

/// Samples unit-Frobenius directions of support (vectors) or rank (matrices)
/// at most k_prime and returns the min/max of ||A(x)||_W over the trials,
/// one substream per trial.
RipEstimate estimate_rip(const SensingOperator& op, int k_prime, int trials, std::uint64_t seed);

}  // namespace sharpopt
