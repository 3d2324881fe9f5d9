#pragma once

#include <Eigen/Dense>
#include <functional>
#include <limits>

namespace sharpopt {

enum class SignalKind { Vector, Symmetric, Rectangular };

/// Relative cutoff for treating singular/eigenvalues as zero.
inline constexpr double kSpectralRelTol = 1e-12;

/// Dense element of R^n, S^n or R^{n x N}. Symmetric data is symmetrized on
/// construction. Rectangular data is stored with rows() <= cols(); inputs in
/// the other orientation are transposed and the flip recorded.
class Signal {
 public:
  Signal() = default;

  static Signal vector(Eigen::VectorXd v);
  static Signal symmetric(const Eigen::MatrixXd& m);
  static Signal rectangular(Eigen::MatrixXd m);
  static Signal zeros(SignalKind kind, Eigen::Index n, Eigen::Index N = 0);
  static Signal zeros_like(const Signal& s);

  SignalKind kind() const { return kind_; }
  Eigen::Index rows() const { return data_.rows(); }
  Eigen::Index cols() const { return data_.cols(); }
  /// Length of the spectrum (entries for vectors, min dimension for matrices).
  Eigen::Index spectral_dim() const { return data_.rows(); }
  bool flipped() const { return flipped_; }

  const Eigen::MatrixXd& data() const { return data_; }
  Eigen::MatrixXd& data() { return data_; }

  /// Restores exact symmetry after elementwise updates on a Symmetric signal.
  void symmetrize();

  Signal& operator+=(const Signal& o);
  Signal& operator-=(const Signal& o);
  Signal& operator*=(double s);

  friend Signal operator+(Signal a, const Signal& b) { return a += b; }
  friend Signal operator-(Signal a, const Signal& b) { return a -= b; }
  friend Signal operator*(double s, Signal a) { return a *= s; }

 private:
  SignalKind kind_ = SignalKind::Vector;
  Eigen::MatrixXd data_;
  bool flipped_ = false;
};

/// Mirror-map exponent pair: p in (1, 2], q = p/(p-1).
struct Geometry {
  double p;
  double q;

  explicit Geometry(double p_in);

  /// p = 1 + 1/log(d), clamped to (1, 2]. This is the "auto" choice.
  static Geometry for_dim(Eigen::Index d);
};

struct SpectralDecomposition {
  Eigen::MatrixXd U;
  Eigen::VectorXd values;  // singular values descending; signed eigenvalues for Symmetric
  Eigen::MatrixXd V;
};

/// Thin SVD for Rectangular, eigendecomposition (descending) for Symmetric.
/// Vectors have no decomposition; callers use elementwise paths instead.
SpectralDecomposition decompose(const Signal& x);

/// U * diag(vals) * V^T assembled back into a Signal of the given kind.
Signal recompose(const SpectralDecomposition& dec, const Eigen::VectorXd& vals, SignalKind kind);

/// lp norm of entries (Vector) or of the singular value vector (matrix
/// kinds). p in [1, inf]; pass std::numeric_limits<double>::infinity() for
/// the max norm.
double norm_p(const Signal& x, double p);

/// Euclidean pairing: dot product or trace inner product.
double dual_pair(const Signal& g, const Signal& x);

/// Applies phi to the spectrum. Vectors and Symmetric matrices use the odd
/// extension t -> sign(t) * phi(|t|); Rectangular applies phi to singular
/// values directly.
Signal spectral_function(const Signal& x, const std::function<double(double)>& phi);

}  // namespace sharpopt
