#include "sharpopt/signal.hpp"

#include <cmath>
#include <stdexcept>

namespace sharpopt {

namespace {

void require_same_shape(const Signal& a, const Signal& b) {
  if (a.kind() != b.kind() || a.rows() != b.rows() || a.cols() != b.cols())
    throw std::invalid_argument("signal shapes do not match");
}

/// Overflow-safe lp norm of a nonnegative array.
double lp_of(const Eigen::ArrayXd& a, double p) {
  if (p < 1.0) throw std::invalid_argument("norm_p: p must be >= 1");
  if (a.size() == 0) return 0.0;
  if (std::isinf(p)) return a.maxCoeff();
  if (p == 1.0) return a.sum();
  if (p == 2.0) return std::sqrt((a * a).sum());
  double mx = a.maxCoeff();
  if (mx == 0.0) return 0.0;
  return mx * std::pow(((a / mx).pow(p)).sum(), 1.0 / p);
}

}  // namespace

Signal Signal::vector(Eigen::VectorXd v) {
  Signal s;
  s.kind_ = SignalKind::Vector;
  s.data_ = std::move(v);
  return s;
}

Signal Signal::symmetric(const Eigen::MatrixXd& m) {
  if (m.rows() != m.cols()) throw std::invalid_argument("symmetric signal must be square");
  Signal s;
  s.kind_ = SignalKind::Symmetric;
  s.data_ = 0.5 * (m + m.transpose());
  return s;
}

Signal Signal::rectangular(Eigen::MatrixXd m) {
  Signal s;
  s.kind_ = SignalKind::Rectangular;
  if (m.rows() > m.cols()) {
    s.data_ = m.transpose();
    s.flipped_ = true;
  } else {
    s.data_ = std::move(m);
  }
  return s;
}

Signal Signal::zeros(SignalKind kind, Eigen::Index n, Eigen::Index N) {
  switch (kind) {
    case SignalKind::Vector:
      return vector(Eigen::VectorXd::Zero(n));
    case SignalKind::Symmetric:
      return symmetric(Eigen::MatrixXd::Zero(n, n));
    case SignalKind::Rectangular:
      return rectangular(Eigen::MatrixXd::Zero(n, N > 0 ? N : n));
  }
  throw std::logic_error("unreachable");
}

Signal Signal::zeros_like(const Signal& s) { return zeros(s.kind(), s.rows(), s.cols()); }

void Signal::symmetrize() {
  if (kind_ == SignalKind::Symmetric) data_ = (0.5 * (data_ + data_.transpose())).eval();
}

Signal& Signal::operator+=(const Signal& o) {
  require_same_shape(*this, o);
  data_ += o.data_;
  return *this;
}

Signal& Signal::operator-=(const Signal& o) {
  require_same_shape(*this, o);
  data_ -= o.data_;
  return *this;
}

Signal& Signal::operator*=(double s) {
  data_ *= s;
  return *this;
}

Geometry::Geometry(double p_in) : p(p_in) {
  if (!(p > 1.0) || !(p <= 2.0)) throw std::invalid_argument("Geometry: p must lie in (1, 2]");
  q = p / (p - 1.0);
}

Geometry Geometry::for_dim(Eigen::Index d) {
  if (d < 2) return Geometry(2.0);
  double p = 1.0 + 1.0 / std::log(static_cast<double>(d));
  return Geometry(std::min(p, 2.0));
}

SpectralDecomposition decompose(const Signal& x) {
  SpectralDecomposition dec;
  switch (x.kind()) {
    case SignalKind::Vector:
      throw std::invalid_argument("decompose: vectors have no spectral decomposition");
    case SignalKind::Symmetric: {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(x.data());
      if (es.info() != Eigen::Success) throw std::runtime_error("eigendecomposition failed");
      // Eigen sorts ascending; flip to descending.
      dec.values = es.eigenvalues().reverse();
      dec.U = es.eigenvectors().rowwise().reverse();
      dec.V = dec.U;
      return dec;
    }
    case SignalKind::Rectangular: {
      Eigen::BDCSVD<Eigen::MatrixXd> svd(x.data(), Eigen::ComputeThinU | Eigen::ComputeThinV);
      dec.values = svd.singularValues();
      dec.U = svd.matrixU();
      dec.V = svd.matrixV();
      return dec;
    }
  }
  throw std::logic_error("unreachable");
}

Signal recompose(const SpectralDecomposition& dec, const Eigen::VectorXd& vals, SignalKind kind) {
  Eigen::MatrixXd m = dec.U * vals.asDiagonal() * dec.V.transpose();
  switch (kind) {
    case SignalKind::Symmetric:
      return Signal::symmetric(m);
    case SignalKind::Rectangular:
      return Signal::rectangular(std::move(m));
    case SignalKind::Vector:
      throw std::invalid_argument("recompose: vector kind not supported");
  }
  throw std::logic_error("unreachable");
}

double norm_p(const Signal& x, double p) {
  switch (x.kind()) {
    case SignalKind::Vector:
      return lp_of(x.data().array().abs(), p);
    case SignalKind::Symmetric:
    case SignalKind::Rectangular: {
      if (p == 2.0) return x.data().norm();  // Schatten-2 is Frobenius
      if (x.kind() == SignalKind::Symmetric)
        return lp_of(Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(x.data())
                         .eigenvalues()
                         .array()
                         .abs(),
                     p);
      return lp_of(
          Eigen::BDCSVD<Eigen::MatrixXd>(x.data()).singularValues().array().abs(), p);
    }
  }
  throw std::logic_error("unreachable");
}

double dual_pair(const Signal& g, const Signal& x) {
  require_same_shape(g, x);
  return (g.data().array() * x.data().array()).sum();
}

Signal spectral_function(const Signal& x, const std::function<double(double)>& phi) {
  switch (x.kind()) {
    case SignalKind::Vector: {
      Eigen::VectorXd v = x.data().col(0);
      for (Eigen::Index i = 0; i < v.size(); ++i) {
        double t = v(i);
        v(i) = t < 0 ? -phi(-t) : phi(t);
      }
      return Signal::vector(std::move(v));
    }
    case SignalKind::Symmetric: {
      SpectralDecomposition dec = decompose(x);
      Eigen::VectorXd vals = dec.values;
      for (Eigen::Index i = 0; i < vals.size(); ++i) {
        double t = vals(i);
        vals(i) = t < 0 ? -phi(-t) : phi(t);
      }
      return recompose(dec, vals, SignalKind::Symmetric);
    }
    case SignalKind::Rectangular: {
      SpectralDecomposition dec = decompose(x);
      Eigen::VectorXd vals = dec.values;
      for (Eigen::Index i = 0; i < vals.size(); ++i) vals(i) = phi(vals(i));
      return recompose(dec, vals, SignalKind::Rectangular);
    }
  }
  throw std::logic_error("unreachable");
}

}  // namespace sharpopt
