#include "sharpopt/sensing.hpp"

#include <cstdio>
#include <limits>
#include <memory>
#include <stdexcept>

#include "sharpopt/rng.hpp"

namespace sharpopt {

namespace {

constexpr std::uint32_t kMagic = 0x53484f50;  // "SHOP"
constexpr std::uint32_t kVersion = 1;

// Per-thread scratch for the m x n atom products, so solver loops do not
// allocate multi-megabyte temporaries on every step.
Eigen::MatrixXd& scratch() {
  static thread_local Eigen::MatrixXd buf;
  return buf;
}

void fill_row(Eigen::MatrixXd& dst, int row, CounterRng& rng, double stddev) {
  for (Eigen::Index j = 0; j < dst.cols(); ++j) dst(row, j) = stddev * rng.next_normal();
}

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

template <typename T>
void write_pod(std::FILE* f, const T& v) {
  if (std::fwrite(&v, sizeof(T), 1, f) != 1) throw std::runtime_error("write failed");
}

template <typename T>
T read_pod(std::FILE* f) {
  T v;
  if (std::fread(&v, sizeof(T), 1, f) != 1) throw std::runtime_error("read failed");
  return v;
}

void write_matrix(std::FILE* f, const Eigen::MatrixXd& m) {
  write_pod<std::int64_t>(f, m.rows());
  write_pod<std::int64_t>(f, m.cols());
  if (m.size() > 0 &&
      std::fwrite(m.data(), sizeof(double), static_cast<std::size_t>(m.size()), f) !=
          static_cast<std::size_t>(m.size()))
    throw std::runtime_error("write failed");
}

Eigen::MatrixXd read_matrix(std::FILE* f) {
  auto rows = read_pod<std::int64_t>(f);
  auto cols = read_pod<std::int64_t>(f);
  Eigen::MatrixXd m(rows, cols);
  if (m.size() > 0 &&
      std::fread(m.data(), sizeof(double), static_cast<std::size_t>(m.size()), f) !=
          static_cast<std::size_t>(m.size()))
    throw std::runtime_error("read failed");
  return m;
}

}  // namespace

SensingOperator SensingOperator::build(SensingModel model, int n, int N, int m, Scaling scaling,
                                       std::uint64_t seed) {
  if (n <= 0 || m <= 0) throw std::invalid_argument("build_sensing: n and m must be positive");
  SensingOperator op;
  op.model_ = model;
  op.n_ = n;
  op.m_ = m;
  op.scaling_ = scaling;
  op.seed_ = seed;

  double md = static_cast<double>(m);
  double sigma = scaling == Scaling::EllTwo ? 1.0 / std::sqrt(md) : 1.0 / md;

  switch (model) {
    case SensingModel::SparseVector: {
      op.N_ = 1;
      op.A_.resize(m, n);
      for (int i = 0; i < m; ++i) {
        CounterRng rng(seed, static_cast<std::uint64_t>(i));
        fill_row(op.A_, i, rng, sigma);
      }
      break;
    }
    case SensingModel::MatrixDense: {
      if (N <= 0) throw std::invalid_argument("build_sensing: N must be positive");
      if (n > N) throw std::invalid_argument("build_sensing: requires n <= N");
      op.N_ = N;
      op.A_.resize(m, static_cast<Eigen::Index>(n) * N);
      for (int i = 0; i < m; ++i) {
        CounterRng rng(seed, static_cast<std::uint64_t>(i));
        fill_row(op.A_, i, rng, sigma);
      }
      break;
    }
    case SensingModel::MatrixBilinear: {
      if (N <= 0) throw std::invalid_argument("build_sensing: N must be positive");
      if (n > N) throw std::invalid_argument("build_sensing: requires n <= N");
      op.N_ = N;
      op.A_.resize(m, n);
      op.B_.resize(m, N);
      double s = 1.0 / std::sqrt(md);
      for (int i = 0; i < m; ++i) {
        CounterRng rng(seed, static_cast<std::uint64_t>(i));
        fill_row(op.A_, i, rng, s);
        fill_row(op.B_, i, rng, s);
      }
      break;
    }
    case SensingModel::CovarianceRankOne: {
      if (N > 0 && N != n)
        throw std::invalid_argument("build_sensing: CovarianceRankOne requires N == n");
      op.N_ = n;
      op.A_.resize(m, n);
      double s = 1.0 / std::sqrt(md);
      for (int i = 0; i < m; ++i) {
        CounterRng rng(seed, static_cast<std::uint64_t>(i));
        fill_row(op.A_, i, rng, s);
      }
      break;
    }
    case SensingModel::CovarianceDifference: {
      if (N > 0 && N != n)
        throw std::invalid_argument("build_sensing: CovarianceDifference requires N == n");
      op.N_ = n;
      op.A_.resize(m, n);
      op.B_.resize(m, n);
      double s = 1.0 / std::sqrt(2.0 * md);
      for (int i = 0; i < m; ++i) {
        CounterRng rng(seed, static_cast<std::uint64_t>(i));
        fill_row(op.A_, i, rng, s);
        fill_row(op.B_, i, rng, s);
      }
      break;
    }
  }
  return op;
}

SensingOperator SensingOperator::from_dense(SensingModel model, int n, int N, Scaling scaling,
                                            std::uint64_t seed, Eigen::MatrixXd a,
                                            Eigen::MatrixXd b) {
  SensingOperator op;
  op.model_ = model;
  op.n_ = n;
  op.N_ = model == SensingModel::SparseVector ? 1 : (N > 0 ? N : n);
  op.m_ = static_cast<int>(a.rows());
  op.scaling_ = scaling;
  op.seed_ = seed;
  op.A_ = std::move(a);
  op.B_ = std::move(b);
  return op;
}

SignalKind SensingOperator::domain_kind() const {
  switch (model_) {
    case SensingModel::SparseVector:
      return SignalKind::Vector;
    case SensingModel::MatrixDense:
    case SensingModel::MatrixBilinear:
      return SignalKind::Rectangular;
    case SensingModel::CovarianceRankOne:
    case SensingModel::CovarianceDifference:
      return SignalKind::Symmetric;
  }
  throw std::logic_error("unreachable");
}

Signal SensingOperator::zero_domain() const {
  return Signal::zeros(domain_kind(), n_, N_);
}

bool SensingOperator::ell_one_measurements() const {
  if (model_ == SensingModel::SparseVector || model_ == SensingModel::MatrixDense)
    return scaling_ == Scaling::EllOne;
  return true;
}

double SensingOperator::measurement_norm(const Eigen::VectorXd& w) const {
  return ell_one_measurements() ? w.lpNorm<1>() : w.norm();
}

Eigen::VectorXd SensingOperator::apply(const Signal& x) const {
  if (x.kind() != domain_kind() || x.rows() != n_ ||
      (x.kind() != SignalKind::Vector && x.cols() != N_))
    throw std::invalid_argument("apply: signal does not match operator domain");
  switch (model_) {
    case SensingModel::SparseVector:
      return A_ * x.data().col(0);
    case SensingModel::MatrixDense:
      return A_ * x.data().reshaped();
    case SensingModel::MatrixBilinear: {
      Eigen::MatrixXd& s = scratch();
      s.noalias() = A_ * x.data();
      return (s.array() * B_.array()).rowwise().sum();
    }
    case SensingModel::CovarianceRankOne: {
      Eigen::MatrixXd& s = scratch();
      s.noalias() = A_ * x.data();
      return (s.array() * A_.array()).rowwise().sum();
    }
    case SensingModel::CovarianceDifference: {
      Eigen::MatrixXd& s = scratch();
      s.noalias() = A_ * x.data();
      Eigen::VectorXd out = (s.array() * A_.array()).rowwise().sum();
      s.noalias() = B_ * x.data();
      out -= ((s.array() * B_.array()).rowwise().sum()).matrix();
      return out;
    }
  }
  throw std::logic_error("unreachable");
}

Signal SensingOperator::adjoint(const Eigen::VectorXd& w) const {
  if (w.size() != m_) throw std::invalid_argument("adjoint: weight length must equal m");
  switch (model_) {
    case SensingModel::SparseVector:
      return Signal::vector(A_.transpose() * w);
    case SensingModel::MatrixDense: {
      Eigen::VectorXd v = A_.transpose() * w;
      return Signal::rectangular(v.reshaped(n_, N_));
    }
    case SensingModel::MatrixBilinear: {
      Eigen::MatrixXd& s = scratch();
      s.noalias() = w.asDiagonal() * B_;
      return Signal::rectangular(A_.transpose() * s);
    }
    case SensingModel::CovarianceRankOne: {
      Eigen::MatrixXd& s = scratch();
      s.noalias() = w.asDiagonal() * A_;
      return Signal::symmetric(A_.transpose() * s);
    }
    case SensingModel::CovarianceDifference: {
      Eigen::MatrixXd& s = scratch();
      s.noalias() = w.asDiagonal() * A_;
      Eigen::MatrixXd out = A_.transpose() * s;
      s.noalias() = w.asDiagonal() * B_;
      out.noalias() -= B_.transpose() * s;
      return Signal::symmetric(out);
    }
  }
  throw std::logic_error("unreachable");
}

Signal SensingOperator::adjoint_atom(int i) const {
  if (i < 0 || i >= m_) throw std::invalid_argument("adjoint_atom: index out of range");
  switch (model_) {
    case SensingModel::SparseVector:
      return Signal::vector(A_.row(i).transpose());
    case SensingModel::MatrixDense:
      return Signal::rectangular(A_.row(i).transpose().reshaped(n_, N_).eval());
    case SensingModel::MatrixBilinear:
      return Signal::rectangular(A_.row(i).transpose() * B_.row(i));
    case SensingModel::CovarianceRankOne:
      return Signal::symmetric(A_.row(i).transpose() * A_.row(i));
    case SensingModel::CovarianceDifference:
      return Signal::symmetric(A_.row(i).transpose() * A_.row(i) -
                               B_.row(i).transpose() * B_.row(i));
  }
  throw std::logic_error("unreachable");
}

void SensingOperator::save(const std::string& path, bool with_atoms) const {
  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw std::runtime_error("save: cannot open " + path);
  write_pod(f.get(), kMagic);
  write_pod(f.get(), kVersion);
  write_pod(f.get(), static_cast<std::uint32_t>(model_));
  write_pod(f.get(), static_cast<std::uint32_t>(scaling_));
  write_pod(f.get(), static_cast<std::int64_t>(n_));
  write_pod(f.get(), static_cast<std::int64_t>(N_));
  write_pod(f.get(), static_cast<std::int64_t>(m_));
  write_pod(f.get(), seed_);
  write_pod(f.get(), static_cast<std::uint8_t>(with_atoms ? 1 : 0));
  if (with_atoms) {
    write_matrix(f.get(), A_);
    write_matrix(f.get(), B_);
  }
}

SensingOperator SensingOperator::load(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw std::runtime_error("load: cannot open " + path);
  if (read_pod<std::uint32_t>(f.get()) != kMagic)
    throw std::runtime_error("load: not a sensing operator file");
  if (read_pod<std::uint32_t>(f.get()) != kVersion)
    throw std::runtime_error("load: unsupported version");
  auto model = static_cast<SensingModel>(read_pod<std::uint32_t>(f.get()));
  auto scaling = static_cast<Scaling>(read_pod<std::uint32_t>(f.get()));
  int n = static_cast<int>(read_pod<std::int64_t>(f.get()));
  int N = static_cast<int>(read_pod<std::int64_t>(f.get()));
  int m = static_cast<int>(read_pod<std::int64_t>(f.get()));
  auto seed = read_pod<std::uint64_t>(f.get());
  bool with_atoms = read_pod<std::uint8_t>(f.get()) != 0;
  if (!with_atoms) return build(model, n, N, m, scaling, seed);
  Eigen::MatrixXd a = read_matrix(f.get());
  Eigen::MatrixXd b = read_matrix(f.get());
  return from_dense(model, n, N, scaling, seed, std::move(a), std::move(b));
}

RipEstimate estimate_rip(const SensingOperator& op, int k_prime, int trials, std::uint64_t seed) {
  if (k_prime <= 0 || trials <= 0)
    throw std::invalid_argument("estimate_rip: k_prime and trials must be positive");
  RipEstimate est;
  est.k_prime = k_prime;
  est.trials = trials;
  est.lower = std::numeric_limits<double>::infinity();
  est.upper = 0.0;

  SignalKind kind = op.domain_kind();
  for (int t = 0; t < trials; ++t) {
    CounterRng rng(seed, static_cast<std::uint64_t>(t));
    Signal dir = op.zero_domain();
    switch (kind) {
      case SignalKind::Vector: {
        auto support = sample_without_replacement(
            rng, op.n(), std::min<Eigen::Index>(k_prime, op.n()));
        for (auto idx : support) dir.data()(idx, 0) = rng.next_normal();
        break;
      }
      case SignalKind::Rectangular: {
        Eigen::Index r = std::min<Eigen::Index>(k_prime, std::min(op.n(), op.N()));
        Eigen::MatrixXd u = normal_matrix(rng, op.n(), r);
        Eigen::MatrixXd v = normal_matrix(rng, op.N(), r);
        dir = Signal::rectangular(u * v.transpose());
        break;
      }
      case SignalKind::Symmetric: {
        Eigen::Index r = std::min<Eigen::Index>(k_prime, op.n());
        Eigen::MatrixXd fac = normal_matrix(rng, op.n(), r);
        Eigen::VectorXd signs(r);
        for (Eigen::Index j = 0; j < r; ++j) signs(j) = rng.next_below(2) == 0 ? -1.0 : 1.0;
        dir = Signal::symmetric(fac * signs.asDiagonal() * fac.transpose());
        break;
      }
    }
    double fro = dir.data().norm();
    if (fro == 0.0) continue;
    dir *= 1.0 / fro;
    double ratio = op.measurement_norm(op.apply(dir));
    est.lower = std::min(est.lower, ratio);
    est.upper = std::max(est.upper, ratio);
  }
  return est;
}

}  // namespace sharpopt
