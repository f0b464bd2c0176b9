#pragma once

#include <cmath>
#include <complex>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qmarg/errors.hpp"
#include "qmarg/shape.hpp"

namespace qmarg {

using Complex = std::complex<double>;
using Matrix = Eigen::MatrixXcd;
using RealVector = Eigen::VectorXd;

/// Dense complex square matrix tagged with the register shape it acts on.
/// Not necessarily positive or trace one.
class HermitianOperator {
 public:
  HermitianOperator() = default;

  HermitianOperator(SystemShape shape, Matrix m) : shape_(std::move(shape)), m_(std::move(m)) {
    const auto d = static_cast<Eigen::Index>(shape_.total_dim());
    if (m_.rows() != d || m_.cols() != d) {
      throw ShapeError("matrix is " + std::to_string(m_.rows()) + "x" +
                       std::to_string(m_.cols()) + ", shape " + shape_.to_string() +
                       " needs " + std::to_string(d) + "x" + std::to_string(d));
    }
  }

  /// As the constructor, additionally rejecting matrices that are not
  /// Hermitian within `tol` in max-entry norm.
  static HermitianOperator checked(SystemShape shape, Matrix m, double tol = 1e-12) {
    HermitianOperator op(std::move(shape), std::move(m));
    const double dev = (op.m_ - op.m_.adjoint()).cwiseAbs().maxCoeff();
    if (!(dev <= tol)) {
      throw ValidationError("matrix is not Hermitian (max |A - A^dag| = " +
                            std::to_string(dev) + ")");
    }
    return op;
  }

  static HermitianOperator zero(const SystemShape& shape) {
    const auto d = static_cast<Eigen::Index>(shape.total_dim());
    return HermitianOperator(shape, Matrix::Zero(d, d));
  }

  static HermitianOperator maximally_mixed(const SystemShape& shape) {
    const auto d = static_cast<Eigen::Index>(shape.total_dim());
    return HermitianOperator(shape, Matrix::Identity(d, d) / static_cast<double>(d));
  }

  const SystemShape& shape() const noexcept { return shape_; }
  const Matrix& matrix() const noexcept { return m_; }
  Matrix& mutable_matrix() noexcept { return m_; }
  std::size_t dim() const noexcept { return shape_.total_dim(); }
  double trace() const { return m_.trace().real(); }

  HermitianOperator& operator+=(const HermitianOperator& o) {
    require_same_shape(o);
    m_ += o.m_;
    return *this;
  }
  HermitianOperator& operator-=(const HermitianOperator& o) {
    require_same_shape(o);
    m_ -= o.m_;
    return *this;
  }
  HermitianOperator& operator*=(double s) {
    m_ *= s;
    return *this;
  }
  friend HermitianOperator operator+(HermitianOperator a, const HermitianOperator& b) {
    return a += b;
  }
  friend HermitianOperator operator-(HermitianOperator a, const HermitianOperator& b) {
    return a -= b;
  }
  friend HermitianOperator operator*(double s, HermitianOperator a) { return a *= s; }

  void require_same_shape(const HermitianOperator& o) const {
    if (!(shape_ == o.shape_)) {
      throw ShapeError("shape mismatch: " + shape_.to_string() + " vs " + o.shape_.to_string());
    }
  }

 private:
  SystemShape shape_;
  Matrix m_;
};

inline double default_psd_tol(const SystemShape& shape) {
  return 1e-10 * static_cast<double>(shape.total_dim());
}

struct Spectrum {
  RealVector values;  // descending
  Matrix vectors;     // orthonormal columns, matching `values`
};

namespace detail {

inline void require_finite(const Matrix& m) {
  if (!m.allFinite()) throw NumericError("operator has non-finite entries");
}

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.adjoint()); }

}  // namespace detail

/// Full eigendecomposition, eigenvalues sorted descending. The input is
/// symmetrized before decomposition.
inline Spectrum hermitian_eig(const HermitianOperator& op) {
  detail::require_finite(op.matrix());
  Eigen::SelfAdjointEigenSolver<Matrix> es(detail::symmetrized(op.matrix()));
  if (es.info() != Eigen::Success) throw NumericError("eigensolver did not converge");
  Spectrum s;
  s.values = es.eigenvalues().reverse();
  s.vectors = es.eigenvectors().rowwise().reverse();
  return s;
}

/// Eigenvalues only, descending.
inline RealVector hermitian_eigenvalues(const HermitianOperator& op) {
  detail::require_finite(op.matrix());
  Eigen::SelfAdjointEigenSolver<Matrix> es(detail::symmetrized(op.matrix()),
                                           Eigen::EigenvaluesOnly);
  if (es.info() != Eigen::Success) throw NumericError("eigensolver did not converge");
  return es.eigenvalues().reverse();
}

inline double lambda_min(const HermitianOperator& op) {
  return hermitian_eigenvalues(op).minCoeff();
}

/// Hermitian operator certified positive semidefinite with unit trace.
class DensityMatrix {
 public:
  DensityMatrix() = default;

  /// Throws ValidationError unless `op` is Hermitian, has trace 1 within
  /// `trace_tol` and smallest eigenvalue >= -psd_tol.
  static DensityMatrix certify(HermitianOperator op, double psd_tol, double trace_tol = 1e-10,
                               double herm_tol = 1e-12) {
    detail::require_finite(op.matrix());
    const double herm = (op.matrix() - op.matrix().adjoint()).cwiseAbs().maxCoeff();
    if (!(herm <= herm_tol)) {
      throw ValidationError("matrix is not Hermitian (max |A - A^dag| = " +
                            std::to_string(herm) + ")");
    }
    const double tr = op.trace();
    if (!(std::abs(tr - 1.0) <= trace_tol)) {
      throw ValidationError("trace is " + std::to_string(tr) + ", expected 1");
    }
    const double lmin = lambda_min(op);
    if (!(lmin >= -psd_tol)) {
      throw ValidationError("matrix is not positive semidefinite (lambda_min = " +
                            std::to_string(lmin) + ")");
    }
    return DensityMatrix(std::move(op));
  }
  static DensityMatrix certify(HermitianOperator op) {
    const double tol = default_psd_tol(op.shape());
    return certify(std::move(op), tol);
  }

  /// Wraps an operator that is a state by construction; no checks.
  static DensityMatrix from_trusted(HermitianOperator op) { return DensityMatrix(std::move(op)); }

  static DensityMatrix maximally_mixed(const SystemShape& shape) {
    return DensityMatrix(HermitianOperator::maximally_mixed(shape));
  }

  /// |psi><psi| for a normalized vector.
  static DensityMatrix pure(const SystemShape& shape, const Eigen::VectorXcd& psi) {
    const Eigen::VectorXcd v = psi / psi.norm();
    return DensityMatrix(HermitianOperator(shape, v * v.adjoint()));
  }

  const HermitianOperator& op() const noexcept { return op_; }
  operator const HermitianOperator&() const noexcept { return op_; }  // NOLINT
  const SystemShape& shape() const noexcept { return op_.shape(); }
  const Matrix& matrix() const noexcept { return op_.matrix(); }
  std::size_t dim() const noexcept { return op_.dim(); }
  double purity() const { return op_.matrix().squaredNorm(); }

 private:
  explicit DensityMatrix(HermitianOperator op) : op_(std::move(op)) {}
  HermitianOperator op_;
};

/// Index bookkeeping for splitting a register into a kept subset J and its
/// complement. Full index = compose(a, b) where a runs over J's digits and b
/// over the complement's digits, each in increasing site order.
class SubsystemSplit {
 public:
  SubsystemSplit(const SystemShape& shape, const PartySubset& keep) {
    keep.validate_for(shape);
    const std::size_t n = shape.sites();
    dk_ = shape.dim_of(keep);
    dc_ = shape.total_dim() / dk_;
    compose_.assign(shape.total_dim(), 0);
    std::vector<std::size_t> digits(n, 0);
    for (std::size_t x = 0; x < shape.total_dim(); ++x) {
      std::size_t a = 0, b = 0;
      for (std::size_t s = 0; s < n; ++s) {
        if (keep.contains(s)) {
          a = a * shape.dim(s) + digits[s];
        } else {
          b = b * shape.dim(s) + digits[s];
        }
      }
      compose_[a * dc_ + b] = x;
      for (std::size_t s = n; s-- > 0;) {  // increment mixed-radix counter, site n-1 fastest
        if (++digits[s] < shape.dim(s)) break;
        digits[s] = 0;
      }
    }
  }

  std::size_t kept_dim() const noexcept { return dk_; }
  std::size_t complement_dim() const noexcept { return dc_; }
  Eigen::Index compose(std::size_t a, std::size_t b) const {
    return static_cast<Eigen::Index>(compose_[a * dc_ + b]);
  }

  /// out(a, a') = sum_b m(compose(a, b), compose(a', b)).
  Matrix trace_out(const Matrix& m) const {
    Matrix out = Matrix::Zero(static_cast<Eigen::Index>(dk_), static_cast<Eigen::Index>(dk_));
    for (std::size_t ac = 0; ac < dk_; ++ac) {
      for (std::size_t b = 0; b < dc_; ++b) {
        const auto col = compose(ac, b);
        for (std::size_t ar = 0; ar < dk_; ++ar) {
          out(static_cast<Eigen::Index>(ar), static_cast<Eigen::Index>(ac)) +=
              m(compose(ar, b), col);
        }
      }
    }
    return out;
  }

  /// m += delta (x) I_c * scale, with delta on the kept subsystem.
  void add_embedded(Matrix& m, const Matrix& delta, double scale) const {
    for (std::size_t ac = 0; ac < dk_; ++ac) {
      for (std::size_t b = 0; b < dc_; ++b) {
        const auto col = compose(ac, b);
        for (std::size_t ar = 0; ar < dk_; ++ar) {
          m(compose(ar, b), col) +=
              scale * delta(static_cast<Eigen::Index>(ar), static_cast<Eigen::Index>(ac));
        }
      }
    }
  }

 private:
  std::size_t dk_ = 1;
  std::size_t dc_ = 1;
  std::vector<std::size_t> compose_;
};

/// Reduced operator on `keep`. Trace, linearity and positivity are preserved.
inline HermitianOperator partial_trace(const HermitianOperator& op, const PartySubset& keep) {
  SubsystemSplit split(op.shape(), keep);
  return HermitianOperator(op.shape().restrict(keep), split.trace_out(op.matrix()));
}

/// op (x) I/d_c on the full register, with op acting on the sites of `where`.
/// The complement carries the normalized maximally mixed state.
inline HermitianOperator embed(const HermitianOperator& op, const SystemShape& shape,
                               const PartySubset& where) {
  where.validate_for(shape);
  if (!(op.shape() == shape.restrict(where))) {
    throw ShapeError("operator shape " + op.shape().to_string() + " does not match sites " +
                     where.to_string() + " of " + shape.to_string());
  }
  SubsystemSplit split(shape, where);
  auto out = HermitianOperator::zero(shape);
  split.add_embedded(out.mutable_matrix(), op.matrix(),
                     1.0 / static_cast<double>(split.complement_dim()));
  return out;
}

/// Tr[(a - b)^2], the squared Hilbert-Schmidt distance.
inline double hs_distance_sq(const HermitianOperator& a, const HermitianOperator& b) {
  a.require_same_shape(b);
  return (a.matrix() - b.matrix()).squaredNorm();
}

}  // namespace qmarg
