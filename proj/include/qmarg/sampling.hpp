#pragma once

#include <cstdint>
#include <random>

#include "qmarg/marginals.hpp"
#include "qmarg/operator.hpp"

namespace qmarg {

/// Deterministic random stream identified by (master_seed, stream_id).
/// Per-sample streams make Monte Carlo results independent of scheduling.
class RngStream {
 public:
  explicit RngStream(std::uint64_t master_seed = 0, std::uint64_t stream_id = 0)
      : master_(master_seed), stream_(stream_id) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed), static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(stream_id), static_cast<std::uint32_t>(stream_id >> 32),
                      0x716d6172u};
    engine_.seed(seq);
  }

  std::uint64_t master_seed() const noexcept { return master_; }
  std::uint64_t stream_id() const noexcept { return stream_; }

  /// A sibling stream under the same master seed.
  RngStream substream(std::uint64_t stream_id) const { return RngStream(master_, stream_id); }

  double normal() { return normal_(engine_); }

  /// Independent standard normal real and imaginary parts.
  Complex complex_normal() {
    const double re = normal_(engine_);
    const double im = normal_(engine_);
    return {re, im};
  }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::uint64_t master_;
  std::uint64_t stream_;
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_{0.0, 1.0};
};

inline Matrix ginibre(std::size_t rows, std::size_t cols, RngStream& rng) {
  Matrix g(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index c = 0; c < g.cols(); ++c) {
    for (Eigen::Index r = 0; r < g.rows(); ++r) g(r, c) = rng.complex_normal();
  }
  return g;
}

/// Hilbert-Schmidt random mixed state GG^dag / Tr[GG^dag].
inline DensityMatrix sample_hs_state(const SystemShape& shape, RngStream& rng) {
  const std::size_t d = shape.total_dim();
  const Matrix g = ginibre(d, d, rng);
  Matrix rho(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d));
  rho.noalias() = g * g.adjoint();
  rho = detail::symmetrized(rho);
  rho /= rho.trace().real();
  return DensityMatrix::from_trusted(HermitianOperator(shape, std::move(rho)));
}

/// Haar random pure state vv^dag from a normalized complex Gaussian vector.
inline DensityMatrix sample_haar_pure(const SystemShape& shape, RngStream& rng) {
  const Matrix v = ginibre(shape.total_dim(), 1, rng);
  return DensityMatrix::pure(shape, v.col(0));
}

}  // namespace qmarg
