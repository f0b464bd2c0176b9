#pragma once

#include <cmath>
#include <cstddef>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "qmarg/imposition.hpp"
#include "qmarg/sampling.hpp"

namespace qmarg {

struct ProjectionResult {
  DensityMatrix state;
  RealVector eigenvalues;  // full spectrum of the input, descending
  bool fallback = false;   // retained trace vanished; uniform mixture of the top-r eigenvectors used
};

inline constexpr double kRetainedTraceFloor = 1e-14;

/// Keeps the top-r eigenpairs, clamps retained negative eigenvalues to zero
/// and rescales to unit trace.
inline ProjectionResult project_top_r(const HermitianOperator& op, std::size_t r) {
  if (r < 1 || r > op.dim()) {
    throw ValidationError("rank must satisfy 1 <= r <= " + std::to_string(op.dim()) + ", got " +
                          std::to_string(r));
  }
  auto spec = hermitian_eig(op);
  const auto rr = static_cast<Eigen::Index>(r);
  RealVector kept = spec.values.head(rr).cwiseMax(0.0);
  bool fallback = false;
  double total = kept.sum();
  if (!(total > kRetainedTraceFloor)) {
    kept.setOnes();
    total = static_cast<double>(r);
    fallback = true;
  }
  kept /= total;
  const auto v = spec.vectors.leftCols(rr);
  Matrix rho = v * kept.asDiagonal() * v.adjoint();
  rho = detail::symmetrized(rho);
  return {DensityMatrix::from_trusted(HermitianOperator(op.shape(), std::move(rho))),
          std::move(spec.values), fallback};
}

struct Distances {
  double d_lambda = 0.0;
  double d_m = 0.0;
  double d_t = 0.0;
};

/// D_lambda from the spectrum discarded by the rank-r projection; D_M is the
/// root mean square over marginals of hs_distance_sq between the current
/// iterate's reductions and the targets; D_T = sqrt(D_lambda^2 + D_M^2).
inline Distances distances(const RealVector& eigenvalues_desc, std::size_t rank,
                           const MarginalSet& marginals, const DensityMatrix& current) {
  Distances d;
  const auto n = eigenvalues_desc.size();
  const auto r = static_cast<Eigen::Index>(rank);
  if (r < n) d.d_lambda = eigenvalues_desc.tail(n - r).norm();
  if (!marginals.empty()) {
    double acc = 0.0;
    for (const auto& e : marginals) {
      const double h = hs_distance_sq(e.state, partial_trace(current, e.parties));
      acc += h * h;
    }
    d.d_m = std::sqrt(acc / static_cast<double>(marginals.size()));
  }
  d.d_t = std::sqrt(d.d_lambda * d.d_lambda + d.d_m * d.d_m);
  return d;
}

inline Distances distances(const HermitianOperator& rho1, std::size_t rank,
                           const MarginalSet& marginals, const DensityMatrix& current) {
  return distances(hermitian_eigenvalues(rho1), rank, marginals, current);
}

struct MaximallyMixedSeed {};
struct RandomHsSeed {};
using SeedState = std::variant<MaximallyMixedSeed, RandomHsSeed, DensityMatrix>;

struct ReconstructionConfig {
  MarginalSet marginals;
  std::size_t rank = 1;
  double eps = 1e-7;
  std::size_t max_iters = 100000;
  std::size_t stall_window = 500;  // 0 disables stall detection
  double stall_rel_improvement = 1e-12;
  SeedState seed = MaximallyMixedSeed{};
  RngStream rng{};
  double consistency_tol = 1e-8;
  std::size_t trace_stride = 1;  // record every n-th iteration (the last one is always kept)
};

struct TraceRow {
  std::size_t iter = 0;
  double d_lambda = 0.0;
  double d_m = 0.0;
  double d_t = 0.0;
};

struct ReconstructionReport {
  bool converged = false;
  bool stall_detected = false;
  std::size_t iterations = 0;
  std::size_t projection_fallbacks = 0;
  DensityMatrix final_state;
  Distances final_distances;
  std::vector<TraceRow> trace;
};

/// Alternates rho1 = Q(rho0) and rho0 = P_r(rho1) until D_T < eps, the
/// iteration budget is exhausted, or the best D_T has not improved by the
/// relative threshold within the last stall_window iterations.
inline ReconstructionReport run(ReconstructionConfig cfg) {
  const auto& marginals = cfg.marginals;
  const auto& shape = marginals.shape();
  if (cfg.rank < 1 || cfg.rank > shape.total_dim()) {
    throw ValidationError("rank must satisfy 1 <= r <= " + std::to_string(shape.total_dim()));
  }
  if (!(cfg.eps > 0.0 && cfg.eps < 1.0)) throw ValidationError("eps must lie in (0, 1)");
  const auto consistency = check_self_consistency(marginals, cfg.consistency_tol);
  if (!consistency.pass) {
    throw ValidationError("marginals are not self-consistent (worst pair " +
                          std::to_string(consistency.worst_pair->first) + "," +
                          std::to_string(consistency.worst_pair->second) +
                          ", distance " + std::to_string(consistency.worst_distance) + ")");
  }

  DensityMatrix rho0 = std::visit(
      [&](const auto& s) -> DensityMatrix {
        using S = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<S, MaximallyMixedSeed>) {
          return DensityMatrix::maximally_mixed(shape);
        } else if constexpr (std::is_same_v<S, RandomHsSeed>) {
          return sample_hs_state(shape, cfg.rng);
        } else {
          if (!(s.shape() == shape)) throw ShapeError("seed state shape does not match marginals");
          return s;
        }
      },
      cfg.seed);

  ReconstructionReport rep;
  const std::size_t stride = cfg.trace_stride == 0 ? 1 : cfg.trace_stride;
  std::vector<double> best;  // best D_T after each iteration
  best.reserve(cfg.max_iters);

  for (std::size_t it = 1; it <= cfg.max_iters; ++it) {
    HermitianOperator rho1 = impose_all(rho0.op(), marginals);
    if (!rho1.matrix().allFinite()) {
      throw NumericError("non-finite iterate at iteration " + std::to_string(it));
    }
    auto proj = project_top_r(rho1, cfg.rank);
    if (proj.fallback) ++rep.projection_fallbacks;
    rho0 = std::move(proj.state);
    const auto dist = distances(proj.eigenvalues, cfg.rank, marginals, rho0);
    if (!std::isfinite(dist.d_t)) {
      throw NumericError("non-finite distance at iteration " + std::to_string(it));
    }
    rep.iterations = it;
    rep.final_distances = dist;
    best.push_back(best.empty() ? dist.d_t : std::min(best.back(), dist.d_t));

    const bool converged = dist.d_t < cfg.eps;
    bool stalled = false;
    if (!converged && cfg.stall_window > 0 && it > cfg.stall_window) {
      const double before = best[it - 1 - cfg.stall_window];
      stalled = !(best.back() < before * (1.0 - cfg.stall_rel_improvement));
    }
    const bool last = converged || stalled || it == cfg.max_iters;
    if (it % stride == 0 || it == 1 || last) {
      rep.trace.push_back({it, dist.d_lambda, dist.d_m, dist.d_t});
    }
    if (converged) {
      rep.converged = true;
      break;
    }
    if (stalled) {
      rep.stall_detected = true;
      break;
    }
  }
  rep.final_state = std::move(rho0);
  return rep;
}

}  // namespace qmarg
