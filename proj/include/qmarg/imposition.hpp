#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "qmarg/marginals.hpp"
#include "qmarg/operator.hpp"

namespace qmarg {

namespace detail {

/// Positions of the sites of `inner` within the sorted site list of `outer`
/// (inner must be a subset of outer).
inline PartySubset relative_to(const PartySubset& inner, const PartySubset& outer) {
  std::vector<std::size_t> pos;
  pos.reserve(inner.size());
  const auto& o = outer.indices();
  for (auto s : inner.indices()) {
    auto it = std::lower_bound(o.begin(), o.end(), s);
    if (it == o.end() || *it != s) {
      throw ShapeError("subset " + inner.to_string() + " is not contained in " + outer.to_string());
    }
    pos.push_back(static_cast<std::size_t>(it - o.begin()));
  }
  return PartySubset(std::move(pos));
}

/// Reduction of a marginal living on `support` down to the sites `target`.
inline HermitianOperator reduce_marginal(const HermitianOperator& sigma, const PartySubset& support,
                                         const PartySubset& target) {
  return partial_trace(sigma, relative_to(target, support));
}

inline void impose_in_place(Matrix& rho, const SystemShape& shape, const PartySubset& j,
                            const HermitianOperator& sigma) {
  SubsystemSplit split(shape, j);
  if (static_cast<std::size_t>(sigma.matrix().rows()) != split.kept_dim()) {
    throw ShapeError("marginal on " + j.to_string() + " has dimension " +
                     std::to_string(sigma.matrix().rows()) + ", expected " +
                     std::to_string(split.kept_dim()));
  }
  const Matrix delta = sigma.matrix() - split.trace_out(rho);
  split.add_embedded(rho, delta, 1.0 / static_cast<double>(split.complement_dim()));
}

inline void require_shape(const HermitianOperator& rho, const MarginalSet& m) {
  if (!(rho.shape() == m.shape())) {
    throw ShapeError("operator shape " + rho.shape().to_string() + " does not match marginal set " +
                     m.shape().to_string());
  }
}

}  // namespace detail

/// rho - rho_J + sigma_J, both reductions embedded with maximally mixed
/// complements. The result carries sigma_J exactly and leaves reductions on
/// sets disjoint from J untouched.
inline HermitianOperator impose_one(HermitianOperator rho, const PartySubset& j,
                                    const HermitianOperator& sigma) {
  j.validate_for(rho.shape());
  if (!(sigma.shape() == rho.shape().restrict(j))) {
    throw ShapeError("marginal shape " + sigma.shape().to_string() + " does not match sites " +
                     j.to_string());
  }
  const SystemShape shape = rho.shape();
  detail::impose_in_place(rho.mutable_matrix(), shape, j, sigma);
  return rho;
}

/// Sequential composition Q_{order[m-1]} o ... o Q_{order[0]}. An empty
/// `order` means the listed order.
inline HermitianOperator impose_all(HermitianOperator rho, const MarginalSet& marginals,
                                    std::span<const std::size_t> order = {}) {
  detail::require_shape(rho, marginals);
  const SystemShape shape = rho.shape();
  if (order.empty()) {
    for (const auto& e : marginals) detail::impose_in_place(rho.mutable_matrix(), shape, e.parties, e.state);
    return rho;
  }
  if (order.size() != marginals.size()) {
    throw ValidationError("order has " + std::to_string(order.size()) + " entries for " +
                          std::to_string(marginals.size()) + " marginals");
  }
  std::vector<bool> seen(marginals.size(), false);
  for (auto i : order) {
    if (i >= marginals.size() || seen[i]) throw ValidationError("order is not a permutation");
    seen[i] = true;
  }
  for (auto i : order) {
    detail::impose_in_place(rho.mutable_matrix(), shape, marginals[i].parties, marginals[i].state);
  }
  return rho;
}

/// One formal term of the inclusion-exclusion expansion.
struct IntersectionTerm {
  std::vector<std::size_t> index_subset;  // 0-based marginal indices, increasing
  PartySubset parties;                    // intersection of their supports
  int sign = -1;                          // (-1)^{|index_subset|}
};

/// All 2^m - 1 formal intersection terms, in increasing bitmask order.
inline std::vector<IntersectionTerm> intersection_terms(const std::vector<PartySubset>& subsets) {
  const std::size_t m = subsets.size();
  if (m >= 63) throw ValidationError("too many subsets to enumerate intersections");
  std::vector<IntersectionTerm> out;
  out.reserve((std::size_t{1} << m) - 1);
  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << m); ++mask) {
    IntersectionTerm t;
    bool first = true;
    for (std::size_t i = 0; i < m; ++i) {
      if (!(mask >> i & 1u)) continue;
      t.index_subset.push_back(i);
      t.parties = first ? subsets[i] : intersect(t.parties, subsets[i]);
      first = false;
    }
    t.sign = (t.index_subset.size() % 2 == 0) ? 1 : -1;
    out.push_back(std::move(t));
  }
  return out;
}

inline constexpr std::size_t kClosedFormLimit = 20;

/// Inclusion-exclusion form rho + sum_S (-1)^{|S|} (rho_X - sigma_X) over
/// nonempty formal index subsets S with X the intersection of their supports.
/// sigma_X is traced down from the lowest-indexed marginal in S. Formal
/// subsets with coinciding X are not merged.
///
/// Equal to impose_all(rho, marginals) in the listed order for any marginals.
/// Empty intersections contribute (Tr rho - Tr sigma) I/d, which vanishes
/// for unit-trace rho.
inline HermitianOperator closed_form(const HermitianOperator& rho, const MarginalSet& marginals,
                                     std::size_t limit = kClosedFormLimit) {
  detail::require_shape(rho, marginals);
  const std::size_t m = marginals.size();
  if (m > limit) {
    throw ValidationError("closed form over " + std::to_string(m) + " marginals needs " +
                          "2^m - 1 terms (limit " + std::to_string(limit) +
                          "); use impose_all instead");
  }
  const auto& shape = rho.shape();
  const double d = static_cast<double>(shape.total_dim());

  std::vector<PartySubset> inter(std::size_t{1} << m);
  // Accumulated signed contribution on each distinct nonempty intersection.
  std::map<PartySubset, Matrix> acc;
  std::map<PartySubset, Matrix> rho_reduced;
  double scalar = 0.0;

  for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << m); ++mask) {
    const auto low = static_cast<std::size_t>(std::countr_zero(mask));
    const std::uint64_t rest = mask & (mask - 1);
    inter[mask] = rest == 0 ? marginals[low].parties : intersect(inter[rest], marginals[low].parties);
    const int sign = (std::popcount(mask) % 2 == 0) ? 1 : -1;
    const auto& x = inter[mask];
    const auto& src = marginals[low];
    if (x.empty()) {
      scalar += sign * (rho.trace() - src.state.op().trace()) / d;
      continue;
    }
    auto it = rho_reduced.find(x);
    if (it == rho_reduced.end()) {
      it = rho_reduced.emplace(x, partial_trace(rho, x).matrix()).first;
    }
    Matrix term = it->second - detail::reduce_marginal(src.state, src.parties, x).matrix();
    auto a = acc.find(x);
    if (a == acc.end()) {
      acc.emplace(x, sign * term);
    } else {
      a->second += sign * term;
    }
  }

  HermitianOperator out = rho;
  for (const auto& [x, delta] : acc) {
    SubsystemSplit split(shape, x);
    split.add_embedded(out.mutable_matrix(), delta, 1.0 / static_cast<double>(split.complement_dim()));
  }
  out.mutable_matrix().diagonal().array() += scalar;
  return out;
}

struct PairDistance {
  std::size_t i = 0;
  std::size_t j = 0;
  double distance = 0.0;
};

struct ConsistencyReport {
  bool pass = true;
  std::optional<std::pair<std::size_t, std::size_t>> worst_pair;
  double worst_distance = 0.0;
  double tol = 0.0;
  std::vector<PairDistance> per_pair;  // overlapping pairs only
};

/// Pairwise agreement of overlapping marginals on their intersections,
/// measured by hs_distance_sq. Disjoint pairs pass vacuously.
inline ConsistencyReport check_self_consistency(const MarginalSet& marginals, double tol = 1e-8) {
  ConsistencyReport rep;
  rep.tol = tol;
  for (std::size_t i = 0; i < marginals.size(); ++i) {
    for (std::size_t j = i + 1; j < marginals.size(); ++j) {
      const auto x = intersect(marginals[i].parties, marginals[j].parties);
      if (x.empty()) continue;
      const auto a = detail::reduce_marginal(marginals[i].state, marginals[i].parties, x);
      const auto b = detail::reduce_marginal(marginals[j].state, marginals[j].parties, x);
      const double dist = hs_distance_sq(a, b);
      rep.per_pair.push_back({i, j, dist});
      if (!rep.worst_pair || dist > rep.worst_distance) {
        rep.worst_distance = dist;
        rep.worst_pair = std::make_pair(i, j);
      }
    }
  }
  rep.pass = rep.worst_distance <= tol;
  return rep;
}

/// sqrt(Tr[(Q(rho) - rho)^2]); zero iff rho carries every marginal.
inline double fixed_point_residual(const HermitianOperator& rho, const MarginalSet& marginals) {
  return std::sqrt(hs_distance_sq(impose_all(rho, marginals), rho));
}

/// The scalar coefficient of I/d in the two-body uniform formula.
inline double xi(std::size_t n) {
  const double nn = static_cast<double>(n);
  return 1.0 + nn * nn / 2.0 - 1.5 * nn;
}

/// Coefficients c_t multiplying sum_{|X|=t} sigma_X (t = 0..k, with sigma of
/// the empty set being I/d) in closed-form expressions of Q(I/d) for complete
/// k-body families. Available for k = 1, k = 2 and (n, k) = (5, 3).
inline std::optional<std::vector<double>> uniform_coefficients(std::size_t n, std::size_t k) {
  const double nn = static_cast<double>(n);
  if (k == 1 && n >= 2) return std::vector<double>{-(nn - 1.0), 1.0};
  if (k == 2 && n >= 3) return std::vector<double>{xi(n), -(nn - 2.0), 1.0};
  if (k == 3 && n == 5) return std::vector<double>{-4.0, 3.0, -2.0, 1.0};
  return std::nullopt;
}

/// Q(I/d) for the complete family of k-body marginals via the analytic
/// expressions for one-body, two-body and the five-party three-body case.
/// Lower-order reductions are traced from the first marginal containing them,
/// so the identity with impose_all assumes a self-consistent family.
inline HermitianOperator analytic_uniform(const MarginalSet& marginals) {
  const auto& shape = marginals.shape();
  const std::size_t n = shape.sites();
  if (marginals.empty()) throw ValidationError("empty marginal set");
  const std::size_t k = marginals[0].parties.size();
  const auto family = k_subsets(n, k);
  std::set<PartySubset> have;
  for (const auto& e : marginals) {
    if (e.parties.size() != k) {
      throw ValidationError("analytic formula needs marginals of a single size k");
    }
    have.insert(e.parties);
  }
  if (have.size() != family.size()) {
    throw ValidationError("analytic formula needs all " + std::to_string(family.size()) + " " +
                          std::to_string(k) + "-body marginals; got " + std::to_string(have.size()));
  }
  const auto coeffs = uniform_coefficients(n, k);
  if (!coeffs) {
    throw ValidationError("no analytic formula for n=" + std::to_string(n) + ", k=" + std::to_string(k));
  }

  auto out = HermitianOperator::maximally_mixed(shape);
  out *= (*coeffs)[0];
  for (std::size_t t = 1; t <= k; ++t) {
    const double c = (*coeffs)[t];
    for (const auto& x : k_subsets(n, t)) {
      const Marginal* src = nullptr;
      for (const auto& e : marginals) {
        if (x.is_subset_of(e.parties)) {
          src = &e;
          break;
        }
      }
      const auto sigma_x = detail::reduce_marginal(src->state, src->parties, x);
      SubsystemSplit split(shape, x);
      split.add_embedded(out.mutable_matrix(), sigma_x.matrix(),
                         c / static_cast<double>(split.complement_dim()));
    }
  }
  return out;
}

/// Distinct nonempty party sets among all intersections of the supports
/// (closure of the family under pairwise intersection).
inline std::vector<PartySubset> realized_intersections(const std::vector<PartySubset>& subsets) {
  std::set<PartySubset> closure;
  for (const auto& s : subsets) {
    if (!s.empty()) closure.insert(s);
  }
  std::vector<PartySubset> frontier(closure.begin(), closure.end());
  while (!frontier.empty()) {
    std::vector<PartySubset> next;
    for (const auto& f : frontier) {
      for (const auto& s : subsets) {
        auto x = intersect(f, s);
        if (!x.empty() && closure.insert(x).second) next.push_back(std::move(x));
      }
    }
    frontier = std::move(next);
  }
  return {closure.begin(), closure.end()};
}

/// Smallest depolarizing strength guaranteeing Q(I/d) >= 0:
/// max(0, 1 - 1/(|J|(d-1))) with |J| the number of realized intersections.
inline double epsilon_star(const MarginalSet& marginals) {
  const auto count = realized_intersections(marginals.subsets()).size();
  if (count == 0) return 0.0;
  const double d = static_cast<double>(marginals.shape().total_dim());
  return std::max(0.0, 1.0 - 1.0 / (static_cast<double>(count) * (d - 1.0)));
}

/// (1 - |J|(1-eps)(d-1))/d, the guaranteed lower bound on lambda_min(Q(I/d))
/// after depolarizing at strength eps.
inline double depolarized_lambda_min_bound(const MarginalSet& marginals, double eps) {
  const auto count = static_cast<double>(realized_intersections(marginals.subsets()).size());
  const double d = static_cast<double>(marginals.shape().total_dim());
  return (1.0 - count * (1.0 - eps) * (d - 1.0)) / d;
}

/// (1-eps) sigma + eps I/d_J applied to every marginal.
inline MarginalSet depolarize_set(const MarginalSet& marginals, double eps) {
  if (!(eps >= 0.0 && eps <= 1.0)) {
    throw ValidationError("depolarizing strength must lie in [0, 1], got " + std::to_string(eps));
  }
  MarginalSet out(marginals.shape());
  for (const auto& e : marginals) {
    auto mixed = HermitianOperator::maximally_mixed(e.state.shape());
    auto op = (1.0 - eps) * e.state.op() + eps * mixed;
    out.add(e.parties, DensityMatrix::from_trusted(std::move(op)));
  }
  return out;
}

struct MixedReconstruction {
  bool success = false;
  double lambda_min = 0.0;
  double psd_tol = 0.0;
  HermitianOperator candidate;        // Q(I/d) before certification
  std::optional<DensityMatrix> state;  // set on success
  double max_marginal_error = 0.0;    // max hs_distance_sq over listed marginals, on success
  bool consistency_warning = false;   // marginals were not self-consistent
  ConsistencyReport consistency;
};

/// Evaluates Q(I/d). On lambda_min >= -psd_tol the candidate is clamped to the
/// PSD cone, renormalized and returned as a state.
inline MixedReconstruction mixed_reconstruct(const MarginalSet& marginals,
                                             std::optional<double> psd_tol = std::nullopt,
                                             double consistency_tol = 1e-8) {
  MixedReconstruction r;
  r.psd_tol = psd_tol.value_or(default_psd_tol(marginals.shape()));
  r.consistency = check_self_consistency(marginals, consistency_tol);
  r.consistency_warning = !r.consistency.pass;
  r.candidate = impose_all(HermitianOperator::maximally_mixed(marginals.shape()), marginals);

  const auto spec = hermitian_eig(r.candidate);
  r.lambda_min = spec.values.minCoeff();
  if (!(r.lambda_min >= -r.psd_tol)) return r;

  HermitianOperator certified = r.candidate;
  if (r.lambda_min < 0.0) {
    const RealVector clamped = spec.values.cwiseMax(0.0);
    certified = HermitianOperator(marginals.shape(),
                                  spec.vectors * clamped.asDiagonal() * spec.vectors.adjoint());
  }
  certified.mutable_matrix() = detail::symmetrized(certified.matrix());
  certified *= 1.0 / certified.trace();
  r.state = DensityMatrix::from_trusted(std::move(certified));
  for (const auto& e : marginals) {
    r.max_marginal_error =
        std::max(r.max_marginal_error, hs_distance_sq(partial_trace(*r.state, e.parties), e.state));
  }
  r.success = true;
  return r;
}

struct ConstraintCounts {
  std::uint64_t standard = 0;    // d^{2k} C(n,k): Bloch components of all k-body marginals
  std::uint64_t compressed = 0;  // d^{2n}: entries of the single fixed-point equation
  std::int64_t advantage() const {
    return static_cast<std::int64_t>(standard) - static_cast<std::int64_t>(compressed);
  }
};

namespace detail {

inline std::uint64_t checked_mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = 0;
  if (__builtin_mul_overflow(a, b, &r)) throw ValidationError("constraint count overflows 64 bits");
  return r;
}

inline std::uint64_t checked_pow(std::uint64_t base, std::uint64_t e) {
  std::uint64_t r = 1;
  for (std::uint64_t i = 0; i < e; ++i) r = checked_mul(r, base);
  return r;
}

inline std::uint64_t binomial(std::uint64_t n, std::uint64_t k) {
  std::uint64_t r = 1;
  for (std::uint64_t i = 1; i <= k; ++i) r = checked_mul(r, n - k + i) / i;
  return r;
}

}  // namespace detail

inline ConstraintCounts constraint_counts(std::size_t n, std::size_t k, std::size_t local_dim = 2) {
  if (!(k >= 1 && k < n)) throw ValidationError("constraint counts need 1 <= k < n");
  if (local_dim < 2) throw ValidationError("local dimension must be >= 2");
  ConstraintCounts c;
  c.standard = detail::checked_mul(detail::checked_pow(local_dim, 2 * k), detail::binomial(n, k));
  c.compressed = detail::checked_pow(local_dim, 2 * n);
  if (c.standard > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max()) ||
      c.compressed > static_cast<std::uint64_t>(std::numeric_limits<std::int64_t>::max())) {
    throw ValidationError("constraint count overflows 63 bits");
  }
  return c;
}

}  // namespace qmarg
