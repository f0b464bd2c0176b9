#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>

#include "test_support.hpp"

using namespace qmarg;
using namespace qmarg::testing;

namespace {

HermitianOperator embedded(const HermitianOperator& op, const SystemShape& s, const PartySubset& j) {
  return embed(op, s, j);
}

}  // namespace

TEST(ImposeOne, FixedPointWhenMarginalAlreadyCarried) {
  RngStream rng(11, 0);
  const auto s = SystemShape::qubits(3);
  const auto rho = sample_hs_state(s, rng);
  const PartySubset j{0, 2};
  const auto out = impose_one(rho.op(), j, partial_trace(rho, j));
  EXPECT_LT(max_abs(out.matrix() - rho.matrix()), 1e-14);
}

TEST(ImposeOne, ImposesOnMaximallyMixed) {
  RngStream rng(12, 0);
  const auto s = SystemShape({2, 3, 2});
  const PartySubset j{1, 2};
  const auto sigma = sample_hs_state(s.restrict(j), rng);
  const auto out = impose_one(HermitianOperator::maximally_mixed(s), j, sigma);
  EXPECT_LT(max_abs(partial_trace(out, j).matrix() - sigma.matrix()), 1e-14);
  EXPECT_NEAR(out.trace(), 1.0, 1e-14);
}

TEST(ImposeOne, ImpositionIdempotenceAndNonDisturbance) {
  RngStream rng(13, 0);
  for (int t = 0; t < 20; ++t) {
    const auto s = SystemShape::qubits(4);
    const auto rho = sample_hs_state(s, rng);
    const auto j = random_subset(4, rng);
    const auto sigma = sample_hs_state(s.restrict(j), rng);
    const auto once = impose_one(rho.op(), j, sigma);
    const auto twice = impose_one(once, j, sigma);
    EXPECT_LT(max_abs(once.matrix() - twice.matrix()), 1e-12);
    EXPECT_LT(max_abs(partial_trace(once, j).matrix() - sigma.matrix()), 1e-12);
    EXPECT_NEAR(once.trace(), 1.0, 1e-12);
    const auto k = j.complement(4);
    if (!k.empty()) {
      EXPECT_LT(max_abs(partial_trace(once, k).matrix() - partial_trace(rho, k).matrix()), 1e-12);
    }
  }
}

TEST(ImposeOne, ShapeMismatch) {
  const auto s = SystemShape::qubits(3);
  EXPECT_THROW(impose_one(HermitianOperator::maximally_mixed(s), PartySubset{0, 1},
                          DensityMatrix::maximally_mixed(SystemShape::qubits(1))),
               ShapeError);
}

TEST(ImposeAll, SelfConsistentSetIsOrderIndependent) {
  RngStream rng(14, 0);
  const auto s = SystemShape::qubits(4);
  const auto gen = sample_hs_state(s, rng);
  const auto m = marginals_of(gen, k_subsets(4, 2));
  const auto rho = sample_hs_state(s, rng);
  std::vector<std::size_t> a(m.size()), b(m.size());
  std::iota(a.begin(), a.end(), 0);
  std::iota(b.begin(), b.end(), 0);
  std::shuffle(b.begin(), b.end(), rng.engine());
  std::reverse(a.begin(), a.end());
  const auto ra = impose_all(rho.op(), m, a);
  const auto rb = impose_all(rho.op(), m, b);
  EXPECT_LT(max_abs(ra.matrix() - rb.matrix()), 1e-12);
  for (const auto& e : m) {
    EXPECT_LT(max_abs(partial_trace(ra, e.parties).matrix() - e.state.matrix()), 1e-12);
  }
}

TEST(ImposeAll, NonOverlappingSum) {
  RngStream rng(15, 0);
  const auto s = SystemShape({2, 3, 2});
  const PartySubset j1{0}, j2{1, 2};
  MarginalSet m(s);
  m.add(j1, sample_hs_state(s.restrict(j1), rng));
  m.add(j2, sample_hs_state(s.restrict(j2), rng));
  const auto rho = sample_hs_state(s, rng);
  const auto expected = rho.op() - (embedded(partial_trace(rho, j1), s, j1) + embedded(partial_trace(rho, j2), s, j2)) +
                        (embedded(m[0].state, s, j1) + embedded(m[1].state, s, j2));
  EXPECT_LT(max_abs(impose_all(rho.op(), m).matrix() - expected.matrix()), 1e-14);
}

TEST(ImposeAll, GeneratorIsFixedPoint) {
  RngStream rng(16, 0);
  const auto s = SystemShape::qubits(4);
  const auto gen = sample_hs_state(s, rng);
  const auto m = marginals_of(gen, k_subsets(4, 3));
  EXPECT_LT(max_abs(impose_all(gen.op(), m).matrix() - gen.matrix()), 1e-13);
  EXPECT_LT(fixed_point_residual(gen, m), 1e-12);
}

TEST(ImposeAll, RejectsBadOrder) {
  const auto s = SystemShape::qubits(3);
  const auto m = maximally_mixed_marginals(s, 2);
  const std::vector<std::size_t> dup{0, 0, 1};
  EXPECT_THROW(impose_all(HermitianOperator::maximally_mixed(s), m, dup), ValidationError);
}

TEST(IntersectionTerms, SignsFollowCardinality) {
  const auto terms = intersection_terms({PartySubset{0, 1}, PartySubset{1, 2}, PartySubset{0, 2}});
  ASSERT_EQ(terms.size(), 7u);
  for (const auto& t : terms) {
    EXPECT_EQ(t.sign, t.index_subset.size() % 2 ? -1 : 1);
  }
  // {J1 n J2} = {1}; all three intersect to the empty set.
  EXPECT_EQ(terms[2].parties, PartySubset{1});
  EXPECT_TRUE(terms[6].parties.empty());
}

TEST(ClosedForm, ThreePartyChainExplicit) {
  RngStream rng(17, 0);
  const auto s = SystemShape::qubits(3);
  const auto gen = sample_hs_state(s, rng);
  const PartySubset ab{0, 1}, bc{1, 2}, b{1};
  const auto m = marginals_of(gen, {ab, bc});
  const auto rho = sample_hs_state(s, rng);
  auto emb = [&](const HermitianOperator& op, const PartySubset& j) { return embed(op, s, j); };
  const auto explicit_form = rho.op() - (emb(partial_trace(rho, ab), ab) - emb(m[0].state, ab)) -
                             (emb(partial_trace(rho, bc), bc) - emb(m[1].state, bc)) +
                             (emb(partial_trace(rho, b), b) - emb(partial_trace(gen, b), b));
  const auto seq = impose_all(rho.op(), m);
  EXPECT_LT(max_abs(explicit_form.matrix() - seq.matrix()), 1e-14);
  EXPECT_LT(max_abs(closed_form(rho, m).matrix() - seq.matrix()), 1e-14);
}

TEST(ClosedForm, SingleMarginalAndDisjoint) {
  RngStream rng(18, 0);
  const auto s = SystemShape::qubits(3);
  const auto rho = sample_hs_state(s, rng);
  MarginalSet one(s);
  one.add(PartySubset{1}, sample_hs_state(SystemShape::qubits(1), rng));
  EXPECT_LT(max_abs(closed_form(rho, one).matrix() - impose_one(rho.op(), PartySubset{1}, one[0].state).matrix()),
            1e-15);
  MarginalSet disj(s);
  disj.add(PartySubset{0}, sample_hs_state(SystemShape::qubits(1), rng));
  disj.add(PartySubset{1, 2}, sample_hs_state(SystemShape::qubits(2), rng));
  EXPECT_LT(max_abs(closed_form(rho, disj).matrix() - impose_all(rho.op(), disj).matrix()), 1e-14);
}

TEST(ClosedForm, MatchesSequentialForInconsistentAndUnnormalizedInputs) {
  RngStream rng(19, 0);
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = 3 + t % 2;
    const auto s = SystemShape::qubits(n);
    const auto subsets = random_subsets(n, 1 + t % 6, rng);
    const auto m = random_inconsistent_set(s, subsets, rng);
    const auto rho = random_hermitian(s, rng);
    EXPECT_LT(std::sqrt(hs_distance_sq(closed_form(rho, m), impose_all(rho, m))), 1e-10);
  }
}

TEST(ClosedForm, RefusesOverLimit) {
  const auto s = SystemShape::qubits(3);
  const auto m = maximally_mixed_marginals(s, 2);
  EXPECT_THROW(closed_form(HermitianOperator::maximally_mixed(s), m, 2), ValidationError);
}

TEST(SelfConsistency, GeneratorMarginalsPass) {
  RngStream rng(20, 0);
  const auto gen = sample_hs_state(SystemShape::qubits(4), rng);
  const auto rep = check_self_consistency(marginals_of(gen, k_subsets(4, 2)));
  EXPECT_TRUE(rep.pass);
  EXPECT_LT(rep.worst_distance, 1e-20);
  EXPECT_FALSE(rep.per_pair.empty());
}

TEST(SelfConsistency, MismatchedPairFails) {
  const auto s = SystemShape::qubits(3);
  MarginalSet m(s);
  m.add(PartySubset{0, 1}, DensityMatrix::pure(SystemShape::qubits(2), basis(4, 0)));
  m.add(PartySubset{1, 2}, DensityMatrix::pure(SystemShape::qubits(2), basis(4, 3)));
  const auto rep = check_self_consistency(m);
  EXPECT_FALSE(rep.pass);
  EXPECT_NEAR(rep.worst_distance, 2.0, 1e-15);
  ASSERT_TRUE(rep.worst_pair.has_value());
  EXPECT_EQ(rep.worst_pair->first, 0u);
  EXPECT_EQ(rep.worst_pair->second, 1u);
}

TEST(SelfConsistency, DisjointPassesVacuously) {
  RngStream rng(21, 0);
  const auto s = SystemShape::qubits(4);
  const auto m = random_inconsistent_set(s, {PartySubset{0}, PartySubset{1, 2}, PartySubset{3}}, rng);
  const auto rep = check_self_consistency(m);
  EXPECT_TRUE(rep.pass);
  EXPECT_TRUE(rep.per_pair.empty());
}

TEST(FixedPointResidual, IdentityAndPositivity) {
  RngStream rng(22, 0);
  const auto s = SystemShape::qubits(3);
  const auto gen = sample_haar_pure(s, rng);
  const auto m = marginals_of(gen, k_subsets(3, 2));
  const auto mixed = HermitianOperator::maximally_mixed(s);
  const double r = fixed_point_residual(mixed, m);
  EXPECT_GT(r, 1e-3);
  EXPECT_DOUBLE_EQ(r, std::sqrt(hs_distance_sq(impose_all(mixed, m), mixed)));
}

TEST(AnalyticUniform, XiValues) {
  EXPECT_DOUBLE_EQ(xi(3), 1.0);
  EXPECT_DOUBLE_EQ(xi(4), 3.0);
  const auto c = uniform_coefficients(5, 3);
  ASSERT_TRUE(c.has_value());
  EXPECT_EQ(*c, (std::vector<double>{-4.0, 3.0, -2.0, 1.0}));
  EXPECT_FALSE(uniform_coefficients(6, 3).has_value());
}

TEST(AnalyticUniform, TwoQubitSingleBodyExplicit) {
  RngStream rng(23, 0);
  const auto s = SystemShape::qubits(2);
  const auto gen = sample_hs_state(s, rng);
  const auto m = marginals_of(gen, k_subsets(2, 1));
  const Matrix i2 = Matrix::Identity(2, 2) / 2.0;
  const Matrix expected = kron(m[0].state.matrix(), i2) + kron(i2, m[1].state.matrix()) - Matrix::Identity(4, 4) / 4.0;
  EXPECT_LT(max_abs(analytic_uniform(m).matrix() - expected), 1e-15);
  EXPECT_LT(max_abs(impose_all(HermitianOperator::maximally_mixed(s), m).matrix() - expected), 1e-15);
}

TEST(AnalyticUniform, MatchesSequentialOnListedCells) {
  RngStream rng(24, 0);
  const std::vector<std::pair<std::size_t, std::size_t>> cells{{2, 1}, {3, 1}, {4, 1}, {3, 2},
                                                               {4, 2}, {5, 2}, {5, 3}};
  for (auto [n, k] : cells) {
    const auto s = SystemShape::qubits(n);
    const auto gen = sample_hs_state(s, rng);
    const auto m = marginals_of(gen, k_subsets(n, k));
    const auto a = analytic_uniform(m);
    EXPECT_LT(max_abs(a.matrix() - impose_all(HermitianOperator::maximally_mixed(s), m).matrix()), 1e-10)
        << n << "," << k;
    EXPECT_NEAR(a.trace(), 1.0, 1e-12);
  }
}

TEST(AnalyticUniform, RefusesIncompleteFamily) {
  const auto s = SystemShape::qubits(3);
  MarginalSet m(s);
  m.add(PartySubset{0, 1}, DensityMatrix::maximally_mixed(SystemShape::qubits(2)));
  EXPECT_THROW(analytic_uniform(m), ValidationError);
}

TEST(EpsilonStar, FormulaValues) {
  MarginalSet one(SystemShape::qubits(2));
  one.add(PartySubset{0}, DensityMatrix::maximally_mixed(SystemShape::qubits(1)));
  EXPECT_NEAR(epsilon_star(one), 2.0 / 3.0, 1e-15);

  const auto tri = maximally_mixed_marginals(SystemShape::qubits(3), 2);
  EXPECT_EQ(realized_intersections(tri.subsets()).size(), 6u);
  EXPECT_NEAR(epsilon_star(tri), 1.0 - 1.0 / 42.0, 1e-15);

  const std::vector<PartySubset> disjoint{PartySubset{0}, PartySubset{1, 2}, PartySubset{3}};
  EXPECT_EQ(realized_intersections(disjoint).size(), 3u);
}

TEST(EpsilonStar, FullyDepolarizedAdmitsMaximallyMixed) {
  RngStream rng(25, 0);
  const auto s = SystemShape::qubits(3);
  const auto m = depolarize_set(marginals_of(sample_haar_pure(s, rng), k_subsets(3, 2)), 1.0);
  const auto r = mixed_reconstruct(m);
  ASSERT_TRUE(r.success);
  EXPECT_LT(max_abs(r.state->matrix() - Matrix::Identity(8, 8) / 8.0), 1e-15);
}

TEST(DepolarizeSet, EndpointsAndConsistency) {
  RngStream rng(26, 0);
  const auto s = SystemShape::qubits(4);
  const auto m = marginals_of(sample_hs_state(s, rng), k_subsets(4, 3));
  const auto same = depolarize_set(m, 0.0);
  for (std::size_t i = 0; i < m.size(); ++i) {
    EXPECT_LT(max_abs(same[i].state.matrix() - m[i].state.matrix()), 1e-16);
  }
  const auto full = depolarize_set(m, 1.0);
  for (const auto& e : full) EXPECT_LT(max_abs(e.state.matrix() - Matrix::Identity(8, 8) / 8.0), 1e-16);
  EXPECT_TRUE(check_self_consistency(depolarize_set(m, 0.37)).pass);
  EXPECT_THROW(depolarize_set(m, 1.5), ValidationError);
  EXPECT_THROW(depolarize_set(m, -0.1), ValidationError);
}

TEST(MixedReconstruct, MaximallyMixedMarginals) {
  const auto s = SystemShape::qubits(4);
  const auto r = mixed_reconstruct(maximally_mixed_marginals(s, 2));
  ASSERT_TRUE(r.success);
  EXPECT_LT(max_abs(r.state->matrix() - Matrix::Identity(16, 16) / 16.0), 1e-15);
}

TEST(MixedReconstruct, FiveQubitTwoBodySucceeds) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    RngStream rng(27, seed);
    const auto m = marginals_of(sample_hs_state(SystemShape::qubits(5), rng), k_subsets(5, 2));
    const auto r = mixed_reconstruct(m);
    ASSERT_TRUE(r.success);
    EXPECT_LT(r.max_marginal_error, 1e-8);
    EXPECT_FALSE(r.consistency_warning);
  }
}

TEST(MixedReconstruct, FourQubitThreeBodyTypicallyFails) {
  std::size_t failures = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    RngStream rng(28, seed);
    const auto m = marginals_of(sample_hs_state(SystemShape::qubits(4), rng), k_subsets(4, 3));
    const auto r = mixed_reconstruct(m);
    if (!r.success) {
      ++failures;
      EXPECT_LT(r.lambda_min, -r.psd_tol);
      EXPECT_FALSE(r.state.has_value());
    }
  }
  EXPECT_GE(failures, 19u);
}

TEST(MixedReconstruct, FlagsInconsistentInput) {
  const auto s = SystemShape::qubits(3);
  MarginalSet m(s);
  m.add(PartySubset{0, 1}, DensityMatrix::pure(SystemShape::qubits(2), basis(4, 0)));
  m.add(PartySubset{1, 2}, DensityMatrix::pure(SystemShape::qubits(2), basis(4, 3)));
  EXPECT_TRUE(mixed_reconstruct(m).consistency_warning);
}

TEST(ConstraintCounts, Values) {
  const auto c = constraint_counts(10, 8, 2);
  EXPECT_EQ(c.standard, 2949120u);
  EXPECT_EQ(c.compressed, 1048576u);
  EXPECT_EQ(c.advantage(), 1900544);
  EXPECT_GT(c.advantage(), 1 << 14);
  const auto weak = constraint_counts(6, 2, 2);
  EXPECT_EQ(weak.standard, 240u);
  EXPECT_EQ(weak.compressed, 4096u);
  EXPECT_LT(weak.advantage(), 0);
  EXPECT_EQ(constraint_counts(4, 2, 3).standard, 81u * 6u);
  EXPECT_THROW(constraint_counts(4, 4, 2), ValidationError);
  EXPECT_THROW(constraint_counts(40, 20, 2), ValidationError);
}

TEST(DepolarizeSet, LambdaMinBoundHolds) {
  RngStream rng(29, 0);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 3 + t % 2;
    const auto s = SystemShape::qubits(n);
    const auto subsets = random_subsets(n, 1 + t % 5, rng);
    const auto gen = sample_haar_pure(s, rng);
    const auto m = marginals_of(gen, subsets);
    for (double eps : {0.0, 0.5, 0.9, epsilon_star(m), 1.0}) {
      const auto dm = depolarize_set(m, eps);
      const double lmin = lambda_min(impose_all(HermitianOperator::maximally_mixed(s), dm));
      EXPECT_GE(lmin, depolarized_lambda_min_bound(m, eps) - 1e-12) << t << " eps=" << eps;
    }
    EXPECT_GE(lambda_min(impose_all(HermitianOperator::maximally_mixed(s), depolarize_set(m, epsilon_star(m)))),
              -1e-12);
  }
}

TEST(Imposition, ConsistentPairCommutes) {
  RngStream rng(30, 0);
  const auto s = SystemShape::qubits(3);
  const auto gen = sample_hs_state(s, rng);
  const PartySubset a{0, 1}, b{1, 2};
  const auto sa = partial_trace(gen, a), sb = partial_trace(gen, b);
  const auto rho = random_hermitian(s, rng);
  const auto ab = impose_one(impose_one(rho, b, sb), a, sa);
  const auto ba = impose_one(impose_one(rho, a, sa), b, sb);
  EXPECT_LT(max_abs(ab.matrix() - ba.matrix()), 1e-14);
}

TEST(Imposition, InconsistentPairCommutatorIsEmbeddedMismatch) {
  RngStream rng(31, 0);
  const auto s = SystemShape({2, 3, 2});
  const PartySubset a{0, 1}, b{1, 2}, x{1};
  const auto sa = sample_hs_state(s.restrict(a), rng);
  const auto sb = sample_hs_state(s.restrict(b), rng);
  const auto rho = random_hermitian(s, rng);
  const auto ab = impose_one(impose_one(rho, b, sb), a, sa);
  const auto ba = impose_one(impose_one(rho, a, sa), b, sb);
  const auto delta = partial_trace(sa, PartySubset{1}) - partial_trace(sb, PartySubset{0});
  const auto comm = ab - ba;
  EXPECT_LT(max_abs(comm.matrix() - embed(delta, s, x).matrix()), 1e-14);
  const double mismatch = hs_distance_sq(partial_trace(sa, PartySubset{1}), partial_trace(sb, PartySubset{0}));
  EXPECT_NEAR(comm.matrix().norm(), std::sqrt(mismatch / 4.0), 1e-14);
}

TEST(ImposeAll, AffineOverConvexCombinations) {
  RngStream rng(32, 0);
  const auto s = SystemShape::qubits(4);
  const auto m = random_inconsistent_set(s, random_subsets(4, 3, rng), rng);
  for (double lam : {0.0, 0.3, 1.0}) {
    const auto a = sample_hs_state(s, rng), b = sample_hs_state(s, rng);
    const auto lhs = impose_all(lam * a.op() + (1.0 - lam) * b.op(), m);
    const auto rhs = lam * impose_all(a, m) + (1.0 - lam) * impose_all(b, m);
    EXPECT_LT(max_abs(lhs.matrix() - rhs.matrix()), 1e-14);
  }
}
