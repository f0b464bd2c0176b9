#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "qmarg/imposition.hpp"
#include "qmarg/reconstruct.hpp"
#include "qmarg/sampling.hpp"

namespace qmarg {

struct FractionOptions {
  std::uint64_t master_seed = 0;
  std::optional<double> psd_tol;  // default 1e-10 * d
  std::size_t threads = 1;
  bool allow_large = false;       // required for n > 10
  std::size_t spot_checks = 10;   // successes re-certified with mixed_reconstruct
};

struct FractionResult {
  std::size_t n = 0;
  std::size_t k = 0;
  std::size_t samples = 0;
  std::size_t successes = 0;
  double fraction = 0.0;
  double psd_tol = 0.0;
  std::uint64_t master_seed = 0;
  double wall_time = 0.0;  // seconds
  std::size_t spot_checked = 0;
  double spot_check_max_error = 0.0;  // max hs_distance_sq between certified and generator marginals
};

/// Rough peak memory (bytes) of one fraction sample on n qubits: the
/// generator, its Ginibre factor, the candidate and eigensolver workspace.
inline double fraction_memory_estimate(std::size_t n) {
  const double d = std::ldexp(1.0, static_cast<int>(n));
  return 6.0 * d * d * sizeof(Complex);
}

inline constexpr std::size_t kMaxFractionQubits = 12;

/// Fraction of Hilbert-Schmidt random n-qubit generators whose complete k-body
/// marginal family makes Q(I/d) positive semidefinite. Sample i draws from
/// stream (master_seed, i), so results do not depend on the thread count.
inline FractionResult fraction_experiment(std::size_t n, std::size_t k, std::size_t samples,
                                          const FractionOptions& opt = {}) {
  if (!(k >= 1 && k < n)) throw ValidationError("fraction experiment needs 1 <= k < n");
  if (samples < 1) throw ValidationError("samples must be >= 1");
  if (n > kMaxFractionQubits || (n > 10 && !opt.allow_large)) {
    throw ValidationError("n=" + std::to_string(n) + " needs about " +
                          std::to_string(fraction_memory_estimate(n) / 1e9) +
                          " GB per worker" +
                          (n > kMaxFractionQubits ? std::string(" (limit is 12 qubits)")
                                                  : std::string("; pass --allow-large")));
  }
  const auto shape = SystemShape::qubits(n);
  const auto subsets = k_subsets(n, k);
  FractionResult res;
  res.n = n;
  res.k = k;
  res.samples = samples;
  res.master_seed = opt.master_seed;
  res.psd_tol = opt.psd_tol.value_or(default_psd_tol(shape));

  const auto start = std::chrono::steady_clock::now();
  std::vector<char> ok(samples, 0);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    const auto mixed = HermitianOperator::maximally_mixed(shape);
    for (std::size_t i = next++; i < samples; i = next++) {
      RngStream rng(opt.master_seed, i);
      const auto gen = sample_hs_state(shape, rng);
      const auto marg = marginals_of(gen, subsets);
      const auto cand = impose_all(mixed, marg);
      ok[i] = lambda_min(cand) >= -res.psd_tol ? 1 : 0;
    }
  };
  const std::size_t nt = std::max<std::size_t>(1, std::min(opt.threads, samples));
  if (nt == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < nt; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (char c : ok) res.successes += static_cast<std::size_t>(c);
  res.fraction = static_cast<double>(res.successes) / static_cast<double>(samples);

  for (std::size_t i = 0; i < samples && res.spot_checked < opt.spot_checks; ++i) {
    if (!ok[i]) continue;
    RngStream rng(opt.master_seed, i);
    const auto gen = sample_hs_state(shape, rng);
    const auto marg = marginals_of(gen, subsets);
    const auto mr = mixed_reconstruct(marg, res.psd_tol);
    if (!mr.success) throw NumericError("spot check of sample " + std::to_string(i) + " disagrees");
    res.spot_check_max_error = std::max(res.spot_check_max_error, mr.max_marginal_error);
    ++res.spot_checked;
  }
  res.wall_time =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

struct AmeOptions {
  double eps = 1e-7;
  std::size_t max_iters = 10000;
  std::size_t stall_window = 500;
  std::size_t starts = 10;  // random restarts
  std::uint64_t master_seed = 0;
  std::size_t trace_stride = 1;
};

struct AmeResult {
  ReconstructionReport report;  // the converged run, or the last attempt
  std::size_t starts_used = 0;
  std::uint64_t stream_id = 0;  // stream of the reported run
  bool certified = false;
  double purity = 0.0;
  double max_half_body_distance = 0.0;  // max hs_distance_sq to I/d over floor(n/2)-body marginals
};

/// Searches for a pure state whose k-body marginals are all maximally mixed,
/// restarting from Hilbert-Schmidt random seeds. A converged state is
/// certified by purity > 1 - 10 eps and maximally mixed floor(n/2)-body
/// marginals within 10 eps.
inline AmeResult ame_search(std::size_t n, std::size_t local_dim, std::size_t k,
                            const AmeOptions& opt = {}) {
  if (!(k >= 1 && k < n)) throw ValidationError("AME search needs 1 <= k < n");
  const auto shape = SystemShape::uniform(n, local_dim);
  const auto targets = maximally_mixed_marginals(shape, k);
  AmeResult res;
  const std::size_t starts = std::max<std::size_t>(1, opt.starts);
  for (std::size_t s = 0; s < starts; ++s) {
    ReconstructionConfig cfg;
    cfg.marginals = targets;
    cfg.rank = 1;
    cfg.eps = opt.eps;
    cfg.max_iters = opt.max_iters;
    cfg.stall_window = opt.stall_window;
    cfg.seed = RandomHsSeed{};
    cfg.rng = RngStream(opt.master_seed, s);
    cfg.trace_stride = opt.trace_stride;
    res.report = run(std::move(cfg));
    res.starts_used = s + 1;
    res.stream_id = s;
    if (res.report.converged) break;
  }
  const auto& st = res.report.final_state;
  res.purity = st.purity();
  for (const auto& j : k_subsets(n, n / 2)) {
    const auto mm = HermitianOperator::maximally_mixed(shape.restrict(j));
    res.max_half_body_distance = std::max(res.max_half_body_distance, hs_distance_sq(partial_trace(st, j), mm));
  }
  res.certified = res.report.converged && res.purity > 1.0 - 10.0 * opt.eps &&
                  res.max_half_body_distance < 10.0 * opt.eps;
  return res;
}

struct IdentityCheck {
  std::size_t n = 0;
  std::size_t k = 0;
  double deviation = 0.0;     // max |entry| of analytic - sequential
  double trace = 0.0;         // trace of the analytic expression
  double coefficient0 = 0.0;  // coefficient of I/d (xi for k = 2)
};

struct IdentityReport {
  std::vector<IdentityCheck> checks;
  double max_deviation = 0.0;
  bool pass(double tol = 1e-10) const {
    return std::all_of(checks.begin(), checks.end(), [&](const IdentityCheck& c) {
      return c.deviation < tol && std::abs(c.trace - 1.0) < tol;
    });
  }
};

/// Compares the analytic uniform-family expressions with sequential
/// imposition on I/d for k = 1 (n = 2..max_n), k = 2 (n = 3..max_n) and
/// (n, k) = (5, 3), using Hilbert-Schmidt random generators.
inline IdentityReport verify_identities(std::size_t max_n = 6, std::uint64_t master_seed = 0) {
  if (max_n > 6) throw ValidationError("verify_identities supports max_n <= 6");
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (std::size_t n = 2; n <= max_n; ++n) cells.emplace_back(n, 1);
  for (std::size_t n = 3; n <= max_n; ++n) cells.emplace_back(n, 2);
  if (max_n >= 5) cells.emplace_back(5, 3);

  IdentityReport rep;
  std::uint64_t stream = 0;
  for (auto [n, k] : cells) {
    const auto shape = SystemShape::qubits(n);
    RngStream rng(master_seed, stream++);
    const auto gen = sample_hs_state(shape, rng);
    const auto marg = marginals_of(gen, k_subsets(n, k));
    const auto analytic = analytic_uniform(marg);
    const auto sequential = impose_all(HermitianOperator::maximally_mixed(shape), marg);
    IdentityCheck c;
    c.n = n;
    c.k = k;
    c.deviation = (analytic.matrix() - sequential.matrix()).cwiseAbs().maxCoeff();
    c.trace = analytic.trace();
    c.coefficient0 = (*uniform_coefficients(n, k))[0];
    rep.max_deviation = std::max(rep.max_deviation, c.deviation);
    rep.checks.push_back(c);
  }
  return rep;
}

}  // namespace qmarg
