// qmarg: command-line driver for marginal imposition, state reconstruction
// and the positivity-fraction experiments.
//
// Exit codes: 0 success / converged / consistent, 1 infeasible / failed /
// not converged, 2 usage or validation error.

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "qmarg/qmarg.hpp"

namespace {

constexpr int kOk = 0;
constexpr int kInfeasible = 1;
constexpr int kUsage = 2;

std::vector<std::size_t> parse_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto dash = item.find('-');
    try {
      if (dash != std::string::npos && dash > 0) {
        const auto lo = std::stoul(item.substr(0, dash));
        const auto hi = std::stoul(item.substr(dash + 1));
        for (auto v = lo; v <= hi; ++v) out.push_back(v);
      } else {
        out.push_back(std::stoul(item));
      }
    } catch (const std::exception&) {
      throw qmarg::ValidationError("cannot parse integer list \"" + text + "\"");
    }
  }
  return out;
}

std::size_t thread_count(std::size_t flag) {
  if (flag > 0) return flag;
  if (const char* env = std::getenv("QMARG_THREADS")) {
    try {
      const auto v = std::stoul(env);
      if (v > 0) return v;
    } catch (const std::exception&) {
    }
    throw qmarg::ValidationError("QMARG_THREADS must be a positive integer");
  }
  return 1;
}

void print_consistency(const qmarg::ConsistencyReport& rep) {
  std::cout << "self-consistency: " << (rep.pass ? "pass" : "FAIL") << "\n";
  std::cout << "  overlapping pairs: " << rep.per_pair.size() << "\n";
  if (rep.worst_pair) {
    std::cout << "  worst pair: (" << rep.worst_pair->first << ", " << rep.worst_pair->second
              << ")  distance " << qmarg::io::detail::format_double(rep.worst_distance) << "\n";
  }
  std::cout << "  tolerance: " << rep.tol << "\n";
}

void write_trace(const std::string& path, const qmarg::ReconstructionReport& rep) {
  std::ofstream out(path);
  if (!out) throw qmarg::ValidationError("cannot write " + path);
  qmarg::io::write_trace_csv(out, rep.trace);
}

void print_report(const qmarg::ReconstructionReport& rep) {
  std::cout << "converged: " << (rep.converged ? "yes" : "no") << "\n"
            << "iterations: " << rep.iterations << "\n"
            << "stall_detected: " << (rep.stall_detected ? "yes" : "no") << "\n"
            << "D_lambda: " << rep.final_distances.d_lambda << "\n"
            << "D_M: " << rep.final_distances.d_m << "\n"
            << "D_T: " << rep.final_distances.d_t << "\n";
  if (rep.projection_fallbacks > 0) {
    std::cout << "projection_fallbacks: " << rep.projection_fallbacks << "\n";
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Quantum marginal problem toolkit: marginal imposition, reconstruction, experiments"};
  app.require_subcommand(1);
  app.fallthrough();
  std::size_t threads_flag = 0;
  app.add_option("--threads", threads_flag, "Worker threads for Monte Carlo (env QMARG_THREADS)");

  // check
  auto* check = app.add_subcommand("check", "Pairwise self-consistency of a marginal file");
  std::string check_path;
  double check_tol = 1e-8;
  check->add_option("--marginals", check_path, "Marginal file (JSON)")->required();
  check->add_option("--tol", check_tol, "Tolerance on Tr[(a-b)^2]");

  // impose
  auto* impose = app.add_subcommand("impose", "Apply the composite imposition operator");
  std::string imp_marg, imp_state, imp_out, imp_order;
  bool imp_closed = false;
  impose->add_option("--marginals", imp_marg, "Marginal file (JSON)")->required();
  impose->add_option("--state", imp_state, "Input state file (default: maximally mixed)");
  impose->add_option("--order", imp_order, "Imposition order, comma separated indices");
  impose->add_flag("--closed-form", imp_closed, "Evaluate the inclusion-exclusion form");
  impose->add_option("--out", imp_out, "Write the result here (must be a state)");

  // reconstruct
  auto* rec = app.add_subcommand("reconstruct", "Alternating imposition / rank projection");
  std::string rec_marg, rec_trace, rec_out, rec_seed_state = "mixed", rec_seed_file;
  std::size_t rec_rank = 1, rec_iters = 100000, rec_window = 500, rec_stride = 1;
  double rec_eps = 1e-7;
  std::uint64_t rec_rng = 0;
  rec->add_option("--marginals", rec_marg, "Marginal file (JSON)")->required();
  rec->add_option("--rank", rec_rank, "Rank of the target state");
  rec->add_option("--eps", rec_eps, "Stop when D_T < eps");
  rec->add_option("--max-iters", rec_iters, "Iteration budget");
  rec->add_option("--stall-window", rec_window, "Stall window (0 disables)");
  rec->add_option("--seed-state", rec_seed_state, "mixed | random | file")
      ->check(CLI::IsMember({"mixed", "random", "file"}));
  rec->add_option("--seed-file", rec_seed_file, "Seed state file for --seed-state file");
  rec->add_option("--rng-seed", rec_rng, "Master seed (decimal 64-bit)");
  rec->add_option("--trace", rec_trace, "Write iter,D_lambda,D_M,D_T CSV here");
  rec->add_option("--trace-stride", rec_stride, "Record every n-th iteration");
  rec->add_option("--out", rec_out, "Write the final state here");

  // mixed
  auto* mixed = app.add_subcommand("mixed", "Analytic reconstruction Q(I/d), optionally depolarized");
  std::string mix_marg, mix_out;
  std::optional<double> mix_eps, mix_psd;
  bool mix_auto = false;
  mixed->add_option("--marginals", mix_marg, "Marginal file (JSON)")->required();
  auto* eps_opt = mixed->add_option("--epsilon", mix_eps, "Depolarize marginals at this strength");
  mixed->add_flag("--auto-epsilon", mix_auto, "Depolarize at the guaranteed strength eps*")
      ->excludes(eps_opt);
  mixed->add_option("--psd-tol", mix_psd, "Tolerance on lambda_min (default 1e-10 d)");
  mixed->add_option("--out", mix_out, "Write the state here on success");

  // fraction
  auto* frac = app.add_subcommand("fraction", "Fraction of random generators with Q(I/d) >= 0");
  std::string frac_n, frac_k, frac_csv;
  std::optional<std::size_t> frac_samples;
  std::uint64_t frac_rng = 0;
  std::optional<double> frac_psd;
  bool frac_table = false, frac_large = false;
  frac->add_option("--n", frac_n, "Qubit counts, e.g. 5 or 3-8 or 3,5")->required();
  frac->add_option("--k", frac_k, "Marginal sizes, same syntax")->required();
  frac->add_option("--samples", frac_samples, "Generators per cell (default 1000; 100 at n=9, 10 at n>=10)");
  frac->add_option("--rng-seed", frac_rng, "Master seed (decimal 64-bit)");
  frac->add_option("--psd-tol", frac_psd, "Tolerance on lambda_min (default 1e-10 d)");
  frac->add_option("--csv", frac_csv, "Also write CSV rows to this file");
  frac->add_flag("--table", frac_table, "Print a k-by-n table");
  frac->add_flag("--allow-large", frac_large, "Permit n = 11, 12");

  // ame
  auto* ame = app.add_subcommand("ame", "Search for an absolutely maximally entangled state");
  std::size_t ame_n = 0, ame_d = 2, ame_k = 0, ame_iters = 10000, ame_starts = 10, ame_window = 500,
              ame_stride = 1;
  double ame_eps = 1e-7;
  std::uint64_t ame_rng = 0;
  std::string ame_trace, ame_out;
  ame->add_option("--n", ame_n, "Number of parties")->required();
  ame->add_option("--local-dim", ame_d, "Levels per party");
  ame->add_option("--k", ame_k, "Marginal size (default floor(n/2))");
  ame->add_option("--eps", ame_eps, "Stop when D_T < eps");
  ame->add_option("--max-iters", ame_iters, "Iteration budget per start");
  ame->add_option("--starts", ame_starts, "Random restarts");
  ame->add_option("--stall-window", ame_window, "Stall window (0 disables)");
  ame->add_option("--rng-seed", ame_rng, "Master seed (decimal 64-bit)");
  ame->add_option("--trace", ame_trace, "Write iter,D_lambda,D_M,D_T CSV here");
  ame->add_option("--trace-stride", ame_stride, "Record every n-th iteration");
  ame->add_option("--out", ame_out, "Write the final state here");

  // count
  auto* count = app.add_subcommand("count", "Scalar constraint counts, standard vs compressed");
  std::size_t cnt_n = 0, cnt_k = 0, cnt_d = 2;
  count->add_option("--n", cnt_n, "Number of parties")->required();
  count->add_option("--k", cnt_k, "Marginal size")->required();
  count->add_option("--local-dim", cnt_d, "Levels per party");

  // verify-identities
  auto* ver = app.add_subcommand("verify-identities", "Check the analytic uniform-family formulas");
  std::size_t ver_n = 6;
  std::uint64_t ver_rng = 0;
  double ver_tol = 1e-10;
  ver->add_option("--max-n", ver_n, "Largest register (<= 6)");
  ver->add_option("--rng-seed", ver_rng, "Master seed (decimal 64-bit)");
  ver->add_option("--tol", ver_tol, "Max entrywise deviation");

  // generate
  auto* gen = app.add_subcommand("generate", "Write the k-body marginals of a random or fixed state");
  std::size_t gen_n = 0, gen_d = 2, gen_k = 0;
  std::string gen_kind = "hs", gen_out, gen_state_out;
  std::uint64_t gen_rng = 0;
  gen->add_option("--n", gen_n, "Number of parties")->required();
  gen->add_option("--local-dim", gen_d, "Levels per party");
  gen->add_option("--k", gen_k, "Marginal size")->required();
  gen->add_option("--kind", gen_kind, "hs | pure | mixed (maximally mixed marginals)")
      ->check(CLI::IsMember({"hs", "pure", "mixed"}));
  gen->add_option("--rng-seed", gen_rng, "Master seed (decimal 64-bit)");
  gen->add_option("--out", gen_out, "Marginal file to write")->required();
  gen->add_option("--state-out", gen_state_out, "Also write the generator state");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    namespace io = qmarg::io;
    const std::size_t threads = thread_count(threads_flag);

    if (*check) {
      const auto m = io::load_marginals(check_path);
      const auto rep = qmarg::check_self_consistency(m, check_tol);
      print_consistency(rep);
      return rep.pass ? kOk : kInfeasible;
    }

    if (*impose) {
      const auto m = io::load_marginals(imp_marg);
      qmarg::HermitianOperator rho = imp_state.empty()
                                         ? qmarg::HermitianOperator::maximally_mixed(m.shape())
                                         : io::load_state(imp_state).op();
      qmarg::HermitianOperator out;
      if (imp_closed) {
        if (!imp_order.empty()) throw qmarg::ValidationError("--order cannot be used with --closed-form");
        out = qmarg::closed_form(rho, m);
      } else {
        const auto order = imp_order.empty() ? std::vector<std::size_t>{} : parse_list(imp_order);
        out = qmarg::impose_all(rho, m, order);
      }
      const double lmin = qmarg::lambda_min(out);
      std::cout << "trace: " << out.trace() << "\n"
                << "lambda_min: " << lmin << "\n"
                << "fixed_point_residual: " << qmarg::fixed_point_residual(out, m) << "\n";
      if (!imp_out.empty()) {
        if (lmin < -qmarg::default_psd_tol(out.shape())) {
          std::cerr << "result is not a state; nothing written to " << imp_out << "\n";
          return kInfeasible;
        }
        io::save_state(imp_out, qmarg::DensityMatrix::certify(out));
      }
      return kOk;
    }

    if (*rec) {
      qmarg::ReconstructionConfig cfg;
      cfg.marginals = io::load_marginals(rec_marg);
      cfg.rank = rec_rank;
      cfg.eps = rec_eps;
      cfg.max_iters = rec_iters;
      cfg.stall_window = rec_window;
      cfg.trace_stride = rec_stride;
      cfg.rng = qmarg::RngStream(rec_rng, 0);
      if (rec_seed_state == "random") {
        cfg.seed = qmarg::RandomHsSeed{};
      } else if (rec_seed_state == "file") {
        if (rec_seed_file.empty()) throw qmarg::ValidationError("--seed-state file needs --seed-file");
        cfg.seed = io::load_state(rec_seed_file);
      }
      const auto rep = qmarg::run(std::move(cfg));
      print_report(rep);
      if (!rec_trace.empty()) write_trace(rec_trace, rep);
      if (!rec_out.empty()) io::save_state(rec_out, rep.final_state);
      return rep.converged ? kOk : kInfeasible;
    }

    if (*mixed) {
      auto m = io::load_marginals(mix_marg);
      double eps = 0.0;
      if (mix_auto) eps = qmarg::epsilon_star(m);
      if (mix_eps) eps = *mix_eps;
      if (eps > 0.0) m = qmarg::depolarize_set(m, eps);
      const auto r = qmarg::mixed_reconstruct(m, mix_psd);
      std::cout << "epsilon: " << eps << "\n"
                << "lambda_min: " << r.lambda_min << "\n"
                << "psd_tol: " << r.psd_tol << "\n"
                << "success: " << (r.success ? "yes" : "no") << "\n";
      if (eps > 0.0) {
        std::cout << "guaranteed_lambda_min: " << qmarg::depolarized_lambda_min_bound(m, eps) << "\n";
      }
      if (r.consistency_warning) {
        std::cerr << "warning: marginals are not self-consistent (worst distance "
                  << r.consistency.worst_distance << "); result depends on imposition order\n";
      }
      if (r.success) {
        std::cout << "max_marginal_error: " << r.max_marginal_error << "\n";
        if (!mix_out.empty()) io::save_state(mix_out, *r.state);
      }
      return r.success ? kOk : kInfeasible;
    }

    if (*frac) {
      const auto ns = parse_list(frac_n);
      const auto ks = parse_list(frac_k);
      std::vector<qmarg::FractionResult> results;
      std::ofstream csv;
      if (!frac_csv.empty()) {
        csv.open(frac_csv);
        if (!csv) throw qmarg::ValidationError("cannot write " + frac_csv);
        csv << io::kFractionCsvHeader << "\n";
      }
      std::cout << io::kFractionCsvHeader << "\n";
      for (auto n : ns) {
        for (auto k : ks) {
          if (k < 1 || k >= n) continue;
          std::size_t samples = 1000;
          if (frac_samples) {
            samples = *frac_samples;
          } else if (n >= 9) {
            samples = n == 9 ? 100 : 10;
            std::cerr << "warning: n=" << n << " defaults to " << samples
                      << " samples; pass --samples to override\n";
          }
          qmarg::FractionOptions opt;
          opt.master_seed = frac_rng;
          opt.psd_tol = frac_psd;
          opt.threads = threads;
          opt.allow_large = frac_large;
          const auto r = qmarg::fraction_experiment(n, k, samples, opt);
          const auto row = io::fraction_csv_row(r);
          std::cout << row << std::endl;
          if (csv) csv << row << "\n";
          results.push_back(r);
        }
      }
      if (results.empty()) throw qmarg::ValidationError("no valid (n, k) cell with 1 <= k < n");
      if (frac_table) std::cout << "\n" << io::render_fraction_table(results);
      return kOk;
    }

    if (*ame) {
      qmarg::AmeOptions opt;
      opt.eps = ame_eps;
      opt.max_iters = ame_iters;
      opt.starts = ame_starts;
      opt.stall_window = ame_window;
      opt.master_seed = ame_rng;
      opt.trace_stride = ame_stride;
      const std::size_t k = ame_k == 0 ? ame_n / 2 : ame_k;
      const auto r = qmarg::ame_search(ame_n, ame_d, k, opt);
      std::cout << "target: AME(" << ame_n << "," << ame_d << "), all " << k << "-body marginals maximally mixed\n"
                << "starts_used: " << r.starts_used << "\n";
      print_report(r.report);
      std::cout << "purity: " << r.purity << "\n"
                << "max_half_body_distance: " << r.max_half_body_distance << "\n"
                << "certified: " << (r.certified ? "yes" : "no") << "\n";
      if (!ame_trace.empty()) write_trace(ame_trace, r.report);
      if (!ame_out.empty()) io::save_state(ame_out, r.report.final_state);
      return r.report.converged ? kOk : kInfeasible;
    }

    if (*count) {
      const auto c = qmarg::constraint_counts(cnt_n, cnt_k, cnt_d);
      std::cout << "standard: " << c.standard << "\n"
                << "compressed: " << c.compressed << "\n"
                << "advantage: " << c.advantage() << "\n";
      return kOk;
    }

    if (*ver) {
      const auto rep = qmarg::verify_identities(ver_n, ver_rng);
      std::cout << "n,k,deviation,trace,identity_coefficient\n";
      for (const auto& c : rep.checks) {
        std::cout << c.n << "," << c.k << "," << io::detail::format_double(c.deviation) << ","
                  << io::detail::format_double(c.trace) << "," << c.coefficient0 << "\n";
      }
      const bool ok = rep.pass(ver_tol);
      std::cout << "max_deviation: " << rep.max_deviation << "\n"
                << "pass: " << (ok ? "yes" : "no") << "\n";
      return ok ? kOk : kInfeasible;
    }

    if (*gen) {
      const auto shape = qmarg::SystemShape::uniform(gen_n, gen_d);
      if (gen_k < 1 || gen_k > gen_n) throw qmarg::ValidationError("--k must satisfy 1 <= k <= n");
      qmarg::MarginalSet m;
      if (gen_kind == "mixed") {
        m = qmarg::maximally_mixed_marginals(shape, gen_k);
        if (!gen_state_out.empty()) io::save_state(gen_state_out, qmarg::DensityMatrix::maximally_mixed(shape));
      } else {
        qmarg::RngStream rng(gen_rng, 0);
        const auto g = gen_kind == "hs" ? qmarg::sample_hs_state(shape, rng) : qmarg::sample_haar_pure(shape, rng);
        m = qmarg::marginals_of(g, qmarg::k_subsets(gen_n, gen_k));
        if (!gen_state_out.empty()) io::save_state(gen_state_out, g);
      }
      io::save_marginals(gen_out, m);
      std::cout << "wrote " << m.size() << " marginals to " << gen_out << "\n";
      return kOk;
    }
  } catch (const qmarg::ShapeError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const qmarg::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const qmarg::NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return kInfeasible;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  }
  return kUsage;
}
