#ifndef SPINSTAR_CLI_VERIFY_HPP
#define SPINSTAR_CLI_VERIFY_HPP

// The `verify` subcommand: cross-path and oracle property suite over seeded
// random instances, reporting the worst deviation per invariant.

#include <cmath>
#include <functional>
#include <limits>
#include <ostream>
#include <string>
#include <vector>

#include "spinstar/cli/run.hpp"
#include "spinstar/companion.hpp"
#include "spinstar/evolution.hpp"
#include "spinstar/observables.hpp"
#include "spinstar/oracle.hpp"
#include "spinstar/random.hpp"

namespace spinstar::cli {

struct VerifyOptions {
  site_t max_n = 5;
  int seeds = 5;
  std::uint64_t seed_base = 0;
  /// Applied to every A companion before use. Lets tests inject a defect.
  std::function<void(CompanionMatrix&)> mutate_a;

  static VerifyOptions quick() { return {5, 5, 0, {}}; }
  static VerifyOptions full() { return {8, 20, 0, {}}; }
};

struct InvariantResult {
  std::string name;
  double tolerance = 0.0;
  double max_deviation = 0.0;
  std::string worst;  // instance with the largest deviation
  std::size_t checks = 0;

  bool passed() const { return max_deviation <= tolerance; }

  void record(double deviation, const std::string& instance) {
    ++checks;
    if (std::isnan(deviation)) deviation = std::numeric_limits<double>::infinity();
    if (worst.empty() || deviation > max_deviation) {
      max_deviation = deviation;
      worst = instance;
    }
  }
};

struct VerifyReport {
  std::vector<InvariantResult> invariants;
  bool passed() const {
    for (const auto& r : invariants) {
      if (!r.passed()) return false;
    }
    return true;
  }
  const InvariantResult& find(const std::string& name) const {
    for (const auto& r : invariants) {
      if (r.name == name) return r;
    }
    throw validation_error("no invariant named '" + name + "'");
  }
};

/// Seeded instance: alpha_j in [0.1, 2], omega in [-1, 1], Delta in [-2, 2].
inline ModelParams verify_model(site_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> alpha(static_cast<std::size_t>(n));
  for (auto& a : alpha) a = rng.uniform(0.1, 2.0);
  const double omega = rng.uniform(-1.0, 1.0);
  const double delta = rng.uniform(-2.0, 2.0);
  return ModelParams::validate(n, omega, omega - delta, std::move(alpha));
}

/// Flips the sign of the first off-diagonal pair of a companion matrix.
inline void flip_first_off_diagonal(CompanionMatrix& m) {
  for (Eigen::Index r = 0; r < m.entries.outerSize(); ++r) {
    for (sparse_matrix::InnerIterator it(m.entries, r); it; ++it) {
      if (it.col() > r) {
        const Eigen::Index c = it.col();
        it.valueRef() = -it.value();
        m.entries.coeffRef(c, r) = -m.entries.coeff(c, r);
        return;
      }
    }
  }
}

namespace detail {

inline double block_deviation(const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  if (x.rows() != y.rows() || x.cols() != y.cols()) return std::numeric_limits<double>::infinity();
  return x.size() ? (x - y).cwiseAbs().maxCoeff() : 0.0;
}

/// Structural defects: asymmetry plus any row whose nonzero count differs
/// from 1 + size (N - size).
inline double structure_defect(const CompanionMatrix& m, site_t size) {
  const sparse_matrix t = sparse_matrix(m.entries.transpose());
  double d = m.dim() ? (Eigen::MatrixXd(m.entries) - Eigen::MatrixXd(t)).cwiseAbs().maxCoeff() : 0.0;
  const Eigen::Index want = 1 + static_cast<Eigen::Index>(size) * (m.sites - size);
  for (Eigen::Index r = 0; r < m.entries.outerSize(); ++r) {
    if (m.entries.innerVector(r).nonZeros() != want) d += 1.0;
  }
  return d;
}

inline std::vector<site_t> random_up_sites(Rng& rng, site_t n, site_t p) {
  std::vector<site_t> all;
  for (site_t j = 1; j <= n; ++j) all.push_back(j);
  for (site_t k = 0; k < p; ++k) {
    std::swap(all[static_cast<std::size_t>(k)], all[static_cast<std::size_t>(rng.uniform_int(k, n - 1))]);
  }
  std::vector<site_t> up(all.begin(), all.begin() + p);
  std::sort(up.begin(), up.end());
  return up;
}

}  // namespace detail

inline VerifyReport run_verify(const VerifyOptions& opt) {
  if (opt.max_n < 1 || opt.max_n > oracle::max_sites) {
    throw validation_error("verify: max N must lie in [1, " + std::to_string(oracle::max_sites) +
                           "], got " + std::to_string(opt.max_n));
  }
  if (opt.seeds < 1) throw validation_error("verify: seeds must be >= 1");

  InvariantResult combinatorics{"combinatorics", 0.0, 0.0, {}, 0};
  InvariantResult structure{"structure", 0.0, 0.0, {}, 0};
  InvariantResult decoupling{"decoupling", 1e-12, 0.0, {}, 0};
  InvariantResult analytic{"analytic_p0", 1e-10, 0.0, {}, 0};
  InvariantResult oracle_eq{"oracle", 1e-8, 0.0, {}, 0};
  InvariantResult first_order{"first_order", 1e-8, 0.0, {}, 0};
  InvariantResult conservation{"conservation", 1e-10, 0.0, {}, 0};

  for (site_t n = 1; n <= opt.max_n; ++n) {
    for (site_t p = 0; p <= n; ++p) {
      const SectorBasis basis(n, p);
      double bad = 0.0;
      basis.for_each([&](rank_t r, const std::vector<site_t>& sites) {
        const SpinTuple t(sites);
        if (basis.rank(t) != r || basis.unrank(r) != t) bad += 1.0;
        if (off_diagonal_neighbors(t, basis).size() != static_cast<std::size_t>(p * (n - p))) bad += 1.0;
      });
      combinatorics.record(bad, "N=" + std::to_string(n) + " p=" + std::to_string(p));
    }
  }

  const std::vector<double> times = [] {
    std::vector<double> t(21);
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = 0.5 * static_cast<double>(i);
    return t;
  }();

  for (site_t n = 1; n <= opt.max_n; ++n) {
    for (int s = 0; s < opt.seeds; ++s) {
      const std::uint64_t seed = opt.seed_base + static_cast<std::uint64_t>(n) * 1000 +
                                 static_cast<std::uint64_t>(s);
      const ModelParams model = verify_model(n, seed);
      const oracle::FullPropagator prop(model);
      Rng rng(seed);
      for (site_t p = 0; p <= n; ++p) {
        const std::string where =
            "N=" + std::to_string(n) + " p=" + std::to_string(p) + " seed=" + std::to_string(seed);
        SectorSpectra spectra = assemble_sector(model, p);
        if (opt.mutate_a) opt.mutate_a(spectra.a);

        structure.record(detail::structure_defect(spectra.a, p) +
                             (p < n ? detail::structure_defect(spectra.b, p + 1) : 0.0),
                         where);

        const Eigen::MatrixXd h(build_first_order(model, p, cli_sign));
        const Eigen::MatrixXd h2 = h * h;
        const Eigen::Index na = spectra.a.dim();
        const Eigen::Index nb = spectra.b.dim();
        double dec = detail::block_deviation(h2.topLeftCorner(na, na), spectra.a.dense());
        dec = std::max(dec, detail::block_deviation(h2.bottomRightCorner(nb, nb), spectra.b.dense()));
        if (na && nb) dec = std::max(dec, h2.topRightCorner(na, nb).cwiseAbs().maxCoeff());
        decoupling.record(dec, where);

        const InitialCondition init(model, SpinTuple(detail::random_up_sites(rng, n, p)));
        const AmplitudePair x0 = initial_state(model, init);
        Trajectory closed;
        try {
          decompose_sector(spectra);
          const AmplitudePair v0 =
              initial_derivatives(x0, spectra.coupling, model.detuning(), cli_sign);
          closed = evolve_closed_form(x0, v0, spectra.a_decomp, spectra.b_decomp, times, n, p);
        } catch (const numerical_error& e) {
          const double inf = std::numeric_limits<double>::infinity();
          oracle_eq.record(inf, where + " (" + e.what() + ")");
          continue;
        }

        const Trajectory truth = to_rotating_frame(oracle::sector_trajectory(prop, x0, p, times), model);
        oracle_eq.record(max_deviation(closed, truth), where);
        first_order.record(max_deviation(closed, evolve_first_order(model, p, x0, times, cli_sign)),
                           where);
        if (p == 0) analytic.record(max_deviation(closed, closed_form_p0(model, times, cli_sign)), where);

        double drift = 0.0;
        for (const auto& x : closed.states) drift = std::max(drift, std::abs(x.norm() - 1.0));
        drift = std::max(drift, total_sz(closed).drift());
        drift = std::max(drift, sz_central(closed).discrepancy.max_abs());
        conservation.record(drift, where);
      }
    }
  }

  return {{combinatorics, structure, decoupling, analytic, oracle_eq, first_order, conservation}};
}

inline void print_verify(std::ostream& os, const VerifyReport& report) {
  os << "invariant,status,max_deviation,tolerance,checks,worst_instance\n";
  for (const auto& r : report.invariants) {
    os << r.name << ',' << (r.passed() ? "PASS" : "FAIL") << ',' << format_real(r.max_deviation) << ','
       << format_real(r.tolerance) << ',' << r.checks << ',' << r.worst << '\n';
  }
}

inline int verify_command(const VerifyOptions& opt, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const VerifyReport report = run_verify(opt);
    print_verify(out, report);
    if (!report.passed()) {
      for (const auto& r : report.invariants) {
        if (!r.passed()) {
          err << "verify failure: " << r.name << " deviation " << format_real(r.max_deviation)
              << " at " << r.worst << '\n';
        }
      }
      return static_cast<int>(exit_code::invariant_failure);
    }
    return static_cast<int>(exit_code::ok);
  });
}

}  // namespace spinstar::cli

#endif  // SPINSTAR_CLI_VERIFY_HPP
