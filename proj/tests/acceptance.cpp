// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any FAIL.
// Reference values come from closed-form expressions and brute-force code
// written here, independent of the library paths under test.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>
#include <vector>

#include "spinstar/cli/benchmark.hpp"
#include "spinstar/companion.hpp"
#include "spinstar/evolution.hpp"
#include "spinstar/observables.hpp"
#include "spinstar/oracle.hpp"
#include "spinstar/random.hpp"

using namespace spinstar;

namespace {

constexpr double pi = std::numbers::pi;

struct Clock {
  std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  }
};

int failures = 0;

void report(int id, bool pass, const std::string& detail) {
  std::printf("%s criterion %d: %s\n", pass ? "PASS" : "FAIL", id, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

std::string sci(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3e", v);
  return buf;
}

/// alpha_j in [0.1, 2], Delta in [-2, 2], omega in [-1, 1].
ModelParams random_model(site_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> alpha(static_cast<std::size_t>(n));
  for (auto& a : alpha) a = rng.uniform(0.1, 2.0);
  const double omega = rng.uniform(-1.0, 1.0);
  const double delta = rng.uniform(-2.0, 2.0);
  return ModelParams::validate(n, omega, omega - delta, std::move(alpha));
}

std::vector<double> grid(double t_max, std::size_t count) {
  std::vector<double> t(count);
  for (std::size_t i = 0; i < count; ++i) {
    t[i] = t_max * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return t;
}

/// Conservation measures accumulated over every trajectory produced.
struct Conservation {
  double norm = 0.0;
  double sz_total = 0.0;
  double identity = 0.0;
  std::size_t trajectories = 0;

  void add(const Trajectory& traj) {
    ++trajectories;
    for (const auto& x : traj.states) {
      norm = std::max(norm, std::abs(x.norm() - traj.states.front().norm()));
    }
    sz_total = std::max(sz_total, total_sz(traj).drift());
    identity = std::max(identity, sz_central(traj).discrepancy.max_abs());
  }
};

/// All p-subsets of {1..n} in lexicographic order, by bitmask enumeration.
std::vector<std::vector<site_t>> brute_tuples(site_t n, site_t p) {
  std::vector<std::vector<site_t>> out;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (std::popcount(mask) != p) continue;
    std::vector<site_t> t;
    for (site_t j = 1; j <= n; ++j) {
      if (mask & (1u << (j - 1))) t.push_back(j);
    }
    out.push_back(std::move(t));
  }
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

int main() {
  Conservation conservation;

  // 1 and 2: p = 0 sector against a(t) = cos(wt) - i(D/w) sin(wt), b_j = -i(a_j/w) sin(wt).
  {
    Clock clock;
    double worst_modulus = 0.0;
    double worst_revival = 0.0;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
      const site_t n = 1 + static_cast<site_t>(seed % 10);
      const ModelParams m = random_model(n, 100 + seed);
      double w2 = m.detuning() * m.detuning();
      for (double a : m.couplings()) w2 += a * a;
      const double w = std::sqrt(w2);
      const auto times = grid(4 * pi / w, 1001);
      const InitialCondition init(m, {});
      const Trajectory traj = evolve_closed_form(m, init, times, DetuningSign::hamiltonian,
                                                 SpectralStrategy::automatic);
      conservation.add(traj);
      for (std::size_t i = 0; i < times.size(); ++i) {
        const double c = std::cos(w * times[i]);
        const double s = std::sin(w * times[i]);
        const double mod_a = std::hypot(c, m.detuning() / w * s);
        worst_modulus = std::max(worst_modulus, std::abs(std::abs(traj.states[i].a[0]) - mod_a));
        for (site_t j = 1; j <= n; ++j) {
          const double mod_b = std::abs(m.coupling(j) / w * s);
          worst_modulus = std::max(
              worst_modulus, std::abs(std::abs(traj.states[i].b[j - 1]) - mod_b));
        }
      }
      const std::vector<double> period{2 * pi / w};
      const Trajectory at_t = evolve_closed_form(m, init, period);
      worst_revival = std::max(worst_revival,
                               std::abs(return_probability(at_t, init).values[0] - 1.0));
    }
    const double elapsed = clock.seconds();
    report(1, worst_modulus < 1e-10 && elapsed < 10.0,
           "p=0 spectral path vs analytic |a|,|b_j|, 20 models x 1001 points: max dev " +
               sci(worst_modulus) + " (tol 1e-10), " + sci(elapsed) + " s (limit 10 s)");
    report(2, worst_revival < 1e-9,
           "return probability at T=2pi/alpha_eff: max |P(T)-1| " + sci(worst_revival) + " (tol 1e-9)");
  }

  // 3: sector amplitudes against the full 2^(N+1) propagation, lab frame.
  {
    Clock clock;
    double worst = 0.0;
    std::size_t cases = 0;
    const auto times = grid(10.0, 21);
    for (site_t n = 1; n <= 8; ++n) {
      for (std::uint64_t seed = 0; seed < 20; ++seed) {
        const ModelParams m = random_model(n, 1000 * static_cast<std::uint64_t>(n) + seed);
        const oracle::FullPropagator prop(m);
        Rng pick(seed);
        for (site_t p = 0; p <= n; ++p) {
          std::vector<site_t> all;
          for (site_t j = 1; j <= n; ++j) all.push_back(j);
          for (site_t k = 0; k < p; ++k) {
            std::swap(all[static_cast<std::size_t>(k)],
                      all[static_cast<std::size_t>(pick.uniform_int(k, n - 1))]);
          }
          std::vector<site_t> up(all.begin(), all.begin() + p);
          std::sort(up.begin(), up.end());
          const InitialCondition init(m, SpinTuple(up));

          // Full-space initial product state built directly from the bit convention.
          oracle::FullStateVector psi0 =
              oracle::FullStateVector::Zero(static_cast<Eigen::Index>(oracle::full_dim(n)));
          std::uint64_t bits = 1;
          for (site_t j : up) bits |= std::uint64_t{1} << j;
          psi0[static_cast<Eigen::Index>(bits)] = 1.0;
          const auto full = prop.propagate(psi0, times);

          const Trajectory rot = evolve_closed_form(m, init, times);
          conservation.add(rot);
          const Trajectory lab = to_lab_frame(rot, m);
          const SectorBasis ba(n, p);
          for (std::size_t i = 0; i < times.size(); ++i) {
            ba.for_each([&](rank_t r, const std::vector<site_t>& s) {
              std::uint64_t b = 1;
              for (site_t j : s) b |= std::uint64_t{1} << j;
              worst = std::max(worst, std::abs(lab.states[i].a[static_cast<Eigen::Index>(r)] -
                                               full[i][static_cast<Eigen::Index>(b)]));
            });
            if (p < n) {
              SectorBasis(n, p + 1).for_each([&](rank_t r, const std::vector<site_t>& s) {
                std::uint64_t b = 0;
                for (site_t j : s) b |= std::uint64_t{1} << j;
                worst = std::max(worst, std::abs(lab.states[i].b[static_cast<Eigen::Index>(r)] -
                                                 full[i][static_cast<Eigen::Index>(b)]));
              });
            }
          }
          ++cases;
        }
      }
    }
    const double elapsed = clock.seconds();
    report(3, worst < 1e-8 && elapsed < 300.0,
           "closed form vs full-space propagation, N<=8, all p, 20 seeds (" + std::to_string(cases) +
               " sectors): max dev " + sci(worst) + " (tol 1e-8), " + sci(elapsed) +
               " s (limit 300 s)");
  }

  // 4: square of the first-order sector matrix against the companion blocks.
  {
    double worst = 0.0;
    for (site_t n = 1; n <= 6; ++n) {
      for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const ModelParams m = random_model(n, 500 + 10 * static_cast<std::uint64_t>(n) + seed);
        for (site_t p = 0; p <= n; ++p) {
          const Eigen::MatrixXd a = build_A(m, p).dense();
          const Eigen::MatrixXd b = build_B(m, p).dense();
          for (auto sign : {DetuningSign::published, DetuningSign::hamiltonian}) {
            const Eigen::MatrixXd h(build_first_order(m, p, sign));
            const Eigen::MatrixXd h2 = h * h;
            const auto na = a.rows();
            const auto nb = b.rows();
            worst = std::max(worst, (h2.topLeftCorner(na, na) - a).cwiseAbs().maxCoeff());
            if (nb > 0) {
              worst = std::max(worst, (h2.bottomRightCorner(nb, nb) - b).cwiseAbs().maxCoeff());
              worst = std::max(worst, h2.topRightCorner(na, nb).cwiseAbs().maxCoeff());
            }
          }
        }
      }
    }
    report(4, worst < 1e-12,
           "H^2 blocks vs A and B, N<=6, all p, 5 seeds, both detuning signs: max dev " + sci(worst) +
               " (tol 1e-12)");
  }

  // 5: conservation over every trajectory produced above.
  report(5,
         conservation.norm < 1e-10 && conservation.sz_total < 1e-10 && conservation.identity < 1e-10,
         "over " + std::to_string(conservation.trajectories) + " trajectories: norm drift " +
             sci(conservation.norm) + ", total S_z drift " + sci(conservation.sz_total) +
             ", S_z^A expression gap " + sci(conservation.identity) + " (tol 1e-10 each)");

  // 6: rank/unrank against brute-force enumeration; neighbour count p(N-p).
  {
    std::size_t checked = 0;
    std::size_t bad = 0;
    for (site_t n = 1; n <= 8; ++n) {
      for (site_t p = 0; p <= n; ++p) {
        const SectorBasis basis(n, p);
        const auto tuples = brute_tuples(n, p);
        if (basis.dim() != tuples.size()) ++bad;
        for (rank_t r = 0; r < tuples.size(); ++r) {
          const SpinTuple t(tuples[r]);
          if (basis.rank(t) != r || basis.unrank(r) != t) ++bad;
          if (basis.unrank(basis.rank(t)) != t) ++bad;
          if (off_diagonal_neighbors(t, basis).size() != static_cast<std::size_t>(p * (n - p))) ++bad;
          ++checked;
        }
      }
    }
    report(6, bad == 0,
           "rank/unrank round trip and p(N-p) neighbours over " + std::to_string(checked) +
               " tuples, N<=8: " + std::to_string(bad) + " mismatches");
  }

  // 7: exact symmetry and row nonzero counts.
  {
    std::size_t bad = 0;
    std::size_t rows = 0;
    for (site_t n = 1; n <= 8; ++n) {
      const ModelParams m = random_model(n, 700 + static_cast<std::uint64_t>(n));
      for (site_t p = 0; p <= n; ++p) {
        const CompanionMatrix a = build_A(m, p);
        const CompanionMatrix b = build_B(m, p);
        auto check = [&](const CompanionMatrix& c, long expected) {
          const Eigen::MatrixXd d = c.dense();
          if (d.size() && d != d.transpose()) ++bad;
          for (Eigen::Index r = 0; r < c.entries.outerSize(); ++r) {
            if (c.entries.innerVector(r).nonZeros() != expected) ++bad;
            ++rows;
          }
        };
        check(a, 1 + static_cast<long>(p) * (n - p));
        check(b, 1 + static_cast<long>(p + 1) * (n - p - 1));
      }
    }
    report(7, bad == 0,
           "A and B exactly symmetric with 1+p(N-p) and 1+(p+1)(N-p-1) nonzeros per row, N<=8 (" +
               std::to_string(rows) + " rows): " + std::to_string(bad) + " violations");
  }

  // 8: large bath at low polarization runs; the half-filled N=20 sector is gated.
  {
    cli::BenchmarkSpec spec;
    spec.num_times = 101;
    const ResourceLimits limits;
    const auto big = cli::benchmark_case({200, 1}, spec, limits);
    const auto gated = cli::benchmark_case({20, 10}, spec, limits);
    const double build_to_evolve = big.build_s + big.decompose_s + big.evolve_s;
    const bool pass = big.status == "ok" && big.dim_a == 200 && big.dim_b == 19900 &&
                      build_to_evolve < 600.0 && gated.status == "skipped";
    report(8, pass,
           "(N=200,p=1) dims " + std::to_string(big.dim_a) + "/" + std::to_string(big.dim_b) + " " +
               big.status + " in " + sci(build_to_evolve) + " s (limit 600 s, norm drift " +
               sci(big.max_norm_drift) + "); (N=20,p=10) " + gated.status + ": " + gated.reason);
  }

  std::printf("%s: %d criteria failed\n", failures == 0 ? "ACCEPTANCE PASSED" : "ACCEPTANCE FAILED",
              failures);
  return failures == 0 ? 0 : 1;
}
