#ifndef SPINSTAR_OBSERVABLES_HPP
#define SPINSTAR_OBSERVABLES_HPP

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "spinstar/error.hpp"
#include "spinstar/evolution.hpp"
#include "spinstar/model.hpp"
#include "spinstar/tuple_index.hpp"

namespace spinstar {

struct ObservableSeries {
  std::string name;
  std::vector<double> times;
  std::vector<double> values;

  std::size_t size() const noexcept { return values.size(); }
  double max_abs() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v));
    return m;
  }
  /// max |v - v(0)|.
  double drift() const {
    double m = 0.0;
    for (double v : values) m = std::max(m, std::abs(v - values.front()));
    return m;
  }
};

namespace detail {

template <typename Fn>
ObservableSeries map_states(const Trajectory& traj, std::string name, Fn&& fn) {
  ObservableSeries s{std::move(name), traj.times, {}};
  s.values.reserve(traj.size());
  for (const auto& x : traj.states) s.values.push_back(fn(x));
  return s;
}

}  // namespace detail

inline ObservableSeries norm_series(const Trajectory& traj) {
  return detail::map_states(traj, "norm", [](const AmplitudePair& x) { return x.norm(); });
}

inline ObservableSeries population_a(const Trajectory& traj) {
  return detail::map_states(traj, "sum_abs_a2", [](const AmplitudePair& x) { return x.norm_a(); });
}

inline ObservableSeries population_b(const Trajectory& traj) {
  return detail::map_states(traj, "sum_abs_b2", [](const AmplitudePair& x) { return x.norm_b(); });
}

/// <S_z^A> from both sector expressions, sum|a|^2 - 1/2 and 1/2 - sum|b|^2.
struct CentralMagnetization {
  ObservableSeries value;        // mean of the two expressions
  ObservableSeries discrepancy;  // their difference
  bool consistent = true;        // max |discrepancy| <= tolerance
};

inline CentralMagnetization sz_central(const Trajectory& traj, double tolerance = 1e-8) {
  CentralMagnetization out;
  out.value = ObservableSeries{"sz_central", traj.times, {}};
  out.discrepancy = ObservableSeries{"sz_central_discrepancy", traj.times, {}};
  for (const auto& x : traj.states) {
    const double from_a = x.norm_a() - 0.5;
    const double from_b = 0.5 - x.norm_b();
    out.value.values.push_back(0.5 * (from_a + from_b));
    out.discrepancy.values.push_back(from_a - from_b);
  }
  out.consistent = out.discrepancy.max_abs() <= tolerance;
  return out;
}

/// <sigma_z^j>/2 for every bath site j = 1..N, one series per site.
inline std::vector<ObservableSeries> sz_sites(const Trajectory& traj) {
  const site_t n = traj.sites;
  std::vector<ObservableSeries> out(static_cast<std::size_t>(n));
  for (site_t j = 1; j <= n; ++j) {
    out[static_cast<std::size_t>(j - 1)] =
        ObservableSeries{"sz_site_" + std::to_string(j), traj.times,
                         std::vector<double>(traj.size(), -0.5)};
  }
  auto accumulate = [&](site_t p, auto block) {
    if (p > n) return;
    const SectorBasis basis(n, p);
    basis.for_each([&](rank_t r, const std::vector<site_t>& sites) {
      for (std::size_t i = 0; i < traj.size(); ++i) {
        const double w = std::norm(block(traj.states[i])[static_cast<Eigen::Index>(r)]);
        for (site_t j : sites) out[static_cast<std::size_t>(j - 1)].values[i] += w;
      }
    });
  };
  accumulate(traj.p, [](const AmplitudePair& x) -> const complex_vector& { return x.a; });
  accumulate(traj.p + 1, [](const AmplitudePair& x) -> const complex_vector& { return x.b; });
  return out;
}

inline ObservableSeries sz_site(const Trajectory& traj, site_t j) {
  if (j < 1 || j > traj.sites) {
    throw validation_error("sz_site: site " + std::to_string(j) + " outside [1, " +
                           std::to_string(traj.sites) + "]");
  }
  return std::move(sz_sites(traj)[static_cast<std::size_t>(j - 1)]);
}

/// <S_z> = <S_z^A> + sum_j <sigma_z^j>/2; constant p + 1/2 - N/2 for a normalized state.
inline ObservableSeries total_sz(const Trajectory& traj) {
  ObservableSeries total = sz_central(traj).value;
  total.name = "sz_total";
  for (const auto& site : sz_sites(traj)) {
    for (std::size_t i = 0; i < total.size(); ++i) total.values[i] += site.values[i];
  }
  return total;
}

/// |a_{rank(up_set)}(t)|^2.
inline ObservableSeries return_probability(const Trajectory& traj, const InitialCondition& init) {
  if (init.p() != traj.p) {
    throw validation_error("return_probability: initial condition has p=" +
                           std::to_string(init.p()) + " but trajectory has p=" +
                           std::to_string(traj.p));
  }
  const auto r = static_cast<Eigen::Index>(SectorBasis(traj.sites, traj.p).rank(init.up_set()));
  return detail::map_states(traj, "return_probability",
                            [r](const AmplitudePair& x) { return std::norm(x.a[r]); });
}

/// Times of local maxima at or above threshold. A point counts when it is not
/// below either neighbour, so every point of a flat plateau is reported.
/// Interior peaks are refined with the vertex of the three-point parabola.
inline std::vector<double> detect_revivals(const ObservableSeries& series, double threshold) {
  if (series.values.empty()) throw validation_error("detect_revivals: empty series");
  if (!(threshold > 0.0)) throw validation_error("detect_revivals: threshold must be positive");
  const auto& v = series.values;
  const auto& t = series.times;
  std::vector<double> out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (v[i] < threshold) continue;
    if (i > 0 && v[i] < v[i - 1]) continue;
    if (i + 1 < v.size() && v[i] < v[i + 1]) continue;
    double when = t[i];
    if (i > 0 && i + 1 < v.size()) {
      const double x0 = t[i - 1], x1 = t[i], x2 = t[i + 1];
      const double y0 = v[i - 1], y1 = v[i], y2 = v[i + 1];
      const double denom = (x0 - x1) * (x0 - x2) * (x1 - x2);
      const double a = (x2 * (y1 - y0) + x1 * (y0 - y2) + x0 * (y2 - y1)) / denom;
      const double b = (x2 * x2 * (y0 - y1) + x1 * x1 * (y2 - y0) + x0 * x0 * (y1 - y2)) / denom;
      if (a < 0.0 && std::isfinite(a) && std::isfinite(b)) {
        when = std::clamp(-b / (2.0 * a), x0, x2);
      }
    }
    out.push_back(when);
  }
  return out;
}

}  // namespace spinstar

#endif  // SPINSTAR_OBSERVABLES_HPP
