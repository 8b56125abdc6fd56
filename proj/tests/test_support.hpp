#ifndef SPINSTAR_TEST_SUPPORT_HPP
#define SPINSTAR_TEST_SUPPORT_HPP

// Test-only helpers: brute-force enumerations and seeded instance generators.

#include <algorithm>
#include <cstdint>
#include <vector>

#include "spinstar/model.hpp"
#include "spinstar/random.hpp"
#include "spinstar/tuple_index.hpp"

namespace spinstar::testing {

/// Every p-subset of {1..n} from bitmasks, sorted with std::lexicographical_compare.
inline std::vector<std::vector<site_t>> enumerate_tuples(site_t n, site_t p) {
  std::vector<std::vector<site_t>> out;
  for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
    if (__builtin_popcount(mask) != p) continue;
    std::vector<site_t> t;
    for (site_t j = 1; j <= n; ++j) {
      if (mask & (1u << (j - 1))) t.push_back(j);
    }
    out.push_back(std::move(t));
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Couplings uniform on [0.1, 2], detuning uniform on [-2, 2], omega on [-1, 1].
inline ModelParams random_model(site_t n, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<double> alpha(static_cast<std::size_t>(n));
  for (auto& a : alpha) a = rng.uniform(0.1, 2.0);
  const double omega = rng.uniform(-1.0, 1.0);
  const double delta = rng.uniform(-2.0, 2.0);
  return ModelParams::validate(n, omega, omega - delta, std::move(alpha));
}

/// Equally spaced grid of `count` points on [0, t_max].
inline std::vector<double> linear_grid(double t_max, std::size_t count) {
  std::vector<double> t(count);
  for (std::size_t i = 0; i < count; ++i) {
    t[i] = t_max * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  return t;
}

}  // namespace spinstar::testing

#endif  // SPINSTAR_TEST_SUPPORT_HPP
