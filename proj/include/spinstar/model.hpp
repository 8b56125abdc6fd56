#ifndef SPINSTAR_MODEL_HPP
#define SPINSTAR_MODEL_HPP

#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <string>
#include <vector>

#include <unistd.h>

#include "spinstar/error.hpp"
#include "spinstar/random.hpp"
#include "spinstar/tuple_index.hpp"

namespace spinstar {

/// Physical parameters of the spin star
///   H = omega * sum_j sz_j + omega0 * sz_A + sum_j alpha_j (s+_A s-_j + s-_A s+_j)
/// with hbar = 1 and every frequency in reciprocal time units.
/// Only constructible through validate(), so every instance is consistent.
class ModelParams {
 public:
  static ModelParams validate(site_t n_sites, double omega, double omega0,
                              std::vector<double> couplings) {
    std::vector<std::string> problems;
    if (n_sites < 1) problems.push_back("N: must be >= 1, got " + std::to_string(n_sites));
    if (!std::isfinite(omega)) problems.push_back("omega: must be finite");
    if (!std::isfinite(omega0)) problems.push_back("omega0: must be finite");
    if (n_sites >= 1 && couplings.size() != static_cast<std::size_t>(n_sites)) {
      problems.push_back("couplings: expected " + std::to_string(n_sites) + " entries, got " +
                         std::to_string(couplings.size()));
    }
    for (std::size_t j = 0; j < couplings.size(); ++j) {
      if (!std::isfinite(couplings[j])) {
        problems.push_back("couplings[" + std::to_string(j + 1) + "]: must be finite");
      }
    }
    if (!problems.empty()) throw validation_error(std::move(problems));
    return ModelParams(n_sites, omega, omega0, std::move(couplings));
  }

  static ModelParams uniform(site_t n_sites, double omega, double omega0, double alpha) {
    return validate(n_sites, omega, omega0,
                    std::vector<double>(n_sites > 0 ? static_cast<std::size_t>(n_sites) : 0, alpha));
  }

  /// Couplings drawn uniformly from [low, high) with the given seed.
  static ModelParams random(site_t n_sites, double omega, double omega0, double low, double high,
                            std::uint64_t seed) {
    if (!(low <= high) || !std::isfinite(low) || !std::isfinite(high)) {
      throw validation_error("couplings.random: need finite low <= high");
    }
    Rng rng(seed);
    std::vector<double> alpha(n_sites > 0 ? static_cast<std::size_t>(n_sites) : 0);
    for (auto& a : alpha) a = rng.uniform(low, high);
    return validate(n_sites, omega, omega0, std::move(alpha));
  }

  site_t sites() const noexcept { return n_; }
  double omega() const noexcept { return omega_; }
  double omega0() const noexcept { return omega0_; }
  /// Delta = omega - omega0.
  double detuning() const noexcept { return omega_ - omega0_; }
  const std::vector<double>& couplings() const noexcept { return alpha_; }
  /// alpha_j for one-based site j.
  double coupling(site_t j) const { return alpha_.at(static_cast<std::size_t>(j - 1)); }

  /// Same model with bath sites relabelled: new site k is old site perm[k-1].
  ModelParams permuted(const std::vector<site_t>& perm) const {
    std::vector<double> alpha(alpha_.size());
    for (std::size_t k = 0; k < perm.size(); ++k) alpha.at(k) = coupling(perm[k]);
    return validate(n_, omega_, omega0_, std::move(alpha));
  }

 private:
  ModelParams(site_t n, double omega, double omega0, std::vector<double> alpha)
      : n_(n), omega_(omega), omega0_(omega0), alpha_(std::move(alpha)) {}

  site_t n_;
  double omega_;
  double omega0_;
  std::vector<double> alpha_;
};

/// sqrt(sum_j alpha_j^2 + Delta^2); the single oscillation frequency of the
/// sector with only the central spin up.
inline double effective_frequency(const ModelParams& params) {
  double sum = params.detuning() * params.detuning();
  for (double a : params.couplings()) sum += a * a;
  return std::sqrt(sum);
}

/// Product initial state: central spin up, bath sites in up_set up, the rest down.
class InitialCondition {
 public:
  InitialCondition(const ModelParams& params, SpinTuple up_set) : up_set_(std::move(up_set)) {
    if (!up_set_.empty() && up_set_.sites().back() > params.sites()) {
      throw validation_error("initial.up_sites: site " + std::to_string(up_set_.sites().back()) +
                             " exceeds N=" + std::to_string(params.sites()));
    }
  }

  const SpinTuple& up_set() const noexcept { return up_set_; }
  site_t p() const noexcept { return static_cast<site_t>(up_set_.size()); }

 private:
  SpinTuple up_set_;
};

/// Limits guarding against infeasible builds. Defaults may be overridden by
/// SPINSTAR_MAX_SECTOR_DIM and SPINSTAR_MEMORY_BUDGET_MB (expert use).
struct ResourceLimits {
  static constexpr rank_t default_max_sector_dim = 200'000;

  rank_t max_sector_dim = default_max_sector_dim;
  std::uint64_t memory_budget_bytes = default_memory_budget();

  static std::uint64_t default_memory_budget() {
    const long pages = ::sysconf(_SC_PHYS_PAGES);
    const long page_size = ::sysconf(_SC_PAGE_SIZE);
    if (pages <= 0 || page_size <= 0) return std::uint64_t{4} << 30;
    return static_cast<std::uint64_t>(pages) * static_cast<std::uint64_t>(page_size) / 2;
  }

  static ResourceLimits from_environment() {
    ResourceLimits limits;
    if (const char* v = std::getenv("SPINSTAR_MAX_SECTOR_DIM")) {
      limits.max_sector_dim = parse_positive(v, "SPINSTAR_MAX_SECTOR_DIM");
    }
    if (const char* v = std::getenv("SPINSTAR_MEMORY_BUDGET_MB")) {
      limits.memory_budget_bytes = parse_positive(v, "SPINSTAR_MEMORY_BUDGET_MB") << 20;
    }
    return limits;
  }

  void check_dimension(rank_t dim, const std::string& what) const {
    if (dim > max_sector_dim) {
      throw resource_error("sector too large: " + what + " has dimension " + std::to_string(dim) +
                           ", above the limit max_sector_dim=" + std::to_string(max_sector_dim));
    }
  }

  void check_memory(std::uint64_t bytes, const std::string& what) const {
    if (bytes > memory_budget_bytes) {
      throw resource_error("memory guard: " + what + " needs about " +
                           std::to_string(bytes >> 20) + " MiB, above the budget of " +
                           std::to_string(memory_budget_bytes >> 20) + " MiB");
    }
  }

 private:
  static std::uint64_t parse_positive(const char* text, const char* name) {
    char* end = nullptr;
    const unsigned long long v = std::strtoull(text, &end, 10);
    if (end == text || *end != '\0' || v == 0) {
      throw validation_error(std::string(name) + ": expected a positive integer, got '" + text + "'");
    }
    return v;
  }
};

/// Dimensions of the sector reached from a product state with p bath spins up.
struct SectorShape {
  site_t p = 0;
  rank_t dim_a = 0;      // C(N, p): central up
  rank_t dim_b = 0;      // C(N, p+1): central down
  rank_t dim_total = 0;  // C(N+1, p+1)
};

inline SectorShape sector_shape(site_t n_sites, site_t p,
                                const ResourceLimits& limits = ResourceLimits{}) {
  if (p < 0 || p > n_sites) {
    throw validation_error("p must lie in [0, N], got p=" + std::to_string(p));
  }
  SectorShape shape;
  shape.p = p;
  shape.dim_a = binomial(static_cast<std::uint64_t>(n_sites), static_cast<std::uint64_t>(p));
  shape.dim_b = binomial(static_cast<std::uint64_t>(n_sites), static_cast<std::uint64_t>(p) + 1);
  shape.dim_total = shape.dim_a + shape.dim_b;
  if (shape.dim_a > limits.max_sector_dim || shape.dim_b > limits.max_sector_dim) {
    throw resource_error("sector too large: N=" + std::to_string(n_sites) + ", p=" +
                         std::to_string(p) + " gives C(N,p)=" + std::to_string(shape.dim_a) +
                         " and C(N,p+1)=" + std::to_string(shape.dim_b) +
                         ", above the limit max_sector_dim=" + std::to_string(limits.max_sector_dim));
  }
  return shape;
}

inline SectorShape sector_shape(const ModelParams& params, const InitialCondition& init,
                                const ResourceLimits& limits = ResourceLimits{}) {
  return sector_shape(params.sites(), init.p(), limits);
}

}  // namespace spinstar

#endif  // SPINSTAR_MODEL_HPP
