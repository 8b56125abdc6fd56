#ifndef SPINSTAR_ORACLE_HPP
#define SPINSTAR_ORACLE_HPP

// Brute-force reference: the full 2^(N+1)-dimensional Hamiltonian, built
// directly from the Pauli-operator form and propagated exactly. Deliberately
// small and independent of the tuple/companion machinery except for the
// final projection onto sector ranks.
//
// Basis convention: bit 0 is the central spin, bit j (1..N) is bath site j,
// a set bit means spin up.

#include <bit>
#include <cstdint>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "spinstar/companion.hpp"
#include "spinstar/error.hpp"
#include "spinstar/evolution.hpp"
#include "spinstar/format.hpp"
#include "spinstar/model.hpp"
#include "spinstar/tuple_index.hpp"

namespace spinstar::oracle {

inline constexpr site_t max_sites = 12;

using FullStateVector = Eigen::VectorXcd;

inline void check_size(site_t n) {
  if (n < 1 || n > max_sites) {
    throw resource_error("oracle: N=" + std::to_string(n) + " outside supported range [1, " +
                         std::to_string(max_sites) + "]");
  }
}

inline std::uint64_t full_dim(site_t n) { return std::uint64_t{1} << (n + 1); }

/// Basis index of (central, bath tuple).
inline std::uint64_t basis_index(bool central_up, const std::vector<site_t>& up_sites) {
  std::uint64_t s = central_up ? 1u : 0u;
  for (site_t j : up_sites) s |= std::uint64_t{1} << j;
  return s;
}

/// Dense real symmetric H = omega sum sz_j + omega0 sz_A + sum alpha_j (s+_A s-_j + h.c.).
inline Eigen::MatrixXd build_full_hamiltonian(const ModelParams& params) {
  const site_t n = params.sites();
  check_size(n);
  const auto dim = static_cast<Eigen::Index>(full_dim(n));
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(dim, dim);
  for (Eigen::Index s = 0; s < dim; ++s) {
    const auto bits = static_cast<std::uint64_t>(s);
    const int bath_up = std::popcount(bits >> 1);
    const double sz_a = (bits & 1u) ? 1.0 : -1.0;
    h(s, s) = params.omega() * (2.0 * bath_up - n) + params.omega0() * sz_a;
    // s-_A s+_j: central up, site j down -> central down, site j up.
    if (bits & 1u) {
      for (site_t j = 1; j <= n; ++j) {
        const std::uint64_t m = std::uint64_t{1} << j;
        if (bits & m) continue;
        const auto target = static_cast<Eigen::Index>((bits & ~std::uint64_t{1}) | m);
        h(target, s) = params.coupling(j);
        h(s, target) = params.coupling(j);
      }
    }
  }
  return h;
}

/// Diagonal of S_z = sz_A/2 + sum_j sz_j/2 in the computational basis.
inline Eigen::VectorXd total_sz_diagonal(site_t n) {
  check_size(n);
  const auto dim = static_cast<Eigen::Index>(full_dim(n));
  Eigen::VectorXd d(dim);
  for (Eigen::Index s = 0; s < dim; ++s) {
    d[s] = 0.5 * (2.0 * std::popcount(static_cast<std::uint64_t>(s)) - (n + 1));
  }
  return d;
}

/// Exact exp(-i H t) via the dense eigendecomposition, computed once.
class FullPropagator {
 public:
  explicit FullPropagator(const ModelParams& params)
      : n_(params.sites()), spectrum_(symmetric_eigen(build_full_hamiltonian(params))) {}

  site_t sites() const noexcept { return n_; }
  const SpectralDecomposition& spectrum() const noexcept { return spectrum_; }

  std::vector<FullStateVector> propagate(const FullStateVector& psi0,
                                         std::span<const double> times) const {
    if (psi0.size() != spectrum_.dim) throw validation_error("oracle: state dimension mismatch");
    const Eigen::MatrixXd& q = spectrum_.eigenvectors;
    Eigen::VectorXcd coeff(q.cols());
    coeff.real() = q.transpose() * psi0.real();
    coeff.imag() = q.transpose() * psi0.imag();
    std::vector<FullStateVector> out;
    out.reserve(times.size());
    Eigen::VectorXcd phased(coeff.size());
    for (double t : times) {
      for (Eigen::Index k = 0; k < coeff.size(); ++k) {
        phased[k] = std::polar(1.0, -spectrum_.eigenvalues[k] * t) * coeff[k];
      }
      FullStateVector psi(q.rows());
      psi.real() = q * phased.real();
      psi.imag() = q * phased.imag();
      out.push_back(std::move(psi));
    }
    return out;
  }

 private:
  site_t n_;
  SpectralDecomposition spectrum_;
};

inline std::vector<FullStateVector> propagate_full(const ModelParams& params,
                                                   const FullStateVector& psi0,
                                                   std::span<const double> times) {
  return FullPropagator(params).propagate(psi0, times);
}

/// Classical fixed-step RK4 on i psi' = H psi, as an integrator-based check of
/// the spectral propagator. Each output time is reached with `steps` equal steps
/// from the previous one.
inline std::vector<FullStateVector> propagate_rk4(const ModelParams& params,
                                                  const FullStateVector& psi0,
                                                  std::span<const double> times, int steps) {
  const Eigen::MatrixXd h = build_full_hamiltonian(params);
  auto rhs = [&](const FullStateVector& psi) -> FullStateVector {
    FullStateVector out(psi.size());
    out.real() = h * psi.imag();   // -i (H re + i H im) = H im - i H re
    out.imag() = -(h * psi.real());
    return out;
  };
  std::vector<FullStateVector> out;
  FullStateVector psi = psi0;
  double now = 0.0;
  for (double t : times) {
    const double dt = (t - now) / steps;
    for (int k = 0; k < steps && dt != 0.0; ++k) {
      const FullStateVector k1 = rhs(psi);
      const FullStateVector k2 = rhs(psi + 0.5 * dt * k1);
      const FullStateVector k3 = rhs(psi + 0.5 * dt * k2);
      const FullStateVector k4 = rhs(psi + dt * k3);
      psi += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    now = t;
    out.push_back(psi);
  }
  return out;
}

/// Places a sector amplitude pair into the full space (zero elsewhere).
inline FullStateVector embed_sector(const AmplitudePair& x, site_t n, site_t p) {
  check_size(n);
  FullStateVector psi = FullStateVector::Zero(static_cast<Eigen::Index>(full_dim(n)));
  SectorBasis(n, p).for_each([&](rank_t r, const std::vector<site_t>& sites) {
    psi[static_cast<Eigen::Index>(basis_index(true, sites))] = x.a[static_cast<Eigen::Index>(r)];
  });
  if (p < n) {
    SectorBasis(n, p + 1).for_each([&](rank_t r, const std::vector<site_t>& sites) {
      psi[static_cast<Eigen::Index>(basis_index(false, sites))] = x.b[static_cast<Eigen::Index>(r)];
    });
  }
  return psi;
}

/// a[rank(t)] = <up_A, t|psi>,  b[rank(q)] = <down_A, q|psi>.
inline AmplitudePair project_to_sector(const FullStateVector& psi, site_t n, site_t p) {
  check_size(n);
  if (psi.size() != static_cast<Eigen::Index>(full_dim(n))) {
    throw validation_error("project_to_sector: state dimension mismatch");
  }
  const SectorBasis ba(n, p);
  AmplitudePair x;
  x.a.resize(static_cast<Eigen::Index>(ba.dim()));
  ba.for_each([&](rank_t r, const std::vector<site_t>& sites) {
    x.a[static_cast<Eigen::Index>(r)] = psi[static_cast<Eigen::Index>(basis_index(true, sites))];
  });
  if (p < n) {
    const SectorBasis bb(n, p + 1);
    x.b.resize(static_cast<Eigen::Index>(bb.dim()));
    bb.for_each([&](rank_t r, const std::vector<site_t>& sites) {
      x.b[static_cast<Eigen::Index>(r)] = psi[static_cast<Eigen::Index>(basis_index(false, sites))];
    });
  } else {
    x.b.resize(0);
  }
  return x;
}

/// Probability weight outside the sector (central up with p bath up, or
/// central down with p + 1 bath up).
inline double out_of_sector_weight(const FullStateVector& psi, site_t p) {
  double w = 0.0;
  for (Eigen::Index s = 0; s < psi.size(); ++s) {
    const auto bits = static_cast<std::uint64_t>(s);
    const int bath_up = std::popcount(bits >> 1);
    const bool in = (bits & 1u) ? bath_up == p : bath_up == p + 1;
    if (!in) w += std::norm(psi[s]);
  }
  return w;
}

/// Lab-frame trajectory of a sector state, projected back onto the sector.
inline Trajectory sector_trajectory(const FullPropagator& prop, const AmplitudePair& x0, site_t p,
                                    std::span<const double> times) {
  const site_t n = prop.sites();
  const auto states = prop.propagate(embed_sector(x0, n, p), times);
  Trajectory traj{n, p, Frame::lab, {times.begin(), times.end()}, {}};
  traj.states.reserve(states.size());
  for (const auto& psi : states) traj.states.push_back(project_to_sector(psi, n, p));
  return traj;
}

/// "index real imaginary" per line, 17 significant digits.
inline void write_state_vector(std::ostream& os, const FullStateVector& psi) {
  for (Eigen::Index s = 0; s < psi.size(); ++s) {
    os << s << ' ' << format_real(psi[s].real()) << ' ' << format_real(psi[s].imag()) << '\n';
  }
}

}  // namespace spinstar::oracle

#endif  // SPINSTAR_ORACLE_HPP
