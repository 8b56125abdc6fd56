#ifndef SPINSTAR_COMPANION_HPP
#define SPINSTAR_COMPANION_HPP

// Companion matrices of the decoupled second-order amplitude equations
//
//   a'' = -A a,   A = Delta^2 + K K^T   (rows: p-tuples, central spin up)
//   b'' = -B b,   B = Delta^2 + K^T K   (rows: (p+1)-tuples, central spin down)
//
// where K[m, O_r(m)] = alpha_r is the flip-flop coupling block of the
// first-order sector equations. Both are real symmetric and positive
// semidefinite; entries are assembled tuple by tuple from the neighbour maps.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "spinstar/error.hpp"
#include "spinstar/format.hpp"
#include "spinstar/model.hpp"
#include "spinstar/tuple_index.hpp"

namespace spinstar {

using sparse_matrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class CompanionKind { A, B };

inline const char* to_string(CompanionKind k) { return k == CompanionKind::A ? "A" : "B"; }

/// Sign of the detuning term on the central-up amplitudes in the
/// first-order sector equations  i a' = s*Delta*a + K b,  i b' = K^T a - s*Delta*b.
///   published:   s = +1, the form the closed p = 0 solution is written in.
///   hamiltonian: s = -1, what the Hamiltonian gives once the sector-constant
///                energy omega*(2p - N) + omega is removed. Matches the
///                full-space propagator amplitude by amplitude.
/// Companion matrices depend only on Delta^2 and are identical for both.
enum class DetuningSign { published, hamiltonian };

inline double detuning_factor(DetuningSign sign) {
  return sign == DetuningSign::published ? 1.0 : -1.0;
}

/// FNV-1a over the binary representation of the parameters.
inline std::uint64_t fingerprint(const ModelParams& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  const site_t n = params.sites();
  const double w = params.omega();
  const double w0 = params.omega0();
  mix(&n, sizeof n);
  mix(&w, sizeof w);
  mix(&w0, sizeof w0);
  mix(params.couplings().data(), params.couplings().size() * sizeof(double));
  return h;
}

struct CompanionMatrix {
  CompanionKind kind = CompanionKind::A;
  site_t sites = 0;
  site_t p = 0;
  std::uint64_t params_fingerprint = 0;
  sparse_matrix entries;  // structural nonzeros are stored even when their value is 0

  Eigen::Index dim() const noexcept { return entries.rows(); }
  double entry(Eigen::Index i, Eigen::Index j) const { return entries.coeff(i, j); }
  Eigen::MatrixXd dense() const { return Eigen::MatrixXd(entries); }
  double max_abs_entry() const {
    double m = 0.0;
    for (Eigen::Index k = 0; k < entries.nonZeros(); ++k) {
      m = std::max(m, std::abs(entries.valuePtr()[k]));
    }
    return m;
  }
};

namespace detail {

/// Row-major assembly over the tuples of one sector. diag(sites) gives the
/// diagonal entry; off-diagonals are alpha_r * alpha_s for every single swap.
template <typename DiagFn>
sparse_matrix assemble_swap_matrix(const ModelParams& params, const SectorBasis& basis,
                                   DiagFn&& diag) {
  const auto dim = static_cast<Eigen::Index>(basis.dim());
  const site_t n = basis.sites();
  const site_t p = basis.p();
  const auto per_row = static_cast<std::size_t>(1 + p * (n - p));
  sparse_matrix m(dim, dim);
  m.reserve(static_cast<Eigen::Index>(per_row) * dim);

  std::vector<std::pair<Eigen::Index, double>> row;
  row.reserve(per_row);
  std::vector<site_t> swapped(static_cast<std::size_t>(p));
  std::vector<char> member(static_cast<std::size_t>(n) + 1);

  basis.for_each([&](rank_t r, const std::vector<site_t>& sites) {
    row.clear();
    row.emplace_back(static_cast<Eigen::Index>(r), diag(sites));
    std::fill(member.begin(), member.end(), 0);
    for (site_t s : sites) member[static_cast<std::size_t>(s)] = 1;
    for (site_t add = 1; add <= n; ++add) {
      if (member[static_cast<std::size_t>(add)]) continue;
      for (std::size_t k = 0; k < sites.size(); ++k) {
        const site_t drop = sites[k];
        // delta_drop(O_add(sites)), kept sorted.
        std::size_t w = 0;
        bool placed = false;
        for (site_t x : sites) {
          if (x == drop) continue;
          if (!placed && add < x) {
            swapped[w++] = add;
            placed = true;
          }
          swapped[w++] = x;
        }
        if (!placed) swapped[w++] = add;
        const auto col = static_cast<Eigen::Index>(basis.rank_unchecked(swapped));
        row.emplace_back(col, params.coupling(add) * params.coupling(drop));
      }
    }
    std::sort(row.begin(), row.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    m.startVec(static_cast<Eigen::Index>(r));
    for (const auto& [col, v] : row) m.insertBack(static_cast<Eigen::Index>(r), col) = v;
  });
  m.finalize();
  return m;
}

}  // namespace detail

/// A: rows are p-tuples m; diagonal Delta^2 + sum over sites outside m of alpha^2.
inline CompanionMatrix build_A(const ModelParams& params, site_t p,
                               const ResourceLimits& limits = ResourceLimits{}) {
  sector_shape(params.sites(), p, limits);
  const SectorBasis basis(params.sites(), p);
  const double d2 = params.detuning() * params.detuning();

  CompanionMatrix out;
  out.kind = CompanionKind::A;
  out.sites = params.sites();
  out.p = p;
  out.params_fingerprint = fingerprint(params);
  out.entries = detail::assemble_swap_matrix(params, basis, [&](const std::vector<site_t>& m) {
    double outside = 0.0;
    auto it = m.begin();
    for (site_t j = 1; j <= params.sites(); ++j) {
      if (it != m.end() && *it == j) {
        ++it;
        continue;
      }
      outside += params.coupling(j) * params.coupling(j);
    }
    return d2 + outside;
  });
  return out;
}

/// B: rows are (p+1)-tuples q; diagonal Delta^2 + sum over sites in q of alpha^2.
/// Empty when p = N.
inline CompanionMatrix build_B(const ModelParams& params, site_t p,
                               const ResourceLimits& limits = ResourceLimits{}) {
  const auto shape = sector_shape(params.sites(), p, limits);
  CompanionMatrix out;
  out.kind = CompanionKind::B;
  out.sites = params.sites();
  out.p = p;
  out.params_fingerprint = fingerprint(params);
  if (shape.dim_b == 0) {
    out.entries.resize(0, 0);
    return out;
  }
  const SectorBasis basis(params.sites(), p + 1);
  const double d2 = params.detuning() * params.detuning();
  out.entries = detail::assemble_swap_matrix(params, basis, [&](const std::vector<site_t>& q) {
    double inside = 0.0;
    for (site_t j : q) inside += params.coupling(j) * params.coupling(j);
    return d2 + inside;
  });
  return out;
}

/// K, dim C(N,p) x C(N,p+1): K[m, q] = alpha_r iff q = O_r(m).
inline sparse_matrix build_coupling_block(const ModelParams& params, site_t p,
                                          const ResourceLimits& limits = ResourceLimits{}) {
  const auto shape = sector_shape(params.sites(), p, limits);
  const site_t n = params.sites();
  sparse_matrix k(static_cast<Eigen::Index>(shape.dim_a), static_cast<Eigen::Index>(shape.dim_b));
  if (shape.dim_b == 0) return k;
  k.reserve(static_cast<Eigen::Index>(shape.dim_a) * (n - p));
  const SectorBasis rows(n, p);
  const SectorBasis cols(n, p + 1);
  std::vector<site_t> grown(static_cast<std::size_t>(p) + 1);
  std::vector<std::pair<Eigen::Index, double>> row;
  rows.for_each([&](rank_t r, const std::vector<site_t>& m) {
    row.clear();
    for (site_t add = 1; add <= n; ++add) {
      if (std::binary_search(m.begin(), m.end(), add)) continue;
      auto pos = std::upper_bound(m.begin(), m.end(), add);
      auto out = std::copy(m.begin(), pos, grown.begin());
      *out++ = add;
      std::copy(pos, m.end(), out);
      row.emplace_back(static_cast<Eigen::Index>(cols.rank_unchecked(grown)),
                       params.coupling(add));
    }
    std::sort(row.begin(), row.end(),
              [](const auto& x, const auto& y) { return x.first < y.first; });
    k.startVec(static_cast<Eigen::Index>(r));
    for (const auto& [col, v] : row) k.insertBack(static_cast<Eigen::Index>(r), col) = v;
  });
  k.finalize();
  return k;
}

/// First-order sector matrix of order C(N+1, p+1),
///   [ s*Delta*I    K         ]
///   [ K^T         -s*Delta*I ]
/// with the a-block first. Real symmetric, hence Hermitian.
inline sparse_matrix build_first_order(const ModelParams& params, site_t p,
                                       DetuningSign sign = DetuningSign::hamiltonian,
                                       const ResourceLimits& limits = ResourceLimits{}) {
  const auto shape = sector_shape(params.sites(), p, limits);
  limits.check_dimension(shape.dim_total, "C(N+1,p+1) first-order sector matrix");
  const sparse_matrix k = build_coupling_block(params, p, limits);
  const double sd = detuning_factor(sign) * params.detuning();
  const auto na = static_cast<Eigen::Index>(shape.dim_a);
  const auto n = static_cast<Eigen::Index>(shape.dim_total);

  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(n + 2 * k.nonZeros()));
  for (Eigen::Index i = 0; i < na; ++i) trips.emplace_back(i, i, sd);
  for (Eigen::Index i = na; i < n; ++i) trips.emplace_back(i, i, -sd);
  for (Eigen::Index r = 0; r < k.outerSize(); ++r) {
    for (sparse_matrix::InnerIterator it(k, r); it; ++it) {
      trips.emplace_back(r, na + it.col(), it.value());
      trips.emplace_back(na + it.col(), r, it.value());
    }
  }
  sparse_matrix h(n, n);
  h.setFromTriplets(trips.begin(), trips.end());
  return h;
}

/// Eigenpairs of a real symmetric operator, eigenvalues ascending.
/// When fewer than dim vectors are stored, the orthogonal complement of their
/// span is an eigenspace with eigenvalue complement_eigenvalue.
struct SpectralDecomposition {
  Eigen::Index dim = 0;
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;  // dim x eigenvalues.size(), orthonormal columns
  std::optional<double> complement_eigenvalue;

  Eigen::Index explicit_count() const noexcept { return eigenvalues.size(); }
  bool complete() const noexcept { return eigenvalues.size() == dim; }

  Eigen::MatrixXd reconstruct() const {
    Eigen::MatrixXd out =
        eigenvectors * eigenvalues.asDiagonal() * eigenvectors.transpose();
    if (!complete() && complement_eigenvalue) {
      const Eigen::MatrixXd proj = eigenvectors * eigenvectors.transpose();
      out += *complement_eigenvalue * (Eigen::MatrixXd::Identity(dim, dim) - proj);
    }
    return out;
  }

  double min_eigenvalue() const {
    double m = eigenvalues.size() ? eigenvalues.minCoeff() : 0.0;
    if (complement_eigenvalue && !complete()) m = std::min(m, *complement_eigenvalue);
    return m;
  }
  double max_eigenvalue() const {
    double m = eigenvalues.size() ? eigenvalues.maxCoeff() : 0.0;
    if (complement_eigenvalue && !complete()) m = std::max(m, *complement_eigenvalue);
    return m;
  }
};

/// First component above 1e-12 in magnitude made positive, column by column.
inline void canonicalize_signs(Eigen::MatrixXd& vectors) {
  for (Eigen::Index c = 0; c < vectors.cols(); ++c) {
    for (Eigen::Index r = 0; r < vectors.rows(); ++r) {
      const double v = vectors(r, c);
      if (std::abs(v) > 1e-12) {
        if (v < 0) vectors.col(c) *= -1.0;
        break;
      }
    }
  }
}

/// Approximate peak bytes of a dense symmetric eigensolve of order n.
inline std::uint64_t dense_eigensolve_bytes(std::uint64_t n) { return 3 * n * n * sizeof(double); }

/// Dense eigensolve of a symmetric matrix.
inline SpectralDecomposition symmetric_eigen(const Eigen::MatrixXd& m) {
  SpectralDecomposition out;
  out.dim = m.rows();
  if (m.rows() == 0) return out;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(m);
  if (solver.info() != Eigen::Success) {
    throw numerical_error("symmetric eigensolver did not converge (order " +
                          std::to_string(m.rows()) + ")");
  }
  out.eigenvalues = solver.eigenvalues();
  out.eigenvectors = solver.eigenvectors();
  canonicalize_signs(out.eigenvectors);
  return out;
}

/// max |X Q - Q Lambda| using the sparse form of X.
inline double eigen_residual(const sparse_matrix& x, const SpectralDecomposition& d) {
  if (d.explicit_count() == 0) return 0.0;
  const Eigen::MatrixXd xq = x * d.eigenvectors;
  return (xq - d.eigenvectors * d.eigenvalues.asDiagonal()).cwiseAbs().maxCoeff();
}

/// Dense spectral decomposition of a companion matrix.
inline SpectralDecomposition decompose(const CompanionMatrix& m,
                                       const ResourceLimits& limits = ResourceLimits{}) {
  const auto n = static_cast<std::uint64_t>(m.dim());
  limits.check_memory(dense_eigensolve_bytes(n),
                      std::string("dense eigensolve of companion ") + to_string(m.kind) +
                          " (order " + std::to_string(n) + ")");
  for (Eigen::Index k = 0; k < m.entries.nonZeros(); ++k) {
    if (!std::isfinite(m.entries.valuePtr()[k])) {
      throw validation_error("decompose: companion matrix has non-finite entries");
    }
  }
  SpectralDecomposition d = symmetric_eigen(m.dense());
  const double tol = 1e-10 * static_cast<double>(std::max<std::uint64_t>(n, 1)) *
                     std::max(1.0, m.max_abs_entry());
  const double res = eigen_residual(m.entries, d);
  if (!(res <= tol)) {
    throw numerical_error("decompose: eigen residual " + format_real(res) + " exceeds " +
                          format_real(tol));
  }
  return d;
}

/// Spectral decomposition of Y = Delta^2 + G^T G from that of X = Delta^2 + G G^T.
///
/// The nonzero part of the spectrum of G^T G coincides with that of G G^T and
/// its eigenvectors lie in range(G^T); the orthogonal complement (null space of
/// G) has eigenvalue Delta^2. Columns G^T q_k with singular value below
/// 1e-7 of the largest are dropped, the rest are orthonormalized and refined by
/// a Rayleigh-Ritz step on the exact invariant subspace. Cost is
/// O(dim_y * k^2) instead of O(dim_y^3).
inline SpectralDecomposition decompose_paired(const SpectralDecomposition& x_decomp,
                                              const sparse_matrix& g, double delta_sq,
                                              const ResourceLimits& limits = ResourceLimits{}) {
  SpectralDecomposition out;
  out.dim = g.cols();
  out.complement_eigenvalue = delta_sq;
  if (out.dim == 0) return out;
  if (!x_decomp.complete()) {
    throw validation_error("decompose_paired: source decomposition must be complete");
  }

  const Eigen::VectorXd sigma_sq = (x_decomp.eigenvalues.array() - delta_sq).max(0.0).matrix();
  const double sigma_max = std::sqrt(sigma_sq.size() ? sigma_sq.maxCoeff() : 0.0);
  std::vector<Eigen::Index> keep;
  for (Eigen::Index k = 0; k < sigma_sq.size(); ++k) {
    if (std::sqrt(sigma_sq[k]) > 1e-7 * sigma_max && sigma_max > 0) keep.push_back(k);
  }
  const auto kept = static_cast<Eigen::Index>(keep.size());
  limits.check_memory(4 * static_cast<std::uint64_t>(out.dim) * static_cast<std::uint64_t>(kept) *
                          sizeof(double),
                      "paired eigenbasis (" + std::to_string(out.dim) + " x " +
                          std::to_string(kept) + ")");
  if (kept == 0) {
    out.eigenvalues.resize(0);
    out.eigenvectors.resize(out.dim, 0);
    return out;
  }

  Eigen::MatrixXd q_kept(x_decomp.dim, kept);
  for (Eigen::Index c = 0; c < kept; ++c) {
    q_kept.col(c) = x_decomp.eigenvectors.col(keep[static_cast<std::size_t>(c)]) /
                    std::sqrt(sigma_sq[keep[static_cast<std::size_t>(c)]]);
  }
  const sparse_matrix gt = g.transpose();
  Eigen::MatrixXd basis = gt * q_kept;
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(basis);
  Eigen::MatrixXd u = qr.householderQ() * Eigen::MatrixXd::Identity(out.dim, kept);
  basis.resize(0, 0);

  // Rayleigh-Ritz: U^T (Delta^2 + G^T G) U.
  const Eigen::MatrixXd gu = g * u;
  Eigen::MatrixXd projected = gu.transpose() * gu;
  projected.diagonal().array() += delta_sq;
  projected = 0.5 * (projected + projected.transpose()).eval();
  SpectralDecomposition small = symmetric_eigen(projected);

  out.eigenvalues = small.eigenvalues;
  out.eigenvectors = u * small.eigenvectors;
  canonicalize_signs(out.eigenvectors);
  return out;
}

enum class SpectralStrategy { automatic, dense, paired };

/// Companion matrices, coupling block and both spectral decompositions of one sector.
struct SectorSpectra {
  site_t p = 0;
  double delta_sq = 0.0;
  CompanionMatrix a;
  CompanionMatrix b;
  sparse_matrix coupling;
  SpectralDecomposition a_decomp;
  SpectralDecomposition b_decomp;
};

/// Largest order for which automatic strategy uses dense solves on both blocks.
inline constexpr Eigen::Index dense_strategy_limit = 2048;

/// Rejects a sector whose dense eigensolve cannot fit the memory budget,
/// before anything is assembled. Mirrors the choice made by decompose_sector.
inline void check_decomposition_memory(const SectorShape& shape,
                                       SpectralStrategy strategy = SpectralStrategy::automatic,
                                       const ResourceLimits& limits = ResourceLimits{}) {
  const rank_t larger = std::max(shape.dim_a, shape.dim_b);
  const bool paired = strategy == SpectralStrategy::paired ||
                      (strategy == SpectralStrategy::automatic &&
                       larger > static_cast<rank_t>(dense_strategy_limit));
  const rank_t dense_dim = paired ? std::min(shape.dim_a, shape.dim_b) : larger;
  limits.check_memory(dense_eigensolve_bytes(dense_dim),
                      "dense eigensolve of a companion matrix of order " + std::to_string(dense_dim));
}

/// Companion matrices and coupling block of one sector, without spectra.
inline SectorSpectra assemble_sector(const ModelParams& params, site_t p,
                                     const ResourceLimits& limits = ResourceLimits{}) {
  SectorSpectra s;
  s.p = p;
  s.delta_sq = params.detuning() * params.detuning();
  s.a = build_A(params, p, limits);
  s.b = build_B(params, p, limits);
  s.coupling = build_coupling_block(params, p, limits);
  return s;
}

/// Fills a_decomp and b_decomp. The paired route decomposes the smaller
/// companion densely and derives the larger one from it.
inline void decompose_sector(SectorSpectra& s,
                             SpectralStrategy strategy = SpectralStrategy::automatic,
                             const ResourceLimits& limits = ResourceLimits{}) {
  const bool a_smaller = s.a.dim() <= s.b.dim();
  const Eigen::Index larger = std::max(s.a.dim(), s.b.dim());
  const bool paired = strategy == SpectralStrategy::paired ||
                      (strategy == SpectralStrategy::automatic && larger > dense_strategy_limit);
  if (!paired) {
    s.a_decomp = decompose(s.a, limits);
    s.b_decomp = decompose(s.b, limits);
  } else if (a_smaller) {
    s.a_decomp = decompose(s.a, limits);
    s.b_decomp = decompose_paired(s.a_decomp, s.coupling, s.delta_sq, limits);
  } else {
    s.b_decomp = decompose(s.b, limits);
    const sparse_matrix kt = s.coupling.transpose();
    s.a_decomp = decompose_paired(s.b_decomp, kt, s.delta_sq, limits);
  }
}

inline SectorSpectra build_sector_spectra(const ModelParams& params, site_t p,
                                          SpectralStrategy strategy = SpectralStrategy::automatic,
                                          const ResourceLimits& limits = ResourceLimits{}) {
  SectorSpectra s = assemble_sector(params, p, limits);
  decompose_sector(s, strategy, limits);
  return s;
}

inline void write_coordinate(std::ostream& os, const CompanionMatrix& m) {
  os << "# companion " << to_string(m.kind) << " N=" << m.sites << " p=" << m.p
     << " dim=" << m.dim() << " nnz=" << m.entries.nonZeros() << '\n';
  for (Eigen::Index r = 0; r < m.entries.outerSize(); ++r) {
    for (sparse_matrix::InnerIterator it(m.entries, r); it; ++it) {
      os << it.row() << ' ' << it.col() << ' ' << format_real(it.value()) << '\n';
    }
  }
}

}  // namespace spinstar

#endif  // SPINSTAR_COMPANION_HPP
