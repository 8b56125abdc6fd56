#ifndef SPINSTAR_EVOLUTION_HPP
#define SPINSTAR_EVOLUTION_HPP

// Time-dependent sector amplitudes. Four routes are provided:
//   - closed form  x(t) = cos(sqrt(X) t) x(0) + sin(sqrt(X) t) sqrt(X)^-1 x'(0)
//     evaluated spectrally on each companion block;
//   - the truncated power series of the same second-order solution;
//   - the analytic single-frequency solution of the p = 0 sector;
//   - direct unitary propagation of the first-order sector system.
// All return rotating-frame amplitudes; to_lab_frame restores the global phase.

#include <cmath>
#include <complex>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

#include "spinstar/companion.hpp"
#include "spinstar/error.hpp"
#include "spinstar/model.hpp"
#include "spinstar/tuple_index.hpp"

namespace spinstar {

using complex = std::complex<double>;
using complex_vector = Eigen::VectorXcd;

struct AmplitudePair {
  complex_vector a;  // central up, indexed by rank of the p-tuple
  complex_vector b;  // central down, indexed by rank of the (p+1)-tuple

  double norm_a() const { return a.squaredNorm(); }
  double norm_b() const { return b.squaredNorm(); }
  double norm() const { return norm_a() + norm_b(); }
};

/// max |x - y| over both blocks. Dimensions must agree.
inline double max_deviation(const AmplitudePair& x, const AmplitudePair& y) {
  if (x.a.size() != y.a.size() || x.b.size() != y.b.size()) {
    throw validation_error("max_deviation: amplitude dimensions differ");
  }
  double m = 0.0;
  if (x.a.size()) m = std::max(m, (x.a - y.a).cwiseAbs().maxCoeff());
  if (x.b.size()) m = std::max(m, (x.b - y.b).cwiseAbs().maxCoeff());
  return m;
}

enum class Frame { rotating, lab };

inline const char* to_string(Frame f) { return f == Frame::rotating ? "rotating" : "lab"; }

struct Trajectory {
  site_t sites = 0;
  site_t p = 0;
  Frame frame = Frame::rotating;
  std::vector<double> times;
  std::vector<AmplitudePair> states;

  std::size_t size() const noexcept { return times.size(); }
};

inline double max_deviation(const Trajectory& x, const Trajectory& y) {
  if (x.size() != y.size()) throw validation_error("max_deviation: trajectory lengths differ");
  double m = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) m = std::max(m, max_deviation(x.states[i], y.states[i]));
  return m;
}

namespace detail {

inline void check_times(std::span<const double> times) {
  if (times.empty()) throw validation_error("time grid is empty");
  for (std::size_t i = 0; i < times.size(); ++i) {
    if (!std::isfinite(times[i])) throw validation_error("time grid has a non-finite entry");
    if (i > 0 && !(times[i] > times[i - 1])) {
      throw validation_error("time grid must be strictly increasing");
    }
  }
}

/// Real sparse matrix times complex vector.
inline complex_vector apply(const sparse_matrix& m, const complex_vector& x) {
  const Eigen::VectorXd re = m * x.real();
  const Eigen::VectorXd im = m * x.imag();
  complex_vector out(re.size());
  out.real() = re;
  out.imag() = im;
  return out;
}

inline complex_vector apply(const Eigen::MatrixXd& m, const complex_vector& x) {
  complex_vector out(m.rows());
  out.real() = m * x.real();
  out.imag() = m * x.imag();
  return out;
}

inline complex_vector apply_transpose(const Eigen::MatrixXd& m, const complex_vector& x) {
  complex_vector out(m.cols());
  out.real() = m.transpose() * x.real();
  out.imag() = m.transpose() * x.imag();
  return out;
}

}  // namespace detail

/// cos(sqrt(lambda) t).
inline double cos_root(double lambda, double t) { return std::cos(std::sqrt(lambda) * t); }

/// sin(sqrt(lambda) t) / sqrt(lambda), equal to t in the lambda -> 0 limit.
/// Below sqrt(lambda)|t| = 1e-4 the two-term Taylor form is used.
inline double sinc_root(double lambda, double t, double zero_threshold = 0.0) {
  if (lambda <= zero_threshold) return t;
  const double w = std::sqrt(lambda);
  if (w * std::abs(t) < 1e-4) return t * (1.0 - lambda * t * t / 6.0);
  return std::sin(w * t) / w;
}

/// Product state with central spin up and up_set up: a unit vector in the a-block.
inline AmplitudePair initial_state(const InitialCondition& init, const SectorShape& shape,
                                   site_t n_sites) {
  AmplitudePair x;
  x.a = complex_vector::Zero(static_cast<Eigen::Index>(shape.dim_a));
  x.b = complex_vector::Zero(static_cast<Eigen::Index>(shape.dim_b));
  const SectorBasis basis(n_sites, init.p());
  x.a[static_cast<Eigen::Index>(basis.rank(init.up_set()))] = 1.0;
  return x;
}

inline AmplitudePair initial_state(const ModelParams& params, const InitialCondition& init,
                                   const ResourceLimits& limits = ResourceLimits{}) {
  return initial_state(init, sector_shape(params, init, limits), params.sites());
}

/// a' = -i (s Delta a + K b),  b' = -i (K^T a - s Delta b).
inline AmplitudePair initial_derivatives(const AmplitudePair& x0, const sparse_matrix& coupling,
                                         double detuning, DetuningSign sign) {
  if (x0.a.size() != coupling.rows() || x0.b.size() != coupling.cols()) {
    throw validation_error("initial_derivatives: amplitude dimensions (" +
                           std::to_string(x0.a.size()) + ", " + std::to_string(x0.b.size()) +
                           ") do not match the sector (" + std::to_string(coupling.rows()) + ", " +
                           std::to_string(coupling.cols()) + ")");
  }
  const double sd = detuning_factor(sign) * detuning;
  const complex minus_i(0.0, -1.0);
  AmplitudePair v;
  v.a = minus_i * (sd * x0.a + detail::apply(coupling, x0.b));
  const sparse_matrix kt = coupling.transpose();
  v.b = minus_i * (detail::apply(kt, x0.a) - sd * x0.b);
  return v;
}

inline AmplitudePair initial_derivatives(const AmplitudePair& x0, const ModelParams& params,
                                         site_t p, DetuningSign sign = DetuningSign::hamiltonian,
                                         const ResourceLimits& limits = ResourceLimits{}) {
  return initial_derivatives(x0, build_coupling_block(params, p, limits), params.detuning(), sign);
}

/// Closed-form second-order solution on one companion block, with the
/// projections of x(0) and x'(0) onto the eigenbasis precomputed.
class BlockPropagator {
 public:
  BlockPropagator() = default;
  BlockPropagator(const SpectralDecomposition& d, const complex_vector& x0,
                  const complex_vector& v0)
      : d_(&d), x0_(x0) {
    if (x0.size() != d.dim || v0.size() != d.dim) {
      throw validation_error("closed form: block dimension mismatch (state " +
                             std::to_string(x0.size()) + ", spectrum " + std::to_string(d.dim) + ")");
    }
    const double top = std::max(1.0, std::abs(d.max_eigenvalue()));
    if (d.dim > 0 && d.min_eigenvalue() < -1e-10 * top) {
      throw numerical_error("closed form: companion eigenvalue " + format_real(d.min_eigenvalue()) +
                            " is negative beyond tolerance");
    }
    zero_threshold_ = 1e-12 * std::max(0.0, d.max_eigenvalue());
    lambda_ = d.eigenvalues.cwiseMax(0.0);
    x_coeff_ = detail::apply_transpose(d.eigenvectors, x0);
    v_coeff_ = detail::apply_transpose(d.eigenvectors, v0);
    if (!d.complete()) {
      x_rest_ = x0 - detail::apply(d.eigenvectors, x_coeff_);
      v_rest_ = v0 - detail::apply(d.eigenvectors, v_coeff_);
      mu_ = std::max(0.0, d.complement_eigenvalue.value_or(0.0));
    }
  }

  complex_vector at(double t) const {
    if (d_ == nullptr || d_->dim == 0) return complex_vector(0);
    if (t == 0.0) return x0_;  // skip the round trip through the eigenbasis
    complex_vector coeff(lambda_.size());
    for (Eigen::Index k = 0; k < lambda_.size(); ++k) {
      coeff[k] = cos_root(lambda_[k], t) * x_coeff_[k] +
                 sinc_root(lambda_[k], t, zero_threshold_) * v_coeff_[k];
    }
    complex_vector out = detail::apply(d_->eigenvectors, coeff);
    if (!d_->complete()) {
      out += cos_root(mu_, t) * x_rest_ + sinc_root(mu_, t, zero_threshold_) * v_rest_;
    }
    return out;
  }

 private:
  const SpectralDecomposition* d_ = nullptr;
  complex_vector x0_;
  Eigen::VectorXd lambda_;
  double zero_threshold_ = 0.0;
  complex_vector x_coeff_, v_coeff_;
  complex_vector x_rest_, v_rest_;
  double mu_ = 0.0;
};

/// Both blocks of the closed-form solution. The decompositions must outlive it.
class ClosedFormPropagator {
 public:
  ClosedFormPropagator(const SpectralDecomposition& a_decomp, const SpectralDecomposition& b_decomp,
                       const AmplitudePair& x0, const AmplitudePair& v0)
      : a_(a_decomp, x0.a, v0.a), b_(b_decomp, x0.b, v0.b) {}

  AmplitudePair at(double t) const { return {a_.at(t), b_.at(t)}; }

 private:
  BlockPropagator a_;
  BlockPropagator b_;
};

inline Trajectory evolve_closed_form(const AmplitudePair& x0, const AmplitudePair& v0,
                                     const SpectralDecomposition& a_decomp,
                                     const SpectralDecomposition& b_decomp,
                                     std::span<const double> times, site_t n_sites, site_t p) {
  detail::check_times(times);
  const ClosedFormPropagator prop(a_decomp, b_decomp, x0, v0);
  Trajectory traj{n_sites, p, Frame::rotating, {times.begin(), times.end()}, {}};
  traj.states.reserve(times.size());
  for (double t : times) traj.states.push_back(prop.at(t));
  return traj;
}

/// Closed form from a product initial condition, building everything needed.
inline Trajectory evolve_closed_form(const ModelParams& params, const InitialCondition& init,
                                     std::span<const double> times,
                                     DetuningSign sign = DetuningSign::hamiltonian,
                                     SpectralStrategy strategy = SpectralStrategy::automatic,
                                     const ResourceLimits& limits = ResourceLimits{}) {
  const SectorSpectra spectra = build_sector_spectra(params, init.p(), strategy, limits);
  const AmplitudePair x0 = initial_state(params, init, limits);
  const AmplitudePair v0 = initial_derivatives(x0, spectra.coupling, params.detuning(), sign);
  return evolve_closed_form(x0, v0, spectra.a_decomp, spectra.b_decomp, times, params.sites(),
                            init.p());
}

/// Default truncation for the series route; valid while ||X|| t^2 <= 25.
inline constexpr int default_series_terms = 40;
inline constexpr double series_validity_bound = 25.0;

/// sum_{k<terms} (-1)^k t^{2k}/(2k)! X^k x(0) + (-1)^k t^{2k+1}/(2k+1)! X^k x'(0) per block.
inline AmplitudePair evolve_series(const AmplitudePair& x0, const AmplitudePair& v0,
                                   const CompanionMatrix& a, const CompanionMatrix& b, double t,
                                   int terms = default_series_terms) {
  if (terms < 1) throw validation_error("evolve_series: terms must be >= 1");
  auto block = [&](const sparse_matrix& m, const complex_vector& x, const complex_vector& v) {
    if (m.rows() != x.size() || m.rows() != v.size()) {
      throw validation_error("evolve_series: block dimension mismatch");
    }
    complex_vector cos_term = x;
    complex_vector sin_term = t * v;
    complex_vector sum = cos_term + sin_term;
    for (int k = 0; k + 1 < terms; ++k) {
      const double two_k = 2.0 * k;
      cos_term = (-t * t / ((two_k + 1.0) * (two_k + 2.0))) * detail::apply(m, cos_term);
      sin_term = (-t * t / ((two_k + 2.0) * (two_k + 3.0))) * detail::apply(m, sin_term);
      sum += cos_term + sin_term;
    }
    return sum;
  };
  return {block(a.entries, x0.a, v0.a), block(b.entries, x0.b, v0.b)};
}

/// Analytic p = 0 solution with alpha_eff = sqrt(sum alpha^2 + Delta^2):
///   a(t)   = cos(alpha_eff t) - i s (Delta / alpha_eff) sin(alpha_eff t)
///   b_j(t) = -i (alpha_j / alpha_eff) sin(alpha_eff t)
/// with s = +1 for the published sign. alpha_eff = 0 gives a(t) = 1.
inline Trajectory closed_form_p0(const ModelParams& params, std::span<const double> times,
                                 DetuningSign sign = DetuningSign::hamiltonian) {
  detail::check_times(times);
  const double w = effective_frequency(params);
  const double s = detuning_factor(sign);
  const auto n = static_cast<Eigen::Index>(params.sites());
  Trajectory traj{params.sites(), 0, Frame::rotating, {times.begin(), times.end()}, {}};
  traj.states.reserve(times.size());
  for (double t : times) {
    AmplitudePair x;
    x.a = complex_vector::Ones(1);
    x.b = complex_vector::Zero(n);
    if (w > 0.0) {
      const double c = std::cos(w * t);
      const double sn = std::sin(w * t);
      x.a[0] = complex(c, -s * params.detuning() / w * sn);
      for (Eigen::Index j = 0; j < n; ++j) {
        x.b[j] = complex(0.0, -params.couplings()[static_cast<std::size_t>(j)] / w * sn);
      }
    }
    traj.states.push_back(std::move(x));
  }
  return traj;
}

/// Dense spectral propagation exp(-i H t) of an arbitrary sector state under
/// the first-order sector matrix.
inline Trajectory evolve_first_order(const ModelParams& params, site_t p, const AmplitudePair& x0,
                                     std::span<const double> times,
                                     DetuningSign sign = DetuningSign::hamiltonian,
                                     const ResourceLimits& limits = ResourceLimits{}) {
  detail::check_times(times);
  const sparse_matrix h = build_first_order(params, p, sign, limits);
  const auto n = static_cast<std::uint64_t>(h.rows());
  limits.check_memory(dense_eigensolve_bytes(n),
                      "dense eigensolve of the first-order sector matrix (order " +
                          std::to_string(n) + ")");
  const Eigen::Index na = x0.a.size();
  if (na + x0.b.size() != h.rows()) {
    throw validation_error("evolve_first_order: state dimension does not match the sector");
  }
  const SpectralDecomposition d = symmetric_eigen(Eigen::MatrixXd(h));
  complex_vector full(h.rows());
  full << x0.a, x0.b;
  const complex_vector coeff = detail::apply_transpose(d.eigenvectors, full);

  Trajectory traj{params.sites(), p, Frame::rotating, {times.begin(), times.end()}, {}};
  traj.states.reserve(times.size());
  complex_vector phased(coeff.size());
  for (double t : times) {
    for (Eigen::Index k = 0; k < coeff.size(); ++k) {
      phased[k] = std::polar(1.0, -d.eigenvalues[k] * t) * coeff[k];
    }
    const complex_vector out = detail::apply(d.eigenvectors, phased);
    traj.states.push_back({out.head(na), out.tail(out.size() - na)});
  }
  return traj;
}

/// Energy omega*(2p - N) + omega common to every state of the sector and
/// dropped from the rotating-frame equations.
inline double sector_energy_shift(const ModelParams& params, site_t p) {
  return params.omega() * (2.0 * p - params.sites()) + params.omega();
}

inline AmplitudePair with_phase(const AmplitudePair& x, double phase) {
  const complex f = std::polar(1.0, phase);
  return {f * x.a, f * x.b};
}

/// Multiplies each snapshot by exp(-i E0 t). Probabilities are unchanged.
inline Trajectory to_lab_frame(const Trajectory& traj, const ModelParams& params) {
  if (traj.frame != Frame::rotating) throw validation_error("to_lab_frame: trajectory is not rotating-frame");
  const double e0 = sector_energy_shift(params, traj.p);
  Trajectory out = traj;
  out.frame = Frame::lab;
  for (std::size_t i = 0; i < out.size(); ++i) out.states[i] = with_phase(traj.states[i], -e0 * traj.times[i]);
  return out;
}

/// Inverse of to_lab_frame.
inline Trajectory to_rotating_frame(const Trajectory& traj, const ModelParams& params) {
  if (traj.frame != Frame::lab) throw validation_error("to_rotating_frame: trajectory is not lab-frame");
  const double e0 = sector_energy_shift(params, traj.p);
  Trajectory out = traj;
  out.frame = Frame::rotating;
  for (std::size_t i = 0; i < out.size(); ++i) out.states[i] = with_phase(traj.states[i], e0 * traj.times[i]);
  return out;
}

}  // namespace spinstar

#endif  // SPINSTAR_EVOLUTION_HPP
