#ifndef SPINSTAR_CLI_RUN_HPP
#define SPINSTAR_CLI_RUN_HPP

// The `run` subcommand: evolve one configured instance along the requested
// paths and write CSV series, optional dumps and a JSON manifest.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "spinstar/cli/config.hpp"
#include "spinstar/companion.hpp"
#include "spinstar/evolution.hpp"
#include "spinstar/format.hpp"
#include "spinstar/observables.hpp"
#include "spinstar/oracle.hpp"

#ifndef SPINSTAR_VERSION
#define SPINSTAR_VERSION "0.0.0"
#endif

namespace spinstar::cli {

enum exit_code : int { ok = 0, invalid = 1, invariant_failure = 2, resource_limit = 3 };

/// Tolerances used to decide the invariant-failure exit status.
inline constexpr double conservation_tolerance = 1e-10;
inline constexpr double agreement_tolerance = 1e-8;

/// Detuning sign used by every CLI path.
inline constexpr DetuningSign cli_sign = DetuningSign::hamiltonian;

class Stopwatch {
 public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

struct PathResult {
  PathKind kind;
  Trajectory rotating;
  double wall_s = 0.0;
  double norm_drift = 0.0;
  double total_sz_drift = 0.0;
  double sz_discrepancy = 0.0;
};

struct RunReport {
  int status = exit_code::ok;
  json manifest;
  std::vector<std::string> warnings;
  std::vector<std::string> failures;
  std::vector<PathResult> paths;
};

/// Column header of the per-path CSV. Time is in units of 1/frequency (hbar = 1).
inline std::string csv_header(site_t n) {
  std::string h = "t [1/freq],sum_abs_a2 [prob],sum_abs_b2 [prob],sz_central [hbar],"
                  "return_probability [prob]";
  for (site_t j = 1; j <= n; ++j) h += ",sz_site_" + std::to_string(j) + " [hbar]";
  return h;
}

inline void write_csv(std::ostream& os, const Trajectory& traj, const InitialCondition& init) {
  const auto pa = population_a(traj);
  const auto pb = population_b(traj);
  const auto sz = sz_central(traj);
  const auto ret = return_probability(traj, init);
  const auto sites = sz_sites(traj);
  os << csv_header(traj.sites) << '\n';
  for (std::size_t i = 0; i < traj.size(); ++i) {
    os << format_real(traj.times[i]) << ',' << format_real(pa.values[i]) << ','
       << format_real(pb.values[i]) << ',' << format_real(sz.value.values[i]) << ','
       << format_real(ret.values[i]);
    for (const auto& s : sites) os << ',' << format_real(s.values[i]);
    os << '\n';
  }
}

/// Long format: one row per (time, block, rank).
inline void write_amplitudes(std::ostream& os, const Trajectory& traj) {
  os << "t [1/freq],block,rank,tuple,re,im\n";
  for (std::size_t i = 0; i < traj.size(); ++i) {
    auto emit = [&](char block, site_t size, const complex_vector& v) {
      if (size > traj.sites) return;
      SectorBasis(traj.sites, size).for_each([&](rank_t r, const std::vector<site_t>& sites) {
        std::string tuple;
        for (site_t j : sites) tuple += (tuple.empty() ? "" : " ") + std::to_string(j);
        const complex z = v[static_cast<Eigen::Index>(r)];
        os << format_real(traj.times[i]) << ',' << block << ',' << r << ',' << tuple << ','
           << format_real(z.real()) << ',' << format_real(z.imag()) << '\n';
      });
    };
    emit('a', traj.p, traj.states[i].a);
    emit('b', traj.p + 1, traj.states[i].b);
  }
}

/// Row-sum bound on the spectral norm of a companion matrix.
inline double row_sum_norm(const CompanionMatrix& m) {
  double best = 0.0;
  for (Eigen::Index r = 0; r < m.entries.outerSize(); ++r) {
    double s = 0.0;
    for (sparse_matrix::InnerIterator it(m.entries, r); it; ++it) s += std::abs(it.value());
    best = std::max(best, s);
  }
  return best;
}

namespace detail {

inline std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw validation_error("cannot write '" + path.string() + "'");
  return out;
}

inline PathResult summarize(PathKind kind, Trajectory traj, double wall_s) {
  PathResult r{kind, std::move(traj), wall_s};
  r.norm_drift = 0.0;
  for (const auto& x : r.rotating.states) r.norm_drift = std::max(r.norm_drift, std::abs(x.norm() - 1.0));
  r.total_sz_drift = total_sz(r.rotating).drift();
  r.sz_discrepancy = sz_central(r.rotating).discrepancy.max_abs();
  return r;
}

}  // namespace detail

/// Executes a parsed configuration. Throws validation_error, resource_error or
/// numerical_error; invariant breaches are reported through RunReport::status.
inline RunReport execute(const RunConfig& cfg, const ResourceLimits& limits, std::ostream& log) {
  namespace fs = std::filesystem;
  RunReport report;
  Stopwatch total;
  json wall;

  const ModelParams model = cfg.model();
  const InitialCondition init = cfg.initial();
  const SectorShape shape = sector_shape(model, init, limits);
  const site_t n = model.sites();
  const site_t p = init.p();
  const std::vector<double> times = cfg.times();
  const Grid grid = cfg.resolved_grid();

  if (p == n) {
    report.warnings.push_back("p=N eigenstate: every bath spin is up, observables stay constant");
  }
  if (effective_frequency(model) == 0.0 && !cfg.grid) {
    report.warnings.push_back("alpha_eff = 0: default grid spans [0, 2 pi]");
  }

  // Fail fast on requests that cannot be honoured at this size.
  if (cfg.wants(PathKind::oracle)) oracle::check_size(n);
  if (cfg.wants(PathKind::closed_form)) {
    check_decomposition_memory(shape, SpectralStrategy::automatic, limits);
  }

  const AmplitudePair x0 = initial_state(init, shape, n);
  std::optional<SectorSpectra> spectra;
  const bool need_matrices = cfg.wants(PathKind::closed_form) || cfg.wants(PathKind::series) ||
                             cfg.wants(OutputFormat::matrices);
  if (need_matrices) {
    Stopwatch sw;
    spectra = assemble_sector(model, p, limits);
    wall["build"] = sw.seconds();
  }
  std::optional<AmplitudePair> v0;
  if (spectra) v0 = initial_derivatives(x0, spectra->coupling, model.detuning(), cli_sign);

  if (cfg.wants(PathKind::series)) {
    const double bound = std::max(row_sum_norm(spectra->a), row_sum_norm(spectra->b));
    const double measure = bound * grid.t_max * grid.t_max;
    if (measure > series_validity_bound) {
      throw validation_error("paths: series requires ||X|| t_max^2 <= " +
                             format_real(series_validity_bound) + ", got " + format_real(measure) +
                             " (||X|| <= " + format_real(bound) + "); shorten grid.t_max to at most " +
                             format_real(std::sqrt(series_validity_bound / bound)) +
                             " or drop the series path");
    }
  }

  std::optional<oracle::FullStateVector> oracle_final;
  for (PathKind kind : cfg.paths) {
    Stopwatch sw;
    Trajectory traj;
    switch (kind) {
      case PathKind::closed_form: {
        Stopwatch ds;
        decompose_sector(*spectra, SpectralStrategy::automatic, limits);
        wall["decompose"] = ds.seconds();
        traj = evolve_closed_form(x0, *v0, spectra->a_decomp, spectra->b_decomp, times, n, p);
        break;
      }
      case PathKind::series: {
        traj = Trajectory{n, p, Frame::rotating, times, {}};
        for (double t : times) traj.states.push_back(evolve_series(x0, *v0, spectra->a, spectra->b, t));
        break;
      }
      case PathKind::first_order:
        traj = evolve_first_order(model, p, x0, times, cli_sign, limits);
        break;
      case PathKind::oracle: {
        const oracle::FullPropagator prop(model);
        traj = to_rotating_frame(oracle::sector_trajectory(prop, x0, p, times), model);
        if (cfg.wants(OutputFormat::oracle_state)) {
          const std::vector<double> last{times.back()};
          oracle_final = prop.propagate(oracle::embed_sector(x0, n, p), last).front();
        }
        break;
      }
      case PathKind::analytic_p0:
        traj = closed_form_p0(model, times, cli_sign);
        break;
    }
    const double seconds = sw.seconds();
    wall[to_string(kind)] = seconds;
    report.paths.push_back(detail::summarize(kind, std::move(traj), seconds));
  }

  // Invariants and cross-path agreement.
  json path_info = json::object();
  double max_norm_drift = 0.0;
  for (const auto& r : report.paths) {
    max_norm_drift = std::max(max_norm_drift, r.norm_drift);
    path_info[to_string(r.kind)] = {{"norm_drift", r.norm_drift},
                                    {"total_sz_drift", r.total_sz_drift},
                                    {"sz_central_discrepancy", r.sz_discrepancy},
                                    {"wall_s", r.wall_s}};
    auto check = [&](double value, const char* what) {
      if (!(value <= conservation_tolerance)) {
        report.failures.push_back(std::string(to_string(r.kind)) + ": " + what + " " +
                                  format_real(value) + " exceeds " + format_real(conservation_tolerance));
      }
    };
    check(r.norm_drift, "norm drift");
    check(r.total_sz_drift, "total S_z drift");
    check(r.sz_discrepancy, "S_z^A expression discrepancy");
  }
  json agreement = json::array();
  for (std::size_t i = 0; i < report.paths.size(); ++i) {
    for (std::size_t k = i + 1; k < report.paths.size(); ++k) {
      const double d = max_deviation(report.paths[i].rotating, report.paths[k].rotating);
      const std::string a = to_string(report.paths[i].kind);
      const std::string b = to_string(report.paths[k].kind);
      agreement.push_back({{"paths", {a, b}}, {"max_amplitude_deviation", d}});
      if (!(d <= agreement_tolerance)) {
        report.failures.push_back(a + " vs " + b + ": amplitude deviation " + format_real(d) +
                                  " exceeds " + format_real(agreement_tolerance));
      }
    }
  }

  // Outputs.
  Stopwatch out_sw;
  const fs::path dir(cfg.directory);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw validation_error("outputs.directory: cannot create '" + dir.string() + "': " + ec.message());
  json files = json::array();
  for (const auto& r : report.paths) {
    const Trajectory out = cfg.frame == Frame::lab ? to_lab_frame(r.rotating, model) : r.rotating;
    if (cfg.wants(OutputFormat::csv)) {
      const std::string name = std::string(to_string(r.kind)) + ".csv";
      auto os = detail::open_output(dir / name);
      write_csv(os, out, init);
      files.push_back(name);
    }
    if (cfg.wants(OutputFormat::amplitudes)) {
      const std::string name = std::string("amplitudes_") + to_string(r.kind) + ".csv";
      auto os = detail::open_output(dir / name);
      write_amplitudes(os, out);
      files.push_back(name);
    }
  }
  if (cfg.wants(OutputFormat::matrices)) {
    for (const CompanionMatrix* m : {&spectra->a, &spectra->b}) {
      const std::string name = std::string("companion_") + to_string(m->kind) + ".txt";
      auto os = detail::open_output(dir / name);
      write_coordinate(os, *m);
      files.push_back(name);
    }
  }
  if (oracle_final) {
    auto os = detail::open_output(dir / "oracle_state.txt");
    os << "# full state at t=" << format_real(times.back())
       << " (lab frame); bit 0 central spin, bit j bath site j, set bit = up\n";
    oracle::write_state_vector(os, *oracle_final);
    files.push_back("oracle_state.txt");
  }
  wall["output"] = out_sw.seconds();
  wall["total"] = total.seconds();

  report.status = report.failures.empty() ? exit_code::ok : exit_code::invariant_failure;
  std::vector<std::string> path_names;
  for (PathKind k : cfg.paths) path_names.emplace_back(to_string(k));
  report.manifest = {
      {"tool", "spinstar"},
      {"version", SPINSTAR_VERSION},
      {"config_hash", hex(cfg.hash)},
      {"status", report.status == exit_code::ok ? "ok" : "invariant_failure"},
      {"model",
       {{"N", n},
        {"omega", model.omega()},
        {"omega0", model.omega0()},
        {"couplings", model.couplings()},
        {"coupling_source", cfg.coupling_source},
        {"detuning", model.detuning()},
        {"alpha_eff", effective_frequency(model)}}},
      {"initial", {{"up_sites", cfg.up_sites}, {"p", p}}},
      {"sector", {{"dim_a", shape.dim_a}, {"dim_b", shape.dim_b}, {"dim_total", shape.dim_total}}},
      {"grid", {{"t_max", grid.t_max}, {"num_points", grid.num_points}, {"default", !cfg.grid}}},
      {"frame", to_string(cfg.frame)},
      {"detuning_sign", "hamiltonian"},
      {"paths", path_names},
      {"path_metrics", path_info},
      {"max_norm_drift", max_norm_drift},
      {"path_agreement", agreement},
      {"wall_time_s", wall},
      {"warnings", report.warnings},
      {"failures", report.failures},
      {"files", files},
  };
  {
    auto os = detail::open_output(dir / "manifest.json");
    os << report.manifest.dump(2) << '\n';
  }

  for (const auto& w : report.warnings) log << "warning: " << w << '\n';
  for (const auto& f : report.failures) log << "invariant failure: " << f << '\n';
  return report;
}

/// Maps library exceptions onto exit codes and prints diagnostics.
template <typename Fn>
int guarded(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const validation_error& e) {
    for (const auto& d : e.diagnostics()) err << "error: " << d << '\n';
    return exit_code::invalid;
  } catch (const resource_error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::resource_limit;
  } catch (const numerical_error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code::invariant_failure;
  }
}

inline int run_command(const std::string& config_path, std::ostream& out, std::ostream& err,
                       const ResourceLimits& limits) {
  return guarded(err, [&] {
    const RunConfig cfg = load_config(config_path);
    const RunReport report = execute(cfg, limits, err);
    out << "wrote " << cfg.directory << "/manifest.json (status "
        << report.manifest["status"].get<std::string>() << ")\n";
    return report.status;
  });
}

}  // namespace spinstar::cli

#endif  // SPINSTAR_CLI_RUN_HPP
