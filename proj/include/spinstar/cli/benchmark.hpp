#ifndef SPINSTAR_CLI_BENCHMARK_HPP
#define SPINSTAR_CLI_BENCHMARK_HPP

// The `benchmark` subcommand: wall time of build, decomposition and
// closed-form evolution for a list of (N, p) sectors. Sectors rejected by the
// dimension cap or the memory guard are reported as skipped rows.

#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include "spinstar/cli/config.hpp"
#include "spinstar/cli/run.hpp"
#include "spinstar/cli/verify.hpp"
#include "spinstar/companion.hpp"
#include "spinstar/evolution.hpp"

namespace spinstar::cli {

struct BenchmarkCase {
  site_t n = 0;
  site_t p = 0;
};

struct BenchmarkSpec {
  std::vector<BenchmarkCase> cases;
  std::uint64_t seed = 1;
  std::size_t num_times = 101;
  std::string output;  // empty: standard output
};

struct BenchmarkRow {
  BenchmarkCase c;
  rank_t dim_a = 0;
  rank_t dim_b = 0;
  std::string status;  // ok, skipped or failed
  double build_s = 0.0;
  double decompose_s = 0.0;
  double evolve_s = 0.0;
  double total_s = 0.0;
  double max_norm_drift = 0.0;
  std::string reason;
};

inline BenchmarkSpec parse_benchmark_spec(const json& doc) {
  detail::Reader r;
  BenchmarkSpec spec;
  if (!r.expect_object(doc, "spec")) throw validation_error(r.diagnostics);
  r.reject_unknown(doc, "", {"cases", "seed", "num_times", "output"});
  if (const json* cases = r.field(doc, "", "cases", true)) {
    if (!cases->is_array() || cases->empty()) {
      r.fail("cases", "expected a non-empty list of {\"N\": ..., \"p\": ...}");
    } else {
      for (std::size_t i = 0; i < cases->size(); ++i) {
        const std::string at = "cases[" + std::to_string(i) + "]";
        const json& c = (*cases)[i];
        if (!r.expect_object(c, at)) continue;
        r.reject_unknown(c, at, {"N", "p"});
        const auto n = r.integer(c, at, "N");
        const auto p = r.integer(c, at, "p");
        if (!n || !p) continue;
        if (*n < 1 || *n > 100000) {
          r.fail(at + ".N", "must lie in [1, 100000]");
        } else if (*p < 0 || *p > *n) {
          r.fail(at + ".p", "must lie in [0, N]");
        } else {
          spec.cases.push_back({static_cast<site_t>(*n), static_cast<site_t>(*p)});
        }
      }
    }
  }
  if (const json* s = r.field(doc, "", "seed", false)) {
    if (s->is_number_unsigned() || (s->is_number_integer() && s->get<std::int64_t>() >= 0)) {
      spec.seed = s->get<std::uint64_t>();
    } else {
      r.fail("seed", "expected a non-negative integer");
    }
  }
  if (const json* k = r.field(doc, "", "num_times", false)) {
    if (k->is_number_integer() && k->get<std::int64_t>() >= 2) {
      spec.num_times = k->get<std::size_t>();
    } else {
      r.fail("num_times", "expected an integer >= 2");
    }
  }
  if (const json* o = r.field(doc, "", "output", false)) {
    if (o->is_string()) {
      spec.output = o->get<std::string>();
    } else {
      r.fail("output", "expected a path string");
    }
  }
  if (!r.diagnostics.empty()) throw validation_error(r.diagnostics);
  return spec;
}

inline BenchmarkSpec load_benchmark_spec(const std::string& path) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw validation_error(std::string("benchmark spec is not valid JSON: ") + e.what());
  }
  return parse_benchmark_spec(doc);
}

/// One sector: seeded random couplings, initial up set {1..p}, closed form on
/// num_times points over [0, 4 pi / alpha_eff].
inline BenchmarkRow benchmark_case(const BenchmarkCase& c, const BenchmarkSpec& spec,
                                   const ResourceLimits& limits) {
  BenchmarkRow row;
  row.c = c;
  Stopwatch total;
  try {
    const SectorShape shape = sector_shape(c.n, c.p, limits);
    row.dim_a = shape.dim_a;
    row.dim_b = shape.dim_b;
    check_decomposition_memory(shape, SpectralStrategy::automatic, limits);

    const ModelParams model = verify_model(c.n, spec.seed);
    std::vector<site_t> up;
    for (site_t j = 1; j <= c.p; ++j) up.push_back(j);
    const InitialCondition init(model, SpinTuple(up));

    Stopwatch sw;
    SectorSpectra spectra = assemble_sector(model, c.p, limits);
    row.build_s = sw.seconds();

    sw = Stopwatch{};
    decompose_sector(spectra, SpectralStrategy::automatic, limits);
    row.decompose_s = sw.seconds();

    sw = Stopwatch{};
    const double span = 4.0 * std::numbers::pi / effective_frequency(model);
    std::vector<double> times(spec.num_times);
    for (std::size_t i = 0; i < times.size(); ++i) {
      times[i] = span * static_cast<double>(i) / static_cast<double>(times.size() - 1);
    }
    const AmplitudePair x0 = initial_state(init, shape, c.n);
    const AmplitudePair v0 = initial_derivatives(x0, spectra.coupling, model.detuning(), cli_sign);
    const Trajectory traj =
        evolve_closed_form(x0, v0, spectra.a_decomp, spectra.b_decomp, times, c.n, c.p);
    row.evolve_s = sw.seconds();

    for (const auto& x : traj.states) {
      row.max_norm_drift = std::max(row.max_norm_drift, std::abs(x.norm() - 1.0));
    }
    row.status = row.max_norm_drift <= conservation_tolerance ? "ok" : "failed";
    if (row.status == "failed") row.reason = "norm drift above " + format_real(conservation_tolerance);
  } catch (const resource_error& e) {
    row.status = "skipped";
    row.reason = e.what();
  } catch (const numerical_error& e) {
    row.status = "failed";
    row.reason = e.what();
  }
  row.total_s = total.seconds();
  return row;
}

inline std::string csv_quote(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

inline void write_benchmark_header(std::ostream& os) {
  os << "N,p,dim_a,dim_b,status,build_s,decompose_s,evolve_s,total_s,max_norm_drift,reason\n";
}

inline void write_benchmark_row(std::ostream& os, const BenchmarkRow& r) {
  os << r.c.n << ',' << r.c.p << ',' << r.dim_a << ',' << r.dim_b << ',' << r.status << ','
     << format_real(r.build_s) << ',' << format_real(r.decompose_s) << ','
     << format_real(r.evolve_s) << ',' << format_real(r.total_s) << ','
     << format_real(r.max_norm_drift) << ',' << csv_quote(r.reason) << '\n';
}

inline std::vector<BenchmarkRow> run_benchmark(const BenchmarkSpec& spec, const ResourceLimits& limits,
                                               std::ostream& progress) {
  std::vector<BenchmarkRow> rows;
  for (const auto& c : spec.cases) {
    rows.push_back(benchmark_case(c, spec, limits));
    progress << "N=" << c.n << " p=" << c.p << ": " << rows.back().status;
    if (!rows.back().reason.empty()) progress << " (" << rows.back().reason << ")";
    progress << '\n';
  }
  return rows;
}

/// Exit status 0 unless a sector that ran failed its norm check; skipped
/// sectors are not failures.
inline int benchmark_command(const std::string& spec_path, std::ostream& out, std::ostream& err,
                             const ResourceLimits& limits) {
  return guarded(err, [&] {
    const BenchmarkSpec spec = load_benchmark_spec(spec_path);
    const auto rows = run_benchmark(spec, limits, err);
    auto emit = [&](std::ostream& os) {
      write_benchmark_header(os);
      for (const auto& r : rows) write_benchmark_row(os, r);
    };
    if (spec.output.empty()) {
      emit(out);
    } else {
      const std::filesystem::path path(spec.output);
      if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
      auto os = detail::open_output(path);
      emit(os);
      out << "wrote " << spec.output << '\n';
    }
    for (const auto& r : rows) {
      if (r.status == "failed") return static_cast<int>(exit_code::invariant_failure);
    }
    return static_cast<int>(exit_code::ok);
  });
}

}  // namespace spinstar::cli

#endif  // SPINSTAR_CLI_BENCHMARK_HPP
