#ifndef SPINSTAR_CLI_CONFIG_HPP
#define SPINSTAR_CLI_CONFIG_HPP

// Strict JSON run configuration. Every problem found is collected into one
// validation_error, keyed by its field path. Unknown keys are errors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "spinstar/error.hpp"
#include "spinstar/evolution.hpp"
#include "spinstar/model.hpp"

namespace spinstar::cli {

using json = nlohmann::json;

enum class PathKind { closed_form, series, first_order, oracle, analytic_p0 };
enum class OutputFormat { csv, amplitudes, matrices, oracle_state };

inline constexpr PathKind all_paths[] = {PathKind::closed_form, PathKind::series,
                                         PathKind::first_order, PathKind::oracle,
                                         PathKind::analytic_p0};
inline constexpr OutputFormat all_formats[] = {OutputFormat::csv, OutputFormat::amplitudes,
                                               OutputFormat::matrices, OutputFormat::oracle_state};

inline const char* to_string(PathKind p) {
  switch (p) {
    case PathKind::closed_form: return "closed_form";
    case PathKind::series: return "series";
    case PathKind::first_order: return "first_order";
    case PathKind::oracle: return "oracle";
    case PathKind::analytic_p0: return "analytic_p0";
  }
  return "?";
}

inline const char* to_string(OutputFormat f) {
  switch (f) {
    case OutputFormat::csv: return "csv";
    case OutputFormat::amplitudes: return "amplitudes";
    case OutputFormat::matrices: return "matrices";
    case OutputFormat::oracle_state: return "oracle_state";
  }
  return "?";
}

struct Grid {
  double t_max = 0.0;
  std::size_t num_points = 0;
};

inline constexpr std::size_t default_num_points = 1001;

struct RunConfig {
  site_t n = 0;
  double omega = 0.0;
  double omega0 = 0.0;
  std::vector<double> couplings;  // resolved
  std::string coupling_source;    // "list", "uniform" or "random"
  std::vector<site_t> up_sites;
  std::optional<Grid> grid;
  std::vector<PathKind> paths{PathKind::closed_form};
  std::string directory = "spinstar-output";
  std::vector<OutputFormat> formats{OutputFormat::csv};
  Frame frame = Frame::rotating;
  std::uint64_t hash = 0;  // FNV-1a of the canonical JSON text

  ModelParams model() const { return ModelParams::validate(n, omega, omega0, couplings); }
  InitialCondition initial() const { return InitialCondition(model(), SpinTuple(up_sites)); }
  site_t p() const { return static_cast<site_t>(up_sites.size()); }

  bool wants(PathKind k) const { return std::find(paths.begin(), paths.end(), k) != paths.end(); }
  bool wants(OutputFormat f) const {
    return std::find(formats.begin(), formats.end(), f) != formats.end();
  }

  /// The configured grid, or default_num_points over two p = 0 revival
  /// periods, 4 pi / alpha_eff. With alpha_eff = 0 the span is 2 pi.
  Grid resolved_grid() const {
    if (grid) return *grid;
    const double w = effective_frequency(model());
    const double span = w > 0.0 ? 4.0 * std::numbers::pi / w : 2.0 * std::numbers::pi;
    return {span, default_num_points};
  }

  std::vector<double> times() const {
    const Grid g = resolved_grid();
    std::vector<double> t(g.num_points);
    for (std::size_t i = 0; i < g.num_points; ++i) {
      t[i] = g.t_max * static_cast<double>(i) / static_cast<double>(g.num_points - 1);
    }
    return t;
  }
};

inline std::uint64_t fnv1a(std::string_view text) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex(std::uint64_t v) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << v;
  return os.str();
}

namespace detail {

/// Field reader that records diagnostics instead of throwing.
class Reader {
 public:
  std::vector<std::string> diagnostics;

  void fail(const std::string& where, const std::string& what) {
    diagnostics.push_back(where + ": " + what);
  }

  bool expect_object(const json& j, const std::string& where) {
    if (j.is_object()) return true;
    fail(where, "expected an object");
    return false;
  }

  void reject_unknown(const json& obj, const std::string& where,
                      std::initializer_list<std::string_view> allowed) {
    for (const auto& [key, value] : obj.items()) {
      if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
        std::string list;
        for (auto a : allowed) list += (list.empty() ? "" : ", ") + std::string(a);
        fail(join(where, key), "unknown key (allowed: " + list + ")");
      }
    }
  }

  const json* field(const json& obj, const std::string& where, const char* key, bool required) {
    const auto it = obj.find(key);
    if (it == obj.end()) {
      if (required) fail(join(where, key), "missing required field");
      return nullptr;
    }
    return &*it;
  }

  std::optional<double> real(const json& obj, const std::string& where, const char* key) {
    const json* v = field(obj, where, key, true);
    if (!v) return std::nullopt;
    if (!v->is_number()) {
      fail(join(where, key), "expected a number");
      return std::nullopt;
    }
    const double x = v->get<double>();
    if (!std::isfinite(x)) {
      fail(join(where, key), "must be finite");
      return std::nullopt;
    }
    return x;
  }

  std::optional<std::int64_t> integer(const json& obj, const std::string& where, const char* key) {
    const json* v = field(obj, where, key, true);
    if (!v) return std::nullopt;
    if (!v->is_number_integer()) {
      fail(join(where, key), "expected an integer");
      return std::nullopt;
    }
    return v->get<std::int64_t>();
  }

  static std::string join(const std::string& where, std::string_view key) {
    return where.empty() ? std::string(key) : where + "." + std::string(key);
  }
};

template <typename Enum, std::size_t Size>
std::optional<Enum> parse_name(const std::string& text, const Enum (&options)[Size]) {
  for (Enum e : options) {
    if (text == to_string(e)) return e;
  }
  return std::nullopt;
}

template <typename Enum, std::size_t Size>
std::string names(const Enum (&options)[Size]) {
  std::string out;
  for (Enum e : options) out += (out.empty() ? "" : ", ") + std::string(to_string(e));
  return out;
}

template <typename Enum, std::size_t Size>
std::vector<Enum> parse_name_list(Reader& r, const json& v, const std::string& where,
                                  const Enum (&options)[Size]) {
  std::vector<Enum> out;
  if (!v.is_array() || v.empty()) {
    r.fail(where, "expected a non-empty list of names (" + names(options) + ")");
    return out;
  }
  for (std::size_t i = 0; i < v.size(); ++i) {
    const std::string at = where + "[" + std::to_string(i) + "]";
    if (!v[i].is_string()) {
      r.fail(at, "expected a string");
      continue;
    }
    const auto e = parse_name(v[i].get<std::string>(), options);
    if (!e) {
      r.fail(at, "unknown value '" + v[i].get<std::string>() + "' (allowed: " + names(options) + ")");
    } else if (std::find(out.begin(), out.end(), *e) != out.end()) {
      r.fail(at, "duplicate value '" + v[i].get<std::string>() + "'");
    } else {
      out.push_back(*e);
    }
  }
  return out;
}

inline void parse_couplings(Reader& r, const json& v, RunConfig& cfg, bool have_n) {
  const std::string where = "model.couplings";
  if (v.is_array()) {
    cfg.coupling_source = "list";
    for (std::size_t i = 0; i < v.size(); ++i) {
      if (!v[i].is_number()) {
        r.fail(where + "[" + std::to_string(i) + "]", "expected a number");
        continue;
      }
      cfg.couplings.push_back(v[i].get<double>());
    }
    return;
  }
  if (!v.is_object() || v.size() != 1) {
    r.fail(where, R"(expected a list, {"uniform": value} or {"random": {low, high, seed}})");
    return;
  }
  r.reject_unknown(v, where, {"uniform", "random"});
  if (v.contains("uniform")) {
    cfg.coupling_source = "uniform";
    const auto a = r.real(v, where, "uniform");
    if (a && have_n) cfg.couplings.assign(static_cast<std::size_t>(cfg.n), *a);
  } else if (v.contains("random")) {
    cfg.coupling_source = "random";
    const json& spec = v["random"];
    const std::string at = where + ".random";
    if (!r.expect_object(spec, at)) return;
    r.reject_unknown(spec, at, {"low", "high", "seed"});
    const auto low = r.real(spec, at, "low");
    const auto high = r.real(spec, at, "high");
    std::optional<std::uint64_t> seed;
    if (const json* s = r.field(spec, at, "seed", true)) {
      if (s->is_number_unsigned() || (s->is_number_integer() && s->get<std::int64_t>() >= 0)) {
        seed = s->get<std::uint64_t>();
      } else {
        r.fail(at + ".seed", "expected a non-negative integer");
      }
    }
    if (low && high && seed && have_n) {
      try {
        cfg.couplings = ModelParams::random(cfg.n, 0.0, 0.0, *low, *high, *seed).couplings();
      } catch (const validation_error& e) {
        for (const auto& d : e.diagnostics()) r.fail(at, d);
      }
    }
  }
}

}  // namespace detail

/// Parses and validates a configuration document.
inline RunConfig parse_config(const json& doc) {
  detail::Reader r;
  RunConfig cfg;
  if (!r.expect_object(doc, "config")) throw validation_error(r.diagnostics);
  r.reject_unknown(doc, "", {"model", "initial", "grid", "paths", "outputs", "frame"});

  bool have_n = false;
  std::size_t listed_sites = 0;

  if (const json* m = r.field(doc, "", "model", true); m && r.expect_object(*m, "model")) {
    r.reject_unknown(*m, "model", {"N", "omega", "omega0", "couplings"});
    const std::size_t before = r.diagnostics.size();
    if (const auto n = r.integer(*m, "model", "N")) {
      if (*n < 1 || *n > 100000) {
        r.fail("model.N", "must lie in [1, 100000], got " + std::to_string(*n));
      } else {
        cfg.n = static_cast<site_t>(*n);
        have_n = true;
      }
    }
    if (const auto w = r.real(*m, "model", "omega")) cfg.omega = *w;
    if (const auto w0 = r.real(*m, "model", "omega0")) cfg.omega0 = *w0;
    if (const json* c = r.field(*m, "model", "couplings", true)) {
      detail::parse_couplings(r, *c, cfg, have_n);
    }
    if (r.diagnostics.size() == before) {
      try {
        cfg.model();
      } catch (const validation_error& e) {
        for (const auto& d : e.diagnostics()) r.fail("model", d);
      }
    }
  }

  if (const json* init = r.field(doc, "", "initial", true); init && r.expect_object(*init, "initial")) {
    r.reject_unknown(*init, "initial", {"up_sites"});
    if (const json* up = r.field(*init, "initial", "up_sites", true)) {
      if (!up->is_array()) {
        r.fail("initial.up_sites", "expected a list of site labels");
      } else {
        bool ok = true;
        listed_sites = up->size();
        for (std::size_t i = 0; i < up->size(); ++i) {
          const json& s = (*up)[i];
          const std::string at = "initial.up_sites[" + std::to_string(i) + "]";
          if (!s.is_number_integer()) {
            r.fail(at, "expected an integer site label");
            ok = false;
            continue;
          }
          const auto j = s.get<std::int64_t>();
          if (j < 1 || (have_n && j > cfg.n)) {
            r.fail(at, "site " + std::to_string(j) + " outside [1, N]");
            ok = false;
            continue;
          }
          cfg.up_sites.push_back(static_cast<site_t>(j));
        }
        std::sort(cfg.up_sites.begin(), cfg.up_sites.end());
        if (ok && std::adjacent_find(cfg.up_sites.begin(), cfg.up_sites.end()) != cfg.up_sites.end()) {
          r.fail("initial.up_sites", "sites must be distinct");
        }
      }
    }
  }

  if (const json* g = r.field(doc, "", "grid", false); g && r.expect_object(*g, "grid")) {
    r.reject_unknown(*g, "grid", {"t_max", "num_points"});
    Grid grid;
    bool ok = true;
    if (const auto t = r.real(*g, "grid", "t_max"); t && *t > 0.0) {
      grid.t_max = *t;
    } else {
      if (t) r.fail("grid.t_max", "must be > 0");
      ok = false;
    }
    if (const auto k = r.integer(*g, "grid", "num_points"); k && *k >= 2) {
      grid.num_points = static_cast<std::size_t>(*k);
    } else {
      if (k) r.fail("grid.num_points", "must be >= 2");
      ok = false;
    }
    if (ok) cfg.grid = grid;
  }

  if (const json* p = r.field(doc, "", "paths", false)) {
    cfg.paths = detail::parse_name_list(r, *p, "paths", all_paths);
  }

  if (const json* o = r.field(doc, "", "outputs", false); o && r.expect_object(*o, "outputs")) {
    r.reject_unknown(*o, "outputs", {"directory", "formats"});
    if (const json* d = r.field(*o, "outputs", "directory", false)) {
      if (d->is_string() && !d->get<std::string>().empty()) {
        cfg.directory = d->get<std::string>();
      } else {
        r.fail("outputs.directory", "expected a non-empty string");
      }
    }
    if (const json* f = r.field(*o, "outputs", "formats", false)) {
      cfg.formats = detail::parse_name_list(r, *f, "outputs.formats", all_formats);
    }
  }

  if (const json* f = r.field(doc, "", "frame", false)) {
    if (f->is_string() && f->get<std::string>() == "rotating") {
      cfg.frame = Frame::rotating;
    } else if (f->is_string() && f->get<std::string>() == "lab") {
      cfg.frame = Frame::lab;
    } else {
      r.fail("frame", "expected \"rotating\" or \"lab\"");
    }
  }

  // Cross-field rules.
  if (cfg.wants(PathKind::analytic_p0) && listed_sites > 0) {
    r.fail("paths", "analytic_p0 applies only to p = 0 (initial.up_sites empty), got p=" +
                        std::to_string(listed_sites));
  }
  if (cfg.wants(OutputFormat::oracle_state) && !cfg.wants(PathKind::oracle)) {
    r.fail("outputs.formats", "oracle_state requires the oracle path");
  }

  if (!r.diagnostics.empty()) throw validation_error(r.diagnostics);
  cfg.hash = fnv1a(doc.dump());
  return cfg;
}

inline RunConfig parse_config_text(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw validation_error(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(doc);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw validation_error("cannot read '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline RunConfig load_config(const std::string& path) { return parse_config_text(read_file(path)); }

}  // namespace spinstar::cli

#endif  // SPINSTAR_CLI_CONFIG_HPP
