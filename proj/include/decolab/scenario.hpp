#ifndef DECOLAB_SCENARIO_HPP
#define DECOLAB_SCENARIO_HPP

// Strict scenario files. Physical quantities are strings with a unit suffix ("1 eV",
// "1e-7 m"); dimensionless values are plain JSON numbers. Unknown keys are errors.

#include <algorithm>
#include <array>
#include <cmath>
#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <variant>
#include <vector>

#include <fmt/format.h>
#include <json.hpp>

#include "decolab/errors.hpp"
#include "decolab/units.hpp"

namespace decolab::cli {

using json = nlohmann::json;

enum class Dim { Energy, Time, Length, Mass, Density };

inline const char* si_unit(Dim d) {
  switch (d) {
    case Dim::Energy: return "J";
    case Dim::Time: return "s";
    case Dim::Length: return "m";
    case Dim::Mass: return "kg";
    case Dim::Density: return "kg/m^3";
  }
  return "";
}

inline const char* dim_name(Dim d) {
  switch (d) {
    case Dim::Energy: return "energy";
    case Dim::Time: return "time";
    case Dim::Length: return "length";
    case Dim::Mass: return "mass";
    case Dim::Density: return "mass density";
  }
  return "";
}

/// Multiplier to SI for `unit`, or nullopt if the unit is foreign to `d`. "tP" is the Planck time.
inline std::optional<double> unit_factor(Dim d, const std::string& unit, const UnitsContext& u) {
  static const std::map<std::string, double> energy{{"meV", 1e-3}, {"eV", 1.0}, {"keV", 1e3}, {"MeV", 1e6}, {"GeV", 1e9}, {"TeV", 1e12}};
  static const std::map<std::string, double> time{{"s", 1.0}, {"ms", 1e-3}, {"us", 1e-6}, {"ns", 1e-9}, {"ps", 1e-12}, {"fs", 1e-15}, {"as", 1e-18}};
  static const std::map<std::string, double> length{{"m", 1.0}, {"cm", 1e-2}, {"mm", 1e-3}, {"um", 1e-6}, {"nm", 1e-9}, {"pm", 1e-12}, {"fm", 1e-15}};
  static const std::map<std::string, double> mass{{"kg", 1.0}, {"g", 1e-3}, {"mg", 1e-6}, {"ug", 1e-9}};
  static const std::map<std::string, double> density{{"kg/m^3", 1.0}, {"g/cm^3", kGramPerCubicCentimetre}};
  auto look = [&](const std::map<std::string, double>& m) -> std::optional<double> {
    const auto it = m.find(unit);
    return it == m.end() ? std::nullopt : std::optional<double>(it->second);
  };
  switch (d) {
    case Dim::Energy: {
      if (unit == "J") return 1.0;
      const auto f = look(energy);
      return f ? std::optional<double>(*f * u.ev) : std::nullopt;
    }
    case Dim::Time:
      if (unit == "tP") return u.tau_planck;
      return look(time);
    case Dim::Length: return look(length);
    case Dim::Mass: return look(mass);
    case Dim::Density: return look(density);
  }
  return std::nullopt;
}

/// "1.5e-7 m" -> 1.5e-7 (SI). `key` names the field in any error.
namespace detail {
inline std::size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<std::size_t> row(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) row[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}
}  // namespace detail

inline double parse_quantity(const std::string& text, Dim d, const std::string& key, const UnitsContext& u = {}) {
  static const std::regex re(R"(^\s*([+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)\s*(\S*)\s*$)");
  std::smatch m;
  if (!std::regex_match(text, m, re)) throw ScenarioError(key, fmt::format("cannot parse quantity \"{}\"", text));
  const std::string num = m[1].str(), unit = m[2].str();
  if (unit.empty()) throw ScenarioError(key, fmt::format("missing unit suffix for {} (expected e.g. \"{} {}\")", dim_name(d), num, si_unit(d)));
  const auto f = unit_factor(d, unit, u);
  if (!f) throw ScenarioError(key, fmt::format("unit-suffix mismatch: \"{}\" is not a {} unit", unit, dim_name(d)));
  double v = 0.0;
  const char* b = num.data() + (num.front() == '+' ? 1 : 0);
  const auto res = std::from_chars(b, num.data() + num.size(), v);
  if (res.ec != std::errc() || !std::isfinite(v)) throw ScenarioError(key, fmt::format("number out of range in \"{}\"", text));
  return v * *f;
}

inline std::string format_si(double v, Dim d) { return fmt::format("{:.10g} {}", v, si_unit(d)); }

/// Resolved scenario, echoed into the run report as "key = value" lines.
using Echo = std::vector<std::pair<std::string, std::string>>;

/// Reads one JSON object, tracking which keys were consumed.
class Reader {
 public:
  Reader(const json& obj, std::string path, Echo& echo, const UnitsContext& units)
      : obj_(obj), path_(std::move(path)), echo_(echo), units_(units) {
    if (!obj_.is_object()) throw ScenarioError(path_, "expected an object");
  }

  std::string key(const std::string& k) const { return path_.empty() ? k : path_ + "." + k; }
  bool has(const std::string& k) const { return obj_.contains(k); }

  double quantity(const std::string& k, Dim d, std::optional<std::string> fallback = std::nullopt) {
    const json* v = fetch(k, fallback.has_value());
    const bool dflt = v == nullptr;
    if (v && !v->is_string())
      throw ScenarioError(key(k), fmt::format("expected a string with a {} unit, e.g. \"1 {}\"", dim_name(d), si_unit(d)));
    const double x = parse_quantity(dflt ? *fallback : v->get<std::string>(), d, key(k), units_);
    record(k, format_si(x, d), dflt);
    return x;
  }

  /// Like quantity() with a default already in SI.
  double quantity_or(const std::string& k, Dim d, double fallback) {
    if (has(k)) return quantity(k, d);
    fetch(k, true);
    record(k, format_si(fallback, d), true);
    return fallback;
  }

  std::optional<double> optional_quantity(const std::string& k, Dim d) {
    if (!has(k)) return std::nullopt;
    return quantity(k, d);
  }

  double number(const std::string& k, std::optional<double> fallback = std::nullopt) {
    const json* v = fetch(k, fallback.has_value());
    if (v && !v->is_number()) throw ScenarioError(key(k), "expected a plain number (dimensionless)");
    const double x = v ? v->get<double>() : *fallback;
    if (!std::isfinite(x)) throw ScenarioError(key(k), "must be finite");
    record(k, fmt::format("{:.10g}", x), v == nullptr);
    return x;
  }

  long long integer(const std::string& k, std::optional<long long> fallback = std::nullopt, long long min = 0) {
    const json* v = fetch(k, fallback.has_value());
    if (v && !v->is_number_integer()) throw ScenarioError(key(k), "expected an integer");
    const long long x = v ? v->get<long long>() : *fallback;
    if (x < min) throw ScenarioError(key(k), fmt::format("must be >= {}", min));
    record(k, std::to_string(x), v == nullptr);
    return x;
  }

  bool boolean(const std::string& k, bool fallback) {
    const json* v = fetch(k, true);
    if (v && !v->is_boolean()) throw ScenarioError(key(k), "expected true or false");
    const bool x = v ? v->get<bool>() : fallback;
    record(k, x ? "true" : "false", v == nullptr);
    return x;
  }

  std::string string(const std::string& k, std::optional<std::string> fallback = std::nullopt) {
    const json* v = fetch(k, fallback.has_value());
    if (v && !v->is_string()) throw ScenarioError(key(k), "expected a string");
    std::string x = v ? v->get<std::string>() : *fallback;
    record(k, x, v == nullptr);
    return x;
  }

  std::string choice(const std::string& k, const std::vector<std::string>& allowed, std::optional<std::string> fallback = std::nullopt) {
    const json* v = fetch(k, fallback.has_value());
    if (v && !v->is_string()) throw ScenarioError(key(k), "expected a string");
    std::string x = v ? v->get<std::string>() : *fallback;
    if (std::find(allowed.begin(), allowed.end(), x) == allowed.end()) {
      std::string list;
      for (const auto& a : allowed) list += (list.empty() ? "" : ", ") + a;
      throw ScenarioError(key(k), fmt::format("\"{}\" is not one of {}", x, list));
    }
    record(k, x, v == nullptr);
    return x;
  }

  std::vector<double> quantity_list(const std::string& k, Dim d, std::optional<std::vector<std::string>> fallback = std::nullopt,
                                  std::optional<std::size_t> exact_len = std::nullopt) {
    const json* v = fetch(k, fallback.has_value());
    std::vector<std::string> items;
    if (v) {
      if (!v->is_array()) throw ScenarioError(key(k), "expected an array");
      for (std::size_t i = 0; i < v->size(); ++i) {
        if (!(*v)[i].is_string()) throw ScenarioError(fmt::format("{}[{}]", key(k), i), fmt::format("expected a string with a {} unit", dim_name(d)));
        items.push_back((*v)[i].get<std::string>());
      }
    } else {
      items = *fallback;
    }
    if (items.empty()) throw ScenarioError(key(k), "must not be empty");
    if (exact_len && items.size() != *exact_len) throw ScenarioError(key(k), fmt::format("expected {} entries", *exact_len));
    std::vector<double> out;
    std::string shown;
    for (std::size_t i = 0; i < items.size(); ++i) {
      out.push_back(parse_quantity(items[i], d, fmt::format("{}[{}]", key(k), i), units_));
      shown += (i ? ", " : "") + format_si(out.back(), d);
    }
    record(k, "[" + shown + "]", v == nullptr);
    return out;
  }

  std::vector<double> number_list(const std::string& k, std::optional<std::size_t> exact_len = std::nullopt) {
    const json* v = fetch(k, false);
    if (!v->is_array()) throw ScenarioError(key(k), "expected an array of numbers");
    if (exact_len && v->size() != *exact_len) throw ScenarioError(key(k), fmt::format("expected {} entries", *exact_len));
    std::vector<double> out;
    std::string shown;
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number()) throw ScenarioError(fmt::format("{}[{}]", key(k), i), "expected a number");
      out.push_back((*v)[i].get<double>());
      shown += fmt::format("{}{:.10g}", i ? ", " : "", out.back());
    }
    record(k, "[" + shown + "]", false);
    return out;
  }

  std::vector<long long> integer_list(const std::string& k, std::size_t exact_len, long long min) {
    const json* v = fetch(k, false);
    if (!v->is_array() || v->size() != exact_len) throw ScenarioError(key(k), fmt::format("expected an array of {} integers", exact_len));
    std::vector<long long> out;
    std::string shown;
    for (std::size_t i = 0; i < v->size(); ++i) {
      if (!(*v)[i].is_number_integer()) throw ScenarioError(fmt::format("{}[{}]", key(k), i), "expected an integer");
      out.push_back((*v)[i].get<long long>());
      if (out.back() < min) throw ScenarioError(fmt::format("{}[{}]", key(k), i), fmt::format("must be >= {}", min));
      shown += fmt::format("{}{}", i ? ", " : "", out.back());
    }
    record(k, "[" + shown + "]", false);
    return out;
  }

  /// Square array of arrays of numbers.
  std::vector<std::vector<double>> number_matrix(const std::string& k, std::size_t n) {
    const json* v = fetch(k, false);
    const auto bad = [&] { return ScenarioError(key(k), fmt::format("expected a {0} x {0} array of numbers", n)); };
    if (!v->is_array() || v->size() != n) throw bad();
    std::vector<std::vector<double>> out;
    std::string shown;
    for (std::size_t i = 0; i < n; ++i) {
      const json& row = (*v)[i];
      if (!row.is_array() || row.size() != n) throw bad();
      out.emplace_back();
      shown += i ? "; " : "";
      for (std::size_t j = 0; j < n; ++j) {
        if (!row[j].is_number()) throw ScenarioError(fmt::format("{}[{}][{}]", key(k), i, j), "expected a number");
        out.back().push_back(row[j].get<double>());
        shown += fmt::format("{}{:.10g}", j ? ", " : "", out.back().back());
      }
    }
    record(k, "[" + shown + "]", false);
    return out;
  }

  /// Nested object reader; the caller must call finish() on it.
  Reader object(const std::string& k) {
    const json* v = fetch(k, false);
    return Reader(*v, key(k), echo_, units_);
  }

  /// Array of objects, each read by `fn(Reader&)`.
  template <class Fn>
  void objects(const std::string& k, std::size_t exact_len, Fn&& fn) {
    const json* v = fetch(k, false);
    if (!v->is_array() || v->size() != exact_len) throw ScenarioError(key(k), fmt::format("expected an array of {} objects", exact_len));
    for (std::size_t i = 0; i < v->size(); ++i) {
      Reader r((*v)[i], fmt::format("{}[{}]", key(k), i), echo_, units_);
      fn(r);
      r.finish();
    }
  }

  /// Rejects every key that was not consumed.
  void finish() const {
    for (auto it = obj_.begin(); it != obj_.end(); ++it)
      if (!used_.count(it.key())) throw ScenarioError(key(it.key()), "unknown key");
  }

  /// Rejects a key that makes no sense in the current configuration.
  void forbid(const std::string& k, const std::string& why) const {
    if (has(k)) throw ScenarioError(key(k), why);
  }

 private:
  const json* fetch(const std::string& k, bool optional) {
    used_.insert(k);
    if (!obj_.contains(k)) {
      if (!optional) {
        // a near miss among the present keys is almost always a typo; name it
        for (const auto& [present, unused] : obj_.items())
          if (!used_.count(present) && detail::edit_distance(present, k) <= 2)
            throw ScenarioError(key(k), fmt::format("missing required key (found unknown key \"{}\")", key(present)));
        throw ScenarioError(key(k), "missing required key");
      }
      return nullptr;
    }
    return &obj_.at(k);
  }
  void record(const std::string& k, std::string v, bool dflt) { echo_.emplace_back(key(k), dflt ? v + " (default)" : std::move(v)); }

  const json& obj_;
  std::string path_;
  Echo& echo_;
  const UnitsContext& units_;
  std::set<std::string> used_;
};

// ---- per-command parameters (SI) ----

struct TwoLevelDecayParams {
  std::string model;  // global | milburn-exact | milburn-first-order | adler
  double delta_e = 0.0;
  double tau = 0.0;
  std::optional<double> t_final;
  std::optional<long long> steps;
  long long samples = 200;
  double tolerance = 1e-6;
};

struct MilburnTableParams {
  std::vector<double> energies;
  double tau = 0.0;
};

struct McCompareParams {
  std::string noise;  // gaussian-global | poisson | fluctuating-planck | local-field
  double delta_e = 0.0;
  double tau = 0.0;
  double t_final = 0.0;
  long long dim = 3;
  long long n_traj = 10000;
  long long n_times = 10;
  std::optional<long long> steps;
  double z_max = 5.0;
  long long threads = 0;
  // local-field only
  long long cells = 2;
  bool commuting = true;
  std::vector<std::vector<double>> kernel;  // in units of tau
};

struct LocalMeParams {
  long long dim = 3;
  long long cells = 2;
  double delta_e = 0.0;
  std::string kernel;  // global | diagonal | newtonian
  double tau = 0.0;
  double spacing = 1e-7;
  double sigma = 1e-7;
  double prefactor = 1.0;
  double t_final = 0.0;
  long long samples = 200;
  std::optional<long long> steps;
  bool commuting = false;
};

struct LumpParams {
  double radius = 0.0;
  std::optional<double> mass, density;
  std::array<double, 3> center{};
};

struct DpLumpsParams {
  double spacing = 1e-7;
  std::array<long long, 3> cells{};
  double sigma = 1e-7;
  std::array<LumpParams, 2> lumps;
  bool rate_check = true;
  double tolerance = 1e-6;
};

struct CriticalRadiusParams {
  double density = kGramPerCubicCentimetre;
  double r_min = 1e-9, r_max = 1e-3;
  long long points_per_decade = 20;
  double sigma_ratio = 0.1;
  double sigma_floor = 0.0;
};

struct TraceDemoParams {
  long long n = 4, r_cells = 4;
  double omega2 = 1.0, lambda = 0.1, kappa = 0.3;
  double dt = 1e-3;
  long long steps = 100000, record_every = 1000;
  double amplitude = 0.5;
  std::optional<std::vector<double>> matrix_coefficient;  // diagonal of A
  double mu = 1.0;
};

using CommandParams = std::variant<TwoLevelDecayParams, MilburnTableParams, McCompareParams, LocalMeParams, DpLumpsParams,
                                   CriticalRadiusParams, TraceDemoParams>;

inline const std::vector<std::string>& command_names() {
  static const std::vector<std::string> names{"two-level-decay", "milburn-table", "mc-compare", "local-me",
                                              "dp-lumps",        "critical-radius", "trace-demo"};
  return names;
}

inline const std::map<std::string, std::string>& command_summaries() {
  static const std::map<std::string, std::string> s{
      {"two-level-decay", "integrate a two-level superposition; coherence curve and fitted vs analytic rate"},
      {"milburn-table", "decoherence times for a list of energy spreads at fixed tau"},
      {"mc-compare", "stochastic ensemble vs master equation; z-score table"},
      {"local-me", "local master equation with a correlation kernel; trajectory diagnostics"},
      {"dp-lumps", "two gridded mass lumps; pair energies, e_grav, decay time, rate check"},
      {"critical-radius", "t_dyn vs t_d sweep over ball radius; critical radius"},
      {"trace-demo", "matrix trace dynamics; energy and conserved-charge drift"},
  };
  return s;
}

struct OutputSpec {
  std::string dir = ".";
  std::string format = "csv";
};

struct Scenario {
  std::string name;
  std::string command;
  std::uint64_t seed = 0;
  OutputSpec output;
  CommandParams params;
  Echo echo;
};

namespace detail {

inline TwoLevelDecayParams read_two_level(Reader& r) {
  TwoLevelDecayParams p;
  p.model = r.choice("model", {"global", "milburn-exact", "milburn-first-order", "adler"}, "global");
  p.delta_e = r.quantity("delta_e", Dim::Energy);
  p.tau = r.quantity("tau", Dim::Time);
  p.t_final = r.optional_quantity("t_final", Dim::Time);
  if (r.has("steps")) p.steps = r.integer("steps", std::nullopt, 1);
  p.samples = r.integer("samples", 200, 1);
  p.tolerance = r.number("tolerance", 1e-6);
  return p;
}

inline MilburnTableParams read_milburn_table(Reader& r) {
  MilburnTableParams p;
  p.energies = r.quantity_list("energies", Dim::Energy, std::vector<std::string>{"1 eV", "1 GeV", "1 J"});
  p.tau = r.quantity("tau", Dim::Time, "1 tP");
  return p;
}

inline McCompareParams read_mc_compare(Reader& r) {
  McCompareParams p;
  p.noise = r.choice("noise", {"gaussian-global", "poisson", "fluctuating-planck", "local-field"});
  p.delta_e = r.quantity("delta_e", Dim::Energy, "0.01 eV");
  p.tau = r.quantity("tau", Dim::Time);
  p.t_final = r.quantity("t_final", Dim::Time);
  p.dim = r.integer("dim", 3, 2);
  p.n_traj = r.integer("n_traj", 10000, 2);
  p.n_times = r.integer("n_times", 10, 1);
  if (r.has("steps")) p.steps = r.integer("steps", std::nullopt, 1);
  p.z_max = r.number("z_max", 5.0);
  p.threads = r.integer("threads", 0, 0);
  if (p.noise == "local-field") {
    p.cells = r.integer("cells", 2, 1);
    p.commuting = r.boolean("commuting", true);
    if (r.has("kernel")) p.kernel = r.number_matrix("kernel", static_cast<std::size_t>(p.cells));
  } else {
    r.forbid("cells", "only used with noise = local-field");
    r.forbid("commuting", "only used with noise = local-field");
    r.forbid("kernel", "only used with noise = local-field");
  }
  return p;
}

inline LocalMeParams read_local_me(Reader& r) {
  LocalMeParams p;
  p.dim = r.integer("dim", 3, 2);
  p.cells = r.integer("cells", 2, 1);
  p.delta_e = r.quantity("delta_e", Dim::Energy, "0.01 eV");
  p.kernel = r.choice("kernel", {"global", "diagonal", "newtonian"}, "global");
  if (p.kernel == "newtonian") {
    r.forbid("tau", "not used with kernel = newtonian (the kernel sets its own scale)");
    p.spacing = r.quantity("spacing", Dim::Length, "1e-7 m");
    p.sigma = r.quantity("sigma", Dim::Length, "1e-7 m");
    p.prefactor = r.number("prefactor", 1.0);
  } else {
    p.tau = r.quantity("tau", Dim::Time);
    r.forbid("spacing", "only used with kernel = newtonian");
    r.forbid("sigma", "only used with kernel = newtonian");
    r.forbid("prefactor", "only used with kernel = newtonian");
  }
  p.t_final = r.quantity("t_final", Dim::Time);
  p.samples = r.integer("samples", 200, 1);
  if (r.has("steps")) p.steps = r.integer("steps", std::nullopt, 1);
  p.commuting = r.boolean("commuting", false);
  return p;
}

inline DpLumpsParams read_dp_lumps(Reader& r) {
  DpLumpsParams p;
  p.spacing = r.quantity("spacing", Dim::Length, "1e-7 m");
  const auto cells = r.integer_list("cells", 3, 1);
  std::copy(cells.begin(), cells.end(), p.cells.begin());
  p.sigma = r.quantity_or("sigma", Dim::Length, p.spacing);
  std::size_t i = 0;
  r.objects("lumps", 2, [&](Reader& l) {
    LumpParams& lp = p.lumps[i++];
    lp.radius = l.quantity("radius", Dim::Length);
    if (l.has("mass") == l.has("density")) throw ScenarioError(l.key("mass"), "give exactly one of mass or density");
    lp.mass = l.optional_quantity("mass", Dim::Mass);
    lp.density = l.optional_quantity("density", Dim::Density);
    const auto c = l.quantity_list("center", Dim::Length, std::nullopt, 3);
    std::copy(c.begin(), c.end(), lp.center.begin());
  });
  p.rate_check = r.boolean("rate_check", true);
  p.tolerance = r.number("tolerance", 1e-6);
  return p;
}

inline CriticalRadiusParams read_critical_radius(Reader& r) {
  CriticalRadiusParams p;
  p.density = r.quantity("density", Dim::Density, "1 g/cm^3");
  p.r_min = r.quantity("r_min", Dim::Length, "1e-9 m");
  p.r_max = r.quantity("r_max", Dim::Length, "1e-3 m");
  p.points_per_decade = r.integer("points_per_decade", 20, 1);
  p.sigma_ratio = r.number("sigma_ratio", 0.1);
  p.sigma_floor = r.quantity("sigma_floor", Dim::Length, "0 m");
  return p;
}

inline TraceDemoParams read_trace_demo(Reader& r) {
  TraceDemoParams p;
  p.n = r.integer("n", 4, 2);
  p.r_cells = r.integer("r_cells", 4, 1);
  p.omega2 = r.number("omega2", 1.0);
  p.lambda = r.number("lambda", 0.1);
  p.kappa = r.number("kappa", 0.3);
  p.dt = r.number("dt", 1e-3);
  p.steps = r.integer("steps", 100000, 1);
  p.record_every = r.integer("record_every", 1000, 1);
  p.amplitude = r.number("amplitude", 0.5);
  if (r.has("matrix_coefficient")) {
    p.matrix_coefficient = r.number_list("matrix_coefficient", static_cast<std::size_t>(p.n));
    p.mu = r.number("mu", 1.0);
  } else {
    r.forbid("mu", "only used with matrix_coefficient");
  }
  return p;
}

}  // namespace detail

/// Strict parse of a scenario file. Errors name the offending key.
inline Scenario parse_scenario(const std::string& text, const UnitsContext& units = {}) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError("", std::string("malformed JSON: ") + e.what());
  }
  Scenario sc;
  Reader top(doc, "", sc.echo, units);
  sc.name = top.string("name");
  static const std::regex name_re("^[A-Za-z0-9_.-]+$");
  if (!std::regex_match(sc.name, name_re)) throw ScenarioError("name", "only letters, digits, '_', '-' and '.' are allowed");
  sc.command = top.choice("command", command_names());
  sc.seed = static_cast<std::uint64_t>(top.integer("seed", 0, 0));
  if (top.has("output")) {
    Reader out = top.object("output");
    sc.output.dir = out.string("dir", ".");
    sc.output.format = out.choice("format", {"csv"}, "csv");
    out.finish();
  } else {
    sc.echo.emplace_back("output.dir", ". (default)");
    sc.echo.emplace_back("output.format", "csv (default)");
  }
  const json empty = json::object();
  Reader params = top.has("parameters") ? top.object("parameters") : Reader(empty, "parameters", sc.echo, units);
  if (sc.command == "two-level-decay") sc.params = detail::read_two_level(params);
  else if (sc.command == "milburn-table") sc.params = detail::read_milburn_table(params);
  else if (sc.command == "mc-compare") sc.params = detail::read_mc_compare(params);
  else if (sc.command == "local-me") sc.params = detail::read_local_me(params);
  else if (sc.command == "dp-lumps") sc.params = detail::read_dp_lumps(params);
  else if (sc.command == "critical-radius") sc.params = detail::read_critical_radius(params);
  else sc.params = detail::read_trace_demo(params);
  params.finish();
  top.finish();
  return sc;
}

}  // namespace decolab::cli

#endif  // DECOLAB_SCENARIO_HPP
