#include "ssampc/config.hpp"

#include "ssampc/error.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <cerrno>
#include <charconv>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <sstream>

namespace ssampc {

namespace {

std::string trim(const std::string& s)
{
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::string unquote(const std::string& raw)
{
  const std::string s = trim(raw);
  if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) {
    return s.substr(1, s.size() - 2);
  }
  return s;
}

double to_double(const std::string& raw, const std::string& key)
{
  const std::string s = unquote(raw);
  double v = 0.0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end) {
    throw ConfigError(key + ": expected a number, got '" + raw + "'");
  }
  return v;
}

int to_int(const std::string& raw, const std::string& key)
{
  const std::string s = unquote(raw);
  long long v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end || v < INT32_MIN || v > INT32_MAX) {
    throw ConfigError(key + ": expected an integer, got '" + raw + "'");
  }
  return static_cast<int>(v);
}

std::uint64_t to_u64(const std::string& raw, const std::string& key)
{
  const std::string s = unquote(raw);
  std::uint64_t v = 0;
  const auto* end = s.data() + s.size();
  const auto [ptr, ec] = std::from_chars(s.data(), end, v);
  if (s.empty() || ec != std::errc() || ptr != end) {
    throw ConfigError(key + ": expected a non-negative integer, got '" + raw + "'");
  }
  return v;
}

bool to_bool(const std::string& raw, const std::string& key)
{
  const std::string s = unquote(raw);
  if (s == "true" || s == "1" || s == "yes" || s == "on") return true;
  if (s == "false" || s == "0" || s == "no" || s == "off") return false;
  throw ConfigError(key + ": expected a boolean, got '" + raw + "'");
}

Eigen::VectorXd to_list(const std::string& raw, const std::string& key)
{
  const std::string s = trim(raw);
  if (s.size() < 2 || s.front() != '[' || s.back() != ']') {
    throw ConfigError(key + ": expected a list like [a, b], got '" + raw + "'");
  }
  std::vector<double> values;
  const std::string body = trim(s.substr(1, s.size() - 2));
  if (!body.empty()) {
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) values.push_back(to_double(item, key));
  }
  return Eigen::Map<Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

Eigen::VectorXd to_list(const std::string& raw, const std::string& key, int size)
{
  Eigen::VectorXd v = to_list(raw, key);
  if (v.size() != size) {
    throw ConfigError(key + ": expected " + std::to_string(size) + " values, got " + std::to_string(v.size()));
  }
  return v;
}

std::string fmt(double v)
{
  // Shortest form that still round-trips.
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fmt(const Eigen::VectorXd& v)
{
  std::string out = "[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i > 0) out += ", ";
    out += fmt(v(i));
  }
  return out + "]";
}

std::string fmt_range(double lo, double hi) { return "[" + fmt(lo) + ", " + fmt(hi) + "]"; }

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

std::string quoted(const std::string& s) { return "\"" + s + "\""; }

Eigen::VectorXd diagonal_or_empty(const Eigen::MatrixXd& m)
{
  return m.size() == 0 ? Eigen::VectorXd() : Eigen::VectorXd(m.diagonal());
}

struct Entry
{
  const char* section;
  const char* key;
  std::function<void(Scenario&, const std::string&, const std::string&)> set;
  std::function<std::string(const Scenario&)> get;
};

#define NUM(sec, k, field)                                                                          \
  Entry{sec, k, [](Scenario& s, const std::string& v, const std::string& n) { s.field = to_double(v, n); }, \
        [](const Scenario& s) { return fmt(s.field); }}
#define INT(sec, k, field)                                                                        \
  Entry{sec, k, [](Scenario& s, const std::string& v, const std::string& n) { s.field = to_int(v, n); }, \
        [](const Scenario& s) { return std::to_string(s.field); }}
#define BOOL(sec, k, field)                                                                        \
  Entry{sec, k, [](Scenario& s, const std::string& v, const std::string& n) { s.field = to_bool(v, n); }, \
        [](const Scenario& s) { return fmt_bool(s.field); }}
#define RANGE(sec, k, lo, hi)                                                    \
  Entry{sec, k,                                                                  \
        [](Scenario& s, const std::string& v, const std::string& n) {            \
          const Eigen::VectorXd r = to_list(v, n, 2);                            \
          s.lo = r(0);                                                           \
          s.hi = r(1);                                                           \
        },                                                                       \
        [](const Scenario& s) { return fmt_range(s.lo, s.hi); }}
#define VEC3(sec, k, field)                                                                              \
  Entry{sec, k, [](Scenario& s, const std::string& v, const std::string& n) { s.field = to_list(v, n, 3); }, \
        [](const Scenario& s) { return fmt(Eigen::VectorXd(s.field)); }}
#define LIST(sec, k, field)                                                                          \
  Entry{sec, k, [](Scenario& s, const std::string& v, const std::string& n) { s.field = to_list(v, n); }, \
        [](const Scenario& s) { return fmt(s.field); }}
#define DIAG(sec, k, field)                                                                      \
  Entry{sec, k,                                                                                  \
        [](Scenario& s, const std::string& v, const std::string& n) {                            \
          const Eigen::VectorXd d = to_list(v, n);                                               \
          s.field = d.asDiagonal();                                                              \
        },                                                                                       \
        [](const Scenario& s) { return fmt(diagonal_or_empty(s.field)); }}

const std::vector<Entry>& entries()
{
  static const std::vector<Entry> table = {
    Entry{"scenario", "case", [](Scenario&, const std::string&, const std::string&) {},
          [](const Scenario& s) {
            switch (s.obstacle.kind) {
              case ObstacleKind::constant_velocity: return quoted("case1");
              case ObstacleKind::drag_ball: return quoted("case2");
              case ObstacleKind::frisbee: return quoted("case3");
            }
            return quoted("case1");
          }},
    Entry{"scenario", "name", [](Scenario& s, const std::string& v, const std::string&) { s.name = unquote(v); },
          [](const Scenario& s) { return quoted(s.name); }},
    Entry{"scenario", "seed", [](Scenario& s, const std::string& v, const std::string& n) { s.seed = to_u64(v, n); },
          [](const Scenario& s) { return std::to_string(s.seed); }},
    NUM("scenario", "rate_hz", rate_hz),
    NUM("scenario", "t_intro", t_intro),
    RANGE("scenario", "cross_delay", cross_delay_min, cross_delay_max),
    NUM("scenario", "end_margin", end_margin),
    NUM("scenario", "exit_radius", exit_radius),
    NUM("scenario", "min_early_separation", min_early_separation),
    INT("scenario", "substeps", substeps),
    BOOL("scenario", "planner_enabled", planner_enabled),

    NUM("agent", "gravity", gravity),
    NUM("agent", "gain_error", gain_error),

    NUM("reference", "a", reference.a),
    NUM("reference", "b", reference.b),
    NUM("reference", "period", reference.period),
    NUM("reference", "altitude", reference.altitude),
    NUM("reference", "yaw", reference.yaw),
    VEC3("reference", "center", reference.center),

    Entry{"obstacle", "kind",
          [](Scenario& s, const std::string& v, const std::string&) {
            s.obstacle.kind = obstacle_kind_from_string(unquote(v));
          },
          [](const Scenario& s) { return quoted(to_string(s.obstacle.kind)); }},
    RANGE("obstacle", "speed", obstacle.speed_min, obstacle.speed_max),
    NUM("obstacle", "radius", obstacle.radius),
    NUM("obstacle", "radius_factor", obstacle.radius_factor),
    RANGE("obstacle", "heading_deg", obstacle.heading_min_deg, obstacle.heading_max_deg),
    RANGE("obstacle", "elevation_deg", obstacle.elevation_min_deg, obstacle.elevation_max_deg),
    NUM("obstacle", "drag", obstacle.drag),
    VEC3("obstacle", "gravity", obstacle.gravity),
    RANGE("obstacle", "spin", obstacle.spin_min, obstacle.spin_max),
    NUM("obstacle", "roll_max_deg", obstacle.roll_max_deg),
    NUM("obstacle", "pitch_max_deg", obstacle.pitch_max_deg),

    NUM("frisbee", "mass", obstacle.frisbee.mass),
    NUM("frisbee", "diameter", obstacle.frisbee.diameter),
    NUM("frisbee", "area", obstacle.frisbee.area),
    NUM("frisbee", "rho", obstacle.frisbee.rho),
    NUM("frisbee", "ixy", obstacle.frisbee.ixy),
    NUM("frisbee", "iz", obstacle.frisbee.iz),
    NUM("frisbee", "cl0", obstacle.frisbee.cl0),
    NUM("frisbee", "cla", obstacle.frisbee.cla),
    NUM("frisbee", "cd0", obstacle.frisbee.cd0),
    NUM("frisbee", "cda", obstacle.frisbee.cda),
    NUM("frisbee", "alpha0", obstacle.frisbee.alpha0),
    NUM("frisbee", "cm0", obstacle.frisbee.cm0),
    NUM("frisbee", "cma", obstacle.frisbee.cma),
    NUM("frisbee", "cmq", obstacle.frisbee.cmq),
    NUM("frisbee", "crr", obstacle.frisbee.crr),
    NUM("frisbee", "crp", obstacle.frisbee.crp),
    NUM("frisbee", "cnr", obstacle.frisbee.cnr),

    NUM("noise", "half_width", noise_half_width),

    Entry{"planner", "n_h",
          [](Scenario& s, const std::string& v, const std::string& n) {
            s.planner.n_h = to_int(v, n);
            s.bootstrap.n_h = s.planner.n_h;
          },
          [](const Scenario& s) { return std::to_string(s.planner.n_h); }},
    NUM("planner", "epsilon", planner.epsilon),
    NUM("planner", "chi", planner.chi),
    NUM("planner", "tau", planner.tau),
    INT("planner", "scp_iters", planner.scp_iters),
    BOOL("planner", "trust_region_from_zero", planner.trust_region_from_zero),
    DIAG("planner", "q", planner.Q),
    DIAG("planner", "r", planner.R),
    LIST("planner", "u_trim", planner.u_trim),
    LIST("planner", "state_lower", planner.state_lower),
    LIST("planner", "state_upper", planner.state_upper),
    LIST("planner", "input_lower", planner.input_lower),
    LIST("planner", "input_upper", planner.input_upper),
    NUM("planner", "r_p", planner.r_p),
    Entry{"planner", "beta_form",
          [](Scenario& s, const std::string& v, const std::string& n) {
            const std::string f = unquote(v);
            if (f == "corrected") s.planner.beta_form = BetaForm::corrected;
            else if (f == "literal") s.planner.beta_form = BetaForm::literal;
            else throw ConfigError(n + ": expected corrected or literal, got '" + v + "'");
          },
          [](const Scenario& s) {
            return quoted(s.planner.beta_form == BetaForm::corrected ? "corrected" : "literal");
          }},
    INT("planner", "qp_max_iter", planner.qp.max_iter),
    NUM("planner", "qp_tolerance", planner.qp.tolerance),

    INT("bootstrap", "window", bootstrap.window),
    INT("bootstrap", "n_train", bootstrap.n_train),
    INT("bootstrap", "n_step", bootstrap.n_step),
    NUM("bootstrap", "delta_t", bootstrap.delta_t),
    INT("bootstrap", "n_sigma", bootstrap.n_sigma),
    INT("bootstrap", "n_strap", bootstrap.n_strap),
    INT("bootstrap", "max_history", bootstrap.max_history),
  };
  return table;
}

#undef NUM
#undef INT
#undef BOOL
#undef RANGE
#undef VEC3
#undef LIST
#undef DIAG

const Entry& find_entry(const std::string& section, const std::string& key)
{
  for (const auto& e : entries()) {
    if (section == e.section && key == e.key) return e;
  }
  throw ConfigError("unknown key '" + section + "." + key + "'");
}

// ini_parser knows only ';' comments; drop '#' comments outside quotes.
std::string strip_hash_comments(std::istream& in)
{
  std::string out, line;
  while (std::getline(in, line)) {
    char quote = 0;
    for (std::size_t i = 0; i < line.size(); ++i) {
      const char c = line[i];
      if (quote) {
        if (c == quote) quote = 0;
      } else if (c == '"' || c == '\'') {
        quote = c;
      } else if (c == '#') {
        line.resize(i);
        break;
      }
    }
    out += line;
    out += '\n';
  }
  return out;
}

}  // namespace

void set_value(Scenario& s, const std::string& section, const std::string& key, const std::string& value)
{
  find_entry(section, key).set(s, value, section + "." + key);
}

void apply_override(Scenario& s, const std::string& assignment)
{
  const auto eq = assignment.find('=');
  const auto dot = assignment.find('.');
  if (eq == std::string::npos || dot == std::string::npos || dot > eq) {
    throw ConfigError("override '" + assignment + "' is not of the form section.key=value");
  }
  const std::string section = trim(assignment.substr(0, dot));
  const std::string key = trim(assignment.substr(dot + 1, eq - dot - 1));
  if (section == "scenario" && key == "case") {
    throw ConfigError("scenario.case can only be set in a scenario file");
  }
  set_value(s, section, key, trim(assignment.substr(eq + 1)));
}

Scenario parse_scenario(std::istream& in, const std::string& source)
{
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream cleaned(strip_hash_comments(in));
  try {
    pt::ini_parser::read_ini(cleaned, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(source + ":" + std::to_string(e.line()) + ": " + e.message());
  }
  std::string preset = "case1";
  if (const auto sec = tree.get_child_optional("scenario")) {
    if (const auto c = sec->get_optional<std::string>("case")) preset = unquote(*c);
  }
  Scenario s = builtin_scenario(preset);
  for (const auto& [section, body] : tree) {
    if (body.empty() && !body.data().empty()) {
      throw ConfigError(source + ": key '" + section + "' outside a section");
    }
    for (const auto& [key, node] : body) {
      try {
        set_value(s, section, key, node.data());
      } catch (const Error& e) {
        throw ConfigError(source + ": " + e.what());
      }
    }
  }
  s.validate();
  return s;
}

Scenario load_scenario(const std::string& path)
{
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file '" + path + "'");
  return parse_scenario(in, path);
}

std::vector<std::pair<std::string, std::string>> scenario_entries(const Scenario& s)
{
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& e : entries()) out.emplace_back(std::string(e.section) + "." + e.key, e.get(s));
  return out;
}

std::string scenario_to_text(const Scenario& s)
{
  std::string out;
  std::string current;
  for (const auto& e : entries()) {
    if (current != e.section) {
      if (!current.empty()) out += "\n";
      current = e.section;
      out += "[" + current + "]\n";
    }
    out += std::string(e.key) + " = " + e.get(s) + "\n";
  }
  return out;
}

}  // namespace ssampc
