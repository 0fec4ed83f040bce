#ifndef BALAYAGE_CONFIG_HPP
#define BALAYAGE_CONFIG_HPP

#include <cstdint>
#include <fstream>
#include <initializer_list>
#include <map>
#include <optional>
#include <random>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "balayage/io.hpp"
#include "balayage/radial.hpp"

namespace balayage {

// Malformed configuration; the message names the offending field or line.
class ConfigError : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

struct ManifoldSpec {
  std::string type;  // circle, sphere_latlong, sphere_polar, sn_polar, radial_ball
  std::size_t resolution = 0;  // nodes, n_theta or cells
  std::size_t n_phi = 0;
  int n = 2;
  double radius = 1.0;
  Boundary boundary = Boundary::Dirichlet;
  std::vector<std::size_t> levels;  // diagnose only
};

struct ChargeTerm {
  enum class Kind { Atom, Constant, Indicator, Random } kind = Kind::Atom;
  Coord at{};
  double value = 0.0;  // atom mass or density value / scale
  double radius = 0.0;
  std::uint64_t seed = 0;
};

struct CheckFlags {
  bool bounds = true;
  bool v_system = true;
  bool structure = false;
  bool volume = true;
  bool robin = true;
  bool quadrature = true;
  bool excess_bound = true;
};

struct Scenario {
  std::string name;
  std::string task;
  ManifoldSpec manifold;
  std::vector<ChargeTerm> sigma;
  std::vector<ChargeTerm> lambda;
  BalayageOptions options;
  CheckFlags checks;
  bool dump_fields = true;
  Coord center{};
  double t = 0.0;
  double radius = 0.0;
  std::vector<double> schedule;
  std::optional<std::pair<Coord, double>> initial;
  bool incremental = false;
  std::vector<ChargeTerm> field;  // equilibrium: Q is the Green potential of these
  std::vector<Coord> probes;
  RadialScenario radial;
  std::vector<double> r_sweep;
  std::string expect;  // diagnose: "diverging" or "converging"
};

struct Config {
  std::uint64_t seed = 42;
  std::vector<Scenario> scenarios;
};

inline const std::set<std::string>& known_tasks() {
  static const std::set<std::string> t = {"bal",         "harmonic-ball", "geodesic-ball", "growth",
                                          "equilibrium", "quadrature",    "radial",        "diagnose"};
  return t;
}

namespace detail {

struct Reader {
  const Json& j;
  std::string path;

  [[noreturn]] void fail(const std::string& what) const { throw ConfigError(path + ": " + what); }

  Reader at(const std::string& key) const {
    if (!j.contains(key)) throw ConfigError(path + "." + key + ": required field missing");
    return {j.at(key), path + "." + key};
  }
  Reader at(std::size_t i) const { return {j.at(i), path + "[" + std::to_string(i) + "]"}; }
  bool has(const std::string& key) const { return j.is_object() && j.contains(key); }

  double number() const {
    if (!j.is_number()) fail("expected a number");
    return j.get<double>();
  }
  double positive() const {
    const double x = number();
    if (!(x > 0.0)) fail("expected a positive number");
    return x;
  }
  std::size_t count(std::size_t min = 1) const {
    if (!j.is_number_integer() || j.get<long long>() < static_cast<long long>(min))
      fail("expected an integer >= " + std::to_string(min));
    return j.get<std::size_t>();
  }
  bool boolean() const {
    if (!j.is_boolean()) fail("expected true or false");
    return j.get<bool>();
  }
  std::string string() const {
    if (!j.is_string()) fail("expected a string");
    return j.get<std::string>();
  }
  Coord coord() const {
    if (j.is_number()) return {j.get<double>(), 0.0};
    if (!j.is_array() || j.empty() || j.size() > 2) fail("expected a coordinate [a] or [a, b]");
    Coord c{at(0).number(), 0.0};
    if (j.size() == 2) c.b = at(1).number();
    return c;
  }
  void array() const {
    if (!j.is_array()) fail("expected an array");
  }
  void object() const {
    if (!j.is_object()) fail("expected an object");
  }
  void only(const std::set<std::string>& keys) const {
    object();
    for (auto it = j.begin(); it != j.end(); ++it)
      if (!keys.count(it.key())) throw ConfigError(path + "." + it.key() + ": unknown field");
  }
};

inline Boundary parse_boundary(const Reader& r) {
  const std::string s = r.string();
  if (s == "dirichlet") return Boundary::Dirichlet;
  if (s == "neumann") return Boundary::Neumann;
  r.fail("expected \"dirichlet\" or \"neumann\"");
}

inline ManifoldSpec parse_manifold(const Reader& r, bool levels) {
  ManifoldSpec m;
  m.type = r.at("type").string();
  const char* res_key = nullptr;
  if (m.type == "circle") {
    res_key = "nodes";
    r.only({"type", "nodes", "levels"});
  } else if (m.type == "sphere_latlong") {
    res_key = "n_theta";
    r.only({"type", "n_theta", "n_phi", "levels"});
    if (!levels) m.n_phi = r.at("n_phi").count(3);
  } else if (m.type == "sphere_polar") {
    res_key = "cells";
    r.only({"type", "cells", "levels"});
  } else if (m.type == "sn_polar") {
    res_key = "cells";
    r.only({"type", "cells", "n", "levels"});
    m.n = static_cast<int>(r.at("n").count(2));
  } else if (m.type == "radial_ball") {
    res_key = "cells";
    r.only({"type", "cells", "n", "radius", "boundary", "levels"});
    m.n = static_cast<int>(r.at("n").count(1));
    m.radius = r.at("radius").positive();
    m.boundary = parse_boundary(r.at("boundary"));
  } else {
    r.at("type").fail("unknown manifold type \"" + m.type +
                      "\" (circle, sphere_latlong, sphere_polar, sn_polar, radial_ball)");
  }
  if (levels) {
    const Reader lv = r.at("levels");
    lv.array();
    if (lv.j.size() < 3) lv.fail("at least 3 refinement levels");
    for (std::size_t i = 0; i < lv.j.size(); ++i) m.levels.push_back(lv.at(i).count(3));
  } else {
    m.resolution = r.at(res_key).count(m.type == "sphere_latlong" ? 4 : 2);
  }
  return m;
}

inline std::vector<ChargeTerm> parse_charges(const Reader& r) {
  r.array();
  std::vector<ChargeTerm> out;
  for (std::size_t i = 0; i < r.j.size(); ++i) {
    const Reader e = r.at(i);
    e.object();
    ChargeTerm c;
    if (e.has("atom")) {
      e.only({"atom", "mass"});
      c.kind = ChargeTerm::Kind::Atom;
      c.at = e.at("atom").coord();
      c.value = e.at("mass").number();
    } else if (e.has("density")) {
      const std::string d = e.at("density").string();
      if (d == "constant") {
        e.only({"density", "value"});
        c.kind = ChargeTerm::Kind::Constant;
        c.value = e.at("value").number();
      } else if (d == "indicator") {
        e.only({"density", "value", "center", "radius"});
        c.kind = ChargeTerm::Kind::Indicator;
        c.value = e.at("value").number();
        c.at = e.at("center").coord();
        c.radius = e.at("radius").positive();
      } else if (d == "random") {
        e.only({"density", "scale", "seed"});
        c.kind = ChargeTerm::Kind::Random;
        c.value = e.at("scale").number();
        c.seed = e.has("seed") ? e.at("seed").count(0) : 0;
      } else {
        e.at("density").fail("unknown density \"" + d + "\" (constant, indicator, random)");
      }
    } else {
      e.fail("expected an \"atom\" or \"density\" term");
    }
    out.push_back(c);
  }
  return out;
}

inline LcpParams parse_solver(const Reader& r) {
  r.only({"relaxation", "tolerance", "max_sweeps", "polish"});
  LcpParams p;
  if (r.has("relaxation")) {
    p.relaxation = r.at("relaxation").number();
    if (!(p.relaxation > 0.0 && p.relaxation < 2.0)) r.at("relaxation").fail("must lie in (0, 2)");
  }
  if (r.has("tolerance")) p.tolerance = r.at("tolerance").positive();
  if (r.has("max_sweeps")) p.max_sweeps = r.at("max_sweeps").count(1);
  if (r.has("polish")) p.polish = r.at("polish").boolean();
  return p;
}

inline CheckFlags parse_checks(const Reader& r) {
  r.only({"bounds", "v_system", "structure", "volume", "robin", "quadrature", "excess_bound"});
  CheckFlags c;
  auto flag = [&](const char* k, bool& dst) {
    if (r.has(k)) dst = r.at(k).boolean();
  };
  flag("bounds", c.bounds);
  flag("v_system", c.v_system);
  flag("structure", c.structure);
  flag("volume", c.volume);
  flag("robin", c.robin);
  flag("quadrature", c.quadrature);
  flag("excess_bound", c.excess_bound);
  return c;
}

inline std::set<std::string> task_keys(const std::string& task) {
  std::set<std::string> k = {"name", "task", "solver", "checks"};
  auto add = [&](std::initializer_list<const char*> extra) {
    for (const char* e : extra) k.insert(e);
  };
  if (task == "bal") add({"manifold", "sigma", "lambda", "dump_fields"});
  if (task == "harmonic-ball") add({"manifold", "center", "t", "dump_fields"});
  if (task == "geodesic-ball") add({"manifold", "center", "radius"});
  if (task == "growth") add({"manifold", "center", "schedule", "initial", "incremental"});
  if (task == "equilibrium") add({"manifold", "t", "field", "dump_fields"});
  if (task == "quadrature") add({"manifold", "center", "t", "probes"});
  if (task == "radial") add({"n", "rho", "t", "R", "boundary", "cells", "R_sweep"});
  if (task == "diagnose") add({"manifold", "sigma", "expect"});
  return k;
}

inline Scenario parse_scenario(const Reader& r, std::set<std::string>& names) {
  r.object();
  Scenario s;
  s.name = r.at("name").string();
  static const std::regex ok("[A-Za-z0-9_.-]+");
  if (!std::regex_match(s.name, ok) || s.name == "." || s.name == "..")
    r.at("name").fail("names may use letters, digits, '_', '.', '-'");
  if (!names.insert(s.name).second) r.at("name").fail("duplicate scenario name \"" + s.name + "\"");
  s.task = r.at("task").string();
  if (!known_tasks().count(s.task)) r.at("task").fail("unknown task \"" + s.task + "\"");
  r.only(task_keys(s.task));
  if (r.has("solver")) s.options.lcp = parse_solver(r.at("solver"));
  if (r.has("checks")) s.checks = parse_checks(r.at("checks"));
  if (r.has("dump_fields")) s.dump_fields = r.at("dump_fields").boolean();
  const std::string& t = s.task;
  if (t != "radial") s.manifold = parse_manifold(r.at("manifold"), t == "diagnose");
  if (t == "bal" || t == "diagnose") s.sigma = parse_charges(r.at("sigma"));
  if (t == "bal" && r.has("lambda")) s.lambda = parse_charges(r.at("lambda"));
  if (t == "harmonic-ball" || t == "geodesic-ball" || t == "growth" || t == "quadrature")
    s.center = r.at("center").coord();
  if (t == "harmonic-ball" || t == "equilibrium" || t == "quadrature") s.t = r.at("t").positive();
  if (t == "geodesic-ball") s.radius = r.at("radius").positive();
  if (t == "growth") {
    const Reader sch = r.at("schedule");
    sch.array();
    for (std::size_t i = 0; i < sch.j.size(); ++i) s.schedule.push_back(sch.at(i).number());
    if (r.has("initial")) {
      const Reader in = r.at("initial");
      in.only({"center", "radius"});
      s.initial = std::pair{in.at("center").coord(), in.at("radius").positive()};
    }
    if (r.has("incremental")) s.incremental = r.at("incremental").boolean();
  }
  if (t == "equilibrium" && r.has("field")) s.field = parse_charges(r.at("field"));
  if (t == "quadrature") {
    const Reader pr = r.at("probes");
    pr.array();
    for (std::size_t i = 0; i < pr.j.size(); ++i) s.probes.push_back(pr.at(i).coord());
  }
  if (t == "radial") {
    s.radial.n = static_cast<int>(r.at("n").count(1));
    s.radial.rho = r.at("rho").number();
    s.radial.t = r.at("t").number();
    s.radial.R = r.at("R").number();
    s.radial.bc = parse_boundary(r.at("boundary"));
    if (r.has("cells")) s.radial.cells = r.at("cells").count(16);
    try {
      validate(s.radial);
    } catch (const InvalidInput& e) {
      r.fail(e.what());
    }
    if (r.has("R_sweep")) {
      const Reader sw = r.at("R_sweep");
      sw.array();
      if (sw.j.size() < 2) sw.fail("at least two radii");
      for (std::size_t i = 0; i < sw.j.size(); ++i) {
        const double R = sw.at(i).number();
        if (!(R > 1.0)) sw.at(i).fail("radii must exceed 1");
        s.r_sweep.push_back(R);
      }
      if (s.radial.bc != Boundary::Dirichlet) sw.fail("an R sweep needs the dirichlet boundary");
    }
  }
  if (t == "diagnose" && r.has("expect")) {
    s.expect = r.at("expect").string();
    if (s.expect != "diverging" && s.expect != "converging")
      r.at("expect").fail("expected \"diverging\" or \"converging\"");
  }
  return s;
}

inline std::string line_col(const std::string& text, std::size_t byte) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return "line " + std::to_string(line) + ", column " + std::to_string(col);
}

}  // namespace detail

// Accepts {"seed": k, "scenarios": [...]} or a bare scenario array.
inline Config parse_config(const std::string& text, std::uint64_t default_seed = 42) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    std::string msg = e.what();
    // Keep the parser's reason, drop its own position prefix.
    const auto pos = msg.find(": ", msg.find("parse error"));
    throw ConfigError("malformed JSON at " + detail::line_col(text, e.byte > 0 ? e.byte - 1 : 0) + ": " +
                      (pos == std::string::npos ? msg : msg.substr(pos + 2)));
  }
  Config c;
  c.seed = default_seed;
  detail::Reader root{j, "config"};
  const Json* list = &j;
  std::string path = "scenarios";
  if (j.is_object()) {
    root.only({"seed", "scenarios"});
    if (root.has("seed")) c.seed = root.at("seed").count(0);
    list = &root.at("scenarios").j;
  } else if (!j.is_array()) {
    root.fail("expected an object with \"scenarios\" or an array of scenarios");
  }
  detail::Reader sr{*list, path};
  sr.array();
  std::set<std::string> names;
  for (std::size_t i = 0; i < list->size(); ++i) c.scenarios.push_back(detail::parse_scenario(sr.at(i), names));
  return c;
}

inline Config load_config(const std::string& path, std::uint64_t default_seed = 42) {
  std::ifstream in(path);
  if (!in) throw ConfigError(path + ": cannot open");
  std::stringstream ss;
  ss << in.rdbuf();
  try {
    return parse_config(ss.str(), default_seed);
  } catch (const ConfigError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

inline DiscreteManifold build_manifold(const ManifoldSpec& s, std::size_t resolution = 0) {
  const std::size_t res = resolution ? resolution : s.resolution;
  if (s.type == "circle") return build_circle(res);
  if (s.type == "sphere_latlong") return build_sphere_latlong(static_cast<int>(res), static_cast<int>(s.n_phi ? s.n_phi : 2 * res));
  if (s.type == "sphere_polar") return build_sphere_polar(res);
  if (s.type == "sn_polar") return build_sn_polar(s.n, res);
  if (s.type == "radial_ball") return build_radial_ball(s.n, s.radius, res, s.boundary);
  throw ConfigError("unknown manifold type " + s.type);
}

inline ChargeDistribution build_charge(const DiscreteManifold& m, const std::vector<ChargeTerm>& terms,
                                       std::uint64_t seed) {
  ChargeDistribution c = ChargeDistribution::zero(m);
  for (std::size_t k = 0; k < terms.size(); ++k) {
    const ChargeTerm& t = terms[k];
    switch (t.kind) {
      case ChargeTerm::Kind::Atom:
        c += atom(m, t.at, t.value);
        break;
      case ChargeTerm::Kind::Constant:
        c += volume_form(m, t.value);
        break;
      case ChargeTerm::Kind::Indicator:
        c += from_density(m, [&](const Coord& x) { return distance(m, x, t.at) < t.radius ? t.value : 0.0; });
        break;
      case ChargeTerm::Kind::Random: {
        std::mt19937_64 rng(t.seed ? t.seed : seed + k);
        std::uniform_real_distribution<double> u(-1.0, 1.0);
        for (Eigen::Index i = 0; i < c.masses.size(); ++i) c.masses[i] += t.value * u(rng) * m.volume_weights()[i];
        break;
      }
    }
  }
  return c;
}

}  // namespace balayage

#endif
