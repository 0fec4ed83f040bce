#ifndef BALAYAGE_RUNNER_HPP
#define BALAYAGE_RUNNER_HPP

#include <filesystem>
#include <string>
#include <vector>

#include "balayage/apps.hpp"
#include "balayage/config.hpp"
#include "balayage/io.hpp"
#include "balayage/radial.hpp"

namespace balayage {

enum class Status { Ok, CheckFailed, Error };

inline const char* to_string(Status s) {
  switch (s) {
    case Status::Ok: return "ok";
    case Status::CheckFailed: return "check_failed";
    case Status::Error: return "error";
  }
  return "?";
}

struct ScenarioOutcome {
  std::string name;
  std::string task;
  Status status = Status::Ok;
  std::string message;
  Json summary;
};

namespace detail {

struct TaskContext {
  const Scenario& s;
  std::uint64_t seed;
  std::filesystem::path dir;
  Json results = Json::object();
  Json checks = Json::object();
  std::vector<std::string> files;
  bool failed = false;

  void check(const std::string& name, bool enabled, bool pass) {
    checks[name] = {{"enabled", enabled}, {"pass", pass}};
    if (enabled && !pass) failed = true;
  }
  void csv(const std::string& file, const CsvTable& t) {
    std::filesystem::create_directories(dir);
    write_csv(dir / file, t);
    files.push_back(file);
  }
};

inline Json coord_json(const Coord& c) { return Json::array({c.a, c.b}); }

inline Json lcp_json(const LcpSolution& d) {
  return {{"converged", d.converged},
          {"method", d.method},
          {"sweeps", d.sweeps_used},
          {"active_set_iterations", d.active_set_iterations},
          {"residual_feasibility", d.residual_feasibility},
          {"residual_complementarity", d.residual_complementarity}};
}

inline void require_converged(const BalayageResult& r) {
  if (!r.converged()) throw SolverError("LCP did not converge within the sweep budget");
}

inline double mask_volume(const DiscreteManifold& m, const Mask& a) {
  double v = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (a[i]) v += m.volume_weights()[static_cast<Eigen::Index>(i)];
  return v;
}

inline void run_bal(TaskContext& c) {
  const auto m = build_manifold(c.s.manifold);
  const auto sigma = build_charge(m, c.s.sigma, c.seed);
  const auto lambda = build_charge(m, c.s.lambda, c.seed + 1000);
  const auto r = bal(m, sigma, lambda, c.s.options);
  require_converged(r);
  const double scale = r.scale();
  Json support = Json::array();
  std::size_t count = 0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    const double x = r.nu.masses[static_cast<Eigen::Index>(i)];
    if (std::fabs(x) <= 1e-9 * scale) continue;
    if (++count <= 32) support.push_back({{"node", i}, {"coord", coord_json(m.coords()[i])}, {"mass", x}});
  }
  const auto bounds = check_bounds(r);
  const auto vs = check_v_system(m, r);
  const auto st = check_structure(m, r);
  c.results = {{"nodes", m.size()},
               {"lcp", lcp_json(r.diagnostics)},
               {"t", r.t},
               {"sigma_total", sigma.total()},
               {"lambda_total", lambda.total()},
               {"nu_total", r.nu.total()},
               {"omega_volume", mask_volume(m, r.omega_mask)},
               {"nu_support_count", count},
               {"nu_support", support},
               {"bounds", {{"worst_upper", bounds.worst_upper}, {"worst_lower", bounds.worst_lower}}},
               {"v_system", {{"obstacle_violation", vs.obstacle_violation}, {"laplacian_violation", vs.laplacian_violation}}},
               {"structure",
                {{"singular_mass", st.singular_mass},
                 {"worst_node", st.worst_node},
                 {"worst_coord", coord_json(m.coords()[st.worst_node])},
                 {"worst_value", st.worst_value},
                 {"worst_in_collar", st.worst_in_collar},
                 {"violation_nodes", st.violation_nodes}}}};
  c.check("bounds", c.s.checks.bounds, bounds.pass);
  c.check("v_system", c.s.checks.v_system, vs.pass);
  c.check("structure", c.s.checks.structure, st.pass);
  if (c.s.dump_fields) c.csv("fields.csv", field_table(m, r));
}

inline void run_harmonic_ball(TaskContext& c) {
  const auto m = build_manifold(c.s.manifold);
  BalayageResult r;
  const auto b = harmonic_ball(m, c.s.center, c.s.t, c.s.options, &r);
  c.results = {{"t", c.s.t},
               {"measured_volume", b.measured_volume},
               {"mask_volume", b.mask_volume},
               {"measured_radius", b.measured_radius},
               {"lcp", lcp_json(r.diagnostics)}};
  c.check("volume", c.s.checks.volume, std::fabs(b.measured_volume - c.s.t) <= 1e-3 * c.s.t);
  if (c.s.dump_fields) c.csv("fields.csv", field_table(m, r));
}

inline void run_geodesic_ball(TaskContext& c) {
  const auto m = build_manifold(c.s.manifold);
  const auto b = geodesic_ball(m, c.s.center, c.s.radius);
  std::size_t nodes = 0;
  for (bool x : b.region) nodes += x;
  c.results = {{"radius", c.s.radius},
               {"mask_volume", b.mask_volume},
               {"measured_radius", b.measured_radius},
               {"region_nodes", nodes}};
}

inline void run_growth(TaskContext& c) {
  const auto m = build_manifold(c.s.manifold);
  Mask d0(m.size(), false);
  if (c.s.initial)
    for (std::size_t i = 0; i < m.size(); ++i) d0[i] = distance(m, m.coords()[i], c.s.initial->first) < c.s.initial->second;
  const double v0 = mask_volume(m, d0);
  const auto g = c.s.incremental ? laplacian_growth_incremental(m, c.s.center, d0, c.s.schedule, c.s.options)
                                 : laplacian_growth(m, c.s.center, d0, c.s.schedule, c.s.options);
  CsvTable t;
  t.header = {"step", "t", "volume", "mask_volume", "radius"};
  bool law = true, nested = true;
  for (std::size_t k = 0; k < g.t.size(); ++k) {
    t.add({std::to_string(k), format_double(g.t[k]), format_double(g.volumes[k]), format_double(g.mask_volumes[k]),
           format_double(g.radii[k])});
    law = law && std::fabs(g.volumes[k] - (v0 + g.t[k])) <= 1e-3 * g.t[k];
    if (k)
      for (std::size_t i = 0; i < m.size(); ++i) nested = nested && (!g.masks[k - 1][i] || g.masks[k][i]);
  }
  c.results = {{"steps", g.t.size()}, {"initial_volume", v0}, {"final_volume", g.volumes.back()},
               {"final_radius", g.radii.back()}, {"incremental", c.s.incremental}};
  c.check("volume", c.s.checks.volume, law);
  c.check("nesting", c.s.checks.volume, nested);
  c.csv("growth.csv", t);
}

inline void run_equilibrium(TaskContext& c) {
  const auto m = build_manifold(c.s.manifold);
  Potential q{Vector::Zero(static_cast<Eigen::Index>(m.size())), m.id()};
  if (!c.s.field.empty()) q = green_potential(m, build_charge(m, c.s.field, c.seed), c.s.options.cg);
  const auto e = weighted_equilibrium(m, q, c.s.t, c.s.options);
  Mask rest(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) rest[i] = !e.support_mask[i];
  c.results = {{"t", c.s.t},
               {"robin_constant", e.robin_constant},
               {"min_slack", e.min_slack},
               {"max_support_deviation", e.max_support_deviation},
               {"mu_total", e.mu.total()},
               {"support_volume", mask_volume(m, e.support_mask)},
               {"complement_components", connected_components(m, rest)},
               {"lcp", lcp_json(e.diagnostics)}};
  c.check("robin", c.s.checks.robin, e.min_slack >= -1e-6 && e.max_support_deviation <= 1e-4);
  if (c.s.dump_fields) {
    CsvTable t;
    t.header = {"node", "a", "b", "W", "Q", "G_mu", "mu", "support"};
    for (std::size_t i = 0; i < m.size(); ++i) {
      const auto k = static_cast<Eigen::Index>(i);
      t.add({std::to_string(i), format_double(m.coords()[i].a), format_double(m.coords()[i].b),
             format_double(m.volume_weights()[k]), format_double(q.values[k]), format_double(e.green_mu.values[k]),
             format_double(e.mu.masses[k]), e.support_mask[i] ? "1" : "0"});
    }
    c.csv("fields.csv", t);
  }
}

inline void run_quadrature(TaskContext& c) {
  const auto m = build_manifold(c.s.manifold);
  const auto b = harmonic_ball(m, c.s.center, c.s.t, c.s.options);
  const Vector measure = b.fill.cwiseProduct(m.volume_weights());
  const auto rep = quadrature_verify(m, measure, atom(m, c.s.center, c.s.t), c.s.probes, c.s.options);
  Json probes = Json::array();
  for (const auto& p : rep.probes)
    probes.push_back({{"probe", coord_json(p.probe)}, {"node", p.node}, {"slack", p.slack}, {"ok", p.ok}});
  c.results = {{"t", c.s.t}, {"region_volume", b.measured_volume}, {"mass_defect", rep.mass_defect},
               {"probes", probes}};
  c.check("quadrature", c.s.checks.quadrature, rep.pass);
}

inline void run_radial(TaskContext& c) {
  CsvTable t;
  t.header = {"n", "rho", "t", "R", "bc", "s_numeric", "s_closed", "q_R", "fraction_lost", "bound", "bound_ok"};
  std::vector<RadialScenario> runs{c.s.radial};
  for (double R : c.s.r_sweep) {
    RadialScenario s = c.s.radial;
    s.R = R;
    s.cells = sweep_cells(s.cells, R);
    runs.push_back(s);
  }
  bool bounds_ok = true, ledger_ok = true;
  std::vector<double> x, frac;
  Json rows = Json::array();
  for (std::size_t k = 0; k < runs.size(); ++k) {
    const RadialScenario& sc = runs[k];
    const auto r = radial_solve(sc, c.s.options);
    const bool dirichlet = sc.bc == Boundary::Dirichlet;
    double bound = 0.0;
    bool ok = true;
    if (dirichlet) {
      const auto b = excess_bound_check(r);
      bound = b.bound;
      ok = b.pass;
      ledger_ok = ledger_ok && std::fabs(r.q_R - r.q_flux) <= 1e-8 * r.bal.scale();
    } else {
      ledger_ok = ledger_ok && std::fabs(r.q_R) <= 1e-10 * r.bal.scale();
    }
    bounds_ok = bounds_ok && ok;
    t.add({std::to_string(sc.n), format_double(sc.rho), format_double(sc.t), format_double(sc.R),
           dirichlet ? "dirichlet" : "neumann", format_double(r.s_numeric), format_double(r.s_closed),
           format_double(r.q_R), format_double(r.fraction_lost), dirichlet ? format_double(bound) : "",
           dirichlet ? (ok ? "1" : "0") : ""});
    rows.push_back({{"R", sc.R}, {"cells", sc.cells}, {"s_numeric", r.s_numeric}, {"s_closed", r.s_closed},
                    {"q_R", r.q_R}, {"fraction_lost", r.fraction_lost}});
    if (k > 0) {
      x.push_back(excess_abscissa(sc.n, sc.R));
      frac.push_back(r.fraction_lost);
    }
    if (k == 0) {
      CsvTable f;
      f.header = {"node", "r", "W", "sigma", "nu", "u"};
      const auto& m = r.manifold;
      for (std::size_t i = 0; i < m.size(); ++i) {
        const auto j = static_cast<Eigen::Index>(i);
        f.add({std::to_string(i), format_double(m.coords()[i].a), format_double(m.volume_weights()[j]),
               format_double(r.bal.sigma.masses[j]), format_double(r.bal.nu.masses[j]),
               format_double(r.u_profile.values[j])});
      }
      if (c.s.dump_fields) c.csv("fields.csv", f);
    }
  }
  c.results = {{"runs", rows}};
  if (x.size() >= 2) {
    const LineFit fit = fit_line(x, frac);
    c.results["excess_limit"] = {{"limit", fit.intercept}, {"slope", fit.slope}, {"r2", fit.r2}};
  }
  c.check("excess_bound", c.s.checks.excess_bound && c.s.radial.bc == Boundary::Dirichlet, bounds_ok);
  c.check("mass_ledger", true, ledger_ok);
  c.csv("table.csv", t);
}

inline void run_diagnose(TaskContext& c) {
  const ManifoldSpec spec = c.s.manifold;
  const auto terms = c.s.sigma;
  const std::uint64_t seed = c.seed;
  auto builder = [&](std::size_t level) {
    DiagnosticLevel lv{build_manifold(spec, level), {}, {}, {}};
    lv.sigma = build_charge(lv.manifold, terms, seed);
    for (const auto& t : terms) {
      if (t.kind != ChargeTerm::Kind::Atom) continue;
      if (t.value > 0) lv.sources.push_back(t.at);
      if (t.value < 0) lv.sinks.push_back(nearest_node(lv.manifold, t.at));
    }
    return lv;
  };
  DiagnosticOptions opt;
  opt.bal = c.s.options;
  const auto rep = existence_diagnostic(builder, spec.levels, opt);
  Json levels = Json::array();
  for (std::size_t k = 0; k < rep.h.size(); ++k)
    levels.push_back({{"h", rep.h[k]}, {"sup_u", rep.sup_u[k]}, {"sink_mass", rep.sink_mass[k]},
                      {"sink_residual", rep.sink_residual[k]}});
  c.results = {{"classification", rep.diverging ? "diverging" : "converging"},
               {"rate_variable", rep.rate_variable},
               {"slope", rep.slope},
               {"intercept", rep.intercept},
               {"r2", rep.r2},
               {"relative_growth", rep.relative_growth},
               {"levels", levels}};
  if (!c.s.expect.empty()) c.check("expect", true, (c.s.expect == "diverging") == rep.diverging);
}

}  // namespace detail

// Runs one scenario, writing its files under out/<name>/.
inline ScenarioOutcome run_scenario(const Scenario& s, std::uint64_t seed, const std::filesystem::path& out) {
  ScenarioOutcome o;
  o.name = s.name;
  o.task = s.task;
  detail::TaskContext c{s, seed, out / s.name, Json::object(), Json::object(), {}, false};
  try {
    if (s.task == "bal") detail::run_bal(c);
    else if (s.task == "harmonic-ball") detail::run_harmonic_ball(c);
    else if (s.task == "geodesic-ball") detail::run_geodesic_ball(c);
    else if (s.task == "growth") detail::run_growth(c);
    else if (s.task == "equilibrium") detail::run_equilibrium(c);
    else if (s.task == "quadrature") detail::run_quadrature(c);
    else if (s.task == "radial") detail::run_radial(c);
    else if (s.task == "diagnose") detail::run_diagnose(c);
    else throw ConfigError("unknown task " + s.task);
    o.status = c.failed ? Status::CheckFailed : Status::Ok;
  } catch (const std::exception& e) {
    o.status = Status::Error;
    o.message = e.what();
  }
  o.summary = {{"version", kVersion}, {"name", s.name}, {"task", s.task}, {"status", to_string(o.status)}};
  if (!o.message.empty()) o.summary["error"] = o.message;
  o.summary["checks"] = c.checks;
  o.summary["results"] = c.results;
  o.summary["files"] = c.files;
  std::filesystem::create_directories(c.dir);
  write_json(c.dir / "summary.json", o.summary);
  return o;
}

inline int exit_code(const std::vector<ScenarioOutcome>& outcomes) {
  bool check_failed = false;
  for (const auto& o : outcomes) {
    if (o.status == Status::Error) return 1;
    check_failed = check_failed || o.status == Status::CheckFailed;
  }
  return check_failed ? 2 : 0;
}

inline void write_run_summary(const std::filesystem::path& out, std::uint64_t seed,
                              const std::vector<ScenarioOutcome>& outcomes) {
  Json list = Json::array();
  for (const auto& o : outcomes) list.push_back(o.summary);
  write_json(out / "summary.json", {{"version", kVersion}, {"seed", seed}, {"scenarios", list}});
}

}  // namespace balayage

#endif
