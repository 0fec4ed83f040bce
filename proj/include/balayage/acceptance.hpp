#ifndef BALAYAGE_ACCEPTANCE_HPP
#define BALAYAGE_ACCEPTANCE_HPP

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <future>
#include <numbers>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "balayage/apps.hpp"
#include "balayage/radial.hpp"

namespace balayage::acceptance {

struct Options {
  std::string filter;  // module name or criterion number; empty runs all
  std::uint64_t seed = 42;
  bool inject_stiffness_sign_error = false;
};

struct Outcome {
  int id = 0;
  std::string module;
  std::string title;
  bool pass = false;
  double seconds = 0.0;
  double budget = 0.0;
  std::string detail;
  std::vector<std::string> failures;  // names of the failed requirements
};

namespace detail {

using std::numbers::pi;

struct Context {
  Options opt;

  // Grids used by the battery; the mutation smoke test flips the sign of
  // every off-diagonal stiffness entry.
  DiscreteManifold prep(DiscreteManifold m) const {
    if (!opt.inject_stiffness_sign_error) return m;
    SparseMatrix k = m.stiffness();
    for (Eigen::Index i = 0; i < k.outerSize(); ++i)
      for (SparseMatrix::InnerIterator it(k, i); it; ++it)
        if (it.col() != i) it.valueRef() = -it.value();
    return m.with_stiffness(std::move(k));
  }
};

struct Verdict {
  bool pass = true;
  std::ostringstream note;
  std::vector<std::string> failures;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      failures.push_back(what);
      note << "[fail: " << what << "] ";
    }
  }
};

inline double linf(const Vector& v) { return v.lpNorm<Eigen::Infinity>(); }

inline void circle_atoms(const Context& c, Verdict& v) {
  const std::size_t n = 2000;
  const auto m = c.prep(build_circle(n));
  const double h = 1.0 / n, a = 0.25, b = 0.75;
  const auto r = bal_zero(m, atom(m, {a, 0}, 1.0) - atom(m, {b, 0}, 2.0));
  v.require(r.converged(), "LCP converged");
  const double nu_err = (r.nu.masses + atom(m, {b, 0}, 1.0).masses).lpNorm<1>();
  double u_err = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = m.coords()[i].a;
    const double exact = -0.5 * std::fabs(x - a) + 0.5 * std::fabs(x - b) + (b - a) * x + (b - a) * (0.5 - b);
    u_err = std::max(u_err, std::fabs(r.u.values[static_cast<Eigen::Index>(i)] - exact));
  }
  const auto st = check_structure(m, r);
  const std::size_t bn = nearest_node(m, {b, 0});
  v.note << "|nu + delta_b|_1=" << nu_err << " max|u - exact|=" << u_err << " (5h=" << 5 * h << ")"
         << " structure violation at node " << st.worst_node << " ";
  v.require(nu_err <= 1e-6, "nu = -delta_b");
  v.require(u_err <= 5 * h, "u error <= 5h");
  v.require(check_bounds(r).pass, "bounds");
  v.require(!st.pass && st.violation_nodes == std::vector<std::size_t>{bn}, "structure violation exactly at b");
}

inline double cap_angle(const DiscreteManifold& m, const ChargeDistribution& sigma, Verdict& v) {
  const auto r = bal_zero(m, sigma);
  v.require(r.converged(), "LCP converged");
  return saturation_fraction(r).sum() * m.mesh_size();
}

inline void sphere_cap(const Context& c, Verdict& v) {
  const auto m = c.prep(build_sphere_polar(1024));
  const double h = pi / 1024;
  const double th = cap_angle(m, atom(m, {0, 0}, 1.0) - volume_form(m, 1.0 / (2 * pi)), v);
  v.note << "theta0(1/2pi)=" << th << " ";
  v.require(std::fabs(th - pi / 2) <= 2 * h, "theta0 = pi/2 within 2h");
  for (double alpha : {1.0 / (3 * pi), 1.0 / pi, 2.0 / pi}) {
    const double t0 = cap_angle(m, atom(m, {0, 0}, 1.0) - volume_form(m, alpha), v);
    const double res = std::fabs(2 * pi * alpha * (1 - std::cos(t0)) - 1);
    v.note << "res(" << alpha << ")=" << res << " ";
    v.require(res <= 1e-2, "cap residual");
  }
}

inline void s3_cap(const Context& c, Verdict& v) {
  const auto m = c.prep(build_sn_polar(3, 1024));
  for (double alpha : {1.0 / (2 * pi * pi), 1.0 / (pi * pi), 2.0 / (pi * pi)}) {
    const double xi = cap_angle(m, atom(m, {0, 0}, 1.0) - volume_form(m, alpha), v);
    const double res = std::fabs(pi * alpha * (2 * xi - std::sin(2 * xi)) - 1);
    v.note << "xi0=" << xi << " res=" << res << " ";
    v.require(res <= 1e-2, "S3 cap residual");
  }
}

inline void nonexistence(const Context& c, Verdict& v) {
  const std::vector<std::size_t> levels{128, 256, 512, 1024};
  auto sphere = [&c](double alpha) {
    return [alpha, &c](std::size_t n) {
      auto m = c.prep(build_sphere_polar(n));
      auto s = atom(m, {0, 0}, 1.0) - atom(m, {pi, 0}, 2.0) - volume_form(m, alpha);
      return DiagnosticLevel{m, s, {{0.0, 0.0}}, {n - 1}};
    };
  };
  const auto div = existence_diagnostic(sphere(0.0), levels);
  v.note << "diverging slope=" << div.slope << " R2=" << div.r2 << " ";
  v.require(div.diverging && div.r2 > 0.98, "delta_N - 2 delta_S diverges like log(1/h)");
  const auto conv = existence_diagnostic(sphere(1.0 / (2 * pi)), levels);
  double worst = 0.0;
  for (double r : conv.sink_residual) worst = std::max(worst, r);
  v.note << "mixed: diverging=" << conv.diverging << " sink residual=" << worst << " ";
  v.require(!conv.diverging, "mixed case converges");
  v.require(worst <= 1e-6, "-2 delta_S intact");
}

inline void harmonic_balls(const Context& c, Verdict& v) {
  double worst = 0.0, sine_law = 0.0;
  auto law = [&](const BallReport& b, double t) {
    const double e = std::fabs(b.measured_volume - t) / t;
    worst = std::max(worst, e);
    v.require(e <= 1e-3, "volume law");
  };
  const auto circ = c.prep(build_circle(2000));
  for (int k = 1; k <= 10; ++k) law(harmonic_ball(circ, {0.3, 0}, 0.09 * k), 0.09 * k);
  const auto flat = c.prep(build_radial_ball(2, 2.0, 1024, Boundary::Neumann));
  for (int k = 1; k <= 10; ++k) {
    const double r = 0.15 * k;
    law(harmonic_ball(flat, {0, 0}, pi * r * r), pi * r * r);
  }
  const auto sph = c.prep(build_sphere_polar(1024));
  bool agree = true;
  for (int k = 1; k <= 10; ++k) {
    const double t = 1.2 * k;
    const auto e = ball_equivalence_check(sph, {0, 0}, std::acos(1 - t / (2 * pi)));
    law(e.harmonic, t);
    agree = agree && e.regions_agree;
    sine_law = std::max(sine_law, std::fabs(e.sine_law_residual));
  }
  v.note << "worst relative volume error=" << worst << " sphere harmonic=geodesic: " << agree
         << " sine-law residual (reported)=" << sine_law << " ";
  v.require(agree, "harmonic and geodesic balls agree up to a collar");
}

inline void growth(const Context& c, Verdict& v) {
  const std::size_t n = 1024;
  const auto m = c.prep(build_sphere_polar(n));
  const double h = pi / n;
  std::vector<double> ts;
  for (int k = 1; k <= 5; ++k) ts.push_back(2 * pi * (1 - std::cos(k * pi / 10)));
  const Mask empty(n, false);
  const auto g = laplacian_growth(m, {0, 0}, empty, ts);
  const auto inc = laplacian_growth_incremental(m, {0, 0}, empty, ts);
  double worst_angle = 0.0, worst_vol = 0.0;
  bool nested = true, same = true;
  for (std::size_t k = 0; k < ts.size(); ++k) {
    worst_angle = std::max(worst_angle, std::fabs(g.radii[k] - (k + 1) * pi / 10));
    worst_vol = std::max(worst_vol, std::fabs(g.volumes[k] - ts[k]) / ts[k]);
    if (k)
      for (std::size_t i = 0; i < n; ++i) nested = nested && (!g.masks[k - 1][i] || g.masks[k][i]);
    same = same && equal_up_to_collar(m, g.masks[k], inc.masks[k]);
  }
  v.note << "max angle error=" << worst_angle << " (2h=" << 2 * h << ") max volume error=" << worst_vol << " ";
  v.require(worst_angle <= 2 * h, "cap angles");
  v.require(worst_vol <= 1e-3, "vol(D(t)) = t");
  v.require(nested, "nesting");
  v.require(same, "incremental matches direct");
}

inline void radial_dirichlet(const Context&, Verdict& v) {
  auto sc = [](int n, double R) {
    RadialScenario s;
    s.n = n;
    s.R = R;
    return s;
  };
  std::vector<std::future<ExcessLimit>> limits;
  for (int n : {2, 3, 5}) limits.push_back(std::async(std::launch::async, [n, &sc] { return excess_limit(sc(n, 10)); }));
  for (int n : {1, 2, 3, 5}) {
    for (double R : {10.0, 100.0}) {
      const auto r = radial_solve(sc(n, R));
      const double h = r.manifold.mesh_size();
      const auto b = excess_bound_check(r);
      v.require(std::fabs(r.s_numeric - r.s_closed) <= 3 * h, "s within 3h (n=" + std::to_string(n) + ")");
      v.require(b.pass, "excess bound (n=" + std::to_string(n) + ")");
    }
  }
  const ExcessLimit e2 = limits[0].get();
  bool decreasing = true;
  for (std::size_t k = 1; k < e2.fraction.size(); ++k) decreasing = decreasing && e2.fraction[k] < e2.fraction[k - 1];
  v.note << "n=2 fractions";
  for (double f : e2.fraction) v.note << " " << f;
  v.note << " fit in 1/log R: intercept=" << e2.limit << " R2=" << e2.fit.r2 << "; ";
  v.require(decreasing && e2.fit.r2 >= 0.99 && std::fabs(e2.limit) <= 0.02, "n=2 decays like 1/log R");
  for (std::size_t k = 1; k < 3; ++k) {
    const ExcessLimit e = limits[k].get();
    const int n = k == 1 ? 3 : 5;
    v.note << "n=" << n << " limit=" << e.limit << " expected (n-2)/n=" << e.expected << "; ";
    v.require(std::fabs(e.limit - e.expected) <= 0.02 * e.expected, "n=" + std::to_string(n) + " excess fraction");
  }
}

inline void radial_neumann(const Context&, Verdict& v) {
  for (int n : {1, 2, 3}) {
    RadialScenario s;
    s.n = n;
    s.R = 2.0;
    s.bc = Boundary::Neumann;
    const auto r = radial_solve(s);
    const double h = r.manifold.mesh_size();
    const double defect = std::fabs(r.bal.nu.total() - r.bal.sigma.total()) / r.bal.scale();
    v.note << "n=" << n << " s=" << r.s_numeric << " exact=" << r.s_closed << " ";
    v.require(std::fabs(r.s_numeric - r.s_closed) <= 3 * h, "s within 3h");
    v.require(defect <= 1e-10, "mass kept");
  }
}

inline void equilibrium(const Context& c, Verdict& v) {
  const auto m = c.prep(build_sphere_latlong(64, 128));
  const Eigen::Index n = static_cast<Eigen::Index>(m.size());
  const auto zero = weighted_equilibrium(m, Potential{Vector::Zero(n), m.id()}, 1.0);
  v.require(linf(zero.mu.masses - m.volume_weights()) == 0.0, "Q = 0 gives mu = t W exactly");
  const std::size_t a = nearest_node(m, {pi / 2, 0});
  const Potential q{green_potential(m, atom_at_node(m, 0, 1.0)).values +
                        green_potential(m, atom_at_node(m, a, 1.0)).values,
                    m.id()};
  const auto e = weighted_equilibrium(m, q, 1.0);
  Mask caps(m.size());
  for (std::size_t i = 0; i < m.size(); ++i) caps[i] = !e.support_mask[i];
  const std::size_t parts = connected_components(m, caps);
  v.note << "c_Robin=" << e.robin_constant << " min slack=" << e.min_slack
         << " max deviation on supp=" << e.max_support_deviation << " complement components=" << parts << " ";
  v.require(e.min_slack >= -1e-6, "Q + G^mu >= c - 1e-6");
  v.require(e.max_support_deviation <= 1e-4, "|Q + G^mu - c| <= 1e-4 on supp mu");
  v.require(parts == 2 && caps[0] && caps[a], "two disjoint caps");
}

struct Pair {
  ChargeDistribution sigma;
  ChargeDistribution lambda;
};

inline Pair random_pair(const DiscreteManifold& m, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> node(0, m.size() - 1);
  ChargeDistribution s = ChargeDistribution::zero(m);
  for (int k = 0; k < 3; ++k) s.masses[static_cast<Eigen::Index>(node(rng))] += 2.0 * g(rng);
  const double a = g(rng), b = g(rng);
  s += from_density(m, [&](const Coord& x) { return a * std::cos(3 * x.a + x.b) + b * std::sin(x.a); });
  const double c0 = u(rng);
  ChargeDistribution l = from_density(m, [&](const Coord& x) { return c0 * (1.0 + std::cos(x.a) * std::cos(x.a)); });
  const double excess = s.total() - l.total();
  if (excess > -0.1) s -= volume_form(m, (excess + 0.1 + u(rng)) / m.total_volume());
  return {s, l};
}

struct Tally {
  std::size_t runs = 0, failures = 0;
  void operator()(bool ok) {
    ++runs;
    failures += ok ? 0 : 1;
  }
};

inline void property_battery(const Context& c, Verdict& v) {
  std::mt19937_64 rng(c.opt.seed);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  Tally mass, bounds, cov, mono, comp, quad, vsys, jmono, oracle;
  const DiscreteManifold grids[] = {c.prep(build_circle(64)), c.prep(build_sphere_latlong(10, 16)),
                                    c.prep(build_sphere_polar(64))};
  for (const auto& m : grids) {
    const auto vol = volume_form(m);
    for (int trial = 0; trial < 100; ++trial) {
      const auto [s, l] = random_pair(m, rng);
      const auto r = bal(m, s, l);
      const double scale = r.scale();
      mass(r.converged() && std::fabs(r.nu.total() - s.total()) <= 1e-8 * s.l1());
      bounds(check_bounds(r).pass);
      vsys(check_v_system(m, r).pass);

      ChargeDistribution tau = ChargeDistribution::zero(m);
      for (auto& x : tau.masses) x = g(rng);
      const auto rc = bal(m, s + tau, l + tau);
      cov(linf(rc.nu.masses - (r.nu.masses + tau.masses)) <= 1e-8 * scale);

      ChargeDistribution bump = ChargeDistribution::zero(m);
      for (auto& x : bump.masses) x = 0.05 * unif(rng);
      const auto lam_hi = l + volume_form(m, bump.total() / m.total_volume());
      const auto r_hi = bal(m, s + bump, lam_hi);
      const auto r_lo = bal(m, s, lam_hi);
      mono((r_lo.nu.masses - r_hi.nu.masses).maxCoeff() <= 1e-8 * r_hi.scale());

      ChargeDistribution s2 = ChargeDistribution::zero(m), l2 = l;
      for (auto& x : s2.masses) x = unif(rng);
      s2 *= 0.05 * unif(rng) / s2.total();  // keeps s + s2 below l1 in total
      ChargeDistribution l1 = l2;
      for (Eigen::Index i = 0; i < l1.masses.size(); ++i) l1.masses[i] += s2.masses[i] * unif(rng);
      const auto [lhs, rhs] = bal_incremental(m, s, s2, l1, l2);
      comp(linf(lhs.nu.masses - rhs.nu.masses) <= 1e-8 * rhs.scale());

      const Potential gm = green_potential(m, r.mu);
      const double eps = unif(rng);
      Vector v2 = r.v.values - eps * gm.values;
      v2.array() += eps * gm.values.maxCoeff();
      const double j1 = j_functional(m, r.v.values, r.t), j2 = j_functional(m, v2, r.t);
      jmono(j1 <= j2 + 1e-8 * std::max(1.0, std::fabs(j1)));

      // Quadrature inequality on the saturated set of a harmonic ball.
      Coord centre{0.0, 0.0};
      if (m.kind() == Kind::Circle) centre = {unif(rng), 0.0};
      if (m.kind() == Kind::SphereLatLong) centre = m.coords()[static_cast<std::size_t>(unif(rng) * (m.size() - 1))];
      const double t = (0.1 + 0.4 * unif(rng)) * m.total_volume();
      const auto ball = harmonic_ball(m, centre, t);
      const Vector measure = ball.fill.cwiseProduct(m.volume_weights());
      std::vector<std::pair<double, std::size_t>> far;
      for (std::size_t i = 0; i < m.size(); ++i)
        if (measure[static_cast<Eigen::Index>(i)] == 0.0) far.emplace_back(-distance(m, m.coords()[i], centre), i);
      std::sort(far.begin(), far.end());
      std::vector<Coord> probes;
      for (std::size_t k = 0; k < far.size() && k < 3; ++k) probes.push_back(m.coords()[far[k].second]);
      quad(!probes.empty() && quadrature_verify(m, measure, atom(m, centre, t), probes).pass);
    }
  }
  // PGS against exhaustive active-set enumeration on small grids.
  LcpParams pure;
  pure.polish = false;
  for (int trial = 0; trial < 120; ++trial) {
    const std::size_t n = 4 + static_cast<std::size_t>(trial % 9);
    const auto m = trial % 2 ? c.prep(build_circle(n)) : c.prep(build_sphere_polar(n));
    ChargeDistribution s = ChargeDistribution::zero(m), l = s;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
      s.masses[i] = g(rng);
      l.masses[i] = unif(rng) * m.volume_weights()[i];
    }
    s -= volume_form(m, (s.total() - l.total() + 0.5 * unif(rng) + 0.1) / m.total_volume());
    const Vector rhs = s.masses - l.masses;
    try {
      const auto pgs = solve_pgs(make_lcp(m.stiffness(), rhs, m.singular(), pure));
      const auto brute = solve_brute(make_lcp(m.stiffness(), rhs, m.singular()));
      oracle(pgs.converged && linf(pgs.u - brute.u) <= 1e-8 * std::max(1.0, rhs.lpNorm<1>()));
    } catch (const std::exception&) {
      oracle(false);
    }
  }
  auto line = [&](const char* name, const Tally& t) {
    v.note << name << " " << t.runs - t.failures << "/" << t.runs << "; ";
    v.require(t.failures == 0 && t.runs > 0, name);
  };
  line("mass", mass);
  line("bounds", bounds);
  line("covariance", cov);
  line("monotonicity", mono);
  line("composition", comp);
  line("quadrature", quad);
  line("v-system", vsys);
  line("J-monotonicity", jmono);
  line("oracle", oracle);
}

struct Criterion {
  int id;
  const char* module;
  const char* title;
  double budget;
  void (*run)(const Context&, Verdict&);
};

inline const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> list = {
      {1, "balayage", "circle atoms", 1.0, circle_atoms},
      {2, "balayage", "sphere cap", 2.0, sphere_cap},
      {3, "balayage", "S3 cap", 2.0, s3_cap},
      {4, "balayage", "nonexistence diagnostic", 10.0, nonexistence},
      {5, "apps", "harmonic-ball volume law", 5.0, harmonic_balls},
      {6, "apps", "Laplacian growth", 10.0, growth},
      {7, "radial", "radial Dirichlet", 60.0, radial_dirichlet},
      {8, "radial", "radial Neumann", 10.0, radial_neumann},
      {9, "apps", "weighted equilibrium", 20.0, equilibrium},
      {10, "balayage", "property battery", 60.0, property_battery},
  };
  return list;
}

inline bool selected(const Criterion& c, const std::string& filter) {
  if (filter.empty() || filter == "all") return true;
  return filter == c.module || filter == std::to_string(c.id);
}

}  // namespace detail

inline std::vector<std::string> modules() { return {"balayage", "apps", "radial"}; }

// Runs the selected criteria in order, printing one line per criterion.
inline std::vector<Outcome> run(const Options& opt, std::ostream* out = nullptr) {
  detail::Context ctx{opt};
  std::vector<Outcome> results;
  for (const auto& c : detail::criteria()) {
    if (!detail::selected(c, opt.filter)) continue;
    Outcome o;
    o.id = c.id;
    o.module = c.module;
    o.title = c.title;
    o.budget = c.budget;
    detail::Verdict v;
    v.note.precision(6);
    const auto start = std::chrono::steady_clock::now();
    try {
      c.run(ctx, v);
    } catch (const std::exception& e) {
      v.pass = false;
      v.failures.push_back(std::string("error: ") + e.what());
      v.note << "[error: " << e.what() << "]";
    }
    o.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (o.seconds > o.budget) v.require(false, "runtime budget");
    o.pass = v.pass;
    o.detail = v.note.str();
    o.failures = v.failures;
    if (out) {
      std::ostringstream line;
      line.precision(3);
      line << (o.pass ? "PASS" : "FAIL") << "  " << o.id << " [" << o.module << "] " << o.title << " (" << std::fixed
           << o.seconds << " s, budget " << o.budget << " s): " << o.detail << "\n";
      *out << line.str() << std::flush;
    }
    results.push_back(std::move(o));
  }
  return results;
}

}  // namespace balayage::acceptance

#endif
