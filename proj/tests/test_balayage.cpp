#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "balayage/balayage.hpp"

using namespace balayage;
using Catch::Approx;
using std::numbers::pi;

namespace {

struct Pair {
  ChargeDistribution sigma;
  ChargeDistribution lambda;
};

// Random (sigma, lambda) with sum(sigma) < sum(lambda): a few atoms plus a
// smooth density for sigma, a nonnegative density for lambda.
Pair random_pair(const DiscreteManifold& m, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> node(0, m.size() - 1);
  ChargeDistribution s = ChargeDistribution::zero(m);
  for (int k = 0; k < 3; ++k) s.masses[static_cast<Eigen::Index>(node(rng))] += 2.0 * g(rng);
  const double a = g(rng), b = g(rng);
  s += from_density(m, [&](const Coord& c) { return a * std::cos(3 * c.a + c.b) + b * std::sin(c.a); });
  const double c0 = u(rng);
  ChargeDistribution l = from_density(m, [&](const Coord& c) { return c0 * (1.0 + std::cos(c.a) * std::cos(c.a)); });
  const double excess = s.total() - l.total();
  if (excess > -0.1) s -= volume_form(m, (excess + 0.1 + u(rng)) / m.total_volume());
  return {s, l};
}

double linf(const Vector& v) { return v.lpNorm<Eigen::Infinity>(); }

}  // namespace

TEST_CASE("circle with two atoms") {
  const std::size_t n = 2000;
  const auto m = build_circle(n);
  const double h = 1.0 / n, a = 0.25, b = 0.75;
  const auto sigma = atom(m, {a, 0}, 1.0) - atom(m, {b, 0}, 2.0);
  const auto r = bal_zero(m, sigma);
  REQUIRE(r.converged());
  const auto target = -atom(m, {b, 0}, 1.0);
  CHECK((r.nu.masses - target.masses).lpNorm<1>() <= 1e-6);
  double err = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = m.coords()[i].a;
    const double exact = -0.5 * std::fabs(x - a) + 0.5 * std::fabs(x - b) + (b - a) * x + (b - a) * (0.5 - b);
    err = std::max(err, std::fabs(r.u.values[static_cast<Eigen::Index>(i)] - exact));
  }
  CHECK(err <= 5 * h);
  CHECK(r.u.values[0] == Approx(0.125).margin(5 * h));
  CHECK(r.u.values[500] == Approx(0.25).margin(5 * h));
  CHECK(r.u.values[1500] == Approx(0.0).margin(5 * h));
  CHECK(r.t == Approx(1.0));
  CHECK(check_bounds(r).pass);
  const auto st = check_structure(m, r);
  CHECK_FALSE(st.pass);
  CHECK(st.worst_node == 1500);
  CHECK(st.worst_value == Approx(1.0).margin(1e-9));
  REQUIRE(st.violation_nodes.size() == 1);
  CHECK(st.violation_nodes[0] == 1500);
  CHECK(r.mu.masses[1500] == Approx(1.0).margin(1e-9));
}

TEST_CASE("sphere cap with a pole atom") {
  const std::size_t n = 1024;
  const auto m = build_sphere_polar(n);
  const double h = pi / n, alpha = 1.0 / (2 * pi);
  const auto sigma = atom(m, {0, 0}, 1.0) - volume_form(m, alpha);
  const auto r = bal_zero(m, sigma);
  REQUIRE(r.converged());
  const Vector f = saturation_fraction(r);
  const double theta0 = f.sum() * h;
  CHECK(theta0 == Approx(pi / 2).margin(2 * h));
  CHECK(check_structure(m, r).pass);
  CHECK(check_bounds(r).pass);
  CHECK(connected_components(m, r.omega_mask) == 1);
  CHECK(r.omega_mask[0]);
}

TEST_CASE("trivial and sub-ceiling cases") {
  const auto m = build_sphere_latlong(8, 12);
  const auto z = bal_zero(m, ChargeDistribution::zero(m));
  CHECK(z.nu.l1() == 0.0);
  CHECK(z.u.values.lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(std::all_of(z.omega_mask.begin(), z.omega_mask.end(), [](bool x) { return x; }));
  const auto lam = volume_form(m);
  const auto sig = from_density(m, [](const Coord& c) { return 0.5 * std::cos(c.a) - 0.2; });
  const auto r = bal(m, sig, lam);
  CHECK(linf(r.nu.masses - sig.masses) < 1e-12);
  CHECK(linf(r.u.values) == 0.0);
  const auto neg = bal_zero(m, -volume_form(m, 0.3) - atom(m, {0, 0}, 1.0));
  CHECK(check_structure(m, neg).pass);
  CHECK(check_bounds(neg).pass);
}

TEST_CASE("balayage of a pole atom under the volume ceiling") {
  const std::size_t n = 1024;
  const auto m = build_sphere_polar(n);
  const double h = pi / n, t = 2 * pi * (1 - std::cos(pi / 3));
  const auto r = bal(m, atom(m, {0, 0}, t), volume_form(m));
  REQUIRE(r.converged());
  CHECK(connected_components(m, r.omega_mask) == 1);
  CHECK(r.omega_mask[0]);
  const Mask grown = dilate(m, r.omega_mask);
  double on_omega = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    if (grown[i]) on_omega += r.nu.masses[static_cast<Eigen::Index>(i)];
  CHECK(std::fabs(on_omega - t) <= 1e-3 * t);
  CHECK(saturation_fraction(r).sum() * h == Approx(pi / 3).margin(2 * h));
}

TEST_CASE("infeasible ceiling is a hard error") {
  const auto m = build_circle(10);
  CHECK_THROWS_AS(bal(m, volume_form(m, 2.0), volume_form(m, 1.0)), Infeasible);
  const auto d = build_radial_ball(2, 2.0, 20, Boundary::Dirichlet);
  CHECK_NOTHROW(bal_zero(d, volume_form(d, 1.0)));
}

TEST_CASE("balayage invariants on random charges") {
  std::mt19937_64 rng(42);
  const DiscreteManifold grids[] = {build_circle(64), build_sphere_latlong(10, 16), build_sphere_polar(64)};
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> unif(0.0, 1.0);
  for (const auto& m : grids) {
    for (int trial = 0; trial < 100; ++trial) {
      const auto [s, l] = random_pair(m, rng);
      const auto r = bal(m, s, l);
      REQUIRE(r.converged());
      const double scale = r.scale();
      CHECK(std::fabs(r.nu.total() - s.total()) <= 1e-8 * s.l1());
      CHECK(check_bounds(r).pass);
      CHECK(check_v_system(m, r).pass);
      CHECK(subset_up_to_collar(m, noncoincidence_mask(r), r.omega_mask));
      CHECK(r.mu.masses.minCoeff() >= -1e-8 * scale);
      for (Eigen::Index i = 0; i < r.u.values.size(); ++i)
        if (r.mu.masses[i] > 1e-8 * scale) CHECK(r.u.values[i] <= 1e-8 * scale);

      ChargeDistribution tau = ChargeDistribution::zero(m);
      for (auto& x : tau.masses) x = g(rng);
      const auto rc = bal(m, s + tau, l + tau);
      CHECK(linf(rc.nu.masses - (r.nu.masses + tau.masses)) <= 1e-8 * scale);

      ChargeDistribution bump = ChargeDistribution::zero(m);
      for (auto& x : bump.masses) x = 0.05 * unif(rng);
      const auto up = bal(m, s + bump, l + volume_form(m, bump.total() / m.total_volume()));
      const auto r_hi = bal(m, s + bump, up.lambda);
      const auto r_lo = bal(m, s, up.lambda);
      CHECK((r_lo.nu.masses - r_hi.nu.masses).maxCoeff() <= 1e-8 * r_hi.scale());

      // J increases along admissible upward perturbations of v.
      const Potential gm = green_potential(m, r.mu);
      const double eps = unif(rng);
      Vector v2 = r.v.values - eps * gm.values;
      v2.array() += eps * gm.values.maxCoeff();
      const double j1 = j_functional(m, r.v.values, r.t);
      const double j2 = j_functional(m, v2, r.t);
      CHECK(j1 <= j2 + 1e-8 * std::max(1.0, std::fabs(j1)));
    }
  }
}

TEST_CASE("incremental balayage") {
  const auto m = build_sphere_polar(256);
  const auto vol = volume_form(m);
  const auto d0 = from_density(m, [](const Coord& c) { return c.a > 2.5 ? 1.0 : 0.0; });
  const double t1 = 1.0, t2 = 2.5;
  const auto s1 = atom(m, {0, 0}, t1) + d0;
  const auto s2 = atom(m, {0, 0}, t2 - t1);
  const auto [lhs, rhs] = bal_incremental(m, s1, s2, vol, vol);
  CHECK(linf(lhs.nu.masses - rhs.nu.masses) <= 1e-6);
  const auto [a, b] = bal_incremental(m, s1, ChargeDistribution::zero(m), vol, vol);
  CHECK(linf(a.nu.masses - b.nu.masses) <= 1e-10);
  CHECK_THROWS_AS(bal_incremental(m, s1, -s2, vol, vol), InvalidInput);
}

TEST_CASE("incremental balayage against the brute-force oracle") {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 4 + static_cast<std::size_t>(trial % 9);
    const auto m = build_circle(n);
    ChargeDistribution s1 = ChargeDistribution::zero(m), s2 = s1, l1 = s1, l2 = s1;
    for (Eigen::Index i = 0; i < static_cast<Eigen::Index>(n); ++i) {
      s1.masses[i] = g(rng);
      s2.masses[i] = 0.3 * u(rng);
      l2.masses[i] = u(rng);
      l1.masses[i] = l2.masses[i] + s2.masses[i] * u(rng);
    }
    s1 -= volume_form(m, (s1.total() + s2.total() - l1.total() + 0.5) / m.total_volume());
    const auto [lhs, rhs] = bal_incremental(m, s1, s2, l1, l2);
    // Oracle: exhaustive active sets for each balayage in the chain.
    auto brute_nu = [&](const ChargeDistribution& s, const ChargeDistribution& l) {
      const Vector rhs_v = s.masses - l.masses;
      const auto sol = solve_brute(make_lcp(m.stiffness(), rhs_v, true));
      return Vector(rhs_v - m.stiffness() * sol.u + l.masses);
    };
    const Vector inner = brute_nu(s1, l2);
    const Vector lhs_o = brute_nu({inner + s2.masses, m.id()}, l1);
    const Vector rhs_o = brute_nu(s1 + s2, l1);
    CHECK(linf(lhs.nu.masses - lhs_o) <= 1e-8);
    CHECK(linf(rhs.nu.masses - rhs_o) <= 1e-8);
    CHECK(linf(lhs_o - rhs_o) <= 1e-8);
  }
}

TEST_CASE("existence diagnostic") {
  const std::vector<std::size_t> levels{128, 256, 512, 1024};
  auto sphere = [](double alpha) {
    return [alpha](std::size_t n) {
      auto m = build_sphere_polar(n);
      auto s = atom(m, {0, 0}, 1.0) - atom(m, {pi, 0}, 2.0) - volume_form(m, alpha);
      return DiagnosticLevel{m, s, {{0.0, 0.0}}, {n - 1}};
    };
  };
  const auto div = existence_diagnostic(sphere(0.0), levels);
  CHECK(div.diverging);
  CHECK(div.r2 > 0.98);
  CHECK(div.slope == Approx(1.0 / (2 * pi)).epsilon(0.1));

  const auto conv = existence_diagnostic(sphere(1.0 / (2 * pi)), levels);
  CHECK_FALSE(conv.diverging);
  for (double r : conv.sink_residual) CHECK(r <= 1e-6);

  auto circle = [](std::size_t n) {
    auto m = build_circle(n);
    auto s = atom(m, {0.25, 0}, 1.0) - atom(m, {0.75, 0}, 2.0);
    return DiagnosticLevel{m, s, {{0.25, 0}}, {nearest_node(m, {0.75, 0})}};
  };
  const auto c = existence_diagnostic(circle, levels);
  CHECK_FALSE(c.diverging);
  CHECK_THROWS_AS(existence_diagnostic(circle, {8, 16}), InvalidInput);
}

TEST_CASE("line fit") {
  const auto f = fit_line({1, 2, 3, 4}, {3, 5, 7, 9});
  CHECK(f.slope == Approx(2.0));
  CHECK(f.intercept == Approx(1.0));
  CHECK(f.r2 == Approx(1.0));
}
