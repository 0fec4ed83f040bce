#include <catch_amalgamated.hpp>

#include <cmath>
#include <numbers>
#include <random>

#include "balayage/charge.hpp"

using namespace balayage;
using Catch::Approx;
using std::numbers::pi;

TEST_CASE("atoms snap to the nearest node") {
  const auto m = build_circle(4);
  const auto a = atom(m, {0.26, 0}, 1.0);
  CHECK(a.masses[1] == 1.0);
  CHECK(a.total() == 1.0);
  CHECK(a.l1() == 1.0);
  CHECK(atom(m, {0.5, 0}, 0.0).l1() == 0.0);
  CHECK_THROWS_AS(atom(m, {-0.1, 0}, 1.0), InvalidInput);

  const auto s = build_sphere_latlong(16, 16);
  const auto n = atom(s, {0.0, 0.0}, 0.7);
  CHECK(n.masses[0] == 0.7);
  const auto p = build_sphere_polar(64);
  CHECK(atom(p, {0.0, 0}, 2.5).masses[0] == 2.5);
}

TEST_CASE("densities become masses") {
  const auto s = build_sphere_latlong(64, 64);
  const auto vol = from_density(s, [](const Coord&) { return 1.0; });
  CHECK((vol.masses - s.volume_weights()).lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(vol.total() == Approx(s.total_volume()).epsilon(1e-14));
  const double alpha = 0.3;
  const auto c = from_density(s, [&](const Coord&) { return -alpha; });
  CHECK(c.total() == Approx(-4 * pi * alpha).epsilon(1e-3));
  CHECK(from_density(s, [](const Coord&) { return 0.0; }).l1() == 0.0);
}

TEST_CASE("normalized mass") {
  const auto s = build_sphere_latlong(32, 32);
  CHECK(normalized_mass(s, volume_form(s)) == Approx(1.0).epsilon(1e-14));
  const auto sig = atom(s, {0, 0}, 1.0) - atom(s, {pi, 0}, 2.0);
  CHECK(normalized_mass(s, sig) == Approx(-1.0 / (4 * pi)).epsilon(1e-12));
  CHECK(normalized_mass(s, ChargeDistribution::zero(s)) == 0.0);
}

TEST_CASE("Jordan decomposition") {
  const auto m = build_circle(3);
  ChargeDistribution c{Vector{{1.0, -2.0, 0.0}}, m.id()};
  const auto [plus, minus] = jordan(c);
  CHECK(plus.masses == Vector({{1.0, 0.0, 0.0}}));
  CHECK(minus.masses == Vector({{0.0, 2.0, 0.0}}));
  const auto c2 = build_circle(8);
  const auto s = atom(c2, {0.25, 0}, 1.0) - atom(c2, {0.75, 0}, 2.0);
  const auto [p2, m2] = jordan(s);
  CHECK(p2.masses == atom(c2, {0.25, 0}, 1.0).masses);
  CHECK(m2.masses == atom(c2, {0.75, 0}, 2.0).masses);
  const auto [p3, m3] = jordan(volume_form(c2));
  CHECK(m3.l1() == 0.0);
}

TEST_CASE("charge properties over random data") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  const auto m = build_sphere_latlong(8, 12);
  for (int trial = 0; trial < 100; ++trial) {
    const double a = u(rng), b = u(rng), c = u(rng);
    auto f = [&](const Coord& x) { return a * std::cos(x.a) + b; };
    auto g = [&](const Coord& x) { return c * std::sin(x.b); };
    const auto lhs = from_density(m, [&](const Coord& x) { return f(x) + g(x); });
    const auto rhs = from_density(m, f) + from_density(m, g);
    CHECK((lhs.masses - rhs.masses).lpNorm<Eigen::Infinity>() <= 1e-15 * (std::fabs(a) + std::fabs(b) + std::fabs(c)) * 4);
    ChargeDistribution r = ChargeDistribution::zero(m);
    for (auto& x : r.masses) x = u(rng);
    const auto [p, q] = jordan(r);
    CHECK((p - q).masses == r.masses);
    CHECK(p.masses.cwiseMin(q.masses).lpNorm<Eigen::Infinity>() == 0.0);
    const double w = u(rng);
    CHECK(atom(m, {std::fabs(a), std::fabs(b)}, w).total() == w);
  }
}

TEST_CASE("mixing manifolds is rejected") {
  const auto a = build_circle(4);
  const auto b = build_circle(4);
  CHECK_THROWS_AS(volume_form(a) + volume_form(b), InvalidInput);
  CHECK_THROWS_AS(normalized_mass(a, volume_form(b)), InvalidInput);
}
