#include <catch_amalgamated.hpp>

#include <Eigen/Dense>

#include <cmath>
#include <numbers>
#include <random>

#include "balayage/greens.hpp"

using namespace balayage;
using Catch::Approx;
using std::numbers::pi;

namespace {

// Independent route: dense solve of the bordered system [K W; W^T 0].
Vector bordered_green(const DiscreteManifold& m, const ChargeDistribution& w) {
  const auto n = static_cast<Eigen::Index>(m.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(n + 1, n + 1);
  a.topLeftCorner(n, n) = Eigen::MatrixXd(m.stiffness());
  a.block(0, n, n, 1) = m.volume_weights();
  a.block(n, 0, 1, n) = m.volume_weights().transpose();
  Vector b = Vector::Zero(n + 1);
  b.head(n) = w.masses - (w.total() / m.total_volume()) * m.volume_weights();
  return a.fullPivLu().solve(b).head(n);
}

ChargeDistribution random_charge(const DiscreteManifold& m, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  ChargeDistribution c = ChargeDistribution::zero(m);
  for (auto& x : c.masses) x = g(rng);
  return c;
}

}  // namespace

TEST_CASE("Green potential of the volume form vanishes") {
  const auto m = build_sphere_latlong(16, 32);
  const auto g = green_potential(m, volume_form(m));
  CHECK(g.values.lpNorm<Eigen::Infinity>() < 1e-12);
}

TEST_CASE("Green potential agrees with a dense bordered solve") {
  std::mt19937_64 rng(42);
  const DiscreteManifold grids[] = {build_circle(30), build_sphere_latlong(6, 8), build_sphere_polar(40),
                                    build_radial_ball(2, 2.0, 30, Boundary::Neumann)};
  for (const auto& m : grids) {
    for (int trial = 0; trial < 5; ++trial) {
      const auto w = random_charge(m, rng);
      const auto g = green_potential(m, w);
      const Vector ref = bordered_green(m, w);
      CHECK((g.values - ref).lpNorm<Eigen::Infinity>() < 1e-8 * (1.0 + ref.lpNorm<Eigen::Infinity>()));
      const Vector r = m.stiffness() * g.values - (w.masses - normalized_mass(m, w) * m.volume_weights());
      CHECK(r.norm() <= 1e-10 * w.l1());
      CHECK(std::fabs(m.volume_weights().dot(g.values)) <= 1e-9 * w.l1() * m.total_volume());
    }
  }
}

TEST_CASE("Dirichlet Green potential solves K g = w") {
  const auto m = build_radial_ball(3, 2.0, 200, Boundary::Dirichlet);
  std::mt19937_64 rng(7);
  const auto w = random_charge(m, rng);
  const auto g = green_potential(m, w);
  CHECK((m.stiffness() * g.values - w.masses).norm() <= 1e-10 * w.l1());
  const Vector ref = Eigen::MatrixXd(m.stiffness()).ldlt().solve(w.masses);
  CHECK((g.values - ref).lpNorm<Eigen::Infinity>() < 1e-8 * ref.lpNorm<Eigen::Infinity>());
}

TEST_CASE("gauge invariance") {
  std::mt19937_64 rng(3);
  const auto m = build_sphere_latlong(12, 24);
  const auto w = random_charge(m, rng);
  const auto g1 = green_potential(m, w);
  const auto g2 = green_potential(m, w + volume_form(m, 3.7));
  CHECK((g1.values - g2.values).lpNorm<Eigen::Infinity>() < 1e-8 * g1.values.lpNorm<Eigen::Infinity>());
}

TEST_CASE("point charge at the pole of the polar sphere") {
  const std::size_t n = 1024;
  const auto m = build_sphere_polar(n);
  const double h = pi / n;
  const auto g = green_potential(m, atom(m, {0, 0}, 1.0));
  double err = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double th = m.coords()[i].a;
    if (th < 0.25) continue;
    const double exact = (1.0 / (4 * pi)) * (-std::log(std::sin(th / 2) * std::sin(th / 2)) - 1.0);
    err = std::max(err, std::fabs(g.values[static_cast<Eigen::Index>(i)] - exact));
  }
  INFO("sup error " << err);
  CHECK(err < h * std::fabs(std::log(h)));
}

TEST_CASE("point charge at the pole of the S3 profile") {
  const std::size_t n = 1024;
  const auto m = build_sn_polar(3, n);
  const double h = pi / n;
  const auto g = green_potential(m, atom(m, {0, 0}, 1.0));
  double err = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = m.coords()[i].a;
    if (x < 0.25 || x > pi - 0.05) continue;
    const double exact = -(1.0 / (4 * pi * pi)) * ((x - pi) / std::tan(x) + 0.5);
    err = std::max(err, std::fabs(g.values[static_cast<Eigen::Index>(i)] - exact));
  }
  INFO("sup error " << err);
  CHECK(err < h * std::fabs(std::log(h)));
}

TEST_CASE("sphere kernel values and symmetry") {
  const auto zero = ChartPoint{{0.0, 0.0}, false};
  const auto one = ChartPoint{{1.0, 0.0}, false};
  const auto inf = ChartPoint::at_infinity();
  CHECK(green_kernel_sphere(zero, inf) == Approx(-1.0 / (4 * pi)).epsilon(1e-15));
  CHECK(green_kernel_sphere(zero, one) == Approx(-(1.0 / (4 * pi)) * (std::log(0.5) + 1.0)).epsilon(1e-15));
  std::mt19937_64 rng(42);
  std::normal_distribution<double> g;
  for (int i = 0; i < 200; ++i) {
    const ChartPoint a{{g(rng), g(rng)}, false};
    const ChartPoint b{{g(rng), g(rng)}, false};
    CHECK(green_kernel_sphere(a, b) == green_kernel_sphere(b, a));
    CHECK(green_kernel_sphere(a, inf) == green_kernel_sphere(inf, a));
  }
  // Large |b| approaches the value at infinity.
  CHECK(green_kernel_sphere(one, {{1e8, 0.0}, false}) == Approx(green_kernel_sphere(one, inf)).margin(1e-12));
  CHECK_THROWS_AS(green_kernel_sphere(one, one), InvalidInput);
  CHECK_THROWS_AS(green_kernel_sphere(inf, inf), InvalidInput);
  CHECK(to_chart(0.0, 1.0).infinity);
  CHECK(std::abs(to_chart(pi, 0.0).z) < 1e-15);
}

TEST_CASE("discrete Green potential matches the sphere kernel away from the source") {
  const int nt = 64;
  const auto m = build_sphere_latlong(nt, 2 * nt);
  const double h = pi / nt;
  const Coord a{pi / 2, pi};
  const std::size_t ia = nearest_node(m, a);
  const auto g = green_potential(m, atom_at_node(m, ia, 1.0));
  const auto ca = to_chart(m.coords()[ia].a, m.coords()[ia].b);
  double err = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (distance(m, m.coords()[i], m.coords()[ia]) < 5 * h) continue;
    const auto cb = to_chart(m.coords()[i].a, m.coords()[i].b);
    err = std::max(err, std::fabs(g.values[static_cast<Eigen::Index>(i)] - green_kernel_sphere(ca, cb)));
  }
  INFO("sup error " << err);
  CHECK(err < h * std::fabs(std::log(h)));

  const auto gn = green_potential(m, atom_at_node(m, 0, 1.0));
  double errn = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.coords()[i].a < 5 * h) continue;
    const auto cb = to_chart(m.coords()[i].a, m.coords()[i].b);
    errn = std::max(errn, std::fabs(gn.values[static_cast<Eigen::Index>(i)] - green_kernel_sphere(ChartPoint::at_infinity(), cb)));
  }
  INFO("sup error at the pole " << errn);
  CHECK(errn < h * std::fabs(std::log(h)));
}

TEST_CASE("mutual energy") {
  std::mt19937_64 rng(11);
  const auto m = build_sphere_latlong(10, 16);
  const auto w1 = random_charge(m, rng);
  const auto w2 = random_charge(m, rng);
  CHECK(std::fabs(mutual_energy(m, volume_form(m), w1)) < 1e-12);
  const double e12 = mutual_energy(m, w1, w2), e21 = mutual_energy(m, w2, w1);
  CHECK(std::fabs(e12 - e21) <= 1e-9 * std::fabs(e12));
  CHECK(mutual_energy(m, w1, w1) > 0.0);
  CHECK(std::fabs(mutual_energy(m, volume_form(m, 2.0), volume_form(m, 2.0))) < 1e-12);
  const double alt = green_potential(m, w1).values.dot(w2.masses - normalized_mass(m, w2) * m.volume_weights());
  CHECK(e12 == Approx(alt).epsilon(1e-9));
  const auto d = build_radial_ball(3, 2.0, 100, Boundary::Dirichlet);
  const auto wd = random_charge(d, rng);
  CHECK(mutual_energy(d, wd, wd) > 0.0);
}
