#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "balayage/obstacle.hpp"

using namespace balayage;
using Catch::Approx;

namespace {

// Weighted Laplacian of a random connected graph (an M-matrix).
SparseMatrix random_laplacian(std::size_t n, std::mt19937_64& rng, double ground = 0.0) {
  std::uniform_real_distribution<double> c(0.2, 3.0);
  std::uniform_int_distribution<std::size_t> pick(0, n - 1);
  std::vector<Eigen::Triplet<double>> t;
  auto edge = [&](std::size_t i, std::size_t j, double w) {
    const auto a = static_cast<Eigen::Index>(i), b = static_cast<Eigen::Index>(j);
    t.emplace_back(a, a, w);
    t.emplace_back(b, b, w);
    t.emplace_back(a, b, -w);
    t.emplace_back(b, a, -w);
  };
  for (std::size_t i = 1; i < n; ++i) edge(pick(rng) % i, i, c(rng));
  for (std::size_t e = 0; e < n; ++e) {
    const std::size_t i = pick(rng), j = pick(rng);
    if (i != j) edge(i, j, c(rng));
  }
  if (ground > 0.0) t.emplace_back(0, 0, ground);
  SparseMatrix k(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  k.setFromTriplets(t.begin(), t.end());
  return k;
}

Vector random_rhs(std::size_t n, std::mt19937_64& rng, bool negative_total) {
  std::normal_distribution<double> g;
  Vector s(static_cast<Eigen::Index>(n));
  for (auto& x : s) x = g(rng);
  if (negative_total && s.sum() >= 0.0) s.array() -= (s.sum() + 0.5) / static_cast<double>(n);
  return s;
}

double rel_diff(const Vector& a, const Vector& b) {
  return (a - b).lpNorm<Eigen::Infinity>() / (1.0 + b.lpNorm<Eigen::Infinity>());
}

}  // namespace

TEST_CASE("zero charge gives zero potential") {
  const auto m = build_circle(10);
  const auto p = make_lcp(m.stiffness(), Vector::Zero(10), true);
  const auto s = solve_pgs(p);
  CHECK(s.converged);
  CHECK(s.u.lpNorm<Eigen::Infinity>() == 0.0);
  CHECK(s.residual_feasibility == 0.0);
  CHECK(s.residual_complementarity == 0.0);
  const auto b = solve_brute(p);
  CHECK(b.u.lpNorm<Eigen::Infinity>() == 0.0);
}

TEST_CASE("zero total mass on a closed manifold") {
  const auto m = build_circle(50);
  Vector s = Vector::Zero(50);
  s[5] = 1.0;
  s[30] = -1.0;
  const auto sol = solve_pgs(make_lcp(m.stiffness(), s, true));
  CHECK(sol.converged);
  CHECK(sol.method == "zero-mass");
  const Vector nu = s - m.stiffness() * sol.u;
  CHECK(nu.lpNorm<Eigen::Infinity>() < 1e-10);
  CHECK(sol.u.minCoeff() == 0.0);
}

TEST_CASE("positive total mass on a closed manifold is infeasible") {
  const auto m = build_circle(20);
  Vector s = Vector::Zero(20);
  s[3] = 1.0;
  CHECK_THROWS_AS(solve_pgs(make_lcp(m.stiffness(), s, true)), Infeasible);
  try {
    solve_pgs(make_lcp(m.stiffness(), s, true));
  } catch (const Infeasible& e) {
    CHECK(std::string(e.what()).find("sum(sigma) <= sum(lambda)") != std::string::npos);
  }
}

TEST_CASE("degenerate one-node closed manifold") {
  SparseMatrix k(1, 1);
  Vector s(1);
  s[0] = -0.5;
  const auto p = make_lcp(k, s, true);
  const auto b = solve_brute(p);
  CHECK(b.u[0] == 0.0);
  const auto g = solve_pgs(p);
  CHECK(g.u[0] == 0.0);
  CHECK((s - k * g.u)[0] == -0.5);
}

TEST_CASE("PGS agrees with the brute-force oracle on small random instances") {
  std::mt19937_64 rng(42);
  std::uniform_int_distribution<std::size_t> dim(2, 12);
  int checked = 0;
  for (int trial = 0; trial < 150; ++trial) {
    const std::size_t n = dim(rng);
    const bool grounded = trial % 3 == 0;
    const SparseMatrix k = random_laplacian(n, rng, grounded ? 1.5 : 0.0);
    const Vector s = random_rhs(n, rng, true);
    LcpParams pure;
    pure.polish = false;
    pure.tolerance = 1e-14;
    pure.max_sweeps = 200000;
    const auto p_pure = make_lcp(k, s, !grounded, pure);
    const auto p_def = make_lcp(k, s, !grounded);
    const auto brute = solve_brute(p_pure);
    const auto a = solve_pgs(p_pure);
    const auto b = solve_pgs(p_def);
    INFO("trial " << trial << " n " << n);
    CHECK(a.converged);
    CHECK(b.converged);
    CHECK(rel_diff(a.u, brute.u) <= 1e-8);
    CHECK(rel_diff(b.u, brute.u) <= 1e-8);
    ++checked;
  }
  CHECK(checked == 150);
}

TEST_CASE("circle instances against the oracle") {
  std::mt19937_64 rng(5);
  for (std::size_t n = 3; n <= 12; ++n) {
    const auto m = build_circle(n);
    for (int trial = 0; trial < 10; ++trial) {
      const Vector s = random_rhs(n, rng, true);
      const auto p = make_lcp(m.stiffness(), s, true);
      CHECK(rel_diff(solve_pgs(p).u, solve_brute(p).u) <= 1e-8);
    }
  }
}

TEST_CASE("complementarity, gauge and minimality at convergence") {
  std::mt19937_64 rng(9);
  const auto m = build_sphere_latlong(12, 16);
  const std::size_t n = m.size();
  for (int trial = 0; trial < 20; ++trial) {
    const Vector s = random_rhs(n, rng, true);
    const auto p = make_lcp(m.stiffness(), s, true);
    const auto sol = solve_pgs(p);
    REQUIRE(sol.converged);
    const Vector w = m.stiffness() * sol.u - s;
    const double tol = 1e-10 * s.lpNorm<1>();
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      CHECK(sol.u[i] >= 0.0);
      CHECK(w[i] >= -tol);
      CHECK(std::fabs(std::min(sol.u[i] * m.stiffness().coeff(i, i), w[i])) <= tol);
    }
    CHECK(sol.u.minCoeff() == 0.0);
    const double f0 = objective(p, sol.u);
    for (std::size_t i = 0; i < n; i += 7) {
      Vector up = sol.u;
      up[static_cast<Eigen::Index>(i)] += 1e-3;
      CHECK(f0 <= objective(p, up) + 1e-12);
    }
  }
  CHECK(objective(make_lcp(m.stiffness(), Vector::Ones(static_cast<Eigen::Index>(n)), true),
                  Vector::Zero(static_cast<Eigen::Index>(n))) == 0.0);
}

TEST_CASE("objective is non-increasing across sweeps") {
  std::mt19937_64 rng(13);
  const auto m = build_circle(40);
  const Vector s = random_rhs(40, rng, true);
  LcpParams prm;
  prm.polish = false;
  std::vector<double> values;
  auto p = make_lcp(m.stiffness(), s, true, prm);
  p.params.on_sweep = [&](std::size_t, const Vector& u) { values.push_back(objective(p, u)); };
  const auto sol = solve_pgs(p);
  CHECK(sol.converged);
  REQUIRE(values.size() > 2);
  for (std::size_t i = 1; i < values.size(); ++i) CHECK(values[i] <= values[i - 1] + 1e-12 * std::fabs(values[i - 1]));
}

TEST_CASE("sweep cap flags non-convergence and keeps the iterate") {
  const auto m = build_circle(200);
  Vector s = Vector::Constant(200, -0.01);
  s[10] = 1.0;
  LcpParams prm;
  prm.polish = false;
  prm.max_sweeps = 3;
  const auto sol = solve_pgs(make_lcp(m.stiffness(), s, true, prm));
  CHECK_FALSE(sol.converged);
  CHECK(sol.sweeps_used == 3);
  CHECK(sol.u.maxCoeff() > 0.0);
}

TEST_CASE("solver determinism and parameter validation") {
  std::mt19937_64 rng(21);
  const auto m = build_sphere_latlong(8, 8);
  const Vector s = random_rhs(m.size(), rng, true);
  const auto a = solve_pgs(make_lcp(m.stiffness(), s, true));
  const auto b = solve_pgs(make_lcp(m.stiffness(), s, true));
  CHECK(a.u == b.u);
  LcpParams bad;
  bad.relaxation = 2.0;
  CHECK_THROWS_AS(solve_pgs(make_lcp(m.stiffness(), s, true, bad)), InvalidInput);
  CHECK_THROWS_AS(solve_brute(make_lcp(build_circle(17).stiffness(), Vector::Zero(17), true)), InvalidInput);
}

TEST_CASE("Dirichlet problems accept positive mass") {
  const auto m = build_radial_ball(3, 2.0, 10, Boundary::Dirichlet);
  Vector s = Vector::Constant(10, 0.1);
  const auto p = make_lcp(m.stiffness(), s, false);
  const auto a = solve_pgs(p);
  CHECK(a.converged);
  CHECK(rel_diff(a.u, solve_brute(p).u) <= 1e-8);
}
