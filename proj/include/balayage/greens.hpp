#ifndef BALAYAGE_GREENS_HPP
#define BALAYAGE_GREENS_HPP

#include <Eigen/SparseCholesky>

#include <cmath>
#include <complex>
#include <numbers>

#include "balayage/charge.hpp"

namespace balayage {

struct Potential {
  Vector values;
  ManifoldId manifold{};

  std::size_t size() const { return static_cast<std::size_t>(values.size()); }
};

struct CgParams {
  double tolerance = 1e-10;  // relative to ||rhs charge||_1
  std::size_t max_iterations = 0;  // 0 means 20 N
};

namespace detail {

// Jacobi-preconditioned CG for K x = b. With project set, K has the constant
// vector as kernel and b is assumed to sum to zero; residuals are kept
// orthogonal to constants.
inline Vector pcg(const SparseMatrix& k, const Vector& b, bool project, double abs_tol, std::size_t max_it) {
  const Eigen::Index n = b.size();
  Vector x = Vector::Zero(n);
  Vector r = b;
  if (project) r.array() -= r.mean();
  if (r.norm() <= abs_tol) return x;
  Vector inv_diag(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double d = k.coeff(i, i);
    inv_diag[i] = d > 0.0 ? 1.0 / d : 1.0;
  }
  Vector z = inv_diag.cwiseProduct(r);
  Vector p = z;
  double rz = r.dot(z);
  Vector kp(n);
  for (std::size_t it = 0; it < max_it; ++it) {
    kp.noalias() = k * p;
    const double pkp = p.dot(kp);
    if (!(pkp > 0.0)) break;
    const double alpha = rz / pkp;
    x += alpha * p;
    r -= alpha * kp;
    if (project) r.array() -= r.mean();
    if (r.norm() <= abs_tol) {
      Vector true_r = b - k * x;
      if (project) true_r.array() -= true_r.mean();
      if (true_r.norm() <= abs_tol) return x;
      r = true_r;
    }
    z = inv_diag.cwiseProduct(r);
    const double rz_new = r.dot(z);
    p = z + (rz_new / rz) * p;
    rz = rz_new;
  }
  Vector true_r = b - k * x;
  if (project) true_r.array() -= true_r.mean();
  if (true_r.norm() <= abs_tol) return x;
  throw SolverError("conjugate gradients did not converge; the grid may be ill-conditioned");
}

// Sparse LDLT for the one-dimensional systems, where Jacobi CG needs
// O(N) iterations. With pin_first the first unknown is held at 0, which
// removes the constant kernel when b sums to zero.
inline Vector direct_solve(const SparseMatrix& k, const Vector& b, bool pin_first) {
  const Eigen::Index n = b.size();
  const Eigen::Index off = pin_first ? 1 : 0;
  const Eigen::SparseMatrix<double> sub = Eigen::SparseMatrix<double>(k).bottomRightCorner(n - off, n - off);
  Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(sub);
  if (ldlt.info() != Eigen::Success) throw SolverError("direct solve: factorization failed");
  Vector x = Vector::Zero(n);
  x.tail(n - off) = ldlt.solve(b.tail(n - off));
  if (ldlt.info() != Eigen::Success || !x.allFinite()) throw SolverError("direct solve failed");
  return x;
}

}  // namespace detail

// Closed/Neumann: K g = w - m(w) W with sum W g = 0. Dirichlet: K g = w.
inline Potential green_potential(const DiscreteManifold& m, const ChargeDistribution& w, const CgParams& p = {}) {
  detail::require_same(m.id(), w.manifold);
  const std::size_t max_it = p.max_iterations ? p.max_iterations : 20 * m.size();
  const double tol = p.tolerance * w.l1();
  Potential g{Vector::Zero(w.masses.size()), m.id()};
  if (w.l1() == 0.0) return g;
  const bool one_d = m.kind() == Kind::SymmetricProfile || m.kind() == Kind::Circle;
  if (!m.singular()) {
    g.values = one_d ? detail::direct_solve(m.stiffness(), w.masses, false)
                       : detail::pcg(m.stiffness(), w.masses, false, tol, max_it);
    return g;
  }
  const Vector& W = m.volume_weights();
  const Vector rhs = w.masses - normalized_mass(m, w) * W;
  g.values = one_d ? detail::direct_solve(m.stiffness(), rhs, true) : detail::pcg(m.stiffness(), rhs, true, tol, max_it);
  g.values.array() -= W.dot(g.values) / m.total_volume();
  return g;
}

inline double mutual_energy(const DiscreteManifold& m, const ChargeDistribution& w1, const ChargeDistribution& w2,
                            const CgParams& p = {}) {
  const Potential g1 = green_potential(m, w1, p);
  const Potential g2 = green_potential(m, w2, p);
  return g1.values.dot(m.stiffness() * g2.values);
}

// Point of the Riemann sphere in the stereographic chart.
struct ChartPoint {
  std::complex<double> z{};
  bool infinity = false;

  static ChartPoint at_infinity() { return {{}, true}; }
  bool operator==(const ChartPoint&) const = default;
};

// theta = 0 maps to infinity: z = cot(theta/2) e^{i phi}.
inline ChartPoint to_chart(double theta, double phi) {
  if (theta <= 0.0) return ChartPoint::at_infinity();
  return {std::polar(1.0 / std::tan(0.5 * theta), phi), false};
}

// -(1/4pi)(log(|a-b|^2/((1+|a|^2)(1+|b|^2))) + 1)
inline double green_kernel_sphere(const ChartPoint& a, const ChartPoint& b) {
  const double c = -1.0 / (4.0 * std::numbers::pi);
  if (a.infinity && b.infinity) throw InvalidInput("kernel is singular at a = b");
  if (a.infinity || b.infinity) {
    const std::complex<double> z = a.infinity ? b.z : a.z;
    return c * (1.0 - std::log1p(std::norm(z)));
  }
  const double d2 = std::norm(a.z - b.z);
  if (d2 == 0.0) throw InvalidInput("kernel is singular at a = b");
  const double lifts = std::log1p(std::norm(a.z)) + std::log1p(std::norm(b.z));
  return c * (std::log(d2) - lifts + 1.0);
}

}  // namespace balayage

#endif
