#ifndef BALAYAGE_OBSTACLE_HPP
#define BALAYAGE_OBSTACLE_HPP

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "balayage/greens.hpp"

namespace balayage {

struct LcpParams {
  double relaxation = 1.5;
  double tolerance = 1e-10;     // on the residuals scaled by ||sigma||_1
  std::size_t max_sweeps = 0;   // 0 means 200 N
  bool polish = true;           // active-set solve after PGS warm-up
  std::size_t warmup_sweeps = 64;
  std::size_t check_every = 8;
  std::size_t max_active_set_iterations = 0;  // 0 means N + 16
  double mass_tolerance = 1e-10;  // relative; |sum sigma| below this counts as zero
  // Called after every PGS sweep with the current iterate.
  std::function<void(std::size_t, const Vector&)> on_sweep;
};

// u >= 0, K u - sigma >= 0, u.(K u - sigma) = 0.
struct LcpProblem {
  std::shared_ptr<const SparseMatrix> matrix;
  Vector rhs;
  bool singular = false;  // constants span the kernel of the matrix
  LcpParams params{};
};

struct LcpSolution {
  Vector u;
  double residual_feasibility = 0.0;
  double residual_complementarity = 0.0;
  std::size_t sweeps_used = 0;
  std::size_t active_set_iterations = 0;
  bool converged = false;
  std::string method;
};

inline LcpProblem make_lcp(const SparseMatrix& k, Vector rhs, bool singular, LcpParams params = {}) {
  return {std::make_shared<const SparseMatrix>(k), std::move(rhs), singular, std::move(params)};
}

// u^T K u - 2 u^T sigma
inline double objective(const LcpProblem& p, const Vector& u) {
  return u.dot(*p.matrix * u) - 2.0 * u.dot(p.rhs);
}

namespace detail {

inline Vector diagonal_of(const SparseMatrix& k) {
  Vector d(k.rows());
  for (Eigen::Index i = 0; i < k.rows(); ++i) d[i] = k.coeff(i, i);
  return d;
}

inline void fill_residuals(const SparseMatrix& k, const Vector& sigma, const Vector& diag, LcpSolution& s) {
  const double scale = std::max(sigma.lpNorm<1>(), std::numeric_limits<double>::min());
  const Vector w = k * s.u - sigma;
  double feas = 0.0, comp = 0.0;
  for (Eigen::Index i = 0; i < w.size(); ++i) {
    feas = std::max(feas, -w[i]);
    comp = std::max(comp, std::fabs(std::min(diag[i] * s.u[i], w[i])));
  }
  s.residual_feasibility = feas / scale;
  s.residual_complementarity = comp / scale;
}

inline bool residuals_ok(const LcpSolution& s, double tol) {
  return s.residual_feasibility <= tol && s.residual_complementarity <= tol;
}

// Primal-dual active set iteration from u. Returns false on failure.
inline bool active_set_solve(const SparseMatrix& k, const Vector& sigma, const Vector& diag, bool singular,
                             std::size_t max_it, Vector& u, std::size_t& iterations) {
  const Eigen::Index n = sigma.size();
  auto active_from = [&](const Vector& x) {
    const Vector w = k * x - sigma;
    std::vector<char> a(static_cast<std::size_t>(n), 0);
    for (Eigen::Index i = 0; i < n; ++i) a[i] = (w[i] - diag[i] * x[i] > 0.0) ? 1 : 0;
    return a;
  };
  std::vector<char> active = active_from(u);
  std::set<std::vector<char>> seen;
  Vector x = u;
  for (iterations = 0; iterations < max_it; ++iterations) {
    if (singular && std::find(active.begin(), active.end(), 1) == active.end()) {
      Eigen::Index j = 0;
      x.minCoeff(&j);
      active[static_cast<std::size_t>(j)] = 1;
    }
    // A repeated set means a degenerate node toggles; hand back the last
    // iterate and let the caller judge it by its residuals.
    if (!seen.insert(active).second) {
      u = x.cwiseMax(0.0);
      return true;
    }
    std::vector<Eigen::Index> map(static_cast<std::size_t>(n), -1);
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!active[i]) {
        map[i] = static_cast<Eigen::Index>(free.size());
        free.push_back(i);
      }
    x.setZero();
    if (!free.empty()) {
      const auto nf = static_cast<Eigen::Index>(free.size());
      std::vector<Eigen::Triplet<double>> t;
      Vector b(nf);
      for (Eigen::Index r = 0; r < nf; ++r) {
        const Eigen::Index i = free[r];
        b[r] = sigma[i];
        for (SparseMatrix::InnerIterator it(k, i); it; ++it)
          if (map[it.col()] >= 0) t.emplace_back(r, map[it.col()], it.value());
      }
      Eigen::SparseMatrix<double> sub(nf, nf);
      sub.setFromTriplets(t.begin(), t.end());
      Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(sub);
      if (ldlt.info() != Eigen::Success) return false;
      const Vector y = ldlt.solve(b);
      if (ldlt.info() != Eigen::Success || !y.allFinite()) return false;
      for (Eigen::Index r = 0; r < nf; ++r) x[free[r]] = y[r];
    }
    std::vector<char> next = active_from(x);
    if (next == active) {
      u = x.cwiseMax(0.0);
      ++iterations;
      return true;
    }
    active = std::move(next);
  }
  return false;
}

inline void grounded_zero_mass(const LcpProblem& p, const Vector& diag, LcpSolution& s) {
  const double scale = p.rhs.lpNorm<1>();
  const Vector b = p.rhs.array() - p.rhs.mean();
  s.u = pcg(*p.matrix, b, true, 1e-12 * scale, 20 * static_cast<std::size_t>(b.size()) + 100);
  s.u.array() -= s.u.minCoeff();
  s.method = "zero-mass";
  fill_residuals(*p.matrix, p.rhs, diag, s);
  s.converged = true;
}

}  // namespace detail

// Projected SOR in ascending node order, optionally finished by an
// active-set solve.
inline LcpSolution solve_pgs(const LcpProblem& p) {
  const SparseMatrix& k = *p.matrix;
  const Vector& sigma = p.rhs;
  const Eigen::Index n = sigma.size();
  if (k.rows() != n || k.cols() != n) throw InvalidInput("LCP matrix and rhs dimensions disagree");
  const LcpParams& prm = p.params;
  if (!(prm.relaxation > 0.0 && prm.relaxation < 2.0)) throw InvalidInput("relaxation must lie in (0, 2)");
  const Vector diag = detail::diagonal_of(k);
  LcpSolution s;
  s.u = Vector::Zero(n);
  const double scale = sigma.lpNorm<1>();
  if (scale == 0.0) {
    s.converged = true;
    s.method = "trivial";
    return s;
  }
  if (p.singular) {
    const double mass = sigma.sum();
    if (mass > prm.mass_tolerance * scale)
      throw Infeasible("no feasible u: the side condition sum(sigma) <= sum(lambda) fails (excess mass " +
                       std::to_string(mass) + ")");
    if (std::fabs(mass) <= prm.mass_tolerance * scale) {
      detail::grounded_zero_mass(p, diag, s);
      return s;
    }
  }
  for (Eigen::Index i = 0; i < n; ++i)
    if (diag[i] <= 0.0 && sigma[i] > 0.0)
      throw Infeasible("no feasible u: positive charge on an isolated node");

  const std::size_t cap = prm.max_sweeps ? prm.max_sweeps : 200 * static_cast<std::size_t>(n);
  const std::size_t check = std::max<std::size_t>(1, prm.check_every);
  Vector& u = s.u;
  auto sweep = [&] {
    for (Eigen::Index i = 0; i < n; ++i) {
      if (diag[i] <= 0.0) continue;
      double ku = 0.0;
      for (SparseMatrix::InnerIterator it(k, i); it; ++it) ku += it.value() * u[it.col()];
      u[i] = std::max(0.0, u[i] + prm.relaxation * (sigma[i] - ku) / diag[i]);
    }
  };
  auto run_pgs = [&](std::size_t until) {
    while (s.sweeps_used < until) {
      sweep();
      ++s.sweeps_used;
      if (prm.on_sweep) prm.on_sweep(s.sweeps_used, u);
      if (s.sweeps_used % check == 0 || s.sweeps_used == until) {
        detail::fill_residuals(k, sigma, diag, s);
        if (detail::residuals_ok(s, prm.tolerance)) return true;
      }
    }
    return false;
  };

  s.method = "pgs";
  bool done = run_pgs(prm.polish ? std::min(cap, prm.warmup_sweeps) : cap);
  if (prm.polish) {
    Vector x = u;
    const std::size_t as_cap =
        prm.max_active_set_iterations ? prm.max_active_set_iterations : static_cast<std::size_t>(n) + 16;
    if (detail::active_set_solve(k, sigma, diag, p.singular, as_cap, x,
                                 s.active_set_iterations)) {
      LcpSolution trial = s;
      trial.u = x;
      detail::fill_residuals(k, sigma, diag, trial);
      if (detail::residuals_ok(trial, prm.tolerance)) {
        trial.method = "pgs+active-set";
        trial.converged = true;
        return trial;
      }
    }
    if (!done) done = run_pgs(cap);
  }
  detail::fill_residuals(k, sigma, diag, s);
  s.converged = done && detail::residuals_ok(s, prm.tolerance);
  return s;
}

// Exhaustive active-set enumeration; the independent oracle for small cases.
inline LcpSolution solve_brute(const LcpProblem& p) {
  const Eigen::Index n = p.rhs.size();
  if (n > 16) throw InvalidInput("brute-force LCP limited to 16 unknowns");
  if (p.matrix->rows() != n) throw InvalidInput("LCP matrix and rhs dimensions disagree");
  const Eigen::MatrixXd k = Eigen::MatrixXd(*p.matrix);
  const Vector& sigma = p.rhs;
  const double feas_tol = 1e-12 * std::max(1.0, sigma.lpNorm<1>());
  bool found = false;
  Vector best;
  const std::uint32_t count = 1u << n;
  for (std::uint32_t mask = 0; mask < count; ++mask) {
    std::vector<Eigen::Index> free;
    for (Eigen::Index i = 0; i < n; ++i)
      if (!(mask & (1u << i))) free.push_back(i);
    Vector u = Vector::Zero(n);
    if (!free.empty()) {
      const auto nf = static_cast<Eigen::Index>(free.size());
      Eigen::MatrixXd sub(nf, nf);
      Vector b(nf);
      for (Eigen::Index r = 0; r < nf; ++r) {
        b[r] = sigma[free[r]];
        for (Eigen::Index c = 0; c < nf; ++c) sub(r, c) = k(free[r], free[c]);
      }
      Eigen::FullPivLU<Eigen::MatrixXd> lu(sub);
      if (!lu.isInvertible()) continue;
      const Vector y = lu.solve(b);
      for (Eigen::Index r = 0; r < nf; ++r) u[free[r]] = y[r];
    }
    const Vector w = k * u - sigma;
    if (u.minCoeff() < -feas_tol || w.minCoeff() < -feas_tol) continue;
    if (!found) {
      best = u;
      found = true;
    } else if ((u - best).lpNorm<Eigen::Infinity>() > 1e-9) {
      throw SolverError("brute-force LCP found two distinct solutions");
    }
  }
  if (!found) throw SolverError("no solution: no active set is feasible");
  LcpSolution s;
  s.u = best.cwiseMax(0.0);
  s.method = "brute";
  s.converged = true;
  detail::fill_residuals(*p.matrix, sigma, detail::diagonal_of(*p.matrix), s);
  return s;
}

}  // namespace balayage

#endif
