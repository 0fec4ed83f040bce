#ifndef BALAYAGE_BALAYAGE_HPP
#define BALAYAGE_BALAYAGE_HPP

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "balayage/obstacle.hpp"

namespace balayage {

struct BalayageOptions {
  LcpParams lcp{};
  CgParams cg{};
  double omega_threshold = 1e-6;  // relative to the max |lambda - nu| density
};

struct BalayageResult {
  ChargeDistribution sigma;
  ChargeDistribution lambda;
  ChargeDistribution nu;
  ChargeDistribution mu;  // lambda - nu
  Potential u;
  Potential v;
  Potential psi;
  double t = 0.0;  // -m(sigma - lambda)
  Mask omega_mask;
  LcpSolution diagnostics;

  bool converged() const { return diagnostics.converged; }
  // ||sigma - lambda||_1, the scale used by all tolerances.
  double scale() const {
    const double s = (sigma.masses - lambda.masses).lpNorm<1>();
    return s > 0.0 ? s : 1.0;
  }
};

namespace detail {
inline Mask saturated_set(const Vector& lambda, const Vector& nu, const Vector& w, double threshold) {
  const Eigen::Index n = nu.size();
  Vector d(n);
  for (Eigen::Index i = 0; i < n; ++i) d[i] = std::fabs(lambda[i] - nu[i]) / w[i];
  const double top = n ? d.maxCoeff() : 0.0;
  Mask m(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) m[static_cast<std::size_t>(i)] = d[i] <= threshold * top;
  return m;
}
}  // namespace detail

// Bal(sigma, lambda) = Bal(sigma - lambda, 0) + lambda.
inline BalayageResult bal(const DiscreteManifold& m, const ChargeDistribution& sigma, const ChargeDistribution& lambda,
                          const BalayageOptions& opt = {}) {
  detail::require_same(m.id(), sigma.manifold);
  detail::require_same(m.id(), lambda.manifold);
  const ChargeDistribution rhs = sigma - lambda;
  LcpProblem p{m.stiffness_ptr(), rhs.masses, m.singular(), opt.lcp};
  BalayageResult r;
  r.sigma = sigma;
  r.lambda = lambda;
  r.diagnostics = solve_pgs(p);
  const Vector u = std::move(r.diagnostics.u);
  r.diagnostics.u = Vector();
  r.u = {u, m.id()};
  const Vector ku = m.stiffness() * u;
  r.nu = {rhs.masses - ku + lambda.masses, m.id()};
  r.mu = {lambda.masses - r.nu.masses, m.id()};
  r.t = -normalized_mass(m, rhs);
  const Potential g = green_potential(m, rhs, opt.cg);
  r.psi = {-g.values, m.id()};
  r.v = {u + r.psi.values, m.id()};
  r.omega_mask = detail::saturated_set(lambda.masses, r.nu.masses, m.volume_weights(), opt.omega_threshold);
  return r;
}

inline BalayageResult bal_zero(const DiscreteManifold& m, const ChargeDistribution& sigma,
                               const BalayageOptions& opt = {}) {
  return bal(m, sigma, ChargeDistribution::zero(m), opt);
}

// Fraction of the way from sigma to lambda reached by nu, clamped to [0,1];
// 1 on the saturated set, 0 where nu = sigma.
inline Vector saturation_fraction(const BalayageResult& r) {
  const Vector& s = r.sigma.masses;
  const Vector& l = r.lambda.masses;
  const Vector& nu = r.nu.masses;
  Vector f(nu.size());
  for (Eigen::Index i = 0; i < nu.size(); ++i) {
    const double gap = l[i] - s[i];
    f[i] = gap > 0.0 ? std::clamp((nu[i] - s[i]) / gap, 0.0, 1.0) : 1.0;
  }
  return f;
}

struct BoundsReport {
  bool pass = true;
  double worst_upper = 0.0;  // max(nu - lambda), scaled
  double worst_lower = 0.0;  // max(min(sigma,lambda) - nu), scaled
  std::size_t upper_node = 0;
  std::size_t lower_node = 0;
};

// min(sigma, lambda) <= nu <= lambda within tol * scale.
inline BoundsReport check_bounds(const BalayageResult& r, double tol = 1e-8) {
  BoundsReport rep;
  const double scale = r.scale();
  const Vector& s = r.sigma.masses;
  const Vector& l = r.lambda.masses;
  const Vector& nu = r.nu.masses;
  rep.worst_upper = -std::numeric_limits<double>::infinity();
  rep.worst_lower = -std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < nu.size(); ++i) {
    const double up = (nu[i] - l[i]) / scale;
    const double lo = (std::min(s[i], l[i]) - nu[i]) / scale;
    if (up > rep.worst_upper) {
      rep.worst_upper = up;
      rep.upper_node = static_cast<std::size_t>(i);
    }
    if (lo > rep.worst_lower) {
      rep.worst_lower = lo;
      rep.lower_node = static_cast<std::size_t>(i);
    }
  }
  rep.pass = rep.worst_upper <= tol && rep.worst_lower <= tol;
  return rep;
}

// Graph dilation of a mask by one cell.
inline Mask dilate(const DiscreteManifold& m, const Mask& a) {
  Mask out = a;
  const SparseMatrix& k = m.stiffness();
  for (Eigen::Index i = 0; i < k.outerSize(); ++i) {
    if (!a[static_cast<std::size_t>(i)]) continue;
    for (SparseMatrix::InnerIterator it(k, i); it; ++it)
      if (it.value() != 0.0) out[static_cast<std::size_t>(it.col())] = true;
  }
  return out;
}

inline bool subset_up_to_collar(const DiscreteManifold& m, const Mask& a, const Mask& b) {
  const Mask grown = dilate(m, b);
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] && !grown[i]) return false;
  return true;
}

inline bool equal_up_to_collar(const DiscreteManifold& m, const Mask& a, const Mask& b) {
  return subset_up_to_collar(m, a, b) && subset_up_to_collar(m, b, a);
}

// Nodes on either side of the boundary of the mask.
inline Mask collar(const DiscreteManifold& m, const Mask& a) {
  Mask inv(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) inv[i] = !a[i];
  const Mask ga = dilate(m, a);
  const Mask gi = dilate(m, inv);
  Mask out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = ga[i] && gi[i];
  return out;
}

inline std::size_t connected_components(const DiscreteManifold& m, const Mask& a) {
  const auto adj = m.adjacency();
  std::vector<char> seen(a.size(), 0);
  std::size_t count = 0;
  for (std::size_t s = 0; s < a.size(); ++s) {
    if (!a[s] || seen[s]) continue;
    ++count;
    std::deque<std::size_t> q{s};
    seen[s] = 1;
    while (!q.empty()) {
      const std::size_t i = q.front();
      q.pop_front();
      for (std::size_t j : adj[i])
        if (a[j] && !seen[j]) {
          seen[j] = 1;
          q.push_back(j);
        }
    }
  }
  return count;
}

// Nodes with u > eps * max(u): the noncoincidence set.
inline Mask noncoincidence_mask(const BalayageResult& r, double eps = 1e-9) {
  const double top = r.u.values.size() ? r.u.values.maxCoeff() : 0.0;
  Mask m(r.u.size());
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = r.u.values[static_cast<Eigen::Index>(i)] > eps * top && top > 0.0;
  return m;
}

struct StructureReport {
  bool pass = true;
  double singular_mass = 0.0;  // ||nu_sing||_1 / scale
  std::size_t worst_node = 0;
  double worst_value = 0.0;    // unscaled
  bool worst_in_collar = true;
  std::vector<std::size_t> violation_nodes;
};

// nu = lambda on Omega and nu = sigma off Omega, up to nu_sing.
inline StructureReport check_structure(const DiscreteManifold& m, const BalayageResult& r, double eps = 1e-2) {
  StructureReport rep;
  const double scale = r.scale();
  const Vector& s = r.sigma.masses;
  const Vector& l = r.lambda.masses;
  const Vector& nu = r.nu.masses;
  double total = 0.0;
  for (Eigen::Index i = 0; i < nu.size(); ++i) {
    const double sing = std::min(std::fabs(nu[i] - l[i]), std::fabs(nu[i] - s[i]));
    total += sing;
    if (sing > rep.worst_value) {
      rep.worst_value = sing;
      rep.worst_node = static_cast<std::size_t>(i);
    }
    if (sing > 1e-9 * scale) rep.violation_nodes.push_back(static_cast<std::size_t>(i));
  }
  rep.singular_mass = total / scale;
  rep.pass = rep.singular_mass <= eps;
  rep.worst_in_collar = collar(m, r.omega_mask)[rep.worst_node];
  return rep;
}

// Splitting balayage into steps: lhs = Bal(Bal(s1,l2) + s2, l1),
// rhs = Bal(s1 + s2, l1).
inline std::pair<BalayageResult, BalayageResult> bal_incremental(const DiscreteManifold& m,
                                                                 const ChargeDistribution& s1,
                                                                 const ChargeDistribution& s2,
                                                                 const ChargeDistribution& l1,
                                                                 const ChargeDistribution& l2,
                                                                 const BalayageOptions& opt = {}) {
  const Vector gap = l2.masses + s2.masses - l1.masses;
  const double tol = 1e-12 * std::max(1.0, gap.lpNorm<Eigen::Infinity>());
  if (gap.size() && gap.minCoeff() < -tol) throw InvalidInput("incremental balayage requires lambda1 <= lambda2 + sigma2");
  const BalayageResult inner = bal(m, s1, l2, opt);
  BalayageResult lhs = bal(m, inner.nu + s2, l1, opt);
  BalayageResult rhs = bal(m, s1 + s2, l1, opt);
  return {std::move(lhs), std::move(rhs)};
}

struct VSystemReport {
  bool pass = true;
  double obstacle_violation = 0.0;  // max(psi - v), scaled
  double laplacian_violation = 0.0; // max(-(Kv)_i - t W_i), scaled
};

// v >= psi and d*dv <= t vol.
inline VSystemReport check_v_system(const DiscreteManifold& m, const BalayageResult& r, double tol = 1e-8) {
  VSystemReport rep;
  const double scale = r.scale();
  const Vector kv = m.stiffness() * r.v.values;
  const Vector& w = m.volume_weights();
  rep.obstacle_violation = (r.psi.values - r.v.values).maxCoeff() / scale;
  rep.laplacian_violation = (-kv - r.t * w).maxCoeff() / scale;
  rep.obstacle_violation = std::max(rep.obstacle_violation, 0.0);
  rep.laplacian_violation = std::max(rep.laplacian_violation, 0.0);
  rep.pass = rep.obstacle_violation <= tol && rep.laplacian_violation <= tol;
  return rep;
}

// J(v) = v^T K v + 2 t sum W_i v_i
inline double j_functional(const DiscreteManifold& m, const Vector& v, double t) {
  return v.dot(m.stiffness() * v) + 2.0 * t * m.volume_weights().dot(v);
}

struct DiagnosticLevel {
  DiscreteManifold manifold;
  ChargeDistribution sigma;
  std::vector<Coord> sources;       // positive atoms; u is not sampled near them
  std::vector<std::size_t> sinks;   // nodes carrying negative atoms
};

struct DiagnosticOptions {
  BalayageOptions bal{};
  double exclusion_radius = 0.5;
  double r2_min = 0.98;
  double growth_min = 0.05;
};

struct ExistenceReport {
  bool diverging = false;
  std::string rate_variable;
  std::vector<double> h;
  std::vector<double> rate;
  std::vector<double> sup_u;
  std::vector<double> sink_mass;      // total nu on the sink nodes
  std::vector<double> sink_residual;  // max |nu - sigma| on the sink nodes
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  double relative_growth = 0.0;
};

struct LineFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
};

inline LineFit fit_line(const std::vector<double>& x, const std::vector<double>& y) {
  const auto n = static_cast<double>(x.size());
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  LineFit f;
  f.slope = sxx > 0 ? sxy / sxx : 0.0;
  f.intercept = my - f.slope * mx;
  f.r2 = (sxx > 0 && syy > 0) ? (sxy * sxy) / (sxx * syy) : 0.0;
  return f;
}

// Mesh-refinement test for existence: sup u away from the positive atoms
// either settles or grows like the Green kernel singularity.
inline ExistenceReport existence_diagnostic(const std::function<DiagnosticLevel(std::size_t)>& builder,
                                            const std::vector<std::size_t>& levels,
                                            const DiagnosticOptions& opt = {}) {
  if (levels.size() < 3) throw InvalidInput("existence diagnostic needs at least 3 levels");
  ExistenceReport rep;
  int dim = 0;
  for (std::size_t level : levels) {
    const DiagnosticLevel lv = builder(level);
    const DiscreteManifold& m = lv.manifold;
    dim = m.dimension();
    const BalayageResult r = bal_zero(m, lv.sigma, opt.bal);
    double sup = 0.0;
    for (std::size_t i = 0; i < m.size(); ++i) {
      bool far = true;
      for (const Coord& c : lv.sources) far = far && distance(m, m.coords()[i], c) >= opt.exclusion_radius;
      if (far) sup = std::max(sup, r.u.values[static_cast<Eigen::Index>(i)]);
    }
    double sink = 0.0, resid = 0.0;
    for (std::size_t i : lv.sinks) {
      const auto k = static_cast<Eigen::Index>(i);
      sink += r.nu.masses[k];
      resid = std::max(resid, std::fabs(r.nu.masses[k] - r.sigma.masses[k]));
    }
    const double h = m.mesh_size();
    rep.h.push_back(h);
    rep.sup_u.push_back(sup);
    rep.sink_mass.push_back(sink);
    rep.sink_residual.push_back(resid);
    rep.rate.push_back(dim <= 2 ? std::log(1.0 / h) : std::pow(h, 2.0 - dim));
  }
  rep.rate_variable = dim <= 2 ? "log(1/h)" : "h^(2-n)";
  const LineFit f = fit_line(rep.rate, rep.sup_u);
  rep.slope = f.slope;
  rep.intercept = f.intercept;
  rep.r2 = f.r2;
  const double first = rep.sup_u.front();
  const double last = rep.sup_u.back();
  rep.relative_growth = (last - first) / std::max(std::fabs(first), 1e-300);
  rep.diverging = f.slope > 0.0 && f.r2 > opt.r2_min && rep.relative_growth > opt.growth_min;
  return rep;
}

}  // namespace balayage

#endif
