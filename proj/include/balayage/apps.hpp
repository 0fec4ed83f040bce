#ifndef BALAYAGE_APPS_HPP
#define BALAYAGE_APPS_HPP

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <vector>

#include "balayage/balayage.hpp"

namespace balayage {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

struct BallReport {
  Coord center{};
  double input = 0.0;  // t for harmonic balls, r for geodesic balls
  Mask region;
  double measured_volume = 0.0;  // fill-weighted for harmonic balls
  double mask_volume = 0.0;      // sum of W over the crisp region
  double measured_radius = kNaN;
  Vector fill;                   // per-node fill fraction
};

namespace detail {

inline bool is_pole(const DiscreteManifold& m, const Coord& a) {
  if (m.kind() == Kind::SymmetricProfile) return a.a == m.profile().r_lo;
  if (m.kind() == Kind::SphereLatLong) return a.a == 0.0 || a.a == std::numbers::pi;
  return false;
}

inline void require_supported_center(const DiscreteManifold& m, const Coord& a) {
  if (m.kind() == Kind::SymmetricProfile && !is_pole(m, a))
    throw InvalidInput("balls on a symmetric profile must be centred at the pole r_lo");
  if (!in_chart(m, a)) throw InvalidInput("centre outside the coordinate chart");
}

inline double max_radius(const DiscreteManifold& m) {
  switch (m.kind()) {
    case Kind::Circle: return 0.5;
    case Kind::SphereLatLong: return std::numbers::pi;
    case Kind::SymmetricProfile: return m.profile().r_hi - m.profile().r_lo;
  }
  return 0.0;
}

}  // namespace detail

// Radius of a filled region around a, read from per-node fill fractions.
inline double front_radius(const DiscreteManifold& m, const Coord& a, const Vector& fill) {
  switch (m.kind()) {
    case Kind::Circle: return 0.5 * fill.sum() * m.mesh_size();
    case Kind::SymmetricProfile: return fill.sum() * m.mesh_size();
    case Kind::SphereLatLong: {
      if (detail::is_pole(m, a)) {
        const auto [nt, np] = m.latlong();
        const double dt = m.mesh_size();
        const bool north = a.a == 0.0;
        const Eigen::Index last = fill.size() - 1;
        double ang = 0.5 * dt * fill[north ? 0 : last];
        for (int j = 1; j < nt; ++j) {
          double ring = 0.0;
          const int row = north ? j : nt - j;
          for (int k = 0; k < np; ++k) ring += fill[1 + (row - 1) * np + k];
          ang += dt * ring / np;
        }
        return ang;
      }
      const double vol = fill.dot(m.volume_weights());
      return std::acos(std::clamp(1.0 - vol / (2.0 * std::numbers::pi), -1.0, 1.0));
    }
  }
  return kNaN;
}

// Region where Bal(t delta_a, vol) = vol.
inline BallReport harmonic_ball(const DiscreteManifold& m, const Coord& a, double t, const BalayageOptions& opt = {},
                                BalayageResult* out = nullptr) {
  detail::require_supported_center(m, a);
  if (!(t > 0.0 && t < m.total_volume())) throw InvalidInput("harmonic ball mass must lie in (0, vol(M))");
  BalayageResult r = bal(m, atom(m, a, t), volume_form(m), opt);
  if (!r.converged()) throw SolverError("harmonic ball: balayage did not converge");
  BallReport b;
  b.center = a;
  b.input = t;
  b.region = r.omega_mask;
  b.fill = saturation_fraction(r);
  b.measured_volume = b.fill.dot(m.volume_weights());
  for (std::size_t i = 0; i < m.size(); ++i)
    if (b.region[i]) b.mask_volume += m.volume_weights()[static_cast<Eigen::Index>(i)];
  b.measured_radius = front_radius(m, a, b.fill);
  if (out) *out = std::move(r);
  return b;
}

// Nodes at geodesic distance < r from a.
inline BallReport geodesic_ball(const DiscreteManifold& m, const Coord& a, double r) {
  detail::require_supported_center(m, a);
  if (!(r > 0.0 && r <= detail::max_radius(m))) throw InvalidInput("geodesic radius outside the chart");
  BallReport b;
  b.center = a;
  b.input = r;
  b.region.assign(m.size(), false);
  b.fill = Vector::Zero(static_cast<Eigen::Index>(m.size()));
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (distance(m, m.coords()[i], a) < r) {
      b.region[i] = true;
      b.fill[static_cast<Eigen::Index>(i)] = 1.0;
      b.mask_volume += m.volume_weights()[static_cast<Eigen::Index>(i)];
    }
  }
  b.measured_volume = b.mask_volume;
  b.measured_radius = front_radius(m, a, b.fill);
  return b;
}

struct EquivalenceReport {
  double curvature = 0.0;
  double t_mass = 0.0;             // analytic volume of the geodesic ball
  double sine_law_t = 0.0;         // (pi/kappa) sin^2(sqrt(kappa) r), or pi r^2 when flat
  double sine_law_residual = 0.0;  // t_mass - sine_law_t, reported only
  bool regions_agree = false;      // up to a one-cell collar
  BallReport harmonic;
  BallReport geodesic;
};

// Harmonic versus geodesic balls on constant-curvature surfaces.
inline EquivalenceReport ball_equivalence_check(const DiscreteManifold& m, const Coord& a, double r,
                                                const BalayageOptions& opt = {}) {
  EquivalenceReport rep;
  using std::numbers::pi;
  if (m.dimension() != 2) throw InvalidInput("ball equivalence needs a two-dimensional manifold");
  if (m.geometry() == Geometry::Sphere) {
    rep.curvature = 1.0;
    rep.t_mass = 2.0 * pi * (1.0 - std::cos(r));
    rep.sine_law_t = pi * std::sin(r) * std::sin(r);
  } else if (m.geometry() == Geometry::Euclidean) {
    rep.curvature = 0.0;
    rep.t_mass = pi * r * r;
    rep.sine_law_t = pi * r * r;
  } else {
    throw InvalidInput("ball equivalence supports the round sphere and flat profiles only");
  }
  rep.sine_law_residual = rep.t_mass - rep.sine_law_t;
  rep.geodesic = geodesic_ball(m, a, r);
  rep.harmonic = harmonic_ball(m, a, rep.t_mass, opt);
  rep.regions_agree = equal_up_to_collar(m, rep.harmonic.region, rep.geodesic.region);
  return rep;
}

struct GrowthTrace {
  Coord source{};
  std::vector<double> t;
  std::vector<Mask> masks;
  std::vector<double> volumes;       // fill-weighted vol(D(t))
  std::vector<double> mask_volumes;
  std::vector<double> radii;
  std::vector<Vector> fills;
  std::vector<Vector> nu;
};

namespace detail {

inline void validate_schedule(const DiscreteManifold& m, const Mask& d0, const std::vector<double>& ts) {
  if (d0.size() != m.size()) throw InvalidInput("initial domain mask has the wrong length");
  if (ts.empty()) throw InvalidInput("growth schedule is empty");
  double free_volume = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (!d0[i]) free_volume += m.volume_weights()[static_cast<Eigen::Index>(i)];
  double prev = 0.0;
  for (double t : ts) {
    if (!(t > prev)) throw InvalidInput("growth schedule must be positive and strictly increasing");
    prev = t;
  }
  if (!(ts.back() < free_volume)) throw InvalidInput("growth schedule exceeds vol(M \\ D(0))");
}

inline ChargeDistribution indicator(const DiscreteManifold& m, const Mask& d) {
  ChargeDistribution c = ChargeDistribution::zero(m);
  for (std::size_t i = 0; i < m.size(); ++i)
    if (d[i]) c.masses[static_cast<Eigen::Index>(i)] = m.volume_weights()[static_cast<Eigen::Index>(i)];
  return c;
}

inline void record(const DiscreteManifold& m, GrowthTrace& g, double t, const BalayageResult& r) {
  if (!r.converged()) throw SolverError("growth step did not converge");
  g.t.push_back(t);
  g.masks.push_back(r.omega_mask);
  // lambda is the volume form, so nu / lambda is the filled fraction of each cell.
  Vector f = (r.nu.masses.array() / r.lambda.masses.array()).cwiseMax(0.0).cwiseMin(1.0);
  g.volumes.push_back(f.dot(m.volume_weights()));
  double mv = 0.0;
  for (std::size_t i = 0; i < m.size(); ++i)
    if (r.omega_mask[i]) mv += m.volume_weights()[static_cast<Eigen::Index>(i)];
  g.mask_volumes.push_back(mv);
  g.radii.push_back(detail::is_pole(m, g.source) || m.kind() == Kind::Circle ? front_radius(m, g.source, f) : kNaN);
  g.fills.push_back(std::move(f));
  g.nu.push_back(r.nu.masses);
}

}  // namespace detail

// D(t) = saturated set of Bal(t delta_a + chi_{D0} vol, vol), from scratch per step.
inline GrowthTrace laplacian_growth(const DiscreteManifold& m, const Coord& a, const Mask& d0,
                                    const std::vector<double>& schedule, const BalayageOptions& opt = {}) {
  detail::validate_schedule(m, d0, schedule);
  if (!in_chart(m, a)) throw InvalidInput("source outside the coordinate chart");
  GrowthTrace g;
  g.source = a;
  const ChargeDistribution base = detail::indicator(m, d0);
  const ChargeDistribution vol = volume_form(m);
  for (double t : schedule) detail::record(m, g, t, bal(m, atom(m, a, t) + base, vol, opt));
  return g;
}

// Same trace, each step sweeping the previous output plus the new source mass.
inline GrowthTrace laplacian_growth_incremental(const DiscreteManifold& m, const Coord& a, const Mask& d0,
                                                const std::vector<double>& schedule,
                                                const BalayageOptions& opt = {}) {
  detail::validate_schedule(m, d0, schedule);
  GrowthTrace g;
  g.source = a;
  const ChargeDistribution vol = volume_form(m);
  ChargeDistribution current = detail::indicator(m, d0);
  double prev = 0.0;
  for (double t : schedule) {
    BalayageResult r = bal(m, current + atom(m, a, t - prev), vol, opt);
    current = r.nu;
    prev = t;
    detail::record(m, g, t, r);
  }
  return g;
}

struct EquilibriumReport {
  Potential q;
  double t = 0.0;
  ChargeDistribution mu;
  Potential green_mu;
  double robin_constant = 0.0;
  double min_slack = 0.0;              // min over nodes of Q + G^mu - c
  double max_support_deviation = 0.0;  // max over supp mu of |Q + G^mu - c|
  Mask support_mask;
  LcpSolution diagnostics;
};

// mu = -Bal(K Q - t W, 0); c_Robin = median of Q + G^mu over supp mu.
inline EquilibriumReport weighted_equilibrium(const DiscreteManifold& m, const Potential& q, double t,
                                              const BalayageOptions& opt = {}) {
  if (!(t > 0.0)) throw InvalidInput("equilibrium parameter t must be positive");
  detail::require_same(m.id(), q.manifold);
  const ChargeDistribution sigma{m.stiffness() * q.values - t * m.volume_weights(), m.id()};
  const BalayageResult r = bal_zero(m, sigma, opt);
  if (!r.converged()) throw SolverError("equilibrium: balayage did not converge");
  EquilibriumReport rep;
  rep.q = q;
  rep.t = t;
  rep.mu = -r.nu;
  rep.diagnostics = r.diagnostics;
  rep.green_mu = green_potential(m, rep.mu, opt.cg);
  rep.support_mask.resize(m.size());
  std::vector<double> on_support;
  const Vector total = q.values + rep.green_mu.values;
  for (std::size_t i = 0; i < m.size(); ++i) {
    rep.support_mask[i] = !r.omega_mask[i];
    if (rep.support_mask[i]) on_support.push_back(total[static_cast<Eigen::Index>(i)]);
  }
  if (on_support.empty()) throw SolverError("equilibrium measure has empty support");
  const std::size_t mid = on_support.size() / 2;
  std::nth_element(on_support.begin(), on_support.begin() + static_cast<std::ptrdiff_t>(mid), on_support.end());
  double c = on_support[mid];
  if (on_support.size() % 2 == 0) {
    const double lo = *std::max_element(on_support.begin(), on_support.begin() + static_cast<std::ptrdiff_t>(mid));
    c = 0.5 * (c + lo);
  }
  rep.robin_constant = c;
  rep.min_slack = (total.array() - c).minCoeff();
  for (std::size_t i = 0; i < m.size(); ++i)
    if (rep.support_mask[i])
      rep.max_support_deviation = std::max(rep.max_support_deviation, std::fabs(total[static_cast<Eigen::Index>(i)] - c));
  return rep;
}

struct ProbeResult {
  Coord probe{};
  std::size_t node = 0;
  double region_integral = 0.0;  // sum over Omega of phi W
  double source_integral = 0.0;  // sum phi source
  double slack = 0.0;
  bool ok = false;
};

struct QuadratureReport {
  std::vector<ProbeResult> probes;
  double mass_defect = 0.0;  // (region mass - source mass) / ||source||_1
  bool constants_ok = false;
  bool pass = false;
};

// Checks int_Omega phi vol >= int phi source for phi = G(., y), y outside
// Omega, and equality for phi = +-1. The region is given as a measure.
inline QuadratureReport quadrature_verify(const DiscreteManifold& m, const Vector& region_measure,
                                          const ChargeDistribution& source, const std::vector<Coord>& probes,
                                          const BalayageOptions& opt = {}, double tol = 1e-8) {
  detail::require_same(m.id(), source.manifold);
  if (static_cast<std::size_t>(region_measure.size()) != m.size()) throw InvalidInput("region measure has the wrong length");
  QuadratureReport rep;
  const double scale = std::max(source.l1(), 1e-300);
  rep.mass_defect = (region_measure.sum() - source.total()) / scale;
  rep.constants_ok = std::fabs(rep.mass_defect) <= tol;
  rep.pass = rep.constants_ok;
  for (const Coord& y : probes) {
    ProbeResult pr;
    pr.probe = y;
    pr.node = nearest_node(m, y);
    if (region_measure[static_cast<Eigen::Index>(pr.node)] > 0.0) throw InvalidInput("quadrature probe lies inside Omega");
    const Potential phi = green_potential(m, atom_at_node(m, pr.node, 1.0), opt.cg);
    pr.region_integral = phi.values.dot(region_measure);
    pr.source_integral = phi.values.dot(source.masses);
    pr.slack = pr.region_integral - pr.source_integral;
    pr.ok = pr.slack >= -tol * scale * std::max(1.0, phi.values.lpNorm<Eigen::Infinity>());
    rep.pass = rep.pass && pr.ok;
    rep.probes.push_back(pr);
  }
  return rep;
}

inline QuadratureReport quadrature_verify(const DiscreteManifold& m, const Mask& omega, const ChargeDistribution& source,
                                          const std::vector<Coord>& probes, const BalayageOptions& opt = {},
                                          double tol = 1e-8) {
  Vector measure = Vector::Zero(static_cast<Eigen::Index>(m.size()));
  for (std::size_t i = 0; i < m.size(); ++i)
    if (omega[i]) measure[static_cast<Eigen::Index>(i)] = m.volume_weights()[static_cast<Eigen::Index>(i)];
  return quadrature_verify(m, measure, source, probes, opt, tol);
}

}  // namespace balayage

#endif
