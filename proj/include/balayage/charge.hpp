#ifndef BALAYAGE_CHARGE_HPP
#define BALAYAGE_CHARGE_HPP

#include <functional>
#include <utility>

#include "balayage/grid.hpp"

namespace balayage {

namespace detail {
inline void require_same(ManifoldId a, ManifoldId b) {
  if (a != b) throw InvalidInput("charges live on different manifolds");
}
}  // namespace detail

// Signed nodal masses (absolute masses, not densities).
struct ChargeDistribution {
  Vector masses;
  ManifoldId manifold{};

  static ChargeDistribution zero(const DiscreteManifold& m) {
    return {Vector::Zero(static_cast<Eigen::Index>(m.size())), m.id()};
  }

  double total() const { return masses.sum(); }
  double l1() const { return masses.lpNorm<1>(); }
  std::size_t size() const { return static_cast<std::size_t>(masses.size()); }

  ChargeDistribution& operator+=(const ChargeDistribution& o) {
    detail::require_same(manifold, o.manifold);
    masses += o.masses;
    return *this;
  }
  ChargeDistribution& operator-=(const ChargeDistribution& o) {
    detail::require_same(manifold, o.manifold);
    masses -= o.masses;
    return *this;
  }
  ChargeDistribution& operator*=(double s) {
    masses *= s;
    return *this;
  }
  friend ChargeDistribution operator+(ChargeDistribution a, const ChargeDistribution& b) { return a += b; }
  friend ChargeDistribution operator-(ChargeDistribution a, const ChargeDistribution& b) { return a -= b; }
  friend ChargeDistribution operator*(double s, ChargeDistribution a) { return a *= s; }
  friend ChargeDistribution operator-(ChargeDistribution a) {
    a.masses = -a.masses;
    return a;
  }
};

// Whole weight on the nearest node.
inline ChargeDistribution atom(const DiscreteManifold& m, const Coord& location, double weight) {
  ChargeDistribution c = ChargeDistribution::zero(m);
  c.masses[static_cast<Eigen::Index>(nearest_node(m, location))] = weight;
  return c;
}

inline ChargeDistribution atom_at_node(const DiscreteManifold& m, std::size_t node, double weight) {
  if (node >= m.size()) throw InvalidInput("node index out of range");
  ChargeDistribution c = ChargeDistribution::zero(m);
  c.masses[static_cast<Eigen::Index>(node)] = weight;
  return c;
}

// masses_i = f(x_i) W_i
inline ChargeDistribution from_density(const DiscreteManifold& m, const std::function<double(const Coord&)>& f) {
  ChargeDistribution c = ChargeDistribution::zero(m);
  const Vector& w = m.volume_weights();
  for (std::size_t i = 0; i < m.size(); ++i) {
    const auto k = static_cast<Eigen::Index>(i);
    c.masses[k] = f(m.coords()[i]) * w[k];
  }
  return c;
}

inline ChargeDistribution volume_form(const DiscreteManifold& m, double scale = 1.0) {
  return {scale * m.volume_weights(), m.id()};
}

inline double normalized_mass(const DiscreteManifold& m, const ChargeDistribution& s) {
  detail::require_same(m.id(), s.manifold);
  return s.total() / m.total_volume();
}

// (plus, minus) with s = plus - minus and disjoint supports.
inline std::pair<ChargeDistribution, ChargeDistribution> jordan(const ChargeDistribution& s) {
  ChargeDistribution plus{s.masses.cwiseMax(0.0), s.manifold};
  ChargeDistribution minus{(-s.masses).cwiseMax(0.0), s.manifold};
  return {plus, minus};
}

}  // namespace balayage

#endif
