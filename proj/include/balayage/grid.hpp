#ifndef BALAYAGE_GRID_HPP
#define BALAYAGE_GRID_HPP

#include <Eigen/Sparse>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <string>
#include <vector>

#include "balayage/error.hpp"

namespace balayage {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;
using Mask = std::vector<bool>;

enum class Kind { Circle, SphereLatLong, SymmetricProfile };
enum class Boundary { Closed, Dirichlet, Neumann };
// Which analytic model the grid approximates; drives distances and closed forms.
enum class Geometry { Circle, Sphere, Euclidean, Generic };

// circle: a = x; sphere: (a, b) = (theta, phi); profile: a = r
struct Coord {
  double a = 0.0;
  double b = 0.0;
};

struct ManifoldId {
  std::uint64_t value = 0;
  auto operator<=>(const ManifoldId&) const = default;
};

namespace detail {
inline ManifoldId next_manifold_id() {
  static std::atomic<std::uint64_t> counter{0};
  return ManifoldId{++counter};
}
}  // namespace detail

inline const char* to_string(Kind k) {
  switch (k) {
    case Kind::Circle: return "circle";
    case Kind::SphereLatLong: return "sphere_latlong";
    case Kind::SymmetricProfile: return "profile";
  }
  return "?";
}

inline const char* to_string(Boundary b) {
  switch (b) {
    case Boundary::Closed: return "closed";
    case Boundary::Dirichlet: return "dirichlet";
    case Boundary::Neumann: return "neumann";
  }
  return "?";
}

// Area of the unit (n-1)-sphere in R^n.
inline double unit_sphere_area(int n) {
  if (n < 1) throw InvalidInput("dimension must be >= 1");
  return 2.0 * std::pow(std::numbers::pi, 0.5 * n) / std::tgamma(0.5 * n);
}

struct ProfileInfo {
  double r_lo = 0.0;
  double r_hi = 0.0;
  double h = 0.0;
  double surface_factor = 0.0;
};

struct LatLongInfo {
  int n_theta = 0;
  int n_phi = 0;
};

// Immutable discretized manifold: nodes, lumped volumes W and stiffness K.
class DiscreteManifold {
 public:
  Kind kind() const { return kind_; }
  Boundary boundary() const { return boundary_; }
  Geometry geometry() const { return geometry_; }
  int dimension() const { return dimension_; }
  ManifoldId id() const { return id_; }
  std::size_t size() const { return coords_.size(); }
  const std::vector<Coord>& coords() const { return coords_; }
  const Vector& volume_weights() const { return weights_; }
  const SparseMatrix& stiffness() const { return *stiffness_; }
  std::shared_ptr<const SparseMatrix> stiffness_ptr() const { return stiffness_; }
  const std::vector<std::size_t>& boundary_nodes() const { return boundary_nodes_; }
  double total_volume() const { return total_volume_; }
  // Constants lie in the kernel of K.
  bool singular() const { return boundary_ != Boundary::Dirichlet; }
  double mesh_size() const { return mesh_size_; }
  const ProfileInfo& profile() const { return profile_; }
  const LatLongInfo& latlong() const { return latlong_; }

  // Copy with a different stiffness operator and a fresh id.
  DiscreteManifold with_stiffness(SparseMatrix k) const {
    DiscreteManifold m = *this;
    m.stiffness_ = std::make_shared<const SparseMatrix>(std::move(k));
    m.id_ = detail::next_manifold_id();
    return m;
  }

  // Neighbours in the stiffness graph.
  std::vector<std::vector<std::size_t>> adjacency() const {
    std::vector<std::vector<std::size_t>> adj(size());
    const SparseMatrix& k = *stiffness_;
    for (Eigen::Index i = 0; i < k.outerSize(); ++i)
      for (SparseMatrix::InnerIterator it(k, i); it; ++it)
        if (it.col() != i && it.value() != 0.0) adj[i].push_back(static_cast<std::size_t>(it.col()));
    return adj;
  }

 private:
  friend DiscreteManifold build_circle(std::size_t);
  friend DiscreteManifold build_sphere_latlong(int, int);
  friend DiscreteManifold build_symmetric_profile(const std::function<double(double)>&, double, double,
                                                  double, std::size_t, Boundary, Geometry, int);

  Kind kind_ = Kind::Circle;
  Boundary boundary_ = Boundary::Closed;
  Geometry geometry_ = Geometry::Generic;
  int dimension_ = 0;
  ManifoldId id_{};
  std::vector<Coord> coords_;
  Vector weights_;
  std::shared_ptr<const SparseMatrix> stiffness_;
  std::vector<std::size_t> boundary_nodes_;
  double total_volume_ = 0.0;
  double mesh_size_ = 0.0;
  ProfileInfo profile_{};
  LatLongInfo latlong_{};
};

namespace detail {
// Sums conductance c between nodes i and j into a symmetric stiffness pattern.
inline void add_edge(std::vector<Eigen::Triplet<double>>& t, std::size_t i, std::size_t j, double c) {
  const auto a = static_cast<Eigen::Index>(i);
  const auto b = static_cast<Eigen::Index>(j);
  t.emplace_back(a, a, c);
  t.emplace_back(b, b, c);
  t.emplace_back(a, b, -c);
  t.emplace_back(b, a, -c);
}

inline std::shared_ptr<const SparseMatrix> assemble(std::size_t n, const std::vector<Eigen::Triplet<double>>& t) {
  auto k = std::make_shared<SparseMatrix>(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  k->setFromTriplets(t.begin(), t.end());
  k->makeCompressed();
  return k;
}
}  // namespace detail

// Uniform periodic grid on [0,1).
inline DiscreteManifold build_circle(std::size_t n_nodes) {
  if (n_nodes < 3) throw InvalidInput("circle needs at least 3 nodes");
  DiscreteManifold m;
  m.kind_ = Kind::Circle;
  m.geometry_ = Geometry::Circle;
  m.dimension_ = 1;
  const double h = 1.0 / static_cast<double>(n_nodes);
  m.mesh_size_ = h;
  m.coords_.resize(n_nodes);
  m.weights_ = Vector::Constant(static_cast<Eigen::Index>(n_nodes), h);
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(4 * n_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) {
    m.coords_[i].a = static_cast<double>(i) * h;
    detail::add_edge(t, i, (i + 1) % n_nodes, 1.0 / h);
  }
  m.stiffness_ = detail::assemble(n_nodes, t);
  m.total_volume_ = 1.0;
  m.id_ = detail::next_manifold_id();
  return m;
}

// Lat-long sphere. Node 0 is the north pole, then rings j = 1..n_theta-1
// with n_phi nodes each, then the south pole.
inline DiscreteManifold build_sphere_latlong(int n_theta, int n_phi) {
  if (n_theta < 4 || n_phi < 4) throw InvalidInput("lat-long sphere needs n_theta >= 4 and n_phi >= 4");
  using std::numbers::pi;
  DiscreteManifold m;
  m.kind_ = Kind::SphereLatLong;
  m.geometry_ = Geometry::Sphere;
  m.dimension_ = 2;
  m.latlong_ = {n_theta, n_phi};
  const double dt = pi / n_theta;
  const double dp = 2.0 * pi / n_phi;
  m.mesh_size_ = dt;
  const std::size_t rings = static_cast<std::size_t>(n_theta - 1);
  const std::size_t np = static_cast<std::size_t>(n_phi);
  const std::size_t n = 2 + rings * np;
  const std::size_t south = n - 1;
  auto node = [&](std::size_t j, std::size_t k) { return 1 + (j - 1) * np + (k % np); };

  m.coords_.resize(n);
  m.weights_.resize(static_cast<Eigen::Index>(n));
  const double cap = 2.0 * pi * (1.0 - std::cos(0.5 * dt));
  m.coords_[0] = {0.0, 0.0};
  m.weights_[0] = cap;
  m.coords_[south] = {pi, 0.0};
  m.weights_[static_cast<Eigen::Index>(south)] = cap;

  std::vector<Eigen::Triplet<double>> t;
  t.reserve(8 * n);
  for (std::size_t j = 1; j <= rings; ++j) {
    const double th = static_cast<double>(j) * dt;
    const double band = dp * (std::cos(th - 0.5 * dt) - std::cos(th + 0.5 * dt));
    const double c_ring = dt / (std::sin(th) * dp);
    const double c_down = std::sin(th + 0.5 * dt) * dp / dt;
    for (std::size_t k = 0; k < np; ++k) {
      const std::size_t i = node(j, k);
      m.coords_[i] = {th, static_cast<double>(k) * dp};
      m.weights_[static_cast<Eigen::Index>(i)] = band;
      detail::add_edge(t, i, node(j, k + 1), c_ring);
      if (j < rings) detail::add_edge(t, i, node(j + 1, k), c_down);
    }
  }
  const double c_pole = std::sin(0.5 * dt) * dp / dt;
  for (std::size_t k = 0; k < np; ++k) {
    detail::add_edge(t, 0, node(1, k), c_pole);
    detail::add_edge(t, south, node(rings, k), c_pole);
  }
  m.stiffness_ = detail::assemble(n, t);
  m.total_volume_ = m.weights_.sum();
  m.id_ = detail::next_manifold_id();
  return m;
}

// Cell-centred rotationally symmetric grid on [r_lo, r_hi]. r_lo is always
// no-flux; the boundary condition applies at r_hi.
inline DiscreteManifold build_symmetric_profile(const std::function<double(double)>& weight_fn, double r_lo,
                                                double r_hi, double surface_factor, std::size_t n_cells,
                                                Boundary boundary, Geometry geometry = Geometry::Generic,
                                                int dimension = 0) {
  if (!(r_hi > r_lo)) throw InvalidInput("profile interval must satisfy r_lo < r_hi");
  if (!(surface_factor > 0.0)) throw InvalidInput("surface_factor must be positive");
  if (n_cells < 2) throw InvalidInput("profile needs at least 2 cells");
  DiscreteManifold m;
  m.kind_ = Kind::SymmetricProfile;
  m.boundary_ = boundary;
  m.geometry_ = geometry;
  m.dimension_ = dimension;
  const double h = (r_hi - r_lo) / static_cast<double>(n_cells);
  m.mesh_size_ = h;
  m.profile_ = {r_lo, r_hi, h, surface_factor};

  std::vector<double> centre(n_cells), face(n_cells + 1);
  double w_max = 0.0;
  for (std::size_t i = 0; i <= n_cells; ++i) {
    face[i] = weight_fn(r_lo + static_cast<double>(i) * h);
    if (i < n_cells) centre[i] = weight_fn(r_lo + (static_cast<double>(i) + 0.5) * h);
  }
  for (std::size_t i = 0; i <= n_cells; ++i) {
    const bool bad_face = !std::isfinite(face[i]) || face[i] < 0.0;
    const bool bad_centre = i < n_cells && (!std::isfinite(centre[i]) || !(centre[i] > 0.0));
    if (bad_face || bad_centre) throw InvalidInput("profile weight must be positive inside the interval");
    w_max = std::max({w_max, face[i], i < n_cells ? centre[i] : 0.0});
  }
  for (std::size_t i = 1; i < n_cells; ++i)
    if (!(face[i] > 0.0)) throw InvalidInput("profile weight vanishes inside the interval");
  if (boundary == Boundary::Closed &&
      (face.front() > 1e-12 * w_max || face.back() > 1e-12 * w_max))
    throw InvalidInput("closed profile requires the weight to vanish at both endpoints");

  m.coords_.resize(n_cells);
  m.weights_.resize(static_cast<Eigen::Index>(n_cells));
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(4 * n_cells + 1);
  for (std::size_t i = 0; i < n_cells; ++i) {
    m.coords_[i].a = r_lo + (static_cast<double>(i) + 0.5) * h;
    m.weights_[static_cast<Eigen::Index>(i)] = surface_factor * centre[i] * h;
    if (i + 1 < n_cells) detail::add_edge(t, i, i + 1, surface_factor * face[i + 1] / h);
  }
  const std::size_t last = n_cells - 1;
  if (boundary == Boundary::Dirichlet) {
    const auto l = static_cast<Eigen::Index>(last);
    t.emplace_back(l, l, 2.0 * surface_factor * face.back() / h);
  }
  if (boundary != Boundary::Closed) m.boundary_nodes_.push_back(last);
  m.stiffness_ = detail::assemble(n_cells, t);
  m.total_volume_ = m.weights_.sum();
  m.id_ = detail::next_manifold_id();
  return m;
}

// S^2 in geodesic polar angle theta in [0, pi].
inline DiscreteManifold build_sphere_polar(std::size_t n_cells) {
  return build_symmetric_profile([](double th) { return std::sin(th); }, 0.0, std::numbers::pi,
                                 2.0 * std::numbers::pi, n_cells, Boundary::Closed, Geometry::Sphere, 2);
}

// S^n in the polar angle xi in [0, pi], weight sin^{n-1}.
inline DiscreteManifold build_sn_polar(int n, std::size_t n_cells) {
  if (n < 2) throw InvalidInput("S^n profile needs n >= 2");
  return build_symmetric_profile([n](double x) { return std::pow(std::sin(x), n - 1); }, 0.0,
                                 std::numbers::pi, unit_sphere_area(n), n_cells, Boundary::Closed,
                                 Geometry::Sphere, n);
}

// Ball B(0,R) in R^n as a radial profile with weight r^{n-1}.
inline DiscreteManifold build_radial_ball(int n, double radius, std::size_t n_cells, Boundary boundary) {
  if (n < 1) throw InvalidInput("dimension must be >= 1");
  if (boundary == Boundary::Closed) throw InvalidInput("a ball needs a Dirichlet or Neumann boundary");
  return build_symmetric_profile([n](double r) { return std::pow(r, n - 1); }, 0.0, radius,
                                 unit_sphere_area(n), n_cells, boundary, Geometry::Euclidean, n);
}

// Geodesic distance for the supported families. Profile coordinates are
// distances from the pole r_lo, so profile distances are |r_a - r_b|.
inline double distance(const DiscreteManifold& m, const Coord& p, const Coord& q) {
  switch (m.kind()) {
    case Kind::Circle: {
      double d = std::fabs(p.a - q.a);
      d -= std::floor(d);
      return std::min(d, 1.0 - d);
    }
    case Kind::SphereLatLong: {
      const double c = std::cos(p.a) * std::cos(q.a) + std::sin(p.a) * std::sin(q.a) * std::cos(p.b - q.b);
      return std::acos(std::clamp(c, -1.0, 1.0));
    }
    case Kind::SymmetricProfile:
      return std::fabs(p.a - q.a);
  }
  return 0.0;
}

inline bool in_chart(const DiscreteManifold& m, const Coord& p) {
  switch (m.kind()) {
    case Kind::Circle: return p.a >= 0.0 && p.a <= 1.0;
    case Kind::SphereLatLong:
      return p.a >= 0.0 && p.a <= std::numbers::pi && p.b >= 0.0 && p.b <= 2.0 * std::numbers::pi;
    case Kind::SymmetricProfile: return p.a >= m.profile().r_lo && p.a <= m.profile().r_hi;
  }
  return false;
}

// Nearest node, ties to the lowest index.
inline std::size_t nearest_node(const DiscreteManifold& m, const Coord& p) {
  if (!in_chart(m, p)) throw InvalidInput("location outside the coordinate chart");
  if (m.kind() == Kind::SymmetricProfile) {
    const auto& pr = m.profile();
    const double x = (p.a - pr.r_lo) / pr.h - 0.5;
    const auto last = static_cast<double>(m.size() - 1);
    const double c = std::clamp(std::ceil(x - 0.5), 0.0, last);
    return static_cast<std::size_t>(c);
  }
  std::size_t best = 0;
  double best_d = distance(m, m.coords()[0], p);
  for (std::size_t i = 1; i < m.size(); ++i) {
    const double d = distance(m, m.coords()[i], p);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

}  // namespace balayage

#endif
