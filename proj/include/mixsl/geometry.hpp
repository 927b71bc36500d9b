#pragma once

// Embedded 2D domains on a Cartesian grid: inside tests, boundary
// projection, node classification and the normal-extrapolation stencils
// that close five-point (and wider) stencils across the boundary.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "mixsl/errors.hpp"
#include "mixsl/grid.hpp"

namespace mixsl {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
  Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
  Vec2 operator*(double s) const { return {x * s, y * s}; }
  friend Vec2 operator*(double s, Vec2 v) { return v * s; }
  double operator[](std::size_t k) const { return k == 0 ? x : y; }
  bool operator==(const Vec2&) const = default;
};

inline double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) { return std::hypot(a.x, a.y); }

struct Disk {
  Vec2 center{0.0, 0.0};
  double radius = 1.0;
};

/// Tokamak-like cross-section: the outer flux surface of the curvilinear
/// map implemented in `dshape`.
struct DShape {};

/// Closed polygon; vertices in either orientation, last edge implicit.
struct Polygon {
  std::vector<Vec2> vertices;
};

using DomainShape = std::variant<Disk, DShape, Polygon>;

/// Curvilinear D-shape map (xi1, xi2) -> (x, y).
namespace dshape {

inline constexpr double kCenterX = 1.7;
inline constexpr double kSlope = 0.074;
inline constexpr double kOffset = 0.536;
inline constexpr double kTriangularity = 0.416;
inline constexpr double kElongation = 1.66;
inline constexpr double kXi1Min = -231.0 / 74.0;  // minor radius vanishes
inline constexpr double kXi1Max = 1.0;
inline constexpr std::size_t kPolylinePoints = std::size_t{1} << 14;

inline double delta() { return std::asin(kTriangularity); }
inline double minor_radius(double xi1) { return kSlope * (2.0 * xi1 - 1.0) + kOffset; }
inline double boundary_radius() { return minor_radius(kXi1Max); }

/// Point at minor radius s and poloidal angle t = 2*pi*xi2.
inline Vec2 curve(double s, double t) {
  return {kCenterX + s * std::cos(t + delta() * std::sin(t)), kElongation * s * std::sin(t)};
}
inline Vec2 curve_dt(double s, double t) {
  const double psi = t + delta() * std::sin(t);
  const double dpsi = 1.0 + delta() * std::cos(t);
  return {-s * std::sin(psi) * dpsi, kElongation * s * std::cos(t)};
}
inline Vec2 curve_dtt(double s, double t) {
  const double psi = t + delta() * std::sin(t);
  const double dpsi = 1.0 + delta() * std::cos(t);
  const double ddpsi = -delta() * std::sin(t);
  return {-s * (std::cos(psi) * dpsi * dpsi + std::sin(psi) * ddpsi),
          -kElongation * s * std::sin(t)};
}

inline Vec2 map(double xi1, double xi2) {
  return curve(minor_radius(xi1), 2.0 * std::numbers::pi * xi2);
}

}  // namespace dshape

/// Closed polyline with y-binned edges for fast winding-number queries.
class ClosedPolyline {
 public:
  explicit ClosedPolyline(std::vector<Vec2> v) : v_(std::move(v)) {
    if (v_.size() < 3) throw GeometryError("polyline needs at least 3 vertices");
    lo_ = hi_ = v_.front();
    double area2 = 0.0;
    for (std::size_t k = 0; k < v_.size(); ++k) {
      const Vec2 a = v_[k], b = v_[(k + 1) % v_.size()];
      lo_ = {std::min(lo_.x, a.x), std::min(lo_.y, a.y)};
      hi_ = {std::max(hi_.x, a.x), std::max(hi_.y, a.y)};
      area2 += cross(a, b);
    }
    ccw_ = area2 > 0.0;
    nbins_ = std::max<std::size_t>(1, std::min<std::size_t>(1024, v_.size() / 8));
    bin_h_ = (hi_.y - lo_.y) / static_cast<double>(nbins_);
    if (!(bin_h_ > 0.0)) throw GeometryError("degenerate polyline");
    bins_.assign(nbins_, {});
    for (std::size_t k = 0; k < v_.size(); ++k) {
      const Vec2 a = v_[k], b = v_[(k + 1) % v_.size()];
      const auto b0 = bin_of(std::min(a.y, b.y));
      const auto b1 = bin_of(std::max(a.y, b.y));
      for (std::size_t q = b0; q <= b1; ++q) bins_[q].push_back(static_cast<std::uint32_t>(k));
    }
  }

  const std::vector<Vec2>& vertices() const { return v_; }
  Vec2 lower() const { return lo_; }
  Vec2 upper() const { return hi_; }
  bool counter_clockwise() const { return ccw_; }

  int winding_number(Vec2 p) const {
    if (p.y < lo_.y || p.y > hi_.y || p.x < lo_.x || p.x > hi_.x) return 0;
    int wn = 0;
    for (const auto k : bins_[bin_of(p.y)]) {
      const Vec2 a = v_[k], b = v_[(k + 1) % v_.size()];
      const double side = cross(b - a, p - a);
      if (a.y <= p.y) {
        if (b.y > p.y && side > 0.0) ++wn;
      } else if (b.y <= p.y && side < 0.0) {
        --wn;
      }
    }
    return wn;
  }

  bool contains(Vec2 p) const { return winding_number(p) != 0; }

  /// Index of the closest vertex; lowest index wins ties.
  std::size_t nearest_vertex(Vec2 p) const {
    std::size_t best = 0;
    double d2 = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < v_.size(); ++k) {
      const Vec2 r = v_[k] - p;
      const double e = dot(r, r);
      if (e < d2) {
        d2 = e;
        best = k;
      }
    }
    return best;
  }

 private:
  std::size_t bin_of(double y) const {
    const double u = (y - lo_.y) / bin_h_;
    if (u <= 0.0) return 0;
    return std::min(nbins_ - 1, static_cast<std::size_t>(u));
  }

  std::vector<Vec2> v_;
  Vec2 lo_, hi_;
  bool ccw_ = true;
  std::size_t nbins_ = 1;
  double bin_h_ = 1.0;
  std::vector<std::vector<std::uint32_t>> bins_;
};

namespace dshape {
inline const ClosedPolyline& boundary_polyline() {
  static const ClosedPolyline poly = [] {
    std::vector<Vec2> v(kPolylinePoints);
    for (std::size_t k = 0; k < kPolylinePoints; ++k) {
      const double t = 2.0 * std::numbers::pi * static_cast<double>(k) /
                       static_cast<double>(kPolylinePoints);
      v[k] = curve(boundary_radius(), t);
    }
    return ClosedPolyline(std::move(v));
  }();
  return poly;
}
}  // namespace dshape

/// Closest boundary point with the inward unit normal there. `parameter` is
/// xi2 for the D-shape, the polar angle for a disk and edge index + local
/// coordinate for polygons.
struct BoundaryPoint {
  Vec2 point;
  Vec2 normal;
  double parameter = 0.0;
};

/// Shape plus cached acceleration data.
class ShapeQuery {
 public:
  explicit ShapeQuery(DomainShape shape) : shape_(std::move(shape)) {
    if (const auto* p = std::get_if<Polygon>(&shape_))
      poly_ = std::make_shared<ClosedPolyline>(p->vertices);
    if (const auto* d = std::get_if<Disk>(&shape_); d && !(d->radius > 0.0))
      throw GeometryError("disk radius must be positive");
  }

  const DomainShape& shape() const { return shape_; }

  bool inside(Vec2 p) const {
    return std::visit(
        [&](const auto& s) -> bool {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Disk>) {
            return norm(p - s.center) < s.radius;
          } else if constexpr (std::is_same_v<S, DShape>) {
            return dshape::boundary_polyline().contains(p);
          } else {
            return poly_->contains(p);
          }
        },
        shape_);
  }

  /// Bounding box of the boundary curve, when the shape is closed and
  /// bounded in the sense required by `classify`.
  std::optional<std::pair<Vec2, Vec2>> bounds() const {
    if (const auto* d = std::get_if<Disk>(&shape_))
      return std::pair{d->center - Vec2{d->radius, d->radius},
                       d->center + Vec2{d->radius, d->radius}};
    if (std::holds_alternative<DShape>(shape_))
      return std::pair{dshape::boundary_polyline().lower(), dshape::boundary_polyline().upper()};
    return std::nullopt;
  }

  BoundaryPoint project(Vec2 p) const {
    return std::visit(
        [&](const auto& s) -> BoundaryPoint {
          using S = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<S, Disk>) {
            return project_disk(s, p);
          } else if constexpr (std::is_same_v<S, DShape>) {
            return project_dshape(p);
          } else {
            return project_polygon(*poly_, p);
          }
        },
        shape_);
  }

 private:
  static BoundaryPoint project_disk(const Disk& d, Vec2 p) {
    const Vec2 r = p - d.center;
    const double len = norm(r);
    if (!(len > 0.0)) throw GeometryError("cannot project the disk centre to its boundary");
    const Vec2 u = r * (1.0 / len);
    return {d.center + u * d.radius, u * -1.0, std::atan2(u.y, u.x)};
  }

  static BoundaryPoint project_dshape(Vec2 p) {
    const auto& poly = dshape::boundary_polyline();
    const double s = dshape::boundary_radius();
    const double dt_vertex = 2.0 * std::numbers::pi / static_cast<double>(poly.vertices().size());
    const double t0 = dt_vertex * static_cast<double>(poly.nearest_vertex(p));
    double t = t0;
    bool converged = false;
    for (int it = 0; it < 50; ++it) {
      const Vec2 r = dshape::curve(s, t) - p;
      const Vec2 d1 = dshape::curve_dt(s, t);
      const Vec2 d2 = dshape::curve_dtt(s, t);
      const double g = dot(r, d1);
      double gp = dot(d1, d1) + dot(r, d2);
      if (!(gp > 0.0)) gp = dot(d1, d1);
      double step = g / gp;
      step = std::clamp(step, -2.0 * dt_vertex, 2.0 * dt_vertex);
      t -= step;
      if (std::abs(step) < 1e-15) {
        converged = true;
        break;
      }
    }
    if (!converged || std::abs(t - t0) > 4.0 * dt_vertex)
      throw GeometryError("D-shape boundary projection did not converge");
    const Vec2 x = dshape::curve(s, t);
    const Vec2 tan = dshape::curve_dt(s, t);
    const double len = norm(tan);
    // Curve is counter-clockwise in t, so the left normal points inward.
    const Vec2 n{-tan.y / len, tan.x / len};
    double xi2 = t / (2.0 * std::numbers::pi);
    xi2 -= std::floor(xi2);
    return {x, n, xi2};
  }

  static BoundaryPoint project_polygon(const ClosedPolyline& poly, Vec2 p) {
    const auto& v = poly.vertices();
    double best = std::numeric_limits<double>::infinity();
    BoundaryPoint out;
    for (std::size_t k = 0; k < v.size(); ++k) {
      const Vec2 a = v[k], b = v[(k + 1) % v.size()];
      const Vec2 e = b - a;
      const double len2 = dot(e, e);
      const double u = std::clamp(dot(p - a, e) / len2, 0.0, 1.0);
      const Vec2 q = a + e * u;
      const double d = norm(p - q);
      if (d < best) {
        best = d;
        out.point = q;
        out.parameter = static_cast<double>(k) + u;
        const double len = std::sqrt(len2);
        const Vec2 left{-e.y / len, e.x / len};
        const Vec2 edge_normal = poly.counter_clockwise() ? left : left * -1.0;
        const bool at_vertex = u <= 0.0 || u >= 1.0;
        out.normal = (at_vertex && d > 0.0) ? (q - p) * (1.0 / d) : edge_normal;
      }
    }
    return out;
  }

  DomainShape shape_;
  std::shared_ptr<const ClosedPolyline> poly_;
};

inline bool inside(const DomainShape& shape, Vec2 p) { return ShapeQuery(shape).inside(p); }

/// Closest point of the boundary to `xg` and the inward unit normal there.
inline BoundaryPoint project_to_boundary(const DomainShape& shape, Vec2 xg) {
  return ShapeQuery(shape).project(xg);
}

enum class NodeClass : std::uint8_t { kInterior = 0, kGhost = 1, kExterior = 2 };

/// Interpolation stencil over interior nodes (flat 2D indices).
struct Stencil {
  std::vector<std::size_t> nodes;
  std::vector<double> weights;
  int degree = -1;  // 2: Q2 (9 points), 1: Q1 (4 points), 0: one point
};

/// Exterior node whose value is extrapolated along the inward normal from
/// the boundary point x_p and two interior arm points x_p + h n, x_p + 2h n.
struct GhostPoint {
  std::size_t node = 0;
  std::array<std::size_t, 2> index{0, 0};
  int layer = 1;  // 1: first exterior layer; >1: transport band
  Vec2 position;
  Vec2 boundary_point;
  Vec2 normal;
  double distance = 0.0;  // |x_g - x_p|
  std::array<Vec2, 2> arm_points;
  std::array<double, 3> extrapolation_weights{1.0, 0.0, 0.0};  // (w_p, w_h, w_2h)
  std::array<Stencil, 2> arm_stencils;
  /// Interior node weights with both arm stencils folded in.
  std::vector<std::pair<std::size_t, double>> composed;

  double boundary_weight() const { return extrapolation_weights[0]; }
  int degree() const { return arm_stencils[0].degree; }

  /// value = w_p * g(x_p) + sum composed weights * interior values
  template <class Values>
  double extrapolate(const Values& interior, double boundary_value) const {
    double v = boundary_weight() * boundary_value;
    for (const auto& [k, w] : composed) v += w * interior[k];
    return v;
  }
};

class EmbeddedDomain;
EmbeddedDomain classify(const DomainShape& shape, const Grid& grid);
EmbeddedDomain build_ghost_stencils(EmbeddedDomain domain, int band_depth);

class EmbeddedDomain {
 public:
  const DomainShape& shape() const { return query_->shape(); }
  const ShapeQuery& query() const { return *query_; }
  const Grid& grid() const { return grid_; }
  std::size_t nx() const { return grid_.n(0); }
  std::size_t ny() const { return grid_.n(1); }
  std::size_t flat(std::size_t i, std::size_t j) const { return i * ny() + j; }
  Vec2 position(std::size_t i, std::size_t j) const {
    return {grid_.axis(0).coord(static_cast<std::ptrdiff_t>(i)),
            grid_.axis(1).coord(static_cast<std::ptrdiff_t>(j))};
  }

  NodeClass node_class(std::size_t f) const {
    return layer_[f] == 0 ? NodeClass::kInterior
                          : (layer_[f] == 1 ? NodeClass::kGhost : NodeClass::kExterior);
  }
  bool is_interior(std::size_t f) const { return layer_[f] == 0; }
  /// 0 interior, 1 ghost, k: k steps (4-neighbour) from the interior,
  /// kFar beyond the search depth.
  int layer(std::size_t f) const { return layer_[f]; }
  std::span<const std::uint8_t> interior_mask() const { return mask_; }
  std::size_t interior_count() const { return interior_count_; }

  const std::vector<GhostPoint>& ghosts() const { return ghosts_; }
  const std::vector<GhostPoint>& band() const { return band_; }
  bool stencils_built() const { return built_; }
  int band_depth() const { return band_depth_; }

  /// 1 on interior nodes and every node with an extrapolation record.
  std::vector<std::uint8_t> extended_mask() const {
    std::vector<std::uint8_t> m = mask_;
    for (const auto& g : ghosts_) m[g.node] = 1;
    for (const auto& g : band_) m[g.node] = 1;
    return m;
  }

  /// Overwrites ghost and band values of a 2D field (or of the 2D plane
  /// starting at `offset` with node stride `stride`) by normal
  /// extrapolation with Dirichlet data `g`.
  template <class BoundaryValue>
  void extend(std::span<double> plane, BoundaryValue&& g, std::size_t offset = 0,
              std::size_t stride = 1) const {
    auto at = [&](std::size_t k) -> double& { return plane[offset + k * stride]; };
    auto apply = [&](const GhostPoint& gp) {
      double v = gp.boundary_weight() * g(gp.boundary_point);
      for (const auto& [k, w] : gp.composed) v += w * at(k);
      at(gp.node) = v;
    };
    for (const auto& gp : ghosts_) apply(gp);
    for (const auto& gp : band_) apply(gp);
  }
  void extend(std::span<double> plane, std::size_t offset = 0, std::size_t stride = 1) const {
    extend(plane, [](Vec2) { return 0.0; }, offset, stride);
  }

  static constexpr int kFar = 255;

 private:
  friend EmbeddedDomain classify(const DomainShape& shape, const Grid& grid);
  friend EmbeddedDomain build_ghost_stencils(EmbeddedDomain domain, int band_depth);

  std::shared_ptr<const ShapeQuery> query_;
  Grid grid_;
  std::vector<std::uint8_t> layer_;
  std::vector<std::uint8_t> mask_;
  std::size_t interior_count_ = 0;
  std::vector<GhostPoint> ghosts_;
  std::vector<GhostPoint> band_;
  bool built_ = false;
  int band_depth_ = 0;
};

namespace detail {

inline constexpr int kLayerSearch = 8;

/// Lagrange weights of nodes `xs` for evaluation at `x`.
inline std::vector<double> lagrange_weights(std::span<const double> xs, double x) {
  std::vector<double> w(xs.size(), 1.0);
  for (std::size_t a = 0; a < xs.size(); ++a)
    for (std::size_t b = 0; b < xs.size(); ++b)
      if (a != b) w[a] *= (x - xs[b]) / (xs[a] - xs[b]);
  return w;
}

/// Quadratic Lagrange weights for evaluating at the ghost (distance 0) from
/// samples at distances d, d+h, d+2h along the normal.
inline std::array<double, 3> normal_extrapolation_weights(double d, double h) {
  return {(d + h) * (d + 2.0 * h) / (2.0 * h * h), -d * (d + 2.0 * h) / (h * h),
          d * (d + h) / (2.0 * h * h)};
}

struct LineSample {
  double line_coord;
  std::vector<double> along;      // unwrapped coordinates along the line
  std::vector<std::size_t> nodes;  // flat indices
};

/// Tensor Lagrange stencil of the given degree built on the first
/// degree+1 grid lines crossed by the ray x_p + t n (t > 0), taking on each
/// line the degree+1 interior nodes nearest to the crossing point.
inline std::optional<std::array<Stencil, 2>> tensor_stencil(const EmbeddedDomain& dom, Vec2 xp,
                                                            Vec2 n, int degree,
                                                            const std::array<Vec2, 2>& targets) {
  const Grid& g = dom.grid();
  const std::size_t a = std::abs(n.y) >= std::abs(n.x) ? 1 : 0;  // line-indexing axis
  const std::size_t b = 1 - a;
  const Axis& ax_a = g.axis(a);
  const Axis& ax_b = g.axis(b);
  const double na = a == 1 ? n.y : n.x;
  const int s = na > 0.0 ? 1 : -1;
  const double u = (xp[a] - ax_a.min()) / ax_a.spacing();
  std::ptrdiff_t l = s > 0 ? static_cast<std::ptrdiff_t>(std::floor(u)) + 1
                           : static_cast<std::ptrdiff_t>(std::ceil(u)) - 1;
  const auto count = static_cast<std::size_t>(degree + 1);
  std::vector<LineSample> lines;
  for (std::size_t m = 0; m < count; ++m, l += s) {
    if (!ax_a.is_periodic() && (l < 0 || l >= static_cast<std::ptrdiff_t>(ax_a.n())))
      return std::nullopt;
    const double c = ax_a.coord(l);
    const double t = (c - xp[a]) / na;
    const double pb = xp[b] + t * (b == 1 ? n.y : n.x);
    const auto k0 = static_cast<std::ptrdiff_t>(std::floor((pb - ax_b.min()) / ax_b.spacing()));
    std::vector<std::pair<double, std::ptrdiff_t>> cand;
    for (std::ptrdiff_t k = k0 - degree - 1; k <= k0 + degree + 2; ++k) {
      if (!ax_b.is_periodic() && (k < 0 || k >= static_cast<std::ptrdiff_t>(ax_b.n()))) continue;
      cand.emplace_back(std::abs(ax_b.coord(k) - pb), k);
    }
    std::sort(cand.begin(), cand.end());
    LineSample ls{c, {}, {}};
    const std::size_t la = ax_a.resolve(l);
    for (const auto& [dist, k] : cand) {
      const std::size_t kb = ax_b.resolve(k);
      const std::size_t node = a == 1 ? dom.flat(kb, la) : dom.flat(la, kb);
      if (!dom.is_interior(node)) continue;
      ls.along.push_back(ax_b.coord(k));
      ls.nodes.push_back(node);
      if (ls.nodes.size() == count) break;
    }
    if (ls.nodes.size() < count) return std::nullopt;
    lines.push_back(std::move(ls));
  }
  std::array<Stencil, 2> out;
  for (std::size_t q = 0; q < 2; ++q) {
    const Vec2 x = targets[q];
    std::vector<double> line_coords;
    for (const auto& ls : lines) line_coords.push_back(ls.line_coord);
    const auto wa = lagrange_weights(line_coords, x[a]);
    Stencil st;
    st.degree = degree;
    for (std::size_t m = 0; m < lines.size(); ++m) {
      const auto wb = lagrange_weights(lines[m].along, x[b]);
      for (std::size_t k = 0; k < wb.size(); ++k) {
        st.nodes.push_back(lines[m].nodes[k]);
        st.weights.push_back(wa[m] * wb[k]);
      }
    }
    out[q] = std::move(st);
  }
  return out;
}

/// Nearest interior node to x (lowest flat index on ties).
inline std::optional<std::size_t> nearest_interior(const EmbeddedDomain& dom, Vec2 x) {
  const Grid& g = dom.grid();
  const auto ci = static_cast<std::ptrdiff_t>(std::lround((x.x - g.axis(0).min()) / g.spacing(0)));
  const auto cj = static_cast<std::ptrdiff_t>(std::lround((x.y - g.axis(1).min()) / g.spacing(1)));
  std::optional<std::size_t> best;
  double best_d = std::numeric_limits<double>::infinity();
  constexpr std::ptrdiff_t r = 4;
  for (std::ptrdiff_t i = ci - r; i <= ci + r; ++i) {
    for (std::ptrdiff_t j = cj - r; j <= cj + r; ++j) {
      if (!g.axis(0).is_periodic() && (i < 0 || i >= static_cast<std::ptrdiff_t>(g.n(0)))) continue;
      if (!g.axis(1).is_periodic() && (j < 0 || j >= static_cast<std::ptrdiff_t>(g.n(1)))) continue;
      const std::size_t node = dom.flat(g.axis(0).resolve(i), g.axis(1).resolve(j));
      if (!dom.is_interior(node)) continue;
      const double d = norm(Vec2{g.axis(0).coord(i), g.axis(1).coord(j)} - x);
      if (d < best_d || (d == best_d && best && node < *best)) {
        best_d = d;
        best = node;
      }
    }
  }
  return best;
}

inline GhostPoint make_ghost(const EmbeddedDomain& dom, std::size_t i, std::size_t j, int layer) {
  GhostPoint gp;
  gp.node = dom.flat(i, j);
  gp.index = {i, j};
  gp.layer = layer;
  gp.position = dom.position(i, j);
  const BoundaryPoint bp = dom.query().project(gp.position);
  gp.boundary_point = bp.point;
  gp.normal = bp.normal;
  gp.distance = norm(gp.position - bp.point);
  const double h = std::min(dom.grid().spacing(0), dom.grid().spacing(1));
  gp.arm_points = {bp.point + bp.normal * h, bp.point + bp.normal * (2.0 * h)};
  gp.extrapolation_weights = normal_extrapolation_weights(gp.distance, h);

  std::optional<std::array<Stencil, 2>> arms;
  const bool arms_inside =
      dom.query().inside(gp.arm_points[0]) && dom.query().inside(gp.arm_points[1]);
  if (arms_inside) {
    arms = tensor_stencil(dom, bp.point, bp.normal, 2, gp.arm_points);
    if (!arms) arms = tensor_stencil(dom, bp.point, bp.normal, 1, gp.arm_points);
  }
  if (!arms) {
    std::array<Stencil, 2> q0;
    for (std::size_t q = 0; q < 2; ++q) {
      const auto node = nearest_interior(dom, gp.arm_points[q]);
      if (!node)
        throw GeometryError("no interior node available to extrapolate ghost (" +
                            std::to_string(i) + ", " + std::to_string(j) + ")");
      q0[q] = Stencil{{*node}, {1.0}, 0};
    }
    arms = std::move(q0);
  }
  gp.arm_stencils = std::move(*arms);

  std::map<std::size_t, double> acc;
  for (std::size_t q = 0; q < 2; ++q) {
    const double w = gp.extrapolation_weights[q + 1];
    const auto& st = gp.arm_stencils[q];
    for (std::size_t k = 0; k < st.nodes.size(); ++k) acc[st.nodes[k]] += w * st.weights[k];
  }
  gp.composed.assign(acc.begin(), acc.end());
  return gp;
}

}  // namespace detail

/// Classifies every node of a 2D grid as interior, ghost (first exterior
/// layer) or far exterior. Ghost stencils are not built yet.
inline EmbeddedDomain classify(const DomainShape& shape, const Grid& grid) {
  if (grid.dim() != 2) throw ConfigError("embedded domains need a 2D grid");
  EmbeddedDomain dom;
  dom.query_ = std::make_shared<const ShapeQuery>(shape);
  dom.grid_ = grid;
  if (const auto box = dom.query_->bounds()) {
    const auto& [lo, hi] = *box;
    for (std::size_t k = 0; k < 2; ++k) {
      const Axis& ax = grid.axis(k);
      if (ax.is_periodic()) continue;
      if (!(ax.min() < lo[k] && hi[k] < ax.max()))
        throw ConfigError("domain boundary is not strictly inside the grid box along axis '" +
                          ax.name() + "'");
    }
  }
  const std::size_t nx = grid.n(0), ny = grid.n(1);
  dom.layer_.assign(nx * ny, EmbeddedDomain::kFar);
  dom.mask_.assign(nx * ny, 0);
  std::deque<std::size_t> frontier;
  for (std::size_t i = 0; i < nx; ++i) {
    for (std::size_t j = 0; j < ny; ++j) {
      if (dom.query_->inside(dom.position(i, j))) {
        const auto f = dom.flat(i, j);
        dom.layer_[f] = 0;
        dom.mask_[f] = 1;
        ++dom.interior_count_;
        frontier.push_back(f);
      }
    }
  }
  if (dom.interior_count_ == 0) throw GeometryError("domain contains no grid node");
  // Breadth-first 4-neighbour distance from the interior.
  while (!frontier.empty()) {
    const auto f = frontier.front();
    frontier.pop_front();
    const int next = dom.layer_[f] + 1;
    if (next > detail::kLayerSearch) continue;
    const auto i = static_cast<std::ptrdiff_t>(f / ny);
    const auto j = static_cast<std::ptrdiff_t>(f % ny);
    const std::array<std::array<std::ptrdiff_t, 2>, 4> nb{{{i - 1, j}, {i + 1, j}, {i, j - 1}, {i, j + 1}}};
    for (const auto& [a, b] : nb) {
      if (!grid.axis(0).is_periodic() && (a < 0 || a >= static_cast<std::ptrdiff_t>(nx))) continue;
      if (!grid.axis(1).is_periodic() && (b < 0 || b >= static_cast<std::ptrdiff_t>(ny))) continue;
      const auto g = dom.flat(grid.axis(0).resolve(a), grid.axis(1).resolve(b));
      if (dom.layer_[g] > next) {
        dom.layer_[g] = static_cast<std::uint8_t>(next);
        frontier.push_back(g);
      }
    }
  }
  return dom;
}

/// Builds extrapolation records for every ghost (layer 1) and, when
/// band_depth > 1, for exterior nodes up to that many steps from the
/// interior.
inline EmbeddedDomain build_ghost_stencils(EmbeddedDomain domain, int band_depth = 1) {
  if (band_depth < 1 || band_depth > detail::kLayerSearch)
    throw ConfigError("band depth must be in [1, 8]");
  domain.ghosts_.clear();
  domain.band_.clear();
  for (std::size_t i = 0; i < domain.nx(); ++i) {
    for (std::size_t j = 0; j < domain.ny(); ++j) {
      const int layer = domain.layer_[domain.flat(i, j)];
      if (layer == 0 || layer > band_depth) continue;
      auto gp = detail::make_ghost(domain, i, j, layer);
      (layer == 1 ? domain.ghosts_ : domain.band_).push_back(std::move(gp));
    }
  }
  domain.built_ = true;
  domain.band_depth_ = band_depth;
  return domain;
}

/// Convenience: classify + stencils.
inline EmbeddedDomain make_domain(const DomainShape& shape, const Grid& grid, int band_depth = 1) {
  return build_ghost_stencils(classify(shape, grid), band_depth);
}

/// Debug dump: one row per node, extrapolation data on ghost/band rows.
inline void write_domain_csv(const std::string& path, const EmbeddedDomain& dom) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write domain dump: " + path);
  out << "i,j,class,layer,xp,yp,nx,ny,w_p,w_h,w_2h,degree\n" << std::setprecision(17);
  std::map<std::size_t, const GhostPoint*> rec;
  for (const auto& g : dom.ghosts()) rec[g.node] = &g;
  for (const auto& g : dom.band()) rec[g.node] = &g;
  static constexpr const char* names[] = {"interior", "ghost", "exterior"};
  for (std::size_t i = 0; i < dom.nx(); ++i) {
    for (std::size_t j = 0; j < dom.ny(); ++j) {
      const auto f = dom.flat(i, j);
      out << i << ',' << j << ',' << names[static_cast<int>(dom.node_class(f))] << ','
          << dom.layer(f);
      if (const auto it = rec.find(f); it != rec.end()) {
        const auto& g = *it->second;
        out << ',' << g.boundary_point.x << ',' << g.boundary_point.y << ',' << g.normal.x << ','
            << g.normal.y << ',' << g.extrapolation_weights[0] << ',' << g.extrapolation_weights[1]
            << ',' << g.extrapolation_weights[2] << ',' << g.degree() << '\n';
      } else {
        out << ",,,,,,,,\n";
      }
    }
  }
}

}  // namespace mixsl
