#include "hsi/geom.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <tuple>

namespace hsi::geom {
namespace {

double cross(const Point2& a, const Point2& b) { return a.x() * b.y() - a.y() * b.x(); }

double orient(const Point2& a, const Point2& b, const Point2& c) { return cross(b - a, c - a); }

bool on_segment(const Point2& a, const Point2& b, const Point2& p, double eps) {
  return std::abs(orient(a, b, p)) <= eps && p.x() >= std::min(a.x(), b.x()) - eps &&
         p.x() <= std::max(a.x(), b.x()) + eps && p.y() >= std::min(a.y(), b.y()) - eps &&
         p.y() <= std::max(a.y(), b.y()) + eps;
}

bool segments_touch(const Point2& a, const Point2& b, const Point2& c, const Point2& d, double eps) {
  const double o1 = orient(a, b, c), o2 = orient(a, b, d);
  const double o3 = orient(c, d, a), o4 = orient(c, d, b);
  if (((o1 > eps && o2 < -eps) || (o1 < -eps && o2 > eps)) && ((o3 > eps && o4 < -eps) || (o3 < -eps && o4 > eps)))
    return true;
  return on_segment(a, b, c, eps) || on_segment(a, b, d, eps) || on_segment(c, d, a, eps) || on_segment(c, d, b, eps);
}

double extent(const std::vector<Point2>& v) {
  double s = 0.0;
  for (const auto& p : v) s = std::max(s, p.cwiseAbs().maxCoeff());
  return std::max(s, 1.0);
}

double distance_to_segment(const Point2& a, const Point2& b, const Point2& p) {
  const Point2 ab = b - a;
  const double len2 = ab.squaredNorm();
  const double t = len2 > 0 ? std::clamp((p - a).dot(ab) / len2, 0.0, 1.0) : 0.0;
  return (a + t * ab - p).norm();
}

}  // namespace

double signed_area(const std::vector<Point2>& vertices) {
  double twice = 0.0;
  const std::size_t n = vertices.size();
  for (std::size_t i = 0; i < n; ++i) twice += cross(vertices[i], vertices[(i + 1) % n]);
  return 0.5 * twice;
}

bool is_simple(const std::vector<Point2>& v) {
  const std::size_t n = v.size();
  if (n < 3) return false;
  const double scale = extent(v);
  const double eps = 1e-12 * scale * scale;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = v[i];
    const Point2& b = v[(i + 1) % n];
    if ((b - a).norm() <= 1e-12 * scale) return false;
    // Adjacent edge folding back onto this one.
    const Point2& c = v[(i + 2) % n];
    if (std::abs(orient(a, b, c)) <= eps && (b - a).dot(c - b) < 0) return false;
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;  // shares vertex 0
      if (segments_touch(a, b, v[j], v[(j + 1) % n], eps)) return false;
    }
  }
  return true;
}

Polygon::Polygon(std::vector<Point2> vertices) : vertices_(std::move(vertices)) {
  if (vertices_.size() < 3)
    throw InvalidShape("polygon needs at least 3 vertices, got " + std::to_string(vertices_.size()));
  for (const auto& p : vertices_)
    if (!p.allFinite()) throw InvalidShape("polygon vertices must be finite");
  const double scale = extent(vertices_);
  const double area = signed_area(vertices_);
  if (std::abs(area) <= 1e-12 * scale * scale) throw InvalidShape("polygon is degenerate (zero area)");
  if (!is_simple(vertices_)) throw InvalidShape("polygon is self-intersecting");
  if (area < 0) std::reverse(vertices_.begin(), vertices_.end());
}

Polygon Polygon::translated(const Point2& offset) const {
  Polygon out = *this;
  for (auto& p : out.vertices_) p += offset;
  return out;
}

PolygonMetrics polygon_metrics(const Polygon& shape) {
  const auto& v = shape.vertices();
  if (v.size() < 3) throw InvalidShape("polygon needs at least 3 vertices");
  const std::size_t n = v.size();
  // Accumulate relative to the first vertex for better conditioning.
  const Point2 o = v[0];
  double twice = 0.0;
  Point2 acc = Point2::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 a = v[i] - o, b = v[(i + 1) % n] - o;
    const double c = cross(a, b);
    twice += c;
    acc += c * (a + b);
  }
  PolygonMetrics m;
  m.area = 0.5 * twice;
  m.centroid = o + acc / (3.0 * twice);
  return m;
}

bool strictly_inside(const Polygon& shape, const Point2& p, double eps) {
  const auto& v = shape.vertices();
  const std::size_t n = v.size();
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    if (distance_to_segment(v[j], v[i], p) <= eps) return false;
    if ((v[i].y() > p.y()) != (v[j].y() > p.y())) {
      const double x = v[j].x() + (p.y() - v[j].y()) * (v[i].x() - v[j].x()) / (v[i].y() - v[j].y());
      if (p.x() < x) inside = !inside;
    }
  }
  return inside;
}

Formation fill_polygon_uniform(const Polygon& shape, int agents) {
  if (agents < 1) throw InvalidInput("agent count must be positive");
  const auto& v = shape.vertices();
  if (v.size() < 3) throw InvalidShape("polygon needs at least 3 vertices");

  const PolygonMetrics metrics = polygon_metrics(shape);
  Point2 lo = v[0], hi = v[0];
  for (const auto& p : v) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  const Point2 size = hi - lo;
  const double box_area = size.x() * size.y();
  const double eps = 1e-12 * extent(v);

  struct Slot {
    int row, col;
    Point2 p;
    double dist2;
  };

  int side = std::max(1, static_cast<int>(std::ceil(std::sqrt(agents * box_area / metrics.area))));
  std::vector<Slot> slots;
  for (; side <= kMaxGridSide; ++side) {
    slots.clear();
    const double dx = size.x() / side, dy = size.y() / side;
    for (int r = 0; r < side; ++r) {
      for (int c = 0; c < side; ++c) {
        const Point2 p(lo.x() + (c + 0.5) * dx, lo.y() + (r + 0.5) * dy);
        if (strictly_inside(shape, p, eps)) slots.push_back({r, c, p, (p - metrics.centroid).squaredNorm()});
      }
    }
    if (static_cast<int>(slots.size()) >= agents) break;
  }
  if (static_cast<int>(slots.size()) < agents)
    throw InvalidShape("shape too thin to hold " + std::to_string(agents) + " agents on a grid of side " +
                       std::to_string(kMaxGridSide));

  if (static_cast<int>(slots.size()) > agents) {
    std::stable_sort(slots.begin(), slots.end(), [](const Slot& a, const Slot& b) {
      if (a.dist2 != b.dist2) return a.dist2 < b.dist2;
      if (a.p.y() != b.p.y()) return a.p.y() < b.p.y();
      return a.p.x() < b.p.x();
    });
    slots.resize(agents);
    std::sort(slots.begin(), slots.end(),
              [](const Slot& a, const Slot& b) { return std::tie(a.row, a.col) < std::tie(b.row, b.col); });
  }

  Formation f;
  f.z.resize(agents, 2);
  for (int i = 0; i < agents; ++i) f.z.row(i) = slots[i].p.transpose();
  const Point2 mean = f.z.colwise().mean().transpose();
  f.z.rowwise() -= mean.transpose();
  f.density = agents / metrics.area;
  f.source_polygon = shape.translated(-mean);
  return f;
}

Polygon refine_to(const Polygon& shape, std::size_t count) {
  std::vector<Point2> v = shape.vertices();
  while (v.size() < count) {
    const std::size_t n = v.size();
    double longest = 0.0;
    for (std::size_t i = 0; i < n; ++i) longest = std::max(longest, (v[(i + 1) % n] - v[i]).norm());
    std::size_t pick = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if ((v[(i + 1) % n] - v[i]).norm() >= longest * (1.0 - 1e-12)) {
        pick = i;
        break;
      }
    }
    const Point2 mid = 0.5 * (v[pick] + v[(pick + 1) % n]);
    v.insert(v.begin() + static_cast<std::ptrdiff_t>(pick + 1), mid);
  }
  return Polygon(std::move(v));
}

std::pair<Polygon, Polygon> match_vertex_counts(const Polygon& a, const Polygon& b) {
  const std::size_t n = std::max(a.size(), b.size());
  return {refine_to(a, n), refine_to(b, n)};
}

Intention make_intention(Polygon shape, double scale, double rotation, Point2 centroid) {
  if (!(scale > 0.0) || !std::isfinite(scale)) throw InvalidInput("intention scale must be positive");
  if (!std::isfinite(rotation) || !centroid.allFinite()) throw InvalidInput("intention rotation/centroid must be finite");
  return Intention{std::move(shape), scale, wrap_angle(rotation), centroid};
}

BehaviorGoal intention_to_goal(const Intention& intention, int agents) {
  return BehaviorGoal{fill_polygon_uniform(intention.shape, agents), intention.scale, intention.rotation,
                      intention.centroid};
}

}  // namespace hsi::geom
