#pragma once

#include "hsi/types.hpp"

#include <utility>
#include <vector>

namespace hsi::geom {

/// Simple polygon with positive area, vertices stored counter-clockwise.
class Polygon {
 public:
  Polygon() = default;
  /// Validates and normalises orientation. Throws InvalidShape for fewer than
  /// three vertices, non-finite coordinates, zero area or self-intersection.
  explicit Polygon(std::vector<Point2> vertices);

  const std::vector<Point2>& vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }
  const Point2& operator[](std::size_t i) const { return vertices_[i]; }

  Polygon translated(const Point2& offset) const;

 private:
  std::vector<Point2> vertices_;
};

struct PolygonMetrics {
  double area = 0.0;
  Point2 centroid = Point2::Zero();
};

/// Shoelace area and area centroid.
PolygonMetrics polygon_metrics(const Polygon& shape);

/// Signed shoelace area (positive for counter-clockwise order).
double signed_area(const std::vector<Point2>& vertices);

/// True when no two non-adjacent edges touch and no adjacent edges fold back.
bool is_simple(const std::vector<Point2>& vertices);

/// Strict interior test: points on (or within `eps` of) the boundary are outside.
bool strictly_inside(const Polygon& shape, const Point2& point, double eps = 1e-12);

/// Centroid-centred agent slots that depict a shape.
struct Formation {
  Matrix2Xr z;
  double density = 0.0;   ///< agents per unit area of the source polygon
  Polygon source_polygon; ///< translated into the same frame as z
};

/// Regular r x r grid over the bounding box (cell centres), refined until at
/// least M centres fall strictly inside; the M closest to the polygon centroid
/// are kept in row-major grid order and recentred to zero mean.
/// Throws InvalidShape when the grid side would exceed kMaxGridSide.
Formation fill_polygon_uniform(const Polygon& shape, int agents);

inline constexpr int kMaxGridSide = 512;

/// Splits the longest edges of the polygon with fewer vertices at their
/// midpoints (lowest edge index on ties) until both have the same count.
std::pair<Polygon, Polygon> match_vertex_counts(const Polygon& a, const Polygon& b);

/// Adds midpoints to `shape` until it has `count` vertices.
Polygon refine_to(const Polygon& shape, std::size_t count);

struct Intention {
  Polygon shape;
  double scale = 1.0;
  double rotation = 0.0;  ///< radians, normalised to (-pi, pi]
  Point2 centroid = Point2::Zero();
};

/// Validates scale and wraps the rotation.
Intention make_intention(Polygon shape, double scale, double rotation, Point2 centroid);

struct BehaviorGoal {
  Formation formation;
  double scale = 1.0;
  double rotation = 0.0;
  Point2 centroid = Point2::Zero();
};

BehaviorGoal intention_to_goal(const Intention& intention, int agents);

}  // namespace hsi::geom
