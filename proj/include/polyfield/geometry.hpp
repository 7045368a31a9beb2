#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace polyfield {

/// Pixel-space point. x grows to the right, y grows downwards.
using Point2 = Eigen::Vector2d;

/// Open chain of points.
using Polyline = std::vector<Point2>;

/// Consecutive vertices closer than this are treated as duplicates.
inline constexpr double kVertexTolerance = 1e-9;

/// Closed vertex loop; the last vertex connects back to the first.
///
/// The constructor only checks that there are at least three finite vertices.
/// Orientation and duplicate removal are applied by normalize_ring(), which is
/// what loaders and the polygon builders in this library go through.
class PolygonRing {
 public:
  explicit PolygonRing(std::vector<Point2> vertices);

  std::size_t size() const { return vertices_.size(); }
  const Point2& operator[](std::size_t i) const { return vertices_[i]; }
  Point2& operator[](std::size_t i) { return vertices_[i]; }

  /// Vertex with cyclic indexing; any integer offset is valid.
  const Point2& at_cyclic(std::ptrdiff_t i) const;

  const std::vector<Point2>& vertices() const { return vertices_; }
  std::vector<Point2>& vertices() { return vertices_; }

  auto begin() const { return vertices_.begin(); }
  auto end() const { return vertices_.end(); }

  /// Start and end of edge i (vertex i to vertex i+1).
  const Point2& edge_start(std::size_t i) const { return vertices_[i]; }
  const Point2& edge_end(std::size_t i) const { return vertices_[(i + 1) % vertices_.size()]; }

  friend bool operator==(const PolygonRing& a, const PolygonRing& b) { return a.vertices_ == b.vertices_; }

 private:
  std::vector<Point2> vertices_;
};

/// Collapses consecutive duplicates (within kVertexTolerance) and orients the
/// ring counter-clockwise. Throws ValidationError if fewer than 3 vertices remain.
PolygonRing normalize_ring(std::vector<Point2> vertices);

/// Shoelace area, positive for counter-clockwise rings.
double signed_area(std::span<const Point2> pts);
double signed_area(const PolygonRing& ring);

double perimeter(const PolygonRing& ring);
PolygonRing reversed(const PolygonRing& ring);
PolygonRing translated(const PolygonRing& ring, const Point2& offset);
/// Rotation by `degrees` about `center`.
PolygonRing rotated(const PolygonRing& ring, double degrees, const Point2& center);

/// Rotate the vertex order so that vertex `start` becomes vertex 0.
PolygonRing with_start(const PolygonRing& ring, std::size_t start);

/// z-component of (b - a) x (c - a).
inline double orient(const Point2& a, const Point2& b, const Point2& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

/// Closed-segment intersection test, including touching and collinear overlap.
bool segments_intersect(const Point2& a, const Point2& b, const Point2& c, const Point2& d);

/// Minimum distance between two closed segments.
double segment_distance(const Point2& a, const Point2& b, const Point2& c, const Point2& d);

/// True iff no two non-adjacent edges touch and no adjacent edges fold back
/// onto each other.
bool is_simple(const PolygonRing& ring);

struct SegmentProjection {
  Point2 point;
  double t = 0.0;  // parameter along the segment in [0, 1]
  double distance = 0.0;
};

SegmentProjection closest_point_on_segment(const Point2& p, const Point2& a, const Point2& b);

struct RingProjection {
  Point2 point;
  std::size_t edge = 0;
  double t = 0.0;
  double distance = 0.0;
};

/// Nearest point on the boundary polyline of `ring`. Ties go to the lowest edge index.
RingProjection closest_point_on_ring(const Point2& p, const PolygonRing& ring);

/// Even-odd containment of a point; points within kVertexTolerance of the
/// boundary count as inside.
bool contains(const PolygonRing& ring, const Point2& p);

/// Douglas-Peucker simplification. Endpoints are kept.
Polyline simplify_dp(const Polyline& line, double epsilon);

/// Closed-curve Douglas-Peucker: the ring is split at its farthest vertex pair
/// and both halves are simplified as open chains.
PolygonRing simplify_dp(const PolygonRing& ring, double epsilon);

/// Indices (ascending) of the vertices simplify_dp(ring, epsilon) keeps.
std::vector<std::size_t> simplify_dp_indices(const PolygonRing& ring, double epsilon);

/// Signed exterior turn angle at vertex i in degrees, range (-180, 180].
/// Positive is a left turn, which is a convex vertex in a counter-clockwise ring.
double turn_angle(const PolygonRing& ring, std::size_t i);

struct Box {
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
};

Box bounding_box(const PolygonRing& ring);

}  // namespace polyfield
