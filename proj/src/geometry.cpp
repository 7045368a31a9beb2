#include "polyfield/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <utility>

#include "polyfield/error.hpp"

namespace polyfield {

PolygonRing::PolygonRing(std::vector<Point2> vertices) : vertices_(std::move(vertices)) {
  if (vertices_.size() < 3) {
    throw ValidationError("polygon ring needs at least 3 vertices");
  }
  for (const auto& v : vertices_) {
    if (!v.allFinite()) {
      throw ValidationError("polygon ring has a non-finite vertex");
    }
  }
}

const Point2& PolygonRing::at_cyclic(std::ptrdiff_t i) const {
  const auto n = static_cast<std::ptrdiff_t>(vertices_.size());
  return vertices_[static_cast<std::size_t>(((i % n) + n) % n)];
}

PolygonRing normalize_ring(std::vector<Point2> vertices) {
  std::vector<Point2> out;
  out.reserve(vertices.size());
  for (const auto& v : vertices) {
    if (out.empty() || (v - out.back()).norm() > kVertexTolerance) {
      out.push_back(v);
    }
  }
  while (out.size() > 1 && (out.front() - out.back()).norm() <= kVertexTolerance) {
    out.pop_back();
  }
  if (out.size() < 3) {
    throw ValidationError("polygon ring has fewer than 3 distinct vertices");
  }
  if (signed_area(out) < 0.0) {
    std::reverse(out.begin(), out.end());
  }
  return PolygonRing(std::move(out));
}

double signed_area(std::span<const Point2> pts) {
  const std::size_t n = pts.size();
  if (n < 3) return 0.0;
  double twice = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& a = pts[i];
    const Point2& b = pts[(i + 1) % n];
    twice += a.x() * b.y() - b.x() * a.y();
  }
  return 0.5 * twice;
}

double signed_area(const PolygonRing& ring) { return signed_area(std::span<const Point2>(ring.vertices())); }

double perimeter(const PolygonRing& ring) {
  double total = 0.0;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    total += (ring.edge_end(i) - ring.edge_start(i)).norm();
  }
  return total;
}

PolygonRing reversed(const PolygonRing& ring) {
  std::vector<Point2> v(ring.vertices().rbegin(), ring.vertices().rend());
  return PolygonRing(std::move(v));
}

PolygonRing translated(const PolygonRing& ring, const Point2& offset) {
  std::vector<Point2> v = ring.vertices();
  for (auto& p : v) p += offset;
  return PolygonRing(std::move(v));
}

PolygonRing rotated(const PolygonRing& ring, double degrees, const Point2& center) {
  const double r = degrees * std::numbers::pi / 180.0;
  Eigen::Matrix2d rot;
  rot << std::cos(r), -std::sin(r), std::sin(r), std::cos(r);
  std::vector<Point2> v = ring.vertices();
  for (auto& p : v) p = center + rot * (p - center);
  return PolygonRing(std::move(v));
}

PolygonRing with_start(const PolygonRing& ring, std::size_t start) {
  std::vector<Point2> v = ring.vertices();
  std::rotate(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(start % v.size()), v.end());
  return PolygonRing(std::move(v));
}

namespace {

bool on_segment(const Point2& a, const Point2& b, const Point2& p) {
  return std::min(a.x(), b.x()) <= p.x() && p.x() <= std::max(a.x(), b.x()) && std::min(a.y(), b.y()) <= p.y() &&
         p.y() <= std::max(a.y(), b.y());
}

int sign(double v) { return (v > 0.0) - (v < 0.0); }

}  // namespace

bool segments_intersect(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  const int o1 = sign(orient(a, b, c));
  const int o2 = sign(orient(a, b, d));
  const int o3 = sign(orient(c, d, a));
  const int o4 = sign(orient(c, d, b));
  if (o1 != o2 && o3 != o4) return true;
  if (o1 == 0 && on_segment(a, b, c)) return true;
  if (o2 == 0 && on_segment(a, b, d)) return true;
  if (o3 == 0 && on_segment(c, d, a)) return true;
  if (o4 == 0 && on_segment(c, d, b)) return true;
  return false;
}

double segment_distance(const Point2& a, const Point2& b, const Point2& c, const Point2& d) {
  if (segments_intersect(a, b, c, d)) return 0.0;
  return std::min({closest_point_on_segment(a, c, d).distance, closest_point_on_segment(b, c, d).distance,
                   closest_point_on_segment(c, a, b).distance, closest_point_on_segment(d, a, b).distance});
}

bool is_simple(const PolygonRing& ring) {
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    if ((ring.edge_end(i) - ring.edge_start(i)).norm() <= kVertexTolerance) return false;
  }
  // Adjacent edges may only share their common vertex: reject a fold-back.
  for (std::size_t i = 0; i < n; ++i) {
    const Point2& prev = ring.at_cyclic(static_cast<std::ptrdiff_t>(i) - 1);
    const Point2& cur = ring[i];
    const Point2& next = ring.edge_end(i);
    if (orient(prev, cur, next) == 0.0 && (cur - prev).dot(next - cur) < 0.0) return false;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
      if (adjacent) continue;
      if (segments_intersect(ring.edge_start(i), ring.edge_end(i), ring.edge_start(j), ring.edge_end(j))) {
        return false;
      }
    }
  }
  return true;
}

SegmentProjection closest_point_on_segment(const Point2& p, const Point2& a, const Point2& b) {
  const Point2 ab = b - a;
  const double len2 = ab.squaredNorm();
  SegmentProjection out;
  if (len2 == 0.0) {
    out.point = a;
    out.t = 0.0;
  } else {
    const double t = (p - a).dot(ab) / len2;
    if (t <= 0.0) {
      out.point = a;
      out.t = 0.0;
    } else if (t >= 1.0) {
      out.point = b;
      out.t = 1.0;
    } else {
      out.point = a + t * ab;
      out.t = t;
    }
  }
  out.distance = (p - out.point).norm();
  return out;
}

RingProjection closest_point_on_ring(const Point2& p, const PolygonRing& ring) {
  RingProjection best;
  best.distance = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const auto proj = closest_point_on_segment(p, ring.edge_start(i), ring.edge_end(i));
    if (proj.distance < best.distance) {
      best.point = proj.point;
      best.edge = i;
      best.t = proj.t;
      best.distance = proj.distance;
    }
  }
  return best;
}

bool contains(const PolygonRing& ring, const Point2& p) {
  bool inside = false;
  const std::size_t n = ring.size();
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point2& a = ring[i];
    const Point2& b = ring[j];
    if (closest_point_on_segment(p, a, b).distance <= kVertexTolerance) return true;
    if ((a.y() > p.y()) != (b.y() > p.y())) {
      const double x_cross = a.x() + (p.y() - a.y()) * (b.x() - a.x()) / (b.y() - a.y());
      if (p.x() < x_cross) inside = !inside;
    }
  }
  return inside;
}

namespace {

// Douglas-Peucker over pts[first..last] (inclusive); marks kept indices.
void dp_mark(std::span<const Point2> pts, std::size_t first, std::size_t last, double epsilon,
             std::vector<char>& keep) {
  keep[first] = keep[last] = 1;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{first, last}};
  while (!stack.empty()) {
    const auto [lo, hi] = stack.back();
    stack.pop_back();
    double dmax = -1.0;
    std::size_t imax = lo;
    for (std::size_t i = lo + 1; i < hi; ++i) {
      const double d = closest_point_on_segment(pts[i], pts[lo], pts[hi]).distance;
      if (d > dmax) {
        dmax = d;
        imax = i;
      }
    }
    if (imax != lo && dmax > epsilon) {
      keep[imax] = 1;
      stack.emplace_back(lo, imax);
      stack.emplace_back(imax, hi);
    }
  }
}

}  // namespace

Polyline simplify_dp(const Polyline& line, double epsilon) {
  if (epsilon < 0.0) throw ValidationError("simplify_dp: epsilon must be non-negative");
  const std::size_t n = line.size();
  if (n <= 2) return line;
  std::vector<char> keep(n, 0);
  dp_mark(line, 0, n - 1, epsilon, keep);
  Polyline out;
  for (std::size_t i = 0; i < n; ++i) {
    if (keep[i]) out.push_back(line[i]);
  }
  return out;
}

std::vector<std::size_t> simplify_dp_indices(const PolygonRing& ring, double epsilon) {
  if (epsilon < 0.0) throw ValidationError("simplify_dp: epsilon must be non-negative");
  const std::size_t n = ring.size();
  std::size_t ia = 0, ib = 1;
  double best = -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = (ring[i] - ring[j]).squaredNorm();
      if (d > best) {
        best = d;
        ia = i;
        ib = j;
      }
    }
  }
  // Unroll the ring as ia..n-1, 0..ia so that both halves are contiguous.
  std::vector<Point2> unrolled;
  unrolled.reserve(n + 1);
  for (std::size_t k = 0; k <= n; ++k) unrolled.push_back(ring[(ia + k) % n]);
  const std::size_t split = ib - ia;
  std::vector<char> keep(n + 1, 0);
  dp_mark(unrolled, 0, split, epsilon, keep);
  dp_mark(unrolled, split, n, epsilon, keep);

  std::vector<std::size_t> idx;
  for (std::size_t k = 0; k < n; ++k) {
    if (keep[k]) idx.push_back((ia + k) % n);
  }
  if (idx.size() < 3) {
    // Everything fell within epsilon of the diameter chord; keep the farthest vertex.
    double dmax = -1.0;
    std::size_t imax = 0;
    for (std::size_t i = 0; i < n; ++i) {
      const double d = closest_point_on_segment(ring[i], ring[ia], ring[ib]).distance;
      if (d > dmax) {
        dmax = d;
        imax = i;
      }
    }
    if (dmax <= 0.0) throw ValidationError("simplify_dp: ring is degenerate (all vertices collinear)");
    idx = {ia, ib, imax};
  }
  std::sort(idx.begin(), idx.end());
  return idx;
}

PolygonRing simplify_dp(const PolygonRing& ring, double epsilon) {
  std::vector<Point2> out;
  for (std::size_t i : simplify_dp_indices(ring, epsilon)) out.push_back(ring[i]);
  return PolygonRing(std::move(out));
}

double turn_angle(const PolygonRing& ring, std::size_t i) {
  const Point2 e_in = ring[i] - ring.at_cyclic(static_cast<std::ptrdiff_t>(i) - 1);
  const Point2 e_out = ring.edge_end(i) - ring[i];
  const double cross = e_in.x() * e_out.y() - e_in.y() * e_out.x();
  const double dot = e_in.dot(e_out);
  double deg = std::atan2(cross, dot) * 180.0 / std::numbers::pi;
  if (deg <= -180.0) deg = 180.0;
  return deg;
}

Box bounding_box(const PolygonRing& ring) {
  Box b{ring[0].x(), ring[0].y(), ring[0].x(), ring[0].y()};
  for (const auto& p : ring) {
    b.x0 = std::min(b.x0, p.x());
    b.y0 = std::min(b.y0, p.y());
    b.x1 = std::max(b.x1, p.x());
    b.y1 = std::max(b.y1, p.y());
  }
  return b;
}

}  // namespace polyfield
