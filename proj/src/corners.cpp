#include "polyfield/corners.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <deque>
#include <limits>

#include "polyfield/error.hpp"

namespace polyfield {

namespace {

void collect_peaks(const ProbGrid& map, CornerKind kind, double threshold, CornerSet& out) {
  for (int r = 0; r < map.height(); ++r) {
    for (int c = 0; c < map.width(); ++c) {
      const double v = map(r, c);
      if (v < threshold) continue;
      bool peak = true;
      for (int dr = -1; dr <= 1 && peak; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if (dr == 0 && dc == 0) continue;
          const int rr = r + dr, cc = c + dc;
          if (rr < 0 || cc < 0 || rr >= map.height() || cc >= map.width()) continue;
          if (map(rr, cc) >= v) {
            peak = false;
            break;
          }
        }
      }
      if (peak) out.push_back({Point2(c + 0.5, r + 0.5), kind, v});
    }
  }
}

}  // namespace

CornerSet corners_from_heatmap(const ProbGrid& convex_map, const ProbGrid& concave_map, double score_threshold) {
  if (convex_map.height() != concave_map.height() || convex_map.width() != concave_map.width()) {
    throw DimensionError("corners_from_heatmap: convex and concave maps differ in size");
  }
  CornerSet out;
  collect_peaks(convex_map, CornerKind::convex, score_threshold, out);
  collect_peaks(concave_map, CornerKind::concave, score_threshold, out);
  return out;
}

CornerSet nms_corners(const CornerSet& corners, double radius) {
  if (!(radius > 0.0)) throw ValidationError("nms_corners: radius must be positive");
  CornerSet sorted = corners;
  std::stable_sort(sorted.begin(), sorted.end(), [](const Corner& a, const Corner& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.position.y() != b.position.y()) return a.position.y() < b.position.y();
    return a.position.x() < b.position.x();
  });
  CornerSet kept;
  for (const auto& c : sorted) {
    const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Corner& k) {
      return (k.position - c.position).norm() <= radius;
    });
    if (!suppressed) kept.push_back(c);
  }
  return kept;
}

std::vector<BinaryMask> connected_components(const BinaryMask& mask) {
  const int h = mask.height(), w = mask.width();
  GridArray<int> label = GridArray<int>::Constant(h, w, -1);
  std::vector<BinaryMask> out;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      if (!mask(r, c) || label(r, c) >= 0) continue;
      const int id = static_cast<int>(out.size());
      BinaryMask comp(h, w);
      std::deque<std::pair<int, int>> queue{{r, c}};
      label(r, c) = id;
      while (!queue.empty()) {
        const auto [cr, cc] = queue.front();
        queue.pop_front();
        comp.set(cr, cc, true);
        for (int dr = -1; dr <= 1; ++dr) {
          for (int dc = -1; dc <= 1; ++dc) {
            const int nr = cr + dr, nc = cc + dc;
            if (!mask.get_or_false(nr, nc) || label(nr, nc) >= 0) continue;
            label(nr, nc) = id;
            queue.emplace_back(nr, nc);
          }
        }
      }
      out.push_back(std::move(comp));
    }
  }
  return out;
}

BinaryMask largest_component(const BinaryMask& mask) {
  std::vector<BinaryMask> comps = connected_components(mask);
  if (comps.empty()) throw ValidationError("mask has no foreground pixels");
  std::size_t best = 0;
  for (std::size_t i = 1; i < comps.size(); ++i) {
    if (comps[i].count() > comps[best].count()) best = i;
  }
  return comps[best];
}

namespace {

// Clockwise in image coordinates (y down), starting west.
constexpr std::array<std::array<int, 2>, 8> kMoore = {
    {{0, -1}, {-1, -1}, {-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}, {1, -1}}};

int moore_index(int dr, int dc) {
  for (int k = 0; k < 8; ++k) {
    if (kMoore[k][0] == dr && kMoore[k][1] == dc) return k;
  }
  return -1;
}

}  // namespace

Polyline trace_outer_contour(const BinaryMask& mask) {
  int sr = -1, sc = -1;
  for (int r = 0; r < mask.height() && sr < 0; ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      if (mask(r, c)) {
        sr = r;
        sc = c;
        break;
      }
    }
  }
  if (sr < 0) throw ValidationError("trace_outer_contour: mask is empty");

  auto center = [](int r, int c) { return Point2(c + 0.5, r + 0.5); };
  Polyline contour{center(sr, sc)};

  // The west neighbour of the first raster pixel is background.
  int cr = sr, cc = sc;
  int br = sr, bc = sc - 1;
  int first_r = -1, first_c = -1;
  const long limit = 4L * mask.height() * mask.width() + 8;
  for (long step = 0; step < limit; ++step) {
    const int start = moore_index(br - cr, bc - cc);
    int nr = -1, nc = -1, prev_r = br, prev_c = bc;
    for (int k = 1; k <= 8; ++k) {
      const auto& d = kMoore[(start + k) % 8];
      const int tr = cr + d[0], tc = cc + d[1];
      if (mask.get_or_false(tr, tc)) {
        nr = tr;
        nc = tc;
        break;
      }
      prev_r = tr;
      prev_c = tc;
    }
    if (nr < 0) break;  // isolated pixel
    if (cr == sr && cc == sc) {
      if (first_r < 0) {
        first_r = nr;
        first_c = nc;
      } else if (nr == first_r && nc == first_c) {
        break;  // re-entering the start the same way: loop closed
      }
    }
    br = prev_r;
    bc = prev_c;
    cr = nr;
    cc = nc;
    contour.push_back(center(cr, cc));
  }
  if (contour.size() > 1 && contour.back() == contour.front()) contour.pop_back();
  return contour;
}

namespace {

struct ContourVertex {
  double arc = 0.0;
  Point2 position;
};

}  // namespace

PolygonRing init_polygon(const BinaryMask& mask, const CornerSet& corners, const InitConfig& cfg) {
  const BinaryMask component = largest_component(mask);
  const Polyline traced = trace_outer_contour(component);
  std::vector<Point2> distinct;
  for (const auto& p : traced) {
    if (distinct.empty() || (p - distinct.back()).norm() > kVertexTolerance) distinct.push_back(p);
  }
  if (distinct.size() < 3) throw ValidationError("init_polygon: component too small to form a ring");
  const PolygonRing contour(distinct);

  std::vector<double> arc(contour.size() + 1, 0.0);
  for (std::size_t i = 0; i < contour.size(); ++i) {
    arc[i + 1] = arc[i] + (contour.edge_end(i) - contour.edge_start(i)).norm();
  }

  const std::vector<std::size_t> kept = simplify_dp_indices(contour, cfg.epsilon);
  std::vector<Point2> simplified_pts;
  for (std::size_t i : kept) simplified_pts.push_back(contour[i]);

  struct Snapped {
    double arc;
    Point2 snapped;
    Point2 position;
    double score;
  };
  std::vector<Snapped> snapped;
  for (const auto& corner : corners) {
    const RingProjection proj = closest_point_on_ring(corner.position, contour);
    if (proj.distance > cfg.snap_dist) continue;
    const double s = arc[proj.edge] + proj.t * (arc[proj.edge + 1] - arc[proj.edge]);
    snapped.push_back({s, proj.point, corner.position, corner.score});
  }
  std::stable_sort(snapped.begin(), snapped.end(), [](const Snapped& a, const Snapped& b) { return a.arc < b.arc; });

  // Corners snapping to the same contour point collapse to the higher score.
  std::vector<Snapped> unique;
  for (const auto& s : snapped) {
    auto same = std::find_if(unique.begin(), unique.end(), [&](const Snapped& u) {
      return (u.snapped - s.snapped).norm() <= kVertexTolerance;
    });
    if (same == unique.end()) {
      unique.push_back(s);
    } else if (s.score > same->score) {
      *same = s;
    }
  }

  std::vector<ContourVertex> vertices;
  for (const auto& u : unique) vertices.push_back({u.arc, u.position});
  for (std::size_t i : kept) {
    const Point2& p = contour[i];
    const bool covered = std::any_of(unique.begin(), unique.end(), [&](const Snapped& u) {
      return (u.snapped - p).norm() <= cfg.missing_dist;
    });
    if (!covered) vertices.push_back({arc[i], p});
  }
  std::stable_sort(vertices.begin(), vertices.end(),
                   [](const ContourVertex& a, const ContourVertex& b) { return a.arc < b.arc; });

  std::vector<Point2> pts;
  for (const auto& v : vertices) pts.push_back(v.position);
  try {
    PolygonRing ring = normalize_ring(pts);
    if (is_simple(ring)) return ring;
  } catch (const ValidationError&) {
  }
  // Fallback: the simplified contour alone.
  return normalize_ring(simplified_pts);
}

PolygonRing init_polygon_from_maps(const BinaryMask& mask, const ProbGrid& convex_map, const ProbGrid& concave_map,
                                   const InitConfig& cfg) {
  const CornerSet raw = corners_from_heatmap(convex_map, concave_map, cfg.score_threshold);
  return init_polygon(mask, nms_corners(raw, cfg.nms_radius), cfg);
}

}  // namespace polyfield
