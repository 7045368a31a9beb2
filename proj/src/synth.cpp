#include "polyfield/synth.hpp"

#include <algorithm>
#include <cmath>

#include <fmt/format.h>

#include "polyfield/error.hpp"

namespace polyfield {

void SceneSpec::validate() const {
  if (height < 1 || width < 1) throw ValidationError("scene: height and width must be positive");
  if (n_buildings < 0) throw ValidationError("scene: n_buildings must be non-negative");
  if (size_min < 2 * static_cast<int>(kMinFeature) || size_max < size_min) {
    throw ValidationError(fmt::format("scene: size range must satisfy {} <= min <= max", 2 * int(kMinFeature)));
  }
  if (corners_min < 4 || corners_max < corners_min) throw ValidationError("scene: corner budget must satisfy 4 <= min <= max");
  if (!(vertex_sigma >= 0.0)) throw ValidationError("scene: vertex_sigma must be non-negative");
  if (!(mask_flip_prob >= 0.0 && mask_flip_prob <= 1.0)) throw ValidationError("scene: mask_flip_prob must be in [0, 1]");
  if (!(separation >= 0.0) || margin < 0) throw ValidationError("scene: separation and margin must be non-negative");
}

namespace {

bool well_separated(const PolygonRing& ring) {
  const std::size_t n = ring.size();
  for (std::size_t i = 0; i < n; ++i) {
    if ((ring.edge_end(i) - ring.edge_start(i)).norm() < kMinFeature) return false;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 2; j < n; ++j) {
      if (i == 0 && j == n - 1) continue;
      if (segment_distance(ring.edge_start(i), ring.edge_end(i), ring.edge_start(j), ring.edge_end(j)) < kMinFeature) {
        return false;
      }
    }
  }
  return true;
}

int uniform_int(Rng& rng, int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); }

}  // namespace

PolygonRing gen_rectilinear(Rng& rng, int corners, const PixelBox& box) {
  if (corners < 4 || corners % 2 != 0) throw ValidationError("gen_rectilinear: corners must be even and >= 4");
  const double x0 = box.x0 + 0.5, y0 = box.y0 + 0.5, x1 = box.x1 - 0.5, y1 = box.y1 - 0.5;
  if (x1 - x0 < kMinFeature || y1 - y0 < kMinFeature) throw ValidationError("gen_rectilinear: box too small");

  constexpr int kRestarts = 20;
  constexpr int kCutAttempts = 200;
  for (int restart = 0; restart < kRestarts; ++restart) {
    std::vector<Point2> v{{x0, y0}, {x1, y0}, {x1, y1}, {x0, y1}};
    bool stuck = false;
    while (static_cast<int>(v.size()) < corners && !stuck) {
      stuck = true;
      for (int attempt = 0; attempt < kCutAttempts; ++attempt) {
        const PolygonRing ring(v);
        const std::size_t i = static_cast<std::size_t>(uniform_int(rng, 0, static_cast<int>(v.size()) - 1));
        if (turn_angle(ring, i) <= 0.0) continue;
        const Point2 prev = ring.at_cyclic(static_cast<std::ptrdiff_t>(i) - 1);
        const Point2 next = ring.edge_end(i);
        const double len_in = (v[i] - prev).norm();
        const double len_out = (next - v[i]).norm();
        const int max_in = static_cast<int>(len_in - kMinFeature);
        const int max_out = static_cast<int>(len_out - kMinFeature);
        if (max_in < kMinFeature || max_out < kMinFeature) continue;
        const double d_in = uniform_int(rng, static_cast<int>(kMinFeature), max_in);
        const double d_out = uniform_int(rng, static_cast<int>(kMinFeature), max_out);
        const Point2 u_in = (v[i] - prev) / len_in;
        const Point2 u_out = (next - v[i]) / len_out;
        const Point2 a = v[i] - d_in * u_in;
        const Point2 b = a + d_out * u_out;
        const Point2 c = v[i] + d_out * u_out;
        std::vector<Point2> cand = v;
        cand[i] = a;
        cand.insert(cand.begin() + static_cast<std::ptrdiff_t>(i) + 1, {b, c});
        const PolygonRing cand_ring(cand);
        if (!is_simple(cand_ring) || !well_separated(cand_ring)) continue;
        v = std::move(cand);
        stuck = false;
        break;
      }
    }
    if (static_cast<int>(v.size()) == corners) return PolygonRing(std::move(v));
  }
  throw ValidationError(fmt::format("gen_rectilinear: could not build a {}-corner ring in a {}x{} box", corners,
                                    box.width(), box.height()));
}

std::pair<ProbGrid, ProbGrid> render_corner_maps(const std::vector<PolygonRing>& rings, int height, int width) {
  GridArray<double> convex = GridArray<double>::Zero(height, width);
  GridArray<double> concave = GridArray<double>::Zero(height, width);
  constexpr int kRadius = 5;
  for (const auto& ring : rings) {
    for (std::size_t i = 0; i < ring.size(); ++i) {
      GridArray<double>& target = turn_angle(ring, i) > 0.0 ? convex : concave;
      const Point2& v = ring[i];
      const int cr = static_cast<int>(std::floor(v.y()));
      const int cc = static_cast<int>(std::floor(v.x()));
      for (int r = std::max(0, cr - kRadius); r <= std::min(height - 1, cr + kRadius); ++r) {
        for (int c = std::max(0, cc - kRadius); c <= std::min(width - 1, cc + kRadius); ++c) {
          const double d2 = (Point2(c + 0.5, r + 0.5) - v).squaredNorm();
          target(r, c) = std::max(target(r, c), std::exp(-0.5 * d2));
        }
      }
    }
  }
  return {ProbGrid(std::move(convex)), ProbGrid(std::move(concave))};
}

PolygonRing jitter_ring(Rng& rng, const PolygonRing& ring, double sigma) {
  if (sigma == 0.0) return ring;
  std::normal_distribution<double> noise(0.0, sigma);
  constexpr int kAttempts = 100;
  for (int attempt = 0; attempt < kAttempts; ++attempt) {
    std::vector<Point2> v = ring.vertices();
    for (auto& p : v) {
      const double dx = noise(rng);
      const double dy = noise(rng);
      p += Point2(dx, dy);
    }
    const PolygonRing cand(std::move(v));
    if (is_simple(cand) && signed_area(cand) > 0.0) return cand;
  }
  throw ValidationError("jitter_ring: could not draw a simple jittered ring");
}

Scene render_scene(const SceneSpec& spec) {
  spec.validate();
  Rng rng(spec.seed);
  Scene scene;
  scene.height = spec.height;
  scene.width = spec.width;

  std::vector<PixelBox> boxes;
  constexpr int kPlacementAttempts = 1000;
  for (int b = 0; b < spec.n_buildings; ++b) {
    bool placed = false;
    for (int attempt = 0; attempt < kPlacementAttempts && !placed; ++attempt) {
      const int w = uniform_int(rng, spec.size_min, spec.size_max);
      const int h = uniform_int(rng, spec.size_min, spec.size_max);
      if (w + 2 * spec.margin > spec.width || h + 2 * spec.margin > spec.height) continue;
      PixelBox box;
      box.x0 = uniform_int(rng, spec.margin, spec.width - spec.margin - w);
      box.y0 = uniform_int(rng, spec.margin, spec.height - spec.margin - h);
      box.x1 = box.x0 + w;
      box.y1 = box.y0 + h;
      // Ring extents are [x0 + 0.5, x1 - 0.5]; the gap between rings is the gap between boxes plus one.
      const bool clear = std::all_of(boxes.begin(), boxes.end(), [&](const PixelBox& o) {
        const double gap_x = std::max(o.x0 - box.x1, box.x0 - o.x1) + 1.0;
        const double gap_y = std::max(o.y0 - box.y1, box.y0 - o.y1) + 1.0;
        return std::max(gap_x, gap_y) >= spec.separation && std::max(gap_x, gap_y) > 0.0;
      });
      if (!clear) continue;

      int corners = uniform_int(rng, spec.corners_min / 2, spec.corners_max / 2) * 2;
      corners = std::max(corners, 4);
      for (; corners >= 4; corners -= 2) {
        try {
          scene.gt_rings.push_back(gen_rectilinear(rng, corners, box));
          break;
        } catch (const ValidationError&) {
        }
      }
      if (corners < 4) continue;
      boxes.push_back(box);
      placed = true;
    }
    if (!placed) {
      throw ValidationError(fmt::format("placement failure: could not fit building {} of {} into a {}x{} scene", b + 1,
                                        spec.n_buildings, spec.width, spec.height));
    }
  }

  scene.mask = rasterize_union(scene.gt_rings, spec.height, spec.width);
  if (spec.mask_flip_prob > 0.0) {
    std::bernoulli_distribution flip(spec.mask_flip_prob);
    for (int r = 0; r < spec.height; ++r) {
      for (int c = 0; c < spec.width; ++c) {
        if (flip(rng)) scene.mask.set(r, c, !scene.mask(r, c));
      }
    }
  }
  auto [convex, concave] = render_corner_maps(scene.gt_rings, spec.height, spec.width);
  scene.convex_map = std::move(convex);
  scene.concave_map = std::move(concave);
  if (!scene.gt_rings.empty()) {
    scene.afm = encode_afm(scene.gt_rings, spec.height, spec.width);
  } else {
    scene.afm = AttractionField(spec.height, spec.width);
  }
  for (const auto& ring : scene.gt_rings) scene.corrupted_rings.push_back(jitter_ring(rng, ring, spec.vertex_sigma));
  return scene;
}

}  // namespace polyfield
