#include <doctest.h>

#include <algorithm>

#include "oracles.hpp"
#include "polyfield/corners.hpp"
#include "polyfield/error.hpp"
#include "polyfield/metrics.hpp"
#include "polyfield/synth.hpp"

using namespace polyfield;

namespace {

bool same_corners(const CornerSet& a, const CornerSet& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].position != b[i].position || a[i].kind != b[i].kind || a[i].score != b[i].score) return false;
  }
  return true;
}

CornerSet sorted_by_position(CornerSet s) {
  std::sort(s.begin(), s.end(), [](const Corner& a, const Corner& b) {
    return a.position.y() != b.position.y() ? a.position.y() < b.position.y() : a.position.x() < b.position.x();
  });
  return s;
}

SceneSpec clean_spec(std::uint64_t seed) {
  SceneSpec spec;
  spec.seed = seed;
  spec.n_buildings = 1 + static_cast<int>(seed % 3);
  spec.vertex_sigma = 0.0;
  return spec;
}

}  // namespace

TEST_CASE("corners_from_heatmap") {
  ProbGrid convex(7, 7), concave(7, 7);
  convex.set(3, 4, 1.0);
  const CornerSet one = corners_from_heatmap(convex, concave, 0.5);
  REQUIRE(one.size() == 1);
  CHECK(one[0].position == Point2(4.5, 3.5));
  CHECK(one[0].kind == CornerKind::convex);
  CHECK(one[0].score == 1.0);

  CHECK(corners_from_heatmap(ProbGrid(5, 5, 0.9), ProbGrid(5, 5, 0.9), 0.5).empty());

  concave.set(0, 0, 0.7);
  const CornerSet two = corners_from_heatmap(convex, concave, 0.5);
  CHECK(two.size() == 2);
  CHECK(std::count_if(two.begin(), two.end(), [](const Corner& c) { return c.kind == CornerKind::concave; }) == 1);
  CHECK(corners_from_heatmap(convex, concave, 0.8).size() == 1);
  CHECK_THROWS_AS(corners_from_heatmap(convex, ProbGrid(6, 7), 0.5), DimensionError);
}

TEST_CASE("corners_from_heatmap matches an exhaustive scan") {
  oracle::Rng rng(1);
  for (int k = 0; k < 30; ++k) {
    ProbGrid convex(24, 20), concave(24, 20);
    for (int i = 0; i < 25; ++i) {
      convex.set(static_cast<int>(rng() % 24), static_cast<int>(rng() % 20), oracle::uniform(rng, 0, 1));
      concave.set(static_cast<int>(rng() % 24), static_cast<int>(rng() % 20), oracle::uniform(rng, 0, 1));
    }
    const CornerSet got = corners_from_heatmap(convex, concave, 0.3);
    const CornerSet want = oracle::heatmap_scan(convex, concave, 0.3);
    CHECK(same_corners(sorted_by_position(got), sorted_by_position(want)));
  }
}

TEST_CASE("nms_corners") {
  const CornerSet one{{{1, 1}, CornerKind::convex, 0.6}};
  CHECK(same_corners(nms_corners(one, 3.0), one));
  const CornerSet pair{{{1, 1}, CornerKind::convex, 0.8}, {{2, 1}, CornerKind::concave, 0.9}};
  const CornerSet kept = nms_corners(pair, 2.0);
  REQUIRE(kept.size() == 1);
  CHECK(kept[0].score == 0.9);
  CHECK(nms_corners(pair, 0.5).size() == 2);
}

TEST_CASE("nms_corners matches the brute-force oracle") {
  oracle::Rng rng(2);
  for (int k = 0; k < 100; ++k) {
    CornerSet s;
    const int n = 1 + k % 40;
    for (int i = 0; i < n; ++i) {
      // Coarse scores force ties.
      s.push_back({{std::floor(oracle::uniform(rng, 0, 30)), std::floor(oracle::uniform(rng, 0, 30))},
                   (rng() & 1) ? CornerKind::convex : CornerKind::concave,
                   std::round(oracle::uniform(rng, 0, 1) * 4) / 4});
    }
    const double radius = oracle::uniform(rng, 0.5, 6);
    const CornerSet got = nms_corners(s, radius);
    CHECK(same_corners(got, oracle::nms_bruteforce(s, radius)));
    for (std::size_t i = 0; i < got.size(); ++i) {
      for (std::size_t j = i + 1; j < got.size(); ++j) CHECK((got[i].position - got[j].position).norm() > radius);
    }
  }
}

TEST_CASE("connected components") {
  BinaryMask m(6, 6);
  m.set(0, 0, true);
  m.set(1, 1, true);  // diagonal neighbour joins under 8-connectivity
  for (int c = 3; c < 6; ++c) {
    m.set(4, c, true);
    m.set(5, c, true);
  }
  const auto comps = connected_components(m);
  REQUIRE(comps.size() == 2);
  CHECK(comps[0].count() == 2);
  CHECK(comps[1].count() == 6);
  CHECK(largest_component(m) == comps[1]);
  CHECK_THROWS_AS(largest_component(BinaryMask(3, 3)), ValidationError);
}

TEST_CASE("trace_outer_contour of a rectangle") {
  const BinaryMask m = rasterize(PolygonRing({{2, 3}, {7, 3}, {7, 6}, {2, 6}}), 10, 10);
  const Polyline c = trace_outer_contour(m);
  // Perimeter pixels of a 5x3 block.
  CHECK(c.size() == 12);
  for (const auto& p : c) CHECK(m(static_cast<int>(p.y()), static_cast<int>(p.x())));
}

TEST_CASE("init_polygon on a square with its corners") {
  const PolygonRing truth({{10.5, 10.5}, {29.5, 10.5}, {29.5, 29.5}, {10.5, 29.5}});
  const BinaryMask mask = rasterize(PolygonRing({{10, 10}, {30, 10}, {30, 30}, {10, 30}}), 40, 40);
  CornerSet corners;
  for (const auto& v : truth) corners.push_back({v, CornerKind::convex, 1.0});
  const PolygonRing r = init_polygon(mask, corners);
  REQUIRE(r.size() == 4);
  for (const auto& v : truth) {
    double best = 1e300;
    for (const auto& p : r) best = std::min(best, (p - v).norm());
    CHECK(best <= 1.0);
  }
  CHECK(signed_area(r) > 0);
}

TEST_CASE("init_polygon without corners is the simplified contour") {
  Rng rng(3);
  for (int k = 0; k < 10; ++k) {
    const PolygonRing gt = gen_rectilinear(rng, 4 + 2 * (k % 4), PixelBox{3, 3, 45, 45});
    const BinaryMask mask = rasterize(gt, 48, 48);
    const PolygonRing r = init_polygon(mask, {});
    const Polyline traced = trace_outer_contour(largest_component(mask));
    const PolygonRing contour(traced);
    std::vector<Point2> pts;
    for (std::size_t i : simplify_dp_indices(contour, 1.0)) pts.push_back(contour[i]);
    CHECK(r == normalize_ring(pts));
  }
  CHECK_THROWS_AS(init_polygon(BinaryMask(8, 8), {}), ValidationError);
}

TEST_CASE("init_polygon on clean synthetic scenes") {
  const InitConfig cfg;
  long gt_vertices = 0, matched = 0, rings = 0, simple = 0;
  for (std::uint64_t seed = 0; seed < 40; ++seed) {
    const Scene s = render_scene(clean_spec(seed));
    const CornerSet all = nms_corners(corners_from_heatmap(s.convex_map, s.concave_map, cfg.score_threshold),
                                      cfg.nms_radius);
    for (const auto& gt : s.gt_rings) {
      const BinaryMask m = rasterize(gt, s.height, s.width);
      const PolygonRing r = init_polygon(m, all, cfg);
      ++rings;
      simple += is_simple(r) ? 1 : 0;
      CHECK(r.size() >= gt.size());
      CHECK(polis(r, gt) < 0.5);

      Eigen::MatrixXd cost(gt.size(), r.size());
      for (std::size_t i = 0; i < gt.size(); ++i) {
        for (std::size_t j = 0; j < r.size(); ++j) cost(i, j) = (gt[i] - r[j]).norm();
      }
      const std::vector<int> assign = oracle::hungarian(cost);
      for (std::size_t i = 0; i < gt.size(); ++i) matched += cost(i, assign[i]) <= 2.0 ? 1 : 0;
      gt_vertices += static_cast<long>(gt.size());

      const Polyline traced = trace_outer_contour(m);
      const PolygonRing contour(traced);
      for (const auto& v : r) CHECK(closest_point_on_ring(v, contour).distance <= cfg.epsilon + 1.5);
    }
  }
  CHECK(static_cast<double>(matched) / gt_vertices >= 0.95);
  CHECK(static_cast<double>(simple) / rings >= 0.99);
}
