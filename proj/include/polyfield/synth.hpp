#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "polyfield/afm.hpp"
#include "polyfield/geometry.hpp"
#include "polyfield/raster.hpp"

namespace polyfield {

using Rng = std::mt19937_64;

/// Integer pixel box [x0, x1) x [y0, y1). Generated vertices sit on pixel
/// centers inside it, so x ranges over x0 + 0.5 ... x1 - 0.5.
struct PixelBox {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  int width() const { return x1 - x0; }
  int height() const { return y1 - y0; }
};

struct SceneSpec {
  std::uint64_t seed = 0;
  int height = 128;
  int width = 128;
  int n_buildings = 3;
  int size_min = 16;
  int size_max = 40;
  int corners_min = 4;
  int corners_max = 12;
  double vertex_sigma = 2.0;
  double mask_flip_prob = 0.0;
  double separation = 2.0;  // minimum gap between buildings, px
  int margin = 2;           // minimum gap to the image border, px

  /// Throws ValidationError describing the first invalid field.
  void validate() const;
};

struct Scene {
  int height = 0;
  int width = 0;
  std::vector<PolygonRing> gt_rings;
  BinaryMask mask{1, 1};
  ProbGrid convex_map{1, 1};
  ProbGrid concave_map{1, 1};
  AttractionField afm{1, 1};
  std::vector<PolygonRing> corrupted_rings;
};

/// Minimum edge length and minimum gap between non-adjacent edges of generated rings, px.
inline constexpr double kMinFeature = 4.0;

/// Simple rectilinear counter-clockwise ring with exactly `corners` vertices
/// (even, >= 4), all on pixel centers inside `box`. Starts from the box
/// rectangle and cuts rectangular notches at convex corners.
/// Throws ValidationError when no valid ring is found within the retry budget.
PolygonRing gen_rectilinear(Rng& rng, int corners, const PixelBox& box);

/// Deterministic in spec.seed. Throws ValidationError when the buildings
/// cannot be placed disjointly.
Scene render_scene(const SceneSpec& spec);

/// Convex / concave corner heatmaps: max of unit-peak Gaussians (sigma 1 px)
/// centred on the ring vertices, split by turn direction.
std::pair<ProbGrid, ProbGrid> render_corner_maps(const std::vector<PolygonRing>& rings, int height, int width);

/// Vertex-wise Gaussian jitter, redrawn until the ring stays simple.
PolygonRing jitter_ring(Rng& rng, const PolygonRing& ring, double sigma);

}  // namespace polyfield
