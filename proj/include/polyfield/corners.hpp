#pragma once

#include <vector>

#include "polyfield/geometry.hpp"
#include "polyfield/raster.hpp"

namespace polyfield {

enum class CornerKind { convex, concave };

struct Corner {
  Point2 position;
  CornerKind kind = CornerKind::convex;
  double score = 0.0;
};

using CornerSet = std::vector<Corner>;

/// Knobs for the dynamic polygon initialization.
struct InitConfig {
  double epsilon = 1.0;          // Douglas-Peucker tolerance on the traced contour, px
  double nms_radius = 3.0;       // px
  double missing_dist = 3.0;     // contour vertices farther than this from every corner are inserted, px
  double score_threshold = 0.5;  // corner heatmap threshold
  double snap_dist = 1.5;        // corners farther than this from the contour are ignored, px
};

/// Strict 8-neighbourhood maxima with value >= score_threshold, placed at pixel centers.
CornerSet corners_from_heatmap(const ProbGrid& convex_map, const ProbGrid& concave_map, double score_threshold);

/// Greedy suppression in (score desc, y asc, x asc) order; a corner within
/// `radius` of an already kept corner is dropped.
CornerSet nms_corners(const CornerSet& corners, double radius);

/// Largest 8-connected foreground component; ties go to the first in raster order.
/// Throws ValidationError on an empty mask.
BinaryMask largest_component(const BinaryMask& mask);

/// All 8-connected foreground components, in raster order of their first pixel.
std::vector<BinaryMask> connected_components(const BinaryMask& mask);

/// Moore-neighbour trace of the outer boundary of the component containing
/// the first foreground pixel in raster order. Returns pixel centers.
Polyline trace_outer_contour(const BinaryMask& mask);

/// Builds the initial ring from a mask and NMS-filtered corners:
/// trace the largest component, simplify it, order corners along the contour
/// and insert contour vertices that no corner accounts for.
///
/// Throws ValidationError for an empty mask or when no ring with 3 vertices
/// can be formed.
PolygonRing init_polygon(const BinaryMask& mask, const CornerSet& corners, const InitConfig& cfg = {});

/// Heatmap thresholding + NMS + init_polygon.
PolygonRing init_polygon_from_maps(const BinaryMask& mask, const ProbGrid& convex_map, const ProbGrid& concave_map,
                                   const InitConfig& cfg = {});

}  // namespace polyfield
