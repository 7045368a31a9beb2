#pragma once

#include <optional>
#include <span>
#include <vector>

#include "polyfield/geometry.hpp"
#include "polyfield/raster.hpp"

namespace polyfield {

struct Detection {
  PolygonRing ring;
  double score = 1.0;
};

struct PixelPR {
  double precision = 0.0;
  double recall = 0.0;
};

/// precision = TP / (TP + FP), recall = TP / (TP + FN).
/// With nothing predicted, precision is 1 if the ground truth is empty and 0
/// otherwise; recall is 1 when the ground truth is empty.
PixelPR pixel_pr(const BinaryMask& pred, const BinaryMask& gt);

enum class NearestMode {
  boundary,  // nearest point anywhere on the other ring's edges
  vertices,  // nearest vertex of the other ring
};

/// Symmetric mean vertex-to-boundary distance, each direction weighted 1/2.
double polis(const PolygonRing& p, const PolygonRing& q, NearestMode mode = NearestMode::boundary);

/// Where the tangent of edge i of P is compared against Q.
enum class TangentAnchor {
  midpoint,  // closest point of Q to the midpoint of edge i
  vertex,    // closest point of Q to vertex i
};

/// Largest angle, in degrees within [0, 180], between the unit tangent of an
/// edge of P and the unit tangent of the edge of Q nearest to the edge's
/// anchor point. When the nearest point is shared by several edges of Q
/// (a vertex), the smallest angle among them is used. Zero-length edges are skipped.
double max_tangent(const PolygonRing& p, const PolygonRing& q, TangentAnchor anchor = TangentAnchor::midpoint);

/// Angle in degrees between two directions, within [0, 180].
double tangent_angle_deg(const Eigen::Vector2d& a, const Eigen::Vector2d& b);

/// IoU thresholds 0.50, 0.55, ..., 0.95.
std::vector<double> default_iou_thresholds();

struct RasterSize {
  int height = 0;
  int width = 0;
};

struct ApAr {
  double ap = 0.0;
  double ar = 0.0;
  std::vector<double> ap_per_threshold;
  std::vector<double> ar_per_threshold;
};

/// Matches sorted by descending score; each detection takes the unmatched gt
/// with the highest raster IoU that reaches the threshold.
/// Returns gt index (or -1) for every detection in the given order.
std::vector<int> greedy_match(std::span<const Detection> dets, std::span<const PolygonRing> gts, RasterSize size,
                              double threshold);

/// Instance-level precision and recall averaged over IoU thresholds. AP per
/// threshold is the exact area under the interpolated precision-recall curve.
ApAr ap_ar(std::span<const Detection> dets, std::span<const PolygonRing> gts, RasterSize size,
           std::span<const double> thresholds);

/// Pairwise raster IoU matrix (dets x gts).
Eigen::MatrixXd iou_matrix(std::span<const Detection> dets, std::span<const PolygonRing> gts, RasterSize size);

struct InstanceMetrics {
  std::size_t detection = 0;
  std::size_t ground_truth = 0;
  double polis = 0.0;
  double mta = 0.0;
  double iou = 0.0;
};

struct MetricsReport {
  double precision = 0.0;
  double recall = 0.0;
  std::optional<double> polis_mean;  // absent when nothing matched
  std::optional<double> mta_mean;
  std::optional<double> mta_max;  // worst matched polygon
  double ap = 0.0;
  double ar = 0.0;
  std::vector<InstanceMetrics> per_instance;
};

struct EvalConfig {
  RasterSize size;
  std::vector<double> thresholds = default_iou_thresholds();
  double match_iou = 0.5;
  NearestMode polis_mode = NearestMode::boundary;
  TangentAnchor tangent_anchor = TangentAnchor::midpoint;
};

MetricsReport evaluate_scene(std::span<const Detection> dets, std::span<const PolygonRing> gts,
                             const EvalConfig& cfg);

}  // namespace polyfield
