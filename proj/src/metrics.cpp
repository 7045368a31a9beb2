#include "polyfield/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "polyfield/error.hpp"

namespace polyfield {

PixelPR pixel_pr(const BinaryMask& pred, const BinaryMask& gt) {
  if (pred.height() != gt.height() || pred.width() != gt.width()) {
    throw DimensionError("pixel_pr: mask dimensions differ");
  }
  const auto p = pred.bits() != 0;
  const auto g = gt.bits() != 0;
  const double tp = static_cast<double>((p && g).count());
  const double fp = static_cast<double>((p && !g).count());
  const double fn = static_cast<double>((!p && g).count());
  PixelPR out;
  if (tp + fp == 0.0) {
    out.precision = (fn == 0.0) ? 1.0 : 0.0;
  } else {
    out.precision = tp / (tp + fp);
  }
  out.recall = (tp + fn == 0.0) ? 1.0 : tp / (tp + fn);
  return out;
}

namespace {

double nearest_distance(const Point2& p, const PolygonRing& ring, NearestMode mode) {
  if (mode == NearestMode::boundary) return closest_point_on_ring(p, ring).distance;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& v : ring) best = std::min(best, (p - v).norm());
  return best;
}

double one_sided(const PolygonRing& from, const PolygonRing& to, NearestMode mode) {
  double sum = 0.0;
  for (const auto& v : from) sum += nearest_distance(v, to, mode);
  return sum / (2.0 * static_cast<double>(from.size()));
}

}  // namespace

double polis(const PolygonRing& p, const PolygonRing& q, NearestMode mode) {
  return one_sided(p, q, mode) + one_sided(q, p, mode);
}

double tangent_angle_deg(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const Eigen::Vector2d ua = a.normalized();
  const Eigen::Vector2d ub = b.normalized();
  const double cross = ua.x() * ub.y() - ua.y() * ub.x();
  return std::atan2(std::abs(cross), ua.dot(ub)) * 180.0 / std::numbers::pi;
}

double max_tangent(const PolygonRing& p, const PolygonRing& q, TangentAnchor anchor) {
  constexpr double kTie = 1e-9;
  double worst = 0.0;
  std::vector<double> dist(q.size());
  for (std::size_t i = 0; i < p.size(); ++i) {
    const Eigen::Vector2d tangent = p.edge_end(i) - p.edge_start(i);
    if (tangent.squaredNorm() == 0.0) continue;
    const Point2 at = anchor == TangentAnchor::midpoint ? Point2(0.5 * (p.edge_start(i) + p.edge_end(i)))
                                                        : p.edge_start(i);
    double dmin = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < q.size(); ++k) {
      dist[k] = closest_point_on_segment(at, q.edge_start(k), q.edge_end(k)).distance;
      dmin = std::min(dmin, dist[k]);
    }
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < q.size(); ++k) {
      const Eigen::Vector2d qt = q.edge_end(k) - q.edge_start(k);
      if (dist[k] > dmin + kTie || qt.squaredNorm() == 0.0) continue;
      best = std::min(best, tangent_angle_deg(tangent, qt));
    }
    if (std::isfinite(best)) worst = std::max(worst, best);
  }
  return worst;
}

std::vector<double> default_iou_thresholds() {
  std::vector<double> t;
  for (int k = 0; k < 10; ++k) t.push_back(0.5 + 0.05 * k);
  return t;
}

Eigen::MatrixXd iou_matrix(std::span<const Detection> dets, std::span<const PolygonRing> gts, RasterSize size) {
  Eigen::MatrixXd m(static_cast<Eigen::Index>(dets.size()), static_cast<Eigen::Index>(gts.size()));
  std::vector<BinaryMask> gt_masks;
  gt_masks.reserve(gts.size());
  for (const auto& g : gts) gt_masks.push_back(rasterize(g, size.height, size.width));
  for (std::size_t d = 0; d < dets.size(); ++d) {
    const BinaryMask dm = rasterize(dets[d].ring, size.height, size.width);
    for (std::size_t g = 0; g < gts.size(); ++g) {
      m(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(g)) = iou(dm, gt_masks[g]);
    }
  }
  return m;
}

namespace {

constexpr double kThresholdSlack = 1e-12;

std::vector<std::size_t> score_order(std::span<const Detection> dets) {
  std::vector<std::size_t> order(dets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return dets[a].score > dets[b].score; });
  return order;
}

std::vector<int> match_with_ious(const Eigen::MatrixXd& ious, const std::vector<std::size_t>& order,
                                 double threshold) {
  const Eigen::Index n_gt = ious.cols();
  std::vector<int> match(static_cast<std::size_t>(ious.rows()), -1);
  std::vector<char> taken(static_cast<std::size_t>(n_gt), 0);
  for (std::size_t d : order) {
    int best = -1;
    double best_iou = -1.0;
    for (Eigen::Index g = 0; g < n_gt; ++g) {
      if (taken[static_cast<std::size_t>(g)]) continue;
      const double v = ious(static_cast<Eigen::Index>(d), g);
      if (v + kThresholdSlack >= threshold && v > best_iou) {
        best_iou = v;
        best = static_cast<int>(g);
      }
    }
    if (best >= 0) {
      taken[static_cast<std::size_t>(best)] = 1;
      match[d] = best;
    }
  }
  return match;
}

// Exact area under the interpolated precision-recall curve.
double average_precision(const std::vector<char>& tp_in_order, std::size_t n_gt) {
  const std::size_t n = tp_in_order.size();
  std::vector<double> precision(n), recall(n);
  double tp = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    tp += tp_in_order[k] ? 1.0 : 0.0;
    precision[k] = tp / static_cast<double>(k + 1);
    recall[k] = tp / static_cast<double>(n_gt);
  }
  for (std::size_t k = n; k-- > 1;) precision[k - 1] = std::max(precision[k - 1], precision[k]);
  double ap = 0.0, prev_recall = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    if (recall[k] > prev_recall) {
      ap += (recall[k] - prev_recall) * precision[k];
      prev_recall = recall[k];
    }
  }
  return ap;
}

}  // namespace

std::vector<int> greedy_match(std::span<const Detection> dets, std::span<const PolygonRing> gts, RasterSize size,
                              double threshold) {
  return match_with_ious(iou_matrix(dets, gts, size), score_order(dets), threshold);
}

ApAr ap_ar(std::span<const Detection> dets, std::span<const PolygonRing> gts, RasterSize size,
           std::span<const double> thresholds) {
  if (thresholds.empty()) throw ValidationError("ap_ar: no IoU thresholds");
  for (double t : thresholds) {
    if (!(t > 0.0 && t <= 1.0)) throw ValidationError("ap_ar: IoU thresholds must lie in (0, 1]");
  }
  ApAr out;
  const Eigen::MatrixXd ious = iou_matrix(dets, gts, size);
  const std::vector<std::size_t> order = score_order(dets);
  for (double t : thresholds) {
    double ap = 0.0, ar = 0.0;
    if (gts.empty()) {
      ap = dets.empty() ? 1.0 : 0.0;
      ar = 1.0;
    } else if (!dets.empty()) {
      const std::vector<int> match = match_with_ious(ious, order, t);
      std::vector<char> tp;
      std::size_t matched = 0;
      for (std::size_t d : order) {
        tp.push_back(match[d] >= 0);
        matched += match[d] >= 0 ? 1 : 0;
      }
      ap = average_precision(tp, gts.size());
      ar = static_cast<double>(matched) / static_cast<double>(gts.size());
    }
    out.ap_per_threshold.push_back(ap);
    out.ar_per_threshold.push_back(ar);
  }
  const double n = static_cast<double>(thresholds.size());
  out.ap = std::accumulate(out.ap_per_threshold.begin(), out.ap_per_threshold.end(), 0.0) / n;
  out.ar = std::accumulate(out.ar_per_threshold.begin(), out.ar_per_threshold.end(), 0.0) / n;
  return out;
}

MetricsReport evaluate_scene(std::span<const Detection> dets, std::span<const PolygonRing> gts,
                             const EvalConfig& cfg) {
  if (cfg.size.height < 1 || cfg.size.width < 1) throw ValidationError("evaluate_scene: raster size must be positive");
  MetricsReport report;

  std::vector<PolygonRing> det_rings;
  for (const auto& d : dets) det_rings.push_back(d.ring);
  const PixelPR pr = pixel_pr(rasterize_union(det_rings, cfg.size.height, cfg.size.width),
                              rasterize_union(gts, cfg.size.height, cfg.size.width));
  report.precision = pr.precision;
  report.recall = pr.recall;

  const Eigen::MatrixXd ious = iou_matrix(dets, gts, cfg.size);
  const std::vector<std::size_t> order = score_order(dets);
  const std::vector<int> match = match_with_ious(ious, order, cfg.match_iou);
  double polis_sum = 0.0, mta_sum = 0.0, mta_max = 0.0;
  for (std::size_t d : order) {
    if (match[d] < 0) continue;
    const auto g = static_cast<std::size_t>(match[d]);
    InstanceMetrics m;
    m.detection = d;
    m.ground_truth = g;
    m.polis = polis(dets[d].ring, gts[g], cfg.polis_mode);
    m.mta = max_tangent(dets[d].ring, gts[g], cfg.tangent_anchor);
    m.iou = ious(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(g));
    polis_sum += m.polis;
    mta_sum += m.mta;
    mta_max = std::max(mta_max, m.mta);
    report.per_instance.push_back(m);
  }
  if (!report.per_instance.empty()) {
    const double n = static_cast<double>(report.per_instance.size());
    report.polis_mean = polis_sum / n;
    report.mta_mean = mta_sum / n;
    report.mta_max = mta_max;
  }

  const ApAr apar = ap_ar(dets, gts, cfg.size, cfg.thresholds);
  report.ap = apar.ap;
  report.ar = apar.ar;
  return report;
}

}  // namespace polyfield
