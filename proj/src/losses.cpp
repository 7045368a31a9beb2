#include "polyfield/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "polyfield/error.hpp"

namespace polyfield {

namespace {

void require_same_shape(const ProbGrid& pred, const BinaryMask& gt) {
  if (pred.height() != gt.height() || pred.width() != gt.width()) {
    throw DimensionError("mask_bce: prediction and ground truth differ in size");
  }
}

void require_clamp(double clamp_eps) {
  if (!(clamp_eps > 0.0 && clamp_eps < 0.5)) throw ValidationError("mask_bce: clamp_eps must be in (0, 0.5)");
}

}  // namespace

double mask_bce(const ProbGrid& pred, const BinaryMask& gt, double clamp_eps) {
  require_same_shape(pred, gt);
  require_clamp(clamp_eps);
  const GridArray<double> p = pred.values().cwiseMax(clamp_eps).cwiseMin(1.0 - clamp_eps);
  const GridArray<double> y = gt.bits().cast<double>();
  return -(y * p.log() + (1.0 - y) * (1.0 - p).log()).mean();
}

GridArray<double> mask_bce_grad(const ProbGrid& pred, const BinaryMask& gt, double clamp_eps) {
  require_same_shape(pred, gt);
  require_clamp(clamp_eps);
  const double n = static_cast<double>(pred.height()) * pred.width();
  const GridArray<double>& p = pred.values();
  const GridArray<double> y = gt.bits().cast<double>();
  const GridArray<double> raw = (-y / p + (1.0 - y) / (1.0 - p)) / n;
  return (p > clamp_eps && p < 1.0 - clamp_eps).select(raw, 0.0);
}

namespace {

double l1_with_shift(const PolygonRing& pred, const PolygonRing& gt, std::size_t shift) {
  const std::size_t n = pred.size();
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += (pred[i] - gt[(i + shift) % n]).cwiseAbs().sum();
  return total;
}

}  // namespace

double vertex_l1(const PolygonRing& pred, const PolygonRing& gt, VertexAlign align) {
  if (pred.size() != gt.size()) throw DimensionError("vertex_l1: rings have different vertex counts");
  if (align == VertexAlign::fixed) return l1_with_shift(pred, gt, 0);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s < gt.size(); ++s) best = std::min(best, l1_with_shift(pred, gt, s));
  return best;
}

double matched_vertex_l1(const PolygonRing& pred, const PolygonRing& gt) {
  const std::size_t n = std::max(pred.size(), gt.size());
  const PolygonRing p = pred.size() == n ? pred : resample_ring(pred, n);
  const PolygonRing g = gt.size() == n ? gt : resample_ring(gt, n);
  return vertex_l1(p, g, VertexAlign::cyclic);
}

PolygonRing resample_ring(const PolygonRing& ring, std::size_t n) {
  if (n < 3) throw ValidationError("resample_ring: n must be at least 3");
  const double total = perimeter(ring);
  if (!(total > 0.0)) throw ValidationError("resample_ring: ring has zero perimeter");
  std::vector<Point2> out;
  out.reserve(n);
  std::size_t edge = 0;
  double edge_start_arc = 0.0;
  double edge_len = (ring.edge_end(0) - ring.edge_start(0)).norm();
  for (std::size_t k = 0; k < n; ++k) {
    const double target = total * static_cast<double>(k) / static_cast<double>(n);
    while (edge + 1 < ring.size() && edge_start_arc + edge_len < target) {
      edge_start_arc += edge_len;
      ++edge;
      edge_len = (ring.edge_end(edge) - ring.edge_start(edge)).norm();
    }
    const double t = edge_len > 0.0 ? std::clamp((target - edge_start_arc) / edge_len, 0.0, 1.0) : 0.0;
    if (t == 0.0) {
      out.push_back(ring.edge_start(edge));
    } else if (t == 1.0) {
      out.push_back(ring.edge_end(edge));
    } else {
      out.push_back(ring.edge_start(edge) + t * (ring.edge_end(edge) - ring.edge_start(edge)));
    }
  }
  return PolygonRing(std::move(out));
}

namespace {

constexpr double kDegenerateEdge2 = 1e-18;

// sin^2(2 dtheta) between edges a (incoming) and b (outgoing) and its
// partial derivatives with respect to a and b.
struct TurnTerm {
  double value = 0.0;
  Eigen::Vector2d d_a = Eigen::Vector2d::Zero();
  Eigen::Vector2d d_b = Eigen::Vector2d::Zero();
};

TurnTerm turn_term(const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const double cross = a.x() * b.y() - a.y() * b.x();
  const double dot = a.dot(b);
  const double aa = a.squaredNorm();
  const double bb = b.squaredNorm();
  const double denom = aa * aa * bb * bb;
  TurnTerm t;
  t.value = 4.0 * cross * cross * dot * dot / denom;
  const Eigen::Vector2d dcross_da(b.y(), -b.x());
  const Eigen::Vector2d dcross_db(-a.y(), a.x());
  const double k = 8.0 * cross * dot / denom;
  t.d_a = k * (dot * dcross_da + cross * b) - 4.0 * t.value / aa * a;
  t.d_b = k * (dot * dcross_db + cross * a) - 4.0 * t.value / bb * b;
  return t;
}

}  // namespace

double ring_ortho_penalty(const PolygonRing& ring) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < ring.size(); ++k) {
    const Eigen::Vector2d a = ring[k] - ring.at_cyclic(static_cast<std::ptrdiff_t>(k) - 1);
    const Eigen::Vector2d b = ring.edge_end(k) - ring[k];
    if (a.squaredNorm() < kDegenerateEdge2 || b.squaredNorm() < kDegenerateEdge2) continue;
    sum += turn_term(a, b).value;
    ++count;
  }
  return count == 0 ? 0.0 : sum / static_cast<double>(count);
}

VertexGradient ring_ortho_penalty_grad(const PolygonRing& ring) {
  const std::size_t n = ring.size();
  VertexGradient grad = VertexGradient::Zero(static_cast<Eigen::Index>(n), 2);
  std::size_t count = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t prev = (k + n - 1) % n;
    const std::size_t next = (k + 1) % n;
    const Eigen::Vector2d a = ring[k] - ring[prev];
    const Eigen::Vector2d b = ring[next] - ring[k];
    if (a.squaredNorm() < kDegenerateEdge2 || b.squaredNorm() < kDegenerateEdge2) continue;
    const TurnTerm t = turn_term(a, b);
    // a = v_k - v_prev, b = v_next - v_k
    grad.row(static_cast<Eigen::Index>(prev)) -= t.d_a.transpose();
    grad.row(static_cast<Eigen::Index>(k)) += (t.d_a - t.d_b).transpose();
    grad.row(static_cast<Eigen::Index>(next)) += t.d_b.transpose();
    ++count;
  }
  if (count > 0) grad /= static_cast<double>(count);
  return grad;
}

double ortho_loss(std::span<const PolygonRing> rings) {
  if (rings.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : rings) sum += ring_ortho_penalty(r);
  return sum / static_cast<double>(rings.size());
}

std::vector<VertexGradient> ortho_loss_grad(std::span<const PolygonRing> rings) {
  std::vector<VertexGradient> out;
  out.reserve(rings.size());
  for (const auto& r : rings) out.push_back(ring_ortho_penalty_grad(r) / static_cast<double>(rings.size()));
  return out;
}

double total_loss(const LossParts& parts, const LossWeights& weights) {
  if (weights.mask < 0 || weights.afm < 0 || weights.vertex < 0 || weights.ortho < 0) {
    throw ValidationError("loss weights must be non-negative");
  }
  return weights.mask * parts.mask + weights.afm * parts.afm + weights.vertex * parts.vertex +
         weights.ortho * parts.ortho;
}

}  // namespace polyfield
