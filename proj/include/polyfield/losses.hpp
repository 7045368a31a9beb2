#pragma once

#include <span>
#include <vector>

#include <Eigen/Core>

#include "polyfield/geometry.hpp"
#include "polyfield/raster.hpp"

namespace polyfield {

/// Per-vertex gradient, one (d/dx, d/dy) row per ring vertex.
using VertexGradient = Eigen::Matrix<double, Eigen::Dynamic, 2, Eigen::RowMajor>;

struct LossWeights {
  double mask = 1.0;
  double afm = 1.0;
  double vertex = 1.0;
  double ortho = 1.0;
};

struct LossParts {
  double mask = 0.0;
  double afm = 0.0;
  double vertex = 0.0;
  double ortho = 0.0;
};

/// Mean binary cross-entropy with predictions clamped to [clamp_eps, 1 - clamp_eps].
double mask_bce(const ProbGrid& pred, const BinaryMask& gt, double clamp_eps = 1e-7);

/// d mask_bce / d pred. Zero where the clamp is active.
GridArray<double> mask_bce_grad(const ProbGrid& pred, const BinaryMask& gt, double clamp_eps = 1e-7);

enum class VertexAlign { fixed, cyclic };

/// Sum over vertices of |dx| + |dy|. Cyclic alignment first rotates the start
/// vertex of `gt` to minimise the sum. Throws DimensionError on count mismatch.
double vertex_l1(const PolygonRing& pred, const PolygonRing& gt, VertexAlign align = VertexAlign::fixed);

/// Vertex L1 after resampling both rings to the larger vertex count, with
/// cyclic alignment.
double matched_vertex_l1(const PolygonRing& pred, const PolygonRing& gt);

/// n points equally spaced by arc length, starting at vertex 0.
PolygonRing resample_ring(const PolygonRing& ring, std::size_t n);

/// Mean over vertices of sin^2(2 * dtheta) where dtheta is the turn between
/// consecutive edges. Vertices touching a zero-length edge are skipped.
double ring_ortho_penalty(const PolygonRing& ring);
VertexGradient ring_ortho_penalty_grad(const PolygonRing& ring);

/// Average of ring_ortho_penalty over rings.
double ortho_loss(std::span<const PolygonRing> rings);
std::vector<VertexGradient> ortho_loss_grad(std::span<const PolygonRing> rings);

double total_loss(const LossParts& parts, const LossWeights& weights);

}  // namespace polyfield
