#include "polyfield/afm.hpp"

#include <cmath>
#include <limits>

#include "polyfield/error.hpp"

namespace polyfield {

AttractionField::AttractionField(int height, int width) {
  if (height < 1 || width < 1) throw ValidationError("field dimensions must be at least 1x1");
  dx_ = GridArray<double>::Zero(height, width);
  dy_ = GridArray<double>::Zero(height, width);
}

AttractionField::AttractionField(GridArray<double> dx, GridArray<double> dy) : dx_(std::move(dx)), dy_(std::move(dy)) {
  if (dx_.rows() < 1 || dx_.cols() < 1) throw ValidationError("field dimensions must be at least 1x1");
  if (dx_.rows() != dy_.rows() || dx_.cols() != dy_.cols()) throw DimensionError("field components differ in size");
  if (!dx_.isFinite().all() || !dy_.isFinite().all()) throw ValidationError("field has non-finite vectors");
}

AttractionField encode_afm(std::span<const PolygonRing> rings, int height, int width) {
  if (rings.empty()) throw ValidationError("encode_afm: at least one ring is required");
  AttractionField field(height, width);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      const Point2 center(c + 0.5, r + 0.5);
      double best = std::numeric_limits<double>::infinity();
      Point2 nearest = center;
      for (const auto& ring : rings) {
        const RingProjection proj = closest_point_on_ring(center, ring);
        if (proj.distance < best) {
          best = proj.distance;
          nearest = proj.point;
        }
      }
      field.set(r, c, nearest - center);
    }
  }
  return field;
}

namespace {

void require_same_shape(const AttractionField& a, const AttractionField& b, const char* what) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw DimensionError(std::string(what) + ": field dimensions differ");
  }
}

}  // namespace

double afm_loss(const AttractionField& pred, const AttractionField& gt, AfmLossMode mode) {
  require_same_shape(pred, gt, "afm_loss");
  const double n = static_cast<double>(pred.height()) * pred.width();
  const auto rx = pred.dx() - gt.dx();
  const auto ry = pred.dy() - gt.dy();
  if (mode == AfmLossMode::sq_l2) return (rx.square() + ry.square()).sum() / n;
  return (rx.abs() + ry.abs()).sum() / n;
}

AttractionField afm_loss_grad(const AttractionField& pred, const AttractionField& gt, AfmLossMode mode) {
  require_same_shape(pred, gt, "afm_loss_grad");
  const double n = static_cast<double>(pred.height()) * pred.width();
  GridArray<double> rx = pred.dx() - gt.dx();
  GridArray<double> ry = pred.dy() - gt.dy();
  if (mode == AfmLossMode::sq_l2) return AttractionField(2.0 * rx / n, 2.0 * ry / n);
  return AttractionField(rx.sign() / n, ry.sign() / n);
}

GridArray<long> afm_votes(const AttractionField& field) {
  GridArray<long> votes = GridArray<long>::Zero(field.height(), field.width());
  for (int r = 0; r < field.height(); ++r) {
    for (int c = 0; c < field.width(); ++c) {
      const Point2 target = Point2(c + 0.5, r + 0.5) + field(r, c);
      const double tc = std::floor(target.x());
      const double tr = std::floor(target.y());
      if (tc < 0 || tr < 0 || tc >= field.width() || tr >= field.height()) continue;
      ++votes(static_cast<Eigen::Index>(tr), static_cast<Eigen::Index>(tc));
    }
  }
  return votes;
}

BinaryMask decode_afm(const AttractionField& field, long vote_threshold) {
  const GridArray<long> votes = afm_votes(field);
  return BinaryMask((votes >= vote_threshold).cast<std::uint8_t>());
}

FieldSample sample_field(const AttractionField& field, const Point2& p) {
  const BilinearStencil s = bilinear_stencil(field.height(), field.width(), p);
  FieldSample out{Eigen::Vector2d::Zero(), Eigen::Matrix2d::Zero()};
  for (int k = 0; k < 4; ++k) {
    const Eigen::Vector2d v = field(s.row[k], s.col[k]);
    out.value += s.weight[k] * v;
    out.jacobian.col(0) += s.d_dx[k] * v;
    out.jacobian.col(1) += s.d_dy[k] * v;
  }
  return out;
}

}  // namespace polyfield
