#pragma once

#include <span>

#include <Eigen/Core>

#include "polyfield/geometry.hpp"
#include "polyfield/raster.hpp"

namespace polyfield {

/// Per-pixel displacement (dx, dy) from the pixel center to the nearest
/// building boundary point, in pixels.
class AttractionField {
 public:
  AttractionField(int height, int width);
  AttractionField(GridArray<double> dx, GridArray<double> dy);

  int height() const { return static_cast<int>(dx_.rows()); }
  int width() const { return static_cast<int>(dx_.cols()); }

  Eigen::Vector2d operator()(int row, int col) const { return {dx_(row, col), dy_(row, col)}; }
  void set(int row, int col, const Eigen::Vector2d& v) {
    dx_(row, col) = v.x();
    dy_(row, col) = v.y();
  }

  const GridArray<double>& dx() const { return dx_; }
  const GridArray<double>& dy() const { return dy_; }
  GridArray<double>& dx() { return dx_; }
  GridArray<double>& dy() { return dy_; }

  friend bool operator==(const AttractionField& a, const AttractionField& b) {
    return a.height() == b.height() && a.width() == b.width() && (a.dx_ == b.dx_).all() && (a.dy_ == b.dy_).all();
  }

 private:
  GridArray<double> dx_;
  GridArray<double> dy_;
};

enum class AfmLossMode { sq_l2, l1 };

/// Dense encoding over every pixel; the nearest point is taken over the union
/// of all ring boundaries. Throws ValidationError on an empty ring list.
AttractionField encode_afm(std::span<const PolygonRing> rings, int height, int width);

/// Mean over pixels of ||pred - gt||^2 (sq_l2) or |ddx| + |ddy| (l1).
double afm_loss(const AttractionField& pred, const AttractionField& gt, AfmLossMode mode = AfmLossMode::sq_l2);

/// Gradient of afm_loss with respect to `pred`, laid out as a field.
/// The l1 mode returns the subgradient sign(residual) / N (zero at zero residual).
AttractionField afm_loss_grad(const AttractionField& pred, const AttractionField& gt,
                              AfmLossMode mode = AfmLossMode::sq_l2);

/// Every pixel votes for the cell containing center + vector; cells with at
/// least `vote_threshold` votes are marked. Votes leaving the grid are dropped.
BinaryMask decode_afm(const AttractionField& field, long vote_threshold);

/// Vote counts underlying decode_afm.
GridArray<long> afm_votes(const AttractionField& field);

struct FieldSample {
  Eigen::Vector2d value;
  Eigen::Matrix2d jacobian;  // column 0 = d/dx, column 1 = d/dy
};

/// Bilinear sample of the field at a pixel-space point with its Jacobian.
FieldSample sample_field(const AttractionField& field, const Point2& p);

}  // namespace polyfield
