#pragma once

#include <array>
#include <cstdint>

#include <Eigen/Core>

#include "polyfield/geometry.hpp"

namespace polyfield {

template <typename Scalar>
using GridArray = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Row-major boolean grid. Pixel (row i, col j) covers [j, j+1) x [i, i+1) and
/// has its center at (j + 0.5, i + 0.5).
class BinaryMask {
 public:
  BinaryMask(int height, int width);
  explicit BinaryMask(GridArray<std::uint8_t> bits);

  int height() const { return static_cast<int>(bits_.rows()); }
  int width() const { return static_cast<int>(bits_.cols()); }

  bool operator()(int row, int col) const { return bits_(row, col) != 0; }
  void set(int row, int col, bool value) { bits_(row, col) = value ? 1 : 0; }

  bool in_bounds(int row, int col) const { return row >= 0 && col >= 0 && row < height() && col < width(); }
  /// Out-of-bounds reads return false.
  bool get_or_false(int row, int col) const { return in_bounds(row, col) && bits_(row, col) != 0; }

  long count() const;
  const GridArray<std::uint8_t>& bits() const { return bits_; }

  friend bool operator==(const BinaryMask& a, const BinaryMask& b) {
    return a.height() == b.height() && a.width() == b.width() && (a.bits_ == b.bits_).all();
  }

 private:
  GridArray<std::uint8_t> bits_;
};

/// Row-major grid of probabilities in [0, 1].
class ProbGrid {
 public:
  ProbGrid(int height, int width, double fill = 0.0);
  explicit ProbGrid(GridArray<double> values);

  int height() const { return static_cast<int>(values_.rows()); }
  int width() const { return static_cast<int>(values_.cols()); }
  double operator()(int row, int col) const { return values_(row, col); }
  /// Throws ValidationError outside [0, 1].
  void set(int row, int col, double value);

  const GridArray<double>& values() const { return values_; }

 private:
  GridArray<double> values_;
};

/// H x W x C feature grid stored as an (H*W) x C row-major matrix.
class FeatureGrid {
 public:
  using Storage = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  FeatureGrid(int height, int width, int channels);
  FeatureGrid(int height, int width, Storage data);

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return static_cast<int>(data_.cols()); }

  auto cell(int row, int col) { return data_.row(static_cast<Eigen::Index>(row) * width_ + col); }
  auto cell(int row, int col) const { return data_.row(static_cast<Eigen::Index>(row) * width_ + col); }

  const Storage& data() const { return data_; }
  Storage& data() { return data_; }

  /// Channel-wise concatenation of grids with identical height and width.
  static FeatureGrid concat(const FeatureGrid& a, const FeatureGrid& b);

 private:
  int height_;
  int width_;
  Storage data_;
};

/// Four-cell bilinear stencil for a query point under the pixel-center convention.
/// Queries are clamped to the rectangle spanned by the outermost cell centers.
struct BilinearStencil {
  std::array<int, 4> row{};  // cells (r0,c0), (r0,c1), (r1,c0), (r1,c1)
  std::array<int, 4> col{};
  std::array<double, 4> weight{};
  std::array<double, 4> d_dx{};  // d weight / d x, zero along a clamped axis
  std::array<double, 4> d_dy{};
};

BilinearStencil bilinear_stencil(int height, int width, const Point2& p);

/// Bilinear interpolation of all channels at pixel-space point p.
Eigen::VectorXd bilinear_sample(const FeatureGrid& grid, const Point2& p);
double bilinear_sample(const ProbGrid& grid, const Point2& p);

/// Pixel (i, j) is set iff its center lies inside the ring or on its boundary.
BinaryMask rasterize(const PolygonRing& ring, int height, int width);

/// Pixel-wise OR of per-ring rasterizations.
BinaryMask rasterize_union(std::span<const PolygonRing> rings, int height, int width);

/// |a & b| / |a | b|, 1 when both are empty. Throws DimensionError on size mismatch.
double iou(const BinaryMask& a, const BinaryMask& b);

/// Foreground pixels with a background (or off-grid) 4-neighbour.
BinaryMask inner_boundary(const BinaryMask& mask);

/// Keep only the pixels inside the half-open box [col0, col1) x [row0, row1).
BinaryMask crop_to_box(const BinaryMask& mask, int row0, int col0, int row1, int col1);

}  // namespace polyfield
