#include "polyfield/raster.hpp"

#include <algorithm>
#include <cmath>

#include "polyfield/error.hpp"

namespace polyfield {

BinaryMask::BinaryMask(int height, int width) {
  if (height < 1 || width < 1) throw ValidationError("mask dimensions must be at least 1x1");
  bits_ = GridArray<std::uint8_t>::Zero(height, width);
}

BinaryMask::BinaryMask(GridArray<std::uint8_t> bits) : bits_(std::move(bits)) {
  if (bits_.rows() < 1 || bits_.cols() < 1) throw ValidationError("mask dimensions must be at least 1x1");
  bits_ = (bits_ != 0).cast<std::uint8_t>();
}

long BinaryMask::count() const { return static_cast<long>((bits_ != 0).count()); }

ProbGrid::ProbGrid(int height, int width, double fill) {
  if (height < 1 || width < 1) throw ValidationError("grid dimensions must be at least 1x1");
  if (!(fill >= 0.0 && fill <= 1.0)) throw ValidationError("probability outside [0, 1]");
  values_ = GridArray<double>::Constant(height, width, fill);
}

ProbGrid::ProbGrid(GridArray<double> values) : values_(std::move(values)) {
  if (values_.rows() < 1 || values_.cols() < 1) throw ValidationError("grid dimensions must be at least 1x1");
  if (!(values_ >= 0.0 && values_ <= 1.0).all()) throw ValidationError("probability outside [0, 1]");
}

void ProbGrid::set(int row, int col, double value) {
  if (!(value >= 0.0 && value <= 1.0)) throw ValidationError("probability outside [0, 1]");
  values_(row, col) = value;
}

FeatureGrid::FeatureGrid(int height, int width, int channels)
    : height_(height), width_(width), data_(Storage::Zero(static_cast<Eigen::Index>(height) * width, channels)) {
  if (height < 1 || width < 1 || channels < 1) throw ValidationError("feature grid dimensions must be positive");
}

FeatureGrid::FeatureGrid(int height, int width, Storage data) : height_(height), width_(width), data_(std::move(data)) {
  if (height < 1 || width < 1 || data_.cols() < 1) throw ValidationError("feature grid dimensions must be positive");
  if (data_.rows() != static_cast<Eigen::Index>(height) * width) {
    throw DimensionError("feature grid storage does not match height * width");
  }
  if (!data_.allFinite()) throw ValidationError("feature grid has non-finite values");
}

FeatureGrid FeatureGrid::concat(const FeatureGrid& a, const FeatureGrid& b) {
  if (a.height() != b.height() || a.width() != b.width()) {
    throw DimensionError("cannot concatenate feature grids of different size");
  }
  Storage data(a.data().rows(), a.channels() + b.channels());
  data << a.data(), b.data();
  return FeatureGrid(a.height(), a.width(), std::move(data));
}

namespace {

struct AxisStencil {
  int lo = 0, hi = 0;
  double frac = 0.0;
  double slope = 1.0;  // d(index coordinate)/d(pixel coordinate), 0 when clamped
};

AxisStencil axis_stencil(int extent, double coord) {
  AxisStencil s;
  double u = coord - 0.5;
  const double max_u = static_cast<double>(extent - 1);
  if (u < 0.0 || u > max_u) {
    s.slope = 0.0;
    u = std::clamp(u, 0.0, max_u);
  }
  if (extent == 1) {
    s.slope = 0.0;
    return s;
  }
  s.lo = std::min(static_cast<int>(std::floor(u)), extent - 2);
  s.hi = s.lo + 1;
  s.frac = u - s.lo;
  return s;
}

}  // namespace

BilinearStencil bilinear_stencil(int height, int width, const Point2& p) {
  const AxisStencil sx = axis_stencil(width, p.x());
  const AxisStencil sy = axis_stencil(height, p.y());
  const double fx = sx.frac, fy = sy.frac;
  BilinearStencil s;
  s.row = {sy.lo, sy.lo, sy.hi, sy.hi};
  s.col = {sx.lo, sx.hi, sx.lo, sx.hi};
  s.weight = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
  s.d_dx = {-(1 - fy) * sx.slope, (1 - fy) * sx.slope, -fy * sx.slope, fy * sx.slope};
  s.d_dy = {-(1 - fx) * sy.slope, -fx * sy.slope, (1 - fx) * sy.slope, fx * sy.slope};
  return s;
}

Eigen::VectorXd bilinear_sample(const FeatureGrid& grid, const Point2& p) {
  const BilinearStencil s = bilinear_stencil(grid.height(), grid.width(), p);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(grid.channels());
  for (int k = 0; k < 4; ++k) {
    if (s.weight[k] != 0.0) out += s.weight[k] * grid.cell(s.row[k], s.col[k]).transpose();
  }
  return out;
}

double bilinear_sample(const ProbGrid& grid, const Point2& p) {
  const BilinearStencil s = bilinear_stencil(grid.height(), grid.width(), p);
  double out = 0.0;
  for (int k = 0; k < 4; ++k) out += s.weight[k] * grid(s.row[k], s.col[k]);
  return out;
}

BinaryMask rasterize(const PolygonRing& ring, int height, int width) {
  BinaryMask mask(height, width);
  const Box b = bounding_box(ring);
  const int r0 = std::max(0, static_cast<int>(std::floor(b.y0 - 0.5)));
  const int r1 = std::min(height - 1, static_cast<int>(std::ceil(b.y1)));
  const int c0 = std::max(0, static_cast<int>(std::floor(b.x0 - 0.5)));
  const int c1 = std::min(width - 1, static_cast<int>(std::ceil(b.x1)));
  for (int r = r0; r <= r1; ++r) {
    for (int c = c0; c <= c1; ++c) {
      if (contains(ring, Point2(c + 0.5, r + 0.5))) mask.set(r, c, true);
    }
  }
  return mask;
}

BinaryMask rasterize_union(std::span<const PolygonRing> rings, int height, int width) {
  GridArray<std::uint8_t> bits = GridArray<std::uint8_t>::Zero(height, width);
  for (const auto& ring : rings) bits = bits.max(rasterize(ring, height, width).bits());
  return BinaryMask(std::move(bits));
}

double iou(const BinaryMask& a, const BinaryMask& b) {
  if (a.height() != b.height() || a.width() != b.width()) throw DimensionError("iou: mask dimensions differ");
  const auto inter = ((a.bits() != 0) && (b.bits() != 0)).count();
  const auto uni = ((a.bits() != 0) || (b.bits() != 0)).count();
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

BinaryMask inner_boundary(const BinaryMask& mask) {
  BinaryMask out(mask.height(), mask.width());
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      if (!mask(r, c)) continue;
      if (!mask.get_or_false(r - 1, c) || !mask.get_or_false(r + 1, c) || !mask.get_or_false(r, c - 1) ||
          !mask.get_or_false(r, c + 1)) {
        out.set(r, c, true);
      }
    }
  }
  return out;
}

BinaryMask crop_to_box(const BinaryMask& mask, int row0, int col0, int row1, int col1) {
  BinaryMask out(mask.height(), mask.width());
  row0 = std::max(row0, 0);
  col0 = std::max(col0, 0);
  row1 = std::min(row1, mask.height());
  col1 = std::min(col1, mask.width());
  for (int r = row0; r < row1; ++r) {
    for (int c = col0; c < col1; ++c) out.set(r, c, mask(r, c));
  }
  return out;
}

}  // namespace polyfield
