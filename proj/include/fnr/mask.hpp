#pragma once
// Binary instance masks stored as row-major run-length encodings.
//
// Runs alternate background/foreground and always start with a background run
// (possibly of length zero). Masks in canonical form carry no other
// zero-length runs, so equal pixel sets compare equal run-for-run.

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace fnr {

struct PixelCoord {
  int v = 0;  ///< row
  int h = 0;  ///< column

  friend bool operator==(const PixelCoord&, const PixelCoord&) = default;
};

/// Real-valued (row, column) position; may lie outside the grid.
struct CenterPoint {
  double v = 0.0;
  double h = 0.0;

  friend bool operator==(const CenterPoint&, const CenterPoint&) = default;
};

/// Inclusive pixel bounds.
struct BoundingBox {
  int v_min = 0;
  int v_max = 0;
  int h_min = 0;
  int h_max = 0;

  int rows() const { return v_max - v_min + 1; }
  int cols() const { return h_max - h_min + 1; }
  std::int64_t area() const { return static_cast<std::int64_t>(rows()) * cols(); }

  friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

/// One foreground stretch inside a single row: columns [col_begin, col_end).
struct RowSegment {
  int row = 0;
  int col_begin = 0;
  int col_end = 0;
};

class PixelMask {
 public:
  PixelMask() = default;
  /// All-background mask on a height x width grid.
  PixelMask(int height, int width);

  /// Builds a mask from a run list; the list is canonicalized (interior
  /// zero-length runs merged away). Throws ParseError if the runs do not sum
  /// to height * width.
  static PixelMask from_runs(int height, int width, std::vector<std::uint32_t> runs);
  /// Row-major byte bitmap, non-zero = foreground.
  static PixelMask from_bitmap(int height, int width, std::span<const std::uint8_t> bitmap);
  /// Bitmap covering the sub-rectangle at (row0, col0) of size rows x cols;
  /// everything outside it is background. Pixels falling off the grid are dropped.
  static PixelMask from_region(int height, int width, int row0, int col0, int rows, int cols,
                               std::span<const std::uint8_t> bitmap);
  static PixelMask from_pixels(int height, int width, std::span<const PixelCoord> pixels);
  /// Axis-aligned rectangle, clipped to the grid.
  static PixelMask rectangle(int height, int width, int row0, int col0, int rows, int cols);
  /// Row segments in row-major order (must be sorted and non-overlapping).
  static PixelMask from_segments(int height, int width, std::span<const RowSegment> segments);

  /// Parses `size:[H,W]; counts:[c0,c1,...]`.
  static PixelMask parse(std::string_view text);
  std::string to_string() const;

  int height() const { return height_; }
  int width() const { return width_; }
  std::int64_t pixel_count() const { return static_cast<std::int64_t>(height_) * width_; }
  const std::vector<std::uint32_t>& runs() const { return runs_; }

  /// Number of foreground pixels.
  std::int64_t area() const;
  bool empty() const { return area() == 0; }
  bool same_grid(const PixelMask& other) const {
    return height_ == other.height_ && width_ == other.width_;
  }

  bool contains(int v, int h) const;
  std::vector<std::uint8_t> to_bitmap() const;
  std::vector<RowSegment> segments() const;
  /// Foreground stretches as [begin, end) offsets into the row-major grid.
  std::vector<std::pair<std::int64_t, std::int64_t>> intervals() const;

  friend bool operator==(const PixelMask&, const PixelMask&) = default;

 private:
  static PixelMask from_intervals(int height, int width,
                                  const std::vector<std::pair<std::int64_t, std::int64_t>>& iv);

  int height_ = 0;
  int width_ = 0;
  std::vector<std::uint32_t> runs_;
};

/// |a ∩ b| in exact integer arithmetic. Throws DimensionError on grid mismatch.
std::int64_t intersection_area(const PixelMask& a, const PixelMask& b);

/// |i ∩ j| / |i|. Throws DimensionError or EmptyMaskError (|i| = 0).
double overlap_ratio(const PixelMask& i, const PixelMask& j);

/// |i ∩ j| / |i ∪ j|. Throws DimensionError, or EmptyMaskError if both are empty.
double iou(const PixelMask& i, const PixelMask& j);

PixelMask mask_union(const PixelMask& a, const PixelMask& b);
PixelMask mask_intersection(const PixelMask& a, const PixelMask& b);
/// a \ b
PixelMask mask_difference(const PixelMask& a, const PixelMask& b);

/// Mean (row, column) over foreground pixels. Throws EmptyMaskError.
CenterPoint geometric_center(const PixelMask& mask);

struct InnerBoundary {
  PixelMask inner;
  PixelMask boundary;
};

/// Inner pixels have all eight neighbours in the mask; pixels on the image
/// border are never inner. Throws EmptyMaskError.
InnerBoundary split_inner_boundary(const PixelMask& mask);

/// Translates every foreground pixel by (dv, dh); pixels leaving the grid are dropped.
PixelMask shift_mask(const PixelMask& mask, int dv, int dh);

/// Rounds each component to the nearest integer, ties away from zero.
PixelCoord round_shift(const CenterPoint& delta);

/// Shift by a real-valued vector after rounding with round_shift.
PixelMask shift_mask(const PixelMask& mask, const CenterPoint& delta);

/// Tight box around the foreground. Throws EmptyMaskError.
BoundingBox bounding_box(const PixelMask& mask);

/// IoU of two pixel boxes (inclusive bounds).
double box_iou(const BoundingBox& a, const BoundingBox& b);

}  // namespace fnr
