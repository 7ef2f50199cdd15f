#include "fnr/mask.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "fnr/error.hpp"
#include "fnr/kernels.hpp"

namespace fnr {

namespace {

using Interval = std::pair<std::int64_t, std::int64_t>;

void require_grid(int height, int width) {
  if (height <= 0 || width <= 0) {
    throw DimensionError("mask grid must be positive, got " + std::to_string(height) + "x" +
                         std::to_string(width));
  }
}

void require_same_grid(const PixelMask& a, const PixelMask& b) {
  if (!a.same_grid(b)) {
    throw DimensionError("grid mismatch: " + std::to_string(a.height()) + "x" +
                         std::to_string(a.width()) + " vs " + std::to_string(b.height()) + "x" +
                         std::to_string(b.width()));
  }
}

template <class Keep>
std::vector<Interval> merge_intervals(const std::vector<Interval>& a, const std::vector<Interval>& b,
                                      Keep keep) {
  // Sweep over all interval endpoints; `keep(in_a, in_b)` decides membership.
  std::vector<std::int64_t> cuts;
  cuts.reserve(2 * (a.size() + b.size()));
  for (const auto& [s, e] : a) {
    cuts.push_back(s);
    cuts.push_back(e);
  }
  for (const auto& [s, e] : b) {
    cuts.push_back(s);
    cuts.push_back(e);
  }
  std::sort(cuts.begin(), cuts.end());
  cuts.erase(std::unique(cuts.begin(), cuts.end()), cuts.end());

  std::vector<Interval> out;
  std::size_t ia = 0, ib = 0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const std::int64_t lo = cuts[k], hi = cuts[k + 1];
    while (ia < a.size() && a[ia].second <= lo) ++ia;
    while (ib < b.size() && b[ib].second <= lo) ++ib;
    const bool in_a = ia < a.size() && a[ia].first <= lo;
    const bool in_b = ib < b.size() && b[ib].first <= lo;
    if (!keep(in_a, in_b)) continue;
    if (!out.empty() && out.back().second == lo) {
      out.back().second = hi;
    } else {
      out.emplace_back(lo, hi);
    }
  }
  return out;
}

std::size_t skip_space(std::string_view s, std::size_t pos) {
  while (pos < s.size() && (s[pos] == ' ' || s[pos] == '\t' || s[pos] == '\r' || s[pos] == '\n')) {
    ++pos;
  }
  return pos;
}

std::size_t expect(std::string_view s, std::size_t pos, std::string_view token) {
  pos = skip_space(s, pos);
  if (s.substr(pos, token.size()) != token) {
    throw ParseError("malformed RLE text: expected '" + std::string(token) + "' at offset " +
                     std::to_string(pos));
  }
  return pos + token.size();
}

template <class Int>
std::size_t read_int(std::string_view s, std::size_t pos, Int& value) {
  pos = skip_space(s, pos);
  auto [ptr, ec] = std::from_chars(s.data() + pos, s.data() + s.size(), value);
  if (ec != std::errc{}) {
    throw ParseError("malformed RLE text: expected an integer at offset " + std::to_string(pos));
  }
  return static_cast<std::size_t>(ptr - s.data());
}

}  // namespace

PixelMask::PixelMask(int height, int width) : height_(height), width_(width) {
  require_grid(height, width);
  runs_ = {static_cast<std::uint32_t>(pixel_count())};
}

PixelMask PixelMask::from_runs(int height, int width, std::vector<std::uint32_t> runs) {
  require_grid(height, width);
  std::int64_t total = 0;
  for (auto r : runs) total += r;
  if (total != static_cast<std::int64_t>(height) * width) {
    throw ParseError("RLE counts sum to " + std::to_string(total) + ", expected " +
                     std::to_string(static_cast<std::int64_t>(height) * width));
  }
  // Canonicalize: an interior zero-length run glues its neighbours together.
  std::vector<std::uint32_t> canon;
  canon.reserve(runs.size() + 1);
  bool foreground = false;
  for (std::size_t k = 0; k < runs.size(); ++k, foreground = !foreground) {
    const std::uint32_t r = runs[k];
    if (canon.empty()) {
      if (foreground) canon.push_back(0);
      canon.push_back(r);
      continue;
    }
    if (r == 0) continue;
    const bool last_is_foreground = (canon.size() % 2) == 0;
    if (last_is_foreground == foreground) {
      canon.back() += r;
    } else {
      canon.push_back(r);
    }
  }
  if (canon.empty()) canon.push_back(0);
  while (canon.size() > 1 && canon.back() == 0) canon.pop_back();
  PixelMask m;
  m.height_ = height;
  m.width_ = width;
  m.runs_ = std::move(canon);
  return m;
}

PixelMask PixelMask::from_intervals(int height, int width, const std::vector<Interval>& iv) {
  PixelMask m;
  m.height_ = height;
  m.width_ = width;
  std::int64_t pos = 0;
  for (const auto& [s, e] : iv) {
    if (!m.runs_.empty() && s == pos) {
      // Adjacent interval: extend the previous foreground run.
      m.runs_.back() += static_cast<std::uint32_t>(e - s);
    } else {
      m.runs_.push_back(static_cast<std::uint32_t>(s - pos));
      m.runs_.push_back(static_cast<std::uint32_t>(e - s));
    }
    pos = e;
  }
  const std::int64_t tail = m.pixel_count() - pos;
  if (tail > 0 || m.runs_.empty()) m.runs_.push_back(static_cast<std::uint32_t>(tail));
  return m;
}

PixelMask PixelMask::from_bitmap(int height, int width, std::span<const std::uint8_t> bitmap) {
  require_grid(height, width);
  if (bitmap.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
    throw DimensionError("bitmap size does not match grid");
  }
  return from_region(height, width, 0, 0, height, width, bitmap);
}

PixelMask PixelMask::from_region(int height, int width, int row0, int col0, int rows, int cols,
                                 std::span<const std::uint8_t> bitmap) {
  require_grid(height, width);
  if (rows < 0 || cols < 0 ||
      bitmap.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
    throw DimensionError("region bitmap size does not match its extent");
  }
  std::vector<Interval> iv;
  for (int r = 0; r < rows; ++r) {
    const int v = row0 + r;
    if (v < 0 || v >= height) continue;
    const std::uint8_t* line = bitmap.data() + static_cast<std::size_t>(r) * cols;
    int c = 0;
    while (c < cols) {
      while (c < cols && !line[c]) ++c;
      const int start = c;
      while (c < cols && line[c]) ++c;
      if (start == c) break;
      const int h0 = std::max(col0 + start, 0);
      const int h1 = std::min(col0 + c, width);
      if (h0 >= h1) continue;
      const std::int64_t s = static_cast<std::int64_t>(v) * width + h0;
      const std::int64_t e = static_cast<std::int64_t>(v) * width + h1;
      if (!iv.empty() && iv.back().second == s) {
        iv.back().second = e;
      } else {
        iv.emplace_back(s, e);
      }
    }
  }
  return from_intervals(height, width, iv);
}

PixelMask PixelMask::from_pixels(int height, int width, std::span<const PixelCoord> pixels) {
  require_grid(height, width);
  std::vector<std::uint8_t> bitmap(static_cast<std::size_t>(height) * width, 0);
  for (const auto& p : pixels) {
    if (p.v < 0 || p.v >= height || p.h < 0 || p.h >= width) {
      throw DimensionError("pixel (" + std::to_string(p.v) + "," + std::to_string(p.h) +
                           ") outside grid");
    }
    bitmap[static_cast<std::size_t>(p.v) * width + p.h] = 1;
  }
  return from_bitmap(height, width, bitmap);
}

PixelMask PixelMask::rectangle(int height, int width, int row0, int col0, int rows, int cols) {
  require_grid(height, width);
  std::vector<RowSegment> segs;
  const int c0 = std::max(col0, 0), c1 = std::min(col0 + cols, width);
  if (c0 < c1) {
    for (int v = std::max(row0, 0); v < std::min(row0 + rows, height); ++v) {
      segs.push_back({v, c0, c1});
    }
  }
  return from_segments(height, width, segs);
}

PixelMask PixelMask::from_segments(int height, int width, std::span<const RowSegment> segments) {
  require_grid(height, width);
  std::vector<Interval> iv;
  iv.reserve(segments.size());
  for (const auto& seg : segments) {
    if (seg.row < 0 || seg.row >= height || seg.col_begin < 0 || seg.col_end > width ||
        seg.col_begin > seg.col_end) {
      throw DimensionError("row segment outside grid");
    }
    if (seg.col_begin == seg.col_end) continue;
    const std::int64_t s = static_cast<std::int64_t>(seg.row) * width + seg.col_begin;
    const std::int64_t e = static_cast<std::int64_t>(seg.row) * width + seg.col_end;
    if (!iv.empty() && s < iv.back().second) throw DimensionError("row segments not sorted");
    if (!iv.empty() && iv.back().second == s) {
      iv.back().second = e;
    } else {
      iv.emplace_back(s, e);
    }
  }
  return from_intervals(height, width, iv);
}

PixelMask PixelMask::parse(std::string_view text) {
  std::size_t pos = expect(text, 0, "size:");
  pos = expect(text, pos, "[");
  int height = 0, width = 0;
  pos = read_int(text, pos, height);
  pos = expect(text, pos, ",");
  pos = read_int(text, pos, width);
  pos = expect(text, pos, "]");
  pos = expect(text, pos, ";");
  pos = expect(text, pos, "counts:");
  pos = expect(text, pos, "[");
  std::vector<std::uint32_t> runs;
  pos = skip_space(text, pos);
  if (pos < text.size() && text[pos] != ']') {
    while (true) {
      std::uint32_t c = 0;
      pos = read_int(text, pos, c);
      runs.push_back(c);
      pos = skip_space(text, pos);
      if (pos < text.size() && text[pos] == ',') {
        ++pos;
        continue;
      }
      break;
    }
  }
  pos = expect(text, pos, "]");
  if (skip_space(text, pos) != text.size()) {
    throw ParseError("malformed RLE text: trailing characters");
  }
  if (height <= 0 || width <= 0) throw ParseError("malformed RLE text: non-positive size");
  return from_runs(height, width, std::move(runs));
}

std::string PixelMask::to_string() const {
  std::string out = "size:[" + std::to_string(height_) + "," + std::to_string(width_) + "]; counts:[";
  for (std::size_t k = 0; k < runs_.size(); ++k) {
    if (k) out += ',';
    out += std::to_string(runs_[k]);
  }
  out += ']';
  return out;
}

std::int64_t PixelMask::area() const {
  std::int64_t a = 0;
  for (std::size_t k = 1; k < runs_.size(); k += 2) a += runs_[k];
  return a;
}

bool PixelMask::contains(int v, int h) const {
  if (v < 0 || v >= height_ || h < 0 || h >= width_) return false;
  const std::int64_t target = static_cast<std::int64_t>(v) * width_ + h;
  std::int64_t pos = 0;
  for (std::size_t k = 0; k < runs_.size(); ++k) {
    pos += runs_[k];
    if (target < pos) return (k % 2) == 1;
  }
  return false;
}

std::vector<Interval> PixelMask::intervals() const {
  std::vector<Interval> iv;
  iv.reserve(runs_.size() / 2);
  std::int64_t pos = 0;
  for (std::size_t k = 0; k < runs_.size(); ++k) {
    const std::int64_t next = pos + runs_[k];
    if ((k % 2) == 1 && next > pos) iv.emplace_back(pos, next);
    pos = next;
  }
  return iv;
}

std::vector<RowSegment> PixelMask::segments() const {
  std::vector<RowSegment> segs;
  for (auto [s, e] : intervals()) {
    while (s < e) {
      const int row = static_cast<int>(s / width_);
      const std::int64_t row_end = static_cast<std::int64_t>(row + 1) * width_;
      const std::int64_t stop = std::min(e, row_end);
      segs.push_back({row, static_cast<int>(s - static_cast<std::int64_t>(row) * width_),
                      static_cast<int>(stop - static_cast<std::int64_t>(row) * width_)});
      s = stop;
    }
  }
  return segs;
}

std::vector<std::uint8_t> PixelMask::to_bitmap() const {
  std::vector<std::uint8_t> bitmap(static_cast<std::size_t>(pixel_count()), 0);
  for (const auto& [s, e] : intervals()) {
    std::fill(bitmap.begin() + s, bitmap.begin() + e, std::uint8_t{1});
  }
  return bitmap;
}

std::int64_t intersection_area(const PixelMask& a, const PixelMask& b) {
  require_same_grid(a, b);
  const auto ia = a.intervals();
  const auto ib = b.intervals();
  std::int64_t total = 0;
  std::size_t x = 0, y = 0;
  while (x < ia.size() && y < ib.size()) {
    const std::int64_t lo = std::max(ia[x].first, ib[y].first);
    const std::int64_t hi = std::min(ia[x].second, ib[y].second);
    if (lo < hi) total += hi - lo;
    if (ia[x].second < ib[y].second) {
      ++x;
    } else {
      ++y;
    }
  }
  return total;
}

double overlap_ratio(const PixelMask& i, const PixelMask& j) {
  require_same_grid(i, j);
  const std::int64_t area = i.area();
  if (area == 0) throw EmptyMaskError("overlap_ratio: first mask is empty");
  return static_cast<double>(intersection_area(i, j)) / static_cast<double>(area);
}

double iou(const PixelMask& i, const PixelMask& j) {
  require_same_grid(i, j);
  const std::int64_t inter = intersection_area(i, j);
  const std::int64_t uni = i.area() + j.area() - inter;
  if (uni == 0) throw EmptyMaskError("iou: both masks are empty");
  return static_cast<double>(inter) / static_cast<double>(uni);
}

namespace {

PixelMask combine(const PixelMask& a, const PixelMask& b, bool (*keep)(bool, bool)) {
  require_same_grid(a, b);
  const auto iv = merge_intervals(a.intervals(), b.intervals(), keep);
  std::vector<std::uint32_t> runs;
  std::int64_t pos = 0;
  for (const auto& [s, e] : iv) {
    runs.push_back(static_cast<std::uint32_t>(s - pos));
    runs.push_back(static_cast<std::uint32_t>(e - s));
    pos = e;
  }
  runs.push_back(static_cast<std::uint32_t>(a.pixel_count() - pos));
  return PixelMask::from_runs(a.height(), a.width(), std::move(runs));
}

}  // namespace

PixelMask mask_union(const PixelMask& a, const PixelMask& b) {
  return combine(a, b, [](bool x, bool y) { return x || y; });
}

PixelMask mask_intersection(const PixelMask& a, const PixelMask& b) {
  return combine(a, b, [](bool x, bool y) { return x && y; });
}

PixelMask mask_difference(const PixelMask& a, const PixelMask& b) {
  return combine(a, b, [](bool x, bool y) { return x && !y; });
}

CenterPoint geometric_center(const PixelMask& mask) {
  std::int64_t count = 0, sum_v = 0, sum_h = 0;
  for (const auto& seg : mask.segments()) {
    const std::int64_t n = seg.col_end - seg.col_begin;
    count += n;
    sum_v += n * seg.row;
    // Sum of columns col_begin .. col_end-1.
    sum_h += (static_cast<std::int64_t>(seg.col_begin) + seg.col_end - 1) * n / 2;
  }
  if (count == 0) throw EmptyMaskError("geometric_center: mask is empty");
  return {static_cast<double>(sum_v) / static_cast<double>(count),
          static_cast<double>(sum_h) / static_cast<double>(count)};
}

InnerBoundary split_inner_boundary(const PixelMask& mask) {
  const BoundingBox box = bounding_box(mask);
  // Local bitmap over the box padded by one pixel on every side. Padding
  // outside the image stays zero, so border pixels never become inner.
  const int rows = box.rows() + 2;
  const int cols = box.cols() + 2;
  const int row0 = box.v_min - 1;
  const int col0 = box.h_min - 1;
  std::vector<std::uint8_t> local(static_cast<std::size_t>(rows) * cols, 0);
  for (const auto& seg : mask.segments()) {
    std::uint8_t* line = local.data() + static_cast<std::size_t>(seg.row - row0) * cols;
    std::fill(line + (seg.col_begin - col0), line + (seg.col_end - col0), std::uint8_t{1});
  }

  std::vector<std::uint8_t> vertical(static_cast<std::size_t>(cols), 0);
  std::vector<std::uint8_t> inner(static_cast<std::size_t>(rows) * cols, 0);
  const auto row_span = [&](int r) {
    return std::span<const std::uint8_t>(local.data() + static_cast<std::size_t>(r) * cols,
                                         static_cast<std::size_t>(cols));
  };
  for (int r = 1; r + 1 < rows; ++r) {
    kernels::and3(row_span(r - 1), row_span(r), row_span(r + 1), vertical);
    const std::size_t n = static_cast<std::size_t>(cols) - 2;
    std::span<const std::uint8_t> vs(vertical);
    kernels::and3(vs.subspan(0, n), vs.subspan(1, n), vs.subspan(2, n),
                  std::span<std::uint8_t>(inner.data() + static_cast<std::size_t>(r) * cols + 1, n));
  }
  PixelMask inner_mask =
      PixelMask::from_region(mask.height(), mask.width(), row0, col0, rows, cols, inner);
  PixelMask boundary = mask_difference(mask, inner_mask);
  return {std::move(inner_mask), std::move(boundary)};
}

PixelMask shift_mask(const PixelMask& mask, int dv, int dh) {
  std::vector<RowSegment> shifted;
  for (const auto& seg : mask.segments()) {
    const int row = seg.row + dv;
    if (row < 0 || row >= mask.height()) continue;
    const int c0 = std::max(seg.col_begin + dh, 0);
    const int c1 = std::min(seg.col_end + dh, mask.width());
    if (c0 >= c1) continue;
    shifted.push_back({row, c0, c1});
  }
  return PixelMask::from_segments(mask.height(), mask.width(), shifted);
}

PixelCoord round_shift(const CenterPoint& delta) {
  // std::lround rounds halfway cases away from zero.
  return {static_cast<int>(std::lround(delta.v)), static_cast<int>(std::lround(delta.h))};
}

PixelMask shift_mask(const PixelMask& mask, const CenterPoint& delta) {
  const PixelCoord d = round_shift(delta);
  return shift_mask(mask, d.v, d.h);
}

BoundingBox bounding_box(const PixelMask& mask) {
  const auto segs = mask.segments();
  if (segs.empty()) throw EmptyMaskError("bounding_box: mask is empty");
  BoundingBox box{segs.front().row, segs.back().row, segs.front().col_begin,
                  segs.front().col_end - 1};
  for (const auto& seg : segs) {
    box.h_min = std::min(box.h_min, seg.col_begin);
    box.h_max = std::max(box.h_max, seg.col_end - 1);
  }
  return box;
}

double box_iou(const BoundingBox& a, const BoundingBox& b) {
  const int v0 = std::max(a.v_min, b.v_min), v1 = std::min(a.v_max, b.v_max);
  const int h0 = std::max(a.h_min, b.h_min), h1 = std::min(a.h_max, b.h_max);
  std::int64_t inter = 0;
  if (v0 <= v1 && h0 <= h1) inter = static_cast<std::int64_t>(v1 - v0 + 1) * (h1 - h0 + 1);
  const std::int64_t uni = a.area() + b.area() - inter;
  return uni > 0 ? static_cast<double>(inter) / static_cast<double>(uni) : 0.0;
}

}  // namespace fnr
