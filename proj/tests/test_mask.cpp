#include <doctest.h>

#include "fnr/error.hpp"
#include "fnr/mask.hpp"
#include "oracles.hpp"

using namespace fnr;

namespace {

PixelMask block(int H, int W, int v, int h, int rows, int cols) { return PixelMask::rectangle(H, W, v, h, rows, cols); }

}  // namespace

TEST_CASE("overlap ratio and iou examples") {
  const PixelMask a = block(4, 4, 0, 0, 2, 2);
  const PixelMask b = block(4, 4, 0, 1, 2, 2);
  CHECK(overlap_ratio(a, a) == 1.0);
  CHECK(overlap_ratio(a, block(4, 4, 2, 2, 2, 2)) == 0.0);
  CHECK(overlap_ratio(a, b) == 0.5);
  CHECK(iou(a, a) == 1.0);
  CHECK(iou(a, b) == doctest::Approx(2.0 / 6.0).epsilon(1e-15));
  CHECK(intersection_area(a, b) == 2);
}

TEST_CASE("overlap errors") {
  const PixelMask a = block(4, 4, 0, 0, 2, 2);
  CHECK_THROWS_AS(overlap_ratio(a, block(5, 4, 0, 0, 1, 1)), DimensionError);
  CHECK_THROWS_AS(overlap_ratio(PixelMask(4, 4), a), EmptyMaskError);
  CHECK_THROWS_AS(iou(PixelMask(4, 4), PixelMask(4, 4)), EmptyMaskError);
  CHECK(iou(PixelMask(4, 4), a) == 0.0);
}

TEST_CASE("geometric center examples") {
  const std::vector<PixelCoord> one = {{3, 7}};
  CHECK(geometric_center(PixelMask::from_pixels(10, 10, one)) == CenterPoint{3.0, 7.0});
  CHECK(geometric_center(block(5, 5, 0, 0, 2, 2)) == CenterPoint{0.5, 0.5});
  const std::vector<PixelCoord> ell = {{0, 0}, {0, 1}, {1, 0}};
  const CenterPoint c = geometric_center(PixelMask::from_pixels(4, 4, ell));
  CHECK(c.v == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(c.h == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK_THROWS_AS(geometric_center(PixelMask(3, 3)), EmptyMaskError);
}

TEST_CASE("inner and boundary examples") {
  auto sq3 = split_inner_boundary(block(10, 10, 3, 3, 3, 3));
  CHECK(sq3.inner.area() == 1);
  CHECK(sq3.boundary.area() == 8);
  auto sq4 = split_inner_boundary(block(10, 10, 3, 3, 4, 4));
  CHECK(sq4.inner.area() == 4);
  CHECK(sq4.boundary.area() == 12);
  auto line = split_inner_boundary(block(10, 10, 5, 0, 1, 10));
  CHECK(line.inner.empty());
  CHECK(line.boundary.area() == 10);
  // Pixels on the image border never count as inner.
  auto full = split_inner_boundary(block(3, 3, 0, 0, 3, 3));
  CHECK(full.inner.area() == 1);
  auto corner = split_inner_boundary(block(3, 3, 0, 0, 2, 2));
  CHECK(corner.inner.empty());
  CHECK_THROWS_AS(split_inner_boundary(PixelMask(3, 3)), EmptyMaskError);
}

TEST_CASE("shift examples") {
  const PixelMask a = block(4, 4, 0, 0, 2, 2);
  CHECK(shift_mask(a, 0, 0) == a);
  CHECK(shift_mask(a, 1, 1) == block(4, 4, 1, 1, 2, 2));
  const PixelMask c = shift_mask(block(3, 3, 0, 0, 2, 2), 2, 2);
  CHECK(c.area() == 1);
  CHECK(c.contains(2, 2));
  CHECK(shift_mask(a, 10, 0).empty());
  CHECK(shift_mask(a, -5, -5).empty());
}

TEST_CASE("shift rounding is half away from zero") {
  CHECK(round_shift({0.5, -0.5}) == PixelCoord{1, -1});
  CHECK(round_shift({1.49, -1.51}) == PixelCoord{1, -2});
  CHECK(round_shift({2.5, -2.5}) == PixelCoord{3, -3});
}

TEST_CASE("bounding box examples") {
  const std::vector<PixelCoord> one = {{3, 7}};
  CHECK(bounding_box(PixelMask::from_pixels(10, 10, one)) == BoundingBox{3, 3, 7, 7});
  CHECK(bounding_box(block(4, 4, 0, 0, 2, 2)) == BoundingBox{0, 1, 0, 1});
  const std::vector<PixelCoord> ell = {{0, 0}, {0, 1}, {1, 0}};
  CHECK(bounding_box(PixelMask::from_pixels(4, 4, ell)) == BoundingBox{0, 1, 0, 1});
  CHECK(box_iou({0, 1, 0, 1}, {0, 1, 0, 1}) == 1.0);
  CHECK(box_iou({0, 1, 0, 1}, {0, 1, 1, 2}) == doctest::Approx(2.0 / 6.0));
}

TEST_CASE("rle text form and canonical runs") {
  const PixelMask a = PixelMask::parse("size:[2,3]; counts:[1,2,3]");
  CHECK(a.area() == 2);
  CHECK(a.contains(0, 1));
  CHECK(a.contains(0, 2));
  CHECK(a.to_string() == "size:[2,3]; counts:[1,2,3]");
  // Leading zero run is kept, interior zeros merge.
  const PixelMask b = PixelMask::from_runs(2, 2, {0, 1, 0, 1, 2});
  CHECK(b.runs() == std::vector<std::uint32_t>{0, 2, 2});
  CHECK_THROWS_AS(PixelMask::from_runs(2, 2, {1, 1}), ParseError);
  CHECK_THROWS_AS(PixelMask::parse("size:[2,2] counts:[4]"), ParseError);
  CHECK_THROWS_AS(PixelMask::parse("size:[2,2]; counts:[1,x]"), ParseError);
}

TEST_CASE("random masks agree with dense bitmaps") {
  Rng rng(11);
  for (int k = 0; k < 200; ++k) {
    const oracle::Dense da = oracle::random_dense(rng, 40);
    oracle::Dense db(da.height, da.width);
    {
      Rng r2(rng.next());
      oracle::Dense t = oracle::random_dense(r2, 40);
      for (int v = 0; v < std::min(t.height, da.height); ++v) {
        for (int h = 0; h < std::min(t.width, da.width); ++h) db.at(v, h) = t.at(v, h);
      }
    }
    const PixelMask a = oracle::to_mask(da);
    const PixelMask b = oracle::to_mask(db);
    // Decode/encode round trips.
    CHECK(oracle::from_runs(a) == da);
    CHECK(PixelMask::parse(a.to_string()) == a);
    CHECK(PixelMask::from_runs(a.height(), a.width(), a.runs()) == a);
    CHECK(a.to_bitmap() == da.px);
    CHECK(a.area() == oracle::area(da));
    CHECK(intersection_area(a, b) == oracle::intersection(da, db));
    CHECK(oracle::from_runs(mask_union(a, b)).px.size() == da.px.size());
    CHECK(mask_union(a, b).area() == oracle::union_area(da, db));
    CHECK(mask_intersection(a, b).area() == oracle::intersection(da, db));
    CHECK(mask_difference(a, b).area() == oracle::area(da) - oracle::intersection(da, db));
    if (!a.empty()) {
      CHECK(overlap_ratio(a, b) == oracle::overlap(da, db));
      if (!b.empty()) CHECK(overlap_ratio(a, b) >= iou(a, b));
      CHECK(iou(a, b) == iou(b, a));
      const auto ib = split_inner_boundary(a);
      const auto [oi, ob] = oracle::inner_boundary(da);
      CHECK(oracle::from_runs(ib.inner) == oi);
      CHECK(oracle::from_runs(ib.boundary) == ob);
      CHECK(ib.inner.area() + ib.boundary.area() == a.area());
      CHECK(mask_intersection(ib.inner, ib.boundary).empty());
      const int dv = static_cast<int>(rng.uniform_int(-8, 8));
      const int dh = static_cast<int>(rng.uniform_int(-8, 8));
      const PixelMask s = shift_mask(a, dv, dh);
      CHECK(oracle::from_runs(s) == oracle::shift(da, dv, dh));
      const PixelMask back = shift_mask(s, -dv, -dh);
      CHECK(mask_difference(back, a).empty());
      if (s.area() == a.area()) CHECK(back == a);
    }
  }
}

TEST_CASE("masks built from segments and regions") {
  const std::vector<RowSegment> segs = {{0, 1, 3}, {2, 0, 1}};
  const PixelMask m = PixelMask::from_segments(3, 4, segs);
  CHECK(m.area() == 3);
  CHECK(m.segments().size() == 2);
  const std::vector<std::uint8_t> bits = {1, 1, 0, 1};
  const PixelMask r = PixelMask::from_region(4, 4, 3, 3, 2, 2, bits);
  CHECK(r.area() == 1);
  CHECK(r.contains(3, 3));
}
