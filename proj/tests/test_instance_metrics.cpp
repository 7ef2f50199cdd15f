#include <doctest.h>

#include "fixtures.hpp"
#include "fnr/error.hpp"
#include "fnr/fn_detector.hpp"
#include "fnr/instance_metrics.hpp"
#include "fnr/synth.hpp"
#include "fnr/tracker.hpp"
#include "oracles.hpp"

using namespace fnr;

namespace {

DepthMap constant_depth(int H, int W, float d) {
  DepthMap m;
  m.height = H;
  m.width = W;
  m.values.assign(static_cast<std::size_t>(H) * W, d);
  return m;
}

InstancePrediction tracked(PixelMask m, int track, double score, int cls = 0) {
  InstancePrediction p;
  p.mask = std::move(m);
  p.track_id = track;
  p.score = score;
  p.class_id = cls;
  return p;
}

const MetricRecord& find(const std::vector<MetricRecord>& rs, int track, int frame) {
  for (const auto& r : rs) {
    if (r.track_id == track && r.frame == frame) return r;
  }
  throw std::runtime_error("record not found");
}

}  // namespace

TEST_CASE("size metric examples") {
  const SizeMetrics s3 = size_metrics(PixelMask::rectangle(10, 10, 3, 3, 3, 3));
  CHECK(s3.size == 9);
  CHECK(s3.inner == 1);
  CHECK(s3.boundary == 8);
  CHECK(s3.size_rel == 1.125);
  CHECK(s3.inner_rel == 0.125);
  const SizeMetrics s1 = size_metrics(PixelMask::rectangle(10, 10, 3, 3, 1, 1));
  CHECK(s1.size == 1);
  CHECK(s1.inner == 0);
  CHECK(s1.boundary == 1);
  CHECK(s1.size_rel == 1.0);
  CHECK(s1.inner_rel == 0.0);
  CHECK(size_metrics(PixelMask::rectangle(10, 10, 3, 3, 4, 4)).size_rel == doctest::Approx(16.0 / 12.0));
  CHECK_THROWS_AS(size_metrics(PixelMask(4, 4)), EmptyMaskError);
}

TEST_CASE("depth metric examples") {
  const PixelMask sq = PixelMask::rectangle(10, 10, 3, 3, 3, 3);
  const DepthMetrics c = depth_metrics(sq, constant_depth(10, 10, 5.0f));
  CHECK(c.mean == 5.0);
  CHECK(c.inner == 5.0);
  CHECK(c.boundary == 5.0);

  DepthMap ring = constant_depth(10, 10, 0.0f);
  ring.values[4 * 10 + 4] = 9.0f;
  const DepthMetrics r = depth_metrics(sq, ring);
  CHECK(r.mean == 1.0);
  CHECK(r.inner == 9.0);
  CHECK(r.boundary == 0.0);
  CHECK(r.mean_rel == 1.125);
  CHECK(r.inner_rel == 9.0 * 0.125);

  const DepthMetrics one = depth_metrics(PixelMask::rectangle(10, 10, 0, 0, 1, 1), constant_depth(10, 10, 3.0f));
  CHECK(one.inner == 0.0);
  CHECK(one.inner_rel == 0.0);
  CHECK(one.mean == 3.0);
  CHECK_THROWS_AS(depth_metrics(sq, constant_depth(9, 10, 1.0f)), DimensionError);
}

TEST_CASE("occlusion examples") {
  const int H = 20, W = 20;
  const InstancePrediction prev = tracked(PixelMask::rectangle(H, W, 0, 0, 2, 4), 0, 1);
  const InstancePrediction curr = tracked(PixelMask::rectangle(H, W, 10, 10, 2, 4), 0, 1);
  CHECK(occlusion(&prev, curr, {}) == 0.0);
  CHECK(occlusion(nullptr, curr, {}) == 0.0);
  const InstancePrediction half = tracked(PixelMask::rectangle(H, W, 10, 10, 2, 2), 1, 1);
  const InstancePrediction* others[] = {&half};
  CHECK(occlusion(&prev, curr, others) == 0.5);
  const InstancePrediction big = tracked(PixelMask::rectangle(H, W, 8, 8, 6, 8), 2, 1);
  const InstancePrediction* cover[] = {&big};
  CHECK(occlusion(&prev, curr, cover) == 1.0);
}

TEST_CASE("temporal deviation examples") {
  const std::vector<int> t = {1, 2, 3};
  const std::vector<double> sizes = {10, 12, 14};
  CHECK(temporal_deviation(t, sizes, 4, 20.0) == doctest::Approx(4.0));
  const std::vector<double> flat = {7, 7, 7};
  CHECK(temporal_deviation(t, flat, 9, 7.0) == doctest::Approx(0.0));
  CHECK(temporal_deviation(std::span(t).first(1), std::span(sizes).first(1), 4, 20.0) == 0.0);
  const std::vector<TimedCenter> cs = {{1, {0, 0}}, {2, {1, 1}}};
  CHECK(temporal_deviation(cs, 3, {5, 6}) == doctest::Approx(5.0));
}

TEST_CASE("aspect ratio and deformation examples") {
  CHECK(aspect_ratio(PixelMask::rectangle(10, 10, 0, 0, 3, 3)) == 1.0);
  CHECK(aspect_ratio(PixelMask::rectangle(10, 10, 0, 0, 4, 2)) == 2.0);
  CHECK(aspect_ratio(PixelMask::rectangle(10, 10, 5, 5, 1, 1)) == 1.0);

  const InstancePrediction a = tracked(PixelMask::rectangle(12, 12, 1, 1, 3, 4), 0, 1);
  const InstancePrediction moved = tracked(PixelMask::rectangle(12, 12, 6, 5, 3, 4), 0, 1);
  CHECK(deformation(&a, a) == 1.0);
  CHECK(deformation(&a, moved) == 1.0);
  CHECK(deformation(nullptr, moved) == 1.0);

  // 2x2 block shrinking to its top-left pixel: the center moves by
  // (-0.5, -0.5), which rounds to (-1, -1).
  const InstancePrediction block = tracked(PixelMask::rectangle(10, 10, 4, 4, 2, 2), 0, 1);
  const std::vector<PixelCoord> px = {{4, 4}};
  const InstancePrediction corner = tracked(PixelMask::from_pixels(10, 10, px), 0, 1);
  const oracle::Dense shifted = oracle::shift(oracle::from_runs(block.mask), -1, -1);
  const double expected = oracle::iou(shifted, oracle::from_runs(corner.mask));
  CHECK(expected == 0.25);
  CHECK(deformation(&block, corner) == expected);
}

TEST_CASE("records for a hand-built two-frame fixture") {
  const int H = 12, W = 12;
  Sequence seq;
  seq.name = "hand";
  seq.height = H;
  seq.width = W;
  for (int t = 0; t < 2; ++t) {
    Frame f;
    f.index = t;
    f.height = H;
    f.width = W;
    f.depth = constant_depth(H, W, 10.0f);
    seq.frames.push_back(f);
  }
  seq.frames[0].instances.push_back(tracked(PixelMask::rectangle(H, W, 2, 2, 3, 3), 0, 0.8));
  seq.frames[1].instances.push_back(tracked(PixelMask::rectangle(H, W, 3, 3, 3, 3), 0, 0.6));
  seq.frames[1].instances.push_back(tracked(PixelMask::rectangle(H, W, 3, 5, 3, 3), 1, 0.7, 1));
  seq.frames[1].depth->values[4 * W + 4] = 4.0f;

  const auto recs = compute_sequence(seq, 0, nullptr);
  REQUIRE(recs.size() == 3);
  CHECK(recs[0].frame == 0);
  CHECK(recs[1].track_id == 0);
  CHECK(recs[2].track_id == 1);

  const MetricRecord& a0 = find(recs, 0, 0);
  CHECK(a0.size == 9);
  CHECK(a0.depth_mean == 10.0);
  CHECK(a0.depth_inner == 10.0);
  CHECK(a0.depth_rel == 11.25);
  CHECK(a0.depth_inner_rel == 1.25);
  CHECK(a0.occlusion == 0.0);
  CHECK(a0.deformation == 1.0);
  CHECK(a0.duration == 1);
  CHECK_FALSE(a0.event);
  CHECK(a0.center == CenterPoint{3, 3});

  const MetricRecord& a1 = find(recs, 0, 1);
  CHECK(a1.size == 9);
  CHECK(a1.size_inner == 1);
  CHECK(a1.size_boundary == 8);
  CHECK(a1.size_rel == 1.125);
  CHECK(a1.size_inner_rel == 0.125);
  CHECK(a1.depth_mean == doctest::Approx(84.0 / 9.0).epsilon(1e-15));
  CHECK(a1.depth_inner == 4.0);
  CHECK(a1.depth_boundary == 10.0);
  CHECK(a1.depth_rel == doctest::Approx(10.5).epsilon(1e-15));
  CHECK(a1.depth_inner_rel == 0.5);
  CHECK(a1.center == CenterPoint{4, 4});
  CHECK(a1.score == 0.6);
  CHECK(a1.occlusion == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(a1.dev_size == 0.0);
  CHECK(a1.dev_center == 0.0);
  CHECK(a1.dev_depth == 0.0);
  CHECK(a1.aspect_ratio == 1.0);
  CHECK(a1.deformation == 1.0);
  CHECK(a1.duration == 0);
  CHECK_FALSE(a1.event);
  CHECK(is_absent(a1.survival));

  const MetricRecord& b1 = find(recs, 1, 1);
  CHECK(b1.class_id == 1);
  CHECK(b1.occlusion == 0.0);
}

TEST_CASE("linear motion gives zero deviations") {
  const fixtures::MovingObject obj;
  Sequence seq = fixtures::moving_object(obj, 12, fixtures::range(0, 12));
  for (auto& f : seq.frames) {
    f.depth = constant_depth(obj.height, obj.width, 20.0f);
    for (auto& i : f.instances) i.track_id = 0;
  }
  const auto recs = compute_sequence(seq, 0, nullptr);
  REQUIRE(recs.size() == 12);
  for (const auto& r : recs) {
    CHECK(r.dev_center == doctest::Approx(0.0));
    CHECK(r.dev_center < 1e-9);
    CHECK(r.dev_size < 1e-9);
    CHECK(r.dev_depth < 1e-9);
    CHECK(r.deformation == 1.0);
  }
  CHECK(recs.back().duration == 0);
  CHECK(recs.front().duration == 11);
}

TEST_CASE("record invariants on a synthetic scene") {
  SynthConfig cfg;
  cfg.num_sequences = 1;
  cfg.frames_per_sequence = 60;
  const Sequence seq = generate_scene(cfg).front();
  const DetectionResult det = run_detection(seq, TrackerConfig{}, DetectorConfig{});
  const auto recs = compute_sequence(det.sequence, 0, nullptr);
  std::size_t total = 0;
  for (const auto& t : collect_tracks(det.sequence.frames)) total += t.length();
  CHECK(recs.size() == total);
  bool saw_detected = false;
  for (std::size_t k = 0; k < recs.size(); ++k) {
    const auto& r = recs[k];
    CHECK(r.size == r.size_inner + r.size_boundary);
    CHECK(r.size_boundary >= 1);
    CHECK(r.size_rel >= 1.0);
    CHECK(r.size_inner_rel == doctest::Approx(r.size_rel - 1.0));
    CHECK(r.occlusion >= 0.0);
    CHECK(r.occlusion <= 1.0);
    CHECK(r.deformation >= 0.0);
    CHECK(r.deformation <= 1.0);
    CHECK(r.dev_size >= 0.0);
    CHECK(r.dev_center >= 0.0);
    CHECK(r.dev_depth >= 0.0);
    CHECK(r.duration >= 0);
    if (r.origin == Origin::detected) saw_detected = true;
    if (k > 0) CHECK(std::pair(recs[k - 1].frame, recs[k - 1].track_id) < std::pair(r.frame, r.track_id));
  }
  CHECK(saw_detected);
}

TEST_CASE("metrics csv round trip") {
  SynthConfig cfg;
  cfg.num_sequences = 1;
  cfg.frames_per_sequence = 20;
  const Sequence seq = generate_scene(cfg).front();
  const DetectionResult det = run_detection(seq, TrackerConfig{}, DetectorConfig{});
  auto recs = compute_sequence(det.sequence, 0, nullptr);
  recs[0].survival = 0.25;
  recs[0].iou_gt = 0.75;
  recs[0].gt_track_id = 3;
  const std::string csv = metrics_csv(recs);
  CHECK(csv.substr(0, csv.find('\n')) == metrics_csv_header());
  const auto back = parse_metrics_csv(csv);
  REQUIRE(back.size() == recs.size());
  CHECK(metrics_csv(back) == csv);
  CHECK(back[0].survival == 0.25);
  CHECK(is_absent(back[1].survival));

  CHECK_THROWS_WITH_AS(parse_metrics_csv("bad header\n"), doctest::Contains("metrics.csv:1"), ParseError);
  std::string broken = csv;
  broken += "x,1,2\n";
  const auto lines = std::count(csv.begin(), csv.end(), '\n');
  const std::string where = "m.csv:" + std::to_string(lines + 1);
  CHECK_THROWS_WITH_AS(parse_metrics_csv(broken, "m.csv"), doctest::Contains(where.c_str()), ParseError);
}

TEST_CASE("format double is shortest round trip") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(1.0) == "1");
  CHECK(format_double(kAbsent) == "");
  const double x = 1.0 / 3.0;
  CHECK(std::stod(format_double(x)) == x);
}
