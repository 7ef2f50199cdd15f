#include <doctest.h>

#include "fixtures.hpp"
#include "fnr/error.hpp"
#include "fnr/evaluator.hpp"
#include "fnr/rng.hpp"
#include "oracles.hpp"

using namespace fnr;

TEST_CASE("match_gt examples") {
  const int H = 10, W = 10;
  GroundTruthFrame gt;
  gt.instances.push_back({PixelMask::rectangle(H, W, 0, 0, 2, 2), 0, 7});
  gt.instances.push_back({PixelMask::rectangle(H, W, 0, 3, 2, 1), 0, 8});
  const PixelMask same = PixelMask::rectangle(H, W, 0, 0, 2, 2);
  const PixelMask far = PixelMask::rectangle(H, W, 8, 8, 2, 2);
  // Two pixels on gt 7, one on gt 8.
  const std::vector<PixelCoord> px = {{0, 1}, {1, 1}, {0, 3}};
  const PixelMask straddle = PixelMask::from_pixels(H, W, px);
  const PixelMask* preds[] = {&same, &far, &straddle};
  const auto m = match_gt(preds, gt);
  CHECK(m[0].gt_track_id == 7);
  CHECK(m[0].iou_gt == 1.0);
  CHECK_FALSE(m[1].gt_track_id.has_value());
  CHECK(m[1].iou_gt == 0.0);
  CHECK(m[2].gt_track_id == 7);
  CHECK(m[2].iou_gt == doctest::Approx(2.0 / 5.0));
}

TEST_CASE("auroc examples and pair oracle") {
  const std::vector<double> s = {0.1, 0.4, 0.35, 0.8};
  const std::vector<int> y = {0, 0, 1, 1};
  CHECK(auroc(s, y) == 0.75);
  const std::vector<double> ranked = {0.1, 0.2, 0.8, 0.9};
  CHECK(auroc(ranked, y) == 1.0);
  const std::vector<int> inv = {1, 1, 0, 0};
  CHECK(auroc(ranked, inv) == 0.0);
  const std::vector<int> one_class = {1, 1, 1, 1};
  CHECK_THROWS_AS(auroc(s, one_class), ConfigError);

  Rng rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = static_cast<std::size_t>(rng.uniform_int(2, 200));
    std::vector<double> sc(n);
    std::vector<int> lab(n);
    for (std::size_t i = 0; i < n; ++i) {
      sc[i] = static_cast<double>(rng.uniform_int(0, 20)) / 20.0;  // plenty of ties
      lab[i] = rng.bernoulli(0.4);
    }
    lab[0] = 0;
    lab[1] = 1;
    CHECK(auroc(sc, lab) == oracle::auroc_pairs(sc, lab));
    std::vector<double> mono(n);
    for (std::size_t i = 0; i < n; ++i) mono[i] = std::exp(3 * sc[i]) - 5;
    CHECK(auroc(mono, lab) == auroc(sc, lab));
  }
}

TEST_CASE("accuracy and pearson") {
  const std::vector<int> y = {1, 0, 1, 0};
  CHECK(accuracy(std::vector<double>{0.9, 0.1, 0.8, 0.2}, y) == 1.0);
  CHECK(accuracy(std::vector<double>{0.1, 0.9, 0.2, 0.8}, y) == 0.0);
  CHECK(accuracy(std::vector<double>{0.9, 0.1, 0.8, 0.7}, y) == 0.75);
  CHECK_THROWS(accuracy(std::vector<double>{}, std::vector<int>{}));
  const std::vector<double> xs = {1, 2, 3, 5};
  const std::vector<double> neg = {-1, -2, -3, -5};
  CHECK(pearson(xs, xs) == doctest::Approx(1.0));
  CHECK(pearson(xs, neg) == doctest::Approx(-1.0));
  CHECK_THROWS_AS(pearson(xs, std::vector<double>{2, 2, 2, 2}), ConfigError);
}

TEST_CASE("iou threshold semantics") {
  CHECK(meets_iou(0.5, 0.5));
  CHECK(meets_iou(0.6, 0.5));
  CHECK_FALSE(meets_iou(0.49, 0.5));
  CHECK_FALSE(meets_iou(0.0, 0.0));
  CHECK(meets_iou(0.01, 0.0));
}

TEST_CASE("greedy one-to-one matching") {
  const std::vector<std::vector<double>> m = {{0.9, 0.6}, {0.8, 0.0}};
  const auto pairs = greedy_match(m, 0.5);
  REQUIRE(pairs.size() == 1);
  CHECK(pairs[0].pred == 0);
  CHECK(pairs[0].gt == 0);
  const auto low = greedy_match(m, 0.0);
  CHECK(low.size() == 1);
}

TEST_CASE("exclusion rule") {
  const fixtures::MovingObject obj;
  // Found from frame 5 on.
  const Sequence late = fixtures::moving_object(obj, 10, fixtures::range(5, 10));
  const auto adm = exclusion_rule(late, 0.5);
  CHECK(adm.size() == 5);
  for (int t = 0; t < 10; ++t) CHECK(adm.count({1, t}) == (t >= 5 ? 1u : 0u));
  // Found from the start: nothing dropped, including later misses.
  const Sequence early = fixtures::moving_object(obj, 10, {0, 3});
  CHECK(exclusion_rule(early, 0.5).size() == 10);
  // Never found.
  const Sequence never = fixtures::moving_object(obj, 10, {});
  CHECK(exclusion_rule(never, 0.5).empty());
  // Detected instances do not make a gt track admissible.
  Sequence det = never;
  InstancePrediction d;
  d.mask = obj.at(2);
  d.origin = Origin::detected;
  det.frames[2].instances.push_back(d);
  CHECK(exclusion_rule(det, 0.5).empty());
}

TEST_CASE("occlusion levels") {
  CHECK(occlusion_level(0.0) == 0);
  CHECK(occlusion_level(0.05) == 1);
  CHECK(occlusion_level(0.1) == 1);
  CHECK(occlusion_level(0.55) == 6);
  CHECK(occlusion_level_label(6) == "(0.5,0.6]");
  CHECK(occlusion_level(1.0) == 10);
  const BoundingBox a{0, 9, 0, 9};
  CHECK(occlusion_iou_bb(a, {}) == 0.0);
  const BoundingBox same[] = {a};
  CHECK(occlusion_iou_bb(a, same) == 1.0);
  CHECK(occlusion_level(occlusion_iou_bb(a, same)) == 10);
}

TEST_CASE("sweep counts and curve") {
  const int H = 20, W = 20;
  GroundTruthFrame gt;
  gt.instances.push_back({PixelMask::rectangle(H, W, 0, 0, 4, 4), 0, 1});
  gt.instances.push_back({PixelMask::rectangle(H, W, 10, 10, 4, 4), 0, 2});
  const PixelMask p0 = PixelMask::rectangle(H, W, 0, 0, 4, 4);
  const PixelMask p1 = PixelMask::rectangle(H, W, 10, 10, 4, 4);
  const PixelMask p2 = PixelMask::rectangle(H, W, 0, 0, 4, 3);  // duplicate hit on gt 1
  const PixelMask p3 = PixelMask::rectangle(H, W, 16, 0, 2, 2);  // hits nothing
  const PixelMask* preds[] = {&p0, &p1, &p2, &p3};
  const std::vector<double> sel = {0.9, 0.6, 0.7, 0.3};
  const std::set<GtKey> adm = {{1, 0}, {2, 0}};
  gt.index = 0;
  const SweepFrame f = prepare_sweep_frame(preds, sel, gt, adm);
  const std::vector<SweepFrame> frames = {f};
  const std::vector<double> thr = {0.0, 0.5, 0.8, 0.95};
  const SweepResult r = sweep(frames, thr, 0.5);
  REQUIRE(r.points.size() == 3);
  CHECK(r.skipped_thresholds == std::vector<double>{0.95});
  CHECK(r.points[0].tp == 2);
  CHECK(r.points[0].fp == 2);
  CHECK(r.points[0].fn == 0);
  CHECK(r.points[1].tp == 2);
  CHECK(r.points[1].fp == 1);
  CHECK(r.points[2].tp == 1);
  CHECK(r.points[2].fp == 0);
  CHECK(r.points[2].recall == 0.5);
  // Trapezoids over (0.5, 1.0), (1.0, 2/3), (1.0, 0.5).
  CHECK(r.auc == doctest::Approx(0.5 * (1.0 + 2.0 / 3.0) * 0.5));
  CHECK(r.auc_anchored == doctest::Approx(r.auc + 0.5));
  for (const auto& p : r.points) {
    CHECK(p.tp + p.fn == 2);
  }
}

TEST_CASE("sweep invariants on random frames") {
  Rng rng(23);
  const int H = 32, W = 32;
  std::vector<SweepFrame> frames;
  std::vector<std::vector<double>> selectors;
  std::size_t total_gt = 0;
  for (int t = 0; t < 20; ++t) {
    GroundTruthFrame gt;
    gt.index = t;
    std::set<GtKey> adm;
    for (int k = 0; k < 3; ++k) {
      gt.instances.push_back({PixelMask::rectangle(H, W, static_cast<int>(rng.uniform_int(0, 24)),
                                                   static_cast<int>(rng.uniform_int(0, 24)), 6, 6),
                              0, k});
      adm.insert({k, t});
    }
    total_gt += 3;
    std::vector<PixelMask> masks;
    std::vector<double> sel;
    for (int k = 0; k < 5; ++k) {
      masks.push_back(PixelMask::rectangle(H, W, static_cast<int>(rng.uniform_int(0, 26)),
                                           static_cast<int>(rng.uniform_int(0, 26)), 6, 6));
      sel.push_back(rng.uniform());
    }
    std::vector<const PixelMask*> ptrs;
    for (const auto& m : masks) ptrs.push_back(&m);
    frames.push_back(prepare_sweep_frame(ptrs, sel, gt, adm));
    selectors.push_back(sel);
  }
  const auto thr = default_thresholds();
  REQUIRE(thr.size() == 15);
  CHECK(thr.front() == 0.0);
  CHECK(thr.back() == 1.0);
  const SweepResult r = sweep(frames, thr, 0.3);
  double prev_recall = 2.0;
  for (const auto& p : r.points) {
    std::int64_t kept = 0;
    for (const auto& s : selectors) {
      for (double x : s) kept += x >= p.threshold;
    }
    CHECK(p.tp + p.fp == kept);
    CHECK(p.tp + p.fn == static_cast<std::int64_t>(total_gt));
    CHECK(p.recall <= prev_recall);
    CHECK(p.precision >= 0.0);
    CHECK(p.precision <= 1.0);
    prev_recall = p.recall;
  }
  CHECK(r.auc >= 0.0);
  CHECK(r.auc <= 1.0);
  CHECK(r.auc_anchored >= r.auc);
  CHECK(r.auc_anchored <= 1.0);
}

TEST_CASE("tracking counts") {
  std::map<int, std::vector<bool>> flags;
  flags[1] = std::vector<bool>(10, true);
  flags[2] = {true, false, false, false, false, false, false, false, false, false};
  flags[3] = {true, false, true, false};
  const TrackingCounts c = tracking_metrics(flags);
  CHECK(c.gt == 3);
  CHECK(c.mt == 1);
  CHECK(c.ml == 1);
  CHECK(c.pt == 1);
  CHECK(c.smn == 1 + 3);
  CHECK(c.mt + c.pt + c.ml == c.gt);
  std::map<int, std::vector<bool>> alt;
  alt[0] = {true, false, true, false};
  CHECK(tracking_metrics(alt).smn == 3);
}

TEST_CASE("match flags with and without detected instances") {
  const fixtures::MovingObject obj;
  std::set<int> seen = fixtures::range(0, 10);
  seen.erase(4);
  Sequence seq = fixtures::moving_object(obj, 10, seen);
  InstancePrediction d;
  d.mask = obj.at(4);
  d.origin = Origin::detected;
  seq.frames[4].instances.push_back(d);
  const auto base = gt_match_flags(seq, 0.5, false);
  const auto ours = gt_match_flags(seq, 0.5, true);
  CHECK(tracking_metrics(base).smn == 2);
  CHECK(tracking_metrics(ours).smn == 0);
  CHECK(tracking_metrics(ours).mt == 1);
}
