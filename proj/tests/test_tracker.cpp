#include <doctest.h>

#include <set>

#include "fnr/error.hpp"
#include "fnr/least_squares.hpp"
#include "fnr/synth.hpp"
#include "fnr/tracker.hpp"
#include "oracles.hpp"

using namespace fnr;

namespace {

InstancePrediction inst(PixelMask m, int cls = 0, double score = 0.9) {
  InstancePrediction p;
  p.mask = std::move(m);
  p.class_id = cls;
  p.score = score;
  return p;
}

Frame frame(int index, int H, int W, std::vector<InstancePrediction> instances) {
  Frame f;
  f.index = index;
  f.height = H;
  f.width = W;
  f.instances = std::move(instances);
  return f;
}

}  // namespace

TEST_CASE("least squares line") {
  const std::vector<double> t = {1, 2, 3};
  const std::vector<double> v = {0, 2, 7};
  const LineFit fit = fit_line(t, v);
  CHECK(fit.slope == doctest::Approx(3.5).epsilon(1e-14));
  CHECK(fit.intercept == doctest::Approx(-4.0).epsilon(1e-14));
  CHECK(extrapolate(t, v, 4) == doctest::Approx(10.0).epsilon(1e-14));
  CHECK(extrapolate(t, v, 4) == doctest::Approx(oracle::ls_extrapolate(t, v, 4)).epsilon(1e-14));
  const std::vector<double> one = {1};
  CHECK_THROWS_AS(fit_line(one, one), ConfigError);
  const std::vector<double> same_t = {2, 2};
  const std::vector<double> ys = {1, 2};
  CHECK_THROWS_AS(fit_line(same_t, ys), ConfigError);
}

TEST_CASE("predict center examples") {
  const std::vector<TimedCenter> line = {{1, {0, 0}}, {2, {1, 1}}};
  CHECK(predict_center(line, 3) == CenterPoint{2, 2});
  const std::vector<TimedCenter> flat = {{0, {4, 5}}, {3, {4, 5}}, {7, {4, 5}}};
  const CenterPoint c = predict_center(flat, 42);
  CHECK(c.v == doctest::Approx(4.0));
  CHECK(c.h == doctest::Approx(5.0));
  const std::vector<TimedCenter> ls = {{1, {0, 0}}, {2, {2, 0}}, {3, {7, 0}}};
  CHECK(predict_center(ls, 4).v == doctest::Approx(10.0));
  CHECK_THROWS_AS(predict_center(std::span(line).first(1), 3), ConfigError);
  const std::vector<TimedCenter> dup = {{1, {0, 0}}, {1, {1, 1}}};
  CHECK_THROWS_AS(predict_center(dup, 3), ConfigError);
}

TEST_CASE("match frames basics") {
  TrackerConfig cfg;
  const PixelMask a = PixelMask::rectangle(30, 30, 2, 2, 5, 5);
  const PixelMask b = PixelMask::rectangle(30, 30, 20, 20, 5, 5);
  const std::vector<InstancePrediction> curr = {inst(a), inst(b)};
  const auto none = match_frames({}, {}, curr, cfg);
  CHECK(none == std::vector<std::optional<std::size_t>>(2));

  const std::vector<InstancePrediction> prev = {inst(b), inst(a)};
  const std::vector<std::vector<TimedCenter>> hist(2);
  const auto m = match_frames(prev, hist, curr, cfg);
  CHECK(m[0] == std::optional<std::size_t>(1));
  CHECK(m[1] == std::optional<std::size_t>(0));

  const std::vector<InstancePrediction> other_grid = {inst(PixelMask::rectangle(10, 10, 0, 0, 2, 2))};
  CHECK_THROWS_AS(match_frames(other_grid, std::vector<std::vector<TimedCenter>>(1), curr, cfg), DimensionError);
}

TEST_CASE("class gate keeps classes apart when objects swap") {
  const PixelMask left = PixelMask::rectangle(40, 40, 10, 10, 8, 8);
  const PixelMask right = PixelMask::rectangle(40, 40, 10, 14, 8, 8);
  const std::vector<InstancePrediction> prev = {inst(left, 0), inst(right, 1)};
  const std::vector<InstancePrediction> curr = {inst(left, 1), inst(right, 0)};
  const std::vector<std::vector<TimedCenter>> hist(2);
  TrackerConfig gated;
  const auto g = match_frames(prev, hist, curr, gated);
  CHECK(g[0] == std::optional<std::size_t>(1));
  CHECK(g[1] == std::optional<std::size_t>(0));
  TrackerConfig open = gated;
  open.class_gated = false;
  const auto o = match_frames(prev, hist, curr, open);
  CHECK(o[0] == std::optional<std::size_t>(0));
  CHECK(o[1] == std::optional<std::size_t>(1));
}

TEST_CASE("motion shift follows the history") {
  // Moving 6 columns per frame: unshifted masks overlap with iou 2/14 only.
  const int H = 20, W = 80;
  const PixelMask prev_mask = PixelMask::rectangle(H, W, 5, 20, 6, 8);
  const std::vector<InstancePrediction> prev = {inst(prev_mask)};
  const std::vector<InstancePrediction> curr = {inst(PixelMask::rectangle(H, W, 5, 26, 6, 8))};
  const CenterPoint c = geometric_center(prev_mask);
  const std::vector<std::vector<TimedCenter>> no_hist(1);
  const std::vector<std::vector<TimedCenter>> hist = {{{3, {c.v, c.h - 6}}, {4, c}}};
  CHECK_FALSE(match_frames(prev, no_hist, curr, TrackerConfig{})[0].has_value());
  CHECK(match_frames(prev, hist, curr, TrackerConfig{})[0] == std::optional<std::size_t>(0));
}

TEST_CASE("ignore prefilter boundary") {
  const int H = 20, W = 100;
  const PixelMask m = PixelMask::rectangle(H, W, 0, 0, 10, 100);
  REQUIRE(m.area() == 1000);
  for (int inside : {799, 800}) {
    std::vector<PixelCoord> px;
    for (int k = 0; k < inside; ++k) px.push_back({k / 100, k % 100});
    Frame f = frame(0, H, W, {inst(m)});
    f.ignored = PixelMask::from_pixels(H, W, px);
    CHECK(prefilter_ignored(f).size() == (inside == 799 ? 1u : 0u));
  }
  Frame plain = frame(0, H, W, {inst(m)});
  CHECK(prefilter_ignored(plain).size() == 1);
  plain.ignored = m;
  CHECK(prefilter_ignored(plain).empty());
}

TEST_CASE("tracking simple scenes") {
  const int H = 40, W = 60;
  std::vector<Frame> frames;
  for (int t = 0; t < 8; ++t) {
    frames.push_back(frame(t, H, W,
                           {inst(PixelMask::rectangle(H, W, 2, 2, 6, 6)),
                            inst(PixelMask::rectangle(H, W, 20, 2 + 2 * t, 6, 6), 1)}));
  }
  const TrackingResult r = track_sequence(frames, TrackerConfig{});
  REQUIRE(r.tracks.size() == 2);
  CHECK(r.tracks[0].length() == 8);
  CHECK(r.tracks[1].length() == 8);
  for (const auto& f : r.frames) {
    CHECK(*f.instances[0].track_id == 0);
    CHECK(*f.instances[1].track_id == 1);
  }
  CHECK(collect_tracks(r.frames).size() == 2);
  const std::string jsonl = tracks_jsonl(r.frames);
  CHECK(std::count(jsonl.begin(), jsonl.end(), '\n') == 16);
}

TEST_CASE("zero dropout scenes give one track per object") {
  SynthConfig cfg;
  cfg.num_sequences = 2;
  cfg.frames_per_sequence = 40;
  cfg.dropout = 0.0;
  cfg.fp_rate = 0.0;
  cfg.objects_min = cfg.objects_max = 1;
  cfg.death_probability = 0.0;
  cfg.late_birth_probability = 0.0;
  for (const auto& seq : generate_scene(cfg)) {
    const TrackingResult r = track_sequence(seq.frames, TrackerConfig{});
    std::size_t visible = 0;
    for (const auto& g : seq.ground_truth) visible += g.instances.size();
    CHECK(r.tracks.size() == 1);
    CHECK(r.tracks.front().length() == visible);
  }
}

TEST_CASE("greedy assignment equals the exhaustive oracle on a crossing scene") {
  SynthConfig cfg;
  cfg.seed = 7;
  cfg.num_sequences = 1;
  cfg.frames_per_sequence = 60;
  cfg.objects_min = cfg.objects_max = 5;
  cfg.height = 64;
  cfg.width = 96;
  const Sequence seq = generate_scene(cfg).front();
  const TrackerConfig tcfg;
  const TrackingResult r = track_sequence(seq.frames, tcfg);

  std::map<int, std::vector<std::pair<int, fnr::CenterPoint>>> centers;  // track -> (frame, center)
  int compared = 0, maxsum_differs = 0;
  for (std::size_t t = 0; t < r.frames.size(); ++t) {
    const auto& curr = r.frames[t].instances;
    if (t > 0) {
      const auto& prev = r.frames[t - 1].instances;
      if (!prev.empty() && !curr.empty() && prev.size() <= 7 && curr.size() <= 7) {
        std::vector<std::vector<double>> m(prev.size(), std::vector<double>(curr.size(), 0.0));
        for (std::size_t p = 0; p < prev.size(); ++p) {
          const auto& hist = centers[*prev[p].track_id];
          oracle::Dense moved = oracle::from_runs(prev[p].mask);
          if (hist.size() >= 2) {
            const std::size_t w = std::min<std::size_t>(hist.size(), 5);
            std::vector<double> ts, vs, hs;
            for (std::size_t k = hist.size() - w; k < hist.size(); ++k) {
              ts.push_back(hist[k].first);
              vs.push_back(hist[k].second.v);
              hs.push_back(hist[k].second.h);
            }
            const double target = hist.back().first + 1;
            const int dv = static_cast<int>(std::lround(oracle::ls_extrapolate(ts, vs, target) - hist.back().second.v));
            const int dh = static_cast<int>(std::lround(oracle::ls_extrapolate(ts, hs, target) - hist.back().second.h));
            moved = oracle::shift(moved, dv, dh);
          }
          for (std::size_t c = 0; c < curr.size(); ++c) {
            if (oracle::area(moved) == 0) continue;
            m[p][c] = oracle::iou(moved, oracle::from_runs(curr[c].mask));
          }
        }
        const auto ok = [&](std::size_t p, std::size_t c) {
          return prev[p].class_id == curr[c].class_id && m[p][c] >= tcfg.match_iou_threshold;
        };
        const auto best = oracle::best_assignment(m, ok);
        std::vector<double> got_key, best_key;
        double got_sum = 0;
        for (std::size_t c = 0; c < curr.size(); ++c) {
          std::optional<std::size_t> got;
          for (std::size_t p = 0; p < prev.size(); ++p) {
            if (prev[p].track_id == curr[c].track_id) got = p;
          }
          if (got) {
            got_key.push_back(m[*got][c]);
            got_sum += m[*got][c];
          }
          if (best[c]) best_key.push_back(m[*best[c]][c]);
        }
        std::sort(got_key.rbegin(), got_key.rend());
        std::sort(best_key.rbegin(), best_key.rend());
        CHECK(got_key == best_key);
        // Max-sum assignment for reference only.
        double best_sum = 0;
        std::vector<std::size_t> perm(std::max(prev.size(), curr.size()));
        std::iota(perm.begin(), perm.end(), 0);
        do {
          double s = 0;
          for (std::size_t c = 0; c < curr.size(); ++c) {
            if (perm[c] < prev.size() && ok(perm[c], c)) s += m[perm[c]][c];
          }
          best_sum = std::max(best_sum, s);
        } while (std::next_permutation(perm.begin(), perm.end()));
        if (best_sum > got_sum + 1e-12) ++maxsum_differs;
        ++compared;
      }
    }
    for (const auto& i : curr) {
      centers[*i.track_id].push_back({static_cast<int>(t), oracle::center(oracle::from_runs(i.mask))});
    }
    std::set<int> ids;
    for (const auto& i : curr) CHECK(ids.insert(*i.track_id).second);
  }
  CHECK(compared > 40);
  MESSAGE("frame pairs compared: " << compared << ", max-sum assignment differs in " << maxsum_differs);
}

TEST_CASE("tracker config validation") {
  TrackerConfig cfg;
  cfg.match_iou_threshold = 1.0;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
  cfg = {};
  cfg.regression_window = 1;
  CHECK_THROWS_AS(validate(cfg), ConfigError);
}
