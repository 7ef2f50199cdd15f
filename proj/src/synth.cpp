#include "fnr/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "fnr/error.hpp"
#include "fnr/rng.hpp"

namespace fnr {

namespace {

struct Shape {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> bitmap;
};

Shape make_shape(int rows, int cols, bool ellipse) {
  Shape s{rows, cols, std::vector<std::uint8_t>(static_cast<std::size_t>(rows) * cols, 1)};
  if (ellipse) {
    const double cv = (rows - 1) / 2.0, ch = (cols - 1) / 2.0;
    const double rv = rows / 2.0, rh = cols / 2.0;
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const double dv = (r - cv) / rv, dh = (c - ch) / rh;
        s.bitmap[static_cast<std::size_t>(r) * cols + c] = (dv * dv + dh * dh) <= 1.0;
      }
    }
  }
  return s;
}

struct SceneObject {
  Shape shape;
  int class_id = 0;
  int gt_id = 0;
  int row0 = 0;  ///< top-left at birth
  int col0 = 0;
  int vel_v = 0;
  int vel_h = 0;
  int birth = 0;
  int death = 0;  ///< first frame without the object (exclusive end)
  double depth = 0.0;

  PixelMask full_mask(int t, int height, int width) const {
    const int dt = t - birth;
    return PixelMask::from_region(height, width, row0 + vel_v * dt, col0 + vel_h * dt, shape.rows,
                                  shape.cols, shape.bitmap);
  }
};

// Pedestrians (class 1) are taller than wide, cars (class 0) wider than tall.
std::pair<int, int> draw_extent(Rng& rng, const SynthConfig& cfg, int class_id) {
  const int a = static_cast<int>(rng.uniform_int(cfg.size_min, cfg.size_max));
  const int b = static_cast<int>(rng.uniform_int(cfg.size_min, cfg.size_max));
  const int big = std::max(a, b), small = std::max(std::min(a, b), 2);
  if (class_id % 2 == 1) return {big, small};
  return {small, big};
}

Sequence generate_one(const SynthConfig& cfg, Rng& rng, int seq_index) {
  const int T = cfg.frames_per_sequence;
  const int H = cfg.height, W = cfg.width;
  const int n_objects = static_cast<int>(rng.uniform_int(cfg.objects_min, cfg.objects_max));

  std::vector<SceneObject> objects;
  for (int k = 0; k < n_objects; ++k) {
    SceneObject obj;
    obj.class_id = static_cast<int>(rng.uniform_int(0, cfg.num_classes - 1));
    const auto [rows, cols] = draw_extent(rng, cfg, obj.class_id);
    obj.shape = make_shape(std::min(rows, H - 2), std::min(cols, W - 2),
                           rng.bernoulli(cfg.ellipse_fraction));
    obj.gt_id = k + 1;
    obj.row0 = static_cast<int>(rng.uniform_int(0, H - obj.shape.rows));
    obj.col0 = static_cast<int>(rng.uniform_int(0, W - obj.shape.cols));
    obj.vel_v = static_cast<int>(rng.uniform_int(-cfg.velocity_max, cfg.velocity_max));
    obj.vel_h = static_cast<int>(rng.uniform_int(-cfg.velocity_max, cfg.velocity_max));
    const int late_max = std::max(1, T / 2);
    obj.birth = rng.bernoulli(cfg.late_birth_probability) ? static_cast<int>(rng.uniform_int(1, late_max)) : 0;
    obj.death = T;
    if (rng.bernoulli(cfg.death_probability)) {
      const int earliest = obj.birth + cfg.min_lifetime;
      if (earliest < T) obj.death = static_cast<int>(rng.uniform_int(earliest, T - 1));
    }
    obj.depth = rng.uniform(cfg.depth_min, cfg.depth_max);
    objects.push_back(std::move(obj));
  }
  // Nearest objects occlude farther ones.
  std::vector<int> by_depth(objects.size());
  for (std::size_t k = 0; k < objects.size(); ++k) by_depth[k] = static_cast<int>(k);
  std::stable_sort(by_depth.begin(), by_depth.end(),
                   [&](int a, int b) { return objects[a].depth < objects[b].depth; });

  Sequence seq;
  char name[32];
  std::snprintf(name, sizeof(name), "synth_%03d", seq_index);
  seq.name = name;
  seq.height = H;
  seq.width = W;
  seq.fps = 10.0;
  seq.attributes["generator"] = "synth";
  seq.attributes["seed"] = std::to_string(cfg.seed);

  for (int t = 0; t < T; ++t) {
    Frame frame;
    frame.index = t;
    frame.height = H;
    frame.width = W;
    GroundTruthFrame gt;
    gt.index = t;

    std::vector<float> depth;
    if (cfg.with_depth) depth.assign(static_cast<std::size_t>(H) * W, static_cast<float>(cfg.background_depth));

    PixelMask nearer(H, W);
    std::vector<std::pair<int, GroundTruthInstance>> visible;  // (object index, instance)
    for (int k : by_depth) {
      const SceneObject& obj = objects[k];
      if (t < obj.birth || t >= obj.death) continue;
      PixelMask full = obj.full_mask(t, H, W);
      if (full.empty()) continue;
      PixelMask vis = mask_difference(full, nearer);
      if (cfg.with_depth) {
        for (const auto& seg : vis.segments()) {
          std::fill(depth.begin() + static_cast<std::ptrdiff_t>(seg.row) * W + seg.col_begin,
                    depth.begin() + static_cast<std::ptrdiff_t>(seg.row) * W + seg.col_end,
                    static_cast<float>(obj.depth));
        }
      }
      nearer = mask_union(nearer, full);
      if (vis.area() < cfg.min_visible_pixels) continue;
      visible.emplace_back(k, GroundTruthInstance{std::move(vis), obj.class_id, obj.gt_id});
    }
    // Annotations listed in object order for stable files.
    std::sort(visible.begin(), visible.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    for (const auto& [k, g] : visible) {
      if (!rng.bernoulli(cfg.dropout)) {
        InstancePrediction p;
        p.mask = g.mask;
        p.class_id = g.class_id;
        p.score = std::clamp(1.0 - std::fabs(rng.normal(0.0, cfg.score_noise)), 0.0, 1.0);
        frame.instances.push_back(std::move(p));
      }
    }
    std::size_t spurious = 0;
    for (std::size_t k = 0; k < visible.size(); ++k) spurious += rng.bernoulli(cfg.fp_rate);
    for (std::size_t k = 0; k < spurious; ++k) {
      const int class_id = static_cast<int>(rng.uniform_int(0, cfg.num_classes - 1));
      const auto [rows, cols] = draw_extent(rng, cfg, class_id);
      Shape shape = make_shape(std::min(rows, H - 2), std::min(cols, W - 2),
                               rng.bernoulli(cfg.ellipse_fraction));
      const int r0 = static_cast<int>(rng.uniform_int(0, H - shape.rows));
      const int c0 = static_cast<int>(rng.uniform_int(0, W - shape.cols));
      InstancePrediction p;
      p.mask = PixelMask::from_region(H, W, r0, c0, shape.rows, shape.cols, shape.bitmap);
      p.class_id = class_id;
      p.score = rng.uniform(cfg.spurious_score_min, cfg.spurious_score_max);
      if (!p.mask.empty()) frame.instances.push_back(std::move(p));
    }
    for (auto& [k, g] : visible) gt.instances.push_back(std::move(g));
    if (cfg.with_depth) frame.depth = DepthMap{H, W, std::move(depth)};
    seq.frames.push_back(std::move(frame));
    seq.ground_truth.push_back(std::move(gt));
  }
  return seq;
}

}  // namespace

void validate(const SynthConfig& cfg) {
  const auto prob = [](double p) { return p >= 0.0 && p <= 1.0; };
  if (cfg.height < 8 || cfg.width < 8) throw ConfigError("synthetic grid must be at least 8x8");
  if (cfg.num_sequences < 1) throw ConfigError("num_sequences must be >= 1");
  if (cfg.frames_per_sequence < 1) throw ConfigError("frames_per_sequence must be >= 1");
  if (cfg.objects_min < 0 || cfg.objects_max < cfg.objects_min) {
    throw ConfigError("object count range is invalid");
  }
  if (cfg.size_min < 1 || cfg.size_max < cfg.size_min) throw ConfigError("size range is invalid");
  if (cfg.velocity_max < 0) throw ConfigError("velocity_max must be >= 0");
  if (cfg.num_classes < 1) throw ConfigError("num_classes must be >= 1");
  if (!prob(cfg.dropout) || !prob(cfg.fp_rate) || !prob(cfg.ellipse_fraction) ||
      !prob(cfg.late_birth_probability) || !prob(cfg.death_probability)) {
    throw ConfigError("probabilities must lie in [0,1]");
  }
  if (cfg.score_noise < 0.0) throw ConfigError("score_noise must be >= 0");
  if (!(cfg.spurious_score_min >= 0.0 && cfg.spurious_score_max <= 1.0 &&
        cfg.spurious_score_min <= cfg.spurious_score_max)) {
    throw ConfigError("spurious score range must lie in [0,1]");
  }
  if (cfg.with_depth && !(cfg.depth_min > 0.0 && cfg.depth_max >= cfg.depth_min &&
                          cfg.background_depth > 0.0)) {
    throw ConfigError("depths must be positive");
  }
}

std::vector<Sequence> generate_scene(const SynthConfig& cfg) {
  validate(cfg);
  Rng rng(cfg.seed);
  std::vector<Sequence> out;
  for (int s = 0; s < cfg.num_sequences; ++s) out.push_back(generate_one(cfg, rng, s));
  return out;
}

}  // namespace fnr
