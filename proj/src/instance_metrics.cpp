#include "fnr/instance_metrics.hpp"

#include <algorithm>
#include <charconv>
#include <map>
#include <sstream>

#include "fnr/error.hpp"
#include "fnr/kernels.hpp"
#include "fnr/least_squares.hpp"
#include "fnr/survival.hpp"

namespace fnr {

SizeMetrics size_metrics(const PixelMask& mask) {
  if (mask.empty()) throw EmptyMaskError("size_metrics: mask is empty");
  const InnerBoundary parts = split_inner_boundary(mask);
  SizeMetrics m;
  m.size = mask.area();
  m.inner = parts.inner.area();
  m.boundary = parts.boundary.area();
  m.size_rel = static_cast<double>(m.size) / static_cast<double>(m.boundary);
  m.inner_rel = static_cast<double>(m.inner) / static_cast<double>(m.boundary);
  return m;
}

DepthMetrics depth_metrics(const PixelMask& mask, const DepthMap& depth) {
  if (depth.height != mask.height() || depth.width != mask.width()) {
    throw DimensionError("depth_metrics: depth map grid differs from mask grid");
  }
  if (mask.empty()) throw EmptyMaskError("depth_metrics: mask is empty");
  const InnerBoundary parts = split_inner_boundary(mask);
  const auto mean_over = [&](const PixelMask& part) {
    const std::int64_t n = part.area();
    if (n == 0) return 0.0;
    const auto bitmap = part.to_bitmap();
    return kernels::masked_sum(depth.values, bitmap) / static_cast<double>(n);
  };
  DepthMetrics d;
  d.mean = mean_over(mask);
  d.inner = mean_over(parts.inner);
  d.boundary = mean_over(parts.boundary);
  const double s_bd = static_cast<double>(parts.boundary.area());
  d.mean_rel = d.mean * (static_cast<double>(mask.area()) / s_bd);
  d.inner_rel = d.inner * (static_cast<double>(parts.inner.area()) / s_bd);
  return d;
}

namespace {

PixelMask align_to(const InstancePrediction& prev, const InstancePrediction& curr) {
  const CenterPoint cp = geometric_center(prev.mask);
  const CenterPoint cc = geometric_center(curr.mask);
  return shift_mask(prev.mask, {cc.v - cp.v, cc.h - cp.h});
}

}  // namespace

double occlusion(const InstancePrediction* prev, const InstancePrediction& curr,
                 std::span<const InstancePrediction* const> others) {
  if (prev == nullptr || others.empty()) return 0.0;
  const PixelMask moved = align_to(*prev, curr);
  const std::int64_t area = moved.area();
  if (area == 0) return 0.0;
  std::vector<std::uint8_t> covered(static_cast<std::size_t>(moved.pixel_count()), 0);
  for (const InstancePrediction* k : others) {
    if (!k->mask.same_grid(moved)) throw DimensionError("occlusion: grid mismatch");
    kernels::or_into(covered, k->mask.to_bitmap());
  }
  const auto moved_bitmap = moved.to_bitmap();
  return static_cast<double>(kernels::count_and(moved_bitmap, covered)) / static_cast<double>(area);
}

double temporal_deviation(std::span<const int> frames, std::span<const double> values, int target,
                          double current) {
  if (frames.size() != values.size()) throw ConfigError("temporal_deviation: length mismatch");
  if (frames.size() < 2) return 0.0;
  std::vector<double> xs(frames.begin(), frames.end());
  return std::fabs(extrapolate(xs, values, target) - current);
}

double temporal_deviation(std::span<const TimedCenter> series, int target, const CenterPoint& current) {
  if (series.size() < 2) return 0.0;
  const CenterPoint predicted = predict_center(series, target);
  return std::hypot(predicted.v - current.v, predicted.h - current.h);
}

double aspect_ratio(const PixelMask& mask) {
  const BoundingBox box = bounding_box(mask);
  return static_cast<double>(box.rows()) / static_cast<double>(box.cols());
}

double deformation(const InstancePrediction* prev, const InstancePrediction& curr) {
  if (prev == nullptr) return 1.0;
  return iou(align_to(*prev, curr), curr.mask);
}

std::vector<MetricRecord> compute_all(const Track& track, const std::vector<Frame>& frames,
                                      const CoxModel* model, double horizon) {
  std::vector<MetricRecord> out;
  const int num_frames = static_cast<int>(frames.size());
  const int t_end = track.t_last();
  const InstancePrediction* prev = nullptr;
  std::vector<int> hist_frames;
  std::vector<double> hist_depth, hist_size;
  std::vector<TimedCenter> hist_center;

  for (const auto& [t, inst] : track.entries) {
    if (t < 0 || t >= num_frames) throw ConfigError("compute_all: track entry outside the sequence");
    const Frame& frame = frames[static_cast<std::size_t>(t)];
    MetricRecord rec;
    rec.track_id = track.track_id;
    rec.frame = t;
    rec.class_id = inst.class_id;
    rec.score = inst.score;
    rec.origin = inst.origin;

    const SizeMetrics sm = size_metrics(inst.mask);
    rec.size = sm.size;
    rec.size_inner = sm.inner;
    rec.size_boundary = sm.boundary;
    rec.size_rel = sm.size_rel;
    rec.size_inner_rel = sm.inner_rel;
    if (frame.depth) {
      const DepthMetrics dm = depth_metrics(inst.mask, *frame.depth);
      rec.depth_mean = dm.mean;
      rec.depth_inner = dm.inner;
      rec.depth_boundary = dm.boundary;
      rec.depth_rel = dm.mean_rel;
      rec.depth_inner_rel = dm.inner_rel;
    }
    rec.center = geometric_center(inst.mask);

    std::vector<const InstancePrediction*> others;
    for (const auto& k : frame.instances) {
      if (k.track_id && *k.track_id == track.track_id) continue;
      others.push_back(&k);
    }
    rec.occlusion = occlusion(prev, inst, others);
    rec.deformation = deformation(prev, inst);
    rec.aspect_ratio = aspect_ratio(inst.mask);

    // Deviations against the last kDeviationWindow previous entries.
    const std::size_t w = std::min<std::size_t>(hist_frames.size(), kDeviationWindow);
    const std::size_t from = hist_frames.size() - w;
    std::span<const int> wf(hist_frames.data() + from, w);
    rec.dev_size = temporal_deviation(wf, std::span<const double>(hist_size.data() + from, w), t,
                                      static_cast<double>(rec.size));
    rec.dev_center =
        temporal_deviation(std::span<const TimedCenter>(hist_center.data() + from, w), t, rec.center);
    if (!is_absent(rec.depth_mean)) {
      bool history_has_depth = true;
      for (std::size_t k = from; k < hist_depth.size(); ++k) history_has_depth &= !is_absent(hist_depth[k]);
      rec.dev_depth = history_has_depth
                          ? temporal_deviation(wf, std::span<const double>(hist_depth.data() + from, w),
                                               t, rec.depth_mean)
                          : 0.0;
    }

    rec.duration = t_end - t;
    rec.event = t_end < num_frames - 1;
    if (model) {
      rec.survival = survival_score(*model, single_frame_features(rec, model->dimension() > 12), horizon);
    }

    hist_frames.push_back(t);
    hist_size.push_back(static_cast<double>(rec.size));
    hist_depth.push_back(rec.depth_mean);
    hist_center.push_back({t, rec.center});
    prev = &inst;
    out.push_back(std::move(rec));
  }
  return out;
}

std::vector<MetricRecord> compute_sequence(const Sequence& seq, int sequence_index,
                                           const CoxModel* model, double horizon) {
  const std::vector<Track> tracks = collect_tracks(seq.frames);
  std::vector<MetricRecord> all;
  for (const Track& track : tracks) {
    auto recs = compute_all(track, seq.frames, model, horizon);
    for (auto& r : recs) {
      r.sequence = seq.name;
      r.sequence_index = sequence_index;
      all.push_back(std::move(r));
    }
  }
  std::stable_sort(all.begin(), all.end(), [](const MetricRecord& a, const MetricRecord& b) {
    return std::tie(a.frame, a.track_id) < std::tie(b.frame, b.track_id);
  });
  return all;
}

std::vector<std::string> single_frame_feature_names(bool with_depth) {
  std::vector<std::string> names = {"S", "S_in", "S_bd", "S_rel", "S_in_rel"};
  if (with_depth) {
    for (const char* n : {"D_mean", "D_in", "D_bd", "D_rel", "D_in_rel"}) names.emplace_back(n);
  }
  for (const char* n : {"center_v", "center_h", "score", "occlusion", "aspect_ratio"}) {
    names.emplace_back(n);
  }
  return names;
}

std::vector<double> single_frame_features(const MetricRecord& rec, bool with_depth) {
  std::vector<double> x = {static_cast<double>(rec.size), static_cast<double>(rec.size_inner),
                           static_cast<double>(rec.size_boundary), rec.size_rel, rec.size_inner_rel};
  if (with_depth) {
    if (is_absent(rec.depth_mean)) throw ConfigError("single_frame_features: depth metrics absent");
    for (double d : {rec.depth_mean, rec.depth_inner, rec.depth_boundary, rec.depth_rel,
                     rec.depth_inner_rel}) {
      x.push_back(d);
    }
  }
  for (double d : {rec.center.v, rec.center.h, rec.score, rec.occlusion, rec.aspect_ratio}) {
    x.push_back(d);
  }
  return x;
}

void apply_survival(std::vector<MetricRecord>& records, const CoxModel& model, double horizon) {
  const bool with_depth = model.dimension() == single_frame_feature_names(true).size();
  for (auto& rec : records) {
    rec.survival = survival_score(model, single_frame_features(rec, with_depth), horizon);
  }
}

std::string format_double(double x) {
  if (is_absent(x)) return "";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, ptr);
}

namespace {

const char* kColumns[] = {
    "sequence",    "track_id",   "frame",     "S",           "S_in",         "S_bd",
    "S_rel",       "S_in_rel",   "center_v",  "center_h",    "class_id",     "score",
    "occlusion",   "D_mean",     "D_in",      "D_bd",        "D_rel",        "D_in_rel",
    "d_depth",     "d_size",     "d_center",  "survival",    "aspect_ratio", "deformation",
    "iou_gt",      "origin",     "gt_track_id", "duration",  "event"};
constexpr std::size_t kNumColumns = sizeof(kColumns) / sizeof(kColumns[0]);

double parse_double(const std::string& s) {
  if (s.empty()) return kAbsent;
  double x = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw ParseError("bad number '" + s + "'");
  return x;
}

long long parse_int(const std::string& s) {
  long long x = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), x);
  if (ec != std::errc{} || ptr != s.data() + s.size()) throw ParseError("bad integer '" + s + "'");
  return x;
}

}  // namespace

std::string metrics_csv_header() {
  std::string h;
  for (std::size_t k = 0; k < kNumColumns; ++k) {
    if (k) h += ',';
    h += kColumns[k];
  }
  return h;
}

std::string metrics_csv_row(const MetricRecord& r) {
  const std::string fields[] = {
      r.sequence,
      std::to_string(r.track_id),
      std::to_string(r.frame),
      std::to_string(r.size),
      std::to_string(r.size_inner),
      std::to_string(r.size_boundary),
      format_double(r.size_rel),
      format_double(r.size_inner_rel),
      format_double(r.center.v),
      format_double(r.center.h),
      std::to_string(r.class_id),
      format_double(r.score),
      format_double(r.occlusion),
      format_double(r.depth_mean),
      format_double(r.depth_inner),
      format_double(r.depth_boundary),
      format_double(r.depth_rel),
      format_double(r.depth_inner_rel),
      format_double(r.dev_depth),
      format_double(r.dev_size),
      format_double(r.dev_center),
      format_double(r.survival),
      format_double(r.aspect_ratio),
      format_double(r.deformation),
      format_double(r.iou_gt),
      r.origin == Origin::detected ? "detected" : "network",
      std::to_string(r.gt_track_id),
      std::to_string(r.duration),
      r.event ? "1" : "0"};
  std::string row;
  for (std::size_t k = 0; k < kNumColumns; ++k) {
    if (k) row += ',';
    row += fields[k];
  }
  return row;
}

std::string metrics_csv(const std::vector<MetricRecord>& records) {
  std::string out = metrics_csv_header() + "\n";
  for (const auto& r : records) out += metrics_csv_row(r) + "\n";
  return out;
}

std::vector<MetricRecord> parse_metrics_csv(const std::string& text, const std::string& source) {
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::vector<MetricRecord> out;
  std::map<std::string, int> seq_index;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line_no == 1) {
      if (line != metrics_csv_header()) throw ParseError(source + ":1: unexpected header");
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      f.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    try {
      if (f.size() != kNumColumns) throw ParseError("expected " + std::to_string(kNumColumns) + " fields");
      MetricRecord r;
      r.sequence = f[0];
      auto [it, inserted] = seq_index.emplace(r.sequence, static_cast<int>(seq_index.size()));
      r.sequence_index = it->second;
      r.track_id = static_cast<int>(parse_int(f[1]));
      r.frame = static_cast<int>(parse_int(f[2]));
      r.size = parse_int(f[3]);
      r.size_inner = parse_int(f[4]);
      r.size_boundary = parse_int(f[5]);
      r.size_rel = parse_double(f[6]);
      r.size_inner_rel = parse_double(f[7]);
      r.center = {parse_double(f[8]), parse_double(f[9])};
      r.class_id = static_cast<int>(parse_int(f[10]));
      r.score = parse_double(f[11]);
      r.occlusion = parse_double(f[12]);
      r.depth_mean = parse_double(f[13]);
      r.depth_inner = parse_double(f[14]);
      r.depth_boundary = parse_double(f[15]);
      r.depth_rel = parse_double(f[16]);
      r.depth_inner_rel = parse_double(f[17]);
      r.dev_depth = parse_double(f[18]);
      r.dev_size = parse_double(f[19]);
      r.dev_center = parse_double(f[20]);
      r.survival = parse_double(f[21]);
      r.aspect_ratio = parse_double(f[22]);
      r.deformation = parse_double(f[23]);
      r.iou_gt = parse_double(f[24]);
      if (f[25] == "detected") {
        r.origin = Origin::detected;
      } else if (f[25] == "network") {
        r.origin = Origin::network;
      } else {
        throw ParseError("unknown origin '" + f[25] + "'");
      }
      r.gt_track_id = static_cast<int>(parse_int(f[26]));
      r.duration = static_cast<int>(parse_int(f[27]));
      r.event = parse_int(f[28]) != 0;
      out.push_back(std::move(r));
    } catch (const Error& e) {
      throw ParseError(source + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (line_no == 0) throw ParseError(source + ": empty file");
  return out;
}

}  // namespace fnr
