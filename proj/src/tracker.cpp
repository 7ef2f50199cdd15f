#include "fnr/tracker.hpp"

#include <algorithm>
#include <tuple>

#include <json.hpp>

#include "fnr/error.hpp"
#include "fnr/least_squares.hpp"

namespace fnr {

void validate(const TrackerConfig& cfg) {
  if (!(cfg.match_iou_threshold > 0.0 && cfg.match_iou_threshold < 1.0)) {
    throw ConfigError("tracker: match_iou_threshold must lie in (0,1)");
  }
  if (cfg.regression_window < 2) throw ConfigError("tracker: regression_window must be >= 2");
  if (!(cfg.ignore_threshold > 0.0 && cfg.ignore_threshold <= 1.0)) {
    throw ConfigError("tracker: ignore_threshold must lie in (0,1]");
  }
}

CenterPoint predict_center(std::span<const TimedCenter> history, int target_frame) {
  if (history.size() < 2) throw ConfigError("predict_center: need at least two centers");
  std::vector<double> t, v, h;
  t.reserve(history.size());
  v.reserve(history.size());
  h.reserve(history.size());
  for (std::size_t k = 0; k < history.size(); ++k) {
    if (k > 0 && history[k].frame <= history[k - 1].frame) {
      throw ConfigError("predict_center: frames must be strictly increasing");
    }
    t.push_back(history[k].frame);
    v.push_back(history[k].center.v);
    h.push_back(history[k].center.h);
  }
  return {extrapolate(t, v, target_frame), extrapolate(t, h, target_frame)};
}

std::vector<std::optional<std::size_t>> match_frames(
    std::span<const InstancePrediction> prev, std::span<const std::vector<TimedCenter>> prev_history,
    std::span<const InstancePrediction> curr, const TrackerConfig& cfg) {
  if (prev.size() != prev_history.size()) {
    throw ConfigError("match_frames: one history per previous instance required");
  }
  std::vector<std::optional<std::size_t>> assignment(curr.size());
  if (prev.empty() || curr.empty()) return assignment;

  std::vector<PixelMask> shifted;
  shifted.reserve(prev.size());
  for (std::size_t k = 0; k < prev.size(); ++k) {
    const auto& hist = prev_history[k];
    if (hist.size() < 2) {
      shifted.push_back(prev[k].mask);
      continue;
    }
    const std::size_t w = std::min<std::size_t>(hist.size(), static_cast<std::size_t>(cfg.regression_window));
    std::span<const TimedCenter> window(hist.data() + hist.size() - w, w);
    const TimedCenter& last = hist.back();
    const CenterPoint predicted = predict_center(window, last.frame + 1);
    shifted.push_back(
        shift_mask(prev[k].mask, {predicted.v - last.center.v, predicted.h - last.center.h}));
  }

  struct Candidate {
    double iou;
    std::size_t prev;
    std::size_t curr;
  };
  std::vector<Candidate> candidates;
  for (std::size_t p = 0; p < prev.size(); ++p) {
    for (std::size_t c = 0; c < curr.size(); ++c) {
      if (!prev[p].mask.same_grid(curr[c].mask)) {
        throw DimensionError("match_frames: grid mismatch between frames");
      }
      if (cfg.class_gated && prev[p].class_id != curr[c].class_id) continue;
      if (shifted[p].empty()) continue;
      const double o = iou(shifted[p], curr[c].mask);
      if (o >= cfg.match_iou_threshold) candidates.push_back({o, p, c});
    }
  }
  // Descending iou, ties broken by (prev, curr) index for determinism.
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    return std::tie(b.iou, a.prev, a.curr) < std::tie(a.iou, b.prev, b.curr);
  });
  std::vector<bool> prev_used(prev.size(), false);
  for (const auto& cand : candidates) {
    if (prev_used[cand.prev] || assignment[cand.curr]) continue;
    prev_used[cand.prev] = true;
    assignment[cand.curr] = cand.prev;
  }
  return assignment;
}

std::vector<InstancePrediction> prefilter_ignored(const Frame& frame, double threshold) {
  if (!frame.ignored || frame.ignored->empty()) return frame.instances;
  std::vector<InstancePrediction> kept;
  for (const auto& inst : frame.instances) {
    if (overlap_ratio(inst.mask, *frame.ignored) < threshold) kept.push_back(inst);
  }
  return kept;
}

TrackingResult track_sequence(const std::vector<Frame>& frames, const TrackerConfig& cfg) {
  validate(cfg);
  TrackingResult result;
  std::map<int, std::size_t> track_slot;  // track id -> index in result.tracks
  int next_id = 0;

  for (std::size_t t = 0; t < frames.size(); ++t) {
    Frame frame = frames[t];
    std::vector<InstancePrediction> kept = prefilter_ignored(frame, cfg.ignore_threshold);
    result.removed_ignored += frame.instances.size() - kept.size();
    frame.instances = std::move(kept);
    for (auto& inst : frame.instances) inst.track_id.reset();

    if (t > 0) {
      const Frame& prev_frame = result.frames.back();
      std::vector<std::vector<TimedCenter>> history;
      history.reserve(prev_frame.instances.size());
      for (const auto& p : prev_frame.instances) {
        history.push_back(result.tracks[track_slot.at(*p.track_id)].centers);
      }
      const auto assignment = match_frames(prev_frame.instances, history, frame.instances, cfg);
      for (std::size_t c = 0; c < frame.instances.size(); ++c) {
        if (assignment[c]) frame.instances[c].track_id = prev_frame.instances[*assignment[c]].track_id;
      }
    }
    for (auto& inst : frame.instances) {
      if (!inst.track_id) {
        inst.track_id = next_id++;
        track_slot[*inst.track_id] = result.tracks.size();
        result.tracks.push_back(Track{*inst.track_id, {}, {}});
      }
      Track& track = result.tracks[track_slot.at(*inst.track_id)];
      track.entries.emplace(frame.index, inst);
      track.centers.push_back({frame.index, geometric_center(inst.mask)});
    }
    result.frames.push_back(std::move(frame));
  }
  return result;
}

std::vector<Track> collect_tracks(const std::vector<Frame>& frames) {
  std::map<int, Track> by_id;
  for (const Frame& frame : frames) {
    for (const auto& inst : frame.instances) {
      if (!inst.track_id) continue;
      Track& track = by_id[*inst.track_id];
      track.track_id = *inst.track_id;
      if (!track.entries.emplace(frame.index, inst).second) {
        throw ConfigError("track " + std::to_string(*inst.track_id) + " appears twice in frame " +
                          std::to_string(frame.index));
      }
      track.centers.push_back({frame.index, geometric_center(inst.mask)});
    }
  }
  std::vector<Track> tracks;
  tracks.reserve(by_id.size());
  for (auto& [id, track] : by_id) tracks.push_back(std::move(track));
  return tracks;
}

std::string tracks_jsonl(const std::vector<Frame>& frames) {
  std::string out;
  for (const Frame& frame : frames) {
    for (std::size_t k = 0; k < frame.instances.size(); ++k) {
      const auto& inst = frame.instances[k];
      if (!inst.track_id) continue;
      nlohmann::json rec;
      rec["track_id"] = *inst.track_id;
      rec["frame"] = frame.index;
      rec["instance"] = k;
      rec["origin"] = inst.origin == Origin::detected ? "detected" : "network";
      out += rec.dump() + "\n";
    }
  }
  return out;
}

}  // namespace fnr
