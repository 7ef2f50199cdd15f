#include "fnr/fn_detector.hpp"

#include <algorithm>

#include "fnr/error.hpp"

namespace fnr {

void validate(const DetectorConfig& cfg) {
  if (cfg.gap_limit < 1) throw ConfigError("detector: gap_limit must be >= 1");
  const auto unit = [](double x) { return x > 0.0 && x <= 1.0; };
  if (!unit(cfg.ignore_cover_threshold) || !unit(cfg.duplicate_iou_threshold)) {
    throw ConfigError("detector: thresholds must lie in (0,1]");
  }
  if (cfg.min_history < 2) throw ConfigError("detector: min_history must be >= 2");
  if (cfg.regression_window != 0 && cfg.regression_window < 2) {
    throw ConfigError("detector: regression_window must be 0 (all) or >= 2");
  }
}

std::size_t CandidateSet::total() const {
  std::size_t n = 0;
  for (const auto& f : per_frame) n += f.size();
  return n;
}

CandidateSet detect_false_negatives(const std::vector<Track>& tracks, int num_frames,
                                    const DetectorConfig& cfg) {
  validate(cfg);
  CandidateSet out;
  out.per_frame.resize(static_cast<std::size_t>(std::max(num_frames, 0)));

  std::vector<const Track*> ordered;
  for (const auto& tr : tracks) {
    if (!tr.entries.empty()) ordered.push_back(&tr);
  }
  std::sort(ordered.begin(), ordered.end(),
            [](const Track* a, const Track* b) { return a->track_id < b->track_id; });

  for (const Track* track : ordered) {
    std::vector<TimedCenter> history;  // G: centers of frames where the track exists
    double score_sum = 0.0;
    int t_last = -1;  // "never seen"
    const InstancePrediction* last = nullptr;
    auto next_entry = track->entries.begin();
    auto next_center = track->centers.begin();

    for (int t = track->t_first(); t < num_frames; ++t) {
      if (next_entry != track->entries.end() && next_entry->first == t) {
        history.push_back(*next_center);
        score_sum += next_entry->second.score;
        t_last = t;
        last = &next_entry->second;
        ++next_entry;
        ++next_center;
        continue;
      }
      if (t_last < 0 || t - t_last > cfg.gap_limit) {
        if (next_entry == track->entries.end()) break;  // nothing more can happen
        continue;
      }
      if (static_cast<int>(history.size()) < cfg.min_history) continue;

      std::span<const TimedCenter> fit(history);
      if (cfg.regression_window > 0 && fit.size() > static_cast<std::size_t>(cfg.regression_window)) {
        fit = fit.subspan(fit.size() - static_cast<std::size_t>(cfg.regression_window));
      }
      const CenterPoint predicted = predict_center(fit, t);
      const CenterPoint& anchor = history.back().center;
      PixelMask moved = shift_mask(last->mask, {predicted.v - anchor.v, predicted.h - anchor.h});
      if (moved.empty()) {
        ++out.dropped_empty;
        continue;
      }
      InstancePrediction cand;
      cand.mask = std::move(moved);
      cand.class_id = last->class_id;
      cand.score = std::clamp(score_sum / static_cast<double>(history.size()), 0.0, 1.0);
      cand.track_id = track->track_id;
      cand.origin = Origin::detected;
      cand.source_frame = t_last;
      out.per_frame[static_cast<std::size_t>(t)].push_back(std::move(cand));
    }
  }
  return out;
}

CoveringResult covering_check(const std::vector<InstancePrediction>& candidates, const Frame& frame,
                              const DetectorConfig& cfg) {
  CoveringResult out;
  for (const auto& cand : candidates) {
    if (frame.ignored && overlap_ratio(cand.mask, *frame.ignored) >= cfg.ignore_cover_threshold) {
      ++out.suppressed_ignored;
      continue;
    }
    double max_iou = 0.0;
    for (const auto& k : frame.instances) {
      if (k.origin != Origin::network) continue;
      max_iou = std::max(max_iou, iou(cand.mask, k.mask));
    }
    if (max_iou > cfg.duplicate_iou_threshold) {
      ++out.suppressed_duplicate;
      continue;
    }
    out.accepted.push_back(cand);
  }
  return out;
}

DetectionResult detect_on_tracked(const Sequence& tracked, const DetectorConfig& cfg) {
  validate(cfg);
  DetectionResult result;
  result.sequence = tracked;
  for (auto& frame : result.sequence.frames) {
    std::erase_if(frame.instances, [](const InstancePrediction& i) { return i.origin == Origin::detected; });
    for (const auto& inst : frame.instances) {
      if (!inst.track_id) throw ConfigError("detect: frame " + std::to_string(frame.index) +
                                            " has an instance without a track id");
    }
    result.report.predicted_instances += frame.instances.size();
  }
  const std::vector<Track> tracks = collect_tracks(result.sequence.frames);
  const CandidateSet cands =
      detect_false_negatives(tracks, static_cast<int>(result.sequence.frames.size()), cfg);
  result.report.candidates = cands.total();
  result.report.dropped_empty = cands.dropped_empty;

  for (std::size_t t = 0; t < result.sequence.frames.size(); ++t) {
    Frame& frame = result.sequence.frames[t];
    CoveringResult cov = covering_check(cands.per_frame[t], frame, cfg);
    result.report.suppressed_ignored += cov.suppressed_ignored;
    result.report.suppressed_duplicate += cov.suppressed_duplicate;
    result.report.detected_instances += cov.accepted.size();
    for (auto& inst : cov.accepted) frame.instances.push_back(std::move(inst));
  }
  return result;
}

DetectionResult run_detection(const Sequence& seq, const TrackerConfig& tracker_cfg,
                              const DetectorConfig& detector_cfg) {
  TrackingResult tracked = track_sequence(seq.frames, tracker_cfg);
  Sequence tracked_seq = seq;
  tracked_seq.frames = std::move(tracked.frames);
  DetectionResult result = detect_on_tracked(tracked_seq, detector_cfg);
  result.report.removed_ignored = tracked.removed_ignored;
  return result;
}

}  // namespace fnr
