#pragma once
// Frame-to-frame instance tracking by overlap of motion-shifted masks.

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "fnr/sequence.hpp"

namespace fnr {

struct TimedCenter {
  int frame = 0;
  CenterPoint center;
};

struct TrackerConfig {
  double match_iou_threshold = 0.25;
  int regression_window = 5;  ///< history points used for the motion shift
  bool class_gated = true;
  double ignore_threshold = 0.8;  ///< drop instances with at least this share inside R
};

void validate(const TrackerConfig& cfg);

struct Track {
  int track_id = 0;
  std::map<int, InstancePrediction> entries;  ///< frame -> instance
  std::vector<TimedCenter> centers;           ///< one per entry, frame order

  int t_first() const { return entries.begin()->first; }
  int t_last() const { return entries.rbegin()->first; }
  std::size_t length() const { return entries.size(); }
};

/// Least-squares extrapolation of the centers (rows and columns fitted
/// independently) to `target_frame`. Needs >= 2 points with distinct frames.
CenterPoint predict_center(std::span<const TimedCenter> history, int target_frame);

/// For each current instance, the index into `prev` it is matched to, or
/// nullopt. `prev_history[k]` is the center history of prev[k]'s track up to
/// and including frame t-1.
std::vector<std::optional<std::size_t>> match_frames(
    std::span<const InstancePrediction> prev, std::span<const std::vector<TimedCenter>> prev_history,
    std::span<const InstancePrediction> curr, const TrackerConfig& cfg);

/// Removes instances with overlap_ratio(i, R) >= threshold.
std::vector<InstancePrediction> prefilter_ignored(const Frame& frame, double threshold = 0.8);

struct TrackingResult {
  std::vector<Frame> frames;  ///< prefiltered frames with track ids assigned
  std::vector<Track> tracks;  ///< ordered by track id
  std::size_t removed_ignored = 0;
};

/// Tracks a whole sequence. Track ids start at 0 and are handed out in
/// (frame, instance) order.
TrackingResult track_sequence(const std::vector<Frame>& frames, const TrackerConfig& cfg);

/// Groups already-tracked instances (any origin) by track id.
std::vector<Track> collect_tracks(const std::vector<Frame>& frames);

/// One JSON record per (track_id, frame, instance index) in frame order.
std::string tracks_jsonl(const std::vector<Frame>& frames);

}  // namespace fnr
