#pragma once
// False-negative reconstruction from gaps and sudden ends in instance tracks.
//
// Phase 1 extrapolates each track's geometric center by least squares and
// shifts the last observed mask there, for up to `gap_limit` frames after the
// last observation. Phase 2 keeps a reconstruction only if it is not mostly
// inside the ignored region and does not duplicate a network prediction.

#include <cstddef>
#include <vector>

#include "fnr/sequence.hpp"
#include "fnr/tracker.hpp"

namespace fnr {

struct DetectorConfig {
  int gap_limit = 10;
  double ignore_cover_threshold = 0.8;    ///< accept only if overlap with R is below this
  double duplicate_iou_threshold = 0.95;  ///< accept only if max iou with predictions <= this
  int min_history = 2;
  int regression_window = 0;  ///< 0 = regress on every previous center
};

void validate(const DetectorConfig& cfg);

struct CandidateSet {
  /// Reconstructions per frame, ordered by source track id.
  std::vector<std::vector<InstancePrediction>> per_frame;
  std::size_t dropped_empty = 0;  ///< shifts that left the image entirely

  std::size_t total() const;
};

/// Phase 1. `tracks` must hold network observations only.
CandidateSet detect_false_negatives(const std::vector<Track>& tracks, int num_frames,
                                    const DetectorConfig& cfg);

struct CoveringResult {
  std::vector<InstancePrediction> accepted;
  std::size_t suppressed_ignored = 0;
  std::size_t suppressed_duplicate = 0;
};

/// Phase 2 for one frame. Candidates are compared with the frame's network
/// predictions only, never with each other.
CoveringResult covering_check(const std::vector<InstancePrediction>& candidates, const Frame& frame,
                              const DetectorConfig& cfg);

struct DetectionReport {
  std::size_t predicted_instances = 0;  ///< PI: network instances after the ignore filter
  std::size_t detected_instances = 0;   ///< DI: accepted reconstructions
  std::size_t candidates = 0;
  std::size_t dropped_empty = 0;
  std::size_t suppressed_ignored = 0;
  std::size_t suppressed_duplicate = 0;
  std::size_t removed_ignored = 0;  ///< network instances removed by the tracker prefilter
};

struct DetectionResult {
  Sequence sequence;  ///< tracked frames plus accepted reconstructions
  DetectionReport report;
};

/// Phases 1 and 2 on a sequence whose frames already carry track ids.
DetectionResult detect_on_tracked(const Sequence& tracked, const DetectorConfig& cfg);

/// Tracks the sequence, then runs both phases.
DetectionResult run_detection(const Sequence& seq, const TrackerConfig& tracker_cfg,
                              const DetectorConfig& detector_cfg);

}  // namespace fnr
