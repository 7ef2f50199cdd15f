#pragma once
// In-memory sequence model shared by every pipeline stage.

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "fnr/mask.hpp"

namespace fnr {

enum class Origin { network, detected };

struct InstancePrediction {
  PixelMask mask;
  int class_id = 0;
  double score = 0.0;
  std::optional<int> track_id;
  Origin origin = Origin::network;
  /// For detected instances: the frame whose mask was shifted (t_last).
  int source_frame = -1;

  friend bool operator==(const InstancePrediction&, const InstancePrediction&) = default;
};

/// Per-pixel depth in meters, row-major.
struct DepthMap {
  int height = 0;
  int width = 0;
  std::vector<float> values;

  float at(int v, int h) const { return values[static_cast<std::size_t>(v) * width + h]; }
  friend bool operator==(const DepthMap&, const DepthMap&) = default;
};

struct GroundTruthInstance {
  PixelMask mask;
  int class_id = 0;
  int gt_track_id = 0;

  friend bool operator==(const GroundTruthInstance&, const GroundTruthInstance&) = default;
};

struct Frame {
  int index = 0;
  int height = 0;
  int width = 0;
  std::vector<InstancePrediction> instances;
  std::optional<PixelMask> ignored;
  std::optional<DepthMap> depth;

  friend bool operator==(const Frame&, const Frame&) = default;
};

struct GroundTruthFrame {
  int index = 0;
  std::vector<GroundTruthInstance> instances;

  friend bool operator==(const GroundTruthFrame&, const GroundTruthFrame&) = default;
};

struct Sequence {
  std::string name;
  int height = 0;
  int width = 0;
  double fps = 10.0;
  std::vector<Frame> frames;
  /// Empty when no annotations are available, else one entry per frame.
  std::vector<GroundTruthFrame> ground_truth;
  /// Free-form provenance carried in the manifest (thresholds, config hashes).
  std::map<std::string, std::string> attributes;

  bool has_ground_truth() const { return !ground_truth.empty(); }
  friend bool operator==(const Sequence&, const Sequence&) = default;
};

/// Throws DimensionError / ConfigError if masks leave the sequence grid,
/// scores fall outside [0,1], masks are empty, or ground truth is misaligned.
void validate_sequence(const Sequence& seq);

}  // namespace fnr
