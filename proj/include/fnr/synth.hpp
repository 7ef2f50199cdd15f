#pragma once
// Deterministic moving-shapes scenes with a simulated imperfect detector.

#include <cstdint>
#include <vector>

#include "fnr/sequence.hpp"

namespace fnr {

struct SynthConfig {
  int num_sequences = 3;
  int frames_per_sequence = 100;
  int height = 128;
  int width = 192;
  int objects_min = 5;
  int objects_max = 5;
  int size_min = 12;  ///< shape extent in pixels, per axis
  int size_max = 30;
  double ellipse_fraction = 0.5;  ///< probability a shape is an ellipse, else a rectangle
  int velocity_max = 2;           ///< integer velocities drawn from [-max, max] per axis
  int num_classes = 2;
  /// Objects born after frame 0 appear uniformly in [1, late_birth_max].
  double late_birth_probability = 0.3;
  /// Probability an object disappears (ends its track) before the sequence ends.
  double death_probability = 0.5;
  int min_lifetime = 15;
  int min_visible_pixels = 12;    ///< smaller visible remnants are not annotated

  double dropout = 0.1;           ///< per-instance miss probability of the detector
  double fp_rate = 0.1;           ///< spurious instances per visible object per frame
  double score_noise = 0.15;      ///< true scores are 1 - |N(0, noise)|
  double spurious_score_min = 0.05;
  double spurious_score_max = 0.6;

  bool with_depth = true;
  double depth_min = 5.0;          ///< per-object constant depth range (meters)
  double depth_max = 40.0;
  double background_depth = 80.0;

  std::uint64_t seed = 42;
};

/// Throws ConfigError on invalid settings (including grids under 8x8).
void validate(const SynthConfig& cfg);

/// Predictions (`frames`) and annotations (`ground_truth`) for each sequence.
/// A pure function of the configuration.
std::vector<Sequence> generate_scene(const SynthConfig& cfg);

}  // namespace fnr
