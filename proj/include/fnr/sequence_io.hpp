#pragma once
// On-disk layout of a sequence directory:
//
//   sequence.json      {name, height, width, fps, frames: [pred file names], ...}
//   pred_%06d.txt      one JSON record per predicted instance
//   gt_%06d.txt        one JSON record per ground-truth instance (optional)
//   ign_%06d.txt       ignored region as RLE text (optional)
//   depth_%06d.pfm     depth map, little-endian PFM (optional)

#include <filesystem>
#include <string>

#include "fnr/sequence.hpp"

namespace fnr {

Sequence load_sequence(const std::filesystem::path& dir);

/// Writes the manifest layout, replacing any frame files left over in `dir`.
void save_sequence(const Sequence& seq, const std::filesystem::path& dir);

DepthMap read_pfm(const std::filesystem::path& path);
void write_pfm(const std::filesystem::path& path, const DepthMap& depth);

std::string prediction_record(const InstancePrediction& inst);
InstancePrediction parse_prediction_record(const std::string& line, int height, int width);
std::string ground_truth_record(const GroundTruthInstance& inst);
GroundTruthInstance parse_ground_truth_record(const std::string& line, int height, int width);

std::string frame_file_name(const char* prefix, int index, const char* ext);

}  // namespace fnr
