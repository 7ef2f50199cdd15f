#pragma once
// Adapter for KITTI-MOTS / MOTS-Challenge style text annotations:
//
//   <frame> <object_id> <class_id> <img_height> <img_width> <coco_rle_string>
//
// The RLE string is the compressed COCO form (column-major counts).

#include <filesystem>
#include <string_view>

#include "fnr/sequence.hpp"

namespace fnr {

struct KittiMotsOptions {
  int car_class = 1;          ///< source id mapped to class 0
  int pedestrian_class = 2;   ///< source id mapped to class 1
  int min_frames = 0;         ///< pad the sequence to at least this many frames
  double fps = 10.0;
};

/// Decodes a compressed COCO RLE string into a row-major mask.
PixelMask decode_coco_rle(std::string_view text, int height, int width);

/// Ground-truth frames plus empty prediction frames. Classes other than car
/// and pedestrian are merged into each frame's ignored region. An empty file
/// yields an empty sequence. Malformed lines raise ParseError with file:line.
Sequence import_kitti_mots(const std::filesystem::path& path, const KittiMotsOptions& opts = {});

}  // namespace fnr
