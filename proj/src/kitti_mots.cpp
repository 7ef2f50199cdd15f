#include "fnr/kitti_mots.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include "fnr/error.hpp"

namespace fnr {

PixelMask decode_coco_rle(std::string_view text, int height, int width) {
  std::vector<std::int64_t> counts;
  std::size_t p = 0;
  while (p < text.size()) {
    std::int64_t x = 0;
    int k = 0;
    bool more = true;
    while (more) {
      if (p >= text.size()) throw ParseError("truncated COCO RLE string");
      const int c = static_cast<int>(text[p]) - 48;
      if (c < 0 || c > 63) throw ParseError("invalid character in COCO RLE string");
      x |= static_cast<std::int64_t>(c & 0x1f) << (5 * k);
      more = (c & 0x20) != 0;
      ++p;
      ++k;
      if (!more && (c & 0x10)) x |= static_cast<std::int64_t>(-1) << (5 * k);
    }
    if (counts.size() > 2) x += counts[counts.size() - 2];
    if (x < 0) throw ParseError("negative count in COCO RLE string");
    counts.push_back(x);
  }
  const std::int64_t total = static_cast<std::int64_t>(height) * width;
  std::int64_t sum = 0;
  for (auto c : counts) sum += c;
  if (sum != total) {
    throw ParseError("COCO RLE counts sum to " + std::to_string(sum) + ", expected " +
                     std::to_string(total));
  }
  // Column-major counts: position q maps to row q % height, column q / height.
  std::vector<std::uint8_t> bitmap(static_cast<std::size_t>(total), 0);
  std::int64_t q = 0;
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (k % 2 == 1) {
      for (std::int64_t e = q + counts[k]; q < e; ++q) {
        bitmap[static_cast<std::size_t>((q % height) * width + q / height)] = 1;
      }
    } else {
      q += counts[k];
    }
  }
  return PixelMask::from_bitmap(height, width, bitmap);
}

Sequence import_kitti_mots(const std::filesystem::path& path, const KittiMotsOptions& opts) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string() + ": cannot open");
  Sequence seq;
  seq.name = path.stem().string();
  seq.fps = opts.fps;
  seq.attributes["source"] = "kitti_mots";

  std::map<int, std::vector<GroundTruthInstance>> by_frame;
  std::map<int, PixelMask> ignored;
  std::string line;
  int line_no = 0;
  int max_frame = -1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const auto fail = [&](const std::string& msg) {
      return ParseError(path.string() + ":" + std::to_string(line_no) + ": " + msg);
    };
    std::istringstream fields(line);
    int frame = 0, object_id = 0, class_id = 0, height = 0, width = 0;
    std::string rle;
    if (!(fields >> frame >> object_id >> class_id >> height >> width >> rle)) {
      throw fail("expected 6 fields");
    }
    if (frame < 0 || height <= 0 || width <= 0) throw fail("invalid frame index or size");
    if (seq.height == 0) {
      seq.height = height;
      seq.width = width;
    } else if (seq.height != height || seq.width != width) {
      throw fail("image size differs from earlier lines");
    }
    PixelMask mask;
    try {
      mask = decode_coco_rle(rle, height, width);
    } catch (const Error& e) {
      throw fail(e.what());
    }
    max_frame = std::max(max_frame, frame);
    if (class_id == opts.car_class || class_id == opts.pedestrian_class) {
      by_frame[frame].push_back({std::move(mask), class_id == opts.car_class ? 0 : 1, object_id});
    } else {
      auto it = ignored.find(frame);
      if (it == ignored.end()) {
        ignored.emplace(frame, std::move(mask));
      } else {
        it->second = mask_union(it->second, mask);
      }
    }
  }
  const int n_frames = std::max(max_frame + 1, max_frame >= 0 ? opts.min_frames : 0);
  for (int t = 0; t < n_frames; ++t) {
    Frame f;
    f.index = t;
    f.height = seq.height;
    f.width = seq.width;
    if (auto it = ignored.find(t); it != ignored.end()) f.ignored = it->second;
    seq.frames.push_back(std::move(f));
    GroundTruthFrame g;
    g.index = t;
    if (auto it = by_frame.find(t); it != by_frame.end()) g.instances = std::move(it->second);
    seq.ground_truth.push_back(std::move(g));
  }
  return seq;
}

}  // namespace fnr
