#include "fnr/sequence_io.hpp"

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "fnr/error.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace fnr {

namespace {

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string() + ": cannot open");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw Error(path.string() + ": write failed");
}

const char* origin_name(Origin o) { return o == Origin::detected ? "detected" : "network"; }

PixelMask parse_mask_field(const json& rec, int height, int width) {
  PixelMask mask = PixelMask::parse(rec.at("rle").get<std::string>());
  if (mask.height() != height || mask.width() != width) {
    throw DimensionError("mask grid " + std::to_string(mask.height()) + "x" +
                         std::to_string(mask.width()) + " does not match sequence grid " +
                         std::to_string(height) + "x" + std::to_string(width));
  }
  return mask;
}

template <class Parse>
auto parse_lines(const fs::path& path, Parse parse) {
  const std::string text = read_text(path);
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  std::vector<decltype(parse(line))> out;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    try {
      out.push_back(parse(line));
    } catch (const std::exception& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

std::string frame_file_name(const char* prefix, int index, const char* ext) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%s_%06d.%s", prefix, index, ext);
  return buf;
}

void validate_sequence(const Sequence& seq) {
  if (seq.height <= 0 || seq.width <= 0) throw DimensionError("sequence grid must be positive");
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    const Frame& f = seq.frames[t];
    const std::string where = "frame " + std::to_string(t);
    if (f.index != static_cast<int>(t)) throw ConfigError(where + ": index out of order");
    if (f.height != seq.height || f.width != seq.width) {
      throw DimensionError(where + ": grid differs from sequence grid");
    }
    for (const auto& inst : f.instances) {
      if (inst.mask.height() != seq.height || inst.mask.width() != seq.width) {
        throw DimensionError(where + ": instance mask grid mismatch");
      }
      if (inst.mask.empty()) throw EmptyMaskError(where + ": empty instance mask");
      if (!(inst.score >= 0.0 && inst.score <= 1.0)) {
        throw ConfigError(where + ": score outside [0,1]");
      }
    }
    if (f.ignored && (f.ignored->height() != seq.height || f.ignored->width() != seq.width)) {
      throw DimensionError(where + ": ignored region grid mismatch");
    }
    if (f.depth) {
      if (f.depth->height != seq.height || f.depth->width != seq.width ||
          f.depth->values.size() != static_cast<std::size_t>(seq.height) * seq.width) {
        throw DimensionError(where + ": depth map grid mismatch");
      }
      for (float d : f.depth->values) {
        if (!std::isfinite(d) || d <= 0.0f) throw ConfigError(where + ": depth must be finite and > 0");
      }
    }
  }
  if (seq.has_ground_truth()) {
    if (seq.ground_truth.size() != seq.frames.size()) {
      throw ConfigError("ground truth frame count differs from prediction frame count");
    }
    for (std::size_t t = 0; t < seq.ground_truth.size(); ++t) {
      for (const auto& g : seq.ground_truth[t].instances) {
        if (g.mask.height() != seq.height || g.mask.width() != seq.width) {
          throw DimensionError("ground truth frame " + std::to_string(t) + ": mask grid mismatch");
        }
      }
    }
  }
}

std::string prediction_record(const InstancePrediction& inst) {
  json rec;
  rec["class"] = inst.class_id;
  rec["score"] = inst.score;
  rec["track"] = inst.track_id ? json(*inst.track_id) : json(nullptr);
  rec["origin"] = origin_name(inst.origin);
  if (inst.origin == Origin::detected) rec["source_frame"] = inst.source_frame;
  rec["rle"] = inst.mask.to_string();
  return rec.dump();
}

InstancePrediction parse_prediction_record(const std::string& line, int height, int width) {
  const json rec = json::parse(line);
  InstancePrediction inst;
  inst.mask = parse_mask_field(rec, height, width);
  inst.class_id = rec.at("class").get<int>();
  inst.score = rec.at("score").get<double>();
  if (!(inst.score >= 0.0 && inst.score <= 1.0)) throw ConfigError("score outside [0,1]");
  if (rec.contains("track") && !rec["track"].is_null()) inst.track_id = rec["track"].get<int>();
  const std::string origin = rec.value("origin", std::string("network"));
  if (origin == "network") {
    inst.origin = Origin::network;
  } else if (origin == "detected") {
    inst.origin = Origin::detected;
    inst.source_frame = rec.value("source_frame", -1);
  } else {
    throw ParseError("unknown origin '" + origin + "'");
  }
  if (inst.mask.empty()) throw EmptyMaskError("instance mask is empty");
  return inst;
}

std::string ground_truth_record(const GroundTruthInstance& inst) {
  json rec;
  rec["class"] = inst.class_id;
  rec["gt_track"] = inst.gt_track_id;
  rec["rle"] = inst.mask.to_string();
  return rec.dump();
}

GroundTruthInstance parse_ground_truth_record(const std::string& line, int height, int width) {
  const json rec = json::parse(line);
  GroundTruthInstance inst;
  inst.mask = parse_mask_field(rec, height, width);
  inst.class_id = rec.at("class").get<int>();
  inst.gt_track_id = rec.at("gt_track").get<int>();
  return inst;
}

DepthMap read_pfm(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError(path.string() + ": cannot open");
  std::string magic;
  int width = 0, height = 0;
  double scale = 0.0;
  in >> magic >> width >> height >> scale;
  if (!in || magic != "Pf") throw ParseError(path.string() + ": not a grayscale PFM file");
  if (width <= 0 || height <= 0) throw ParseError(path.string() + ": invalid PFM size");
  in.get();  // single whitespace byte after the header
  DepthMap depth;
  depth.height = height;
  depth.width = width;
  depth.values.resize(static_cast<std::size_t>(width) * height);
  const bool little = scale < 0.0;
  std::vector<std::uint32_t> raw(static_cast<std::size_t>(width));
  // PFM stores rows bottom-to-top.
  for (int row = height - 1; row >= 0; --row) {
    in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size() * 4));
    if (!in) throw ParseError(path.string() + ": truncated PFM data");
    for (int c = 0; c < width; ++c) {
      std::uint32_t bits = raw[c];
      if ((std::endian::native == std::endian::little) != little) bits = __builtin_bswap32(bits);
      float value;
      std::memcpy(&value, &bits, 4);
      depth.values[static_cast<std::size_t>(row) * width + c] = value;
    }
  }
  return depth;
}

void write_pfm(const fs::path& path, const DepthMap& depth) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(path.string() + ": cannot open for writing");
  out << "Pf\n" << depth.width << " " << depth.height << "\n-1.0\n";
  std::vector<std::uint32_t> raw(static_cast<std::size_t>(depth.width));
  for (int row = depth.height - 1; row >= 0; --row) {
    for (int c = 0; c < depth.width; ++c) {
      std::uint32_t bits;
      std::memcpy(&bits, &depth.values[static_cast<std::size_t>(row) * depth.width + c], 4);
      if constexpr (std::endian::native != std::endian::little) bits = __builtin_bswap32(bits);
      raw[c] = bits;
    }
    out.write(reinterpret_cast<const char*>(raw.data()),
              static_cast<std::streamsize>(raw.size() * 4));
  }
  if (!out) throw Error(path.string() + ": write failed");
}

Sequence load_sequence(const fs::path& dir) {
  const fs::path manifest_path = dir / "sequence.json";
  if (!fs::exists(manifest_path)) throw ParseError(dir.string() + ": no frames (missing sequence.json)");
  json manifest;
  try {
    manifest = json::parse(read_text(manifest_path));
  } catch (const json::exception& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }
  Sequence seq;
  try {
    seq.name = manifest.at("name").get<std::string>();
    seq.height = manifest.at("height").get<int>();
    seq.width = manifest.at("width").get<int>();
    seq.fps = manifest.value("fps", 10.0);
    if (manifest.contains("attributes")) {
      for (const auto& [k, v] : manifest["attributes"].items()) seq.attributes[k] = v.get<std::string>();
    }
  } catch (const json::exception& e) {
    throw ParseError(manifest_path.string() + ": " + e.what());
  }
  const auto frame_files = manifest.value("frames", std::vector<std::string>{});
  if (frame_files.empty()) throw ParseError(dir.string() + ": no frames");
  const bool has_gt = manifest.value("ground_truth", false);

  for (std::size_t t = 0; t < frame_files.size(); ++t) {
    const int index = static_cast<int>(t);
    const fs::path pred_path = dir / frame_files[t];
    if (!fs::exists(pred_path)) throw ParseError(pred_path.string() + ": missing frame file");
    Frame frame;
    frame.index = index;
    frame.height = seq.height;
    frame.width = seq.width;
    frame.instances = parse_lines(pred_path, [&](const std::string& line) {
      return parse_prediction_record(line, seq.height, seq.width);
    });
    const fs::path ign_path = dir / frame_file_name("ign", index, "txt");
    if (fs::exists(ign_path)) {
      std::string text = read_text(ign_path);
      try {
        PixelMask ign = PixelMask::parse(text);
        if (ign.height() != seq.height || ign.width() != seq.width) {
          throw DimensionError("ignored region grid mismatch");
        }
        frame.ignored = std::move(ign);
      } catch (const Error& e) {
        throw ParseError(ign_path.string() + ":1: " + e.what());
      }
    }
    const fs::path depth_path = dir / frame_file_name("depth", index, "pfm");
    if (fs::exists(depth_path)) {
      frame.depth = read_pfm(depth_path);
      if (frame.depth->height != seq.height || frame.depth->width != seq.width) {
        throw ParseError(depth_path.string() + ": depth grid mismatch");
      }
    }
    seq.frames.push_back(std::move(frame));

    if (has_gt) {
      const fs::path gt_path = dir / frame_file_name("gt", index, "txt");
      if (!fs::exists(gt_path)) throw ParseError(gt_path.string() + ": missing ground-truth file");
      GroundTruthFrame gt;
      gt.index = index;
      gt.instances = parse_lines(gt_path, [&](const std::string& line) {
        return parse_ground_truth_record(line, seq.height, seq.width);
      });
      seq.ground_truth.push_back(std::move(gt));
    }
  }
  validate_sequence(seq);
  return seq;
}

void save_sequence(const Sequence& seq, const fs::path& dir) {
  validate_sequence(seq);
  fs::create_directories(dir);
  // Drop stale frame files so re-running into the same directory is idempotent.
  for (const auto& entry : fs::directory_iterator(dir)) {
    const std::string name = entry.path().filename().string();
    for (const char* prefix : {"pred_", "gt_", "ign_", "depth_"}) {
      if (name.rfind(prefix, 0) == 0) {
        fs::remove(entry.path());
        break;
      }
    }
  }

  json manifest;
  manifest["name"] = seq.name;
  manifest["height"] = seq.height;
  manifest["width"] = seq.width;
  manifest["fps"] = seq.fps;
  manifest["ground_truth"] = seq.has_ground_truth();
  json attrs = json::object();
  for (const auto& [k, v] : seq.attributes) attrs[k] = v;
  manifest["attributes"] = attrs;
  std::vector<std::string> files;
  for (const Frame& frame : seq.frames) {
    const std::string pred_name = frame_file_name("pred", frame.index, "txt");
    files.push_back(pred_name);
    std::string text;
    for (const auto& inst : frame.instances) text += prediction_record(inst) + "\n";
    write_text(dir / pred_name, text);
    if (frame.ignored) {
      write_text(dir / frame_file_name("ign", frame.index, "txt"), frame.ignored->to_string() + "\n");
    }
    if (frame.depth) write_pfm(dir / frame_file_name("depth", frame.index, "pfm"), *frame.depth);
  }
  for (const GroundTruthFrame& gt : seq.ground_truth) {
    std::string text;
    for (const auto& inst : gt.instances) text += ground_truth_record(inst) + "\n";
    write_text(dir / frame_file_name("gt", gt.index, "txt"), text);
  }
  manifest["frames"] = files;
  write_text(dir / "sequence.json", manifest.dump(2) + "\n");
}

}  // namespace fnr
