#pragma once
// Small hand-built sequences shared by the unit tests and the acceptance run.
#include <set>

#include "fnr/sequence.hpp"

namespace fixtures {

struct MovingObject {
  int height = 64;
  int width = 96;
  int rows = 6;
  int cols = 8;
  int row0 = 5;
  int col0 = 5;
  int dv = 1;
  int dh = 2;
  fnr::PixelMask at(int t) const {
    return fnr::PixelMask::rectangle(height, width, row0 + dv * t, col0 + dh * t, rows, cols);
  }
};

// One rigid object moving with constant integer velocity over `frames`
// frames; the detector sees it only in `observed`. Ground truth has it
// everywhere.
inline fnr::Sequence moving_object(const MovingObject& obj, int frames, const std::set<int>& observed) {
  fnr::Sequence seq;
  seq.name = "moving";
  seq.height = obj.height;
  seq.width = obj.width;
  for (int t = 0; t < frames; ++t) {
    fnr::Frame f;
    f.index = t;
    f.height = obj.height;
    f.width = obj.width;
    if (observed.count(t)) {
      fnr::InstancePrediction p;
      p.mask = obj.at(t);
      p.score = 0.9;
      f.instances.push_back(p);
    }
    seq.frames.push_back(f);
    fnr::GroundTruthFrame g;
    g.index = t;
    g.instances.push_back({obj.at(t), 0, 1});
    seq.ground_truth.push_back(g);
  }
  return seq;
}

inline std::set<int> range(int begin, int end) {
  std::set<int> s;
  for (int t = begin; t < end; ++t) s.insert(t);
  return s;
}

}  // namespace fixtures
