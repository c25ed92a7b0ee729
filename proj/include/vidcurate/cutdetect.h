// Multi-stride shot-boundary detection and splitting of multi-scene clips.

#ifndef VIDCURATE_CUTDETECT_H_
#define VIDCURATE_CUTDETECT_H_

#include <cstddef>
#include <string>
#include <vector>

#include "vidcurate/core.h"
#include "vidcurate/ingest.h"

namespace vidcurate {

struct CutConfig {
  double theta_abs = 0.30;     // absolute floor on the content distance
  double k = 4.0;              // multiple of the local median
  std::size_t min_scene_len = 32;
  std::size_t window = 15;     // comparisons in the centered median window
  std::vector<std::size_t> strides = {1, 2, 4};

  void Validate() const;
  Json ToJson() const;
  static CutConfig FromJson(const Json& j);
};

// Cut positions are frame indices in [1, frame_count - 1]; each marks the
// first frame of a new scene.
struct CutList {
  std::string clip_id;
  std::vector<std::size_t> cuts;
};

// Per-frame state for content distance: L1-normalized 8x8x8 histogram and
// the full-resolution luma plane.
struct CutFeatures {
  std::vector<std::vector<double>> hists;
  std::vector<std::vector<std::uint8_t>> lumas;
};

CutFeatures ComputeCutFeatures(const FrameBuffer& frames);

// 0.5 * (L1 histogram distance / 2) + 0.5 * (mean |luma difference| / 255).
double ContentDistance(const CutFeatures& features, std::size_t a, std::size_t b);

// Throws kInsufficientFrames for fewer than 2 frames.
CutList DetectCuts(const FrameBuffer& frames, const CutConfig& config = {},
                   const std::string& clip_id = {});

struct SubClip {
  ClipRecord clip;
  FrameBuffer frames;
  std::size_t start = 0;
};

struct DroppedSubClip {
  std::string clip_id;
  std::size_t start = 0;
  std::size_t frame_count = 0;
};

struct SplitResult {
  std::vector<SubClip> kept;
  std::vector<DroppedSubClip> dropped;  // shorter than min_scene_len
};

// Partitions the clip at `cuts` into sub-clips `{parent}#{k}`. Throws
// kIntegrity when the cut list is not valid for the clip.
SplitResult Split(const ClipRecord& clip, const FrameBuffer& frames,
                  const CutList& cuts, std::size_t min_scene_len);

}  // namespace vidcurate

#endif  // VIDCURATE_CUTDETECT_H_
