// Seeded synthetic clips with planted properties. These are the ground-truth
// oracles for the scorer, band, cut and pipeline tests.
//
// Randomness comes from SplitMix64; every clip draws from its own stream so
// adding clips to a corpus never perturbs existing ones. All pixel math is
// integer, so output is bit-exact across platforms.

#ifndef VIDCURATE_SYNTH_H_
#define VIDCURATE_SYNTH_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "vidcurate/core.h"
#include "vidcurate/ingest.h"

namespace vidcurate {

class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  // Independent stream derived from (seed, stream).
  static SplitMix64 Stream(std::uint64_t seed, std::uint64_t stream);

  std::uint64_t Next();
  // Uniform integer in [lo, hi].
  int Uniform(int lo, int hi);

 private:
  std::uint64_t state_;
};

enum class SynthKind { kStatic, kFlicker, kPan, kBlurPair, kMultiScene, kNoise, kDull };

std::string_view SynthKindName(SynthKind kind);
std::optional<SynthKind> ParseSynthKind(std::string_view name);

struct SynthParams {
  std::uint32_t width = 64;
  std::uint32_t height = 64;
  std::uint32_t frames = 48;
  float fps = 24.0f;
  int vx = 0;  // pan velocity, pixels per frame
  int vy = 0;
  std::vector<std::size_t> scene_lengths;  // multi_scene only
  int blur_radius = 4;                     // blur_pair: (2r+1)^2 box
  std::string clip_id = "synth";

  void Validate(SynthKind kind) const;
};

struct GroundTruth {
  std::string kind;                  // corpus class or generator kind
  bool defect = false;
  std::optional<std::pair<int, int>> displacement;
  std::vector<std::size_t> boundaries;  // multi_scene cut positions
  std::optional<int> blur_radius;       // blur_pair, relative to the sharp pan
  std::string rejecting_stage;          // set label expected to drop the clip

  Json ToJson() const;
  static GroundTruth FromJson(const Json& j);
};

struct SynthClip {
  ClipRecord clip;
  FrameBuffer frames;
  GroundTruth truth;
};

// Throws kConfig for invalid params.
SynthClip Generate(SynthKind kind, const SynthParams& params, std::uint64_t seed,
                   std::uint64_t stream = 0);

// Corpus classes: good, static, flicker, pan_fast, blur, dull (the planted
// curation corpus) plus pan, noise and multi_scene.
std::vector<std::string> CorpusClasses();

// Generates the k-th clip of `klass` exactly as GenerateCorpus would.
SynthClip GenerateClass(const std::string& klass, std::size_t k, std::uint64_t seed,
                        std::uint32_t width = 64, std::uint32_t height = 64,
                        std::uint32_t frames = 48);

struct CorpusSpec {
  std::map<std::string, std::size_t> counts;
  std::uint32_t width = 64;
  std::uint32_t height = 64;
  std::uint32_t frames = 48;

  // {"good":20,"static":16,...} with optional "width"/"height"/"frames".
  static CorpusSpec FromJson(const Json& j);
};

struct LabelEntry {
  std::string clip_id;
  GroundTruth truth;
};

// Writes <dir>/<clip_id>.rfv1 for every clip plus <dir>/labels.jsonl.
std::vector<LabelEntry> GenerateCorpus(const CorpusSpec& spec, std::uint64_t seed,
                                       const std::filesystem::path& dir);

std::vector<LabelEntry> LoadLabels(const std::filesystem::path& path);

// (2r+1)x(2r+1) box blur with edge clamping, rounded to nearest.
FrameBuffer BoxBlur(const FrameBuffer& frames, int radius);

// Replaces every channel with the rounded channel mean.
FrameBuffer Desaturate(const FrameBuffer& frames);

}  // namespace vidcurate

#endif  // VIDCURATE_SYNTH_H_
