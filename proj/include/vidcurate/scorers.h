// Classical reference scorers for the four per-clip quality metrics, plus
// the client side of the sidecar scorer protocol.
//
// All reference scorers are pure functions of the frame bytes. Luminance is
// the fixed-point Rec.601 approximation (77R + 150G + 29B) >> 8 so scores are
// bit-identical across platforms.

#ifndef VIDCURATE_SCORERS_H_
#define VIDCURATE_SCORERS_H_

#include <array>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "vidcurate/core.h"
#include "vidcurate/ingest.h"

namespace vidcurate {

class ChildProcess;

inline std::uint8_t Luma(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  return static_cast<std::uint8_t>((77u * r + 150u * g + 29u * b) >> 8);
}

struct LumaPlane {
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::vector<std::uint8_t> pixels;

  std::uint8_t at(std::uint32_t x, std::uint32_t y) const {
    return pixels[static_cast<std::size_t>(y) * width + x];
  }
};

LumaPlane ComputeLuma(std::span<const std::uint8_t> rgb, std::uint32_t width,
                      std::uint32_t height);

// Area-averages by the smallest integer factor that brings
// max(width, height) to <= max_dim; a no-op for small planes.
LumaPlane DownscaleForAnalysis(const LumaPlane& plane, std::uint32_t max_dim);

// Population variance of the 3x3 Laplacian (center -4, cross 1) over
// interior pixels. Zero for planes smaller than 3x3.
double LaplacianVariance(const LumaPlane& plane);

struct ScoreResult {
  double value = 0.0;
  std::vector<std::string> flags;
};

// ---- aesthetics ----------------------------------------------------------

struct AestheticsComponents {
  double colorfulness = 0.0;  // Hasler-Suesstrunk / 150, clamped to [0,1]
  double contrast = 0.0;      // luma stddev / 64, clamped
  double sharpness = 0.0;     // log1p(Laplacian variance) / log1p(2000), clamped

  double Score() const {
    return 10.0 * (0.4 * colorfulness + 0.3 * contrast + 0.3 * sharpness);
  }
};

AestheticsComponents ComputeAestheticsComponents(std::span<const std::uint8_t> rgb,
                                                 std::uint32_t width,
                                                 std::uint32_t height);

// Mean over frames of the per-frame proxy score, in [0,10].
// Throws kInsufficientFrames for an empty buffer.
ScoreResult ScoreAesthetics(const FrameBuffer& frames);

// ---- temporal consistency ------------------------------------------------

struct FrameFeature {
  std::array<double, 512> hist{};   // 8x8x8 RGB histogram, L1-normalized
  std::array<double, 256> luma16{}; // 16x16 area-downsampled luma, L2-normalized
  bool degenerate = false;          // all-zero luma
};

FrameFeature ComputeFrameFeature(std::span<const std::uint8_t> rgb,
                                 std::uint32_t width, std::uint32_t height);

// Cosine of the concatenated features; each half is scaled to unit L2 norm
// before concatenation, so the result is the mean of the two half-cosines
// when neither half is degenerate.
double FeatureCosine(const FrameFeature& a, const FrameFeature& b);

// Mean adjacent-pair cosine. Throws kInsufficientFrames with < 2 frames.
ScoreResult ScoreTemporalConsistency(const FrameBuffer& frames);

// ---- motion --------------------------------------------------------------

struct MotionOptions {
  std::uint32_t block = 16;
  int radius = 8;
  std::uint32_t max_dim = 256;
};

struct BlockMotion {
  std::uint32_t x = 0;  // block origin in the analysis plane
  std::uint32_t y = 0;
  int dx = 0;           // current block matches previous frame at (x+dx, y+dy)
  int dy = 0;
  std::uint64_t best_sad = 0;
  double mean_sad = 0.0;  // over all candidates searched
  bool reliable = true;   // best_sad well below the candidate mean, or flat
};

// Exhaustive SAD block matching of `current` against `previous`.
// When the plane is at least block + 2*radius on a side, the block grid is
// inset by the radius so every candidate lies inside the frame; otherwise
// blocks tile from the origin and out-of-frame candidates are skipped.
// Ties prefer the smallest magnitude, then smallest dy, then smallest dx.
std::vector<BlockMotion> MatchBlocks(const LumaPlane& previous,
                                     const LumaPlane& current,
                                     const MotionOptions& options = {});

// Mean over adjacent pairs of mean block displacement magnitude, in
// analysis-scale pixels per sampled pair. Flags "degenerate" (sub-block
// frames, scored 0) and "saturated" (most blocks found no reliable match,
// i.e. motion exceeds the search radius). Throws kInsufficientFrames with
// < 2 frames.
ScoreResult ScoreMotion(const FrameBuffer& frames, const MotionOptions& options = {});

// ---- clarity -------------------------------------------------------------

// Mean per-frame Laplacian variance of luminance. Throws kDegenerateInput
// for frames smaller than 3x3 and kInsufficientFrames for an empty buffer.
ScoreResult ScoreClarity(const FrameBuffer& frames);

ScoreResult ScoreReference(Metric metric, const FrameBuffer& frames);

// ---- sidecar scorers -----------------------------------------------------

enum class Provider { kReference, kSidecar };

struct ScorerBinding {
  Metric metric = Metric::kAesthetics;
  Provider provider = Provider::kReference;
  std::string sidecar_command;  // launched as "<cmd> --metrics <metric,...>"

  std::string Identity() const;
};

using ScorerBindings = std::array<ScorerBinding, 4>;

ScorerBindings ReferenceBindings();

// One live sidecar process speaking the newline-JSON protocol: handshake
// {"hello":{"protocol":1,"metrics":[...]}}, then one request at a time.
class SidecarConnection {
 public:
  // Launches the process and consumes the handshake.
  SidecarConnection(const std::string& command, std::chrono::milliseconds timeout);
  ~SidecarConnection();

  SidecarConnection(const SidecarConnection&) = delete;
  SidecarConnection& operator=(const SidecarConnection&) = delete;

  const std::vector<std::string>& metrics() const { return metrics_; }
  bool Advertises(Metric metric) const;

  // Sends request `id` and waits for its response. Throws kProtocol on a
  // malformed response or id mismatch, kTimeout on timeout, kScorer when the
  // sidecar reports an error.
  double Score(Metric metric, const std::string& rfv1_path);

  // True once a protocol violation or timeout has left the stream unusable.
  bool broken() const { return broken_; }

 private:
  std::unique_ptr<ChildProcess> child_;
  std::chrono::milliseconds timeout_;
  std::vector<std::string> metrics_;
  std::uint64_t next_id_ = 1;
  bool broken_ = false;
};

// Pool of sidecar processes for one command. Each connection is leased to
// one worker at a time; broken connections are discarded on return.
class SidecarPool {
 public:
  SidecarPool(std::string command, std::size_t max_processes,
              std::chrono::milliseconds timeout);
  ~SidecarPool();

  const std::string& command() const { return command_; }

  double Score(Metric metric, const std::string& rfv1_path);

 private:
  std::unique_ptr<SidecarConnection> Acquire();
  void Release(std::unique_ptr<SidecarConnection> conn);

  std::string command_;
  std::size_t max_processes_;
  std::chrono::milliseconds timeout_;
  std::mutex mu_;
  std::condition_variable cv_;
  std::vector<std::unique_ptr<SidecarConnection>> idle_;
  std::size_t live_ = 0;
};

// Scores one clip through a sidecar and tags the result with its identity.
ScoreValue ScoreViaSidecar(const ScorerBinding& binding, SidecarPool& pool,
                           const ClipRecord& clip, const std::string& rfv1_path);

}  // namespace vidcurate

#endif  // VIDCURATE_SCORERS_H_
