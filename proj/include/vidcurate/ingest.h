// Frame loading: the RFV1 raw-frame format, the external decoder contract,
// and strided frame sampling.
//
// RFV1 layout (little-endian):
//   0..3   "RFV1"
//   4..7   width        u32
//   8..11  height       u32
//   12..15 frame_count  u32
//   16..19 fps          f32
//   then frame_count rasters of width*height*3 bytes, interleaved RGB,
//   row-major, no padding.

#ifndef VIDCURATE_INGEST_H_
#define VIDCURATE_INGEST_H_

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "vidcurate/core.h"

namespace vidcurate {

inline constexpr std::size_t kRfv1HeaderSize = 20;

// Decoded frames of one clip stored contiguously, frame after frame.
class FrameBuffer {
 public:
  FrameBuffer() = default;
  FrameBuffer(std::uint32_t width, std::uint32_t height)
      : width_(width), height_(height) {}

  std::uint32_t width() const { return width_; }
  std::uint32_t height() const { return height_; }
  std::size_t frame_count() const {
    return frame_bytes() == 0 ? 0 : data_.size() / frame_bytes();
  }
  std::size_t frame_bytes() const {
    return static_cast<std::size_t>(width_) * height_ * 3;
  }
  bool empty() const { return data_.empty(); }

  std::span<const std::uint8_t> frame(std::size_t i) const {
    return {data_.data() + i * frame_bytes(), frame_bytes()};
  }
  std::span<std::uint8_t> mutable_frame(std::size_t i) {
    return {data_.data() + i * frame_bytes(), frame_bytes()};
  }

  // Throws kIntegrity when the raster size does not match the geometry.
  void AppendFrame(std::span<const std::uint8_t> raster);

  // Frames [begin, begin + count).
  FrameBuffer Slice(std::size_t begin, std::size_t count) const;

  const std::vector<std::uint8_t>& data() const { return data_; }
  std::vector<std::uint8_t>& mutable_data() { return data_; }

  bool operator==(const FrameBuffer&) const = default;

 private:
  std::uint32_t width_ = 0;
  std::uint32_t height_ = 0;
  std::vector<std::uint8_t> data_;
};

struct DecodedClip {
  ClipRecord clip;
  FrameBuffer frames;
};

// `clip_id` defaults to the stem of `source`.
DecodedClip ReadRfv1(std::istream& in, const std::string& source,
                     std::string clip_id = {});
DecodedClip ReadRfv1File(const std::filesystem::path& path,
                         std::string clip_id = {});

// Reads only the 20-byte header.
ClipRecord ReadRfv1Header(const std::filesystem::path& path,
                          std::string clip_id = {});

void WriteRfv1(std::ostream& out, const FrameBuffer& frames, float fps);
void WriteRfv1File(const std::filesystem::path& path, const FrameBuffer& frames,
                   float fps);

// Runs `command_template` with "{src}" replaced by the quoted source path
// (appended when the placeholder is absent) and parses RFV1 from its stdout.
DecodedClip DecodeExternal(const std::string& command_template,
                           const std::string& source,
                           std::chrono::milliseconds timeout =
                               std::chrono::seconds(120));

struct SamplingPlan {
  std::uint32_t stride = 1;
  std::uint32_t max_frames = 64;

  void Validate() const;
};

// stride = max(1, frame_count / 64), max_frames = 64.
SamplingPlan DefaultSamplingPlan(std::size_t frame_count);

std::vector<std::size_t> SampleIndices(std::size_t frame_count,
                                       const SamplingPlan& plan);
FrameBuffer Sample(const FrameBuffer& frames, const SamplingPlan& plan);

}  // namespace vidcurate

#endif  // VIDCURATE_INGEST_H_
