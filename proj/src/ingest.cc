#include "vidcurate/ingest.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "vidcurate/process.h"

namespace vidcurate {

namespace {

std::uint32_t LoadU32(const unsigned char* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) |
         (static_cast<std::uint32_t>(p[3]) << 24);
}

void StoreU32(unsigned char* p, std::uint32_t v) {
  p[0] = v & 0xff;
  p[1] = (v >> 8) & 0xff;
  p[2] = (v >> 16) & 0xff;
  p[3] = (v >> 24) & 0xff;
}

ClipRecord ParseHeader(const unsigned char* h, const std::string& source,
                       std::string clip_id) {
  if (std::memcmp(h, "RFV1", 4) != 0) {
    throw Error(ErrorKind::kFormat, source + ": bad magic, expected RFV1");
  }
  ClipRecord c;
  c.clip_id = clip_id.empty() ? std::filesystem::path(source).stem().string()
                              : std::move(clip_id);
  if (c.clip_id.empty()) c.clip_id = "clip";
  c.source = source;
  c.width = LoadU32(h + 4);
  c.height = LoadU32(h + 8);
  c.frame_count = LoadU32(h + 12);
  c.fps = static_cast<double>(std::bit_cast<float>(LoadU32(h + 16)));
  try {
    c.Validate();
  } catch (const Error& e) {
    throw Error(ErrorKind::kFormat, source + ": invalid header (" + e.what() + ")");
  }
  return c;
}

}  // namespace

void FrameBuffer::AppendFrame(std::span<const std::uint8_t> raster) {
  if (raster.size() != frame_bytes()) {
    throw Error(ErrorKind::kIntegrity,
                "raster of " + std::to_string(raster.size()) +
                    " bytes, expected " + std::to_string(frame_bytes()));
  }
  data_.insert(data_.end(), raster.begin(), raster.end());
}

FrameBuffer FrameBuffer::Slice(std::size_t begin, std::size_t count) const {
  FrameBuffer out(width_, height_);
  const std::size_t fb = frame_bytes();
  out.data_.assign(data_.begin() + begin * fb, data_.begin() + (begin + count) * fb);
  return out;
}

DecodedClip ReadRfv1(std::istream& in, const std::string& source,
                     std::string clip_id) {
  unsigned char header[kRfv1HeaderSize];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (in.gcount() < 4 || std::memcmp(header, "RFV1", 4) != 0) {
    throw Error(ErrorKind::kFormat, source + ": bad magic, expected RFV1");
  }
  if (in.gcount() != static_cast<std::streamsize>(kRfv1HeaderSize)) {
    throw Error(ErrorKind::kFormat, source + ": truncated RFV1 header");
  }
  DecodedClip out;
  out.clip = ParseHeader(header, source, std::move(clip_id));
  out.frames = FrameBuffer(out.clip.width, out.clip.height);

  // Frame-at-a-time so a corrupt frame_count cannot force a huge allocation.
  const std::size_t frame_bytes = out.frames.frame_bytes();
  const std::size_t expected = frame_bytes * out.clip.frame_count;
  auto& data = out.frames.mutable_data();
  std::size_t got = 0;
  for (std::uint32_t f = 0; f < out.clip.frame_count; ++f) {
    data.resize(got + frame_bytes);
    in.read(reinterpret_cast<char*>(data.data() + got),
            static_cast<std::streamsize>(frame_bytes));
    got += static_cast<std::size_t>(in.gcount());
    if (in.gcount() != static_cast<std::streamsize>(frame_bytes)) break;
  }
  if (got != expected) {
    throw Error(ErrorKind::kIntegrity,
                source + ": truncated payload, expected " + std::to_string(expected) +
                    " bytes, got " + std::to_string(got));
  }
  return out;
}

DecodedClip ReadRfv1File(const std::filesystem::path& path, std::string clip_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  return ReadRfv1(in, path.string(), std::move(clip_id));
}

ClipRecord ReadRfv1Header(const std::filesystem::path& path, std::string clip_id) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  unsigned char header[kRfv1HeaderSize];
  in.read(reinterpret_cast<char*>(header), sizeof(header));
  if (in.gcount() != static_cast<std::streamsize>(kRfv1HeaderSize)) {
    throw Error(ErrorKind::kFormat, path.string() + ": truncated RFV1 header");
  }
  return ParseHeader(header, path.string(), std::move(clip_id));
}

void WriteRfv1(std::ostream& out, const FrameBuffer& frames, float fps) {
  unsigned char header[kRfv1HeaderSize];
  std::memcpy(header, "RFV1", 4);
  StoreU32(header + 4, frames.width());
  StoreU32(header + 8, frames.height());
  StoreU32(header + 12, static_cast<std::uint32_t>(frames.frame_count()));
  StoreU32(header + 16, std::bit_cast<std::uint32_t>(fps));
  out.write(reinterpret_cast<const char*>(header), sizeof(header));
  out.write(reinterpret_cast<const char*>(frames.data().data()),
            static_cast<std::streamsize>(frames.data().size()));
}

void WriteRfv1File(const std::filesystem::path& path, const FrameBuffer& frames,
                   float fps) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
  WriteRfv1(out, frames, fps);
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

DecodedClip DecodeExternal(const std::string& command_template,
                           const std::string& source,
                           std::chrono::milliseconds timeout) {
  std::string command = command_template;
  const std::string placeholder = "{src}";
  const std::string quoted = ShellQuote(source);
  if (auto pos = command.find(placeholder); pos != std::string::npos) {
    do {
      command.replace(pos, placeholder.size(), quoted);
      pos = command.find(placeholder, pos + quoted.size());
    } while (pos != std::string::npos);
  } else {
    command += " " + quoted;
  }
  CommandResult r = RunCommand(command, timeout);
  if (r.timed_out) {
    throw Error(ErrorKind::kDecoder, "decoder timed out on " + source);
  }
  if (r.exit_status != 0) {
    throw Error(ErrorKind::kDecoder, "decoder exited with status " +
                                         std::to_string(r.exit_status) + " on " +
                                         source + ": " + r.stderr_data);
  }
  std::istringstream in(r.stdout_data);
  return ReadRfv1(in, source);
}

void SamplingPlan::Validate() const {
  if (stride < 1) throw Error(ErrorKind::kConfig, "sampling stride must be >= 1");
  if (max_frames < 2) throw Error(ErrorKind::kConfig, "sampling max_frames must be >= 2");
}

SamplingPlan DefaultSamplingPlan(std::size_t frame_count) {
  SamplingPlan plan;
  plan.stride = static_cast<std::uint32_t>(std::max<std::size_t>(1, frame_count / 64));
  plan.max_frames = 64;
  return plan;
}

std::vector<std::size_t> SampleIndices(std::size_t frame_count,
                                       const SamplingPlan& plan) {
  plan.Validate();
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < frame_count && out.size() < plan.max_frames;
       i += plan.stride) {
    out.push_back(i);
  }
  return out;
}

FrameBuffer Sample(const FrameBuffer& frames, const SamplingPlan& plan) {
  FrameBuffer out(frames.width(), frames.height());
  for (std::size_t i : SampleIndices(frames.frame_count(), plan)) {
    out.AppendFrame(frames.frame(i));
  }
  return out;
}

}  // namespace vidcurate
