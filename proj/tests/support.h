// Shared helpers for the unit and acceptance tests.

#ifndef VIDCURATE_TESTS_SUPPORT_H_
#define VIDCURATE_TESTS_SUPPORT_H_

#include <atomic>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <unistd.h>

#include "vidcurate/ingest.h"

namespace vidcurate::testing {

// Fresh directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("vidcurate_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string ReadFile(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline void WriteFile(const std::filesystem::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
}

inline FrameBuffer ConstantFrames(std::uint32_t w, std::uint32_t h, std::size_t n,
                                  std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  FrameBuffer f(w, h);
  std::vector<std::uint8_t> raster(f.frame_bytes());
  for (std::size_t i = 0; i < raster.size(); i += 3) {
    raster[i] = r;
    raster[i + 1] = g;
    raster[i + 2] = b;
  }
  for (std::size_t i = 0; i < n; ++i) f.AppendFrame(raster);
  return f;
}

inline std::string MockSidecar() { return VIDCURATE_MOCK_SIDECAR; }
inline std::string CliPath() { return VIDCURATE_CLI; }
inline std::filesystem::path SourceDir() { return VIDCURATE_SOURCE_DIR; }

}  // namespace vidcurate::testing

#endif  // VIDCURATE_TESTS_SUPPORT_H_
