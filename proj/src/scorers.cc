#include "vidcurate/scorers.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>

#include "vidcurate/process.h"

namespace vidcurate {

namespace {

double Clamp01(double v) { return std::clamp(v, 0.0, 1.0); }

void RequireFrames(const FrameBuffer& frames, std::size_t n, Metric metric) {
  if (frames.frame_count() < n) {
    throw Error(ErrorKind::kInsufficientFrames,
                std::string(MetricName(metric)) + " needs at least " +
                    std::to_string(n) + " frame(s), got " +
                    std::to_string(frames.frame_count()));
  }
}

void AddFlag(std::vector<std::string>& flags, const std::string& flag) {
  if (std::find(flags.begin(), flags.end(), flag) == flags.end()) flags.push_back(flag);
}

}  // namespace

LumaPlane ComputeLuma(std::span<const std::uint8_t> rgb, std::uint32_t width,
                      std::uint32_t height) {
  LumaPlane plane;
  plane.width = width;
  plane.height = height;
  const std::size_t n = static_cast<std::size_t>(width) * height;
  plane.pixels.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    plane.pixels[i] = Luma(rgb[3 * i], rgb[3 * i + 1], rgb[3 * i + 2]);
  }
  return plane;
}

LumaPlane DownscaleForAnalysis(const LumaPlane& plane, std::uint32_t max_dim) {
  const std::uint32_t longest = std::max(plane.width, plane.height);
  if (longest <= max_dim) return plane;
  const std::uint32_t f = (longest + max_dim - 1) / max_dim;
  LumaPlane out;
  out.width = std::max<std::uint32_t>(1, plane.width / f);
  out.height = std::max<std::uint32_t>(1, plane.height / f);
  out.pixels.resize(static_cast<std::size_t>(out.width) * out.height);
  for (std::uint32_t y = 0; y < out.height; ++y) {
    for (std::uint32_t x = 0; x < out.width; ++x) {
      std::uint32_t sum = 0;
      std::uint32_t count = 0;
      for (std::uint32_t yy = y * f; yy < std::min(plane.height, (y + 1) * f); ++yy) {
        for (std::uint32_t xx = x * f; xx < std::min(plane.width, (x + 1) * f); ++xx) {
          sum += plane.at(xx, yy);
          ++count;
        }
      }
      out.pixels[static_cast<std::size_t>(y) * out.width + x] =
          static_cast<std::uint8_t>((sum + count / 2) / count);
    }
  }
  return out;
}

double LaplacianVariance(const LumaPlane& plane) {
  if (plane.width < 3 || plane.height < 3) return 0.0;
  // Integer sums are exact, so the result does not depend on summation order.
  std::int64_t sum = 0;
  std::int64_t sum_sq = 0;
  const std::uint32_t w = plane.width;
  const std::uint8_t* p = plane.pixels.data();
  for (std::uint32_t y = 1; y + 1 < plane.height; ++y) {
    const std::uint8_t* row = p + static_cast<std::size_t>(y) * w;
    const std::uint8_t* up = row - w;
    const std::uint8_t* down = row + w;
    for (std::uint32_t x = 1; x + 1 < w; ++x) {
      const int lap = up[x] + down[x] + row[x - 1] + row[x + 1] - 4 * row[x];
      sum += lap;
      sum_sq += static_cast<std::int64_t>(lap) * lap;
    }
  }
  const double n = static_cast<double>(plane.width - 2) * (plane.height - 2);
  const double mean = static_cast<double>(sum) / n;
  return std::max(0.0, static_cast<double>(sum_sq) / n - mean * mean);
}

AestheticsComponents ComputeAestheticsComponents(std::span<const std::uint8_t> rgb,
                                                 std::uint32_t width,
                                                 std::uint32_t height) {
  const std::size_t n = static_cast<std::size_t>(width) * height;
  double s_rg = 0, s_rg2 = 0, s_yb = 0, s_yb2 = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = rgb[3 * i], g = rgb[3 * i + 1], b = rgb[3 * i + 2];
    const double rg = r - g;
    const double yb = 0.5 * (r + g) - b;
    s_rg += rg;
    s_rg2 += rg * rg;
    s_yb += yb;
    s_yb2 += yb * yb;
  }
  const double mu_rg = s_rg / n, mu_yb = s_yb / n;
  const double var_rg = std::max(0.0, s_rg2 / n - mu_rg * mu_rg);
  const double var_yb = std::max(0.0, s_yb2 / n - mu_yb * mu_yb);
  const double hasler =
      std::sqrt(var_rg + var_yb) + 0.3 * std::sqrt(mu_rg * mu_rg + mu_yb * mu_yb);

  LumaPlane luma = ComputeLuma(rgb, width, height);
  std::uint64_t s = 0, s2 = 0;
  for (std::uint8_t v : luma.pixels) {
    s += v;
    s2 += static_cast<std::uint64_t>(v) * v;
  }
  const double mean = static_cast<double>(s) / n;
  const double var = std::max(0.0, static_cast<double>(s2) / n - mean * mean);

  AestheticsComponents c;
  c.colorfulness = Clamp01(hasler / 150.0);
  c.contrast = Clamp01(std::sqrt(var) / 64.0);
  c.sharpness = Clamp01(std::log1p(LaplacianVariance(luma)) / std::log1p(2000.0));
  return c;
}

ScoreResult ScoreAesthetics(const FrameBuffer& frames) {
  RequireFrames(frames, 1, Metric::kAesthetics);
  ScoreResult result;
  if (frames.width() < 3 || frames.height() < 3) AddFlag(result.flags, "degenerate");
  double total = 0.0;
  for (std::size_t i = 0; i < frames.frame_count(); ++i) {
    total += ComputeAestheticsComponents(frames.frame(i), frames.width(),
                                         frames.height())
                 .Score();
  }
  result.value = std::clamp(total / frames.frame_count(), 0.0, 10.0);
  return result;
}

FrameFeature ComputeFrameFeature(std::span<const std::uint8_t> rgb,
                                 std::uint32_t width, std::uint32_t height) {
  FrameFeature f;
  const std::size_t n = static_cast<std::size_t>(width) * height;
  std::array<std::uint32_t, 512> counts{};
  for (std::size_t i = 0; i < n; ++i) {
    const unsigned bin =
        ((rgb[3 * i] >> 5) << 6) | ((rgb[3 * i + 1] >> 5) << 3) | (rgb[3 * i + 2] >> 5);
    ++counts[bin];
  }
  for (std::size_t b = 0; b < 512; ++b) {
    f.hist[b] = static_cast<double>(counts[b]) / static_cast<double>(n);
  }

  LumaPlane luma = ComputeLuma(rgb, width, height);
  double norm2 = 0.0;
  for (std::uint32_t cy = 0; cy < 16; ++cy) {
    std::uint32_t y0 = cy * height / 16;
    std::uint32_t y1 = std::max(y0 + 1, (cy + 1) * height / 16);
    for (std::uint32_t cx = 0; cx < 16; ++cx) {
      std::uint32_t x0 = cx * width / 16;
      std::uint32_t x1 = std::max(x0 + 1, (cx + 1) * width / 16);
      std::uint64_t sum = 0;
      for (std::uint32_t y = y0; y < y1; ++y) {
        for (std::uint32_t x = x0; x < x1; ++x) sum += luma.at(x, y);
      }
      const double v = static_cast<double>(sum) / ((y1 - y0) * (x1 - x0));
      f.luma16[cy * 16 + cx] = v;
      norm2 += v * v;
    }
  }
  if (norm2 == 0.0) {
    f.degenerate = true;
  } else {
    const double inv = 1.0 / std::sqrt(norm2);
    for (double& v : f.luma16) v *= inv;
  }
  return f;
}

double FeatureCosine(const FrameFeature& a, const FrameFeature& b) {
  auto norm = [](const auto& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
  };
  // Concatenate hist/|hist| and luma16 (already unit or zero), then
  // renormalize the whole vector.
  const double ha = norm(a.hist), hb = norm(b.hist);
  double dot_h = 0.0;
  for (std::size_t i = 0; i < 512; ++i) dot_h += a.hist[i] * b.hist[i];
  dot_h /= ha * hb;
  double dot_l = 0.0;
  for (std::size_t i = 0; i < 256; ++i) dot_l += a.luma16[i] * b.luma16[i];
  const double na = std::sqrt(1.0 + (a.degenerate ? 0.0 : 1.0));
  const double nb = std::sqrt(1.0 + (b.degenerate ? 0.0 : 1.0));
  return std::clamp((dot_h + dot_l) / (na * nb), -1.0, 1.0);
}

ScoreResult ScoreTemporalConsistency(const FrameBuffer& frames) {
  RequireFrames(frames, 2, Metric::kTemporalConsistency);
  ScoreResult result;
  FrameFeature prev = ComputeFrameFeature(frames.frame(0), frames.width(), frames.height());
  if (prev.degenerate) AddFlag(result.flags, "degenerate");
  double total = 0.0;
  for (std::size_t i = 1; i < frames.frame_count(); ++i) {
    FrameFeature cur =
        ComputeFrameFeature(frames.frame(i), frames.width(), frames.height());
    if (cur.degenerate) AddFlag(result.flags, "degenerate");
    total += FeatureCosine(prev, cur);
    prev = std::move(cur);
  }
  result.value = total / static_cast<double>(frames.frame_count() - 1);
  return result;
}

std::vector<BlockMotion> MatchBlocks(const LumaPlane& previous,
                                     const LumaPlane& current,
                                     const MotionOptions& options) {
  const std::uint32_t w = current.width;
  const std::uint32_t h = current.height;
  const std::uint32_t bs = options.block;
  const int r = options.radius;
  std::vector<BlockMotion> out;
  if (w < bs || h < bs) return out;

  const bool inset = w >= bs + 2 * r && h >= bs + 2 * r;
  const std::uint32_t origin = inset ? static_cast<std::uint32_t>(r) : 0;
  const std::uint32_t margin = inset ? static_cast<std::uint32_t>(r) : 0;

  for (std::uint32_t by = origin; by + bs + margin <= h; by += bs) {
    for (std::uint32_t bx = origin; bx + bs + margin <= w; bx += bs) {
      BlockMotion bm;
      bm.x = bx;
      bm.y = by;
      std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
      int best_mag = 0;
      double sad_total = 0.0;
      std::size_t candidates = 0;
      for (int dy = -r; dy <= r; ++dy) {
        const long py = static_cast<long>(by) + dy;
        if (py < 0 || py + bs > h) continue;
        for (int dx = -r; dx <= r; ++dx) {
          const long px = static_cast<long>(bx) + dx;
          if (px < 0 || px + bs > w) continue;
          std::uint64_t sad = 0;
          for (std::uint32_t y = 0; y < bs; ++y) {
            const std::uint8_t* a = current.pixels.data() + (by + y) * w + bx;
            const std::uint8_t* b = previous.pixels.data() + (py + y) * w + px;
            unsigned row = 0;
            for (std::uint32_t x = 0; x < bs; ++x) {
              row += static_cast<unsigned>(std::abs(int(a[x]) - int(b[x])));
            }
            sad += row;
          }
          sad_total += static_cast<double>(sad);
          ++candidates;
          const int mag = dx * dx + dy * dy;
          // Scan order is dy-major then dx, so on equal SAD and magnitude the
          // first candidate seen already has the smallest (dy, dx).
          if (sad < best || (sad == best && mag < best_mag)) {
            best = sad;
            best_mag = mag;
            bm.dx = dx;
            bm.dy = dy;
          }
        }
      }
      bm.best_sad = best;
      bm.mean_sad = sad_total / static_cast<double>(candidates);
      const bool flat = bm.mean_sad < static_cast<double>(bs) * bs;
      bm.reliable = flat || static_cast<double>(best) <= 0.5 * bm.mean_sad;
      out.push_back(bm);
    }
  }
  return out;
}

ScoreResult ScoreMotion(const FrameBuffer& frames, const MotionOptions& options) {
  RequireFrames(frames, 2, Metric::kMotion);
  ScoreResult result;
  auto plane = [&](std::size_t i) {
    return DownscaleForAnalysis(
        ComputeLuma(frames.frame(i), frames.width(), frames.height()), options.max_dim);
  };
  LumaPlane prev = plane(0);
  if (prev.width < options.block || prev.height < options.block) {
    result.flags.push_back("degenerate");
    return result;
  }
  double total = 0.0;
  std::size_t blocks = 0;
  std::size_t unreliable = 0;
  for (std::size_t i = 1; i < frames.frame_count(); ++i) {
    LumaPlane cur = plane(i);
    auto matches = MatchBlocks(prev, cur, options);
    double pair = 0.0;
    for (const auto& m : matches) {
      pair += std::sqrt(static_cast<double>(m.dx * m.dx + m.dy * m.dy));
      if (!m.reliable) ++unreliable;
    }
    total += pair / static_cast<double>(matches.size());
    blocks += matches.size();
    prev = std::move(cur);
  }
  result.value = total / static_cast<double>(frames.frame_count() - 1);
  if (2 * unreliable >= blocks) result.flags.push_back("saturated");
  return result;
}

ScoreResult ScoreClarity(const FrameBuffer& frames) {
  RequireFrames(frames, 1, Metric::kClarity);
  if (frames.width() < 3 || frames.height() < 3) {
    throw Error(ErrorKind::kDegenerateInput,
                "clarity needs frames of at least 3x3, got " +
                    std::to_string(frames.width()) + "x" +
                    std::to_string(frames.height()));
  }
  double total = 0.0;
  for (std::size_t i = 0; i < frames.frame_count(); ++i) {
    total += LaplacianVariance(ComputeLuma(frames.frame(i), frames.width(), frames.height()));
  }
  return {total / static_cast<double>(frames.frame_count()), {}};
}

ScoreResult ScoreReference(Metric metric, const FrameBuffer& frames) {
  switch (metric) {
    case Metric::kAesthetics: return ScoreAesthetics(frames);
    case Metric::kTemporalConsistency: return ScoreTemporalConsistency(frames);
    case Metric::kMotion: return ScoreMotion(frames);
    case Metric::kClarity: return ScoreClarity(frames);
  }
  return {};
}

std::string ScorerBinding::Identity() const {
  return provider == Provider::kReference ? "reference" : "sidecar:" + sidecar_command;
}

ScorerBindings ReferenceBindings() {
  ScorerBindings b;
  for (Metric m : kAllMetrics) b[static_cast<std::size_t>(m)].metric = m;
  return b;
}

SidecarConnection::SidecarConnection(const std::string& command,
                                     std::chrono::milliseconds timeout)
    : child_(std::make_unique<ChildProcess>(command)), timeout_(timeout) {
  const std::string line = child_->ReadLine(timeout_);
  Json hello;
  try {
    hello = Json::parse(line);
  } catch (const Json::parse_error&) {
    throw Error(ErrorKind::kProtocol, "sidecar '" + command + "' sent a malformed handshake");
  }
  if (!hello.is_object() || !hello.contains("hello") || !hello["hello"].is_object()) {
    throw Error(ErrorKind::kProtocol, "sidecar '" + command + "' did not send hello");
  }
  const Json& h = hello["hello"];
  if (h.value("protocol", 0) != 1) {
    throw Error(ErrorKind::kProtocol, "sidecar '" + command + "' speaks an unsupported protocol");
  }
  if (!h.contains("metrics") || !h["metrics"].is_array()) {
    throw Error(ErrorKind::kProtocol, "sidecar '" + command + "' advertised no metrics");
  }
  for (const auto& m : h["metrics"]) {
    if (m.is_string()) metrics_.push_back(m.get<std::string>());
  }
}

SidecarConnection::~SidecarConnection() = default;

bool SidecarConnection::Advertises(Metric metric) const {
  return std::find(metrics_.begin(), metrics_.end(), MetricName(metric)) != metrics_.end();
}

double SidecarConnection::Score(Metric metric, const std::string& rfv1_path) {
  if (!Advertises(metric)) {
    throw Error(ErrorKind::kScorer, "sidecar '" + child_->command() +
                                        "' does not advertise " +
                                        std::string(MetricName(metric)));
  }
  const std::uint64_t id = next_id_++;
  Json request = {{"id", id}, {"metric", std::string(MetricName(metric))},
                  {"rfv1_path", rfv1_path}};
  std::string line;
  try {
    child_->WriteLine(request.dump());
    line = child_->ReadLine(timeout_);
  } catch (const Error&) {
    broken_ = true;
    throw;
  }
  auto violation = [&](const std::string& why) {
    broken_ = true;
    return Error(ErrorKind::kProtocol, "sidecar '" + child_->command() + "': " + why);
  };
  Json response;
  try {
    response = Json::parse(line);
  } catch (const Json::parse_error&) {
    throw violation("malformed response line");
  }
  if (!response.is_object() || !response.contains("id") ||
      !response["id"].is_number_unsigned()) {
    throw violation("response without id");
  }
  if (response["id"].get<std::uint64_t>() != id) {
    throw violation("response id " + std::to_string(response["id"].get<std::uint64_t>()) +
                    " does not match request id " + std::to_string(id));
  }
  if (response.contains("error")) {
    throw Error(ErrorKind::kScorer, "sidecar '" + child_->command() + "' failed: " +
                                        response["error"].dump());
  }
  if (!response.contains("score") || !response["score"].is_number()) {
    throw violation("response without numeric score");
  }
  return response["score"].get<double>();
}

SidecarPool::SidecarPool(std::string command, std::size_t max_processes,
                         std::chrono::milliseconds timeout)
    : command_(std::move(command)),
      max_processes_(std::max<std::size_t>(1, max_processes)),
      timeout_(timeout) {}

SidecarPool::~SidecarPool() = default;

std::unique_ptr<SidecarConnection> SidecarPool::Acquire() {
  std::unique_lock<std::mutex> lock(mu_);
  cv_.wait(lock, [&] { return !idle_.empty() || live_ < max_processes_; });
  if (!idle_.empty()) {
    auto conn = std::move(idle_.back());
    idle_.pop_back();
    return conn;
  }
  ++live_;
  lock.unlock();
  try {
    return std::make_unique<SidecarConnection>(command_, timeout_);
  } catch (...) {
    std::lock_guard<std::mutex> relock(mu_);
    --live_;
    cv_.notify_one();
    throw;
  }
}

void SidecarPool::Release(std::unique_ptr<SidecarConnection> conn) {
  std::lock_guard<std::mutex> lock(mu_);
  if (conn->broken()) {
    --live_;
  } else {
    idle_.push_back(std::move(conn));
  }
  cv_.notify_one();
}

double SidecarPool::Score(Metric metric, const std::string& rfv1_path) {
  auto conn = Acquire();
  try {
    double v = conn->Score(metric, rfv1_path);
    Release(std::move(conn));
    return v;
  } catch (...) {
    Release(std::move(conn));
    throw;
  }
}

ScoreValue ScoreViaSidecar(const ScorerBinding& binding, SidecarPool& pool,
                           const ClipRecord& clip, const std::string& rfv1_path) {
  try {
    ScoreValue v;
    v.value = pool.Score(binding.metric, rfv1_path);
    v.scorer = binding.Identity();
    return v;
  } catch (const Error& e) {
    throw Error(e.kind(), "clip " + clip.clip_id + ": " + e.what());
  }
}

}  // namespace vidcurate
