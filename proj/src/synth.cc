#include "vidcurate/synth.h"

#include <algorithm>
#include <array>
#include <cstdlib>
#include <fstream>

namespace vidcurate {

std::uint64_t SplitMix64::Next() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

SplitMix64 SplitMix64::Stream(std::uint64_t seed, std::uint64_t stream) {
  SplitMix64 a(seed);
  SplitMix64 b(stream ^ 0xD1B54A32D192ED03ull);
  return SplitMix64(a.Next() ^ b.Next());
}

int SplitMix64::Uniform(int lo, int hi) {
  const auto span = static_cast<std::uint64_t>(hi - lo + 1);
  // Multiply-shift keeps the mapping identical on every platform.
  const std::uint64_t r = Next() >> 32;
  return lo + static_cast<int>((r * span) >> 32);
}

std::string_view SynthKindName(SynthKind kind) {
  switch (kind) {
    case SynthKind::kStatic: return "static";
    case SynthKind::kFlicker: return "flicker";
    case SynthKind::kPan: return "pan";
    case SynthKind::kBlurPair: return "blur_pair";
    case SynthKind::kMultiScene: return "multi_scene";
    case SynthKind::kNoise: return "noise";
    case SynthKind::kDull: return "dull";
  }
  return "";
}

std::optional<SynthKind> ParseSynthKind(std::string_view name) {
  for (SynthKind k : {SynthKind::kStatic, SynthKind::kFlicker, SynthKind::kPan,
                      SynthKind::kBlurPair, SynthKind::kMultiScene, SynthKind::kNoise,
                      SynthKind::kDull}) {
    if (SynthKindName(k) == name) return k;
  }
  return std::nullopt;
}

void SynthParams::Validate(SynthKind kind) const {
  auto bad = [&](const std::string& why) {
    return Error(ErrorKind::kConfig,
                 std::string(SynthKindName(kind)) + " clip " + clip_id + ": " + why);
  };
  if (width < 1 || height < 1) throw bad("width and height must be >= 1");
  if (!(fps > 0.0f)) throw bad("fps must be positive");
  if (std::abs(vx) >= static_cast<int>(width) || std::abs(vy) >= static_cast<int>(height)) {
    throw bad("pan velocity must stay within the frame size");
  }
  if (blur_radius < 0) throw bad("blur radius must be >= 0");
  if (kind == SynthKind::kMultiScene) {
    if (scene_lengths.empty()) throw bad("multi_scene needs scene lengths");
    for (std::size_t len : scene_lengths) {
      if (len < 2) throw bad("scene lengths must be >= 2");
    }
  } else if (frames < 1) {
    throw bad("frames must be >= 1");
  }
  if (kind == SynthKind::kFlicker && frames < 2) throw bad("flicker needs >= 2 frames");
}

Json GroundTruth::ToJson() const {
  Json j = {{"kind", kind}, {"defect", defect}, {"rejecting_stage", rejecting_stage}};
  if (displacement) j["displacement"] = {displacement->first, displacement->second};
  if (!boundaries.empty()) j["boundaries"] = boundaries;
  if (blur_radius) j["blur_radius"] = *blur_radius;
  return j;
}

GroundTruth GroundTruth::FromJson(const Json& j) {
  GroundTruth g;
  g.kind = j.at("kind").get<std::string>();
  g.defect = j.value("defect", false);
  g.rejecting_stage = j.value("rejecting_stage", std::string());
  if (j.contains("displacement")) {
    g.displacement = {j["displacement"][0].get<int>(), j["displacement"][1].get<int>()};
  }
  if (j.contains("boundaries")) g.boundaries = j["boundaries"].get<std::vector<std::size_t>>();
  if (j.contains("blur_radius")) g.blur_radius = j["blur_radius"].get<int>();
  return g;
}

namespace {

struct Image {
  std::uint32_t w = 0;
  std::uint32_t h = 0;
  std::vector<std::uint8_t> rgb;

  Image(std::uint32_t width, std::uint32_t height)
      : w(width), h(height), rgb(static_cast<std::size_t>(width) * height * 3) {}

  std::uint8_t* px(std::uint32_t x, std::uint32_t y) {
    return rgb.data() + (static_cast<std::size_t>(y) * w + x) * 3;
  }
};

std::uint8_t Clamp8(int v) { return static_cast<std::uint8_t>(std::clamp(v, 0, 255)); }

constexpr std::uint32_t kCell = 8;

// Piecewise-constant cells from `cell_color` plus per-pixel noise; the
// per-channel result is clamped to [lo[c], hi[c]].
template <typename CellColor>
Image CellTexture(SplitMix64& rng, std::uint32_t w, std::uint32_t h, int noise,
                  CellColor cell_color, std::array<int, 3> lo = {0, 0, 0},
                  std::array<int, 3> hi = {255, 255, 255}, bool gray = false) {
  const std::uint32_t cw = (w + kCell - 1) / kCell;
  const std::uint32_t ch = (h + kCell - 1) / kCell;
  std::vector<std::array<int, 3>> cells(static_cast<std::size_t>(cw) * ch);
  for (auto& c : cells) c = cell_color(rng);
  Image img(w, h);
  for (std::uint32_t y = 0; y < h; ++y) {
    for (std::uint32_t x = 0; x < w; ++x) {
      const auto& c = cells[(y / kCell) * cw + x / kCell];
      std::uint8_t* p = img.px(x, y);
      if (gray) {
        const int v = std::clamp(c[0] + rng.Uniform(-noise, noise), lo[0], hi[0]);
        p[0] = p[1] = p[2] = Clamp8(v);
      } else {
        for (int k = 0; k < 3; ++k) {
          p[k] = Clamp8(std::clamp(c[k] + rng.Uniform(-noise, noise), lo[k], hi[k]));
        }
      }
    }
  }
  return img;
}

Image ColorfulTexture(SplitMix64& rng, std::uint32_t w, std::uint32_t h) {
  return CellTexture(rng, w, h, 24, [](SplitMix64& r) {
    return std::array<int, 3>{r.Uniform(0, 255), r.Uniform(0, 255), r.Uniform(0, 255)};
  });
}

Image DullTexture(SplitMix64& rng, std::uint32_t w, std::uint32_t h) {
  return CellTexture(
      rng, w, h, 3,
      [](SplitMix64& r) {
        const int v = 128 + r.Uniform(-6, 6);
        return std::array<int, 3>{v, v, v};
      },
      {0, 0, 0}, {255, 255, 255}, /*gray=*/true);
}

// Channels sit near 48 or 176 depending on the corner bits, so textures of
// different corners never share a histogram bin.
Image AnchorTexture(SplitMix64& rng, std::uint32_t w, std::uint32_t h, int corner) {
  return CellTexture(rng, w, h, 12, [corner](SplitMix64& r) {
    std::array<int, 3> c{};
    for (int k = 0; k < 3; ++k) c[k] = ((corner >> k) & 1 ? 176 : 48) + r.Uniform(-16, 16);
    return c;
  });
}

Image NoiseTexture(SplitMix64& rng, std::uint32_t w, std::uint32_t h) {
  Image img(w, h);
  for (auto& v : img.rgb) v = static_cast<std::uint8_t>(rng.Uniform(0, 255));
  return img;
}

// Flicker alternates between (128 + r, g, b) and (r, g + 66, b): the red
// channel switches histogram halves while luminance is nearly unchanged.
constexpr int kFlickerGreenShift = 66;

Image FlickerParamTexture(SplitMix64& rng, std::uint32_t w, std::uint32_t h) {
  return CellTexture(
      rng, w, h, 8,
      [](SplitMix64& r) {
        return std::array<int, 3>{r.Uniform(8, 119), r.Uniform(8, 181), r.Uniform(8, 247)};
      },
      {0, 0, 0}, {127, 255 - kFlickerGreenShift, 255});
}

Image BlurImage(const Image& src, int radius) {
  if (radius == 0) return src;
  Image out(src.w, src.h);
  const int side = 2 * radius + 1;
  const int area = side * side;
  const int W = static_cast<int>(src.w);
  const int H = static_cast<int>(src.h);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      int sum[3] = {0, 0, 0};
      for (int dy = -radius; dy <= radius; ++dy) {
        const int yy = std::clamp(y + dy, 0, H - 1);
        for (int dx = -radius; dx <= radius; ++dx) {
          const int xx = std::clamp(x + dx, 0, W - 1);
          const std::uint8_t* p = src.rgb.data() + (static_cast<std::size_t>(yy) * W + xx) * 3;
          sum[0] += p[0];
          sum[1] += p[1];
          sum[2] += p[2];
        }
      }
      std::uint8_t* o = out.rgb.data() + (static_cast<std::size_t>(y) * W + x) * 3;
      for (int k = 0; k < 3; ++k) o[k] = static_cast<std::uint8_t>((sum[k] + area / 2) / area);
    }
  }
  return out;
}

// Texture large enough for a (vx, vy) pan over `frames` frames.
std::pair<std::uint32_t, std::uint32_t> PanTextureSize(const SynthParams& p,
                                                       std::size_t frames) {
  const auto travel = static_cast<std::uint32_t>(frames > 0 ? frames - 1 : 0);
  return {p.width + static_cast<std::uint32_t>(std::abs(p.vx)) * travel,
          p.height + static_cast<std::uint32_t>(std::abs(p.vy)) * travel};
}

// Frame t views the texture at origin + t * (vx, vy).
template <typename Remap>
void AppendPan(FrameBuffer& out, const Image& tex, int vx, int vy, std::size_t frames,
               std::size_t first_index, Remap remap) {
  const int travel = static_cast<int>(frames > 0 ? frames - 1 : 0);
  const int ox0 = vx < 0 ? -vx * travel : 0;
  const int oy0 = vy < 0 ? -vy * travel : 0;
  std::vector<std::uint8_t> raster(out.frame_bytes());
  for (std::size_t t = 0; t < frames; ++t) {
    const int ox = ox0 + vx * static_cast<int>(t);
    const int oy = oy0 + vy * static_cast<int>(t);
    for (std::uint32_t y = 0; y < out.height(); ++y) {
      const std::uint8_t* src =
          tex.rgb.data() + (static_cast<std::size_t>(oy + y) * tex.w + ox) * 3;
      std::copy(src, src + out.width() * 3, raster.data() + static_cast<std::size_t>(y) * out.width() * 3);
    }
    remap(raster, first_index + t);
    out.AppendFrame(raster);
  }
}

void NoRemap(std::vector<std::uint8_t>&, std::size_t) {}

}  // namespace

SynthClip Generate(SynthKind kind, const SynthParams& params, std::uint64_t seed,
                   std::uint64_t stream) {
  params.Validate(kind);
  SplitMix64 rng = SplitMix64::Stream(seed, stream);
  SynthClip out;
  out.frames = FrameBuffer(params.width, params.height);
  out.truth.kind = std::string(SynthKindName(kind));

  SynthParams p = params;
  if (kind == SynthKind::kStatic) p.vx = p.vy = 0;

  switch (kind) {
    case SynthKind::kStatic:
    case SynthKind::kPan:
    case SynthKind::kNoise:
    case SynthKind::kDull:
    case SynthKind::kBlurPair: {
      auto [tw, th] = PanTextureSize(p, p.frames);
      Image tex = kind == SynthKind::kNoise ? NoiseTexture(rng, tw, th)
                  : kind == SynthKind::kDull ? DullTexture(rng, tw, th)
                                             : ColorfulTexture(rng, tw, th);
      if (kind == SynthKind::kBlurPair) {
        tex = BlurImage(tex, p.blur_radius);
        out.truth.blur_radius = p.blur_radius;
      }
      AppendPan(out.frames, tex, p.vx, p.vy, p.frames, 0, NoRemap);
      out.truth.displacement = std::make_pair(p.vx, p.vy);
      break;
    }
    case SynthKind::kFlicker: {
      auto [tw, th] = PanTextureSize(p, p.frames);
      Image tex = FlickerParamTexture(rng, tw, th);
      AppendPan(out.frames, tex, p.vx, p.vy, p.frames, 0,
                [](std::vector<std::uint8_t>& raster, std::size_t t) {
                  for (std::size_t i = 0; i < raster.size(); i += 3) {
                    if (t % 2 == 0) {
                      raster[i] = static_cast<std::uint8_t>(raster[i] + 128);
                    } else {
                      raster[i + 1] = static_cast<std::uint8_t>(raster[i + 1] + kFlickerGreenShift);
                    }
                  }
                });
      out.truth.displacement = std::make_pair(p.vx, p.vy);
      out.truth.defect = true;
      break;
    }
    case SynthKind::kMultiScene: {
      int corner = rng.Uniform(0, 7);
      std::size_t start = 0;
      for (std::size_t s = 0; s < p.scene_lengths.size(); ++s) {
        if (s > 0) {
          // Any other corner differs by 128 in at least one channel.
          corner = (corner + rng.Uniform(1, 7)) % 8;
          out.truth.boundaries.push_back(start);
        }
        const std::size_t len = p.scene_lengths[s];
        SynthParams sp = p;
        sp.vx = s % 2 ? -p.vx : p.vx;
        sp.vy = s % 2 ? -p.vy : p.vy;
        auto [tw, th] = PanTextureSize(sp, len);
        Image tex = AnchorTexture(rng, tw, th, corner);
        AppendPan(out.frames, tex, sp.vx, sp.vy, len, start, NoRemap);
        start += len;
      }
      break;
    }
  }

  out.clip.clip_id = params.clip_id;
  out.clip.source = params.clip_id + ".rfv1";
  out.clip.width = params.width;
  out.clip.height = params.height;
  out.clip.frame_count = static_cast<std::uint32_t>(out.frames.frame_count());
  out.clip.fps = static_cast<double>(params.fps);
  return out;
}

namespace {

// Fixed order: the index is part of each clip's stream id.
const std::vector<std::string>& ClassTable() {
  static const std::vector<std::string> table = {
      "good", "static", "flicker", "pan_fast", "blur", "dull", "pan", "noise", "multi_scene"};
  return table;
}

std::pair<int, int> AxisVelocity(SplitMix64& rng, int speed) {
  switch (rng.Uniform(0, 3)) {
    case 0: return {speed, 0};
    case 1: return {-speed, 0};
    case 2: return {0, speed};
    default: return {0, -speed};
  }
}

char ToHexDigitPadding(std::size_t) { return '0'; }

std::string ClassClipId(const std::string& klass, std::size_t k) {
  std::string n = std::to_string(k);
  while (n.size() < 3) n.insert(n.begin(), ToHexDigitPadding(k));
  return klass + "_" + n;
}

}  // namespace

std::vector<std::string> CorpusClasses() { return ClassTable(); }

SynthClip GenerateClass(const std::string& klass, std::size_t k, std::uint64_t seed,
                        std::uint32_t width, std::uint32_t height, std::uint32_t frames) {
  const auto& table = ClassTable();
  auto it = std::find(table.begin(), table.end(), klass);
  if (it == table.end()) throw Error(ErrorKind::kConfig, "unknown corpus class '" + klass + "'");
  const std::uint64_t class_index = static_cast<std::uint64_t>(it - table.begin());
  const std::uint64_t stream = (class_index << 32) | k;
  // Parameters come from a side stream so they never shift texture draws.
  SplitMix64 prng = SplitMix64::Stream(seed ^ 0x5bd1e995ull, stream);

  SynthParams p;
  p.width = width;
  p.height = height;
  p.frames = frames;
  p.clip_id = ClassClipId(klass, k);
  SynthKind kind = SynthKind::kPan;
  std::string rejecting;
  bool defect = true;

  if (klass == "good") {
    std::tie(p.vx, p.vy) = AxisVelocity(prng, 2);
    defect = false;
  } else if (klass == "static") {
    kind = SynthKind::kStatic;
    rejecting = "S_T";
  } else if (klass == "flicker") {
    kind = SynthKind::kFlicker;
    std::tie(p.vx, p.vy) = AxisVelocity(prng, 2);
    rejecting = "S_T";
  } else if (klass == "pan_fast") {
    p.vx = prng.Uniform(0, 1) ? 6 : -6;
    p.vy = prng.Uniform(0, 1) ? 6 : -6;
    rejecting = "S_M";
  } else if (klass == "blur") {
    kind = SynthKind::kBlurPair;
    std::tie(p.vx, p.vy) = AxisVelocity(prng, 2);
    rejecting = "S";
  } else if (klass == "dull") {
    kind = SynthKind::kDull;
    std::tie(p.vx, p.vy) = AxisVelocity(prng, 2);
    rejecting = "S_A";
  } else if (klass == "pan") {
    p.vx = prng.Uniform(-4, 4);
    p.vy = prng.Uniform(-4, 4);
    defect = false;
  } else if (klass == "noise") {
    kind = SynthKind::kNoise;
    p.vx = 3;
    p.vy = 4;
    defect = false;
  } else {  // multi_scene
    kind = SynthKind::kMultiScene;
    const int scenes = prng.Uniform(2, 5);
    for (int s = 0; s < scenes; ++s) {
      p.scene_lengths.push_back(static_cast<std::size_t>(prng.Uniform(36, 64)));
    }
    p.vx = prng.Uniform(-2, 2);
    p.vy = prng.Uniform(-2, 2);
    defect = false;
  }

  SynthClip clip = Generate(kind, p, seed, stream);
  clip.truth.kind = klass;
  clip.truth.defect = defect;
  clip.truth.rejecting_stage = rejecting;
  return clip;
}

CorpusSpec CorpusSpec::FromJson(const Json& j) {
  if (!j.is_object()) throw Error(ErrorKind::kConfig, "corpus spec must be a JSON object");
  CorpusSpec spec;
  const auto& table = ClassTable();
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& key = it.key();
    try {
      if (key == "width") {
        spec.width = it->get<std::uint32_t>();
      } else if (key == "height") {
        spec.height = it->get<std::uint32_t>();
      } else if (key == "frames") {
        spec.frames = it->get<std::uint32_t>();
      } else if (std::find(table.begin(), table.end(), key) != table.end()) {
        spec.counts[key] = it->get<std::size_t>();
      } else {
        throw Error(ErrorKind::kConfig, "unknown corpus class '" + key + "'");
      }
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::kConfig, "corpus spec field '" + key + "': " + e.what());
    }
  }
  std::size_t total = 0;
  for (const auto& [k, n] : spec.counts) total += n;
  if (total < 1) throw Error(ErrorKind::kConfig, "corpus spec has no clips");
  return spec;
}

std::vector<LabelEntry> GenerateCorpus(const CorpusSpec& spec, std::uint64_t seed,
                                       const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
  std::vector<LabelEntry> labels;
  for (const auto& klass : ClassTable()) {
    auto it = spec.counts.find(klass);
    if (it == spec.counts.end()) continue;
    for (std::size_t k = 0; k < it->second; ++k) {
      SynthClip c = GenerateClass(klass, k, seed, spec.width, spec.height, spec.frames);
      WriteRfv1File(dir / (c.clip.clip_id + ".rfv1"), c.frames,
                    static_cast<float>(c.clip.fps));
      labels.push_back({c.clip.clip_id, c.truth});
    }
  }
  std::sort(labels.begin(), labels.end(),
            [](const auto& a, const auto& b) { return a.clip_id < b.clip_id; });
  std::ofstream out(dir / "labels.jsonl", std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write labels in " + dir.string());
  for (const auto& l : labels) {
    Json line = {{"clip_id", l.clip_id}, {"kind", l.truth.kind}, {"ground_truth", l.truth.ToJson()}};
    out << line.dump() << '\n';
  }
  if (!out) throw Error(ErrorKind::kIo, "write failed for labels in " + dir.string());
  return labels;
}

std::vector<LabelEntry> LoadLabels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open " + path.string());
  std::vector<LabelEntry> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      Json j = Json::parse(line);
      out.push_back({j.at("clip_id").get<std::string>(), GroundTruth::FromJson(j.at("ground_truth"))});
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::kParse, path.string() + " line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

FrameBuffer BoxBlur(const FrameBuffer& frames, int radius) {
  FrameBuffer out(frames.width(), frames.height());
  for (std::size_t i = 0; i < frames.frame_count(); ++i) {
    Image img(frames.width(), frames.height());
    auto f = frames.frame(i);
    std::copy(f.begin(), f.end(), img.rgb.begin());
    out.AppendFrame(BlurImage(img, radius).rgb);
  }
  return out;
}

FrameBuffer Desaturate(const FrameBuffer& frames) {
  FrameBuffer out = frames;
  auto& d = out.mutable_data();
  for (std::size_t i = 0; i + 2 < d.size(); i += 3) {
    const int mean = (d[i] + d[i + 1] + d[i + 2] + 1) / 3;
    d[i] = d[i + 1] = d[i + 2] = static_cast<std::uint8_t>(mean);
  }
  return out;
}

}  // namespace vidcurate
