#include "vidcurate/cutdetect.h"

#include <algorithm>
#include <cmath>
#include <cstdlib>

#include "vidcurate/scorers.h"

namespace vidcurate {

void CutConfig::Validate() const {
  if (!(theta_abs >= 0.0)) throw Error(ErrorKind::kConfig, "cut theta_abs must be >= 0");
  if (!(k >= 0.0)) throw Error(ErrorKind::kConfig, "cut k must be >= 0");
  if (min_scene_len < 1) throw Error(ErrorKind::kConfig, "min_scene_len must be >= 1");
  if (window < 1) throw Error(ErrorKind::kConfig, "cut window must be >= 1");
  if (strides.empty()) throw Error(ErrorKind::kConfig, "cut strides must be non-empty");
  for (std::size_t s : strides) {
    if (s < 1) throw Error(ErrorKind::kConfig, "cut strides must be >= 1");
  }
}

Json CutConfig::ToJson() const {
  return {{"theta_abs", theta_abs}, {"k", k},          {"min_scene_len", min_scene_len},
          {"window", window},       {"strides", strides}};
}

CutConfig CutConfig::FromJson(const Json& j) {
  CutConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& key = it.key();
    try {
      if (key == "theta_abs") {
        c.theta_abs = it->get<double>();
      } else if (key == "k") {
        c.k = it->get<double>();
      } else if (key == "min_scene_len") {
        c.min_scene_len = it->get<std::size_t>();
      } else if (key == "window") {
        c.window = it->get<std::size_t>();
      } else if (key == "strides") {
        c.strides = it->get<std::vector<std::size_t>>();
      } else {
        throw Error(ErrorKind::kConfig, "unknown field '" + key + "' in cut config");
      }
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::kConfig, "cut config field '" + key + "': " + e.what());
    }
  }
  c.Validate();
  return c;
}

CutFeatures ComputeCutFeatures(const FrameBuffer& frames) {
  CutFeatures f;
  const std::size_t n = frames.frame_count();
  f.hists.resize(n);
  f.lumas.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    FrameFeature ff = ComputeFrameFeature(frames.frame(i), frames.width(), frames.height());
    f.hists[i].assign(ff.hist.begin(), ff.hist.end());
    f.lumas[i] = ComputeLuma(frames.frame(i), frames.width(), frames.height()).pixels;
  }
  return f;
}

double ContentDistance(const CutFeatures& features, std::size_t a, std::size_t b) {
  const auto& ha = features.hists[a];
  const auto& hb = features.hists[b];
  double l1 = 0.0;
  for (std::size_t i = 0; i < ha.size(); ++i) l1 += std::abs(ha[i] - hb[i]);
  const auto& la = features.lumas[a];
  const auto& lb = features.lumas[b];
  std::uint64_t diff = 0;
  for (std::size_t i = 0; i < la.size(); ++i) {
    diff += static_cast<std::uint64_t>(std::abs(int(la[i]) - int(lb[i])));
  }
  const double mean_diff = static_cast<double>(diff) / static_cast<double>(la.size());
  return 0.5 * (l1 / 2.0) + 0.5 * (mean_diff / 255.0);
}

namespace {

double Median(std::vector<double> v) {
  const std::size_t n = v.size();
  std::sort(v.begin(), v.end());
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

CutList DetectCuts(const FrameBuffer& frames, const CutConfig& config,
                   const std::string& clip_id) {
  config.Validate();
  const std::size_t n = frames.frame_count();
  if (n < 2) {
    throw Error(ErrorKind::kInsufficientFrames,
                "cut detection needs at least 2 frames, got " + std::to_string(n));
  }
  const CutFeatures features = ComputeCutFeatures(frames);

  // d1[t] compares frames t-1 and t; d1[0] is unused.
  std::vector<double> d1(n, 0.0);
  for (std::size_t t = 1; t < n; ++t) d1[t] = ContentDistance(features, t - 1, t);

  std::vector<std::size_t> flags;
  for (std::size_t s : config.strides) {
    if (s >= n) continue;
    std::vector<double> d;  // d[i] compares frames i and i + s
    d.reserve(n - s);
    for (std::size_t t = s; t < n; ++t) {
      d.push_back(s == 1 ? d1[t] : ContentDistance(features, t - s, t));
    }
    const std::size_t half = config.window / 2;
    for (std::size_t i = 0; i < d.size(); ++i) {
      const std::size_t lo = i >= half ? i - half : 0;
      const std::size_t hi = std::min(d.size(), i + (config.window - half));
      const double med = Median(std::vector<double>(d.begin() + lo, d.begin() + hi));
      if (!(d[i] > config.theta_abs && d[i] > config.k * med)) continue;
      // The change lies somewhere in frames (t-s, t]; snap to the strongest
      // single-step change in that range.
      const std::size_t t = i + s;
      std::size_t best = t;
      for (std::size_t j = t - s + 1; j <= t; ++j) {
        if (d1[j] > d1[best] || (d1[j] == d1[best] && j < best)) best = j;
      }
      flags.push_back(best);
    }
  }
  std::sort(flags.begin(), flags.end());
  flags.erase(std::unique(flags.begin(), flags.end()), flags.end());

  CutList out;
  out.clip_id = clip_id;
  for (std::size_t f : flags) {
    if (!out.cuts.empty() && f - out.cuts.back() < config.min_scene_len) {
      if (d1[f] > d1[out.cuts.back()]) out.cuts.back() = f;
      continue;
    }
    out.cuts.push_back(f);
  }
  return out;
}

SplitResult Split(const ClipRecord& clip, const FrameBuffer& frames,
                  const CutList& cuts, std::size_t min_scene_len) {
  const std::size_t n = frames.frame_count();
  std::size_t prev = 0;
  for (std::size_t c : cuts.cuts) {
    if (c < 1 || c >= n || c <= prev) {
      throw Error(ErrorKind::kIntegrity,
                  "invalid cut list for clip " + clip.clip_id + " at frame " + std::to_string(c));
    }
    prev = c;
  }
  std::vector<std::size_t> bounds = {0};
  bounds.insert(bounds.end(), cuts.cuts.begin(), cuts.cuts.end());
  bounds.push_back(n);

  SplitResult out;
  for (std::size_t k = 0; k + 1 < bounds.size(); ++k) {
    const std::size_t start = bounds[k];
    const std::size_t len = bounds[k + 1] - start;
    const std::string id = SubClipId(clip.clip_id, k);
    // A clip without cuts is passed through whole regardless of length.
    if (len < min_scene_len && !cuts.cuts.empty()) {
      out.dropped.push_back({id, start, len});
      continue;
    }
    SubClip sub;
    sub.clip = clip;
    sub.clip.clip_id = id;
    sub.clip.parent_id = clip.clip_id;
    sub.clip.frame_count = static_cast<std::uint32_t>(len);
    sub.frames = frames.Slice(start, len);
    sub.start = start;
    out.kept.push_back(std::move(sub));
  }
  return out;
}

}  // namespace vidcurate
