#include "vidcurate/core.h"

#include <cctype>
#include <cmath>
#include <sstream>

namespace vidcurate {

const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kIntegrity: return "integrity error";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kConfig: return "config error";
    case ErrorKind::kDecoder: return "decoder error";
    case ErrorKind::kScorer: return "scorer error";
    case ErrorKind::kProtocol: return "protocol error";
    case ErrorKind::kTimeout: return "timeout";
    case ErrorKind::kIo: return "I/O error";
    case ErrorKind::kUsage: return "usage error";
    case ErrorKind::kEmptyInput: return "empty input";
    case ErrorKind::kInsufficientFrames: return "insufficient frames";
    case ErrorKind::kDegenerateInput: return "degenerate input";
    case ErrorKind::kCaption: return "caption error";
    case ErrorKind::kPipeline: return "pipeline error";
  }
  return "error";
}

Error::Error(ErrorKind kind, const std::string& message)
    : std::runtime_error(std::string(ErrorKindName(kind)) + ": " + message),
      kind_(kind) {}

void ClipRecord::Validate() const {
  if (clip_id.empty()) throw Error(ErrorKind::kIntegrity, "empty clip_id");
  if (width < 1 || height < 1) {
    throw Error(ErrorKind::kIntegrity,
                "clip " + clip_id + " has zero width or height");
  }
  if (frame_count < 1) {
    throw Error(ErrorKind::kIntegrity, "clip " + clip_id + " has no frames");
  }
  if (!(fps > 0.0) || !std::isfinite(fps)) {
    throw Error(ErrorKind::kIntegrity,
                "clip " + clip_id + " has non-positive fps");
  }
}

Json ClipRecord::ToJson() const {
  Json j = {{"clip_id", clip_id},         {"source", source},
            {"width", width},             {"height", height},
            {"frame_count", frame_count}, {"fps", fps}};
  if (parent_id) j["parent_id"] = *parent_id;
  return j;
}

ClipRecord ClipRecord::FromJson(const Json& j) {
  ClipRecord c;
  c.clip_id = j.at("clip_id").get<std::string>();
  c.source = j.value("source", std::string());
  c.width = j.at("width").get<std::uint32_t>();
  c.height = j.at("height").get<std::uint32_t>();
  c.frame_count = j.at("frame_count").get<std::uint32_t>();
  c.fps = j.at("fps").get<double>();
  if (j.contains("parent_id")) c.parent_id = j["parent_id"].get<std::string>();
  return c;
}

std::string SubClipId(std::string_view parent_id, std::size_t scene_index) {
  return std::string(parent_id) + "#" + std::to_string(scene_index);
}

std::string_view MetricName(Metric metric) {
  switch (metric) {
    case Metric::kAesthetics: return "aesthetics";
    case Metric::kTemporalConsistency: return "temporal_consistency";
    case Metric::kMotion: return "motion";
    case Metric::kClarity: return "clarity";
  }
  return "";
}

std::optional<Metric> ParseMetric(std::string_view name) {
  for (Metric m : kAllMetrics) {
    if (MetricName(m) == name) return m;
  }
  if (name == "temporal") return Metric::kTemporalConsistency;
  return std::nullopt;
}

std::string_view SetLabelName(SetLabel label) {
  switch (label) {
    case SetLabel::kAesthetics: return "S_A";
    case SetLabel::kTemporal: return "S_T";
    case SetLabel::kMotion: return "S_M";
    case SetLabel::kIntersection: return "S_I";
    case SetLabel::kClear: return "S";
    case SetLabel::kExtracted: return "S_tilde";
    case SetLabel::kAestheticsLite: return "S_A_prime";
    case SetLabel::kMotionLite: return "S_M_prime";
    case SetLabel::kLite: return "S_prime";
  }
  return "";
}

std::optional<SetLabel> ParseSetLabel(std::string_view name) {
  for (SetLabel l : kAllSetLabels) {
    if (SetLabelName(l) == name) return l;
  }
  return std::nullopt;
}

bool SelectionLedger::empty() const {
  for (const auto& s : sets_) {
    if (!s.empty()) return false;
  }
  return true;
}

namespace {

void RequireSubset(const SelectionLedger& ledger, SetLabel inner,
                   SetLabel outer) {
  for (const auto& id : ledger[inner]) {
    if (!ledger[outer].count(id)) {
      throw Error(ErrorKind::kIntegrity,
                  std::string(SetLabelName(inner)) + " member " + id +
                      " missing from " + std::string(SetLabelName(outer)));
    }
  }
}

}  // namespace

void SelectionLedger::CheckInvariants(
    const std::map<std::string, std::string>& parents) const {
  RequireSubset(*this, SetLabel::kIntersection, SetLabel::kAesthetics);
  RequireSubset(*this, SetLabel::kIntersection, SetLabel::kTemporal);
  RequireSubset(*this, SetLabel::kIntersection, SetLabel::kMotion);
  RequireSubset(*this, SetLabel::kClear, SetLabel::kIntersection);
  RequireSubset(*this, SetLabel::kLite, SetLabel::kAestheticsLite);
  RequireSubset(*this, SetLabel::kLite, SetLabel::kMotionLite);

  // Extraction runs over S (full) or S_prime (lite).
  const ClipSet& base = (*this)[SetLabel::kClear].empty()
                            ? (*this)[SetLabel::kLite]
                            : (*this)[SetLabel::kClear];
  for (const auto& id : (*this)[SetLabel::kExtracted]) {
    if (base.count(id)) continue;
    auto it = parents.find(id);
    if (it != parents.end() && base.count(it->second)) continue;
    throw Error(ErrorKind::kIntegrity,
                "S_tilde member " + id + " has no selected parent");
  }
}

Json SelectionLedger::ToJson() const {
  Json j = Json::object();
  for (SetLabel l : kAllSetLabels) {
    j[std::string(SetLabelName(l))] = Json::array();
    for (const auto& id : (*this)[l]) j[std::string(SetLabelName(l))].push_back(id);
  }
  return j;
}

SelectionLedger SelectionLedger::FromJson(const Json& j) {
  SelectionLedger ledger;
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto label = ParseSetLabel(it.key());
    if (!label) {
      throw Error(ErrorKind::kParse, "unknown ledger set " + it.key());
    }
    for (const auto& id : it.value()) ledger[*label].insert(id.get<std::string>());
  }
  return ledger;
}

BandPolicy BandPolicy::TopFraction(double fraction) {
  BandPolicy p;
  p.mode = Mode::kTopFraction;
  p.fraction = fraction;
  p.Validate();
  return p;
}

BandPolicy BandPolicy::PercentileBand(double p_lo, double p_hi) {
  BandPolicy p;
  p.mode = Mode::kPercentileBand;
  p.p_lo = p_lo;
  p.p_hi = p_hi;
  p.Validate();
  return p;
}

BandPolicy BandPolicy::Absolute(double lo, double hi) {
  BandPolicy p;
  p.mode = Mode::kAbsolute;
  p.lo = lo;
  p.hi = hi;
  p.Validate();
  return p;
}

void BandPolicy::Validate() const {
  switch (mode) {
    case Mode::kTopFraction:
      if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw Error(ErrorKind::kConfig, "top_fraction must lie in (0,1]");
      }
      break;
    case Mode::kPercentileBand:
      if (!(p_lo >= 0.0 && p_hi <= 100.0 && p_lo <= p_hi)) {
        throw Error(ErrorKind::kConfig,
                    "percentile band requires 0 <= p_lo <= p_hi <= 100");
      }
      break;
    case Mode::kAbsolute:
      if (!(lo <= hi)) {
        throw Error(ErrorKind::kConfig, "absolute band requires lo <= hi");
      }
      break;
  }
}

std::string BandPolicy::Describe() const {
  std::ostringstream os;
  switch (mode) {
    case Mode::kTopFraction: os << "top_fraction(" << fraction << ")"; break;
    case Mode::kPercentileBand:
      os << "percentile_band(" << p_lo << "," << p_hi << ")";
      break;
    case Mode::kAbsolute: os << "absolute(" << lo << "," << hi << ")"; break;
  }
  return os.str();
}

Json BandPolicy::ToJson() const {
  switch (mode) {
    case Mode::kTopFraction:
      return {{"mode", "top_fraction"}, {"fraction", fraction}};
    case Mode::kPercentileBand:
      return {{"mode", "percentile_band"}, {"p_lo", p_lo}, {"p_hi", p_hi}};
    case Mode::kAbsolute:
      return {{"mode", "absolute"}, {"lo", lo}, {"hi", hi}};
  }
  return {};
}

BandPolicy BandPolicy::FromJson(const Json& j) {
  if (!j.is_object()) throw Error(ErrorKind::kConfig, "band policy must be an object");
  const std::string mode = j.value("mode", std::string());
  auto allow = [&](std::initializer_list<const char*> keys) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      bool ok = it.key() == "mode";
      for (const char* k : keys) ok = ok || it.key() == k;
      if (!ok) {
        throw Error(ErrorKind::kConfig,
                    "unknown field '" + it.key() + "' in " + mode + " policy");
      }
    }
  };
  try {
    if (mode == "top_fraction") {
      allow({"fraction"});
      return TopFraction(j.at("fraction").get<double>());
    }
    if (mode == "percentile_band") {
      allow({"p_lo", "p_hi"});
      return PercentileBand(j.at("p_lo").get<double>(), j.at("p_hi").get<double>());
    }
    if (mode == "absolute") {
      allow({"lo", "hi"});
      return Absolute(j.at("lo").get<double>(), j.at("hi").get<double>());
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorKind::kConfig, std::string("band policy: ") + e.what());
  }
  throw Error(ErrorKind::kConfig, "unknown band policy mode '" + mode + "'");
}

std::size_t CountWords(std::string_view text) {
  std::size_t count = 0;
  bool in_word = false;
  for (char ch : text) {
    const bool space = std::isspace(static_cast<unsigned char>(ch)) != 0;
    if (!space && !in_word) ++count;
    in_word = !space;
  }
  return count;
}

}  // namespace vidcurate
