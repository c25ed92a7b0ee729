// Domain types shared by every curation stage.

#ifndef VIDCURATE_CORE_H_
#define VIDCURATE_CORE_H_

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace vidcurate {

using Json = nlohmann::json;

enum class ErrorKind {
  kFormat,
  kIntegrity,
  kParse,
  kConfig,
  kDecoder,
  kScorer,
  kProtocol,
  kTimeout,
  kIo,
  kUsage,
  kEmptyInput,
  kInsufficientFrames,
  kDegenerateInput,
  kCaption,
  kPipeline,
};

const char* ErrorKindName(ErrorKind kind);

// All engine failures surface as this exception; `kind()` lets callers
// (the pipeline's skip/abort policy, the CLI exit path) branch on category.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message);

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

// Identity and geometry of one clip. Sub-clips produced by cut extraction
// carry their parent's id.
struct ClipRecord {
  std::string clip_id;
  std::string source;
  std::uint32_t width = 0;
  std::uint32_t height = 0;
  std::uint32_t frame_count = 0;
  double fps = 0.0;
  std::optional<std::string> parent_id;

  // Throws kIntegrity when a geometric invariant is violated.
  void Validate() const;

  Json ToJson() const;
  static ClipRecord FromJson(const Json& j);

  bool operator==(const ClipRecord&) const = default;
};

std::string SubClipId(std::string_view parent_id, std::size_t scene_index);

enum class Metric { kAesthetics = 0, kTemporalConsistency, kMotion, kClarity };

inline constexpr std::array<Metric, 4> kAllMetrics = {
    Metric::kAesthetics, Metric::kTemporalConsistency, Metric::kMotion,
    Metric::kClarity};

std::string_view MetricName(Metric metric);
std::optional<Metric> ParseMetric(std::string_view name);

// A single score together with the scorer that produced it.
struct ScoreValue {
  double value = 0.0;
  std::string scorer;               // "reference" or "sidecar:<identity>"
  std::vector<std::string> flags;   // e.g. "degenerate", "saturated"

  bool operator==(const ScoreValue&) const = default;
};

struct ScoreRecord {
  std::string clip_id;
  std::array<std::optional<ScoreValue>, 4> scores;

  std::optional<ScoreValue>& operator[](Metric m) {
    return scores[static_cast<std::size_t>(m)];
  }
  const std::optional<ScoreValue>& operator[](Metric m) const {
    return scores[static_cast<std::size_t>(m)];
  }
};

// Clip ids are kept in std::set so iteration is lexicographic by construction.
using ClipSet = std::set<std::string>;

enum class SetLabel {
  kAesthetics = 0,  // S_A
  kTemporal,        // S_T
  kMotion,          // S_M
  kIntersection,    // S_I
  kClear,           // S
  kExtracted,       // S_tilde
  kAestheticsLite,  // S_A_prime
  kMotionLite,      // S_M_prime
  kLite,            // S_prime
};

inline constexpr std::array<SetLabel, 9> kAllSetLabels = {
    SetLabel::kAesthetics,     SetLabel::kTemporal,   SetLabel::kMotion,
    SetLabel::kIntersection,   SetLabel::kClear,      SetLabel::kExtracted,
    SetLabel::kAestheticsLite, SetLabel::kMotionLite, SetLabel::kLite};

std::string_view SetLabelName(SetLabel label);
std::optional<SetLabel> ParseSetLabel(std::string_view name);

class SelectionLedger {
 public:
  ClipSet& operator[](SetLabel label) {
    return sets_[static_cast<std::size_t>(label)];
  }
  const ClipSet& operator[](SetLabel label) const {
    return sets_[static_cast<std::size_t>(label)];
  }

  bool empty() const;

  // Checks the subset chain (S ⊆ S_I ⊆ S_A, S_T, S_M; S_prime ⊆ S_A_prime,
  // S_M_prime). Extracted members are checked against `parents`, which maps
  // sub-clip id to parent id. Throws kIntegrity naming the first violation.
  void CheckInvariants(
      const std::map<std::string, std::string>& parents = {}) const;

  // {"S_A":[...], ...} with every label present, members sorted.
  Json ToJson() const;
  static SelectionLedger FromJson(const Json& j);

  bool operator==(const SelectionLedger&) const = default;

 private:
  std::array<ClipSet, 9> sets_;
};

// Selection rule over one score population.
struct BandPolicy {
  enum class Mode { kTopFraction, kPercentileBand, kAbsolute };

  Mode mode = Mode::kTopFraction;
  double fraction = 1.0;  // kTopFraction, in (0, 1]
  double p_lo = 0.0;      // kPercentileBand, in [0, 100]
  double p_hi = 100.0;
  double lo = 0.0;        // kAbsolute: keep lo <= score <= hi
  double hi = 0.0;

  static BandPolicy TopFraction(double fraction);
  static BandPolicy PercentileBand(double p_lo, double p_hi);
  static BandPolicy Absolute(double lo, double hi);

  // Throws kConfig for out-of-range parameters.
  void Validate() const;
  std::string Describe() const;

  Json ToJson() const;
  // Accepts {"mode":"top_fraction","fraction":f} etc. Unknown keys rejected.
  static BandPolicy FromJson(const Json& j);

  bool operator==(const BandPolicy&) const = default;
};

struct CaptionRecord {
  std::string clip_id;
  std::string text;
  std::size_t word_count = 0;
  std::string provider = "none";
  int attempts = 0;
};

// Number of whitespace-delimited tokens.
std::size_t CountWords(std::string_view text);

}  // namespace vidcurate

#endif  // VIDCURATE_CORE_H_
