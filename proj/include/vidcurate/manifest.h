// Line-delimited curation manifest: every score, verdict, cut and caption
// produced by a run, one JSON object per line.
//
// During a run entries are appended as they are produced (each carrying a
// wall-clock "ts"). Finalization sorts by (stage, clip_id, kind) and drops
// the timestamps, which makes finalized manifests byte-comparable.

#ifndef VIDCURATE_MANIFEST_H_
#define VIDCURATE_MANIFEST_H_

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vidcurate/core.h"

namespace vidcurate {

enum class EntryKind { kScore, kVerdict, kCut, kCaption };

std::string_view EntryKindName(EntryKind kind);
std::optional<EntryKind> ParseEntryKind(std::string_view name);

struct ManifestEntry {
  std::string stage;
  EntryKind kind = EntryKind::kScore;
  std::string clip_id;
  Json payload = Json::object();
  std::optional<std::int64_t> ts;  // milliseconds since epoch; live files only

  static ManifestEntry Score(Metric metric, const std::string& clip_id,
                             const ScoreValue& score, Json extra = {});
  static ManifestEntry Verdict(SetLabel label, const std::string& clip_id,
                               bool keep, Json extra = {});

  std::string ToLine() const;
  // Throws kParse naming `line_no` for malformed input.
  static ManifestEntry FromLine(const std::string& line, std::size_t line_no);
};

class Manifest {
 public:
  Manifest() = default;
  explicit Manifest(std::vector<ManifestEntry> entries)
      : entries_(std::move(entries)) {}

  static Manifest Load(const std::filesystem::path& path);
  static Manifest Parse(std::istream& in);

  // Writes entries in their current order.
  void Save(const std::filesystem::path& path) const;

  // Sort by (stage, clip_id, kind) and strip timestamps.
  void Canonicalize();

  void Append(ManifestEntry e) { entries_.push_back(std::move(e)); }
  void Extend(const Manifest& other);

  const std::vector<ManifestEntry>& entries() const { return entries_; }
  std::size_t size() const { return entries_.size(); }
  bool empty() const { return entries_.empty(); }

 private:
  std::vector<ManifestEntry> entries_;
};

// Single serializing writer shared by all workers. Each Append is written
// and flushed immediately so an interrupted run leaves a readable file.
class ManifestWriter {
 public:
  ManifestWriter() = default;  // in-memory only
  explicit ManifestWriter(const std::filesystem::path& live_path,
                          bool append = false);

  ManifestWriter(const ManifestWriter&) = delete;
  ManifestWriter& operator=(const ManifestWriter&) = delete;

  void Append(ManifestEntry entry);

  // Snapshot of everything appended so far, in arrival order.
  Manifest Snapshot() const;

  // Canonical manifest; written to `path` when non-empty.
  Manifest Finalize(const std::filesystem::path& path = {}) const;

 private:
  mutable std::mutex mu_;
  std::ofstream out_;
  std::vector<ManifestEntry> entries_;
};

// Scores per metric, keyed by clip id.
using ScoreTable = std::map<Metric, std::map<std::string, ScoreValue>>;

// Throws kIntegrity on a duplicate (metric, clip_id) score entry.
ScoreTable ExtractScores(const Manifest& manifest);

std::vector<CaptionRecord> ExtractCaptions(const Manifest& manifest);

// Rebuilds the SelectionLedger from verdict entries. S_I and S_prime are
// derived by intersection when their component verdicts are present;
// explicit intersection verdicts must agree with the derivation.
SelectionLedger ReplayManifest(const Manifest& manifest);

// Sub-clip id -> parent id, from S_tilde verdict payloads.
std::map<std::string, std::string> ExtractParents(const Manifest& manifest);

}  // namespace vidcurate

#endif  // VIDCURATE_MANIFEST_H_
