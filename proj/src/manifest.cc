#include "vidcurate/manifest.h"

#include <algorithm>
#include <chrono>
#include <tuple>

namespace vidcurate {

std::string_view EntryKindName(EntryKind kind) {
  switch (kind) {
    case EntryKind::kScore: return "score";
    case EntryKind::kVerdict: return "verdict";
    case EntryKind::kCut: return "cut";
    case EntryKind::kCaption: return "caption";
  }
  return "";
}

std::optional<EntryKind> ParseEntryKind(std::string_view name) {
  for (EntryKind k : {EntryKind::kScore, EntryKind::kVerdict, EntryKind::kCut,
                      EntryKind::kCaption}) {
    if (EntryKindName(k) == name) return k;
  }
  return std::nullopt;
}

ManifestEntry ManifestEntry::Score(Metric metric, const std::string& clip_id,
                                   const ScoreValue& score, Json extra) {
  ManifestEntry e;
  e.stage = std::string(MetricName(metric));
  e.kind = EntryKind::kScore;
  e.clip_id = clip_id;
  e.payload = extra.is_object() ? std::move(extra) : Json::object();
  e.payload["value"] = score.value;
  e.payload["scorer"] = score.scorer;
  if (!score.flags.empty()) e.payload["flags"] = score.flags;
  return e;
}

ManifestEntry ManifestEntry::Verdict(SetLabel label, const std::string& clip_id,
                                     bool keep, Json extra) {
  ManifestEntry e;
  e.stage = std::string(SetLabelName(label));
  e.kind = EntryKind::kVerdict;
  e.clip_id = clip_id;
  e.payload = extra.is_object() ? std::move(extra) : Json::object();
  e.payload["keep"] = keep;
  return e;
}

std::string ManifestEntry::ToLine() const {
  Json j = {{"stage", stage},
            {"kind", std::string(EntryKindName(kind))},
            {"clip_id", clip_id},
            {"payload", payload}};
  if (ts) j["ts"] = *ts;
  return j.dump(-1, ' ', false, Json::error_handler_t::replace);
}

ManifestEntry ManifestEntry::FromLine(const std::string& line,
                                      std::size_t line_no) {
  auto fail = [&](const std::string& why) -> Error {
    return Error(ErrorKind::kParse,
                 "manifest line " + std::to_string(line_no) + ": " + why);
  };
  Json j;
  try {
    j = Json::parse(line);
  } catch (const Json::parse_error& e) {
    throw fail(e.what());
  }
  if (!j.is_object()) throw fail("not a JSON object");
  for (const char* key : {"stage", "kind", "clip_id"}) {
    if (!j.contains(key) || !j[key].is_string()) {
      throw fail(std::string("missing string field '") + key + "'");
    }
  }
  if (!j.contains("payload") || !j["payload"].is_object()) {
    throw fail("missing object field 'payload'");
  }
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& k = it.key();
    if (k != "stage" && k != "kind" && k != "clip_id" && k != "payload" &&
        k != "ts") {
      throw fail("unknown field '" + k + "'");
    }
  }
  ManifestEntry e;
  e.stage = j["stage"].get<std::string>();
  auto kind = ParseEntryKind(j["kind"].get<std::string>());
  if (!kind) throw fail("unknown kind '" + j["kind"].get<std::string>() + "'");
  e.kind = *kind;
  e.clip_id = j["clip_id"].get<std::string>();
  if (e.clip_id.empty()) throw fail("empty clip_id");
  e.payload = j["payload"];
  if (j.contains("ts")) {
    if (!j["ts"].is_number_integer()) throw fail("ts must be an integer");
    e.ts = j["ts"].get<std::int64_t>();
  }
  if (e.kind == EntryKind::kScore &&
      (!e.payload.contains("value") || !e.payload["value"].is_number())) {
    throw fail("score entry without numeric value");
  }
  if (e.kind == EntryKind::kVerdict &&
      (!e.payload.contains("keep") || !e.payload["keep"].is_boolean())) {
    throw fail("verdict entry without boolean keep");
  }
  return e;
}

Manifest Manifest::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, "cannot open manifest " + path.string());
  return Parse(in);
}

Manifest Manifest::Parse(std::istream& in) {
  Manifest m;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    m.entries_.push_back(ManifestEntry::FromLine(line, line_no));
  }
  return m;
}

void Manifest::Save(const std::filesystem::path& path) const {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::kIo, "cannot write manifest " + path.string());
  for (const auto& e : entries_) out << e.ToLine() << '\n';
  if (!out) throw Error(ErrorKind::kIo, "write failed for " + path.string());
}

void Manifest::Canonicalize() {
  for (auto& e : entries_) e.ts.reset();
  // The serialized line breaks ties between entries sharing the key.
  std::vector<std::pair<std::string, ManifestEntry>> keyed;
  keyed.reserve(entries_.size());
  for (auto& e : entries_) {
    std::string line = e.ToLine();
    keyed.emplace_back(std::move(line), std::move(e));
  }
  std::sort(keyed.begin(), keyed.end(), [](const auto& a, const auto& b) {
    const auto& x = a.second;
    const auto& y = b.second;
    return std::forward_as_tuple(x.stage, x.clip_id, EntryKindName(x.kind), a.first) <
           std::forward_as_tuple(y.stage, y.clip_id, EntryKindName(y.kind), b.first);
  });
  entries_.clear();
  for (auto& [line, e] : keyed) entries_.push_back(std::move(e));
}

void Manifest::Extend(const Manifest& other) {
  entries_.insert(entries_.end(), other.entries_.begin(), other.entries_.end());
}

ManifestWriter::ManifestWriter(const std::filesystem::path& live_path,
                               bool append) {
  if (live_path.has_parent_path()) {
    std::filesystem::create_directories(live_path.parent_path());
  }
  out_.open(live_path, std::ios::binary |
                           (append ? std::ios::app : std::ios::trunc));
  if (!out_) throw Error(ErrorKind::kIo, "cannot open " + live_path.string());
}

void ManifestWriter::Append(ManifestEntry entry) {
  if (!entry.ts) {
    entry.ts = std::chrono::duration_cast<std::chrono::milliseconds>(
                   std::chrono::system_clock::now().time_since_epoch())
                   .count();
  }
  std::lock_guard<std::mutex> lock(mu_);
  if (out_.is_open()) {
    out_ << entry.ToLine() << '\n';
    out_.flush();
  }
  entries_.push_back(std::move(entry));
}

Manifest ManifestWriter::Snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  return Manifest(entries_);
}

Manifest ManifestWriter::Finalize(const std::filesystem::path& path) const {
  Manifest m = Snapshot();
  m.Canonicalize();
  if (!path.empty()) m.Save(path);
  return m;
}

ScoreTable ExtractScores(const Manifest& manifest) {
  ScoreTable table;
  for (const auto& e : manifest.entries()) {
    if (e.kind != EntryKind::kScore) continue;
    auto metric = ParseMetric(e.stage);
    if (!metric) {
      throw Error(ErrorKind::kParse, "score entry for unknown metric " + e.stage);
    }
    ScoreValue v;
    v.value = e.payload.at("value").get<double>();
    v.scorer = e.payload.value("scorer", std::string("reference"));
    if (e.payload.contains("flags")) {
      v.flags = e.payload["flags"].get<std::vector<std::string>>();
    }
    auto [it, inserted] = table[*metric].emplace(e.clip_id, std::move(v));
    if (!inserted) {
      throw Error(ErrorKind::kIntegrity, "duplicate " + e.stage +
                                             " score for clip " + e.clip_id);
    }
  }
  return table;
}

std::vector<CaptionRecord> ExtractCaptions(const Manifest& manifest) {
  std::vector<CaptionRecord> out;
  for (const auto& e : manifest.entries()) {
    if (e.kind != EntryKind::kCaption || !e.payload.contains("text")) continue;
    CaptionRecord c;
    c.clip_id = e.clip_id;
    c.text = e.payload["text"].get<std::string>();
    c.word_count = e.payload.value("word_count", CountWords(c.text));
    c.provider = e.payload.value("provider", std::string("none"));
    c.attempts = e.payload.value("attempts", 1);
    out.push_back(std::move(c));
  }
  std::sort(out.begin(), out.end(),
            [](const auto& a, const auto& b) { return a.clip_id < b.clip_id; });
  return out;
}

SelectionLedger ReplayManifest(const Manifest& manifest) {
  std::map<SetLabel, std::map<std::string, bool>> verdicts;
  std::set<std::pair<std::string, std::string>> seen_scores;
  for (const auto& e : manifest.entries()) {
    if (e.kind == EntryKind::kScore) {
      if (!seen_scores.emplace(e.stage, e.clip_id).second) {
        throw Error(ErrorKind::kIntegrity, "duplicate " + e.stage +
                                               " score for clip " + e.clip_id);
      }
      continue;
    }
    if (e.kind != EntryKind::kVerdict) continue;
    auto label = ParseSetLabel(e.stage);
    if (!label) throw Error(ErrorKind::kParse, "verdict for unknown set " + e.stage);
    const bool keep = e.payload.at("keep").get<bool>();
    auto [it, inserted] = verdicts[*label].emplace(e.clip_id, keep);
    if (!inserted && it->second != keep) {
      throw Error(ErrorKind::kIntegrity, "conflicting " + e.stage +
                                             " verdicts for clip " + e.clip_id);
    }
  }

  SelectionLedger ledger;
  for (const auto& [label, members] : verdicts) {
    for (const auto& [id, keep] : members) {
      if (keep) ledger[label].insert(id);
    }
  }

  auto derive = [&](SetLabel target, std::initializer_list<SetLabel> parts) {
    for (SetLabel p : parts) {
      if (!verdicts.count(p)) return;
    }
    ClipSet derived;
    auto first = parts.begin();
    for (const auto& id : ledger[*first]) {
      bool all = true;
      for (auto p = first + 1; p != parts.end(); ++p) all = all && ledger[*p].count(id);
      if (all) derived.insert(id);
    }
    if (verdicts.count(target) && derived != ledger[target]) {
      throw Error(ErrorKind::kIntegrity,
                  std::string(SetLabelName(target)) +
                      " verdicts disagree with the intersection of its components");
    }
    ledger[target] = std::move(derived);
  };
  derive(SetLabel::kIntersection,
         {SetLabel::kAesthetics, SetLabel::kTemporal, SetLabel::kMotion});
  derive(SetLabel::kLite, {SetLabel::kAestheticsLite, SetLabel::kMotionLite});
  return ledger;
}

std::map<std::string, std::string> ExtractParents(const Manifest& manifest) {
  std::map<std::string, std::string> parents;
  for (const auto& e : manifest.entries()) {
    if (e.kind == EntryKind::kVerdict && e.stage == SetLabelName(SetLabel::kExtracted) &&
        e.payload.contains("parent_id")) {
      parents[e.clip_id] = e.payload["parent_id"].get<std::string>();
    }
  }
  return parents;
}

}  // namespace vidcurate
