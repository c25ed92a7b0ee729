// Acceptance gate: one PASS/FAIL line per criterion. Tolerances are the
// constants below. Parallel efficiency only ever warns.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <thread>

#include "support.h"
#include "vidcurate/cutdetect.h"
#include "vidcurate/pipeline.h"
#include "vidcurate/process.h"
#include "vidcurate/scorers.h"
#include "vidcurate/selection.h"
#include "vidcurate/synth.h"

using namespace vidcurate;
using vidcurate::testing::CliPath;
using vidcurate::testing::ReadFile;
using vidcurate::testing::SourceDir;
using vidcurate::testing::TempDir;

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kSelectionSeconds = 1.0;
constexpr double kCutSeconds = 30.0;
constexpr double kPipelineSeconds = 60.0;
constexpr double kStaticTemporalTol = 1e-6;
constexpr double kPanMotionRelTol = 0.10;
constexpr std::size_t kCutFrameTol = 1;
constexpr double kParallelRatio = 0.5;
constexpr std::uint64_t kSeed = 42;

struct Outcome {
  bool pass = true;
  std::string detail;
};

double Seconds(Clock::time_point since) {
  return std::chrono::duration<double>(Clock::now() - since).count();
}

std::string Fmt(double v) {
  std::ostringstream s;
  s << v;
  return s.str();
}

std::string Id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "c%04zu", i);
  return buf;
}

// ---- oracles, written without the library's selection code ---------------

ClipSet OracleTop(const Population& p, double fraction) {
  std::vector<std::pair<double, std::string>> v;
  for (const auto& [id, s] : p) v.emplace_back(-s, id);
  std::sort(v.begin(), v.end());
  std::size_t k = static_cast<std::size_t>(fraction * static_cast<double>(p.size()) + 1e-9);
  k = std::max<std::size_t>(1, std::min(k, p.size()));
  ClipSet out;
  for (std::size_t i = 0; i < k; ++i) out.insert(v[i].second);
  return out;
}

ClipSet OracleBand(const Population& p, double lo, double hi) {
  const double n = static_cast<double>(p.size());
  ClipSet out;
  for (const auto& [id, s] : p) {
    double less = 0, equal = 0;
    for (const auto& [other, t] : p) {
      less += t < s;
      equal += t == s;
    }
    const double rank = less + (equal + 1.0) / 2.0;
    const double r = p.size() == 1 ? 50.0 : 100.0 * (rank - 1.0) / (n - 1.0);
    if (lo <= r && r <= hi) out.insert(id);
  }
  return out;
}

ClipSet OracleApply(const BandPolicy& b, const Population& p) {
  switch (b.mode) {
    case BandPolicy::Mode::kTopFraction: return OracleTop(p, b.fraction);
    case BandPolicy::Mode::kPercentileBand: return OracleBand(p, b.p_lo, b.p_hi);
    case BandPolicy::Mode::kAbsolute: {
      ClipSet out;
      for (const auto& [id, s] : p) {
        if (b.lo <= s && s <= b.hi) out.insert(id);
      }
      return out;
    }
  }
  return {};
}

// ---- criteria ------------------------------------------------------------

Outcome SelectionArithmetic() {
  SplitMix64 rng(kSeed);
  std::vector<double> values(1000);
  for (std::size_t i = 0; i < values.size(); ++i) values[i] = static_cast<double>(i);
  for (std::size_t i = values.size() - 1; i > 0; --i) {
    std::swap(values[i], values[rng.Next() % (i + 1)]);
  }
  Population p;
  for (std::size_t i = 0; i < values.size(); ++i) p[Id(i)] = values[i] * 0.001;

  Outcome o;
  const auto start = Clock::now();
  std::vector<std::pair<double, ClipSet>> results;
  for (double f : {0.20, 0.90, 0.30}) results.emplace_back(f, SelectTopFraction(p, f));
  const double elapsed = Seconds(start);
  for (const auto& [f, kept] : results) {
    const std::size_t want = static_cast<std::size_t>(std::lround(f * 1000));
    const bool ok = kept.size() == want && kept == OracleTop(p, f);
    o.pass &= ok;
    o.detail += "f=" + Fmt(f) + " kept " + std::to_string(kept.size()) + (ok ? "" : " MISMATCH") + "; ";
  }
  o.pass &= elapsed < kSelectionSeconds;
  o.detail += "runtime " + Fmt(elapsed) + " s";
  return o;
}

Outcome BandSelection() {
  SplitMix64 rng(kSeed + 1);
  Population p;
  // 1000 scores over 150 levels, so most clips share their score.
  for (std::size_t i = 0; i < 1000; ++i) p[Id(i)] = static_cast<double>(rng.Next() % 150) / 10.0;
  std::set<double> levels;
  for (const auto& [id, s] : p) levels.insert(s);
  const ClipSet got = SelectBand(p, 5, 95);
  const ClipSet want = OracleBand(p, 5, 95);
  Outcome o;
  o.pass = got == want;
  o.detail = "kept " + std::to_string(got.size()) + " of 1000 (" + std::to_string(levels.size()) +
             " distinct scores), oracle kept " + std::to_string(want.size());
  return o;
}

Outcome SetComposition(const fs::path& work) {
  GenerateCorpus(CorpusSpec::FromJson(Json::parse(
                     ReadFile(SourceDir() / "configs" / "planted100_spec.json"))),
                 kSeed, work / "corpus");
  Outcome o;
  for (const bool lite : {false, true}) {
    PipelineConfig c;
    if (lite) c.policy = PipelinePolicy::Lite();
    const RunResult r = RunPipeline(work / "corpus", c, work / (lite ? "lite" : "full"));
    const ScoreTable scores = ExtractScores(r.manifest);
    auto pop = [&](Metric m) { return PopulationFor(scores, m); };
    const auto& L = r.ledger;
    ClipSet universe;
    for (const auto& [id, s] : pop(Metric::kAesthetics)) universe.insert(id);

    if (!lite) {
      const ClipSet a = OracleApply(c.policy.aesthetics, pop(Metric::kAesthetics));
      const ClipSet t = OracleApply(*c.policy.temporal, pop(Metric::kTemporalConsistency));
      const ClipSet m = OracleApply(c.policy.motion, pop(Metric::kMotion));
      ClipSet si;
      for (const auto& id : universe) {
        if (a.count(id) && t.count(id) && m.count(id)) si.insert(id);
      }
      const bool ok = L[SetLabel::kAesthetics] == a && L[SetLabel::kTemporal] == t &&
                      L[SetLabel::kMotion] == m && L[SetLabel::kIntersection] == si;
      o.pass &= ok;
      o.detail += "S_I " + std::to_string(L[SetLabel::kIntersection].size()) + " vs predicate " +
                  std::to_string(si.size()) + (ok ? "" : " MISMATCH") + "; ";
    } else {
      const ClipSet a = OracleApply(c.policy.aesthetics, pop(Metric::kAesthetics));
      const ClipSet m = OracleApply(c.policy.motion, pop(Metric::kMotion));
      ClipSet sp;
      for (const auto& id : universe) {
        if (a.count(id) && m.count(id)) sp.insert(id);
      }
      const bool ok = L[SetLabel::kAestheticsLite] == a && L[SetLabel::kMotionLite] == m &&
                      L[SetLabel::kLite] == sp;
      o.pass &= ok;
      o.detail += "S_prime " + std::to_string(L[SetLabel::kLite].size()) + " vs predicate " +
                  std::to_string(sp.size()) + (ok ? "" : " MISMATCH");
    }
  }
  return o;
}

Outcome ScorerOracles() {
  Outcome o;
  const auto still = Generate(SynthKind::kStatic, {}, kSeed);
  const double tc = ScoreTemporalConsistency(still.frames).value;
  const double still_motion = ScoreMotion(still.frames).value;
  const bool tc_ok = std::abs(tc - 1.0) <= kStaticTemporalTol;
  const bool still_ok = still_motion == 0.0;

  SynthParams pan;
  pan.vx = 3;
  pan.vy = 4;
  const double motion = ScoreMotion(Generate(SynthKind::kNoise, pan, kSeed).frames).value;
  const bool pan_ok = std::abs(motion - 5.0) <= kPanMotionRelTol * 5.0;

  const double flat = ScoreClarity(vidcurate::testing::ConstantFrames(64, 64, 8, 90, 140, 200)).value;
  const bool flat_ok = flat == 0.0;

  const auto classes = CorpusClasses();
  std::size_t monotone = 0;
  for (std::size_t k = 0; k < 100; ++k) {
    const auto clip = GenerateClass(classes[k % classes.size()], k / classes.size(), kSeed);
    const auto blurred = BoxBlur(clip.frames, 4);  // 9x9 box
    const bool ok = ScoreClarity(blurred).value <= ScoreClarity(clip.frames).value &&
                    ScoreAesthetics(blurred).value <= ScoreAesthetics(clip.frames).value;
    monotone += ok;
  }
  o.pass = tc_ok && still_ok && pan_ok && flat_ok && monotone == 100;
  o.detail = "static TC " + Fmt(tc) + ", static motion " + Fmt(still_motion) + ", pan(3,4) motion " +
             Fmt(motion) + ", constant clarity " + Fmt(flat) + ", blur monotone " +
             std::to_string(monotone) + "/100";
  return o;
}

Outcome CutDetection() {
  Outcome o;
  const auto start = Clock::now();
  std::size_t planted = 0, found = 0, missed = 0, spurious = 0, resplit = 0;
  for (std::size_t k = 0; k < 50; ++k) {
    const auto clip = GenerateClass("multi_scene", k, kSeed);
    const CutList cuts = DetectCuts(clip.frames, {}, clip.clip.clip_id);
    planted += clip.truth.boundaries.size();
    std::vector<bool> used(cuts.cuts.size(), false);
    for (std::size_t b : clip.truth.boundaries) {
      bool hit = false;
      for (std::size_t i = 0; i < cuts.cuts.size() && !hit; ++i) {
        const std::size_t c = cuts.cuts[i];
        if (!used[i] && c + kCutFrameTol >= b && c <= b + kCutFrameTol) used[i] = hit = true;
      }
      hit ? ++found : ++missed;
    }
    spurious += std::count(used.begin(), used.end(), false);
    for (const auto& sub : Split(clip.clip, clip.frames, cuts, CutConfig{}.min_scene_len).kept) {
      resplit += DetectCuts(sub.frames).cuts.size();
    }
  }
  std::size_t single_cuts = 0;
  const std::vector<std::string> singles = {"good", "pan", "noise", "static", "pan_fast"};
  for (std::size_t k = 0; k < 50; ++k) {
    const auto clip = GenerateClass(singles[k % singles.size()], k, kSeed, 64, 64, 96);
    single_cuts += DetectCuts(clip.frames).cuts.size();
  }
  const double elapsed = Seconds(start);
  o.pass = missed == 0 && spurious == 0 && single_cuts == 0 && resplit == 0 &&
           elapsed < kCutSeconds;
  o.detail = std::to_string(found) + "/" + std::to_string(planted) + " boundaries within +-" +
             std::to_string(kCutFrameTol) + ", " + std::to_string(spurious) +
             " spurious on multi-scene, " + std::to_string(single_cuts) +
             " on 50 single-scene, " + std::to_string(resplit) + " on re-detection, runtime " +
             Fmt(elapsed) + " s";
  return o;
}

Outcome EndToEnd(const fs::path& work) {
  const auto labels = GenerateCorpus(
      CorpusSpec::FromJson(Json::parse(ReadFile(SourceDir() / "configs" / "planted100_spec.json"))),
      kSeed, work / "corpus");
  PipelineConfig c = PipelineConfig::Load(SourceDir() / "configs" / "planted100.json");
  c.workers = 4;
  const auto start = Clock::now();
  const RunResult r = RunPipeline(work / "corpus", c, work / "out");
  const double elapsed = Seconds(start);

  ClipSet good;
  std::size_t wrong_stage = 0;
  const std::vector<SetLabel> parts = {SetLabel::kAesthetics, SetLabel::kTemporal,
                                       SetLabel::kMotion};
  for (const auto& l : labels) {
    if (!l.truth.defect) {
      good.insert(l.clip_id);
      continue;
    }
    const SetLabel stage = *ParseSetLabel(l.truth.rejecting_stage);
    bool ok = r.ledger[stage].count(l.clip_id) == 0;
    if (stage == SetLabel::kClear) {
      ok = ok && r.ledger[SetLabel::kIntersection].count(l.clip_id) == 1;
    } else {
      for (SetLabel p : parts) {
        if (p != stage) ok = ok && r.ledger[p].count(l.clip_id) == 1;
      }
    }
    wrong_stage += !ok;
  }
  Outcome o;
  const bool exact = r.ledger[SetLabel::kClear] == good;
  o.pass = exact && good.size() == 20 && wrong_stage == 0 && elapsed < kPipelineSeconds;
  o.detail = "|S| = " + std::to_string(r.ledger[SetLabel::kClear].size()) +
             (exact ? " (exactly the planted good clips)" : " (differs from planted good clips)") +
             ", defects rejected at the wrong stage: " + std::to_string(wrong_stage) +
             ", runtime " + Fmt(elapsed) + " s on 4 workers";
  return o;
}

std::map<std::string, std::string> TreeContents(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    const std::string rel = fs::relative(e.path(), root).string();
    if (rel == "summary.json") continue;  // wall-clock timings
    out[rel] = ReadFile(e.path());
  }
  return out;
}

Outcome Determinism(const fs::path& work) {
  GenerateCorpus(CorpusSpec::FromJson(Json{{"good", 20}, {"static", 10}, {"flicker", 10},
                                           {"pan_fast", 10}, {"blur", 10}, {"dull", 10},
                                           {"pan", 10}, {"multi_scene", 20}}),
                 kSeed, work / "corpus");
  // Keep enough clips that cut extraction has multi-scene members to split.
  vidcurate::testing::WriteFile(work / "config.json", R"({"policy": {"name": "full",
    "aesthetics": {"mode": "top_fraction", "fraction": 0.9},
    "temporal": {"mode": "percentile_band", "p_lo": 5, "p_hi": 95},
    "motion": {"mode": "percentile_band", "p_lo": 5, "p_hi": 95},
    "clarity": {"mode": "top_fraction", "fraction": 0.8}}})");
  Outcome o;
  std::map<std::string, std::string> reference;
  for (int workers : {1, 4, 16}) {
    const fs::path out = work / ("w" + std::to_string(workers));
    const auto r = RunCommand("env -u VIDCURATE_CONFIG " + ShellQuote(CliPath()) + " run --corpus " +
                                  ShellQuote((work / "corpus").string()) + " --out " +
                                  ShellQuote(out.string()) + " --config " +
                                  ShellQuote((work / "config.json").string()) + " --workers " +
                                  std::to_string(workers),
                              std::chrono::seconds(300));
    if (r.exit_status != 0) {
      o.pass = false;
      o.detail += "workers=" + std::to_string(workers) + " exited " +
                  std::to_string(r.exit_status) + "; ";
      continue;
    }
    auto tree = TreeContents(out);
    if (workers == 1) {
      reference = std::move(tree);
      const std::size_t subclips = std::count_if(reference.begin(), reference.end(), [](const auto& kv) {
        return kv.first.rfind("subclips/", 0) == 0;
      });
      o.detail += std::to_string(reference.size()) + " files incl. " + std::to_string(subclips) +
                  " sub-clips; ";
      continue;
    }
    const bool same = tree == reference;
    o.pass &= same;
    o.detail += "workers=" + std::to_string(workers) + (same ? " identical" : " DIFFERS") + "; ";
  }
  o.pass &= reference.count("manifest.jsonl") && reference.count("ledger.json") &&
            reference.count("stats/report.json");
  return o;
}

Outcome DistributionClaim(const fs::path& work) {
  GenerateCorpus(CorpusSpec::FromJson(Json::parse(
                     ReadFile(SourceDir() / "configs" / "planted100_spec.json"))),
                 kSeed, work / "corpus");
  const RunResult r = RunPipeline(work / "corpus", PipelineConfig{}, work / "out");
  const ScoreTable scores = ExtractScores(r.manifest);
  Outcome o;
  // Both top-fraction stages: aesthetics over the corpus, clarity over S_I.
  for (auto [metric, label] : {std::pair{Metric::kAesthetics, SetLabel::kAesthetics},
                               std::pair{Metric::kClarity, SetLabel::kClear}}) {
    const ClipSet& kept = r.ledger[label];
    double kept_min = 1e300, dropped_max = -1e300, kept_sum = 0, all_sum = 0;
    std::size_t n = 0;
    for (const auto& [id, v] : scores.at(metric)) {
      all_sum += v.value;
      ++n;
      if (kept.count(id)) {
        kept_sum += v.value;
        kept_min = std::min(kept_min, v.value);
      } else {
        dropped_max = std::max(dropped_max, v.value);
      }
    }
    const double kept_mean = kept_sum / static_cast<double>(kept.size());
    const double all_mean = all_sum / static_cast<double>(n);
    const bool ok = !kept.empty() && kept_mean > all_mean && kept_min >= dropped_max;
    o.pass &= ok;
    o.detail += std::string(MetricName(metric)) + ": kept mean " + Fmt(kept_mean) + " > population mean " +
                Fmt(all_mean) + ", min(kept) " + Fmt(kept_min) + " >= max(dropped) " +
                Fmt(dropped_max) + (ok ? "" : " VIOLATED") + "; ";
  }
  return o;
}

Outcome ParallelEfficiency(const fs::path& work) {
  GenerateCorpus(CorpusSpec::FromJson(Json{{"good", 25}, {"pan", 25}, {"noise", 25}, {"flicker", 25}}),
                 kSeed, work / "corpus");
  const auto listing = ListCorpus(work / "corpus", false);
  const std::vector<Metric> metrics = {kAllMetrics.begin(), kAllMetrics.end()};
  auto timed = [&](std::size_t workers) {
    PipelineConfig c;
    c.workers = workers;
    Engine engine(c, work / "decoded");
    ManifestWriter writer(work / ("w" + std::to_string(workers) + ".jsonl"));
    const auto start = Clock::now();
    engine.Score(listing.items, metrics, writer);
    return Seconds(start);
  };
  const double one = timed(1);
  const double four = timed(4);
  const unsigned cores = std::thread::hardware_concurrency();
  Outcome o;
  o.pass = four <= kParallelRatio * one;
  o.detail = "1 worker " + Fmt(one) + " s, 4 workers " + Fmt(four) + " s (ratio " +
             Fmt(four / one) + ", " + std::to_string(cores) + " hardware threads)";
  return o;
}

}  // namespace

int main() {
  struct Criterion {
    const char* name;
    bool soft;
    std::function<Outcome(const fs::path&)> run;
  };
  const std::vector<Criterion> criteria = {
      {"selection arithmetic", false, [](const fs::path&) { return SelectionArithmetic(); }},
      {"band selection", false, [](const fs::path&) { return BandSelection(); }},
      {"set composition", false, SetComposition},
      {"scorer oracles", false, [](const fs::path&) { return ScorerOracles(); }},
      {"cut detection", false, [](const fs::path&) { return CutDetection(); }},
      {"end-to-end planted corpus", false, EndToEnd},
      {"determinism across worker counts", false, Determinism},
      {"distribution shift of kept sets", false, DistributionClaim},
      {"parallel efficiency", true, ParallelEfficiency},
  };

  int failed = 0;
  for (const auto& c : criteria) {
    TempDir work("acceptance");
    Outcome o;
    try {
      o = c.run(work.path());
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail = std::string("threw: ") + e.what();
    }
    const char* verdict = o.pass ? "PASS" : (c.soft ? "WARN" : "FAIL");
    std::cout << verdict << "  " << c.name << ": " << o.detail << std::endl;
    if (!o.pass && !c.soft) ++failed;
  }
  std::cout << (failed == 0 ? "acceptance: all criteria passed"
                            : "acceptance: " + std::to_string(failed) + " criteria failed")
            << std::endl;
  return failed == 0 ? 0 : 1;
}
