// vidcurate: command-line front end for the curation engine.
//
// Exit status: 0 on success, 1 when a stage fails, 2 on usage errors.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "vidcurate/caption.h"
#include "vidcurate/core.h"
#include "vidcurate/cutdetect.h"
#include "vidcurate/manifest.h"
#include "vidcurate/pipeline.h"
#include "vidcurate/selection.h"
#include "vidcurate/stats.h"
#include "vidcurate/synth.h"

namespace fs = std::filesystem;
using namespace vidcurate;

namespace {

constexpr int kExitStage = 1;
constexpr int kExitUsage = 2;

std::vector<std::string> SplitList(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

// Flags override the config file, which overrides built-in defaults. The
// config path falls back to $VIDCURATE_CONFIG.
struct CommonFlags {
  std::string config;
  std::string policy;
  std::size_t workers = 0;
  std::string on_error;
  CLI::Option* config_opt = nullptr;
  CLI::Option* policy_opt = nullptr;
  CLI::Option* workers_opt = nullptr;
  CLI::Option* on_error_opt = nullptr;

  void AddConfig(CLI::App* app) {
    config_opt = app->add_option("--config", config,
                                 "JSON config file (default: $VIDCURATE_CONFIG if set)");
  }
  void AddPolicy(CLI::App* app) {
    policy_opt = app->add_option("--policy", policy, "Selection policy: full or lite (default: full)")
                     ->check(CLI::IsMember({"full", "lite"}));
  }
  void AddWorkers(CLI::App* app) {
    workers_opt = app->add_option("--workers", workers, "Worker threads (default: 4)")
                      ->check(CLI::PositiveNumber);
  }
  void AddOnError(CLI::App* app) {
    on_error_opt = app->add_option("--on-error", on_error,
                                   "Per-clip failure policy: skip or abort (default: skip)")
                       ->check(CLI::IsMember({"skip", "abort"}));
  }

  PipelineConfig Resolve() const {
    PipelineConfig c;
    std::string path;
    if (config_opt && *config_opt) {
      path = config;
    } else if (const char* env = std::getenv("VIDCURATE_CONFIG"); env && *env) {
      path = env;
    }
    if (!path.empty()) c = PipelineConfig::Load(path);
    // --policy only switches the path; thresholds from a config that
    // already names the same policy are kept.
    if (policy_opt && *policy_opt && policy != c.policy.name_string()) {
      c.policy = PipelinePolicy::ForName(policy);
    }
    if (workers_opt && *workers_opt) c.workers = workers;
    if (on_error_opt && *on_error_opt) {
      c.on_error = on_error == "skip" ? FailurePolicy::kSkip : FailurePolicy::kAbort;
    }
    c.Validate();
    return c;
  }
};

void Log(const std::string& msg) { std::cerr << "vidcurate: " << msg << "\n"; }

void ReportFailures(const std::vector<StageFailure>& failures) {
  for (const auto& f : failures) Log("skipped " + f.clip_id + " (" + f.stage + "): " + f.error);
}

void WriteText(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
}

Manifest LoadIfExists(const fs::path& path) {
  return fs::exists(path) ? Manifest::Load(path) : Manifest();
}

Manifest WithoutKinds(const Manifest& m, std::set<EntryKind> drop) {
  Manifest out;
  for (const auto& e : m.entries()) {
    if (!drop.count(e.kind)) out.Append(e);
  }
  return out;
}

Manifest Merge(const Manifest& base, const ManifestWriter& added) {
  Manifest out = base;
  out.Extend(added.Snapshot());
  out.Canonicalize();
  return out;
}

// ---- score ---------------------------------------------------------------

struct ScoreCmd {
  CommonFlags common;
  std::string metric = "all";
  std::string corpus;
  std::string out;
  std::string sidecar;

  void Add(CLI::App& app) {
    auto* sub = app.add_subcommand("score", "Score clips and append score entries to a manifest");
    sub->add_option("--metric", metric, "aesthetics|temporal|motion|clarity|all")
        ->check(CLI::IsMember({"aesthetics", "temporal", "temporal_consistency", "motion",
                               "clarity", "all"}))
        ->capture_default_str();
    sub->add_option("--corpus", corpus, "Corpus directory")->required();
    sub->add_option("--out", out, "Manifest to append to (created if missing)")->required();
    sub->add_option("--sidecar", sidecar, "Score the selected metric(s) with this sidecar command");
    common.AddConfig(sub);
    common.AddWorkers(sub);
    common.AddOnError(sub);
    sub->final_callback([this] { Run(); });
  }

  void Run() {
    PipelineConfig config = common.Resolve();
    std::vector<Metric> metrics;
    if (metric == "all") {
      metrics.assign(kAllMetrics.begin(), kAllMetrics.end());
    } else {
      metrics.push_back(*ParseMetric(metric));
    }
    if (!sidecar.empty()) {
      for (Metric m : metrics) {
        auto& b = config.scorers[static_cast<std::size_t>(m)];
        b.provider = Provider::kSidecar;
        b.sidecar_command = sidecar;
      }
    }
    const CorpusListing listing = ListCorpus(corpus, !config.decoder.empty());
    if (listing.items.empty()) throw Error(ErrorKind::kEmptyInput, "no clips found in " + corpus);

    const Manifest existing = LoadIfExists(out);
    const ScoreTable prior = ExtractScores(existing);
    for (Metric m : metrics) {
      auto it = prior.find(m);
      if (it != prior.end() && !it->second.empty()) {
        throw Error(ErrorKind::kIntegrity, out + " already holds " + std::string(MetricName(m)) +
                                               " scores; write to a new manifest");
      }
    }
    Engine engine(config, fs::path(out).parent_path() / "decoded");
    ManifestWriter writer;
    auto failures = engine.Score(listing.items, metrics, writer);
    ReportFailures(failures);
    Manifest merged = Merge(existing, writer);
    merged.Save(out);
    Log("scored " + std::to_string(listing.items.size()) + " clips, " +
        std::to_string(failures.size()) + " failure(s)");
  }
};

// ---- select --------------------------------------------------------------

struct SelectCmd {
  CommonFlags common;
  std::string manifest;
  std::string out;
  std::string manifest_out;

  void Add(CLI::App& app) {
    auto* sub = app.add_subcommand("select", "Re-run selection over recorded scores");
    sub->add_option("--manifest", manifest, "Manifest with score entries")->required();
    sub->add_option("--out", out, "Ledger file to write")->required();
    sub->add_option("--manifest-out", manifest_out,
                    "Manifest with the scores plus new verdicts "
                    "(default: <ledger dir>/selected.jsonl)");
    common.AddConfig(sub);
    common.AddPolicy(sub);
    sub->final_callback([this] { Run(); });
  }

  void Run() {
    const PipelineConfig config = common.Resolve();
    const Manifest input = Manifest::Load(manifest);
    OfflineSelection sel = SelectFromScores(ExtractScores(input), config.policy);
    sel.ledger.CheckInvariants();
    // Earlier verdicts, cuts and captions belong to the old selection.
    Manifest m = WithoutKinds(input, {EntryKind::kVerdict, EntryKind::kCut, EntryKind::kCaption});
    for (auto& v : sel.verdicts) m.Append(std::move(v));
    m.Canonicalize();
    const fs::path mout = manifest_out.empty() ? fs::path(out).parent_path() / "selected.jsonl"
                                               : fs::path(manifest_out);
    m.Save(mout);
    WriteText(out, sel.ledger.ToJson().dump(2) + "\n");
    for (SetLabel label : kAllSetLabels) {
      if (!sel.ledger[label].empty()) {
        Log(std::string(SetLabelName(label)) + ": " + std::to_string(sel.ledger[label].size()));
      }
    }
  }
};

// ---- cut -----------------------------------------------------------------

SetLabel FinalLabel(const Manifest& m) {
  for (const auto& e : m.entries()) {
    if (e.kind == EntryKind::kVerdict && e.stage == SetLabelName(SetLabel::kClear)) {
      return SetLabel::kClear;
    }
  }
  return SetLabel::kLite;
}

struct CutCmd {
  CommonFlags common;
  std::string manifest;
  std::string corpus;
  std::string out;
  std::string subclips;

  void Add(CLI::App& app) {
    auto* sub = app.add_subcommand("cut", "Detect cuts and split the clips in S (or S_prime)");
    sub->add_option("--manifest", manifest, "Manifest with selection verdicts")->required();
    sub->add_option("--corpus", corpus, "Corpus directory")->required();
    sub->add_option("--out", out, "Output manifest")->required();
    sub->add_option("--subclips", subclips, "Sub-clip directory (default: <out dir>/subclips)");
    common.AddConfig(sub);
    common.AddWorkers(sub);
    common.AddOnError(sub);
    sub->final_callback([this] { Run(); });
  }

  void Run() {
    const PipelineConfig config = common.Resolve();
    const Manifest input = Manifest::Load(manifest);
    for (const auto& e : input.entries()) {
      if (e.kind == EntryKind::kCut || e.stage == SetLabelName(SetLabel::kExtracted)) {
        throw Error(ErrorKind::kIntegrity, manifest + " already holds cut extraction results");
      }
    }
    const SetLabel label = FinalLabel(input);
    const ClipSet selected = ReplayManifest(input)[label];
    const CorpusListing listing = ListCorpus(corpus, !config.decoder.empty());
    std::vector<CorpusItem> items;
    for (const auto& item : listing.items) {
      if (selected.count(item.clip_id)) items.push_back(item);
    }
    if (items.size() != selected.size()) {
      throw Error(ErrorKind::kIntegrity, "corpus " + corpus + " lacks clips selected in " +
                                             std::string(SetLabelName(label)));
    }
    const fs::path dir = subclips.empty() ? fs::path(out).parent_path() / "subclips" : fs::path(subclips);
    Engine engine(config, fs::path(out).parent_path() / "decoded");
    ManifestWriter writer;
    ReportFailures(engine.Cut(items, dir, writer));
    Manifest merged = Merge(input, writer);
    ReplayManifest(merged).CheckInvariants(ExtractParents(merged));
    merged.Save(out);
    Log("cut " + std::to_string(items.size()) + " clips from " + std::string(SetLabelName(label)));
  }
};

// ---- caption -------------------------------------------------------------

struct CaptionCmd {
  CommonFlags common;
  std::string manifest;
  std::string endpoint;
  std::string out;
  std::string corpus;
  std::string subclips;
  std::string prompt;
  CLI::Option* prompt_opt = nullptr;

  void Add(CLI::App& app) {
    auto* sub = app.add_subcommand("caption", "Caption the clips in S_tilde via a caption service");
    sub->add_option("--manifest", manifest, "Manifest with cut extraction results")->required();
    sub->add_option("--endpoint", endpoint, "Caption service URL (http://host:port/path)")->required();
    sub->add_option("--out", out, "Output manifest")->required();
    sub->add_option("--corpus", corpus, "Corpus directory holding unsplit clips");
    sub->add_option("--subclips", subclips, "Sub-clip directory (default: <manifest dir>/subclips)");
    prompt_opt = sub->add_option("--prompt", prompt, "Prompt passed through to the service");
    common.AddConfig(sub);
    common.AddOnError(sub);
    sub->final_callback([this] { Run(); });
  }

  void Run() {
    PipelineConfig config = common.Resolve();
    config.caption.endpoint = endpoint;
    if (*prompt_opt) config.caption.prompt = prompt;
    config.Validate();
    const Manifest input = Manifest::Load(manifest);
    const SelectionLedger ledger = ReplayManifest(input);
    const auto parents = ExtractParents(input);
    ClipSet ids = ledger[SetLabel::kExtracted];
    if (ids.empty()) {
      const SetLabel label = FinalLabel(input);
      Log("S_tilde is empty; captioning " + std::string(SetLabelName(label)));
      ids = ledger[label];
    }
    const fs::path subdir =
        subclips.empty() ? fs::path(manifest).parent_path() / "subclips" : fs::path(subclips);
    std::vector<CaptionTarget> targets;
    for (const auto& id : ids) {
      fs::path p = parents.count(id) ? subdir / (id + ".rfv1") : fs::path(corpus) / (id + ".rfv1");
      if (!parents.count(id) && corpus.empty()) {
        throw Error(ErrorKind::kUsage, "--corpus is required to caption unsplit clip " + id);
      }
      if (!fs::exists(p)) throw Error(ErrorKind::kIo, "missing frames for " + id + ": " + p.string());
      targets.push_back({id, fs::absolute(p).string()});
    }
    Engine engine(config, {});
    ManifestWriter writer;
    auto failures = engine.Caption(targets, writer);
    ReportFailures(failures);
    Merge(WithoutKinds(input, {EntryKind::kCaption}), writer).Save(out);
    Log("captioned " + std::to_string(targets.size() - failures.size()) + " of " +
        std::to_string(targets.size()) + " clips");
  }
};

// ---- run -----------------------------------------------------------------

struct RunCmd {
  CommonFlags common;
  std::string corpus;
  std::string out;
  std::string endpoint;

  void Add(CLI::App& app) {
    auto* sub = app.add_subcommand("run", "Run every stage end to end");
    sub->add_option("--corpus", corpus, "Corpus directory")->required();
    sub->add_option("--out", out, "Output directory")->required();
    sub->add_option("--caption-endpoint", endpoint, "Caption service URL");
    common.AddConfig(sub);
    common.AddPolicy(sub);
    common.AddWorkers(sub);
    common.AddOnError(sub);
    sub->final_callback([this] { Run(); });
  }

  void Run() {
    PipelineConfig config = common.Resolve();
    if (!endpoint.empty()) config.caption.endpoint = endpoint;
    RunResult r = RunPipeline(corpus, config, out);
    ReportFailures(r.failures);
    for (SetLabel label : kAllSetLabels) {
      if (!r.ledger[label].empty()) {
        Log(std::string(SetLabelName(label)) + ": " + std::to_string(r.ledger[label].size()));
      }
    }
    Log("wrote " + (fs::path(out) / "manifest.jsonl").string());
  }
};

// ---- stats ---------------------------------------------------------------

struct StatsCmd {
  std::string manifests;
  std::string names;
  std::string metrics = "aesthetics,temporal_consistency,motion,clarity";
  std::string out;
  bool allow_single = false;
  std::string config;
  CLI::Option* config_opt = nullptr;

  void Add(CLI::App& app) {
    auto* sub = app.add_subcommand("stats", "Compare metric distributions across manifests");
    sub->add_option("--manifests", manifests,
                    "Comma-separated manifests; PATH@LABEL restricts one to a ledger set")
        ->required();
    sub->add_option("--names", names, "Comma-separated corpus names (default: file stems)");
    sub->add_option("--metrics", metrics, "Comma-separated metrics")->capture_default_str();
    sub->add_option("--out", out, "Report directory")->required();
    sub->add_flag("--allow-single", allow_single, "Allow a report over a single manifest");
    config_opt = sub->add_option("--config", config, "JSON config (stats_edges overrides)");
    sub->final_callback([this] { Run(); });
  }

  void Run() {
    CompareOptions opts;
    opts.allow_single = allow_single;
    opts.metrics.clear();
    for (const auto& m : SplitList(metrics)) {
      auto parsed = ParseMetric(m);
      if (!parsed) throw Error(ErrorKind::kUsage, "unknown metric '" + m + "'");
      opts.metrics.push_back(*parsed);
    }
    std::string path;
    if (*config_opt) {
      path = config;
    } else if (const char* env = std::getenv("VIDCURATE_CONFIG"); env && *env) {
      path = env;
    }
    if (!path.empty()) opts.edges = PipelineConfig::Load(path).stats_edges;

    const auto specs = SplitList(manifests);
    const auto given_names = SplitList(names);
    if (!given_names.empty() && given_names.size() != specs.size()) {
      throw Error(ErrorKind::kUsage, "--names must match --manifests in length");
    }
    if (specs.size() < 2 && !allow_single) {
      throw Error(ErrorKind::kUsage, "stats needs at least 2 manifests (or --allow-single)");
    }
    std::vector<CorpusView> views;
    std::set<std::string> used;
    for (std::size_t i = 0; i < specs.size(); ++i) {
      std::string file = specs[i];
      std::optional<SetLabel> label;
      if (auto at = file.rfind('@'); at != std::string::npos) {
        label = ParseSetLabel(file.substr(at + 1));
        if (!label) throw Error(ErrorKind::kUsage, "unknown set label in '" + specs[i] + "'");
        file = file.substr(0, at);
      }
      std::string name = given_names.empty() ? fs::path(file).stem().string() : given_names[i];
      if (given_names.empty() && label) name += "@" + std::string(SetLabelName(*label));
      if (given_names.empty()) {
        const std::string base = name;
        for (int k = 2; used.count(name); ++k) name = base + "_" + std::to_string(k);
      }
      used.insert(name);
      views.push_back(MakeCorpusView(name, file, Manifest::Load(file), label));
    }
    WriteReport(CompareCorpora(std::move(views), opts), out);
    Log("wrote " + (fs::path(out) / "report.json").string());
  }
};

// ---- synth ---------------------------------------------------------------

struct SynthCmd {
  std::string spec;
  std::uint64_t seed = 0;
  std::string out;

  void Add(CLI::App& app) {
    auto* sub = app.add_subcommand("synth", "Generate a seeded synthetic corpus");
    sub->add_option("--spec", spec,
                    "Corpus spec: a JSON file, or inline JSON such as {\"good\":20,\"static\":16}")
        ->required();
    sub->add_option("--seed", seed, "PRNG seed")->required();
    sub->add_option("--out", out, "Output directory")->required();
    sub->final_callback([this] { Run(); });
  }

  void Run() {
    Json j;
    try {
      if (!spec.empty() && spec.front() == '{') {
        j = Json::parse(spec);
      } else {
        std::ifstream in(spec);
        if (!in) throw Error(ErrorKind::kIo, "cannot open spec " + spec);
        j = Json::parse(in);
      }
    } catch (const Json::parse_error& e) {
      throw Error(ErrorKind::kConfig, spec + ": " + e.what());
    }
    const auto labels = GenerateCorpus(CorpusSpec::FromJson(j), seed, out);
    Log("generated " + std::to_string(labels.size()) + " clips in " + out);
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic parallel video-corpus curation engine"};
  app.require_subcommand(1);
  app.fallthrough(false);

  ScoreCmd score;
  SelectCmd select;
  CutCmd cut;
  CaptionCmd caption;
  RunCmd run;
  StatsCmd stats;
  SynthCmd synth;
  score.Add(app);
  select.Add(app);
  cut.Add(app);
  caption.Add(app);
  run.Add(app);
  stats.Add(app);
  synth.Add(app);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitUsage;
  } catch (const Error& e) {
    std::cerr << "vidcurate: " << e.what() << "\n";
    return e.kind() == ErrorKind::kUsage ? kExitUsage : kExitStage;
  } catch (const std::exception& e) {
    std::cerr << "vidcurate: " << e.what() << "\n";
    return kExitStage;
  }
  return 0;
}
