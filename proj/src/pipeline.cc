#include "vidcurate/pipeline.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "vidcurate/stats.h"

namespace vidcurate {

namespace {

std::chrono::milliseconds Seconds(double s) {
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(s * 1000.0)));
}

double ToSeconds(std::chrono::milliseconds ms) { return static_cast<double>(ms.count()) / 1000.0; }

std::string FailurePolicyName(FailurePolicy p) { return p == FailurePolicy::kSkip ? "skip" : "abort"; }

PipelinePolicy PolicyFromJson(const Json& j) {
  if (j.is_string()) return PipelinePolicy::ForName(j.get<std::string>());
  if (!j.is_object()) throw Error(ErrorKind::kConfig, "policy must be a name or an object");
  PipelinePolicy p = PipelinePolicy::ForName(j.value("name", std::string("full")));
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& key = it.key();
    try {
      if (key == "name") {
        continue;
      } else if (key == "aesthetics") {
        p.aesthetics = BandPolicy::FromJson(*it);
      } else if (key == "motion") {
        p.motion = BandPolicy::FromJson(*it);
      } else if (key == "temporal" || key == "temporal_consistency" || key == "clarity") {
        if (!p.is_full()) {
          throw Error(ErrorKind::kConfig, "the lite policy has no " + key + " stage");
        }
        (key == "clarity" ? p.clarity : p.temporal) = BandPolicy::FromJson(*it);
      } else if (key == "run_cut_extraction") {
        p.run_cut_extraction = it->get<bool>();
      } else if (key == "run_captioning") {
        p.run_captioning = it->get<bool>();
      } else {
        throw Error(ErrorKind::kConfig, "unknown field '" + key + "' in policy");
      }
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::kConfig, "policy field '" + key + "': " + e.what());
    }
  }
  return p;
}

SamplingPlan SamplingFromJson(const Json& j) {
  SamplingPlan plan;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (it.key() == "stride") {
      plan.stride = it->get<std::uint32_t>();
    } else if (it.key() == "max_frames") {
      plan.max_frames = it->get<std::uint32_t>();
    } else {
      throw Error(ErrorKind::kConfig, "unknown field '" + it.key() + "' in sampling");
    }
  }
  plan.Validate();
  return plan;
}

void ScorersFromJson(const Json& j, ScorerBindings& bindings) {
  if (!j.is_object()) throw Error(ErrorKind::kConfig, "scorers must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto metric = ParseMetric(it.key());
    if (!metric) throw Error(ErrorKind::kConfig, "unknown metric '" + it.key() + "' in scorers");
    ScorerBinding& b = bindings[static_cast<std::size_t>(*metric)];
    b.metric = *metric;
    if (it->is_string() && it->get<std::string>() == "reference") {
      b.provider = Provider::kReference;
      b.sidecar_command.clear();
    } else if (it->is_object() && it->size() == 1 && it->contains("sidecar") &&
               (*it)["sidecar"].is_string()) {
      b.provider = Provider::kSidecar;
      b.sidecar_command = (*it)["sidecar"].get<std::string>();
    } else {
      throw Error(ErrorKind::kConfig, "scorer for '" + it.key() +
                                          "' must be \"reference\" or {\"sidecar\": CMD}");
    }
  }
}

}  // namespace

void PipelineConfig::Validate() const {
  if (workers < 1) throw Error(ErrorKind::kConfig, "workers must be >= 1");
  policy.aesthetics.Validate();
  policy.motion.Validate();
  if (policy.is_full()) {
    if (!policy.temporal || !policy.clarity) {
      throw Error(ErrorKind::kConfig, "full policy needs temporal and clarity rules");
    }
    policy.temporal->Validate();
    policy.clarity->Validate();
  }
  for (const auto& b : scorers) {
    if (b.provider == Provider::kSidecar && b.sidecar_command.empty()) {
      throw Error(ErrorKind::kConfig, "empty sidecar command for " + std::string(MetricName(b.metric)));
    }
  }
  if (sidecar_timeout.count() <= 0) throw Error(ErrorKind::kConfig, "sidecar timeout must be positive");
  if (decoder_timeout.count() <= 0) throw Error(ErrorKind::kConfig, "decoder timeout must be positive");
  if (sampling) sampling->Validate();
  cut.Validate();
  caption.Validate();
}

Json PipelineConfig::ToJson() const {
  Json sc = Json::object();
  for (const auto& b : scorers) {
    sc[std::string(MetricName(b.metric))] =
        b.provider == Provider::kReference ? Json("reference") : Json{{"sidecar", b.sidecar_command}};
  }
  Json j = {{"policy", policy.ToJson()},
            {"workers", workers},
            {"on_error", FailurePolicyName(on_error)},
            {"scorers", sc},
            {"sidecar_processes", sidecar_processes},
            {"sidecar_timeout_s", ToSeconds(sidecar_timeout)},
            {"decoder", decoder},
            {"decoder_timeout_s", ToSeconds(decoder_timeout)},
            {"cut", cut.ToJson()},
            {"caption", caption.ToJson()},
            {"write_subclips", write_subclips},
            {"stats_edges", stats_edges}};
  j["sampling"] = sampling ? Json{{"stride", sampling->stride}, {"max_frames", sampling->max_frames}}
                           : Json(nullptr);
  return j;
}

PipelineConfig PipelineConfig::Overlay(PipelineConfig c, const Json& j) {
  if (!j.is_object()) throw Error(ErrorKind::kConfig, "config must be a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& key = it.key();
    try {
      if (key == "policy") {
        c.policy = PolicyFromJson(*it);
      } else if (key == "workers") {
        c.workers = it->get<std::size_t>();
      } else if (key == "on_error") {
        const auto v = it->get<std::string>();
        if (v != "skip" && v != "abort") {
          throw Error(ErrorKind::kConfig, "on_error must be skip or abort");
        }
        c.on_error = v == "skip" ? FailurePolicy::kSkip : FailurePolicy::kAbort;
      } else if (key == "scorers") {
        ScorersFromJson(*it, c.scorers);
      } else if (key == "sidecar_processes") {
        c.sidecar_processes = it->get<std::size_t>();
      } else if (key == "sidecar_timeout_s") {
        c.sidecar_timeout = Seconds(it->get<double>());
      } else if (key == "sampling") {
        if (it->is_null()) {
          c.sampling.reset();
        } else {
          c.sampling = SamplingFromJson(*it);
        }
      } else if (key == "decoder") {
        c.decoder = it->get<std::string>();
      } else if (key == "decoder_timeout_s") {
        c.decoder_timeout = Seconds(it->get<double>());
      } else if (key == "cut") {
        c.cut = CutConfig::FromJson(*it);
      } else if (key == "caption") {
        c.caption = CaptionClientConfig::FromJson(*it);
      } else if (key == "write_subclips") {
        c.write_subclips = it->get<bool>();
      } else if (key == "stats_edges") {
        c.stats_edges = it->get<std::map<std::string, std::vector<double>>>();
      } else {
        throw Error(ErrorKind::kConfig, "unknown config field '" + key + "'");
      }
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::kConfig, "config field '" + key + "': " + e.what());
    }
  }
  c.Validate();
  return c;
}

PipelineConfig PipelineConfig::FromJson(const Json& j) { return Overlay(PipelineConfig(), j); }

PipelineConfig PipelineConfig::Load(const std::filesystem::path& path) {
  return Load(path, PipelineConfig());
}

PipelineConfig PipelineConfig::Load(const std::filesystem::path& path, PipelineConfig base) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::kIo, "cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw Error(ErrorKind::kConfig, path.string() + ": " + e.what());
  }
  return Overlay(std::move(base), j);
}

CorpusListing ListCorpus(const std::filesystem::path& dir, bool with_decoder) {
  std::error_code ec;
  std::filesystem::directory_iterator it(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot read corpus " + dir.string() + ": " + ec.message());
  CorpusListing out;
  for (const auto& entry : it) {
    if (!entry.is_regular_file()) continue;
    const auto& p = entry.path();
    const std::string ext = p.extension().string();
    if (ext == ".rfv1") {
      out.items.push_back({p.stem().string(), p, false});
    } else if (with_decoder && ext != ".json" && ext != ".jsonl") {
      out.items.push_back({p.stem().string(), p, true});
    } else {
      out.ignored.push_back(p);
    }
  }
  std::sort(out.items.begin(), out.items.end(),
            [](const auto& a, const auto& b) { return a.clip_id < b.clip_id; });
  for (std::size_t i = 1; i < out.items.size(); ++i) {
    if (out.items[i].clip_id == out.items[i - 1].clip_id) {
      throw Error(ErrorKind::kIntegrity, "duplicate clip id '" + out.items[i].clip_id + "' in " +
                                             dir.string());
    }
  }
  std::sort(out.ignored.begin(), out.ignored.end());
  return out;
}

Engine::Engine(PipelineConfig config, std::filesystem::path work_dir)
    : config_(std::move(config)), work_dir_(std::move(work_dir)), pool_(config_.workers) {
  config_.Validate();
  std::map<std::string, std::vector<std::string>> by_command;
  for (const auto& b : config_.scorers) {
    if (b.provider == Provider::kSidecar) {
      by_command[b.sidecar_command].push_back(std::string(MetricName(b.metric)));
    }
  }
  const std::size_t procs = config_.sidecar_processes ? config_.sidecar_processes : config_.workers;
  for (const auto& [cmd, metrics] : by_command) {
    std::string launch = cmd + " --metrics ";
    for (std::size_t i = 0; i < metrics.size(); ++i) launch += (i ? "," : "") + metrics[i];
    sidecars_[cmd] = std::make_unique<SidecarPool>(launch, procs, config_.sidecar_timeout);
  }
}

Engine::~Engine() = default;

std::filesystem::path Engine::Rfv1Path(const CorpusItem& item) {
  if (!item.needs_decode) return item.source;
  {
    std::lock_guard<std::mutex> lock(decode_mu_);
    auto it = decoded_.find(item.clip_id);
    if (it != decoded_.end()) return it->second;
  }
  if (config_.decoder.empty()) {
    throw Error(ErrorKind::kDecoder, "no decoder configured for " + item.source.string());
  }
  DecodedClip clip = DecodeExternal(config_.decoder, item.source.string(), config_.decoder_timeout);
  const auto path = work_dir_ / (item.clip_id + ".rfv1");
  std::filesystem::create_directories(work_dir_);
  WriteRfv1File(path, clip.frames, static_cast<float>(clip.clip.fps));
  std::lock_guard<std::mutex> lock(decode_mu_);
  decoded_[item.clip_id] = path;
  return path;
}

DecodedClip Engine::Load(const CorpusItem& item) {
  DecodedClip clip = ReadRfv1File(Rfv1Path(item), item.clip_id);
  clip.clip.source = item.source.string();
  clip.clip.Validate();
  return clip;
}

ScoreValue Engine::ScoreOne(Metric metric, const DecodedClip& clip,
                            const std::filesystem::path& rfv1_path, Json& extra) {
  const ScorerBinding& b = config_.scorers[static_cast<std::size_t>(metric)];
  if (b.provider == Provider::kSidecar) {
    return ScoreViaSidecar(b, *sidecars_.at(b.sidecar_command), clip.clip,
                           std::filesystem::absolute(rfv1_path).string());
  }
  const SamplingPlan plan =
      config_.sampling ? *config_.sampling : DefaultSamplingPlan(clip.frames.frame_count());
  const FrameBuffer sampled = Sample(clip.frames, plan);
  extra = {{"stride", plan.stride}, {"sampled_frames", sampled.frame_count()}};
  try {
    ScoreResult r = ScoreReference(metric, sampled);
    return {r.value, b.Identity(), std::move(r.flags)};
  } catch (const Error& e) {
    throw Error(e.kind(), "clip " + clip.clip.clip_id + ": " + e.what());
  }
}

std::vector<StageFailure> Engine::Finish(const std::string& stage,
                                         std::vector<StageFailure> failures) const {
  std::sort(failures.begin(), failures.end(), [](const auto& a, const auto& b) {
    return std::tie(a.clip_id, a.stage) < std::tie(b.clip_id, b.stage);
  });
  if (config_.on_error == FailurePolicy::kAbort && !failures.empty()) {
    const auto& f = failures.front();
    throw Error(ErrorKind::kPipeline, "stage " + stage + " failed (" + f.stage + "): " + f.error);
  }
  return failures;
}

namespace {

// Collects per-clip failures from worker tasks and trips the abort flag.
class FailureSink {
 public:
  explicit FailureSink(bool abort_on_failure) : abort_(abort_on_failure) {}

  void Add(StageFailure f) {
    std::lock_guard<std::mutex> lock(mu_);
    failures_.push_back(std::move(f));
    if (abort_) stop_ = true;
  }
  bool stopped() const { return stop_; }
  std::vector<StageFailure> Take() { return std::move(failures_); }

 private:
  bool abort_;
  std::atomic<bool> stop_{false};
  std::mutex mu_;
  std::vector<StageFailure> failures_;
};

std::string Describe(const std::exception& e) { return e.what(); }

}  // namespace

std::vector<StageFailure> Engine::Score(const std::vector<CorpusItem>& items,
                                        const std::vector<Metric>& metrics,
                                        ManifestWriter& out) {
  FailureSink sink(config_.on_error == FailurePolicy::kAbort);
  ParallelFor(pool_, items.size(), [&](std::size_t i) {
    if (sink.stopped()) return;
    const CorpusItem& item = items[i];
    std::optional<DecodedClip> clip;
    std::filesystem::path path;
    try {
      path = Rfv1Path(item);
      clip = Load(item);
    } catch (const std::exception& e) {
      for (Metric m : metrics) sink.Add({item.clip_id, std::string(MetricName(m)), Describe(e)});
      return;
    }
    for (Metric m : metrics) {
      try {
        Json extra = Json::object();
        ScoreValue v = ScoreOne(m, *clip, path, extra);
        out.Append(ManifestEntry::Score(m, item.clip_id, v, std::move(extra)));
      } catch (const std::exception& e) {
        sink.Add({item.clip_id, std::string(MetricName(m)), Describe(e)});
      }
    }
  });
  return Finish("score", sink.Take());
}

std::vector<StageFailure> Engine::Cut(const std::vector<CorpusItem>& items,
                                      const std::filesystem::path& subclip_dir,
                                      ManifestWriter& out, std::vector<CaptionTarget>* targets) {
  if (!subclip_dir.empty()) std::filesystem::create_directories(subclip_dir);
  FailureSink sink(config_.on_error == FailurePolicy::kAbort);
  std::mutex targets_mu;
  std::vector<CaptionTarget> found;
  ParallelFor(pool_, items.size(), [&](std::size_t i) {
    if (sink.stopped()) return;
    const CorpusItem& item = items[i];
    try {
      const DecodedClip clip = Load(item);
      const std::size_t n = clip.frames.frame_count();
      CutList cuts;
      cuts.clip_id = item.clip_id;
      // A single frame holds one scene by definition.
      if (n >= 2) cuts = DetectCuts(clip.frames, config_.cut, item.clip_id);

      ManifestEntry cut_entry;
      cut_entry.stage = "cut";
      cut_entry.kind = EntryKind::kCut;
      cut_entry.clip_id = item.clip_id;
      cut_entry.payload = {{"cuts", cuts.cuts}, {"frame_count", n}};
      out.Append(std::move(cut_entry));

      std::vector<CaptionTarget> local;
      if (cuts.cuts.empty()) {
        out.Append(ManifestEntry::Verdict(SetLabel::kExtracted, item.clip_id, true,
                                          {{"start", 0}, {"frame_count", n}}));
        local.push_back({item.clip_id, std::filesystem::absolute(Rfv1Path(item)).string()});
      } else {
        SplitResult split = Split(clip.clip, clip.frames, cuts, config_.cut.min_scene_len);
        for (const auto& sub : split.kept) {
          out.Append(ManifestEntry::Verdict(
              SetLabel::kExtracted, sub.clip.clip_id, true,
              {{"parent_id", item.clip_id}, {"start", sub.start}, {"frame_count", sub.frames.frame_count()}}));
          if (!subclip_dir.empty()) {
            const auto path = subclip_dir / (sub.clip.clip_id + ".rfv1");
            WriteRfv1File(path, sub.frames, static_cast<float>(clip.clip.fps));
            local.push_back({sub.clip.clip_id, std::filesystem::absolute(path).string()});
          }
        }
        for (const auto& d : split.dropped) {
          out.Append(ManifestEntry::Verdict(SetLabel::kExtracted, d.clip_id, false,
                                            {{"parent_id", item.clip_id},
                                             {"start", d.start},
                                             {"frame_count", d.frame_count},
                                             {"reason", "shorter than min_scene_len"}}));
        }
      }
      std::lock_guard<std::mutex> lock(targets_mu);
      found.insert(found.end(), local.begin(), local.end());
    } catch (const std::exception& e) {
      sink.Add({item.clip_id, "cut", Describe(e)});
    }
  });
  auto failures = Finish("cut", sink.Take());
  if (targets) {
    std::sort(found.begin(), found.end(),
              [](const auto& a, const auto& b) { return a.clip_id < b.clip_id; });
    targets->insert(targets->end(), found.begin(), found.end());
  }
  return failures;
}

std::vector<StageFailure> Engine::Caption(const std::vector<CaptionTarget>& targets,
                                          ManifestWriter& out) {
  std::vector<StageFailure> failures;
  for (const auto& o : CaptionBatch(targets, config_.caption)) {
    if (o.record) {
      out.Append(CaptionEntry(*o.record));
      continue;
    }
    ManifestEntry e;
    e.stage = "caption";
    e.kind = EntryKind::kCaption;
    e.clip_id = o.clip_id;
    e.payload = {{"error", o.error}, {"attempts", o.attempts}, {"provider", config_.caption.endpoint}};
    out.Append(std::move(e));
    failures.push_back({o.clip_id, "caption", o.error});
  }
  return Finish("caption", std::move(failures));
}

ManifestEntry SkipVerdict(SetLabel label, const StageFailure& failure) {
  return ManifestEntry::Verdict(label, failure.clip_id, false,
                                {{"skipped", true}, {"error", failure.error}});
}

namespace {

SetLabel LabelFor(Metric m, bool full) {
  switch (m) {
    case Metric::kAesthetics: return full ? SetLabel::kAesthetics : SetLabel::kAestheticsLite;
    case Metric::kTemporalConsistency: return SetLabel::kTemporal;
    case Metric::kMotion: return full ? SetLabel::kMotion : SetLabel::kMotionLite;
    case Metric::kClarity: return SetLabel::kClear;
  }
  return SetLabel::kAesthetics;
}

class StageClock {
 public:
  explicit StageClock(Json& sink) : sink_(sink) {}

  void Mark(const std::string& stage) {
    const auto now = std::chrono::steady_clock::now();
    sink_[stage] = std::chrono::duration<double>(now - last_).count();
    last_ = now;
  }
  double Total() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  Json& sink_;
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
  std::chrono::steady_clock::time_point last_ = start_;
};

void WriteText(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
}

}  // namespace

RunResult RunPipeline(const std::filesystem::path& corpus_dir, const PipelineConfig& config,
                      const std::filesystem::path& out_dir) {
  config.Validate();
  const CorpusListing listing = ListCorpus(corpus_dir, !config.decoder.empty());
  if (listing.items.empty()) {
    throw Error(ErrorKind::kEmptyInput, "no clips found in " + corpus_dir.string());
  }
  std::filesystem::create_directories(out_dir);
  const auto live_path = out_dir / "manifest.live.jsonl";
  const bool full = config.policy.is_full();

  Json stage_seconds = Json::object();
  StageClock clock(stage_seconds);
  Json notes = Json::array();
  Json drop_reasons = Json::object();
  std::vector<StageFailure> failures;

  Engine engine(config, out_dir / "decoded");
  ManifestWriter writer(live_path);
  ClipSet universe;
  std::map<std::string, CorpusItem> by_id;
  for (const auto& item : listing.items) {
    universe.insert(item.clip_id);
    by_id.emplace(item.clip_id, item);
  }
  auto items_for = [&](const ClipSet& ids) {
    std::vector<CorpusItem> v;
    for (const auto& id : ids) v.push_back(by_id.at(id));
    return v;
  };
  auto record_failures = [&](const std::vector<StageFailure>& fs) {
    for (const auto& f : fs) {
      if (auto m = ParseMetric(f.stage)) writer.Append(SkipVerdict(LabelFor(*m, full), f));
      failures.push_back(f);
    }
  };

  SelectionLedger L;
  auto select = [&](SetLabel label, Metric metric, const BandPolicy& band) {
    const ScoreTable scores = ExtractScores(writer.Snapshot());
    const Population pop = PopulationFor(scores, metric);
    ClipSet kept;
    if (pop.empty()) {
      notes.push_back(std::string(SetLabelName(label)) + ": no " +
                      std::string(MetricName(metric)) + " scores, set is empty");
    } else {
      kept = ApplyPolicy(band, pop);
    }
    for (auto& v : SelectionVerdicts(label, pop, kept, band)) writer.Append(std::move(v));
    drop_reasons[std::string(SetLabelName(label))] = {{"rule", band.Describe()},
                                                      {"population", pop.size()},
                                                      {"kept", kept.size()},
                                                      {"dropped", pop.size() - kept.size()}};
    L[label] = std::move(kept);
  };
  auto intersect = [&](SetLabel label, std::vector<SetLabel> parts) {
    std::vector<ClipSet> sets;
    std::vector<std::pair<SetLabel, const ClipSet*>> refs;
    for (SetLabel p : parts) {
      sets.push_back(L[p]);
      refs.emplace_back(p, &L[p]);
    }
    L[label] = Intersect(sets);
    for (auto& v : IntersectionVerdicts(label, universe, refs)) writer.Append(std::move(v));
    drop_reasons[std::string(SetLabelName(label))] = {{"rule", "intersection"},
                                                      {"population", universe.size()},
                                                      {"kept", L[label].size()},
                                                      {"dropped", universe.size() - L[label].size()}};
  };

  const std::vector<Metric> first_pass =
      full ? std::vector<Metric>{Metric::kAesthetics, Metric::kTemporalConsistency, Metric::kMotion}
           : std::vector<Metric>{Metric::kAesthetics, Metric::kMotion};
  record_failures(engine.Score(listing.items, first_pass, writer));
  clock.Mark("score");

  SetLabel final_label;
  if (full) {
    select(SetLabel::kAesthetics, Metric::kAesthetics, config.policy.aesthetics);
    select(SetLabel::kTemporal, Metric::kTemporalConsistency, *config.policy.temporal);
    select(SetLabel::kMotion, Metric::kMotion, config.policy.motion);
    intersect(SetLabel::kIntersection, {SetLabel::kAesthetics, SetLabel::kTemporal, SetLabel::kMotion});
    clock.Mark("select");
    record_failures(engine.Score(items_for(L[SetLabel::kIntersection]), {Metric::kClarity}, writer));
    clock.Mark("clarity");
    select(SetLabel::kClear, Metric::kClarity, *config.policy.clarity);
    clock.Mark("select_clarity");
    final_label = SetLabel::kClear;
  } else {
    select(SetLabel::kAestheticsLite, Metric::kAesthetics, config.policy.aesthetics);
    select(SetLabel::kMotionLite, Metric::kMotion, config.policy.motion);
    intersect(SetLabel::kLite, {SetLabel::kAestheticsLite, SetLabel::kMotionLite});
    clock.Mark("select");
    final_label = SetLabel::kLite;
  }

  std::vector<CaptionTarget> targets;
  if (config.policy.run_cut_extraction) {
    const auto subclip_dir = config.write_subclips ? out_dir / "subclips" : std::filesystem::path();
    auto fs = engine.Cut(items_for(L[final_label]), subclip_dir, writer, &targets);
    failures.insert(failures.end(), fs.begin(), fs.end());
    notes.push_back("sub-clips inherit their parent's scores and are not rescored");
    if (!config.write_subclips) notes.push_back("write_subclips is off: split sub-clips are not captioned");
    clock.Mark("cut");
  } else {
    notes.push_back("cut extraction disabled: S_tilde is empty, captions target " +
                    std::string(SetLabelName(final_label)));
    for (const auto& item : items_for(L[final_label])) {
      targets.push_back({item.clip_id, std::filesystem::absolute(engine.Rfv1Path(item)).string()});
    }
  }

  Json caption_summary = {{"requested", 0}, {"succeeded", 0}, {"failed", 0}};
  if (config.policy.run_captioning) {
    if (config.caption.endpoint.empty()) {
      notes.push_back("captioning skipped: no caption endpoint configured");
    } else {
      auto fs = engine.Caption(targets, writer);
      caption_summary = {{"requested", targets.size()},
                         {"succeeded", targets.size() - fs.size()},
                         {"failed", fs.size()}};
      failures.insert(failures.end(), fs.begin(), fs.end());
      clock.Mark("caption");
    }
  }

  RunResult result;
  result.manifest = writer.Finalize(out_dir / "manifest.jsonl");
  std::error_code ec;
  std::filesystem::remove(live_path, ec);
  result.ledger = ReplayManifest(result.manifest);
  for (SetLabel label : kAllSetLabels) {
    if (label != SetLabel::kExtracted && result.ledger[label] != L[label]) {
      throw Error(ErrorKind::kIntegrity, "replayed ledger disagrees with the run at " +
                                             std::string(SetLabelName(label)));
    }
  }
  result.ledger.CheckInvariants(ExtractParents(result.manifest));
  WriteText(out_dir / "ledger.json", result.ledger.ToJson().dump(2) + "\n");

  std::vector<CorpusView> views;
  views.push_back(MakeCorpusView("input", corpus_dir.string(), result.manifest));
  views.push_back(MakeCorpusView(std::string(SetLabelName(final_label)), corpus_dir.string(),
                                 result.manifest, final_label));
  if (!result.ledger[SetLabel::kExtracted].empty()) {
    views.push_back(MakeCorpusView("S_tilde", corpus_dir.string(), result.manifest,
                                   SetLabel::kExtracted));
  }
  CompareOptions opts;
  opts.edges = config.stats_edges;
  WriteReport(CompareCorpora(std::move(views), opts), out_dir / "stats");
  clock.Mark("finalize");

  std::sort(failures.begin(), failures.end(), [](const auto& a, const auto& b) {
    return std::tie(a.clip_id, a.stage) < std::tie(b.clip_id, b.stage);
  });
  std::set<std::string> skipped;
  Json failure_list = Json::array();
  for (const auto& f : failures) {
    skipped.insert(f.clip_id);
    failure_list.push_back({{"clip_id", f.clip_id}, {"stage", f.stage}, {"error", f.error}});
  }
  Json set_sizes = Json::object();
  for (SetLabel label : kAllSetLabels) {
    set_sizes[std::string(SetLabelName(label))] = result.ledger[label].size();
  }
  Json ignored = Json::array();
  for (const auto& p : listing.ignored) ignored.push_back(p.filename().string());

  result.summary = {{"corpus", corpus_dir.string()},
                    {"policy", config.policy.ToJson()},
                    {"workers", config.workers},
                    {"on_error", FailurePolicyName(config.on_error)},
                    {"clips", listing.items.size()},
                    {"ignored_files", ignored},
                    {"set_sizes", set_sizes},
                    {"drop_reasons", drop_reasons},
                    {"skipped", skipped.size()},
                    {"failures", failure_list},
                    {"captions", caption_summary},
                    {"stage_seconds", stage_seconds},
                    {"total_seconds", clock.Total()},
                    {"notes", notes}};
  WriteText(out_dir / "summary.json", result.summary.dump(2) + "\n");
  result.failures = std::move(failures);
  return result;
}

}  // namespace vidcurate
