// Staged curation runs: configuration, corpus listing, the per-stage
// workers shared by the CLI subcommands, and the end-to-end `run`.
//
// Stages: score (aesthetics, temporal, motion in one parallel pass), select
// S_A/S_T/S_M and S_I, clarity over S_I only, select S, cut extraction over
// S, captioning. The lite policy scores aesthetics and motion and stops at
// S_prime.

#ifndef VIDCURATE_PIPELINE_H_
#define VIDCURATE_PIPELINE_H_

#include <atomic>
#include <chrono>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "vidcurate/caption.h"
#include "vidcurate/core.h"
#include "vidcurate/cutdetect.h"
#include "vidcurate/ingest.h"
#include "vidcurate/manifest.h"
#include "vidcurate/scorers.h"
#include "vidcurate/selection.h"
#include "vidcurate/thread_pool.h"

namespace vidcurate {

enum class FailurePolicy { kSkip, kAbort };

struct PipelineConfig {
  PipelinePolicy policy = PipelinePolicy::Full();
  std::size_t workers = 4;
  FailurePolicy on_error = FailurePolicy::kSkip;
  ScorerBindings scorers = ReferenceBindings();
  std::size_t sidecar_processes = 0;  // 0: one per worker
  std::chrono::milliseconds sidecar_timeout{60000};
  std::optional<SamplingPlan> sampling;  // default: DefaultSamplingPlan per clip
  std::string decoder;                   // command template for non-RFV1 sources
  std::chrono::milliseconds decoder_timeout{120000};
  CutConfig cut;
  CaptionClientConfig caption;
  bool write_subclips = true;
  std::map<std::string, std::vector<double>> stats_edges;

  void Validate() const;
  Json ToJson() const;

  // Applies the fields present in `j` on top of `base`. Unknown fields are
  // rejected with kConfig.
  static PipelineConfig Overlay(PipelineConfig base, const Json& j);
  static PipelineConfig FromJson(const Json& j);
  static PipelineConfig Load(const std::filesystem::path& path);
  static PipelineConfig Load(const std::filesystem::path& path, PipelineConfig base);
};

struct CorpusItem {
  std::string clip_id;
  std::filesystem::path source;
  bool needs_decode = false;
};

struct CorpusListing {
  std::vector<CorpusItem> items;  // sorted by clip_id
  std::vector<std::filesystem::path> ignored;
};

// *.rfv1 files always; other regular files (except *.json, *.jsonl) only
// when `with_decoder`. Throws kIntegrity on duplicate clip ids and kIo for
// an unreadable directory.
CorpusListing ListCorpus(const std::filesystem::path& dir, bool with_decoder);

struct StageFailure {
  std::string clip_id;
  std::string stage;
  std::string error;
};

// Per-stage work shared by `run` and the stage subcommands. Every method
// appends its entries to `out` and returns per-clip failures sorted by clip
// id; under FailurePolicy::kAbort the first failure is thrown as kPipeline
// once the stage has drained.
class Engine {
 public:
  // `work_dir` holds decoded copies of non-RFV1 sources.
  Engine(PipelineConfig config, std::filesystem::path work_dir);
  ~Engine();

  const PipelineConfig& config() const { return config_; }

  std::vector<StageFailure> Score(const std::vector<CorpusItem>& items,
                                  const std::vector<Metric>& metrics, ManifestWriter& out);

  // Cut entries plus S_tilde verdicts; sub-clips are written to
  // `subclip_dir` when non-empty. Caption targets for the kept members are
  // appended to `targets` when given.
  std::vector<StageFailure> Cut(const std::vector<CorpusItem>& items,
                                const std::filesystem::path& subclip_dir, ManifestWriter& out,
                                std::vector<CaptionTarget>* targets = nullptr);

  std::vector<StageFailure> Caption(const std::vector<CaptionTarget>& targets,
                                    ManifestWriter& out);

  // RFV1 path for the item, decoding into the work dir on first use.
  std::filesystem::path Rfv1Path(const CorpusItem& item);

 private:
  DecodedClip Load(const CorpusItem& item);
  ScoreValue ScoreOne(Metric metric, const DecodedClip& clip,
                      const std::filesystem::path& rfv1_path, Json& extra);
  std::vector<StageFailure> Finish(const std::string& stage,
                                   std::vector<StageFailure> failures) const;

  PipelineConfig config_;
  std::filesystem::path work_dir_;
  ThreadPool pool_;
  std::map<std::string, std::unique_ptr<SidecarPool>> sidecars_;
  std::mutex decode_mu_;
  std::map<std::string, std::filesystem::path> decoded_;
};

struct RunResult {
  Manifest manifest;  // finalized
  SelectionLedger ledger;
  Json summary;
  std::vector<StageFailure> failures;
};

// Runs every stage over `corpus_dir` and writes manifest.jsonl,
// ledger.json, summary.json, stats/ and subclips/ under `out_dir`.
RunResult RunPipeline(const std::filesystem::path& corpus_dir, const PipelineConfig& config,
                      const std::filesystem::path& out_dir);

// Verdicts recording clips that could not be scored at `label`.
ManifestEntry SkipVerdict(SetLabel label, const StageFailure& failure);

}  // namespace vidcurate

#endif  // VIDCURATE_PIPELINE_H_
