// Corpus-relative selection over score populations and the set algebra
// that composes the curated subsets.

#ifndef VIDCURATE_SELECTION_H_
#define VIDCURATE_SELECTION_H_

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "vidcurate/core.h"
#include "vidcurate/manifest.h"

namespace vidcurate {

// clip_id -> score. std::map keeps ids in lexicographic order.
using Population = std::map<std::string, double>;

// k = max(1, floor(fraction * N)) highest scores; equal scores prefer the
// lexicographically smaller id. Throws kEmptyInput on an empty population.
ClipSet SelectTopFraction(const Population& population, double fraction);

// Number kept by SelectTopFraction for a population of size n.
std::size_t TopFractionCount(std::size_t n, double fraction);

// Percentile rank r = 100 (rank - 1) / (N - 1) with 1-based ascending
// ranks; tied scores share the mean rank of their group; N = 1 gives 50.
std::map<std::string, double> PercentileRanks(const Population& population);

// Keeps ids with p_lo <= r <= p_hi. Throws kEmptyInput on an empty population.
ClipSet SelectBand(const Population& population, double p_lo, double p_hi);

// Keeps ids with lo <= score <= hi.
ClipSet SelectAbsolute(const Population& population, double lo, double hi);

ClipSet ApplyPolicy(const BandPolicy& policy, const Population& population);

// Exact intersection. Requires at least one set.
ClipSet Intersect(const std::vector<ClipSet>& sets);

struct PipelinePolicy {
  enum class Name { kFull, kLite };

  Name name = Name::kFull;
  BandPolicy aesthetics;
  std::optional<BandPolicy> temporal;  // full only
  BandPolicy motion;
  std::optional<BandPolicy> clarity;   // full only
  bool run_cut_extraction = true;
  bool run_captioning = true;

  static PipelinePolicy Full();
  static PipelinePolicy Lite();
  static PipelinePolicy ForName(const std::string& name);

  std::string name_string() const { return name == Name::kFull ? "full" : "lite"; }
  bool is_full() const { return name == Name::kFull; }

  Json ToJson() const;
};

Population PopulationFor(const ScoreTable& scores, Metric metric);

// One verdict per population member at `label`, recording score, rule and
// (for bands) percentile rank.
std::vector<ManifestEntry> SelectionVerdicts(SetLabel label,
                                             const Population& population,
                                             const ClipSet& kept,
                                             const BandPolicy& policy);

// One verdict per member of `universe` at `label`; dropped members list the
// component sets that excluded them.
std::vector<ManifestEntry> IntersectionVerdicts(
    SetLabel label, const ClipSet& universe,
    const std::vector<std::pair<SetLabel, const ClipSet*>>& parts);

// Offline selection from recorded scores: produces the ledger up to S (full;
// clarity applied to S_I members that have clarity scores) or S_prime
// (lite), plus the verdict entries that record it.
struct OfflineSelection {
  SelectionLedger ledger;
  std::vector<ManifestEntry> verdicts;
};

OfflineSelection SelectFromScores(const ScoreTable& scores,
                                  const PipelinePolicy& policy);

}  // namespace vidcurate

#endif  // VIDCURATE_SELECTION_H_
