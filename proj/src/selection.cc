#include "vidcurate/selection.h"

#include <algorithm>
#include <cmath>

namespace vidcurate {

namespace {

void RequireNonEmpty(const Population& population, const char* what) {
  if (population.empty()) {
    throw Error(ErrorKind::kEmptyInput, std::string(what) + " over an empty population");
  }
}

}  // namespace

std::size_t TopFractionCount(std::size_t n, double fraction) {
  // The epsilon absorbs representation error such as 0.29 * 100 = 28.999...
  const double raw = std::floor(fraction * static_cast<double>(n) + 1e-9);
  const auto k = static_cast<std::size_t>(std::max(0.0, raw));
  return std::clamp<std::size_t>(k, 1, n);
}

ClipSet SelectTopFraction(const Population& population, double fraction) {
  RequireNonEmpty(population, "top_fraction selection");
  if (!(fraction > 0.0 && fraction <= 1.0)) {
    throw Error(ErrorKind::kConfig, "top_fraction must lie in (0,1]");
  }
  std::vector<std::pair<std::string, double>> ranked(population.begin(), population.end());
  // Input is id-ordered, so a stable sort on score alone keeps smaller ids first.
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t k = TopFractionCount(ranked.size(), fraction);
  ClipSet kept;
  for (std::size_t i = 0; i < k; ++i) kept.insert(ranked[i].first);
  return kept;
}

std::map<std::string, double> PercentileRanks(const Population& population) {
  std::map<std::string, double> ranks;
  const std::size_t n = population.size();
  if (n == 0) return ranks;
  if (n == 1) {
    ranks[population.begin()->first] = 50.0;
    return ranks;
  }
  std::vector<std::pair<double, std::string>> sorted;
  sorted.reserve(n);
  for (const auto& [id, score] : population) sorted.emplace_back(score, id);
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && sorted[j + 1].first == sorted[i].first) ++j;
    // 1-based ranks i+1 .. j+1 share their mean.
    const double mean_rank = 0.5 * static_cast<double>((i + 1) + (j + 1));
    const double r = 100.0 * (mean_rank - 1.0) / static_cast<double>(n - 1);
    for (std::size_t t = i; t <= j; ++t) ranks[sorted[t].second] = r;
    i = j + 1;
  }
  return ranks;
}

ClipSet SelectBand(const Population& population, double p_lo, double p_hi) {
  RequireNonEmpty(population, "band selection");
  if (!(p_lo >= 0.0 && p_hi <= 100.0 && p_lo <= p_hi)) {
    throw Error(ErrorKind::kConfig, "band requires 0 <= p_lo <= p_hi <= 100");
  }
  ClipSet kept;
  for (const auto& [id, r] : PercentileRanks(population)) {
    if (r >= p_lo && r <= p_hi) kept.insert(id);
  }
  return kept;
}

ClipSet SelectAbsolute(const Population& population, double lo, double hi) {
  ClipSet kept;
  for (const auto& [id, score] : population) {
    if (score >= lo && score <= hi) kept.insert(id);
  }
  return kept;
}

ClipSet ApplyPolicy(const BandPolicy& policy, const Population& population) {
  switch (policy.mode) {
    case BandPolicy::Mode::kTopFraction:
      return SelectTopFraction(population, policy.fraction);
    case BandPolicy::Mode::kPercentileBand:
      return SelectBand(population, policy.p_lo, policy.p_hi);
    case BandPolicy::Mode::kAbsolute:
      return SelectAbsolute(population, policy.lo, policy.hi);
  }
  return {};
}

ClipSet Intersect(const std::vector<ClipSet>& sets) {
  if (sets.empty()) throw Error(ErrorKind::kEmptyInput, "intersection of no sets");
  ClipSet out = sets.front();
  for (std::size_t i = 1; i < sets.size(); ++i) {
    ClipSet next;
    std::set_intersection(out.begin(), out.end(), sets[i].begin(), sets[i].end(),
                          std::inserter(next, next.end()));
    out = std::move(next);
  }
  return out;
}

PipelinePolicy PipelinePolicy::Full() {
  PipelinePolicy p;
  p.name = Name::kFull;
  p.aesthetics = BandPolicy::TopFraction(0.20);
  p.temporal = BandPolicy::PercentileBand(5, 95);
  p.motion = BandPolicy::PercentileBand(5, 95);
  p.clarity = BandPolicy::TopFraction(0.30);
  p.run_cut_extraction = true;
  p.run_captioning = true;
  return p;
}

PipelinePolicy PipelinePolicy::Lite() {
  PipelinePolicy p;
  p.name = Name::kLite;
  p.aesthetics = BandPolicy::TopFraction(0.90);
  p.temporal.reset();
  p.motion = BandPolicy::PercentileBand(5, 95);
  p.clarity.reset();
  p.run_cut_extraction = false;
  p.run_captioning = false;
  return p;
}

PipelinePolicy PipelinePolicy::ForName(const std::string& name) {
  if (name == "full") return Full();
  if (name == "lite") return Lite();
  throw Error(ErrorKind::kConfig, "unknown policy '" + name + "' (expected full|lite)");
}

Json PipelinePolicy::ToJson() const {
  Json j = {{"name", name_string()},
            {"aesthetics", aesthetics.ToJson()},
            {"motion", motion.ToJson()},
            {"run_cut_extraction", run_cut_extraction},
            {"run_captioning", run_captioning}};
  j["temporal"] = temporal ? temporal->ToJson() : Json(nullptr);
  j["clarity"] = clarity ? clarity->ToJson() : Json(nullptr);
  return j;
}

Population PopulationFor(const ScoreTable& scores, Metric metric) {
  Population pop;
  auto it = scores.find(metric);
  if (it == scores.end()) return pop;
  for (const auto& [id, v] : it->second) pop[id] = v.value;
  return pop;
}

std::vector<ManifestEntry> SelectionVerdicts(SetLabel label,
                                             const Population& population,
                                             const ClipSet& kept,
                                             const BandPolicy& policy) {
  std::map<std::string, double> ranks;
  if (policy.mode == BandPolicy::Mode::kPercentileBand) ranks = PercentileRanks(population);
  std::vector<ManifestEntry> out;
  out.reserve(population.size());
  for (const auto& [id, score] : population) {
    Json extra = {{"score", score}, {"rule", policy.Describe()}};
    if (!ranks.empty()) extra["percentile"] = ranks[id];
    out.push_back(ManifestEntry::Verdict(label, id, kept.count(id) > 0, std::move(extra)));
  }
  return out;
}

std::vector<ManifestEntry> IntersectionVerdicts(
    SetLabel label, const ClipSet& universe,
    const std::vector<std::pair<SetLabel, const ClipSet*>>& parts) {
  std::vector<ManifestEntry> out;
  out.reserve(universe.size());
  for (const auto& id : universe) {
    Json missing = Json::array();
    for (const auto& [part_label, set] : parts) {
      if (!set->count(id)) missing.push_back(std::string(SetLabelName(part_label)));
    }
    const bool keep = missing.empty();
    Json extra = Json::object();
    if (!keep) extra["excluded_by"] = std::move(missing);
    out.push_back(ManifestEntry::Verdict(label, id, keep, std::move(extra)));
  }
  return out;
}

OfflineSelection SelectFromScores(const ScoreTable& scores,
                                  const PipelinePolicy& policy) {
  OfflineSelection out;
  auto select = [&](SetLabel label, Metric metric, const BandPolicy& band) {
    const Population pop = PopulationFor(scores, metric);
    if (pop.empty()) {
      throw Error(ErrorKind::kEmptyInput,
                  "no " + std::string(MetricName(metric)) + " scores to select from");
    }
    ClipSet kept = ApplyPolicy(band, pop);
    auto v = SelectionVerdicts(label, pop, kept, band);
    out.verdicts.insert(out.verdicts.end(), v.begin(), v.end());
    out.ledger[label] = std::move(kept);
  };

  ClipSet universe;
  for (const auto& [metric, per_clip] : scores) {
    for (const auto& [id, v] : per_clip) universe.insert(id);
  }

  if (policy.is_full()) {
    select(SetLabel::kAesthetics, Metric::kAesthetics, policy.aesthetics);
    select(SetLabel::kTemporal, Metric::kTemporalConsistency, *policy.temporal);
    select(SetLabel::kMotion, Metric::kMotion, policy.motion);
    auto& L = out.ledger;
    L[SetLabel::kIntersection] =
        Intersect({L[SetLabel::kAesthetics], L[SetLabel::kTemporal], L[SetLabel::kMotion]});
    auto iv = IntersectionVerdicts(SetLabel::kIntersection, universe,
                                   {{SetLabel::kAesthetics, &L[SetLabel::kAesthetics]},
                                    {SetLabel::kTemporal, &L[SetLabel::kTemporal]},
                                    {SetLabel::kMotion, &L[SetLabel::kMotion]}});
    out.verdicts.insert(out.verdicts.end(), iv.begin(), iv.end());

    Population clarity;
    const Population all_clarity = PopulationFor(scores, Metric::kClarity);
    for (const auto& id : L[SetLabel::kIntersection]) {
      auto it = all_clarity.find(id);
      if (it != all_clarity.end()) {
        clarity.emplace(id, it->second);
      } else {
        Json extra = {{"reason", "no clarity score"}};
        out.verdicts.push_back(ManifestEntry::Verdict(SetLabel::kClear, id, false, extra));
      }
    }
    if (!clarity.empty()) {
      ClipSet kept = ApplyPolicy(*policy.clarity, clarity);
      auto v = SelectionVerdicts(SetLabel::kClear, clarity, kept, *policy.clarity);
      out.verdicts.insert(out.verdicts.end(), v.begin(), v.end());
      L[SetLabel::kClear] = std::move(kept);
    }
  } else {
    select(SetLabel::kAestheticsLite, Metric::kAesthetics, policy.aesthetics);
    select(SetLabel::kMotionLite, Metric::kMotion, policy.motion);
    auto& L = out.ledger;
    L[SetLabel::kLite] = Intersect({L[SetLabel::kAestheticsLite], L[SetLabel::kMotionLite]});
    auto iv = IntersectionVerdicts(SetLabel::kLite, universe,
                                   {{SetLabel::kAestheticsLite, &L[SetLabel::kAestheticsLite]},
                                    {SetLabel::kMotionLite, &L[SetLabel::kMotionLite]}});
    out.verdicts.insert(out.verdicts.end(), iv.begin(), iv.end());
  }
  return out;
}

}  // namespace vidcurate
