// Metric distributions and side-by-side corpus comparison reports.
//
// Bins are half-open [e_i, e_{i+1}). Values below the first edge count as
// underflow and values at or above the last edge as overflow; both are part
// of `total` and of the normalized fractions.

#ifndef VIDCURATE_STATS_H_
#define VIDCURATE_STATS_H_

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "vidcurate/core.h"
#include "vidcurate/manifest.h"

namespace vidcurate {

inline constexpr const char* kCaptionLengthMetric = "caption_length";

struct MetricHistogram {
  std::string metric;
  std::vector<double> edges;
  std::vector<std::size_t> counts;  // edges.size() - 1 bins
  std::size_t underflow = 0;
  std::size_t overflow = 0;
  std::size_t total = 0;
  std::optional<double> mean;    // absent when total == 0
  std::optional<double> median;

  // [underflow, bins..., overflow] / total; all zero for an empty histogram.
  std::vector<double> Fractions() const;

  Json ToJson() const;
};

// Throws kConfig unless edges has >= 2 strictly increasing finite values.
MetricHistogram Histogram(std::span<const double> values, std::vector<double> edges,
                          std::string metric = {});

// lo, lo + step, ..., hi computed by multiplication, not accumulation.
std::vector<double> LinearEdges(double lo, double hi, double step);

// Defaults per metric name (see README); throws kConfig for unknown names.
std::vector<double> DefaultEdges(const std::string& metric);

// One corpus in a comparison: scores and captions drawn from a manifest,
// optionally restricted to the members of one ledger set.
struct CorpusView {
  std::string name;
  std::string source;
  std::string drawn_from = "all scored clips";
  ScoreTable scores;
  std::vector<CaptionRecord> captions;
  std::size_t clips = 0;
};

// Sub-clips of S_tilde take their parent's scores.
CorpusView MakeCorpusView(const std::string& name, const std::string& source,
                          const Manifest& manifest,
                          std::optional<SetLabel> restrict_to = std::nullopt);

struct ComparisonEntry {
  std::string corpus;
  std::optional<MetricHistogram> histogram;  // nullopt: metric missing
};

struct MetricComparison {
  std::string metric;
  std::vector<double> edges;
  std::vector<ComparisonEntry> corpora;
};

struct ComparisonReport {
  std::vector<CorpusView> corpora;
  std::vector<MetricComparison> metrics;

  Json ToJson() const;
};

struct CompareOptions {
  std::vector<Metric> metrics = {kAllMetrics.begin(), kAllMetrics.end()};
  std::map<std::string, std::vector<double>> edges;  // per-metric overrides
  bool allow_single = false;
};

// Throws kUsage for fewer than two corpora unless allow_single, and
// kConfig for duplicate corpus names.
ComparisonReport CompareCorpora(std::vector<CorpusView> corpora,
                                const CompareOptions& options = {});

// Writes <dir>/report.json and <dir>/<metric>__<corpus>.csv.
void WriteReport(const ComparisonReport& report, const std::filesystem::path& dir);

}  // namespace vidcurate

#endif  // VIDCURATE_STATS_H_
