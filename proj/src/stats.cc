#include "vidcurate/stats.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <set>

namespace vidcurate {

std::vector<double> MetricHistogram::Fractions() const {
  std::vector<double> out;
  out.reserve(counts.size() + 2);
  const double denom = total ? static_cast<double>(total) : 1.0;
  out.push_back(static_cast<double>(underflow) / denom);
  for (std::size_t c : counts) out.push_back(static_cast<double>(c) / denom);
  out.push_back(static_cast<double>(overflow) / denom);
  if (!total) std::fill(out.begin(), out.end(), 0.0);
  return out;
}

Json MetricHistogram::ToJson() const {
  Json j = {{"metric", metric},       {"edges", edges},       {"counts", counts},
            {"underflow", underflow}, {"overflow", overflow}, {"total", total},
            {"fractions", Fractions()}};
  j["mean"] = mean ? Json(*mean) : Json(nullptr);
  j["median"] = median ? Json(*median) : Json(nullptr);
  return j;
}

MetricHistogram Histogram(std::span<const double> values, std::vector<double> edges,
                          std::string metric) {
  if (edges.size() < 2) throw Error(ErrorKind::kConfig, "histogram needs at least 2 edges");
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (!std::isfinite(edges[i])) throw Error(ErrorKind::kConfig, "histogram edges must be finite");
    if (i > 0 && !(edges[i] > edges[i - 1])) {
      throw Error(ErrorKind::kConfig, "histogram edges must be strictly increasing");
    }
  }
  MetricHistogram h;
  h.metric = std::move(metric);
  h.edges = std::move(edges);
  h.counts.assign(h.edges.size() - 1, 0);
  double sum = 0.0;
  for (double v : values) {
    if (v < h.edges.front()) {
      ++h.underflow;
    } else if (v >= h.edges.back()) {
      ++h.overflow;
    } else {
      // First edge greater than v closes v's bin.
      auto it = std::upper_bound(h.edges.begin(), h.edges.end(), v);
      ++h.counts[static_cast<std::size_t>(it - h.edges.begin()) - 1];
    }
    sum += v;
  }
  h.total = values.size();
  if (h.total) {
    h.mean = sum / static_cast<double>(h.total);
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const std::size_t n = sorted.size();
    h.median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
  }
  return h;
}

std::vector<double> LinearEdges(double lo, double hi, double step) {
  if (!(step > 0.0) || !(hi > lo)) throw Error(ErrorKind::kConfig, "invalid linear edge range");
  const auto n = static_cast<std::size_t>(std::llround((hi - lo) / step));
  std::vector<double> e;
  for (std::size_t i = 0; i <= n; ++i) e.push_back(lo + static_cast<double>(i) * step);
  return e;
}

std::vector<double> DefaultEdges(const std::string& metric) {
  if (metric == "aesthetics") return LinearEdges(0.0, 10.0, 0.5);
  if (metric == "temporal_consistency") return LinearEdges(-1.0, 1.0, 0.05);
  if (metric == "motion") return LinearEdges(0.0, 16.0, 0.5);
  if (metric == "clarity") return {1.0, 10.0, 100.0, 1000.0, 10000.0};
  if (metric == kCaptionLengthMetric) return LinearEdges(0.0, 200.0, 10.0);
  throw Error(ErrorKind::kConfig, "no default edges for metric '" + metric + "'");
}

CorpusView MakeCorpusView(const std::string& name, const std::string& source,
                          const Manifest& manifest, std::optional<SetLabel> restrict_to) {
  CorpusView view;
  view.name = name;
  view.source = source;
  const ScoreTable all = ExtractScores(manifest);
  const std::vector<CaptionRecord> captions = ExtractCaptions(manifest);
  if (!restrict_to) {
    view.scores = all;
    view.captions = captions;
    std::set<std::string> ids;
    for (const auto& [m, per_clip] : all) {
      for (const auto& [id, v] : per_clip) ids.insert(id);
    }
    view.clips = ids.size();
    return view;
  }

  view.drawn_from = std::string(SetLabelName(*restrict_to));
  const SelectionLedger ledger = ReplayManifest(manifest);
  const auto parents = ExtractParents(manifest);
  const ClipSet& members = ledger[*restrict_to];
  view.clips = members.size();
  for (const auto& id : members) {
    auto p = parents.find(id);
    const std::string& scored_id = p == parents.end() ? id : p->second;
    for (const auto& [metric, per_clip] : all) {
      auto it = per_clip.find(scored_id);
      if (it != per_clip.end()) view.scores[metric][id] = it->second;
    }
  }
  for (const auto& c : captions) {
    if (members.count(c.clip_id)) view.captions.push_back(c);
  }
  return view;
}

Json ComparisonReport::ToJson() const {
  Json cs = Json::array();
  for (const auto& c : corpora) {
    cs.push_back({{"name", c.name},
                  {"source", c.source},
                  {"drawn_from", c.drawn_from},
                  {"clips", c.clips}});
  }
  Json ms = Json::object();
  for (const auto& m : metrics) {
    Json per = Json::array();
    for (const auto& e : m.corpora) {
      if (e.histogram) {
        Json h = e.histogram->ToJson();
        h["corpus"] = e.corpus;
        per.push_back(std::move(h));
      } else {
        per.push_back({{"corpus", e.corpus}, {"missing", true}});
      }
    }
    ms[m.metric] = {{"edges", m.edges}, {"corpora", std::move(per)}};
  }
  return {{"corpora", std::move(cs)}, {"metrics", std::move(ms)}};
}

ComparisonReport CompareCorpora(std::vector<CorpusView> corpora, const CompareOptions& options) {
  if (corpora.empty()) throw Error(ErrorKind::kUsage, "comparison needs at least one corpus");
  if (corpora.size() < 2 && !options.allow_single) {
    throw Error(ErrorKind::kUsage, "comparison needs at least 2 manifests (or allow_single)");
  }
  std::set<std::string> names;
  for (const auto& c : corpora) {
    if (!names.insert(c.name).second) {
      throw Error(ErrorKind::kConfig, "duplicate corpus name '" + c.name + "'");
    }
  }
  auto edges_for = [&](const std::string& metric) {
    auto it = options.edges.find(metric);
    return it != options.edges.end() ? it->second : DefaultEdges(metric);
  };

  ComparisonReport report;
  for (Metric m : options.metrics) {
    MetricComparison mc;
    mc.metric = std::string(MetricName(m));
    mc.edges = edges_for(mc.metric);
    for (const auto& c : corpora) {
      ComparisonEntry e{c.name, std::nullopt};
      auto it = c.scores.find(m);
      if (it != c.scores.end() && !it->second.empty()) {
        std::vector<double> values;
        for (const auto& [id, v] : it->second) values.push_back(v.value);
        e.histogram = Histogram(values, mc.edges, mc.metric);
      }
      mc.corpora.push_back(std::move(e));
    }
    report.metrics.push_back(std::move(mc));
  }

  const bool any_captions = std::any_of(corpora.begin(), corpora.end(),
                                        [](const auto& c) { return !c.captions.empty(); });
  if (any_captions) {
    MetricComparison mc;
    mc.metric = kCaptionLengthMetric;
    mc.edges = edges_for(mc.metric);
    for (const auto& c : corpora) {
      ComparisonEntry e{c.name, std::nullopt};
      if (!c.captions.empty()) {
        std::vector<double> lengths;
        for (const auto& cap : c.captions) lengths.push_back(static_cast<double>(cap.word_count));
        e.histogram = Histogram(lengths, mc.edges, mc.metric);
      }
      mc.corpora.push_back(std::move(e));
    }
    report.metrics.push_back(std::move(mc));
  }
  report.corpora = std::move(corpora);
  return report;
}

namespace {

std::string FileSafe(const std::string& s) {
  std::string out;
  for (char c : s) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '.' || c == '-' || c == '_';
    out.push_back(ok ? c : '_');
  }
  return out;
}

std::string Num(double v) { return Json(v).dump(); }

void WriteFile(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error(ErrorKind::kIo, "cannot write " + path.string());
}

}  // namespace

void WriteReport(const ComparisonReport& report, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::kIo, "cannot create " + dir.string() + ": " + ec.message());
  WriteFile(dir / "report.json", report.ToJson().dump(2) + "\n");
  for (const auto& m : report.metrics) {
    for (const auto& e : m.corpora) {
      if (!e.histogram) continue;
      const auto& h = *e.histogram;
      const auto fractions = h.Fractions();
      std::string csv = "bin_lo,bin_hi,count,fraction\n";
      csv += "-inf," + Num(h.edges.front()) + "," + std::to_string(h.underflow) + "," +
             Num(fractions.front()) + "\n";
      for (std::size_t i = 0; i < h.counts.size(); ++i) {
        csv += Num(h.edges[i]) + "," + Num(h.edges[i + 1]) + "," + std::to_string(h.counts[i]) +
               "," + Num(fractions[i + 1]) + "\n";
      }
      csv += Num(h.edges.back()) + ",inf," + std::to_string(h.overflow) + "," +
             Num(fractions.back()) + "\n";
      WriteFile(dir / (FileSafe(m.metric) + "__" + FileSafe(e.corpus) + ".csv"), csv);
    }
  }
}

}  // namespace vidcurate
