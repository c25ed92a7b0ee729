#include <algorithm>
#include <random>

#include "doctest.h"
#include "vidcurate/selection.h"

using namespace vidcurate;

namespace {

std::string Id(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "clip_%04zu", i);
  return buf;
}

// Distinct scores: a seeded permutation of 0..n-1 scaled.
Population DistinctScores(std::size_t n, std::uint64_t seed) {
  std::vector<double> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = 0.01 * static_cast<double>(i);
  std::shuffle(v.begin(), v.end(), std::mt19937_64(seed));
  Population p;
  for (std::size_t i = 0; i < n; ++i) p[Id(i)] = v[i];
  return p;
}

// Scores from a small alphabet so tie groups are large.
Population TiedScores(std::size_t n, std::uint64_t seed, int levels) {
  std::mt19937_64 rng(seed);
  Population p;
  for (std::size_t i = 0; i < n; ++i) p[Id(i)] = static_cast<double>(rng() % levels) * 0.25;
  return p;
}

// Full sort by (score desc, id asc), take the first k.
ClipSet OracleTop(const Population& p, std::size_t k) {
  std::vector<std::pair<double, std::string>> v;
  for (const auto& [id, s] : p) v.emplace_back(-s, id);
  std::sort(v.begin(), v.end());
  ClipSet out;
  for (std::size_t i = 0; i < k; ++i) out.insert(v[i].second);
  return out;
}

// Mean 1-based rank by counting; never sorts.
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

template <typename Fn>
ErrorKind KindOf(Fn fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an Error");
  return ErrorKind::kPipeline;
}

}  // namespace

TEST_CASE("top fraction counts") {
  CHECK(TopFractionCount(1000, 0.20) == 200);
  CHECK(TopFractionCount(1000, 0.90) == 900);
  CHECK(TopFractionCount(1000, 0.30) == 300);
  CHECK(TopFractionCount(100, 0.29) == 29);
  CHECK(TopFractionCount(3, 0.1) == 1);
  CHECK(TopFractionCount(7, 1.0) == 7);
  CHECK(TopFractionCount(1, 0.2) == 1);
}

TEST_CASE("top fraction membership matches a sort oracle") {
  const Population p = DistinctScores(1000, 17);
  for (double f : {0.20, 0.90, 0.30}) {
    const ClipSet kept = SelectTopFraction(p, f);
    CHECK(kept.size() == static_cast<std::size_t>(f * 1000 + 0.5));
    CHECK(kept == OracleTop(p, kept.size()));
  }
  CHECK(SelectTopFraction(p, 1.0).size() == 1000);
}

TEST_CASE("top fraction breaks ties by smaller id") {
  const Population p = {{"d", 1.0}, {"c", 2.0}, {"b", 2.0}, {"a", 0.5}, {"e", 2.0}};
  CHECK(SelectTopFraction(p, 0.4) == ClipSet{"b", "c"});
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Population t = TiedScores(300, seed, 7);
    for (double f : {0.1, 0.33, 0.5}) {
      CHECK(SelectTopFraction(t, f) == OracleTop(t, TopFractionCount(300, f)));
    }
  }
}

TEST_CASE("selection edge cases") {
  CHECK(KindOf([] { SelectTopFraction({}, 0.5); }) == ErrorKind::kEmptyInput);
  CHECK(KindOf([] { SelectBand({}, 5, 95); }) == ErrorKind::kEmptyInput);
  CHECK(KindOf([] { SelectTopFraction({{"a", 1}}, 0.0); }) == ErrorKind::kConfig);
  CHECK(KindOf([] { SelectBand({{"a", 1}}, 60, 40); }) == ErrorKind::kConfig);
  const Population one = {{"solo", 3.0}};
  CHECK(PercentileRanks(one).at("solo") == 50.0);
  CHECK(SelectBand(one, 5, 95) == ClipSet{"solo"});
  CHECK(SelectBand(one, 60, 95).empty());
  CHECK(SelectTopFraction(one, 0.01) == ClipSet{"solo"});
  const Population p = TiedScores(50, 3, 5);
  CHECK(SelectBand(p, 0, 100).size() == 50);
  CHECK(SelectAbsolute({{"a", 1}, {"b", 2}, {"c", 3}}, 1.5, 3) == ClipSet{"b", "c"});
}

TEST_CASE("percentile ranks") {
  const Population p = {{"a", 1}, {"b", 2}, {"c", 2}, {"d", 4}, {"e", 5}};
  const auto r = PercentileRanks(p);
  CHECK(r.at("a") == 0.0);
  CHECK(r.at("b") == 37.5);
  CHECK(r.at("c") == 37.5);
  CHECK(r.at("d") == 75.0);
  CHECK(r.at("e") == 100.0);
}

TEST_CASE("band membership matches a counting oracle") {
  CHECK(SelectBand(DistinctScores(1000, 5), 5, 95) == OracleBand(DistinctScores(1000, 5), 5, 95));
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Population p = TiedScores(400, seed, 3 + static_cast<int>(seed) * 5);
    for (auto [lo, hi] : {std::pair{5.0, 95.0}, {20.0, 80.0}, {0.0, 50.0}, {50.0, 50.0}}) {
      CHECK(SelectBand(p, lo, hi) == OracleBand(p, lo, hi));
    }
  }
  // Everyone tied: all share rank 50.
  Population flat;
  for (int i = 0; i < 30; ++i) flat[Id(i)] = 1.0;
  CHECK(SelectBand(flat, 5, 95).size() == 30);
  CHECK(SelectBand(flat, 60, 95).empty());
}

TEST_CASE("intersection agrees with per-element predicates") {
  CHECK(KindOf([] { Intersect({}); }) == ErrorKind::kEmptyInput);
  std::mt19937_64 rng(99);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<ClipSet> sets(1 + rng() % 4);
    for (auto& s : sets) {
      for (int i = 0; i < 40; ++i) {
        if (rng() % 3) s.insert(Id(i));
      }
    }
    ClipSet expected;
    for (int i = 0; i < 40; ++i) {
      bool all = true;
      for (const auto& s : sets) all = all && s.count(Id(i));
      if (all) expected.insert(Id(i));
    }
    CHECK(Intersect(sets) == expected);
  }
}

TEST_CASE("offline selection composes the sets") {
  std::mt19937_64 rng(4);
  ScoreTable t;
  for (std::size_t i = 0; i < 200; ++i) {
    for (Metric m : kAllMetrics) {
      t[m][Id(i)] = {static_cast<double>(rng() % 1000) / 10.0, "reference", {}};
    }
  }
  auto pop = [&](Metric m) { return PopulationFor(t, m); };

  SUBCASE("full") {
    const auto out = SelectFromScores(t, PipelinePolicy::Full());
    const auto& L = out.ledger;
    const ClipSet a = OracleTop(pop(Metric::kAesthetics), TopFractionCount(200, 0.2));
    const ClipSet tc = OracleBand(pop(Metric::kTemporalConsistency), 5, 95);
    const ClipSet mo = OracleBand(pop(Metric::kMotion), 5, 95);
    CHECK(L[SetLabel::kAesthetics] == a);
    CHECK(L[SetLabel::kTemporal] == tc);
    CHECK(L[SetLabel::kMotion] == mo);
    ClipSet si;
    for (const auto& id : a) {
      if (tc.count(id) && mo.count(id)) si.insert(id);
    }
    CHECK(L[SetLabel::kIntersection] == si);
    Population clarity;
    for (const auto& id : si) clarity[id] = pop(Metric::kClarity).at(id);
    CHECK(L[SetLabel::kClear] == OracleTop(clarity, TopFractionCount(si.size(), 0.3)));
    CHECK_NOTHROW(L.CheckInvariants());
    // One verdict per clip at each stage.
    std::map<std::string, std::size_t> per_stage;
    for (const auto& v : out.verdicts) ++per_stage[v.stage];
    CHECK(per_stage["S_A"] == 200);
    CHECK(per_stage["S_I"] == 200);
    CHECK(per_stage["S"] == si.size());
  }
  SUBCASE("lite") {
    const auto L = SelectFromScores(t, PipelinePolicy::Lite()).ledger;
    const ClipSet a = OracleTop(pop(Metric::kAesthetics), TopFractionCount(200, 0.9));
    const ClipSet mo = OracleBand(pop(Metric::kMotion), 5, 95);
    ClipSet expected;
    std::set_intersection(a.begin(), a.end(), mo.begin(), mo.end(),
                          std::inserter(expected, expected.end()));
    CHECK(L[SetLabel::kLite] == expected);
    CHECK(L[SetLabel::kIntersection].empty());
  }
  SUBCASE("missing clarity scores drop the clip") {
    t[Metric::kClarity].clear();
    const auto out = SelectFromScores(t, PipelinePolicy::Full());
    CHECK(out.ledger[SetLabel::kClear].empty());
    for (const auto& v : out.verdicts) {
      if (v.stage == "S") CHECK(v.payload["reason"] == "no clarity score");
    }
  }
}

TEST_CASE("top fraction keeps the high end of the distribution") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Population p = TiedScores(500, seed, 40);
    const ClipSet kept = SelectTopFraction(p, 0.2);
    double kept_min = 1e300, dropped_max = -1e300, kept_sum = 0, all_sum = 0;
    for (const auto& [id, s] : p) {
      all_sum += s;
      if (kept.count(id)) {
        kept_min = std::min(kept_min, s);
        kept_sum += s;
      } else {
        dropped_max = std::max(dropped_max, s);
      }
    }
    CHECK(kept_min >= dropped_max);
    CHECK(kept_sum / kept.size() > all_sum / p.size());
  }
}

TEST_CASE("policy presets") {
  const auto full = PipelinePolicy::ForName("full");
  CHECK(full.aesthetics == BandPolicy::TopFraction(0.2));
  CHECK(*full.clarity == BandPolicy::TopFraction(0.3));
  CHECK(*full.temporal == BandPolicy::PercentileBand(5, 95));
  const auto lite = PipelinePolicy::ForName("lite");
  CHECK(lite.aesthetics == BandPolicy::TopFraction(0.9));
  CHECK_FALSE(lite.clarity.has_value());
  CHECK_FALSE(lite.run_cut_extraction);
  CHECK(KindOf([] { PipelinePolicy::ForName("medium"); }) == ErrorKind::kConfig);
}
