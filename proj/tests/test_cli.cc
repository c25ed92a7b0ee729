#include "caption_server.h"
#include "doctest.h"
#include "support.h"
#include "vidcurate/manifest.h"
#include "vidcurate/process.h"

using namespace vidcurate;
using vidcurate::testing::CaptionServer;
using vidcurate::testing::CliPath;
using vidcurate::testing::ReadFile;
using vidcurate::testing::SourceDir;
using vidcurate::testing::TempDir;
using vidcurate::testing::WriteFile;

namespace {

CommandResult Cli(const std::string& args, const std::string& env = {}) {
  // Keep a config from the caller's environment out of the tests.
  const std::string prefix = env.empty() ? "env -u VIDCURATE_CONFIG " : "env " + env + " ";
  return RunCommand(prefix + ShellQuote(CliPath()) + " " + args, std::chrono::seconds(120));
}

std::string Q(const std::filesystem::path& p) { return ShellQuote(p.string()); }

void Synth(const std::filesystem::path& dir, const std::string& spec = {}) {
  const std::string s =
      spec.empty() ? Q(SourceDir() / "configs" / "planted100_spec.json") : ShellQuote(spec);
  const auto r = Cli("synth --spec " + s + " --seed 42 --out " + Q(dir));
  REQUIRE(r.exit_status == 0);
}

}  // namespace

TEST_CASE("help lists subcommands, flags and defaults") {
  const auto top = Cli("--help");
  CHECK(top.exit_status == 0);
  for (const char* s : {"score", "select", "cut", "caption", "run", "stats", "synth"}) {
    CHECK(top.stdout_data.find(s) != std::string::npos);
  }
  const auto run = Cli("run --help");
  CHECK(run.exit_status == 0);
  for (const char* s : {"--corpus", "--out", "--config", "--policy", "--workers", "--on-error",
                        "default: 4", "default: skip", "VIDCURATE_CONFIG"}) {
    CHECK(run.stdout_data.find(s) != std::string::npos);
  }
}

TEST_CASE("usage errors exit with status 2") {
  CHECK(Cli("").exit_status == 2);
  CHECK(Cli("frobnicate").exit_status == 2);
  CHECK(Cli("run --corpus x").exit_status == 2);
  CHECK(Cli("run --corpus x --out y --bogus").exit_status == 2);
  CHECK(Cli("run --corpus x --out y --workers 0").exit_status == 2);
  CHECK(Cli("run --corpus x --out y --policy medium").exit_status == 2);
}

TEST_CASE("run reports set sizes and honours the config") {
  TempDir dir("cli_run");
  Synth(dir / "corpus");

  const auto r = Cli("run --corpus " + Q(dir / "corpus") + " --out " + Q(dir / "out"));
  REQUIRE(r.exit_status == 0);
  CHECK(r.stderr_data.find("S_A: 20") != std::string::npos);

  const auto planted = SourceDir() / "configs" / "planted100.json";
  const auto env = Cli("run --corpus " + Q(dir / "corpus") + " --out " + Q(dir / "env"),
                       "VIDCURATE_CONFIG=" + Q(planted));
  REQUIRE(env.exit_status == 0);
  CHECK(env.stderr_data.find("S: 20") != std::string::npos);
  const Json ledger = Json::parse(ReadFile(dir / "env" / "ledger.json"));
  for (const auto& id : ledger["S"]) CHECK(id.get<std::string>().rfind("good_", 0) == 0);

  // An explicit --config wins over the environment.
  WriteFile(dir / "lite.json", R"({"policy": "lite", "workers": 2})");
  const auto lite = Cli("run --corpus " + Q(dir / "corpus") + " --out " + Q(dir / "lite") +
                            " --config " + Q(dir / "lite.json"),
                        "VIDCURATE_CONFIG=" + Q(planted));
  REQUIRE(lite.exit_status == 0);
  const Json summary = Json::parse(ReadFile(dir / "lite" / "summary.json"));
  CHECK(summary["policy"]["name"] == "lite");
  CHECK(summary["workers"] == 2);
}

TEST_CASE("stage failures exit with status 1") {
  TempDir dir("cli_fail");
  Synth(dir / "corpus", R"({"good":3})");
  WriteFile(dir / "corpus" / "broken.rfv1", "nope");
  const std::string base = "run --corpus " + Q(dir / "corpus") + " --out " + Q(dir / "out");
  CHECK(Cli(base).exit_status == 0);
  const auto abort = Cli(base + " --on-error abort");
  CHECK(abort.exit_status == 1);
  CHECK(abort.stderr_data.find("broken") != std::string::npos);
  CHECK(Cli("run --corpus " + Q(dir / "missing") + " --out " + Q(dir / "o2")).exit_status == 1);
  WriteFile(dir / "bad.json", R"({"wokers": 2})");
  CHECK(Cli(base + " --config " + Q(dir / "bad.json")).exit_status == 1);
}

TEST_CASE("stage subcommands chain like run") {
  TempDir dir("cli_chain");
  Synth(dir / "corpus", R"({"good":6,"pan":4,"multi_scene":4,"dull":2})");
  const std::string corpus = Q(dir / "corpus");
  // Keep everything so the multi-scene clips are split.
  WriteFile(dir / "keep.json", R"({"policy": {"name": "full",
    "aesthetics": {"mode": "top_fraction", "fraction": 1.0},
    "temporal": {"mode": "percentile_band", "p_lo": 0, "p_hi": 100},
    "motion": {"mode": "percentile_band", "p_lo": 0, "p_hi": 100},
    "clarity": {"mode": "top_fraction", "fraction": 1.0}}})");
  const std::string config = " --config " + Q(dir / "keep.json");

  const auto m = dir / "scores.jsonl";
  REQUIRE(Cli("score --metric aesthetics --corpus " + corpus + " --out " + Q(m)).exit_status == 0);
  REQUIRE(Cli("score --metric temporal --corpus " + corpus + " --out " + Q(m)).exit_status == 0);
  REQUIRE(Cli("score --metric motion --corpus " + corpus + " --out " + Q(m)).exit_status == 0);
  REQUIRE(Cli("score --metric clarity --corpus " + corpus + " --out " + Q(m)).exit_status == 0);
  // Scoring a metric twice is refused.
  CHECK(Cli("score --metric motion --corpus " + corpus + " --out " + Q(m)).exit_status == 1);

  REQUIRE(Cli("select --manifest " + Q(m) + " --out " + Q(dir / "ledger.json") + config)
              .exit_status == 0);
  const auto selected = dir / "selected.jsonl";
  REQUIRE(std::filesystem::exists(selected));
  REQUIRE(Cli("cut --manifest " + Q(selected) + " --corpus " + corpus + " --out " +
              Q(dir / "cut.jsonl") + config)
              .exit_status == 0);

  CaptionServer server([](const Json&, int) { return CaptionServer::Caption("one two three"); });
  const auto cap = Cli("caption --manifest " + Q(dir / "cut.jsonl") + " --endpoint " +
                       server.endpoint() + " --corpus " + corpus + " --out " +
                       Q(dir / "captioned.jsonl"));
  REQUIRE(cap.exit_status == 0);

  // The same policy end to end gives the same sets and captions.
  const auto run = Cli("run --corpus " + corpus + " --out " + Q(dir / "run") + config +
                       " --caption-endpoint " + server.endpoint());
  REQUIRE(run.exit_status == 0);
  const Manifest chained = Manifest::Load(dir / "captioned.jsonl");
  const Manifest whole = Manifest::Load(dir / "run" / "manifest.jsonl");
  CHECK(ReplayManifest(chained) == ReplayManifest(whole));
  const auto caps = ExtractCaptions(chained);
  CHECK(caps.size() == ReplayManifest(whole)[SetLabel::kExtracted].size());
  CHECK(caps.size() == ExtractCaptions(whole).size());
  CHECK(ExtractParents(chained) == ExtractParents(whole));
}

TEST_CASE("stats compares manifests") {
  TempDir dir("cli_stats");
  Synth(dir / "corpus", R"({"good":4,"dull":4})");
  REQUIRE(Cli("run --corpus " + Q(dir / "corpus") + " --out " + Q(dir / "out")).exit_status == 0);
  const auto man = dir / "out" / "manifest.jsonl";
  CHECK(Cli("stats --manifests " + Q(man) + " --out " + Q(dir / "s1")).exit_status == 2);
  CHECK(Cli("stats --manifests " + Q(man) + " --out " + Q(dir / "s1") + " --allow-single")
            .exit_status == 0);
  const auto two = Cli("stats --manifests " + Q(man) + "," + Q(man.string() + "@S_A") +
                       " --names all,kept --metrics aesthetics --out " + Q(dir / "s2"));
  REQUIRE(two.exit_status == 0);
  const Json report = Json::parse(ReadFile(dir / "s2" / "report.json"));
  CHECK(report["corpora"].size() == 2);
  CHECK(std::filesystem::exists(dir / "s2" / "aesthetics__kept.csv"));
  CHECK(Cli("stats --manifests " + Q(man) + "," + Q(man.string() + "@S_Q") + " --out " +
            Q(dir / "s3"))
            .exit_status == 2);
}

TEST_CASE("synth accepts inline and file specs") {
  TempDir dir("cli_synth");
  Synth(dir / "a", R"({"good":2})");
  WriteFile(dir / "spec.json", R"({"good":2})");
  REQUIRE(Cli("synth --spec " + Q(dir / "spec.json") + " --seed 42 --out " + Q(dir / "b"))
              .exit_status == 0);
  CHECK(ReadFile(dir / "a" / "good_001.rfv1") == ReadFile(dir / "b" / "good_001.rfv1"));
  CHECK(Cli("synth --spec '{\"good\":2' --seed 1 --out " + Q(dir / "c")).exit_status == 1);
}
