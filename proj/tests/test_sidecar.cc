#include <thread>

#include "doctest.h"
#include "support.h"
#include "vidcurate/process.h"
#include "vidcurate/scorers.h"
#include "vidcurate/synth.h"

using namespace vidcurate;
using namespace std::chrono_literals;
using vidcurate::testing::MockSidecar;
using vidcurate::testing::TempDir;

namespace {

std::string Mock(const std::string& mode, const std::string& metrics = "clarity,motion") {
  return MockSidecar() + " --mode " + mode + " --metrics " + metrics;
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

TEST_CASE("handshake advertises metrics") {
  SidecarConnection c(Mock("echo"), 5s);
  CHECK(c.metrics() == std::vector<std::string>{"clarity", "motion"});
  CHECK(c.Advertises(Metric::kClarity));
  CHECK_FALSE(c.Advertises(Metric::kAesthetics));
}

TEST_CASE("echo mode answers every request in order") {
  SidecarConnection c(Mock("echo") + " --const 7.5", 5s);
  for (int i = 0; i < 100; ++i) CHECK(c.Score(Metric::kClarity, "/nonexistent.rfv1") == 7.5);
  CHECK_FALSE(c.broken());
}

TEST_CASE("unadvertised metric") {
  SidecarConnection c(Mock("echo", "clarity"), 5s);
  // Refused locally before anything is sent.
  CHECK(KindOf([&] { c.Score(Metric::kMotion, "x"); }) == ErrorKind::kScorer);
  CHECK(c.Score(Metric::kClarity, "x") == 7.5);
}

TEST_CASE("sidecar errors keep the connection usable") {
  TempDir dir("sidecar_err");
  SidecarConnection c(Mock("loopback", "clarity"), 5s);
  // Loopback cannot read a missing file and says so in an error response.
  CHECK(KindOf([&] { c.Score(Metric::kClarity, (dir / "missing.rfv1").string()); }) ==
        ErrorKind::kScorer);
  CHECK_FALSE(c.broken());
  const auto clip = Generate(SynthKind::kPan, {}, 1);
  WriteRfv1File(dir / "a.rfv1", clip.frames, 24.0f);
  CHECK(c.Score(Metric::kClarity, (dir / "a.rfv1").string()) ==
        doctest::Approx(ScoreClarity(clip.frames).value));
}

TEST_CASE("protocol violations break the connection") {
  SUBCASE("wrong id") {
    SidecarConnection c(Mock("wrong-id"), 5s);
    CHECK(KindOf([&] { c.Score(Metric::kClarity, "x"); }) == ErrorKind::kProtocol);
    CHECK(c.broken());
  }
  SUBCASE("malformed response") {
    SidecarConnection c(Mock("malformed"), 5s);
    CHECK(KindOf([&] { c.Score(Metric::kClarity, "x"); }) == ErrorKind::kProtocol);
    CHECK(c.broken());
  }
  SUBCASE("silent sidecar times out") {
    SidecarConnection c(Mock("silent"), 300ms);
    const auto start = std::chrono::steady_clock::now();
    CHECK(KindOf([&] { c.Score(Metric::kClarity, "x"); }) == ErrorKind::kTimeout);
    CHECK(std::chrono::steady_clock::now() - start < 5s);
    CHECK(c.broken());
  }
  SUBCASE("no handshake") {
    CHECK(KindOf([] { SidecarConnection c(Mock("no-hello"), 5s); }) == ErrorKind::kProtocol);
  }
  SUBCASE("not a sidecar at all") {
    CHECK(KindOf([] { SidecarConnection c("echo hello", 5s); }) == ErrorKind::kProtocol);
  }
}

TEST_CASE("loopback agrees with the reference scorer") {
  TempDir dir("loopback");
  SidecarConnection c(Mock("loopback", "clarity,motion,aesthetics,temporal_consistency"), 10s);
  for (std::size_t k = 0; k < 20; ++k) {
    const auto clip = GenerateClass(CorpusClasses()[k % CorpusClasses().size()], k, 42);
    const auto path = dir / (clip.clip.clip_id + ".rfv1");
    WriteRfv1File(path, clip.frames, clip.clip.fps);
    const auto sampled = Sample(clip.frames, DefaultSamplingPlan(clip.frames.frame_count()));
    CHECK(std::abs(c.Score(Metric::kClarity, path.string()) -
                   ScoreClarity(sampled).value) <= 1e-6);
  }
}

TEST_CASE("pool shares processes across threads and replaces broken ones") {
  SUBCASE("concurrent leases") {
    SidecarPool pool(Mock("echo") + " --const 3", 3, 5s);
    std::vector<std::thread> threads;
    std::atomic<int> ok{0};
    for (int t = 0; t < 6; ++t) {
      threads.emplace_back([&] {
        for (int i = 0; i < 20; ++i) ok += pool.Score(Metric::kMotion, "x") == 3.0;
      });
    }
    for (auto& t : threads) t.join();
    CHECK(ok == 120);
  }
  SUBCASE("broken connections are discarded") {
    SidecarPool pool(Mock("malformed"), 1, 5s);
    for (int i = 0; i < 3; ++i) {
      CHECK(KindOf([&] { pool.Score(Metric::kMotion, "x"); }) == ErrorKind::kProtocol);
    }
  }
}

TEST_CASE("scores carry the sidecar identity") {
  ScorerBinding b;
  b.metric = Metric::kClarity;
  b.provider = Provider::kSidecar;
  b.sidecar_command = "my-scorer";
  CHECK(b.Identity() == "sidecar:my-scorer");
  SidecarPool pool(Mock("echo", "clarity"), 1, 5s);
  ClipRecord clip;
  clip.clip_id = "c1";
  const ScoreValue v = ScoreViaSidecar(b, pool, clip, "x");
  CHECK(v.value == 7.5);
  CHECK(v.scorer == "sidecar:my-scorer");

  SidecarPool bad(Mock("wrong-id", "clarity"), 1, 5s);
  try {
    ScoreViaSidecar(b, bad, clip, "x");
    FAIL("expected protocol error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("clip c1") != std::string::npos);
  }
}

TEST_CASE("mock sidecar answers bad requests with error responses") {
  ChildProcess child(Mock("echo", "clarity"));
  const Json hello = Json::parse(child.ReadLine(5s));
  CHECK(hello["hello"]["protocol"] == 1);
  child.WriteLine(R"({"id":4,"metric":"motion","rfv1_path":"x"})");
  const Json refused = Json::parse(child.ReadLine(5s));
  CHECK(refused["id"] == 4);
  CHECK(refused.contains("error"));
  child.WriteLine("{garbage");
  CHECK(Json::parse(child.ReadLine(5s)).contains("error"));
  child.WriteLine(R"({"id":5,"metric":"clarity","rfv1_path":"x"})");
  const Json ok = Json::parse(child.ReadLine(5s));
  CHECK(ok["id"] == 5);
  CHECK(ok["score"] == 7.5);
  CHECK(child.Alive());
}
