// Test double for the sidecar scorer protocol.
//
//   mock_sidecar --metrics m1,m2 [--mode MODE] [--const V]
//
// Modes:
//   echo       every score is the --const value
//   loopback   scores with the engine's reference scorers
//   wrong-id   answers with an id that does not match the request
//   malformed  answers with a line that is not JSON
//   silent     never answers (exercises timeouts)
//   no-hello   exits without a handshake

#include <chrono>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "vidcurate/core.h"
#include "vidcurate/ingest.h"
#include "vidcurate/scorers.h"

using vidcurate::Json;

int main(int argc, char** argv) {
  std::vector<std::string> metrics;
  std::string mode = "echo";
  double constant = 7.5;
  for (int i = 1; i + 1 < argc; i += 2) {
    const std::string flag = argv[i];
    const std::string value = argv[i + 1];
    if (flag == "--metrics") {
      std::stringstream in(value);
      for (std::string m; std::getline(in, m, ',');) metrics.push_back(m);
    } else if (flag == "--mode") {
      mode = value;
    } else if (flag == "--const") {
      constant = std::stod(value);
    }
  }
  if (mode == "no-hello") return 3;

  std::cout << Json{{"hello", {{"protocol", 1}, {"metrics", metrics}, {"mode", mode}}}}.dump()
            << std::endl;

  std::string line;
  while (std::getline(std::cin, line)) {
    Json request;
    try {
      request = Json::parse(line);
    } catch (const Json::parse_error&) {
      std::cout << Json{{"id", nullptr}, {"error", "malformed request"}}.dump() << std::endl;
      continue;
    }
    const Json id = request.value("id", Json(nullptr));
    if (mode == "silent") {
      std::this_thread::sleep_for(std::chrono::seconds(30));
      continue;
    }
    if (mode == "malformed") {
      std::cout << "this is not json" << std::endl;
      continue;
    }
    if (mode == "wrong-id") {
      std::cout << Json{{"id", id.get<std::uint64_t>() + 1000}, {"score", constant}}.dump()
                << std::endl;
      continue;
    }
    const std::string metric = request.value("metric", std::string());
    bool advertised = false;
    for (const auto& m : metrics) advertised |= (m == metric);
    if (!advertised) {
      std::cout << Json{{"id", id}, {"error", "metric not served: " + metric}}.dump() << std::endl;
      continue;
    }
    Json response = {{"id", id}};
    try {
      if (mode == "loopback") {
        auto parsed = vidcurate::ParseMetric(metric);
        auto clip = vidcurate::ReadRfv1File(request.at("rfv1_path").get<std::string>());
        auto plan = vidcurate::DefaultSamplingPlan(clip.frames.frame_count());
        response["score"] =
            vidcurate::ScoreReference(*parsed, vidcurate::Sample(clip.frames, plan)).value;
      } else {
        response["score"] = constant;
      }
    } catch (const std::exception& e) {
      response = {{"id", id}, {"error", e.what()}};
    }
    std::cout << response.dump() << std::endl;
  }
  return 0;
}
