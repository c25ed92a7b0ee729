#include "vidcurate/caption.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "vidcurate/thread_pool.h"

namespace vidcurate {

void CaptionClientConfig::Validate() const {
  if (max_attempts < 1) throw Error(ErrorKind::kConfig, "caption max_attempts must be >= 1");
  if (timeout.count() <= 0) throw Error(ErrorKind::kConfig, "caption timeout must be positive");
  if (backoff_base.count() < 0) throw Error(ErrorKind::kConfig, "caption backoff must be >= 0");
  if (!(backoff_factor >= 1.0)) throw Error(ErrorKind::kConfig, "caption backoff factor must be >= 1");
  if (max_inflight < 1) throw Error(ErrorKind::kConfig, "caption max_inflight must be >= 1");
  if (!endpoint.empty()) ParseEndpoint(endpoint);
}

Json CaptionClientConfig::ToJson() const {
  Json j = {{"endpoint", endpoint},
            {"timeout_s", static_cast<double>(timeout.count()) / 1000.0},
            {"max_attempts", max_attempts},
            {"backoff_base_s", static_cast<double>(backoff_base.count()) / 1000.0},
            {"backoff_factor", backoff_factor},
            {"max_inflight", max_inflight},
            {"inline_frames", inline_frames}};
  j["prompt"] = prompt ? Json(*prompt) : Json(nullptr);
  return j;
}

namespace {

std::chrono::milliseconds Seconds(double s) {
  return std::chrono::milliseconds(static_cast<std::int64_t>(std::llround(s * 1000.0)));
}

}  // namespace

CaptionClientConfig CaptionClientConfig::FromJson(const Json& j) {
  CaptionClientConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const auto& key = it.key();
    try {
      if (key == "endpoint") {
        c.endpoint = it->get<std::string>();
      } else if (key == "prompt") {
        if (!it->is_null()) c.prompt = it->get<std::string>();
      } else if (key == "timeout_s") {
        c.timeout = Seconds(it->get<double>());
      } else if (key == "max_attempts") {
        c.max_attempts = it->get<int>();
      } else if (key == "backoff_base_s") {
        c.backoff_base = Seconds(it->get<double>());
      } else if (key == "backoff_factor") {
        c.backoff_factor = it->get<double>();
      } else if (key == "max_inflight") {
        c.max_inflight = it->get<std::size_t>();
      } else if (key == "inline_frames") {
        c.inline_frames = it->get<bool>();
      } else {
        throw Error(ErrorKind::kConfig, "unknown field '" + key + "' in caption config");
      }
    } catch (const Json::exception& e) {
      throw Error(ErrorKind::kConfig, "caption config field '" + key + "': " + e.what());
    }
  }
  c.Validate();
  return c;
}

HttpEndpoint ParseEndpoint(const std::string& url) {
  const std::string scheme = "http://";
  if (url.rfind(scheme, 0) != 0) {
    throw Error(ErrorKind::kConfig, "caption endpoint must start with http:// (got '" + url + "')");
  }
  std::string rest = url.substr(scheme.size());
  HttpEndpoint ep;
  const auto slash = rest.find('/');
  if (slash != std::string::npos) {
    ep.path = rest.substr(slash);
    rest = rest.substr(0, slash);
  }
  const auto colon = rest.rfind(':');
  if (colon != std::string::npos) {
    const std::string port = rest.substr(colon + 1);
    try {
      std::size_t used = 0;
      ep.port = std::stoi(port, &used);
      if (used != port.size() || ep.port < 1 || ep.port > 65535) throw std::invalid_argument(port);
    } catch (const std::exception&) {
      throw Error(ErrorKind::kConfig, "invalid port in caption endpoint '" + url + "'");
    }
    rest = rest.substr(0, colon);
  }
  if (rest.empty()) throw Error(ErrorKind::kConfig, "missing host in caption endpoint '" + url + "'");
  ep.host = rest;
  return ep;
}

namespace {

enum class AttemptResult { kOk, kRetryable, kPermanent };

std::string RequestBody(const CaptionTarget& target, const CaptionClientConfig& config) {
  Json body = {{"clip_id", target.clip_id}};
  if (config.inline_frames) {
    std::ifstream in(target.rfv1_path, std::ios::binary);
    if (!in) throw Error(ErrorKind::kIo, "cannot open " + target.rfv1_path);
    std::ostringstream bytes;
    bytes << in.rdbuf();
    body["rfv1_base64"] = httplib::detail::base64_encode(bytes.str());
  } else {
    body["rfv1_path"] = target.rfv1_path;
  }
  if (config.prompt) body["prompt"] = *config.prompt;
  return body.dump();
}

}  // namespace

CaptionOutcome RequestCaption(const CaptionTarget& target, const CaptionClientConfig& config) {
  CaptionOutcome out;
  out.clip_id = target.clip_id;
  std::string body;
  HttpEndpoint ep;
  try {
    ep = ParseEndpoint(config.endpoint);
    body = RequestBody(target, config);
  } catch (const Error& e) {
    out.error = e.what();
    return out;
  }

  httplib::Client client(ep.host, ep.port);
  const auto sec = std::chrono::duration_cast<std::chrono::seconds>(config.timeout);
  const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(config.timeout - sec);
  client.set_connection_timeout(sec.count(), usec.count());
  client.set_read_timeout(sec.count(), usec.count());
  client.set_write_timeout(sec.count(), usec.count());

  auto delay = config.backoff_base;
  for (int attempt = 1; attempt <= config.max_attempts; ++attempt) {
    out.attempts = attempt;
    AttemptResult result = AttemptResult::kRetryable;
    auto res = client.Post(ep.path, body, "application/json");
    if (!res) {
      out.error = "request failed: " + httplib::to_string(res.error());
    } else if (res->status >= 500) {
      out.error = "service returned HTTP " + std::to_string(res->status);
    } else if (res->status < 200 || res->status >= 300) {
      out.error = "service returned HTTP " + std::to_string(res->status);
      result = AttemptResult::kPermanent;
    } else {
      result = AttemptResult::kPermanent;
      try {
        const Json j = Json::parse(res->body);
        const std::string text = j.at("caption").get<std::string>();
        if (CountWords(text) == 0) {
          out.error = "protocol violation: empty caption";
        } else {
          CaptionRecord rec;
          rec.clip_id = target.clip_id;
          rec.text = text;
          rec.word_count = CountWords(text);
          rec.provider = config.endpoint;
          rec.attempts = attempt;
          out.record = std::move(rec);
          out.error.clear();
          result = AttemptResult::kOk;
        }
      } catch (const Json::exception& e) {
        out.error = std::string("protocol violation: ") + e.what();
      }
    }
    if (result != AttemptResult::kRetryable) break;
    if (attempt < config.max_attempts) {
      std::this_thread::sleep_for(delay);
      delay = std::chrono::milliseconds(static_cast<std::int64_t>(
          std::llround(static_cast<double>(delay.count()) * config.backoff_factor)));
    }
  }
  if (!out.record) {
    out.error = "clip " + target.clip_id + ": caption failed after " +
                std::to_string(out.attempts) + " attempt(s): " + out.error;
  }
  return out;
}

CaptionRecord CaptionClip(const CaptionTarget& target, const CaptionClientConfig& config) {
  config.Validate();
  CaptionOutcome o = RequestCaption(target, config);
  if (!o.record) throw Error(ErrorKind::kCaption, o.error);
  return *o.record;
}

std::vector<CaptionOutcome> CaptionBatch(const std::vector<CaptionTarget>& targets,
                                         const CaptionClientConfig& config) {
  config.Validate();
  std::vector<CaptionOutcome> out(targets.size());
  ThreadPool pool(std::min(config.max_inflight, std::max<std::size_t>(1, targets.size())));
  ParallelFor(pool, targets.size(), [&](std::size_t i) {
    out[i] = RequestCaption(targets[i], config);
  });
  return out;
}

ManifestEntry CaptionEntry(const CaptionRecord& record) {
  ManifestEntry e;
  e.stage = "caption";
  e.kind = EntryKind::kCaption;
  e.clip_id = record.clip_id;
  e.payload = {{"text", record.text},
               {"word_count", record.word_count},
               {"provider", record.provider},
               {"attempts", record.attempts}};
  return e;
}

CaptionSummary CaptionStats(const std::vector<CaptionRecord>& captions) {
  if (captions.empty()) throw Error(ErrorKind::kEmptyInput, "caption stats over no captions");
  std::vector<double> lengths;
  lengths.reserve(captions.size());
  for (const auto& c : captions) lengths.push_back(static_cast<double>(c.word_count));
  CaptionSummary s;
  s.histogram = Histogram(lengths, DefaultEdges(kCaptionLengthMetric), kCaptionLengthMetric);
  s.mean = *s.histogram.mean;
  s.median = *s.histogram.median;
  return s;
}

}  // namespace vidcurate
