// HTTP client for an external captioning service and caption-length
// statistics.
//
// Request: POST <endpoint> {"clip_id", "rfv1_path", "prompt"?} (or
// "rfv1_base64" instead of the path when inline transport is enabled).
// Response: {"caption": string}. 5xx and timeouts are retried with
// exponential backoff; 4xx fails the clip immediately.

#ifndef VIDCURATE_CAPTION_H_
#define VIDCURATE_CAPTION_H_

#include <chrono>
#include <optional>
#include <string>
#include <vector>

#include "vidcurate/core.h"
#include "vidcurate/manifest.h"
#include "vidcurate/stats.h"

namespace vidcurate {

struct CaptionClientConfig {
  std::string endpoint;  // http://host[:port]/path
  std::optional<std::string> prompt;
  std::chrono::milliseconds timeout{300000};
  int max_attempts = 3;
  std::chrono::milliseconds backoff_base{1000};
  double backoff_factor = 2.0;
  std::size_t max_inflight = 4;
  bool inline_frames = false;

  void Validate() const;
  Json ToJson() const;
  // Durations are given in seconds ("timeout_s", "backoff_base_s").
  static CaptionClientConfig FromJson(const Json& j);
};

struct HttpEndpoint {
  std::string host;
  int port = 80;
  std::string path = "/";
};

// Only plain http:// is supported. Throws kConfig otherwise.
HttpEndpoint ParseEndpoint(const std::string& url);

struct CaptionTarget {
  std::string clip_id;
  std::string rfv1_path;
};

struct CaptionOutcome {
  std::string clip_id;
  std::optional<CaptionRecord> record;
  std::string error;  // set when record is empty
  int attempts = 0;
};

// Never throws for service failures; they are reported in the outcome.
CaptionOutcome RequestCaption(const CaptionTarget& target, const CaptionClientConfig& config);

// Throws kCaption when every attempt failed or the service answered with
// an empty caption.
CaptionRecord CaptionClip(const CaptionTarget& target, const CaptionClientConfig& config);

// Up to max_inflight concurrent requests; outcomes follow input order.
std::vector<CaptionOutcome> CaptionBatch(const std::vector<CaptionTarget>& targets,
                                         const CaptionClientConfig& config);

ManifestEntry CaptionEntry(const CaptionRecord& record);

struct CaptionSummary {
  MetricHistogram histogram;
  double mean = 0.0;
  double median = 0.0;
};

// Word-count distribution on the default caption-length edges.
// Throws kEmptyInput for an empty list.
CaptionSummary CaptionStats(const std::vector<CaptionRecord>& captions);

}  // namespace vidcurate

#endif  // VIDCURATE_CAPTION_H_
