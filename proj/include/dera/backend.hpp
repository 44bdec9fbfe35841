#pragma once

#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "dera/error.hpp"
#include "dera/types.hpp"

namespace dera::backend {

enum class WireRole { system, user, assistant };

const char* to_string(WireRole role);

struct WireMessage {
  WireRole role;
  std::string content;
  bool operator==(const WireMessage&) const = default;
};

/// One chat-completion call: model, ordered messages, sampling parameters.
struct ChatRequest {
  std::string model;
  std::vector<WireMessage> messages;
  GenerationParams params;

  void validate() const;
};

/// Wire body for the request, with deterministic key order.
nlohmann::json request_body(const ChatRequest& request);

/// Stable hex digest of the canonical wire body.
std::string request_fingerprint(const ChatRequest& request);

class BackendError : public Error {
 public:
  explicit BackendError(const std::string& message) : Error(message) {}
};

/// Transport kept failing after the retry budget ran out.
class BackendUnavailable : public BackendError {
 public:
  explicit BackendUnavailable(const std::string& message) : BackendError(message) {}
};

/// A scripted queue or replay cassette ran out of entries.
class ScriptExhausted : public BackendError {
 public:
  explicit ScriptExhausted(const std::string& message) : BackendError(message) {}
};

/// A replayed request no longer matches the recorded one.
class CassetteDrift : public BackendError {
 public:
  explicit CassetteDrift(const std::string& message) : BackendError(message) {}
};

class CassetteIoError : public BackendError {
 public:
  explicit CassetteIoError(const std::string& message) : BackendError(message) {}
};

/// Chat-completion provider. Implementations must be safe for concurrent
/// use; complete() returns exactly params.num_completions completions.
class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::vector<std::string> complete(const ChatRequest& request) = 0;
};

/// Returns queued completion batches in order, regardless of the request.
class ScriptedBackend : public Backend {
 public:
  ScriptedBackend() = default;
  static std::shared_ptr<ScriptedBackend> from_file(const std::string& path);

  void enqueue(std::vector<std::string> completions);
  size_t remaining() const;
  std::vector<std::string> complete(const ChatRequest& request) override;

 private:
  mutable std::mutex mutex_;
  std::deque<std::vector<std::string>> queue_;
};

struct LiveConfig {
  std::string base_url = "https://api.openai.com";
  std::string api_key;
  int max_attempts = 3;
  int timeout_ms = 120000;
  int initial_backoff_ms = 500;
  double requests_per_second = 0;  // 0 disables rate limiting
};

/// HTTP client for a chat-completions endpoint, with bounded retries and
/// exponential backoff on transport errors, 429s, and 5xx responses.
class LiveBackend : public Backend {
 public:
  explicit LiveBackend(LiveConfig config);
  std::vector<std::string> complete(const ChatRequest& request) override;

 private:
  void throttle();

  LiveConfig config_;
  std::mutex throttle_mutex_;
  double next_slot_ = 0;
};

/// Forwards to an inner backend and appends every exchange to a cassette
/// file, one JSON entry per line.
class RecordingBackend : public Backend {
 public:
  RecordingBackend(std::shared_ptr<Backend> inner, const std::string& path);
  std::vector<std::string> complete(const ChatRequest& request) override;

 private:
  std::shared_ptr<Backend> inner_;
  std::string path_;
  std::mutex mutex_;
};

/// Replays a cassette in recorded order, verifying each request's
/// fingerprint against the recording.
class ReplayBackend : public Backend {
 public:
  explicit ReplayBackend(const std::string& path);
  std::vector<std::string> complete(const ChatRequest& request) override;
  size_t remaining() const;

 private:
  struct Entry {
    std::string fingerprint;
    std::vector<std::string> completions;
  };
  mutable std::mutex mutex_;
  std::vector<Entry> entries_;
  size_t next_ = 0;
  std::string path_;
};

}  // namespace dera::backend
