#include "dera/backend.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <thread>

#include <httplib.h>

namespace dera::backend {

namespace {

uint64_t fnv1a64(const std::string& data) {
  uint64_t hash = 1469598103934665603ull;
  for (unsigned char c : data) {
    hash ^= c;
    hash *= 1099511628211ull;
  }
  return hash;
}

std::string hex64(uint64_t value) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[i] = digits[value & 0xf];
    value >>= 4;
  }
  return out;
}

void sleep_ms(int ms) {
  std::this_thread::sleep_for(std::chrono::milliseconds(ms));
}

std::vector<std::string> parse_script_line(const nlohmann::json& line) {
  if (line.is_array()) return line.get<std::vector<std::string>>();
  if (line.is_object() && line.contains("completions")) {
    return line.at("completions").get<std::vector<std::string>>();
  }
  throw CassetteIoError("script line must be an array or hold a completions field");
}

}  // namespace

const char* to_string(WireRole role) {
  switch (role) {
    case WireRole::system: return "system";
    case WireRole::user: return "user";
    case WireRole::assistant: return "assistant";
  }
  return "unknown";
}

void ChatRequest::validate() const {
  if (model.empty()) throw Error("request model must be non-empty");
  if (messages.empty()) throw Error("request must carry at least one message");
  params.validate();
}

nlohmann::json request_body(const ChatRequest& request) {
  request.validate();
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& message : request.messages) {
    messages.push_back({{"role", to_string(message.role)}, {"content", message.content}});
  }
  return nlohmann::json{
      {"model", request.model},
      {"messages", std::move(messages)},
      {"temperature", request.params.temperature},
      {"top_p", request.params.top_p},
      {"max_tokens", request.params.max_tokens},
      {"frequency_penalty", request.params.frequency_penalty},
      {"n", request.params.num_completions},
  };
}

std::string request_fingerprint(const ChatRequest& request) {
  return hex64(fnv1a64(request_body(request).dump()));
}

std::shared_ptr<ScriptedBackend> ScriptedBackend::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw CassetteIoError("cannot read script: " + path);
  auto backend = std::make_shared<ScriptedBackend>();
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      backend->enqueue(parse_script_line(nlohmann::json::parse(line)));
    } catch (const nlohmann::json::exception& e) {
      throw CassetteIoError(path + " line " + std::to_string(line_number) + ": " + e.what());
    }
  }
  return backend;
}

void ScriptedBackend::enqueue(std::vector<std::string> completions) {
  std::lock_guard<std::mutex> lock(mutex_);
  queue_.push_back(std::move(completions));
}

size_t ScriptedBackend::remaining() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return queue_.size();
}

std::vector<std::string> ScriptedBackend::complete(const ChatRequest& request) {
  request.validate();
  std::lock_guard<std::mutex> lock(mutex_);
  if (queue_.empty()) throw ScriptExhausted("scripted backend queue is empty");
  std::vector<std::string> completions = std::move(queue_.front());
  queue_.pop_front();
  if (static_cast<int>(completions.size()) != request.params.num_completions) {
    throw BackendError("scripted entry holds " + std::to_string(completions.size()) +
                       " completions but the request asked for " +
                       std::to_string(request.params.num_completions));
  }
  return completions;
}

LiveBackend::LiveBackend(LiveConfig config) : config_(std::move(config)) {
  if (config_.max_attempts < 1) throw Error("retry budget must be at least 1");
  while (!config_.base_url.empty() && config_.base_url.back() == '/') {
    config_.base_url.pop_back();
  }
}

void LiveBackend::throttle() {
  if (config_.requests_per_second <= 0) return;
  const double interval = 1.0 / config_.requests_per_second;
  double wait = 0;
  {
    std::lock_guard<std::mutex> lock(throttle_mutex_);
    const double now = std::chrono::duration<double>(
                           std::chrono::steady_clock::now().time_since_epoch())
                           .count();
    if (next_slot_ < now) next_slot_ = now;
    wait = next_slot_ - now;
    next_slot_ += interval;
  }
  if (wait > 0) sleep_ms(static_cast<int>(wait * 1000));
}

std::vector<std::string> LiveBackend::complete(const ChatRequest& request) {
  const std::string body = request_body(request).dump();

  std::string origin = config_.base_url;
  std::string prefix;
  const auto scheme_end = origin.find("://");
  if (scheme_end != std::string::npos) {
    const auto path_start = origin.find('/', scheme_end + 3);
    if (path_start != std::string::npos) {
      prefix = origin.substr(path_start);
      origin = origin.substr(0, path_start);
    }
  }
  const std::string path = prefix + "/v1/chat/completions";

  std::string last_failure = "no attempts made";
  for (int attempt = 1; attempt <= config_.max_attempts; ++attempt) {
    if (attempt > 1) {
      sleep_ms(config_.initial_backoff_ms * (1 << (attempt - 2)));
    }
    throttle();

    httplib::Client client(origin);
    client.set_connection_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);
    client.set_read_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);
    client.set_write_timeout(config_.timeout_ms / 1000, (config_.timeout_ms % 1000) * 1000);
    httplib::Headers headers;
    if (!config_.api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + config_.api_key);
    }

    auto result = client.Post(path, headers, body, "application/json");
    if (!result) {
      last_failure = "transport error: " + httplib::to_string(result.error());
      continue;
    }
    if (result->status == 429 || result->status >= 500) {
      last_failure = "status " + std::to_string(result->status);
      continue;
    }
    if (result->status != 200) {
      throw BackendError("chat completion failed with status " +
                         std::to_string(result->status) + ": " + result->body);
    }

    nlohmann::json payload;
    try {
      payload = nlohmann::json::parse(result->body);
    } catch (const nlohmann::json::exception& e) {
      throw BackendError("malformed completion response: " + std::string(e.what()));
    }
    std::vector<std::string> completions;
    try {
      for (const auto& choice : payload.at("choices")) {
        completions.push_back(choice.at("message").at("content").get<std::string>());
      }
    } catch (const nlohmann::json::exception& e) {
      throw BackendError("completion response missing choices: " + std::string(e.what()));
    }
    if (static_cast<int>(completions.size()) != request.params.num_completions) {
      throw BackendError("expected " + std::to_string(request.params.num_completions) +
                         " completions, response held " + std::to_string(completions.size()));
    }
    return completions;
  }
  throw BackendUnavailable("gave up after " + std::to_string(config_.max_attempts) +
                           " attempts; last failure: " + last_failure);
}

RecordingBackend::RecordingBackend(std::shared_ptr<Backend> inner, const std::string& path)
    : inner_(std::move(inner)), path_(path) {
  const auto parent = std::filesystem::path(path_).parent_path();
  if (!parent.empty()) {
    std::error_code ec;
    std::filesystem::create_directories(parent, ec);
  }
  std::ofstream out(path_, std::ios::trunc);
  if (!out) throw CassetteIoError("cannot open cassette for writing: " + path_);
}

std::vector<std::string> RecordingBackend::complete(const ChatRequest& request) {
  const std::string fingerprint = request_fingerprint(request);
  std::vector<std::string> completions = inner_->complete(request);

  const nlohmann::json entry{{"request_fingerprint", fingerprint},
                             {"completions", completions}};
  std::lock_guard<std::mutex> lock(mutex_);
  std::ofstream out(path_, std::ios::app);
  if (!out) throw CassetteIoError("cannot append to cassette: " + path_);
  out << entry.dump() << '\n';
  out.flush();
  if (!out) throw CassetteIoError("write to cassette failed: " + path_);
  return completions;
}

ReplayBackend::ReplayBackend(const std::string& path) : path_(path) {
  std::ifstream in(path_);
  if (!in) throw CassetteIoError("cannot read cassette: " + path_);
  std::string line;
  int line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto entry = nlohmann::json::parse(line);
      entries_.push_back({entry.at("request_fingerprint").get<std::string>(),
                          entry.at("completions").get<std::vector<std::string>>()});
    } catch (const nlohmann::json::exception& e) {
      throw CassetteIoError(path_ + " line " + std::to_string(line_number) + ": " + e.what());
    }
  }
}

std::vector<std::string> ReplayBackend::complete(const ChatRequest& request) {
  const std::string fingerprint = request_fingerprint(request);
  std::lock_guard<std::mutex> lock(mutex_);
  if (next_ >= entries_.size()) {
    throw ScriptExhausted("cassette " + path_ + " has no entry left for this request");
  }
  const Entry& entry = entries_[next_];
  if (entry.fingerprint != fingerprint) {
    throw CassetteDrift("cassette " + path_ + " entry " + std::to_string(next_ + 1) +
                        " was recorded for a different request");
  }
  if (static_cast<int>(entry.completions.size()) != request.params.num_completions) {
    throw CassetteDrift("cassette " + path_ + " entry " + std::to_string(next_ + 1) +
                        " holds a different completion count than requested");
  }
  ++next_;
  return entry.completions;
}

size_t ReplayBackend::remaining() const {
  std::lock_guard<std::mutex> lock(mutex_);
  return entries_.size() - next_;
}

}  // namespace dera::backend
