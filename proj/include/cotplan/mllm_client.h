#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "cotplan/prompting.h"

namespace cotplan {

inline constexpr std::uintmax_t kMaxImageBytes = 20u * 1024u * 1024u;

struct ClientConfig {
  std::string base_url;
  std::string model;
  std::string api_key;
  double temperature = 0.0;
  int max_tokens = 1024;
  std::chrono::seconds timeout{120};
  int max_retries = 3;

  /// Throws MllmError(kInvalidConfig).
  void Validate() const;

  /// Fills base_url/api_key from OPENEMMA_BASE_URL / OPENEMMA_API_KEY when
  /// they are still empty.
  void ApplyEnvironment();
};

struct ChatResponse {
  std::string text;
  int prompt_tokens = 0;
  int completion_tokens = 0;
  double latency_ms = 0.0;
  int attempts = 1;
};

class MllmError : public std::runtime_error {
 public:
  enum class Kind {
    kTransport,
    kHttp,
    kEmptyCompletion,
    kImageUnreadable,
    kReplayMiss,
    kStoreCorrupt,
    kInvalidConfig,
  };

  MllmError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  Kind kind() const { return kind_; }
  int http_status() const { return http_status_; }
  int attempts() const { return attempts_; }
  /// Store line number for kStoreCorrupt, 0 otherwise.
  std::size_t line() const { return line_; }

  MllmError& WithStatus(int status) {
    http_status_ = status;
    return *this;
  }
  MllmError& WithAttempts(int attempts) {
    attempts_ = attempts;
    return *this;
  }
  MllmError& WithLine(std::size_t line) {
    line_ = line;
    return *this;
  }

 private:
  Kind kind_;
  int http_status_ = 0;
  int attempts_ = 0;
  std::size_t line_ = 0;
};

/// Anything that can answer a prompt bundle. Implementations must be safe to
/// call from several threads.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  virtual ChatResponse Complete(const PromptBundle& bundle) = 0;
};

// --- HTTP transport ---------------------------------------------------------

struct HttpResult {
  int status = 0;
  std::string body;
};

/// Connection-level failure (refused, reset, timed out).
class TransportFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  /// POSTs a JSON body. Throws TransportFailure when no response arrives.
  virtual HttpResult PostJson(const std::string& url, const std::string& body,
                              const std::multimap<std::string, std::string>& headers,
                              std::chrono::seconds timeout) = 0;
};

/// cpp-httplib backed transport; http:// and https:// URLs.
std::shared_ptr<HttpTransport> MakeHttplibTransport();

struct RetryPolicy {
  std::chrono::milliseconds base{1000};
  double factor = 2.0;
  /// Injected for tests; defaults to std::this_thread::sleep_for.
  std::function<void(std::chrono::milliseconds)> sleep;
  std::uint64_t jitter_seed = std::random_device{}();
};

/// OpenAI-compatible chat-completions client.
class OpenAiChatClient : public ChatBackend {
 public:
  explicit OpenAiChatClient(ClientConfig config,
                            std::shared_ptr<HttpTransport> transport = nullptr,
                            RetryPolicy retry = {});

  ChatResponse Complete(const PromptBundle& bundle) override;

  /// Request body for `bundle`, with images inlined as base64 data URIs.
  std::string BuildRequestBody(const PromptBundle& bundle) const;

  /// Retries issued so far across all calls.
  int total_retries() const { return total_retries_.load(); }

  const ClientConfig& config() const { return config_; }

 private:
  std::chrono::milliseconds NextBackoff(int retry_index);

  ClientConfig config_;
  std::shared_ptr<HttpTransport> transport_;
  RetryPolicy retry_;
  std::mutex rng_mu_;
  std::mt19937_64 rng_;
  std::atomic<int> total_retries_{0};
};

/// Extracts the first choice's text from a chat-completions response body.
ChatResponse ParseChatCompletion(const std::string& body, int http_status);

// --- record / replay --------------------------------------------------------

std::string Sha256Hex(std::string_view bytes);
std::string Base64Encode(std::string_view bytes);

/// Reads an attachment, enforcing readability and the size cap.
std::string ReadImageBytes(const std::filesystem::path& path);

/// Content fingerprint of a request: SHA-256 over model, temperature, the
/// ordered text parts and the SHA-256 of every attached image's bytes.
std::string Fingerprint(const PromptBundle& bundle, const std::string& model,
                        double temperature);

/// Read-only JSONL store of {"key", "text"} records.
class ReplayStore {
 public:
  static ReplayStore Load(const std::filesystem::path& path);
  static ReplayStore FromString(const std::string& jsonl);

  /// Throws MllmError(kReplayMiss).
  const std::string& Get(const std::string& key) const;
  bool Contains(const std::string& key) const;
  std::size_t size() const { return entries_.size(); }
  /// Keys in file order.
  const std::vector<std::string>& keys() const { return order_; }

 private:
  std::unordered_map<std::string, std::string> entries_;
  std::vector<std::string> order_;
};

/// Append-only JSONL writer; Put is serialized through one mutex.
class RecordStore {
 public:
  explicit RecordStore(const std::filesystem::path& path);
  void Put(const std::string& key, const std::string& text);

 private:
  std::mutex mu_;
  std::ofstream out_;
};

class ReplayBackend : public ChatBackend {
 public:
  ReplayBackend(std::shared_ptr<const ReplayStore> store, std::string model,
                double temperature);
  ChatResponse Complete(const PromptBundle& bundle) override;

 private:
  std::shared_ptr<const ReplayStore> store_;
  std::string model_;
  double temperature_;
};

/// Forwards to `inner` and appends every successful reply to `store`.
class RecordingBackend : public ChatBackend {
 public:
  RecordingBackend(ChatBackend& inner, RecordStore& store, std::string model,
                   double temperature);
  ChatResponse Complete(const PromptBundle& bundle) override;

 private:
  ChatBackend& inner_;
  RecordStore& store_;
  std::string model_;
  double temperature_;
};

}  // namespace cotplan
