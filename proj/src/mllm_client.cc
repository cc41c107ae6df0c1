#include "cotplan/mllm_client.h"

#include <openssl/evp.h>

#include <cmath>
#include <cstdlib>
#include <sstream>
#include <thread>

#include "httplib.h"
#include "json.hpp"

namespace cotplan {

namespace {

using nlohmann::json;

std::string Snippet(const std::string& body) {
  constexpr std::size_t kMax = 200;
  return body.size() <= kMax ? body : body.substr(0, kMax) + "...";
}

bool Retryable(int status) { return status == 429 || status >= 500; }

class HttplibTransport : public HttpTransport {
 public:
  HttpResult PostJson(const std::string& url, const std::string& body,
                      const std::multimap<std::string, std::string>& headers,
                      std::chrono::seconds timeout) override {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
      throw TransportFailure("malformed URL " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string origin =
        path_start == std::string::npos ? url : url.substr(0, path_start);
    const std::string path =
        path_start == std::string::npos ? "/" : url.substr(path_start);

    httplib::Client client(origin);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    httplib::Headers h(headers.begin(), headers.end());
    auto res = client.Post(path, h, body, "application/json");
    if (!res) {
      throw TransportFailure(httplib::to_string(res.error()));
    }
    return {res->status, res->body};
  }
};

std::string RequestUrl(const std::string& base_url) {
  std::string url = base_url;
  while (!url.empty() && url.back() == '/') url.pop_back();
  return url + "/chat/completions";
}

}  // namespace

// --- config -----------------------------------------------------------------

void ClientConfig::Validate() const {
  auto fail = [](const std::string& m) {
    throw MllmError(MllmError::Kind::kInvalidConfig, m);
  };
  if (base_url.empty()) fail("base_url is empty");
  if (base_url.find("://") == std::string::npos) {
    fail("base_url must include a scheme: " + base_url);
  }
  if (model.empty()) fail("model is empty");
  if (!(temperature >= 0.0 && temperature <= 2.0)) {
    fail("temperature must be in [0, 2]");
  }
  if (max_tokens <= 0) fail("max_tokens must be positive");
  if (timeout.count() <= 0) fail("timeout must be positive");
  if (max_retries < 0) fail("max_retries must be >= 0");
}

void ClientConfig::ApplyEnvironment() {
  if (base_url.empty()) {
    if (const char* v = std::getenv("OPENEMMA_BASE_URL")) base_url = v;
  }
  if (api_key.empty()) {
    if (const char* v = std::getenv("OPENEMMA_API_KEY")) api_key = v;
  }
}

std::shared_ptr<HttpTransport> MakeHttplibTransport() {
  return std::make_shared<HttplibTransport>();
}

// --- hashing / encoding -------------------------------------------------------

std::string Sha256Hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1) {
    throw std::runtime_error("SHA-256 failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(2 * len);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::string Base64Encode(std::string_view bytes) {
  std::string out(4 * ((bytes.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(
      reinterpret_cast<unsigned char*>(out.data()),
      reinterpret_cast<const unsigned char*>(bytes.data()),
      static_cast<int>(bytes.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

std::string ReadImageBytes(const std::filesystem::path& path) {
  std::error_code ec;
  const auto size = std::filesystem::file_size(path, ec);
  if (ec) {
    throw MllmError(MllmError::Kind::kImageUnreadable,
                    "image unreadable: " + path.string());
  }
  if (size > kMaxImageBytes) {
    throw MllmError(MllmError::Kind::kImageUnreadable,
                    "image exceeds 20 MB: " + path.string());
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw MllmError(MllmError::Kind::kImageUnreadable,
                    "image unreadable: " + path.string());
  }
  std::string bytes(size, '\0');
  in.read(bytes.data(), static_cast<std::streamsize>(size));
  if (static_cast<std::uintmax_t>(in.gcount()) != size) {
    throw MllmError(MllmError::Kind::kImageUnreadable,
                    "short read: " + path.string());
  }
  return bytes;
}

std::string Fingerprint(const PromptBundle& bundle, const std::string& model,
                        double temperature) {
  json images = json::array();
  for (const auto& img : bundle.images) {
    images.push_back({{"mime", img.mime_type},
                      {"sha256", Sha256Hex(ReadImageBytes(img.path))}});
  }
  const json canonical = {
      {"model", model},
      {"temperature", temperature},
      {"texts", json::array({bundle.system_text, bundle.user_text})},
      {"images", std::move(images)},
  };
  return Sha256Hex(canonical.dump());
}

// --- live client ----------------------------------------------------------------

OpenAiChatClient::OpenAiChatClient(ClientConfig config,
                                   std::shared_ptr<HttpTransport> transport,
                                   RetryPolicy retry)
    : config_(std::move(config)),
      transport_(transport ? std::move(transport) : MakeHttplibTransport()),
      retry_(std::move(retry)),
      rng_(retry_.jitter_seed) {
  config_.Validate();
  if (!retry_.sleep) {
    retry_.sleep = [](std::chrono::milliseconds d) {
      std::this_thread::sleep_for(d);
    };
  }
}

std::string OpenAiChatClient::BuildRequestBody(const PromptBundle& bundle) const {
  json messages = json::array();
  if (!bundle.system_text.empty()) {
    messages.push_back({{"role", "system"}, {"content", bundle.system_text}});
  }
  json parts = json::array();
  parts.push_back({{"type", "text"}, {"text", bundle.user_text}});
  for (const auto& img : bundle.images) {
    const std::string uri = "data:" + img.mime_type + ";base64," +
                            Base64Encode(ReadImageBytes(img.path));
    parts.push_back(
        {{"type", "image_url"}, {"image_url", {{"url", uri}}}});
  }
  messages.push_back({{"role", "user"}, {"content", std::move(parts)}});
  const json body = {
      {"model", config_.model},
      {"messages", std::move(messages)},
      {"temperature", config_.temperature},
      {"max_tokens", config_.max_tokens},
      {"stream", false},
  };
  return body.dump();
}

std::chrono::milliseconds OpenAiChatClient::NextBackoff(int retry_index) {
  const double cap = static_cast<double>(retry_.base.count()) *
                     std::pow(retry_.factor, retry_index);
  std::lock_guard lock(rng_mu_);
  std::uniform_real_distribution<double> jitter(0.0, cap);
  return std::chrono::milliseconds(static_cast<long long>(jitter(rng_)));
}

ChatResponse OpenAiChatClient::Complete(const PromptBundle& bundle) {
  // Built once so every retry resends the identical payload.
  const std::string body = BuildRequestBody(bundle);
  const std::string url = RequestUrl(config_.base_url);
  std::multimap<std::string, std::string> headers;
  if (!config_.api_key.empty()) {
    headers.emplace("Authorization", "Bearer " + config_.api_key);
  }

  const auto start = std::chrono::steady_clock::now();
  std::string last_failure;
  int last_status = 0;
  for (int attempt = 0; attempt <= config_.max_retries; ++attempt) {
    if (attempt > 0) {
      total_retries_.fetch_add(1);
      retry_.sleep(NextBackoff(attempt - 1));
    }
    HttpResult res;
    try {
      res = transport_->PostJson(url, body, headers, config_.timeout);
    } catch (const TransportFailure& e) {
      last_failure = e.what();
      last_status = 0;
      continue;
    }
    if (res.status >= 200 && res.status < 300) {
      ChatResponse out = ParseChatCompletion(res.body, res.status);
      out.latency_ms = std::chrono::duration<double, std::milli>(
                           std::chrono::steady_clock::now() - start)
                           .count();
      out.attempts = attempt + 1;
      return out;
    }
    if (!Retryable(res.status)) {
      throw MllmError(MllmError::Kind::kHttp,
                      "HTTP " + std::to_string(res.status) + ": " +
                          Snippet(res.body))
          .WithStatus(res.status)
          .WithAttempts(attempt + 1);
    }
    last_status = res.status;
    last_failure = "HTTP " + std::to_string(res.status) + ": " + Snippet(res.body);
  }
  const int attempts = config_.max_retries + 1;
  if (last_status != 0) {
    throw MllmError(MllmError::Kind::kHttp,
                    last_failure + " (after " + std::to_string(attempts) +
                        " attempts)")
        .WithStatus(last_status)
        .WithAttempts(attempts);
  }
  throw MllmError(MllmError::Kind::kTransport,
                  "transport failure after " + std::to_string(attempts) +
                      " attempts: " + last_failure)
      .WithAttempts(attempts);
}

ChatResponse ParseChatCompletion(const std::string& body, int http_status) {
  json doc = json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (doc.is_discarded() || !doc.is_object()) {
    throw MllmError(MllmError::Kind::kHttp,
                    "malformed response body: " + Snippet(body))
        .WithStatus(http_status);
  }
  ChatResponse out;
  if (auto usage = doc.find("usage"); usage != doc.end() && usage->is_object()) {
    out.prompt_tokens = usage->value("prompt_tokens", 0);
    out.completion_tokens = usage->value("completion_tokens", 0);
  }
  auto choices = doc.find("choices");
  if (choices == doc.end() || !choices->is_array() || choices->empty()) {
    throw MllmError(MllmError::Kind::kEmptyCompletion, "response has no choices");
  }
  const json& first = (*choices)[0];
  const json* content = nullptr;
  if (auto msg = first.find("message"); msg != first.end() && msg->is_object()) {
    if (auto c = msg->find("content"); c != msg->end()) content = &*c;
  }
  if (content && content->is_string()) {
    out.text = content->get<std::string>();
  } else if (content && content->is_array()) {
    for (const auto& part : *content) {
      if (part.is_object() && part.value("type", "") == "text") {
        out.text += part.value("text", "");
      }
    }
  }
  if (out.text.empty()) {
    throw MllmError(MllmError::Kind::kEmptyCompletion,
                    "first choice has no text content");
  }
  return out;
}

// --- stores -------------------------------------------------------------------

ReplayStore ReplayStore::FromString(const std::string& jsonl) {
  ReplayStore store;
  std::istringstream in(jsonl);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (rec.is_discarded() || !rec.is_object() || !rec.contains("key") ||
        !rec.contains("text") || !rec["key"].is_string() ||
        !rec["text"].is_string()) {
      throw MllmError(MllmError::Kind::kStoreCorrupt,
                      "replay store corrupt at line " + std::to_string(line_no))
          .WithLine(line_no);
    }
    auto key = rec["key"].get<std::string>();
    if (store.entries_.emplace(key, rec["text"].get<std::string>()).second) {
      store.order_.push_back(std::move(key));
    }
  }
  return store;
}

ReplayStore ReplayStore::Load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw MllmError(MllmError::Kind::kStoreCorrupt,
                    "cannot open replay store " + path.string());
  }
  std::ostringstream buf;
  buf << in.rdbuf();
  return FromString(buf.str());
}

const std::string& ReplayStore::Get(const std::string& key) const {
  auto it = entries_.find(key);
  if (it == entries_.end()) {
    throw MllmError(MllmError::Kind::kReplayMiss, "replay miss for key " + key);
  }
  return it->second;
}

bool ReplayStore::Contains(const std::string& key) const {
  return entries_.count(key) != 0;
}

RecordStore::RecordStore(const std::filesystem::path& path)
    : out_(path, std::ios::binary | std::ios::app) {
  if (!out_) {
    throw MllmError(MllmError::Kind::kStoreCorrupt,
                    "cannot open record store " + path.string());
  }
}

void RecordStore::Put(const std::string& key, const std::string& text) {
  const std::string line = json{{"key", key}, {"text", text}}.dump() + "\n";
  std::lock_guard lock(mu_);
  out_ << line;
  out_.flush();
}

ReplayBackend::ReplayBackend(std::shared_ptr<const ReplayStore> store,
                             std::string model, double temperature)
    : store_(std::move(store)), model_(std::move(model)),
      temperature_(temperature) {}

ChatResponse ReplayBackend::Complete(const PromptBundle& bundle) {
  ChatResponse out;
  out.text = store_->Get(Fingerprint(bundle, model_, temperature_));
  out.latency_ms = 0.0;
  return out;
}

RecordingBackend::RecordingBackend(ChatBackend& inner, RecordStore& store,
                                   std::string model, double temperature)
    : inner_(inner), store_(store), model_(std::move(model)),
      temperature_(temperature) {}

ChatResponse RecordingBackend::Complete(const PromptBundle& bundle) {
  const std::string key = Fingerprint(bundle, model_, temperature_);
  ChatResponse out = inner_.Complete(bundle);
  store_.Put(key, out.text);
  return out;
}

}  // namespace cotplan
