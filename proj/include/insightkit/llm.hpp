#pragma once
// Provider abstraction over chat completion and text embedding.

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "insightkit/config.hpp"
#include "insightkit/model.hpp"

namespace insightkit {

enum class Channel { analysis, ie_agent, io_agent, semantic_score };
INSIGHTKIT_ENUM_NAMES(Channel, {Channel::analysis, "analysis"}, {Channel::ie_agent, "ie_agent"},
                      {Channel::io_agent, "io_agent"},
                      {Channel::semantic_score, "semantic_score"});

enum class Role { system, user, assistant, tool };
INSIGHTKIT_ENUM_NAMES(Role, {Role::system, "system"}, {Role::user, "user"},
                      {Role::assistant, "assistant"}, {Role::tool, "tool"});

struct ChatMessage {
  Role role = Role::user;
  std::string content;
};

struct ToolSchema {
  std::string name;
  std::string description;
  json parameters = json::object();
};

struct ChatRequest {
  Channel channel = Channel::analysis;
  std::vector<ChatMessage> messages;
  std::vector<ToolSchema> tools;
  double temperature = 0.0;
};

struct ToolCall {
  std::string name;
  json arguments = json::object();

  bool operator==(const ToolCall&) const = default;
};

struct ChatResponse {
  std::string content;
  std::vector<ToolCall> tool_calls;
  std::string finish_reason = "stop";
};

struct EmbeddingVector {
  std::vector<double> values;
  std::string source_text;
};

// Receives content deltas in order; their concatenation equals the final content.
using StreamSink = std::function<void(std::string_view delta)>;

enum class ProviderErrorKind { transport, status, timeout, invalid_response };
INSIGHTKIT_ENUM_NAMES(ProviderErrorKind, {ProviderErrorKind::transport, "transport"},
                      {ProviderErrorKind::status, "status"},
                      {ProviderErrorKind::timeout, "timeout"},
                      {ProviderErrorKind::invalid_response, "invalid_response"});

// A provider call failed after all retries. Callers degrade gracefully.
class ProviderError : public std::runtime_error {
 public:
  ProviderError(ProviderErrorKind kind, std::optional<Channel> channel, int attempts,
                const std::string& detail, int http_status = 0);

  ProviderErrorKind kind() const { return kind_; }
  std::optional<Channel> channel() const { return channel_; }
  int attempts() const { return attempts_; }
  int http_status() const { return http_status_; }

 private:
  ProviderErrorKind kind_;
  std::optional<Channel> channel_;
  int attempts_;
  int http_status_;
};

// A scripted fixture cannot serve a request. This is a harness failure and
// is never swallowed by the pipeline.
class FixtureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class Provider {
 public:
  virtual ~Provider() = default;
  virtual ChatResponse complete(const ChatRequest& request, const StreamSink& sink = {}) = 0;
  virtual std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) = 0;
};

// Throws std::invalid_argument on dimension mismatch or a zero vector.
double cosine_similarity(std::span<const double> u, std::span<const double> v);
double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v);

// ---------------------------------------------------------------------------

// Replays a fixture file:
//   {"chat": {channel: [response, ...]}, "embeddings": {text: [floats]}}
// Responses are served FIFO per channel. A response is either a string or an
// object with "content", optional "chunks" (streamed pieces), "tool_calls",
// "finish_reason", or "error" ({"kind", "status", "message"}) to simulate a
// provider failure.
class ScriptedProvider final : public Provider {
 public:
  explicit ScriptedProvider(const json& fixture, std::size_t embedding_dim = 0);

  ChatResponse complete(const ChatRequest& request, const StreamSink& sink = {}) override;
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;

  std::size_t remaining(Channel channel) const;
  std::size_t served(Channel channel) const;

 private:
  struct Entry {
    ChatResponse response;
    std::vector<std::string> chunks;
    std::optional<json> error;
  };

  mutable std::mutex mutex_;
  std::map<Channel, std::vector<Entry>> queues_;
  std::map<Channel, std::size_t> cursor_;
  std::map<std::string, std::vector<double>> embeddings_;
};

// Decorator that appends every served response to an in-memory fixture. The
// transcript replays through ScriptedProvider with identical results.
class RecordingProvider final : public Provider {
 public:
  explicit RecordingProvider(Provider& inner) : inner_(inner) {}

  ChatResponse complete(const ChatRequest& request, const StreamSink& sink = {}) override;
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;

  json transcript() const;

 private:
  Provider& inner_;
  mutable std::mutex mutex_;
  json chat_ = json::object();
  json embeddings_ = json::object();
};

// Chat-completions compatible HTTP client with SSE streaming, bounded retries
// with exponential backoff, and an /embeddings call.
class LiveProvider final : public Provider {
 public:
  LiveProvider(ProviderConfig config, std::string api_key);

  ChatResponse complete(const ChatRequest& request, const StreamSink& sink = {}) override;
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override;

  // Request body for the chat-completions endpoint (exposed for tests).
  json request_body(const ChatRequest& request, bool stream) const;

 private:
  ProviderConfig config_;
  std::string api_key_;
  std::string origin_;     // scheme://host[:port]
  std::string base_path_;  // e.g. /v1
};

void to_json(json& j, const ChatResponse& v);

}  // namespace insightkit
