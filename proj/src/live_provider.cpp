#include <algorithm>
#include <chrono>
#include <thread>

#include <httplib.h>

#include "insightkit/llm.hpp"
#include "insightkit/sse.hpp"

namespace insightkit {

namespace {

struct AttemptFailure {
  ProviderErrorKind kind;
  std::string detail;
  int status = 0;
  bool transient = true;
};

bool transient_status(int status) { return status == 408 || status == 429 || status >= 500; }

json parse_arguments(const std::string& raw) {
  if (raw.empty()) return json::object();
  auto parsed = json::parse(raw, nullptr, false);
  if (parsed.is_discarded()) return json{{"_raw", raw}};
  return parsed;
}

}  // namespace

LiveProvider::LiveProvider(ProviderConfig config, std::string api_key)
    : config_(std::move(config)), api_key_(std::move(api_key)) {
  const std::string& url = config_.endpoint;
  const auto scheme = url.find("://");
  if (scheme == std::string::npos) {
    throw std::invalid_argument("provider endpoint must include a scheme: " + url);
  }
  const auto path = url.find('/', scheme + 3);
  origin_ = url.substr(0, path);
  base_path_ = path == std::string::npos ? "" : url.substr(path);
  while (!base_path_.empty() && base_path_.back() == '/') base_path_.pop_back();
}

json LiveProvider::request_body(const ChatRequest& request, bool stream) const {
  json messages = json::array();
  for (const auto& m : request.messages) {
    messages.push_back({{"role", to_string(m.role)}, {"content", m.content}});
  }
  json body{{"model", config_.chat_model},
            {"messages", std::move(messages)},
            {"temperature", request.temperature},
            {"stream", stream}};
  if (!request.tools.empty()) {
    json tools = json::array();
    for (const auto& t : request.tools) {
      tools.push_back({{"type", "function"},
                       {"function",
                        {{"name", t.name},
                         {"description", t.description},
                         {"parameters", t.parameters}}}});
    }
    body["tools"] = std::move(tools);
  }
  return body;
}

namespace {

// One HTTP exchange; throws AttemptFailure.
std::string post_once(const std::string& origin, const std::string& path, const std::string& key,
                      const std::string& body, std::int64_t timeout_ms,
                      const std::function<void(std::string_view)>& on_chunk) {
  httplib::Client client(origin);
  const auto timeout = std::chrono::milliseconds(timeout_ms);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);

  httplib::Request req;
  req.method = "POST";
  req.path = path;
  req.body = body;
  req.set_header("Content-Type", "application/json");
  if (!key.empty()) req.set_header("Authorization", "Bearer " + key);

  int status = 0;
  std::string error_body;
  std::string whole;
  req.response_handler = [&](const httplib::Response& r) {
    status = r.status;
    return true;
  };
  req.content_receiver = [&](const char* data, size_t len, uint64_t, uint64_t) {
    std::string_view chunk(data, len);
    if (status != 200) {
      error_body.append(chunk);
    } else if (on_chunk) {
      on_chunk(chunk);
    } else {
      whole.append(chunk);
    }
    return true;
  };

  const auto started = std::chrono::steady_clock::now();
  auto result = client.send(req);
  if (!result) {
    const auto err = result.error();
    const auto elapsed = std::chrono::steady_clock::now() - started;
    const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                           (err == httplib::Error::Read && elapsed >= timeout);
    throw AttemptFailure{timed_out ? ProviderErrorKind::timeout : ProviderErrorKind::transport,
                         httplib::to_string(err)};
  }
  if (status != 200) {
    throw AttemptFailure{ProviderErrorKind::status,
                         "HTTP " + std::to_string(status) + ": " + error_body.substr(0, 500),
                         status, transient_status(status)};
  }
  return whole;
}

}  // namespace

ChatResponse LiveProvider::complete(const ChatRequest& request, const StreamSink& sink) {
  if (request.messages.empty()) throw std::invalid_argument("chat request without messages");
  const bool stream = static_cast<bool>(sink);
  const std::string body = request_body(request, stream).dump();
  const int max_attempts = std::max(1, config_.max_retries + 1);

  for (int attempt = 1;; ++attempt) {
    ChatResponse response;
    bool emitted = false;
    try {
      if (!stream) {
        const auto raw = post_once(origin_, base_path_ + "/chat/completions", api_key_, body,
                                   config_.timeout_ms, {});
        const auto parsed = json::parse(raw, nullptr, false);
        if (parsed.is_discarded() || !parsed.contains("choices") || parsed["choices"].empty()) {
          throw ProviderError(ProviderErrorKind::invalid_response, request.channel, attempt,
                              "unparseable completion body");
        }
        const auto& choice = parsed["choices"][0];
        const auto& message = choice.value("message", json::object());
        if (message.contains("content") && message["content"].is_string()) {
          response.content = message["content"].get<std::string>();
        }
        for (const auto& call : message.value("tool_calls", json::array())) {
          const auto& fn = call.value("function", json::object());
          response.tool_calls.push_back(
              {fn.value("name", ""), parse_arguments(fn.value("arguments", ""))});
        }
        if (choice.contains("finish_reason") && choice["finish_reason"].is_string()) {
          response.finish_reason = choice["finish_reason"].get<std::string>();
        }
        return response;
      }

      sse::Decoder decoder;
      std::map<int, std::pair<std::string, std::string>> calls;  // index -> (name, arguments)
      bool malformed = false;
      post_once(origin_, base_path_ + "/chat/completions", api_key_, body, config_.timeout_ms,
                [&](std::string_view chunk) {
                  for (const auto& msg : decoder.feed(chunk)) {
                    if (msg.data == "[DONE]") continue;
                    const auto event = json::parse(msg.data, nullptr, false);
                    if (event.is_discarded() || !event.contains("choices") ||
                        event["choices"].empty()) {
                      malformed = true;
                      continue;
                    }
                    const auto& choice = event["choices"][0];
                    const auto& delta = choice.value("delta", json::object());
                    if (delta.contains("content") && delta["content"].is_string()) {
                      const auto piece = delta["content"].get<std::string>();
                      if (!piece.empty()) {
                        response.content += piece;
                        emitted = true;
                        sink(piece);
                      }
                    }
                    for (const auto& call : delta.value("tool_calls", json::array())) {
                      auto& slot = calls[call.value("index", 0)];
                      const auto& fn = call.value("function", json::object());
                      if (fn.contains("name") && fn["name"].is_string()) {
                        slot.first += fn["name"].get<std::string>();
                      }
                      if (fn.contains("arguments") && fn["arguments"].is_string()) {
                        slot.second += fn["arguments"].get<std::string>();
                      }
                    }
                    if (choice.contains("finish_reason") && choice["finish_reason"].is_string()) {
                      response.finish_reason = choice["finish_reason"].get<std::string>();
                    }
                  }
                });
      if (malformed && response.content.empty() && calls.empty()) {
        throw ProviderError(ProviderErrorKind::invalid_response, request.channel, attempt,
                            "stream carried no usable events");
      }
      for (auto& [index, call] : calls) {
        response.tool_calls.push_back({call.first, parse_arguments(call.second)});
      }
      return response;
    } catch (const AttemptFailure& f) {
      // Deltas already delivered cannot be retracted, so a partly streamed
      // response is never retried.
      if (!f.transient || attempt >= max_attempts || emitted) {
        throw ProviderError(f.kind, request.channel, attempt, f.detail, f.status);
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(config_.backoff_ms << (attempt - 1)));
    }
  }
}

std::vector<EmbeddingVector> LiveProvider::embed(const std::vector<std::string>& texts) {
  if (texts.empty()) throw std::invalid_argument("embed called with no texts");
  const std::string body =
      json{{"model", config_.embedding_model}, {"input", texts}}.dump();
  const int max_attempts = std::max(1, config_.max_retries + 1);
  for (int attempt = 1;; ++attempt) {
    try {
      const auto raw = post_once(origin_, base_path_ + "/embeddings", api_key_, body,
                                 config_.timeout_ms, {});
      const auto parsed = json::parse(raw, nullptr, false);
      if (parsed.is_discarded() || !parsed.contains("data") ||
          parsed["data"].size() != texts.size()) {
        throw ProviderError(ProviderErrorKind::invalid_response, std::nullopt, attempt,
                            "embedding response does not match the request");
      }
      std::vector<EmbeddingVector> out(texts.size());
      for (std::size_t i = 0; i < parsed["data"].size(); ++i) {
        const auto& item = parsed["data"][i];
        const auto index = item.value("index", i);
        if (index >= texts.size()) {
          throw ProviderError(ProviderErrorKind::invalid_response, std::nullopt, attempt,
                              "embedding index out of range");
        }
        out[index].values = item.at("embedding").get<std::vector<double>>();
        out[index].source_text = texts[index];
      }
      return out;
    } catch (const AttemptFailure& f) {
      if (!f.transient || attempt >= max_attempts) {
        throw ProviderError(f.kind, std::nullopt, attempt, f.detail, f.status);
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(config_.backoff_ms << (attempt - 1)));
    }
  }
}

}  // namespace insightkit
