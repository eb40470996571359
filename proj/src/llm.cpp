#include <algorithm>
#include <cmath>

#include "insightkit/llm.hpp"

namespace insightkit {

ProviderError::ProviderError(ProviderErrorKind kind, std::optional<Channel> channel, int attempts,
                             const std::string& detail, int http_status)
    : std::runtime_error("provider " + std::string(to_string(kind)) + " error" +
                         (channel ? " on channel " + std::string(to_string(*channel)) : "") +
                         " after " + std::to_string(attempts) + " attempt(s): " + detail),
      kind_(kind),
      channel_(channel),
      attempts_(attempts),
      http_status_(http_status) {}

double cosine_similarity(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw std::invalid_argument("embedding dimension mismatch: " + std::to_string(u.size()) +
                                " vs " + std::to_string(v.size()));
  }
  double dot = 0.0;
  double nu = 0.0;
  double nv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    dot += u[i] * v[i];
    nu += u[i] * u[i];
    nv += v[i] * v[i];
  }
  if (nu == 0.0 || nv == 0.0) throw std::invalid_argument("cosine similarity of a zero vector");
  return std::clamp(dot / (std::sqrt(nu) * std::sqrt(nv)), -1.0, 1.0);
}

double cosine_similarity(const EmbeddingVector& u, const EmbeddingVector& v) {
  return cosine_similarity(u.values, v.values);
}

void to_json(json& j, const ChatResponse& v) {
  if (v.tool_calls.empty() && v.finish_reason == "stop") {
    j = v.content;
    return;
  }
  j = json{{"content", v.content}, {"finish_reason", v.finish_reason}};
  json calls = json::array();
  for (const auto& c : v.tool_calls) calls.push_back({{"name", c.name}, {"arguments", c.arguments}});
  j["tool_calls"] = std::move(calls);
}

// ---------------------------------------------------------------------------

ScriptedProvider::ScriptedProvider(const json& fixture, std::size_t embedding_dim) {
  if (auto chat = fixture.find("chat"); chat != fixture.end()) {
    for (const auto& [name, responses] : chat->items()) {
      const auto channel = try_enum_from_string<Channel>(name);
      if (!channel) throw FixtureError("fixture names unknown channel '" + name + "'");
      auto& queue = queues_[*channel];
      for (const auto& r : responses) {
        Entry e;
        if (r.is_string()) {
          e.response.content = r.get<std::string>();
        } else if (r.is_object()) {
          if (auto err = r.find("error"); err != r.end()) e.error = *err;
          if (auto chunks = r.find("chunks"); chunks != r.end()) {
            e.chunks = chunks->get<std::vector<std::string>>();
            for (const auto& c : e.chunks) e.response.content += c;
          } else {
            e.response.content = r.value("content", "");
          }
          e.response.finish_reason = r.value("finish_reason", "stop");
          if (auto calls = r.find("tool_calls"); calls != r.end()) {
            for (const auto& c : *calls) {
              e.response.tool_calls.push_back(
                  {c.at("name").get<std::string>(), c.value("arguments", json::object())});
            }
          }
        } else {
          throw FixtureError("fixture response on channel '" + name +
                             "' must be a string or an object");
        }
        queue.push_back(std::move(e));
      }
    }
  }
  if (auto emb = fixture.find("embeddings"); emb != fixture.end()) {
    for (const auto& [text, values] : emb->items()) {
      auto v = values.get<std::vector<double>>();
      if (embedding_dim != 0 && v.size() != embedding_dim) {
        throw FixtureError("embedding fixture for \"" + text + "\" has dimension " +
                           std::to_string(v.size()) + ", expected " +
                           std::to_string(embedding_dim));
      }
      embeddings_.emplace(text, std::move(v));
    }
  }
}

ChatResponse ScriptedProvider::complete(const ChatRequest& request, const StreamSink& sink) {
  if (request.messages.empty()) throw std::invalid_argument("chat request without messages");
  Entry entry;
  std::size_t seq = 0;
  {
    std::lock_guard lock(mutex_);
    auto& queue = queues_[request.channel];
    auto& cursor = cursor_[request.channel];
    seq = cursor + 1;
    if (cursor >= queue.size()) {
      throw FixtureError("fixture exhausted: channel " + std::string(to_string(request.channel)) +
                         " (request #" + std::to_string(seq) + ")");
    }
    entry = queue[cursor++];
  }
  if (entry.error) {
    const auto kind = try_enum_from_string<ProviderErrorKind>(entry.error->value("kind", "status"))
                          .value_or(ProviderErrorKind::status);
    throw ProviderError(kind, request.channel, 1,
                        entry.error->value("message", "scripted failure (request #" +
                                                          std::to_string(seq) + ")"),
                        entry.error->value("status", 0));
  }
  if (sink) {
    if (entry.chunks.empty()) {
      if (!entry.response.content.empty()) sink(entry.response.content);
    } else {
      for (const auto& c : entry.chunks) sink(c);
    }
  }
  return entry.response;
}

std::vector<EmbeddingVector> ScriptedProvider::embed(const std::vector<std::string>& texts) {
  if (texts.empty()) throw std::invalid_argument("embed called with no texts");
  std::vector<EmbeddingVector> out;
  std::string missing;
  std::lock_guard lock(mutex_);
  for (const auto& t : texts) {
    auto it = embeddings_.find(t);
    if (it == embeddings_.end()) {
      missing += (missing.empty() ? "\"" : ", \"") + t + "\"";
      continue;
    }
    out.push_back({it->second, t});
  }
  if (!missing.empty()) throw FixtureError("missing embedding fixture: " + missing);
  return out;
}

std::size_t ScriptedProvider::remaining(Channel channel) const {
  std::lock_guard lock(mutex_);
  const auto q = queues_.find(channel);
  const auto c = cursor_.find(channel);
  const std::size_t total = q == queues_.end() ? 0 : q->second.size();
  const std::size_t used = c == cursor_.end() ? 0 : c->second;
  return total - used;
}

std::size_t ScriptedProvider::served(Channel channel) const {
  std::lock_guard lock(mutex_);
  const auto c = cursor_.find(channel);
  return c == cursor_.end() ? 0 : c->second;
}

// ---------------------------------------------------------------------------

ChatResponse RecordingProvider::complete(const ChatRequest& request, const StreamSink& sink) {
  const std::string channel(to_string(request.channel));
  try {
    std::vector<std::string> chunks;
    const StreamSink tee = [&](std::string_view delta) {
      chunks.emplace_back(delta);
      if (sink) sink(delta);
    };
    // Without a caller sink the inner provider is asked for a plain completion.
    auto response = inner_.complete(request, sink ? tee : StreamSink{});
    json entry = response;
    // Recorded chunking keeps block_delta events identical on replay.
    if (chunks.size() > 1) {
      if (entry.is_string()) entry = json{{"content", response.content}};
      entry["chunks"] = chunks;
    }
    std::lock_guard lock(mutex_);
    chat_[channel].push_back(std::move(entry));
    return response;
  } catch (const ProviderError& e) {
    std::lock_guard lock(mutex_);
    chat_[channel].push_back({{"error",
                               {{"kind", to_string(e.kind())},
                                {"status", e.http_status()},
                                {"message", e.what()}}}});
    throw;
  }
}

std::vector<EmbeddingVector> RecordingProvider::embed(const std::vector<std::string>& texts) {
  auto vectors = inner_.embed(texts);
  std::lock_guard lock(mutex_);
  for (const auto& v : vectors) embeddings_[v.source_text] = v.values;
  return vectors;
}

json RecordingProvider::transcript() const {
  std::lock_guard lock(mutex_);
  return json{{"chat", chat_}, {"embeddings", embeddings_}};
}

}  // namespace insightkit
