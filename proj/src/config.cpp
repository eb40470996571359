#include "insightkit/config.hpp"

#include <fstream>
#include <set>
#include <stdexcept>

namespace insightkit {

int ScoreLadder::score(double value) const {
  for (std::size_t i = 0; i < cuts.size(); ++i) {
    if (value < cuts[i]) return static_cast<int>(i) + 1;
  }
  return 5;
}

namespace {

void reject_unknown(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.contains(key)) throw std::invalid_argument("unknown config key " + where + key);
  }
}

template <typename T>
void read(const json& j, const char* key, T& target) {
  if (auto it = j.find(key); it != j.end()) it->get_to(target);
}

void read_ladder(const json& j, const char* key, ScoreLadder& ladder) {
  auto it = j.find(key);
  if (it == j.end()) return;
  it->get_to(ladder.cuts);
  for (std::size_t i = 1; i < ladder.cuts.size(); ++i) {
    if (!(ladder.cuts[i - 1] < ladder.cuts[i])) {
      throw std::invalid_argument(std::string("ladder '") + key + "' must be strictly increasing");
    }
  }
}

json ladder_json(const ScoreLadder& l) { return l.cuts; }

}  // namespace

Config config_from_json(const json& j) {
  Config c;
  reject_unknown(j, {"interestingness", "extraction", "organization", "chat", "provider", "server"},
                 "");
  if (auto it = j.find("interestingness"); it != j.end()) {
    const json& s = *it;
    reject_unknown(s, {"omega", "correlation", "z_score", "coeff_variation", "gap", "share"},
                   "interestingness.");
    read(s, "omega", c.interestingness.omega);
    if (c.interestingness.omega < 0.0 || c.interestingness.omega > 1.0) {
      throw std::invalid_argument("interestingness.omega must lie in [0, 1]");
    }
    read_ladder(s, "correlation", c.interestingness.correlation);
    read_ladder(s, "z_score", c.interestingness.z_score);
    read_ladder(s, "coeff_variation", c.interestingness.coeff_variation);
    read_ladder(s, "gap", c.interestingness.gap);
    read_ladder(s, "share", c.interestingness.share);
  }
  if (auto it = j.find("extraction"); it != j.end()) {
    reject_unknown(*it, {"max_repair_prompts", "memory_budget"}, "extraction.");
    read(*it, "max_repair_prompts", c.extraction.max_repair_prompts);
    read(*it, "memory_budget", c.extraction.memory_budget);
  }
  if (auto it = j.find("organization"); it != j.end()) {
    reject_unknown(*it, {"topic_threshold", "max_generation_attempts", "semantic_top_k"},
                   "organization.");
    read(*it, "topic_threshold", c.organization.topic_threshold);
    read(*it, "max_generation_attempts", c.organization.max_generation_attempts);
    read(*it, "semantic_top_k", c.organization.semantic_top_k);
  }
  if (auto it = j.find("chat"); it != j.end()) {
    reject_unknown(*it, {"max_iterations", "exec_timeout_ms", "python"}, "chat.");
    read(*it, "max_iterations", c.chat.max_iterations);
    read(*it, "exec_timeout_ms", c.chat.exec_timeout_ms);
    read(*it, "python", c.chat.python);
  }
  if (auto it = j.find("provider"); it != j.end()) {
    reject_unknown(*it,
                   {"endpoint", "chat_model", "embedding_model", "api_key_env", "timeout_ms",
                    "max_retries", "backoff_ms", "embedding_dim"},
                   "provider.");
    read(*it, "endpoint", c.provider.endpoint);
    read(*it, "chat_model", c.provider.chat_model);
    read(*it, "embedding_model", c.provider.embedding_model);
    read(*it, "api_key_env", c.provider.api_key_env);
    read(*it, "timeout_ms", c.provider.timeout_ms);
    read(*it, "max_retries", c.provider.max_retries);
    read(*it, "backoff_ms", c.provider.backoff_ms);
    read(*it, "embedding_dim", c.provider.embedding_dim);
  }
  if (auto it = j.find("server"); it != j.end()) {
    reject_unknown(*it, {"host", "port", "cors_origin", "sessions_dir"}, "server.");
    read(*it, "host", c.server.host);
    read(*it, "port", c.server.port);
    read(*it, "cors_origin", c.server.cors_origin);
    if (auto d = it->find("sessions_dir"); d != it->end()) {
      c.server.sessions_dir = d->get<std::string>();
    }
  }
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path.string());
  return config_from_json(json::parse(in));
}

json config_echo(const Config& c) {
  const auto& s = c.interestingness;
  return json{
      {"interestingness",
       {{"omega", quantize(s.omega)},
        {"correlation", ladder_json(s.correlation)},
        {"z_score", ladder_json(s.z_score)},
        {"coeff_variation", ladder_json(s.coeff_variation)},
        {"gap", ladder_json(s.gap)},
        {"share", ladder_json(s.share)}}},
      {"extraction",
       {{"max_repair_prompts", c.extraction.max_repair_prompts},
        {"memory_budget", c.extraction.memory_budget}}},
      {"organization",
       {{"topic_threshold", quantize(c.organization.topic_threshold)},
        {"max_generation_attempts", c.organization.max_generation_attempts},
        {"semantic_top_k", c.organization.semantic_top_k}}},
      {"chat",
       {{"max_iterations", c.chat.max_iterations}, {"exec_timeout_ms", c.chat.exec_timeout_ms}}},
      {"provider",
       {{"chat_model", c.provider.chat_model},
        {"embedding_model", c.provider.embedding_model},
        {"embedding_dim", c.provider.embedding_dim}}},
  };
}

}  // namespace insightkit
