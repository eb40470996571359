#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>

#include "insightkit/model.hpp"

namespace insightkit {

// Half-open score ladder: value < cuts[0] -> 1, < cuts[1] -> 2, ..., else 5.
struct ScoreLadder {
  std::array<double, 4> cuts{};

  int score(double value) const;
  bool operator==(const ScoreLadder&) const = default;
};

struct InterestingnessConfig {
  double omega = kDefaultOmega;
  ScoreLadder correlation{{0.2, 0.4, 0.6, 0.8}};  // |pearson_r| and linear_r2
  ScoreLadder z_score{{1.5, 2.0, 2.5, 3.0}};
  ScoreLadder coeff_variation{{0.1, 0.25, 0.5, 1.0}};
  ScoreLadder gap{{0.05, 0.15, 0.3, 0.5}};  // top_gap_ratio and relative_diff
  ScoreLadder share{{0.3, 0.45, 0.6, 0.8}};
};

struct ExtractionConfig {
  int max_repair_prompts = 2;
  std::size_t memory_budget = 50;
};

struct OrganizationConfig {
  double topic_threshold = 0.55;
  int max_generation_attempts = 3;
  std::size_t semantic_top_k = 5;
};

struct ChatConfig {
  int max_iterations = 4;
  std::int64_t exec_timeout_ms = 30'000;
  std::string python = "python3";
};

struct ProviderConfig {
  std::string endpoint = "https://api.openai.com/v1";
  std::string chat_model = "gpt-4-0125-preview";
  std::string embedding_model = "all-MiniLM-L6-v1";
  std::string api_key_env = "OPENAI_API_KEY";
  std::int64_t timeout_ms = 120'000;
  int max_retries = 2;
  std::int64_t backoff_ms = 500;
  std::size_t embedding_dim = 384;
};

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string cors_origin = "*";
  std::filesystem::path sessions_dir = "sessions";
};

struct Config {
  InterestingnessConfig interestingness;
  ExtractionConfig extraction;
  OrganizationConfig organization;
  ChatConfig chat;
  ProviderConfig provider;
  ServerConfig server;
};

// Missing keys keep their defaults; unknown keys are rejected.
Config config_from_json(const json& j);
Config load_config(const std::filesystem::path& path);

// The session-relevant subset echoed into snapshots (no secrets, no paths).
json config_echo(const Config& config);

}  // namespace insightkit
