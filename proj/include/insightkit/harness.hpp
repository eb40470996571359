#pragma once
// Headless operation: fixture replay, batch extraction over recorded turns,
// and the evaluation arithmetic over human labels.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "insightkit/config.hpp"
#include "insightkit/session.hpp"

namespace insightkit {

// Invalid input or an exhausted fixture. The message names the channel and
// the event seq at which the run stopped.
class HarnessError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Replay bundle: {"queries": [text], "chat": {channel: [...]},
// "embeddings": {text: [floats]}, "executions": [...]}.
struct ReplayOutput {
  SessionState state;
  json transcript;
};

// Runs every query through analysis chat and the insight pipeline with
// scripted providers and a logical clock. With an out directory, writes
// snapshot.json, events.jsonl, insights.json, topics.json and
// transcript.fixture.json.
ReplayOutput replay(const std::filesystem::path& dataset, const std::filesystem::path& fixtures,
                    const Config& config, const std::optional<std::filesystem::path>& out);

struct ExtractReport {
  SessionState state;
  std::size_t turns = 0;

  json to_json() const;  // counts, diagnostic counters, unprocessed turns
};

// Feeds a recorded turn list (array of ConversationTurn, or {"turns": [...]})
// straight into extraction and organization. With an out directory, writes
// insights.json, topics.json, events.jsonl and report.json.
ExtractReport extract(const std::filesystem::path& transcript, const std::filesystem::path& dataset,
                      const std::filesystem::path& fixtures, const Config& config,
                      const std::optional<std::filesystem::path>& out);

// Exact ratio with a one-decimal percentage; undefined when the denominator is 0.
struct Ratio {
  std::int64_t numerator = 0;
  std::int64_t denominator = 0;

  std::optional<std::string> percent() const;
};

// floor(1000 * n / d + 1/2) / 10 in exact integer arithmetic, e.g. "88.5".
std::string format_percent(std::int64_t numerator, std::int64_t denominator);

// Labels: {"labeled_insights": [{"label_id", "matched": [insight ids]}],
//          "insights": {insight id: {"evidence_correct", "context_correct",
//                                      "gold_topic"}}}
// Each accuracy's denominator is the number of insights carrying that key.
struct EvalReport {
  Ratio coverage;
  Ratio evidence_accuracy;
  Ratio context_accuracy;
  Ratio topic_accuracy;

  json to_json() const;
};

EvalReport evaluate(const json& snapshot, const json& labels);
EvalReport evaluate(const std::filesystem::path& snapshot, const std::filesystem::path& labels);

json parse_json_file(const std::filesystem::path& path);

}  // namespace insightkit
