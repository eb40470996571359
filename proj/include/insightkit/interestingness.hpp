#pragma once
// Semantic (agent-judged) and statistical interestingness, combined into the
// final 1-5 score.

#include <optional>
#include <string>
#include <vector>

#include "insightkit/config.hpp"
#include "insightkit/dataset.hpp"
#include "insightkit/llm.hpp"
#include "insightkit/metrics.hpp"

namespace insightkit {

struct SemanticReply {
  int value = 3;
  std::string rationale;
  bool clamped = false;
};

// Accepts a leading integer ("5 - reason", "**4**: reason") or a JSON object
// {"score", "rationale"}. Out-of-range integers are clamped and flagged.
std::optional<SemanticReply> parse_semantic_reply(std::string_view reply);

struct PriorScore {
  std::string insight_id;
  std::string summary;
  int s_sem = 3;
};

struct SemanticRequest {
  std::string dataset_name;
  std::string user_query;
  std::string insight;
  std::vector<PriorScore> prior_scores;
};

struct SemanticOutcome {
  int s_sem = 3;
  std::string rationale;
  std::vector<Diagnostic> diagnostics;
};

inline constexpr const char* kDefaultedRationale = "defaulted";

// One repair re-prompt on an unparseable reply, then 3 / "defaulted". A
// provider failure also yields 3 / "defaulted" with a diagnostic.
SemanticOutcome semantic_score(Provider& provider, const SemanticRequest& request);

struct ScoreOutcome {
  InterestingnessScore score;
  std::optional<MetricReading> reading;
  std::vector<Diagnostic> diagnostics;
};

ScoreOutcome score_insight(Provider& provider, const SemanticRequest& request,
                           InsightCategory category, const DataContext& context,
                           const Dataset& data, const InterestingnessConfig& config);

// Votes tally; ties go to the earliest-listed category; no votes -> other.
InsightCategory majority_vote(const std::vector<InsightCategory>& votes);

}  // namespace insightkit
