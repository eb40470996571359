#pragma once
// Per-turn insight pipeline: extraction, evidence binding, data context,
// scoring, topic assignment, related insights and transitions. Every result
// reaches the session as an event.

#include <map>
#include <string>
#include <utility>
#include <vector>

#include "insightkit/extraction.hpp"
#include "insightkit/llm.hpp"
#include "insightkit/organization.hpp"
#include "insightkit/session.hpp"

namespace insightkit {

class InsightPipeline {
 public:
  InsightPipeline(Session& session, Provider& provider);

  // Processes one completed turn. A provider failure during extraction emits
  // pipeline_error and leaves the turn unprocessed; FixtureError propagates.
  void process_turn(const ConversationTurn& turn);

  // Re-runs every turn recorded as unprocessed, oldest first.
  void retry_unprocessed();

 private:
  void add_insight(const InsightDelta& delta, const BoundEvidence& bound,
                   const ConversationTurn& turn);
  void organize(Insight insight);
  // (main topic id, subtopic id); parks in the reserved topic on failure.
  std::pair<std::string, std::string> place(const Insight& insight,
                                            const std::vector<double>& embedding);
  std::string resolve(const TopicDecision& decision, TopicLevel level, const Topic* parent);
  void ensure_unclassified();
  const std::vector<double>& summary_embedding(const std::string& summary);
  void emit_diagnostics(const std::vector<Diagnostic>& diagnostics);

  Session& session_;
  Provider& provider_;
  std::map<std::string, std::vector<double>> embeddings_;
};

}  // namespace insightkit
