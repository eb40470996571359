#pragma once
// Insight organization agent: data context, two-level topic assignment,
// related insights and context transitions.

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "insightkit/config.hpp"
#include "insightkit/llm.hpp"
#include "insightkit/model.hpp"

namespace insightkit {

struct SessionEvent;

// Reserved parking topic for insights whose classification failed.
inline constexpr const char* kUnclassifiedTopic = "unclassified";
inline constexpr const char* kUnclassifiedSubtopic = "unclassified.general";

// ---------------------------------------------------------------------------
// Data context

struct ContextParse {
  DataContext context;
  std::vector<std::string> fabricated;  // names not in the schema, dropped
  std::vector<std::string> dropped_actions;
  std::optional<std::string> error;
};

ContextParse parse_context_reply(std::string_view reply, const DatasetProfile& profile);

struct ContextOutcome {
  DataContext context;
  std::vector<Diagnostic> diagnostics;
  bool failed = false;  // provider failure; the context is empty and retriable
};

ContextOutcome determine_data_context(Provider& provider, const std::string& summary,
                                      const std::vector<std::string>& evidence_texts,
                                      const DatasetProfile& profile);

// ---------------------------------------------------------------------------
// Topics

enum class TopicLevel { main, sub };

std::string topic_embedding_text(const std::string& title, const std::string& description);

struct RejectedCandidate {
  std::string title;
  std::string description;
  std::string conflict_topic_id;
  double similarity = 0.0;
  int attempt = 0;
};

struct TopicDecision {
  std::optional<std::string> selected;  // an existing sibling
  std::optional<std::string> title;     // generated, accepted
  std::optional<std::string> description;
  std::vector<double> embedding;  // of the generated title
  std::vector<RejectedCandidate> rejected;
  bool fallback = false;  // attempts exhausted, most similar candidate selected
  std::vector<Diagnostic> diagnostics;

  bool parked() const { return !selected && !title; }
};

// Selects a sibling or generates a new title whose similarity to every
// sibling is at most the threshold. Rejected generations are re-prompted up
// to max_generation_attempts in total; then the most similar sibling is
// selected. With no sibling to fall back on the decision is parked.
// ProviderError propagates.
TopicDecision assign_topic(Provider& provider, const OrganizationConfig& config,
                           const std::string& insight_summary,
                           const std::vector<double>& insight_embedding, TopicLevel level,
                           std::span<const Topic> siblings, const Topic* parent,
                           const std::string& dataset_description);

// ---------------------------------------------------------------------------
// Related insights and transitions

struct PriorInsight {
  const Insight* insight = nullptr;
  std::vector<double> embedding;
};

struct Related {
  std::vector<std::string> data_related;
  std::vector<RelatedInsight> semantic_related;
};

// data_related: non-empty attribute intersection, larger intersection first,
// then larger created_seq. semantic_related: top_k by cosine similarity,
// ties by larger created_seq. The insight itself is never listed.
Related related_insights(const std::string& insight_id, const DataContext& context,
                         const std::vector<double>& embedding,
                         std::span<const PriorInsight> priors, std::size_t top_k);

// history holds the contexts of earlier insights, oldest first.
Transition classify_transition(const std::set<std::string>& current,
                               std::span<const std::set<std::string>> history);

// ---------------------------------------------------------------------------
// Audit

struct ThresholdAudit {
  int generated_topics = 0;
  int rejected_candidates = 0;
  std::vector<std::string> violations;  // topics too similar to a sibling at creation
  double max_sibling_similarity = -1.0;  // over all generated topics
};

// Replays topic_added events and checks every generated topic against the
// siblings that existed when it was created.
ThresholdAudit audit_topic_threshold(std::span<const SessionEvent> events, double threshold);

}  // namespace insightkit
