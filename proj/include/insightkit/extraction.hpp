#pragma once
// Insight extraction agent: turns a completed turn into insight deltas and
// binds their evidence to verbatim spans of the turn.

#include <optional>
#include <set>
#include <string>
#include <vector>

#include "insightkit/config.hpp"
#include "insightkit/llm.hpp"
#include "insightkit/model.hpp"

namespace insightkit {

enum class DeltaAction { identify_new, refine_existing };
INSIGHTKIT_ENUM_NAMES(DeltaAction, {DeltaAction::identify_new, "identify_new"},
                      {DeltaAction::refine_existing, "refine_existing"});

// Evidence as the agent states it, before binding.
struct AgentEvidence {
  int block_index = 0;
  std::optional<EvidenceKind> kind;
  std::optional<std::string> quote;
  std::optional<std::size_t> start;
  std::optional<std::size_t> end;
  std::optional<TurnId> turn_id;

  bool operator==(const AgentEvidence&) const = default;
};

struct InsightDelta {
  DeltaAction action = DeltaAction::identify_new;
  std::optional<std::string> target;
  std::string summary;
  std::vector<AgentEvidence> evidence;
  std::vector<InsightCategory> category_votes;

  bool operator==(const InsightDelta&) const = default;
};

struct MemoryEntry {
  std::string insight_id;
  std::string summary;
  int s_sem = 3;
};

struct AgentMemory {
  std::vector<MemoryEntry> entries;  // created_seq order
};

AgentMemory build_memory(const std::vector<Insight>& insights);

// The newest `budget` entries are listed in full; older ones become one
// shortened digest line each.
std::string render_memory(const AgentMemory& memory, std::size_t budget);

// Schema validation of the agent reply: a JSON array of delta records,
// optionally wrapped in a ```json fence. Returns the error text on failure.
struct DeltaParse {
  std::vector<InsightDelta> deltas;
  std::optional<std::string> error;
};
DeltaParse parse_deltas(std::string_view reply);

struct ExtractionOutcome {
  std::vector<InsightDelta> deltas;
  std::vector<Diagnostic> diagnostics;
  int repairs = 0;
};

// Prompts the agent; invalid replies get up to max_repair_prompts repair
// re-prompts, after which the turn yields no deltas and a diagnostic.
// ProviderError propagates.
ExtractionOutcome extract_deltas(Provider& provider, const ConversationTurn& turn,
                                 const AgentMemory& memory, const DatasetProfile& profile,
                                 const ExtractionConfig& config);

struct BoundEvidence {
  std::vector<EvidenceRef> accepted;
  std::vector<std::string> dropped;  // one reason per rejected ref
  bool degraded() const { return accepted.empty(); }
};

// Resolves each ref against the turn. Quotes must occur verbatim in the
// block (offsets are bytes); stated ranges must hold the quote or lie within
// the block; the stated kind must match the block. Failing refs are dropped.
BoundEvidence bind_evidence(const std::vector<AgentEvidence>& evidence,
                            const ConversationTurn& turn);

// Set union keyed by (turn_id, block_index, char_range); existing order first.
std::vector<EvidenceRef> merge_evidence(const std::vector<EvidenceRef>& existing,
                                        const std::vector<EvidenceRef>& added);

// Text each ref points at (the quoted span, or the whole block).
std::string evidence_text(const EvidenceRef& ref, const ConversationTurn& turn);

}  // namespace insightkit
