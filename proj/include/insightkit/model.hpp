#pragma once
// Shared domain types for the insight pipeline. Values only: no I/O, no
// provider calls. Every type has a canonical JSON form (snake_case fields,
// sorted keys, similarities and embeddings quantized to 6 decimals).

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

namespace insightkit {

using json = nlohmann::json;
using TurnId = std::int64_t;
using Timestamp = std::int64_t;  // milliseconds, or logical ticks in replay mode

inline constexpr std::size_t kMaxSummaryChars = 400;
inline constexpr double kDefaultOmega = 0.6;

// Rounds to 6 decimal places. Applied when a similarity or embedding enters
// the model so serialization round-trips exactly.
double quantize(double value);
std::vector<double> quantize(std::span<const double> values);

// ---------------------------------------------------------------------------
// Enumerations with stable wire names

template <typename E>
struct EnumNames;

template <typename E>
concept NamedEnum = requires { EnumNames<E>::values; };

template <NamedEnum E>
constexpr std::string_view to_string(E value) {
  for (const auto& [v, name] : EnumNames<E>::values) {
    if (v == value) return name;
  }
  return "?";
}

template <NamedEnum E>
E enum_from_string(std::string_view name) {
  for (const auto& [v, n] : EnumNames<E>::values) {
    if (n == name) return v;
  }
  throw std::invalid_argument("unknown " + std::string(EnumNames<E>::type_name) + " '" +
                              std::string(name) + "'");
}

template <NamedEnum E>
std::optional<E> try_enum_from_string(std::string_view name) {
  for (const auto& [v, n] : EnumNames<E>::values) {
    if (n == name) return v;
  }
  return std::nullopt;
}

template <NamedEnum E>
void to_json(json& j, E value) {
  j = std::string(to_string(value));
}

template <NamedEnum E>
void from_json(const json& j, E& value) {
  value = enum_from_string<E>(j.get<std::string>());
}

#define INSIGHTKIT_ENUM_NAMES(Type, ...)                                              \
  template <>                                                                         \
  struct EnumNames<Type> {                                                            \
    static constexpr std::string_view type_name = #Type;                              \
    static constexpr auto values = std::to_array<std::pair<Type, std::string_view>>( \
        {__VA_ARGS__});                                                               \
  }

enum class AttributeKind { numeric, categorical, temporal, boolean, text };
INSIGHTKIT_ENUM_NAMES(AttributeKind, {AttributeKind::numeric, "numeric"},
                      {AttributeKind::categorical, "categorical"},
                      {AttributeKind::temporal, "temporal"}, {AttributeKind::boolean, "boolean"},
                      {AttributeKind::text, "text"});

enum class BlockKind { text, code, code_output, visualization };
INSIGHTKIT_ENUM_NAMES(BlockKind, {BlockKind::text, "text"}, {BlockKind::code, "code"},
                      {BlockKind::code_output, "code_output"},
                      {BlockKind::visualization, "visualization"});

enum class EvidenceKind { code, code_output, visualization, nl_explanation };
INSIGHTKIT_ENUM_NAMES(EvidenceKind, {EvidenceKind::code, "code"},
                      {EvidenceKind::code_output, "code_output"},
                      {EvidenceKind::visualization, "visualization"},
                      {EvidenceKind::nl_explanation, "nl_explanation"});

enum class InsightCategory {
  extremum,
  trend,
  correlation,
  distribution,
  outlier,
  proportion,
  difference,
  other
};
INSIGHTKIT_ENUM_NAMES(InsightCategory, {InsightCategory::extremum, "extremum"},
                      {InsightCategory::trend, "trend"},
                      {InsightCategory::correlation, "correlation"},
                      {InsightCategory::distribution, "distribution"},
                      {InsightCategory::outlier, "outlier"},
                      {InsightCategory::proportion, "proportion"},
                      {InsightCategory::difference, "difference"},
                      {InsightCategory::other, "other"});

enum class ActionKind { filter, aggregation, sort, derive, join, bin };
INSIGHTKIT_ENUM_NAMES(ActionKind, {ActionKind::filter, "filter"},
                      {ActionKind::aggregation, "aggregation"}, {ActionKind::sort, "sort"},
                      {ActionKind::derive, "derive"}, {ActionKind::join, "join"},
                      {ActionKind::bin, "bin"});

enum class Transition { initial, continue_, retain, shift };
INSIGHTKIT_ENUM_NAMES(Transition, {Transition::initial, "initial"},
                      {Transition::continue_, "continue"}, {Transition::retain, "retain"},
                      {Transition::shift, "shift"});

enum class TopicProvenance { generated, selected_only };
INSIGHTKIT_ENUM_NAMES(TopicProvenance, {TopicProvenance::generated, "generated"},
                      {TopicProvenance::selected_only, "selected_only"});

// The evidence kind a block of the given kind can support.
EvidenceKind evidence_kind_for(BlockKind kind);

// ---------------------------------------------------------------------------
// Dataset

struct Attribute {
  std::string name;
  AttributeKind kind = AttributeKind::text;
  std::int64_t null_count = 0;

  bool operator==(const Attribute&) const = default;
};

struct DatasetProfile {
  std::string name;
  std::vector<Attribute> attributes;
  std::int64_t row_count = 0;
  std::vector<std::vector<std::string>> preview_rows;  // first min(5, row_count) rows
  std::string nl_description;

  const Attribute* find(std::string_view attribute) const;
  std::vector<std::string> attribute_names() const;

  bool operator==(const DatasetProfile&) const = default;
};

// ---------------------------------------------------------------------------
// Conversation

struct ResponseBlock {
  int block_index = 0;
  BlockKind kind = BlockKind::text;
  std::string content;
  std::string language;      // fence info string for code blocks
  bool unterminated = false;  // code fence never closed

  bool operator==(const ResponseBlock&) const = default;
};

struct ConversationTurn {
  TurnId turn_id = 0;
  std::string user_query;
  std::vector<ResponseBlock> blocks;
  Timestamp created_at = 0;

  const ResponseBlock* block(int index) const;

  bool operator==(const ConversationTurn&) const = default;
};

// ---------------------------------------------------------------------------
// Insights

struct CharRange {
  std::size_t start = 0;
  std::size_t end = 0;  // half-open

  auto operator<=>(const CharRange&) const = default;
};

struct EvidenceRef {
  TurnId turn_id = 0;
  int block_index = 0;
  std::optional<CharRange> char_range;
  EvidenceKind evidence_kind = EvidenceKind::nl_explanation;

  bool operator==(const EvidenceRef&) const = default;
};

// Identity used for set-union merging of evidence.
bool same_target(const EvidenceRef& a, const EvidenceRef& b);

struct InterestingnessScore {
  int s_sem = 3;
  int s_stat = 3;
  double weight_omega = kDefaultOmega;
  int s_final = 3;
  std::string rationale;
  std::optional<int> user_override;

  int display() const { return user_override.value_or(s_final); }

  bool operator==(const InterestingnessScore&) const = default;
};

// round_half_up(s_sem * omega + s_stat * (1 - omega)) clamped to [1, 5].
int final_score(int s_sem, int s_stat, double omega);

struct AnalyticalAction {
  ActionKind kind = ActionKind::filter;
  std::string detail;

  bool operator==(const AnalyticalAction&) const = default;
};

struct DataContext {
  std::set<std::string> attributes;
  std::vector<AnalyticalAction> actions;

  bool operator==(const DataContext&) const = default;
};

struct RelatedInsight {
  std::string insight_id;
  double similarity = 0.0;

  bool operator==(const RelatedInsight&) const = default;
};

struct Insight {
  std::string insight_id;
  std::string summary;
  std::set<TurnId> source_turns;
  std::vector<EvidenceRef> evidence;
  InsightCategory category = InsightCategory::other;
  InterestingnessScore score;
  DataContext data_context;
  std::string topic_id;
  std::string subtopic_id;
  std::vector<std::string> data_related;
  std::vector<RelatedInsight> semantic_related;
  Transition transition = Transition::initial;
  std::int64_t created_seq = 0;
  bool evidence_degraded = false;

  bool operator==(const Insight&) const = default;
};

struct Topic {
  std::string topic_id;
  std::string title;
  std::string description;
  std::optional<std::string> parent;
  std::vector<double> embedding;  // empty for reserved topics
  std::int64_t insight_count = 0;
  int color_index = 0;
  TopicProvenance provenance = TopicProvenance::generated;

  bool is_main() const { return !parent.has_value(); }

  bool operator==(const Topic&) const = default;
};

// ---------------------------------------------------------------------------
// Validation

struct Violation {
  std::string code;
  std::string message;

  bool operator==(const Violation&) const = default;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool ok() const { return violations.empty(); }
  bool has(std::string_view code) const;
};

// A counted, non-fatal anomaly (dropped evidence, fabricated attribute, ...).
// The pipeline emits each as a diagnostic event; counters aggregate by code.
struct Diagnostic {
  std::string code;
  std::string detail;
  std::int64_t count = 1;

  bool operator==(const Diagnostic&) const = default;
};

// Read-only view over the session pieces an insight may reference.
struct ModelView {
  const DatasetProfile& profile;
  std::span<const ConversationTurn> turns;
  std::span<const Topic> topics;
  std::span<const Insight> insights;  // may be empty; enables related-id checks
};

ValidationReport validate_insight(const Insight& insight, const ModelView& view);

// Number of Unicode code points in a UTF-8 string.
std::size_t utf8_length(std::string_view text);

// ---------------------------------------------------------------------------
// JSON

void to_json(json& j, const Attribute& v);
void from_json(const json& j, Attribute& v);
void to_json(json& j, const DatasetProfile& v);
void from_json(const json& j, DatasetProfile& v);
void to_json(json& j, const ResponseBlock& v);
void from_json(const json& j, ResponseBlock& v);
void to_json(json& j, const ConversationTurn& v);
void from_json(const json& j, ConversationTurn& v);
void to_json(json& j, const CharRange& v);
void from_json(const json& j, CharRange& v);
void to_json(json& j, const EvidenceRef& v);
void from_json(const json& j, EvidenceRef& v);
void to_json(json& j, const InterestingnessScore& v);
void from_json(const json& j, InterestingnessScore& v);
void to_json(json& j, const AnalyticalAction& v);
void from_json(const json& j, AnalyticalAction& v);
void to_json(json& j, const DataContext& v);
void from_json(const json& j, DataContext& v);
void to_json(json& j, const RelatedInsight& v);
void from_json(const json& j, RelatedInsight& v);
void to_json(json& j, const Insight& v);
void from_json(const json& j, Insight& v);
void to_json(json& j, const Topic& v);
void from_json(const json& j, Topic& v);
void to_json(json& j, const Violation& v);

// Canonical text form: sorted keys, two-space indent, trailing newline.
std::string canonical_dump(const json& j);

}  // namespace insightkit
