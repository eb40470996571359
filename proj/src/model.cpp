#include "insightkit/model.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace insightkit {

double quantize(double value) {
  const double q = std::round(value * 1e6) / 1e6;
  return q == 0.0 ? 0.0 : q;  // no negative zero on the wire
}

std::vector<double> quantize(std::span<const double> values) {
  std::vector<double> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(quantize(v));
  return out;
}

EvidenceKind evidence_kind_for(BlockKind kind) {
  switch (kind) {
    case BlockKind::code:
      return EvidenceKind::code;
    case BlockKind::code_output:
      return EvidenceKind::code_output;
    case BlockKind::visualization:
      return EvidenceKind::visualization;
    case BlockKind::text:
      break;
  }
  return EvidenceKind::nl_explanation;
}

const Attribute* DatasetProfile::find(std::string_view attribute) const {
  for (const auto& a : attributes) {
    if (a.name == attribute) return &a;
  }
  return nullptr;
}

std::vector<std::string> DatasetProfile::attribute_names() const {
  std::vector<std::string> names;
  names.reserve(attributes.size());
  for (const auto& a : attributes) names.push_back(a.name);
  return names;
}

const ResponseBlock* ConversationTurn::block(int index) const {
  if (index < 0 || static_cast<std::size_t>(index) >= blocks.size()) return nullptr;
  return &blocks[static_cast<std::size_t>(index)];
}

bool same_target(const EvidenceRef& a, const EvidenceRef& b) {
  return a.turn_id == b.turn_id && a.block_index == b.block_index && a.char_range == b.char_range;
}

int final_score(int s_sem, int s_stat, double omega) {
  const double weighted = s_sem * omega + s_stat * (1.0 - omega);
  // The epsilon absorbs binary representation error so that exact halves
  // (e.g. 0.5 * 4 + 0.5 * 5) round up.
  const int rounded = static_cast<int>(std::floor(weighted + 0.5 + 1e-9));
  return std::clamp(rounded, 1, 5);
}

std::size_t utf8_length(std::string_view text) {
  std::size_t n = 0;
  for (unsigned char c : text) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

bool ValidationReport::has(std::string_view code) const {
  return std::any_of(violations.begin(), violations.end(),
                     [&](const Violation& v) { return v.code == code; });
}

namespace {

const ConversationTurn* find_turn(std::span<const ConversationTurn> turns, TurnId id) {
  for (const auto& t : turns) {
    if (t.turn_id == id) return &t;
  }
  return nullptr;
}

const Topic* find_topic(std::span<const Topic> topics, std::string_view id) {
  for (const auto& t : topics) {
    if (t.topic_id == id) return &t;
  }
  return nullptr;
}

bool in_score_range(int v) { return v >= 1 && v <= 5; }

}  // namespace

ValidationReport validate_insight(const Insight& insight, const ModelView& view) {
  ValidationReport report;
  auto add = [&](std::string code, std::string message) {
    report.violations.push_back({std::move(code), std::move(message)});
  };

  if (insight.insight_id.empty()) add("missing id", "insight id is empty");
  if (insight.summary.empty()) add("empty summary", "summary is empty");
  if (utf8_length(insight.summary) > kMaxSummaryChars) {
    add("summary too long", "summary exceeds " + std::to_string(kMaxSummaryChars) + " characters");
  }

  for (TurnId t : insight.source_turns) {
    if (find_turn(view.turns, t) == nullptr) {
      add("unknown source turn", "source turn " + std::to_string(t) + " does not exist");
    }
  }

  for (const auto& ref : insight.evidence) {
    const std::string where =
        "turn " + std::to_string(ref.turn_id) + " block " + std::to_string(ref.block_index);
    const ConversationTurn* turn = find_turn(view.turns, ref.turn_id);
    const ResponseBlock* block = turn != nullptr ? turn->block(ref.block_index) : nullptr;
    if (block == nullptr) {
      add("dangling evidence ref", where + " does not exist");
      continue;
    }
    if (!insight.source_turns.contains(ref.turn_id)) {
      add("evidence outside source turns", where + " is not among the source turns");
    }
    if (evidence_kind_for(block->kind) != ref.evidence_kind) {
      add("evidence kind mismatch", where + " is a " + std::string(to_string(block->kind)) +
                                        " block, ref says " +
                                        std::string(to_string(ref.evidence_kind)));
    }
    if (ref.char_range) {
      const auto [start, end] = *ref.char_range;
      if (start >= end || end > block->content.size()) {
        add("evidence range out of bounds", where + " range [" + std::to_string(start) + ", " +
                                                std::to_string(end) + ") exceeds block length " +
                                                std::to_string(block->content.size()));
      }
    }
  }

  const auto& s = insight.score;
  if (!in_score_range(s.s_sem) || !in_score_range(s.s_stat) || !in_score_range(s.s_final)) {
    add("score out of range", "scores must lie in [1, 5]");
  }
  if (s.weight_omega < 0.0 || s.weight_omega > 1.0) {
    add("omega out of range", "weight omega must lie in [0, 1]");
  }
  if (in_score_range(s.s_sem) && in_score_range(s.s_stat) &&
      s.s_final != final_score(s.s_sem, s.s_stat, s.weight_omega)) {
    add("score mismatch", "s_final " + std::to_string(s.s_final) + " != combined " +
                              std::to_string(final_score(s.s_sem, s.s_stat, s.weight_omega)));
  }
  if (s.user_override && !in_score_range(*s.user_override)) {
    add("override out of range", "user override must lie in [1, 5]");
  }

  for (const auto& attr : insight.data_context.attributes) {
    if (view.profile.find(attr) == nullptr) {
      add("attribute not in schema", "attribute '" + attr + "' is not in the dataset schema");
    }
  }
  for (const auto& action : insight.data_context.actions) {
    if (action.detail.empty()) add("empty action detail", "analytical action has no detail");
  }

  const Topic* topic = find_topic(view.topics, insight.topic_id);
  const Topic* subtopic = find_topic(view.topics, insight.subtopic_id);
  if (topic == nullptr || !topic->is_main()) {
    add("topic not main", "topic '" + insight.topic_id + "' is not an existing main topic");
  }
  if (subtopic == nullptr || subtopic->parent != insight.topic_id) {
    add("subtopic not child", "subtopic '" + insight.subtopic_id + "' is not a child of '" +
                                  insight.topic_id + "'");
  }

  auto known = [&](std::string_view id) {
    if (view.insights.empty()) return true;
    return std::any_of(view.insights.begin(), view.insights.end(),
                       [&](const Insight& i) { return i.insight_id == id; });
  };
  for (const auto& id : insight.data_related) {
    if (id == insight.insight_id) add("self reference", "data_related lists the insight itself");
    if (!known(id)) add("unknown related insight", "data_related lists unknown id '" + id + "'");
  }
  for (const auto& rel : insight.semantic_related) {
    if (rel.insight_id == insight.insight_id) {
      add("self reference", "semantic_related lists the insight itself");
    }
    if (!known(rel.insight_id)) {
      add("unknown related insight", "semantic_related lists unknown id '" + rel.insight_id + "'");
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// JSON

namespace {

template <typename T>
std::optional<T> optional_field(const json& j, const char* key) {
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return std::nullopt;
  return it->get<T>();
}

json similarity_number(double v) { return quantize(v); }

}  // namespace

void to_json(json& j, const Attribute& v) {
  j = json{{"name", v.name}, {"kind", v.kind}, {"null_count", v.null_count}};
}
void from_json(const json& j, Attribute& v) {
  j.at("name").get_to(v.name);
  j.at("kind").get_to(v.kind);
  j.at("null_count").get_to(v.null_count);
}

void to_json(json& j, const DatasetProfile& v) {
  j = json{{"name", v.name},
           {"attributes", v.attributes},
           {"row_count", v.row_count},
           {"preview_rows", v.preview_rows},
           {"nl_description", v.nl_description}};
}
void from_json(const json& j, DatasetProfile& v) {
  j.at("name").get_to(v.name);
  j.at("attributes").get_to(v.attributes);
  j.at("row_count").get_to(v.row_count);
  j.at("preview_rows").get_to(v.preview_rows);
  j.at("nl_description").get_to(v.nl_description);
}

void to_json(json& j, const ResponseBlock& v) {
  j = json{{"block_index", v.block_index},
           {"kind", v.kind},
           {"content", v.content},
           {"language", v.language},
           {"unterminated", v.unterminated}};
}
void from_json(const json& j, ResponseBlock& v) {
  j.at("block_index").get_to(v.block_index);
  j.at("kind").get_to(v.kind);
  j.at("content").get_to(v.content);
  v.language = j.value("language", "");
  v.unterminated = j.value("unterminated", false);
}

void to_json(json& j, const ConversationTurn& v) {
  j = json{{"turn_id", v.turn_id},
           {"user_query", v.user_query},
           {"blocks", v.blocks},
           {"created_at", v.created_at}};
}
void from_json(const json& j, ConversationTurn& v) {
  j.at("turn_id").get_to(v.turn_id);
  j.at("user_query").get_to(v.user_query);
  j.at("blocks").get_to(v.blocks);
  v.created_at = j.value("created_at", Timestamp{0});
}

void to_json(json& j, const CharRange& v) { j = json{{"start", v.start}, {"end", v.end}}; }
void from_json(const json& j, CharRange& v) {
  j.at("start").get_to(v.start);
  j.at("end").get_to(v.end);
}

void to_json(json& j, const EvidenceRef& v) {
  j = json{{"turn_id", v.turn_id},
           {"block_index", v.block_index},
           {"char_range", v.char_range ? json(*v.char_range) : json(nullptr)},
           {"evidence_kind", v.evidence_kind}};
}
void from_json(const json& j, EvidenceRef& v) {
  j.at("turn_id").get_to(v.turn_id);
  j.at("block_index").get_to(v.block_index);
  v.char_range = optional_field<CharRange>(j, "char_range");
  j.at("evidence_kind").get_to(v.evidence_kind);
}

void to_json(json& j, const InterestingnessScore& v) {
  j = json{{"s_sem", v.s_sem},
           {"s_stat", v.s_stat},
           {"weight_omega", quantize(v.weight_omega)},
           {"s_final", v.s_final},
           {"rationale", v.rationale},
           {"user_override", v.user_override ? json(*v.user_override) : json(nullptr)}};
}
void from_json(const json& j, InterestingnessScore& v) {
  j.at("s_sem").get_to(v.s_sem);
  j.at("s_stat").get_to(v.s_stat);
  j.at("weight_omega").get_to(v.weight_omega);
  j.at("s_final").get_to(v.s_final);
  j.at("rationale").get_to(v.rationale);
  v.user_override = optional_field<int>(j, "user_override");
}

void to_json(json& j, const AnalyticalAction& v) {
  j = json{{"kind", v.kind}, {"detail", v.detail}};
}
void from_json(const json& j, AnalyticalAction& v) {
  j.at("kind").get_to(v.kind);
  j.at("detail").get_to(v.detail);
}

void to_json(json& j, const DataContext& v) {
  j = json{{"attributes", v.attributes}, {"actions", v.actions}};
}
void from_json(const json& j, DataContext& v) {
  j.at("attributes").get_to(v.attributes);
  j.at("actions").get_to(v.actions);
}

void to_json(json& j, const RelatedInsight& v) {
  j = json{{"insight_id", v.insight_id}, {"similarity", similarity_number(v.similarity)}};
}
void from_json(const json& j, RelatedInsight& v) {
  j.at("insight_id").get_to(v.insight_id);
  j.at("similarity").get_to(v.similarity);
}

void to_json(json& j, const Insight& v) {
  j = json{{"insight_id", v.insight_id},
           {"summary", v.summary},
           {"source_turns", v.source_turns},
           {"evidence", v.evidence},
           {"category", v.category},
           {"score", v.score},
           {"data_context", v.data_context},
           {"topic_id", v.topic_id},
           {"subtopic_id", v.subtopic_id},
           {"data_related", v.data_related},
           {"semantic_related", v.semantic_related},
           {"transition", v.transition},
           {"created_seq", v.created_seq},
           {"evidence_degraded", v.evidence_degraded}};
}
void from_json(const json& j, Insight& v) {
  j.at("insight_id").get_to(v.insight_id);
  j.at("summary").get_to(v.summary);
  j.at("source_turns").get_to(v.source_turns);
  j.at("evidence").get_to(v.evidence);
  j.at("category").get_to(v.category);
  j.at("score").get_to(v.score);
  j.at("data_context").get_to(v.data_context);
  j.at("topic_id").get_to(v.topic_id);
  j.at("subtopic_id").get_to(v.subtopic_id);
  j.at("data_related").get_to(v.data_related);
  j.at("semantic_related").get_to(v.semantic_related);
  j.at("transition").get_to(v.transition);
  j.at("created_seq").get_to(v.created_seq);
  v.evidence_degraded = j.value("evidence_degraded", false);
}

void to_json(json& j, const Topic& v) {
  j = json{{"topic_id", v.topic_id},
           {"title", v.title},
           {"description", v.description},
           {"parent", v.parent ? json(*v.parent) : json(nullptr)},
           {"embedding", quantize(v.embedding)},
           {"insight_count", v.insight_count},
           {"color_index", v.color_index},
           {"provenance", v.provenance}};
}
void from_json(const json& j, Topic& v) {
  j.at("topic_id").get_to(v.topic_id);
  j.at("title").get_to(v.title);
  j.at("description").get_to(v.description);
  v.parent = optional_field<std::string>(j, "parent");
  j.at("embedding").get_to(v.embedding);
  j.at("insight_count").get_to(v.insight_count);
  j.at("color_index").get_to(v.color_index);
  j.at("provenance").get_to(v.provenance);
}

void to_json(json& j, const Violation& v) {
  j = json{{"code", v.code}, {"message", v.message}};
}

std::string canonical_dump(const json& j) {
  return j.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

}  // namespace insightkit
