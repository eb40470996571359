#include "insightkit/extraction.hpp"

#include <algorithm>

#include "insightkit/blocks.hpp"
#include "insightkit/prompts.hpp"

namespace insightkit {

AgentMemory build_memory(const std::vector<Insight>& insights) {
  std::vector<const Insight*> ordered;
  for (const auto& i : insights) ordered.push_back(&i);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const Insight* a, const Insight* b) { return a->created_seq < b->created_seq; });
  AgentMemory memory;
  for (const auto* i : ordered) memory.entries.push_back({i->insight_id, i->summary, i->score.s_sem});
  return memory;
}

namespace {

constexpr std::size_t kDigestChars = 60;

// Prefix of at most n code points.
std::string utf8_prefix(const std::string& s, std::size_t n) {
  std::size_t count = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if ((static_cast<unsigned char>(s[i]) & 0xC0) != 0x80) {
      if (count == n) return s.substr(0, i) + "...";
      ++count;
    }
  }
  return s;
}

}  // namespace

std::string render_memory(const AgentMemory& memory, std::size_t budget) {
  if (memory.entries.empty()) return "(none yet)";
  const std::size_t digest_count =
      memory.entries.size() > budget ? memory.entries.size() - budget : 0;
  std::string out;
  for (std::size_t k = 0; k < memory.entries.size(); ++k) {
    const auto& e = memory.entries[k];
    if (k < digest_count) {
      out += "- " + e.insight_id + " (digest): " + utf8_prefix(e.summary, kDigestChars) + "\n";
    } else {
      out += "- " + e.insight_id + " (semantic score " + std::to_string(e.s_sem) + "): " +
             e.summary + "\n";
    }
  }
  out.pop_back();
  return out;
}

// ---------------------------------------------------------------------------

namespace {

struct SchemaError {
  std::string message;
};

std::optional<std::size_t> index_field(const json& obj, const char* key, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_integer() || it->get<long long>() < 0) {
    throw SchemaError{where + "." + key + " must be a non-negative integer"};
  }
  return it->get<std::size_t>();
}

InsightDelta parse_delta(const json& item, std::size_t i) {
  const std::string where = "element " + std::to_string(i);
  if (!item.is_object()) throw SchemaError{where + " is not an object"};
  InsightDelta d;

  const auto action = item.find("action");
  if (action == item.end() || !action->is_string()) throw SchemaError{where + " has no action"};
  const auto parsed_action = try_enum_from_string<DeltaAction>(action->get<std::string>());
  if (!parsed_action) throw SchemaError{where + " has unknown action '" + action->get<std::string>() + "'"};
  d.action = *parsed_action;

  const auto target = item.find("target");
  const bool has_target = target != item.end() && !target->is_null();
  if (d.action == DeltaAction::refine_existing) {
    if (!has_target || !target->is_string() || target->get<std::string>().empty()) {
      throw SchemaError{where + " refines without a target insight id"};
    }
    d.target = target->get<std::string>();
  } else if (has_target && !(target->is_string() && target->get<std::string>().empty())) {
    throw SchemaError{where + " identifies a new insight but names a target"};
  }

  const auto summary = item.find("summary");
  if (summary == item.end() || !summary->is_string()) throw SchemaError{where + " has no summary"};
  d.summary = summary->get<std::string>();
  if (d.summary.find_first_not_of(" \t\r\n") == std::string::npos) {
    throw SchemaError{where + " has an empty summary"};
  }
  if (utf8_length(d.summary) > kMaxSummaryChars) {
    throw SchemaError{where + " summary exceeds " + std::to_string(kMaxSummaryChars) + " characters"};
  }

  const auto evidence = item.find("evidence");
  if (evidence != item.end() && !evidence->is_null()) {
    if (!evidence->is_array()) throw SchemaError{where + ".evidence must be an array"};
    for (std::size_t k = 0; k < evidence->size(); ++k) {
      const auto& ref = (*evidence)[k];
      const std::string ref_where = where + ".evidence[" + std::to_string(k) + "]";
      if (!ref.is_object()) throw SchemaError{ref_where + " is not an object"};
      AgentEvidence e;
      const auto block = index_field(ref, "block_index", ref_where);
      if (!block) throw SchemaError{ref_where + " has no block_index"};
      e.block_index = static_cast<int>(*block);
      if (auto kind = ref.find("kind"); kind != ref.end() && !kind->is_null()) {
        if (!kind->is_string()) throw SchemaError{ref_where + ".kind must be a string"};
        e.kind = try_enum_from_string<EvidenceKind>(kind->get<std::string>());
        if (!e.kind) throw SchemaError{ref_where + " has unknown kind '" + kind->get<std::string>() + "'"};
      }
      if (auto quote = ref.find("quote"); quote != ref.end() && !quote->is_null()) {
        if (!quote->is_string()) throw SchemaError{ref_where + ".quote must be a string"};
        e.quote = quote->get<std::string>();
      }
      e.start = index_field(ref, "start", ref_where);
      e.end = index_field(ref, "end", ref_where);
      if (auto turn = index_field(ref, "turn_id", ref_where)) e.turn_id = static_cast<TurnId>(*turn);
      d.evidence.push_back(std::move(e));
    }
  }

  const auto categories = item.find("categories");
  if (categories != item.end() && !categories->is_null()) {
    if (!categories->is_array()) throw SchemaError{where + ".categories must be an array"};
    for (const auto& c : *categories) {
      if (!c.is_string()) throw SchemaError{where + ".categories must hold strings"};
      const auto cat = try_enum_from_string<InsightCategory>(c.get<std::string>());
      if (!cat) throw SchemaError{where + " has unknown category '" + c.get<std::string>() + "'"};
      d.category_votes.push_back(*cat);
    }
  }
  return d;
}

}  // namespace

DeltaParse parse_deltas(std::string_view reply) {
  DeltaParse out;
  const auto body = strip_json_fence(reply);
  const auto j = json::parse(body, nullptr, false);
  if (j.is_discarded()) {
    out.error = "reply is not valid JSON";
    return out;
  }
  if (!j.is_array()) {
    out.error = "reply must be a JSON array";
    return out;
  }
  try {
    for (std::size_t i = 0; i < j.size(); ++i) out.deltas.push_back(parse_delta(j[i], i));
  } catch (const SchemaError& e) {
    out.deltas.clear();
    out.error = e.message;
  }
  return out;
}

ExtractionOutcome extract_deltas(Provider& provider, const ConversationTurn& turn,
                                 const AgentMemory& memory, const DatasetProfile& profile,
                                 const ExtractionConfig& config) {
  std::string attributes;
  for (const auto& a : profile.attributes) {
    if (!attributes.empty()) attributes += ", ";
    attributes += a.name + " (" + std::string(to_string(a.kind)) + ")";
  }
  ChatRequest request;
  request.channel = Channel::ie_agent;
  request.messages.push_back({Role::system, prompts::render("ie_agent",
                                                            {{"dataset_name", profile.name},
                                                             {"attributes", attributes},
                                                             {"memory", render_memory(memory, config.memory_budget)}})});
  request.messages.push_back({Role::user, prompts::render("ie_turn",
                                                          {{"turn_id", std::to_string(turn.turn_id)},
                                                           {"user_query", turn.user_query},
                                                           {"blocks", render_blocks(turn.blocks)}})});
  ExtractionOutcome out;
  for (int attempt = 0;; ++attempt) {
    const auto response = provider.complete(request);
    auto parsed = parse_deltas(response.content);
    if (!parsed.error) {
      out.deltas = std::move(parsed.deltas);
      return out;
    }
    if (attempt >= config.max_repair_prompts) {
      out.diagnostics.push_back({"ie_reply_invalid",
                                 "turn " + std::to_string(turn.turn_id) + ": " + *parsed.error, 1});
      return out;
    }
    ++out.repairs;
    out.diagnostics.push_back({"ie_reply_repaired", *parsed.error, 1});
    request.messages.push_back({Role::assistant, response.content});
    request.messages.push_back({Role::user, prompts::render("ie_repair", {{"error", *parsed.error}})});
  }
}

// ---------------------------------------------------------------------------

BoundEvidence bind_evidence(const std::vector<AgentEvidence>& evidence,
                            const ConversationTurn& turn) {
  BoundEvidence out;
  auto drop = [&](std::size_t k, const std::string& why) {
    out.dropped.push_back("ref " + std::to_string(k) + ": " + why);
  };
  for (std::size_t k = 0; k < evidence.size(); ++k) {
    const auto& e = evidence[k];
    if (e.turn_id && *e.turn_id != turn.turn_id) {
      drop(k, "points at another turn");
      continue;
    }
    const auto* block = turn.block(e.block_index);
    if (!block) {
      drop(k, "block " + std::to_string(e.block_index) + " does not exist");
      continue;
    }
    const auto kind = evidence_kind_for(block->kind);
    if (e.kind && *e.kind != kind) {
      drop(k, "kind " + std::string(to_string(*e.kind)) + " does not match a " +
                  std::string(to_string(block->kind)) + " block");
      continue;
    }
    const auto& content = block->content;
    EvidenceRef ref{turn.turn_id, e.block_index, std::nullopt, kind};
    if (e.quote) {
      if (e.quote->empty()) {
        drop(k, "empty quote");
        continue;
      }
      std::optional<std::size_t> at;
      if (e.start && *e.start <= content.size() && content.compare(*e.start, e.quote->size(), *e.quote) == 0) {
        at = *e.start;
      } else if (const auto pos = content.find(*e.quote); pos != std::string::npos) {
        at = pos;
      }
      if (!at) {
        drop(k, "quote not found verbatim");
        continue;
      }
      ref.char_range = CharRange{*at, *at + e.quote->size()};
    } else if (e.start || e.end) {
      const std::size_t start = e.start.value_or(0);
      const std::size_t end = e.end.value_or(content.size());
      if (start >= end || end > content.size()) {
        drop(k, "range outside the block");
        continue;
      }
      ref.char_range = CharRange{start, end};
    }
    const bool duplicate = std::any_of(out.accepted.begin(), out.accepted.end(),
                                       [&](const EvidenceRef& r) { return same_target(r, ref); });
    if (!duplicate) out.accepted.push_back(ref);
  }
  return out;
}

std::vector<EvidenceRef> merge_evidence(const std::vector<EvidenceRef>& existing,
                                        const std::vector<EvidenceRef>& added) {
  auto out = existing;
  for (const auto& ref : added) {
    const bool present = std::any_of(out.begin(), out.end(),
                                     [&](const EvidenceRef& r) { return same_target(r, ref); });
    if (!present) out.push_back(ref);
  }
  return out;
}

std::string evidence_text(const EvidenceRef& ref, const ConversationTurn& turn) {
  const auto* block = turn.block(ref.block_index);
  if (!block) return {};
  if (!ref.char_range) return block->content;
  const auto& r = *ref.char_range;
  if (r.end > block->content.size() || r.start > r.end) return {};
  return block->content.substr(r.start, r.end - r.start);
}

}  // namespace insightkit
