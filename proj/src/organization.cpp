#include "insightkit/organization.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <sstream>
#include <variant>

#include "insightkit/blocks.hpp"
#include "insightkit/prompts.hpp"
#include "insightkit/session.hpp"

namespace insightkit {

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

// The string at key, or "" when absent or not a string.
std::string string_field(const json& j, const char* key) {
  auto it = j.find(key);
  return it != j.end() && it->is_string() ? it->get<std::string>() : std::string();
}

std::string format_similarity(double v) {
  std::ostringstream ss;
  ss.setf(std::ios::fixed);
  ss.precision(6);
  ss << quantize(v);
  return ss.str();
}

}  // namespace

ContextParse parse_context_reply(std::string_view reply, const DatasetProfile& profile) {
  ContextParse out;
  const auto j = json::parse(strip_json_fence(reply), nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    out.error = "reply must be a JSON object";
    return out;
  }
  const auto attributes = j.find("attributes");
  if (attributes == j.end() || !attributes->is_array()) {
    out.error = "reply needs an \"attributes\" array";
    return out;
  }
  for (const auto& a : *attributes) {
    if (!a.is_string()) {
      out.error = "attribute names must be strings";
      return out;
    }
    const auto name = a.get<std::string>();
    if (profile.find(name)) {
      out.context.attributes.insert(name);
      continue;
    }
    // A unique case-insensitive match names the schema attribute; anything
    // else is fabricated.
    const Attribute* match = nullptr;
    int matches = 0;
    for (const auto& attr : profile.attributes) {
      if (lower(attr.name) == lower(name)) {
        match = &attr;
        ++matches;
      }
    }
    if (matches == 1) {
      out.context.attributes.insert(match->name);
    } else {
      out.fabricated.push_back(name);
    }
  }
  if (auto actions = j.find("actions"); actions != j.end() && !actions->is_null()) {
    if (!actions->is_array()) {
      out.error = "\"actions\" must be an array";
      return out;
    }
    for (const auto& a : *actions) {
      if (!a.is_object() || !a.contains("kind") || !a["kind"].is_string()) {
        out.dropped_actions.push_back(a.dump());
        continue;
      }
      const auto kind = try_enum_from_string<ActionKind>(a["kind"].get<std::string>());
      const auto detail = string_field(a, "detail");
      if (!kind || detail.find_first_not_of(" \t\r\n") == std::string::npos) {
        out.dropped_actions.push_back(a.dump());
        continue;
      }
      out.context.actions.push_back({*kind, detail});
    }
  }
  return out;
}

ContextOutcome determine_data_context(Provider& provider, const std::string& summary,
                                      const std::vector<std::string>& evidence_texts,
                                      const DatasetProfile& profile) {
  std::string preview;
  for (std::size_t i = 0; i < profile.attributes.size(); ++i) {
    preview += (i ? "," : "") + profile.attributes[i].name;
  }
  for (const auto& row : profile.preview_rows) {
    preview += "\n";
    for (std::size_t i = 0; i < row.size(); ++i) preview += (i ? "," : "") + row[i];
  }
  std::string attributes;
  for (const auto& a : profile.attributes) attributes += (attributes.empty() ? "" : ", ") + a.name;
  std::string evidence;
  for (const auto& t : evidence_texts) evidence += "- " + t + "\n";
  if (evidence.empty()) evidence = "(none)\n";

  ChatRequest request;
  request.channel = Channel::io_agent;
  request.messages.push_back({Role::user, prompts::render("io_context",
                                                          {{"dataset_description", profile.nl_description},
                                                           {"preview", preview},
                                                           {"attributes", attributes},
                                                           {"insight", summary},
                                                           {"evidence", evidence}})});
  ContextOutcome out;
  try {
    for (int attempt = 0; attempt < 2; ++attempt) {
      const auto response = provider.complete(request);
      auto parsed = parse_context_reply(response.content, profile);
      if (parsed.error) {
        request.messages.push_back({Role::assistant, response.content});
        request.messages.push_back({Role::user, prompts::render("io_context_repair", {{"error", *parsed.error}})});
        continue;
      }
      for (const auto& name : parsed.fabricated) out.diagnostics.push_back({"fabricated_attribute", name, 1});
      for (const auto& a : parsed.dropped_actions) out.diagnostics.push_back({"invalid_action", a, 1});
      out.context = std::move(parsed.context);
      if (out.context.attributes.empty()) {
        out.diagnostics.push_back({"empty_data_context", summary.substr(0, 80), 1});
      }
      return out;
    }
    out.diagnostics.push_back({"io_context_invalid", "unusable reply after one repair", 1});
    out.diagnostics.push_back({"empty_data_context", summary.substr(0, 80), 1});
  } catch (const ProviderError& e) {
    out.failed = true;
    out.diagnostics.push_back({"io_context_provider_error", e.what(), 1});
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string topic_embedding_text(const std::string& title, const std::string& description) {
  return title + ": " + description;
}

namespace {

struct TopicReply {
  std::optional<std::string> selected;
  std::string title;
  std::string description;
};

std::variant<TopicReply, std::string> parse_topic_reply(std::string_view reply,
                                                         std::span<const Topic> siblings) {
  const auto j = json::parse(strip_json_fence(reply), nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::string("reply must be a JSON object");
  const auto decision = string_field(j, "decision");
  TopicReply out;
  if (decision == "select") {
    const auto id = string_field(j, "topic_id");
    const bool known = std::any_of(siblings.begin(), siblings.end(),
                                   [&](const Topic& t) { return t.topic_id == id; });
    if (!known) return "topic_id '" + id + "' is not a listed candidate";
    out.selected = id;
    return out;
  }
  if (decision == "generate") {
    out.title = string_field(j, "title");
    out.description = string_field(j, "description");
    if (out.title.find_first_not_of(" \t\r\n") == std::string::npos) {
      return std::string("a generated topic needs a title");
    }
    return out;
  }
  return std::string("decision must be \"select\" or \"generate\"");
}

}  // namespace

TopicDecision assign_topic(Provider& provider, const OrganizationConfig& config,
                           const std::string& insight_summary,
                           const std::vector<double>& insight_embedding, TopicLevel level,
                           std::span<const Topic> siblings, const Topic* parent,
                           const std::string& dataset_description) {
  std::vector<double> to_insight;
  for (const auto& t : siblings) to_insight.push_back(cosine_similarity(insight_embedding, t.embedding));

  std::string candidates;
  for (std::size_t i = 0; i < siblings.size(); ++i) {
    candidates += "- " + siblings[i].topic_id + " | " + siblings[i].title + ": " +
                  siblings[i].description + " (similarity " + format_similarity(to_insight[i]) + ")\n";
  }
  if (candidates.empty()) candidates = "(no existing candidates)\n";

  ChatRequest request;
  request.channel = Channel::io_agent;
  request.messages.push_back(
      {Role::user,
       prompts::render("io_topic",
                       {{"dataset_description", dataset_description},
                        {"level", level == TopicLevel::main ? "main topic" : "subtopic"},
                        {"parent", parent ? " under the main topic \"" + parent->title + "\"" : ""},
                        {"candidates", candidates},
                        {"insight", insight_summary}})});

  TopicDecision out;
  const int max_attempts = std::max(1, config.max_generation_attempts);
  int attempts = 0;
  while (attempts < max_attempts) {
    const auto response = provider.complete(request);
    ++attempts;
    auto parsed = parse_topic_reply(response.content, siblings);
    request.messages.push_back({Role::assistant, response.content});
    if (auto* error = std::get_if<std::string>(&parsed)) {
      out.diagnostics.push_back({"topic_reply_invalid", *error, 1});
      request.messages.push_back({Role::user, prompts::render("io_topic_repair", {{"error", *error}})});
      continue;
    }
    auto& reply = std::get<TopicReply>(parsed);
    if (reply.selected) {
      out.selected = reply.selected;
      return out;
    }
    auto embedding = provider.embed({topic_embedding_text(reply.title, reply.description)}).at(0).values;
    embedding = quantize(embedding);
    std::optional<std::size_t> conflict;
    double worst = -1.0;
    for (std::size_t i = 0; i < siblings.size(); ++i) {
      const double sim = cosine_similarity(embedding, siblings[i].embedding);
      const bool same_title = lower(siblings[i].title) == lower(reply.title);
      if ((sim > config.topic_threshold || same_title) && (!conflict || sim > worst)) {
        conflict = i;
        worst = sim;
      }
    }
    if (!conflict) {
      out.title = reply.title;
      out.description = reply.description;
      out.embedding = std::move(embedding);
      return out;
    }
    const auto& clash = siblings[*conflict];
    out.rejected.push_back({reply.title, reply.description, clash.topic_id, quantize(worst), attempts});
    request.messages.push_back(
        {Role::user, prompts::render("io_topic_regenerate",
                                     {{"title", reply.title},
                                      {"conflict", clash.title},
                                      {"similarity", format_similarity(worst)},
                                      {"threshold", format_similarity(config.topic_threshold)}})});
  }

  if (!siblings.empty()) {
    const auto best = std::max_element(to_insight.begin(), to_insight.end()) - to_insight.begin();
    out.selected = siblings[static_cast<std::size_t>(best)].topic_id;
    out.fallback = true;
    out.diagnostics.push_back({"topic_fallback_selected", out.selected.value(), 1});
  } else {
    out.diagnostics.push_back({"topic_parked", "no acceptable topic after " + std::to_string(attempts) + " attempts", 1});
  }
  return out;
}

// ---------------------------------------------------------------------------

Related related_insights(const std::string& insight_id, const DataContext& context,
                         const std::vector<double>& embedding,
                         std::span<const PriorInsight> priors, std::size_t top_k) {
  struct DataHit {
    std::size_t overlap;
    std::int64_t seq;
    const std::string* id;
  };
  struct SemanticHit {
    double similarity;
    std::int64_t seq;
    const std::string* id;
  };
  std::vector<DataHit> data;
  std::vector<SemanticHit> semantic;
  for (const auto& p : priors) {
    const auto& other = *p.insight;
    if (other.insight_id == insight_id) continue;
    std::size_t overlap = 0;
    for (const auto& a : context.attributes) overlap += other.data_context.attributes.count(a);
    if (overlap > 0) data.push_back({overlap, other.created_seq, &other.insight_id});
    if (!embedding.empty() && !p.embedding.empty()) {
      semantic.push_back({quantize(cosine_similarity(embedding, p.embedding)), other.created_seq,
                          &other.insight_id});
    }
  }
  std::sort(data.begin(), data.end(), [](const DataHit& a, const DataHit& b) {
    return a.overlap != b.overlap ? a.overlap > b.overlap : a.seq > b.seq;
  });
  std::sort(semantic.begin(), semantic.end(), [](const SemanticHit& a, const SemanticHit& b) {
    return a.similarity != b.similarity ? a.similarity > b.similarity : a.seq > b.seq;
  });
  Related out;
  for (const auto& h : data) out.data_related.push_back(*h.id);
  for (std::size_t i = 0; i < semantic.size() && i < top_k; ++i) {
    out.semantic_related.push_back({*semantic[i].id, semantic[i].similarity});
  }
  return out;
}

Transition classify_transition(const std::set<std::string>& current,
                               std::span<const std::set<std::string>> history) {
  if (history.empty()) return Transition::initial;
  auto intersects = [&](const std::set<std::string>& other) {
    return std::any_of(current.begin(), current.end(),
                       [&](const std::string& a) { return other.count(a) > 0; });
  };
  if (intersects(history.back())) return Transition::continue_;
  if (std::any_of(history.begin(), history.end(), intersects)) return Transition::retain;
  return Transition::shift;
}

// ---------------------------------------------------------------------------

ThresholdAudit audit_topic_threshold(std::span<const SessionEvent> events, double threshold) {
  ThresholdAudit audit;
  std::vector<Topic> topics;
  for (const auto& e : events) {
    if (e.kind == event::topic_candidate_rejected) {
      ++audit.rejected_candidates;
      continue;
    }
    if (e.kind != event::topic_added) continue;
    auto topic = e.payload.at("topic").get<Topic>();
    if (topic.provenance == TopicProvenance::generated && !topic.embedding.empty()) {
      ++audit.generated_topics;
      for (const auto& other : topics) {
        if (other.parent != topic.parent || other.embedding.empty()) continue;
        const double sim = cosine_similarity(topic.embedding, other.embedding);
        audit.max_sibling_similarity = std::max(audit.max_sibling_similarity, sim);
        if (sim > threshold) {
          audit.violations.push_back(topic.topic_id + " vs " + other.topic_id + ": " +
                                     format_similarity(sim));
        }
      }
    }
    topics.push_back(std::move(topic));
  }
  return audit;
}

}  // namespace insightkit
