#include "insightkit/pipeline.hpp"

#include <algorithm>

#include "insightkit/interestingness.hpp"

namespace insightkit {

InsightPipeline::InsightPipeline(Session& session, Provider& provider)
    : session_(session), provider_(provider) {}

void InsightPipeline::emit_diagnostics(const std::vector<Diagnostic>& diagnostics) {
  for (const auto& d : diagnostics) {
    session_.emit(event::diagnostic, json{{"code", d.code}, {"detail", d.detail}, {"count", d.count}});
  }
}

const std::vector<double>& InsightPipeline::summary_embedding(const std::string& summary) {
  auto it = embeddings_.find(summary);
  if (it == embeddings_.end()) {
    auto v = provider_.embed({summary}).at(0).values;
    it = embeddings_.emplace(summary, quantize(v)).first;
  }
  return it->second;
}

void InsightPipeline::process_turn(const ConversationTurn& turn) {
  const auto [profile, memory] = session_.read([](const SessionState& s) {
    if (!s.profile) {
      throw RequestError(RequestError::Status::invalid, "no_dataset", "no dataset loaded");
    }
    return std::pair{*s.profile, build_memory(s.insights)};
  });

  ExtractionOutcome extraction;
  try {
    extraction = extract_deltas(provider_, turn, memory, profile, session_.config().extraction);
  } catch (const ProviderError& e) {
    session_.emit(event::pipeline_error,
                  json{{"turn_id", turn.turn_id}, {"stage", "extraction"}, {"message", e.what()}});
    return;
  }
  emit_diagnostics(extraction.diagnostics);

  for (const auto& delta : extraction.deltas) {
    const auto bound = bind_evidence(delta.evidence, turn);
    if (!bound.dropped.empty()) {
      std::string detail;
      for (const auto& reason : bound.dropped) detail += (detail.empty() ? "" : "; ") + reason;
      emit_diagnostics({{"evidence_dropped", detail, static_cast<std::int64_t>(bound.dropped.size())}});
    }
    if (delta.action == DeltaAction::refine_existing) {
      auto target = session_.read([&](const SessionState& s) {
        const auto* i = s.find_insight(*delta.target);
        return i ? std::optional<Insight>(*i) : std::nullopt;
      });
      if (target) {
        target->evidence = merge_evidence(target->evidence, bound.accepted);
        target->source_turns.insert(turn.turn_id);
        target->evidence_degraded = target->evidence.empty();
        session_.emit(event::insight_refined, json{{"insight", *target}});
        continue;
      }
      emit_diagnostics({{"refine_target_missing", *delta.target, 1}});
    }
    add_insight(delta, bound, turn);
  }
  session_.emit(event::turn_processed, json{{"turn_id", turn.turn_id}});
}

void InsightPipeline::retry_unprocessed() {
  const auto turns = session_.read([](const SessionState& s) {
    std::vector<ConversationTurn> out;
    for (auto id : s.unprocessed_turns) {
      if (const auto* t = s.find_turn(id)) out.push_back(*t);
    }
    return out;
  });
  for (const auto& t : turns) process_turn(t);
}

void InsightPipeline::add_insight(const InsightDelta& delta, const BoundEvidence& bound,
                                  const ConversationTurn& turn) {
  const auto data = session_.dataset();
  if (!data) throw RequestError(RequestError::Status::invalid, "no_dataset", "no dataset loaded");
  const auto& config = session_.config();

  Insight insight;
  std::vector<PriorScore> priors;
  session_.read([&](const SessionState& s) {
    insight.insight_id = "i" + std::to_string(s.insights.size() + 1);
    insight.created_seq = s.insights.empty() ? 1 : s.insights.back().created_seq + 1;
    for (const auto& i : s.insights) priors.push_back({i.insight_id, i.summary, i.score.s_sem});
    return 0;
  });
  insight.summary = delta.summary;
  insight.source_turns = {turn.turn_id};
  insight.evidence = bound.accepted;
  insight.evidence_degraded = bound.degraded();
  insight.category = majority_vote(delta.category_votes);

  std::vector<std::string> texts;
  for (const auto& ref : insight.evidence) texts.push_back(evidence_text(ref, turn));
  auto context = determine_data_context(provider_, insight.summary, texts, data->profile);
  emit_diagnostics(context.diagnostics);
  insight.data_context = std::move(context.context);

  auto scored = score_insight(provider_,
                              {data->profile.name, turn.user_query, insight.summary, priors},
                              insight.category, insight.data_context, *data, config.interestingness);
  emit_diagnostics(scored.diagnostics);
  insight.score = scored.score;

  session_.emit(event::insight_added,
                json{{"insight", insight},
                     {"metric", scored.reading ? json(*scored.reading) : json(nullptr)}});
  if (insight.evidence_degraded) {
    session_.emit(event::insight_evidence_degraded,
                  json{{"insight_id", insight.insight_id},
                       {"dropped", bound.dropped.size()}});
  }
  organize(std::move(insight));
}

void InsightPipeline::ensure_unclassified() {
  const bool present = session_.read(
      [](const SessionState& s) { return s.find_topic(kUnclassifiedTopic) != nullptr; });
  if (present) return;
  const int color = session_.read([](const SessionState& s) {
    return static_cast<int>(std::count_if(s.topics.begin(), s.topics.end(),
                                          [](const Topic& t) { return t.is_main(); }));
  });
  Topic main{kUnclassifiedTopic, "Unclassified", "Insights whose topic could not be determined.",
             std::nullopt, {}, 0, color, TopicProvenance::selected_only};
  Topic sub{kUnclassifiedSubtopic, "General", "Insights whose subtopic could not be determined.",
            std::string(kUnclassifiedTopic), {}, 0, color, TopicProvenance::selected_only};
  session_.emit(event::topic_added, json{{"topic", main}});
  session_.emit(event::topic_added, json{{"topic", sub}});
}

std::string InsightPipeline::resolve(const TopicDecision& decision, TopicLevel level,
                                     const Topic* parent) {
  for (const auto& r : decision.rejected) {
    session_.emit(event::topic_candidate_rejected,
                  json{{"level", level == TopicLevel::main ? "main" : "sub"},
                       {"parent", parent ? json(parent->topic_id) : json(nullptr)},
                       {"title", r.title},
                       {"description", r.description},
                       {"conflict_topic_id", r.conflict_topic_id},
                       {"similarity", quantize(r.similarity)},
                       {"attempt", r.attempt}});
  }
  emit_diagnostics(decision.diagnostics);
  if (decision.selected) return *decision.selected;
  if (!decision.title) return {};

  Topic topic;
  session_.read([&](const SessionState& s) {
    const auto generated = std::count_if(s.topics.begin(), s.topics.end(), [](const Topic& t) {
      return t.provenance == TopicProvenance::generated;
    });
    topic.topic_id = "t" + std::to_string(generated + 1);
    topic.color_index = parent ? parent->color_index
                               : static_cast<int>(std::count_if(
                                     s.topics.begin(), s.topics.end(),
                                     [](const Topic& t) { return t.is_main(); }));
    return 0;
  });
  topic.title = *decision.title;
  topic.description = decision.description.value_or("");
  if (parent) topic.parent = parent->topic_id;
  topic.embedding = decision.embedding;
  topic.provenance = TopicProvenance::generated;
  session_.emit(event::topic_added, json{{"topic", topic}});
  return topic.topic_id;
}

std::pair<std::string, std::string> InsightPipeline::place(const Insight& insight,
                                                           const std::vector<double>& embedding) {
  const auto& config = session_.config().organization;
  const auto description = session_.read([](const SessionState& s) {
    return s.profile ? s.profile->nl_description : std::string();
  });
  auto siblings_of = [&](const std::optional<std::string>& parent) {
    return session_.read([&](const SessionState& s) {
      std::vector<Topic> out;
      for (const auto& t : s.topics) {
        if (t.parent == parent && !t.embedding.empty()) out.push_back(t);
      }
      return out;
    });
  };
  auto topic_by_id = [&](const std::string& id) {
    return session_.read([&](const SessionState& s) { return *s.find_topic(id); });
  };

  try {
    const auto mains = siblings_of(std::nullopt);
    const auto main_decision = assign_topic(provider_, config, insight.summary, embedding,
                                            TopicLevel::main, mains, nullptr, description);
    const auto main_id = resolve(main_decision, TopicLevel::main, nullptr);
    if (!main_id.empty()) {
      const auto main = topic_by_id(main_id);
      const auto subs = siblings_of(main_id);
      const auto sub_decision = assign_topic(provider_, config, insight.summary, embedding,
                                             TopicLevel::sub, subs, &main, description);
      const auto sub_id = resolve(sub_decision, TopicLevel::sub, &main);
      if (!sub_id.empty()) return {main_id, sub_id};
    }
  } catch (const ProviderError& e) {
    emit_diagnostics({{"topic_provider_error", e.what(), 1}});
  }
  ensure_unclassified();
  return {kUnclassifiedTopic, kUnclassifiedSubtopic};
}

void InsightPipeline::organize(Insight insight) {
  std::vector<double> embedding;
  try {
    embedding = summary_embedding(insight.summary);
  } catch (const ProviderError& e) {
    emit_diagnostics({{"embedding_provider_error", e.what(), 1}});
  }

  if (embedding.empty()) {
    ensure_unclassified();
    insight.topic_id = kUnclassifiedTopic;
    insight.subtopic_id = kUnclassifiedSubtopic;
  } else {
    std::tie(insight.topic_id, insight.subtopic_id) = place(insight, embedding);
  }
  for (const auto& id : {insight.topic_id, insight.subtopic_id}) {
    auto topic = session_.read([&](const SessionState& s) { return *s.find_topic(id); });
    ++topic.insight_count;
    session_.emit(event::topic_updated, json{{"topic", topic}});
  }

  const auto prior_insights = session_.read([&](const SessionState& s) {
    std::vector<Insight> out;
    for (const auto& i : s.insights) {
      if (i.created_seq < insight.created_seq) out.push_back(i);
    }
    return out;
  });
  std::vector<PriorInsight> priors;
  std::vector<std::set<std::string>> history;
  for (const auto& p : prior_insights) {
    std::vector<double> e;
    if (!embedding.empty()) {
      try {
        e = summary_embedding(p.summary);
      } catch (const ProviderError&) {
      }
    }
    priors.push_back({&p, std::move(e)});
    history.push_back(p.data_context.attributes);
  }
  auto related = related_insights(insight.insight_id, insight.data_context, embedding, priors,
                                   session_.config().organization.semantic_top_k);
  insight.data_related = std::move(related.data_related);
  insight.semantic_related = std::move(related.semantic_related);
  insight.transition = classify_transition(insight.data_context.attributes, history);

  session_.emit(event::insight_organized, json{{"insight", insight}});
  session_.emit(event::transition_classified,
                json{{"insight_id", insight.insight_id}, {"transition", insight.transition}});
}

}  // namespace insightkit
