#include "insightkit/harness.hpp"

#include <algorithm>
#include <cctype>

#include "insightkit/chat.hpp"
#include "insightkit/clock.hpp"
#include "insightkit/executor.hpp"
#include "insightkit/llm.hpp"
#include "insightkit/pipeline.hpp"

namespace insightkit {

json parse_json_file(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const std::exception& e) {
    throw HarnessError(e.what());
  }
  auto j = json::parse(text, nullptr, false);
  if (j.is_discarded()) throw HarnessError(path.string() + ": not valid JSON");
  return j;
}

namespace {

std::string read_input(const std::filesystem::path& path) {
  try {
    return read_text_file(path);
  } catch (const std::exception& e) {
    throw HarnessError(e.what());
  }
}

std::unique_ptr<Session> make_session(const std::string& id, const Config& config,
                                      const std::filesystem::path& dataset) {
  auto session = std::make_unique<Session>(id, config, std::make_shared<LogicalClock>());
  try {
    session->load_dataset(read_input(dataset), dataset.stem().string());
  } catch (const IngestError& e) {
    throw HarnessError(dataset.string() + ": " + e.what());
  }
  return session;
}

void write_outputs(const std::filesystem::path& out, const SessionState& state) {
  std::filesystem::create_directories(out);
  write_text_file(out / layout::snapshot, canonical_dump(json(state)));
  write_text_file(out / layout::events, events_jsonl(state.events));
  write_text_file(out / "insights.json", canonical_dump(json(state.insights)));
  write_text_file(out / "topics.json", canonical_dump(json(state.topics)));
}

// Runs f, converting fixture and provider-construction failures into a
// HarnessError that names the event seq reached.
template <typename F>
void guarded(const Session& session, F&& f) {
  try {
    f();
  } catch (const FixtureError& e) {
    throw HarnessError("stopped at event seq " + std::to_string(session.event_count()) + ": " +
                       e.what());
  } catch (const RequestError& e) {
    throw HarnessError("stopped at event seq " + std::to_string(session.event_count()) + ": " +
                       e.what());
  }
}

ScriptedProvider make_provider(const json& fixture) {
  try {
    return ScriptedProvider(fixture);
  } catch (const FixtureError& e) {
    throw HarnessError(e.what());
  } catch (const json::exception& e) {
    throw HarnessError(std::string("invalid fixture: ") + e.what());
  }
}

}  // namespace

ReplayOutput replay(const std::filesystem::path& dataset, const std::filesystem::path& fixtures,
                    const Config& config, const std::optional<std::filesystem::path>& out) {
  const json bundle = parse_json_file(fixtures);
  if (!bundle.is_object()) throw HarnessError(fixtures.string() + ": bundle must be an object");
  const auto queries = bundle.find("queries");
  if (queries == bundle.end() || !queries->is_array()) {
    throw HarnessError(fixtures.string() + ": bundle has no \"queries\" array");
  }
  for (const auto& q : *queries) {
    if (!q.is_string() || q.get<std::string>().empty()) {
      throw HarnessError(fixtures.string() + ": every query must be a non-empty string");
    }
  }

  auto scripted = make_provider(bundle);
  std::unique_ptr<ScriptedExecutor> scripted_executor;
  try {
    scripted_executor = std::make_unique<ScriptedExecutor>(bundle);
  } catch (const FixtureError& e) {
    throw HarnessError(e.what());
  }
  RecordingProvider provider(scripted);
  RecordingExecutor executor(*scripted_executor);

  const auto owned = make_session("replay", config, dataset);
  Session& session = *owned;
  InsightPipeline pipeline(session, provider);
  guarded(session, [&] {
    for (const auto& q : *queries) {
      const auto turn = run_turn(session, provider, executor, q.get<std::string>());
      pipeline.process_turn(turn);
    }
  });

  ReplayOutput result;
  result.state = session.state();
  result.transcript = provider.transcript();
  result.transcript["queries"] = *queries;
  result.transcript["executions"] = executor.transcript();
  if (out) {
    write_outputs(*out, result.state);
    write_text_file(*out / layout::transcript, canonical_dump(result.transcript));
  }
  return result;
}

// ---------------------------------------------------------------------------

json ExtractReport::to_json() const {
  return json{{"turns", turns},
              {"insights", state.insights.size()},
              {"topics", state.topics.size()},
              {"counters", state.counters},
              {"unprocessed_turns", state.unprocessed_turns}};
}

namespace {

std::vector<ConversationTurn> parse_turns(const json& j) {
  const json* list = &j;
  if (j.is_object()) {
    const auto it = j.find("turns");
    if (it == j.end()) throw HarnessError("transcript object has no \"turns\" array");
    list = &*it;
  }
  if (!list->is_array()) throw HarnessError("transcript must be a turn list");
  std::vector<ConversationTurn> turns;
  for (std::size_t k = 0; k < list->size(); ++k) {
    const std::string where = "turn " + std::to_string(k);
    ConversationTurn turn;
    try {
      turn = (*list)[k].get<ConversationTurn>();
    } catch (const std::exception& e) {
      throw HarnessError(where + ": " + e.what());
    }
    if (turn.turn_id < 1) throw HarnessError(where + ": turn_id must be positive");
    if (!turns.empty() && turn.turn_id <= turns.back().turn_id) {
      throw HarnessError(where + ": turn ids must increase");
    }
    for (std::size_t b = 0; b < turn.blocks.size(); ++b) {
      if (turn.blocks[b].block_index != static_cast<int>(b)) {
        throw HarnessError(where + ": block " + std::to_string(b) + " has block_index " +
                           std::to_string(turn.blocks[b].block_index));
      }
    }
    turns.push_back(std::move(turn));
  }
  return turns;
}

}  // namespace

ExtractReport extract(const std::filesystem::path& transcript, const std::filesystem::path& dataset,
                      const std::filesystem::path& fixtures, const Config& config,
                      const std::optional<std::filesystem::path>& out) {
  const auto turns = parse_turns(parse_json_file(transcript));
  const json fixture = parse_json_file(fixtures);
  if (!fixture.is_object()) throw HarnessError(fixtures.string() + ": fixture must be an object");
  auto provider = make_provider(fixture);

  const auto owned = make_session("extract", config, dataset);
  Session& session = *owned;
  InsightPipeline pipeline(session, provider);
  guarded(session, [&] {
    for (const auto& turn : turns) {
      session.emit(event::turn_started, json{{"turn_id", turn.turn_id}, {"user_query", turn.user_query}});
      session.emit(event::turn_complete, json{{"turn", turn}});
      pipeline.process_turn(turn);
    }
  });

  ExtractReport report{session.state(), turns.size()};
  if (out) {
    write_outputs(*out, report.state);
    write_text_file(*out / "report.json", canonical_dump(report.to_json()));
  }
  return report;
}

// ---------------------------------------------------------------------------

std::string format_percent(std::int64_t numerator, std::int64_t denominator) {
  if (denominator <= 0 || numerator < 0) throw std::invalid_argument("percent of a non-positive ratio");
  const std::int64_t tenths = (2000 * numerator + denominator) / (2 * denominator);
  return std::to_string(tenths / 10) + "." + std::to_string(tenths % 10);
}

std::optional<std::string> Ratio::percent() const {
  if (denominator == 0) return std::nullopt;
  return format_percent(numerator, denominator);
}

namespace {

json ratio_json(const Ratio& r) {
  const auto p = r.percent();
  return json{{"numerator", r.numerator},
              {"denominator", r.denominator},
              {"percent", p ? json(*p) : json(nullptr)}};
}

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool flag(const json& entry, const char* key, const std::string& where) {
  const auto& v = entry.at(key);
  if (!v.is_boolean()) throw HarnessError(where + "." + key + " must be a boolean");
  return v.get<bool>();
}

}  // namespace

json EvalReport::to_json() const {
  return json{{"coverage", ratio_json(coverage)},
              {"evidence_accuracy", ratio_json(evidence_accuracy)},
              {"context_accuracy", ratio_json(context_accuracy)},
              {"topic_accuracy", ratio_json(topic_accuracy)}};
}

EvalReport evaluate(const json& snapshot, const json& labels) {
  if (!snapshot.is_object() || !snapshot.contains("insights")) {
    throw HarnessError("snapshot has no insights");
  }
  if (!labels.is_object()) throw HarnessError("labels must be an object");

  std::map<std::string, std::string> topic_titles;
  for (const auto& t : snapshot.value("topics", json::array())) {
    topic_titles[t.at("topic_id").get<std::string>()] = t.value("title", "");
  }
  struct Placement {
    std::string topic;
    std::string subtopic;
  };
  std::map<std::string, Placement> insights;
  for (const auto& i : snapshot.at("insights")) {
    insights[i.at("insight_id").get<std::string>()] = {i.value("topic_id", ""), i.value("subtopic_id", "")};
  }

  EvalReport report;
  const auto labeled = labels.value("labeled_insights", json::array());
  if (!labeled.is_array()) throw HarnessError("labeled_insights must be an array");
  for (std::size_t k = 0; k < labeled.size(); ++k) {
    const auto& label = labeled[k];
    const std::string where = "labeled_insights[" + std::to_string(k) + "]";
    const auto matched = label.value("matched", json::array());
    if (!matched.is_array()) throw HarnessError(where + ".matched must be an array");
    for (const auto& id : matched) {
      if (!id.is_string() || !insights.count(id.get<std::string>())) {
        throw HarnessError(where + " references unknown insight " + id.dump());
      }
    }
    ++report.coverage.denominator;
    if (!matched.empty()) ++report.coverage.numerator;
  }

  const auto marks = labels.value("insights", json::object());
  if (!marks.is_object()) throw HarnessError("insights labels must be an object");
  for (const auto& [id, entry] : marks.items()) {
    const std::string where = "insights." + id;
    const auto placed = insights.find(id);
    if (placed == insights.end()) throw HarnessError(where + " references unknown insight \"" + id + "\"");
    if (!entry.is_object()) throw HarnessError(where + " must be an object");
    if (entry.contains("evidence_correct")) {
      ++report.evidence_accuracy.denominator;
      if (flag(entry, "evidence_correct", where)) ++report.evidence_accuracy.numerator;
    }
    if (entry.contains("context_correct")) {
      ++report.context_accuracy.denominator;
      if (flag(entry, "context_correct", where)) ++report.context_accuracy.numerator;
    }
    if (entry.contains("gold_topic")) {
      if (!entry.at("gold_topic").is_string()) throw HarnessError(where + ".gold_topic must be a string");
      const auto gold = lower(entry.at("gold_topic").get<std::string>());
      ++report.topic_accuracy.denominator;
      for (const auto& t : {placed->second.topic, placed->second.subtopic}) {
        if (t.empty()) continue;
        const auto title = topic_titles.find(t);
        if (lower(t) == gold || (title != topic_titles.end() && lower(title->second) == gold)) {
          ++report.topic_accuracy.numerator;
          break;
        }
      }
    }
  }
  return report;
}

EvalReport evaluate(const std::filesystem::path& snapshot, const std::filesystem::path& labels) {
  return evaluate(parse_json_file(snapshot), parse_json_file(labels));
}

}  // namespace insightkit
