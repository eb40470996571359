#include "insightkit/session.hpp"

#include <algorithm>
#include <sstream>

#include "insightkit/prompts.hpp"

namespace insightkit {

namespace fs = std::filesystem;

void to_json(json& j, const SessionEvent& v) {
  j = json{{"seq", v.seq}, {"kind", v.kind}, {"payload", v.payload}, {"at", v.at}};
}

void from_json(const json& j, SessionEvent& v) {
  j.at("seq").get_to(v.seq);
  j.at("kind").get_to(v.kind);
  v.payload = j.value("payload", json::object());
  v.at = j.value("at", Timestamp{0});
}

const Insight* SessionState::find_insight(std::string_view id) const {
  auto it = std::find_if(insights.begin(), insights.end(),
                         [&](const Insight& i) { return i.insight_id == id; });
  return it == insights.end() ? nullptr : &*it;
}

const Topic* SessionState::find_topic(std::string_view id) const {
  auto it = std::find_if(topics.begin(), topics.end(),
                         [&](const Topic& t) { return t.topic_id == id; });
  return it == topics.end() ? nullptr : &*it;
}

const ConversationTurn* SessionState::find_turn(TurnId id) const {
  auto it = std::find_if(turns.begin(), turns.end(),
                         [&](const ConversationTurn& t) { return t.turn_id == id; });
  return it == turns.end() ? nullptr : &*it;
}

void to_json(json& j, const SessionState& v) {
  j = json{{"session_id", v.session_id},
           {"config", v.config},
           {"template_hashes", v.template_hashes},
           {"profile", v.profile ? json(*v.profile) : json(nullptr)},
           {"turns", v.turns},
           {"insights", v.insights},
           {"topics", v.topics},
           {"attribute_order", v.attribute_order},
           {"counters", v.counters},
           {"unprocessed_turns", v.unprocessed_turns},
           {"next_turn_id", v.next_turn_id},
           {"events", v.events}};
}

void from_json(const json& j, SessionState& v) {
  j.at("session_id").get_to(v.session_id);
  v.config = j.value("config", json::object());
  j.at("template_hashes").get_to(v.template_hashes);
  if (j.contains("profile") && !j["profile"].is_null()) {
    v.profile = j["profile"].get<DatasetProfile>();
  } else {
    v.profile.reset();
  }
  j.at("turns").get_to(v.turns);
  j.at("insights").get_to(v.insights);
  j.at("topics").get_to(v.topics);
  j.at("attribute_order").get_to(v.attribute_order);
  j.at("counters").get_to(v.counters);
  j.at("unprocessed_turns").get_to(v.unprocessed_turns);
  j.at("next_turn_id").get_to(v.next_turn_id);
  j.at("events").get_to(v.events);
}

// ---------------------------------------------------------------------------

namespace {

[[noreturn]] void corrupt(const SessionEvent& e, const std::string& why) {
  throw CorruptionError("event " + std::to_string(e.seq) + " (" + e.kind + "): " + why);
}

template <typename T, typename Key>
T& find_or_corrupt(std::vector<T>& items, Key T::*key, const std::string& id,
                   const SessionEvent& e, const char* what) {
  auto it = std::find_if(items.begin(), items.end(), [&](const T& x) { return x.*key == id; });
  if (it == items.end()) corrupt(e, std::string("unknown ") + what + " '" + id + "'");
  return *it;
}

bool is_permutation_of(const std::vector<std::string>& order, std::vector<std::string> names) {
  auto sorted = order;
  std::sort(sorted.begin(), sorted.end());
  std::sort(names.begin(), names.end());
  return sorted == names;
}

}  // namespace

void apply_event_in_place(SessionState& s, const SessionEvent& e) {
  if (e.seq != static_cast<std::int64_t>(s.events.size())) {
    corrupt(e, "expected seq " + std::to_string(s.events.size()));
  }
  const json& p = e.payload;
  try {
    if (e.kind == event::session_created) {
      if (e.seq != 0) corrupt(e, "session_created must be the first event");
      s.session_id = p.at("session_id").get<std::string>();
      s.config = p.value("config", json::object());
      s.template_hashes = p.value("template_hashes", std::map<std::string, std::string>{});
    } else if (e.kind == event::dataset_loaded) {
      auto profile = p.at("profile").get<DatasetProfile>();
      s.attribute_order = profile.attribute_names();
      s.profile = std::move(profile);
    } else if (e.kind == event::turn_started) {
      const auto id = p.at("turn_id").get<TurnId>();
      if (id < s.next_turn_id) corrupt(e, "turn id " + std::to_string(id) + " reused");
      s.next_turn_id = id + 1;
    } else if (e.kind == event::turn_complete) {
      auto turn = p.at("turn").get<ConversationTurn>();
      if (s.find_turn(turn.turn_id)) corrupt(e, "duplicate turn " + std::to_string(turn.turn_id));
      s.turns.push_back(std::move(turn));
    } else if (e.kind == event::insight_added) {
      auto insight = p.at("insight").get<Insight>();
      if (s.find_insight(insight.insight_id)) corrupt(e, "duplicate insight " + insight.insight_id);
      if (!s.insights.empty() && insight.created_seq <= s.insights.back().created_seq) {
        corrupt(e, "created_seq not increasing");
      }
      s.insights.push_back(std::move(insight));
    } else if (e.kind == event::insight_refined || e.kind == event::insight_organized) {
      auto insight = p.at("insight").get<Insight>();
      auto& slot = find_or_corrupt(s.insights, &Insight::insight_id, insight.insight_id, e, "insight");
      slot = std::move(insight);
    } else if (e.kind == event::topic_added) {
      auto topic = p.at("topic").get<Topic>();
      if (s.find_topic(topic.topic_id)) corrupt(e, "duplicate topic " + topic.topic_id);
      s.topics.push_back(std::move(topic));
    } else if (e.kind == event::topic_updated) {
      auto topic = p.at("topic").get<Topic>();
      auto& slot = find_or_corrupt(s.topics, &Topic::topic_id, topic.topic_id, e, "topic");
      slot = std::move(topic);
    } else if (e.kind == event::transition_classified) {
      auto& slot = find_or_corrupt(s.insights, &Insight::insight_id,
                                   p.at("insight_id").get<std::string>(), e, "insight");
      slot.transition = p.at("transition").get<Transition>();
    } else if (e.kind == event::score_adjusted) {
      auto& slot = find_or_corrupt(s.insights, &Insight::insight_id,
                                   p.at("insight_id").get<std::string>(), e, "insight");
      const int value = p.at("value").get<int>();
      if (value < 1 || value > 5) corrupt(e, "override out of range");
      slot.score.user_override = value;
    } else if (e.kind == event::attribute_order_changed) {
      auto order = p.at("order").get<std::vector<std::string>>();
      if (!s.profile || !is_permutation_of(order, s.profile->attribute_names())) {
        corrupt(e, "attribute order is not a permutation of the schema");
      }
      s.attribute_order = std::move(order);
    } else if (e.kind == event::diagnostic) {
      s.counters[p.at("code").get<std::string>()] += p.value("count", std::int64_t{1});
    } else if (e.kind == event::pipeline_error) {
      s.unprocessed_turns.insert(p.at("turn_id").get<TurnId>());
    } else if (e.kind == event::turn_processed) {
      s.unprocessed_turns.erase(p.at("turn_id").get<TurnId>());
    } else if (e.kind == event::block_delta || e.kind == event::block_complete ||
               e.kind == event::turn_error || e.kind == event::insight_evidence_degraded ||
               e.kind == event::topic_candidate_rejected) {
      // Stream-only events: recorded, no state beyond the log.
    } else {
      corrupt(e, "unknown event kind");
    }
  } catch (const json::exception& ex) {
    corrupt(e, std::string("malformed payload: ") + ex.what());
  } catch (const std::invalid_argument& ex) {
    corrupt(e, std::string("malformed payload: ") + ex.what());
  }
  s.events.push_back(e);
}

SessionState apply_event(SessionState state, const SessionEvent& event) {
  apply_event_in_place(state, event);
  return state;
}

SessionState replay_events(std::span<const SessionEvent> events) {
  SessionState state;
  for (const auto& e : events) apply_event_in_place(state, e);
  return state;
}

std::vector<HistogramBin> attribute_histogram(const SessionState& state) {
  std::vector<HistogramBin> out;
  for (const auto& name : state.attribute_order) {
    const auto count = std::count_if(state.insights.begin(), state.insights.end(),
                                     [&](const Insight& i) {
                                       return i.data_context.attributes.count(name) > 0;
                                     });
    out.push_back({name, static_cast<std::int64_t>(count)});
  }
  return out;
}

void to_json(json& j, const HistogramBin& v) {
  j = json{{"attribute", v.attribute}, {"insight_count", v.insight_count}};
}

// ---------------------------------------------------------------------------

std::string read_text_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const auto tmp = fs::path(path).concat(".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!out) throw std::runtime_error("short write to " + path.string());
  }
  fs::rename(tmp, path);
}

namespace {
std::string event_line(const SessionEvent& e) {
  return json(e).dump(-1, ' ', false, json::error_handler_t::replace) + "\n";
}
}  // namespace

std::string events_jsonl(std::span<const SessionEvent> events) {
  std::string out;
  for (const auto& e : events) out += event_line(e);
  return out;
}

std::vector<SessionEvent> parse_events_jsonl(std::string_view text) {
  std::vector<SessionEvent> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    ++line_no;
    const auto nl = text.find('\n');
    const auto line = text.substr(0, nl);
    text.remove_prefix(nl == std::string_view::npos ? text.size() : nl + 1);
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    const auto parsed = json::parse(line, nullptr, false);
    if (parsed.is_discarded()) {
      throw CorruptionError("events.jsonl line " + std::to_string(line_no) + " is not JSON");
    }
    try {
      out.push_back(parsed.get<SessionEvent>());
    } catch (const json::exception& ex) {
      throw CorruptionError("events.jsonl line " + std::to_string(line_no) + ": " + ex.what());
    }
  }
  return out;
}

// ---------------------------------------------------------------------------

Session::Session(std::string id, Config config, std::shared_ptr<Clock> clock,
                 std::optional<fs::path> directory)
    : id_(std::move(id)),
      config_(std::move(config)),
      clock_(std::move(clock)),
      directory_(std::move(directory)) {
  if (directory_) {
    fs::create_directories(*directory_);
    log_.open(*directory_ / layout::events, std::ios::binary | std::ios::trunc);
    if (!log_) throw std::runtime_error("cannot open event log in " + directory_->string());
  }
  emit(event::session_created, json{{"session_id", id_},
                                    {"config", config_echo(config_)},
                                    {"template_hashes", prompts::template_hashes()}});
}

Session::Session(RestoreTag, SessionState state, Config config, std::shared_ptr<Clock> clock,
                 fs::path directory)
    : id_(state.session_id),
      config_(std::move(config)),
      clock_(std::move(clock)),
      directory_(std::move(directory)),
      state_(std::move(state)) {
  log_.open(*directory_ / layout::events, std::ios::binary | std::ios::app);
  if (!log_) throw std::runtime_error("cannot open event log in " + directory_->string());
  const auto csv = *directory_ / layout::dataset;
  if (state_.profile && fs::exists(csv)) {
    dataset_ = std::make_shared<const Dataset>(ingest_csv(read_text_file(csv), state_.profile->name));
    dataset_path_ = csv;
  }
}

std::unique_ptr<Session> Session::restore(const fs::path& directory, Config config,
                                          std::shared_ptr<Clock> clock) {
  const auto events = parse_events_jsonl(read_text_file(directory / layout::events));
  auto state = replay_events(events);
  return std::unique_ptr<Session>(
      new Session(RestoreTag{}, std::move(state), std::move(config), std::move(clock), directory));
}

SessionEvent Session::emit(std::string kind, json payload) {
  SessionEvent e;
  {
    std::lock_guard lock(mutex_);
    e.seq = static_cast<std::int64_t>(state_.events.size());
    e.kind = std::move(kind);
    e.payload = std::move(payload);
    e.at = clock_->now();
    apply_event_in_place(state_, e);
    if (log_.is_open()) {
      log_ << event_line(e);
      log_.flush();
    }
  }
  changed_.notify_all();
  return e;
}

SessionState Session::state() const {
  std::lock_guard lock(mutex_);
  return state_;
}

std::int64_t Session::event_count() const {
  std::lock_guard lock(mutex_);
  return static_cast<std::int64_t>(state_.events.size());
}

std::vector<SessionEvent> Session::events_since(std::int64_t from_seq) const {
  std::lock_guard lock(mutex_);
  const auto n = static_cast<std::int64_t>(state_.events.size());
  from_seq = std::clamp<std::int64_t>(from_seq, 0, n);
  return {state_.events.begin() + from_seq, state_.events.end()};
}

bool Session::wait_for_events(std::int64_t from_seq, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(mutex_);
  return changed_.wait_for(lock, timeout, [&] {
    return static_cast<std::int64_t>(state_.events.size()) > from_seq;
  });
}

DatasetProfile Session::load_dataset(std::string_view csv, std::string name) {
  const bool has_turns = read([](const SessionState& s) { return !s.turns.empty(); });
  if (has_turns) {
    throw RequestError(RequestError::Status::conflict, "dataset_locked",
                       "the dataset cannot be replaced after the conversation started");
  }
  auto data = std::make_shared<const Dataset>(ingest_csv(csv, std::move(name)));
  std::optional<fs::path> path;
  if (directory_) {
    path = *directory_ / layout::dataset;
    write_text_file(*path, csv);
  }
  {
    std::lock_guard lock(mutex_);
    dataset_ = data;
    dataset_path_ = path;
  }
  emit(event::dataset_loaded, json{{"profile", data->profile}});
  return data->profile;
}

DatasetHandle Session::dataset() const {
  std::lock_guard lock(mutex_);
  return dataset_;
}

std::optional<fs::path> Session::dataset_path() const {
  std::lock_guard lock(mutex_);
  return dataset_path_;
}

Insight Session::adjust_score(std::string_view insight_id, int value) {
  const bool known = read([&](const SessionState& s) { return s.find_insight(insight_id) != nullptr; });
  if (!known) {
    throw RequestError(RequestError::Status::not_found, "unknown_insight",
                       "no insight '" + std::string(insight_id) + "'");
  }
  if (value < 1 || value > 5) {
    throw RequestError(RequestError::Status::invalid, "score_out_of_range",
                       "score must be an integer from 1 to 5, got " + std::to_string(value));
  }
  emit(event::score_adjusted, json{{"insight_id", insight_id}, {"value", value}});
  return read([&](const SessionState& s) { return *s.find_insight(insight_id); });
}

std::vector<std::string> Session::reorder_attributes(std::vector<std::string> order) {
  const auto names = read([](const SessionState& s) {
    return s.profile ? std::optional(s.profile->attribute_names()) : std::nullopt;
  });
  if (!names) {
    throw RequestError(RequestError::Status::invalid, "no_dataset", "no dataset loaded");
  }
  if (!is_permutation_of(order, *names)) {
    throw RequestError(RequestError::Status::invalid, "not_a_permutation",
                       "order must list every attribute exactly once");
  }
  emit(event::attribute_order_changed, json{{"order", order}});
  return order;
}

void Session::persist_snapshot() const {
  if (!directory_) return;
  const auto text = read([](const SessionState& s) { return canonical_dump(json(s)); });
  write_text_file(*directory_ / layout::snapshot, text);
}

}  // namespace insightkit
