#pragma once
// Event-sourced session state. Every mutation is a SessionEvent; the state is
// the left fold of apply_event over the log, so replaying events.jsonl from
// empty reproduces snapshot.json exactly.

#include <chrono>
#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "insightkit/clock.hpp"
#include "insightkit/config.hpp"
#include "insightkit/dataset.hpp"
#include "insightkit/model.hpp"

namespace insightkit {

namespace event {
inline constexpr const char* session_created = "session_created";
inline constexpr const char* dataset_loaded = "dataset_loaded";
inline constexpr const char* turn_started = "turn_started";
inline constexpr const char* block_delta = "block_delta";
inline constexpr const char* block_complete = "block_complete";
inline constexpr const char* turn_complete = "turn_complete";
inline constexpr const char* turn_error = "turn_error";
inline constexpr const char* insight_added = "insight_added";
inline constexpr const char* insight_refined = "insight_refined";
inline constexpr const char* insight_evidence_degraded = "insight_evidence_degraded";
inline constexpr const char* insight_organized = "insight_organized";
inline constexpr const char* topic_added = "topic_added";
inline constexpr const char* topic_updated = "topic_updated";
inline constexpr const char* topic_candidate_rejected = "topic_candidate_rejected";
inline constexpr const char* transition_classified = "transition_classified";
inline constexpr const char* score_adjusted = "score_adjusted";
inline constexpr const char* attribute_order_changed = "attribute_order_changed";
inline constexpr const char* diagnostic = "diagnostic";
inline constexpr const char* pipeline_error = "pipeline_error";
inline constexpr const char* turn_processed = "turn_processed";
}  // namespace event

struct SessionEvent {
  std::int64_t seq = 0;
  std::string kind;
  json payload = json::object();
  Timestamp at = 0;

  bool operator==(const SessionEvent&) const = default;
};

void to_json(json& j, const SessionEvent& v);
void from_json(const json& j, SessionEvent& v);

struct SessionState {
  std::string session_id;
  json config = json::object();
  std::map<std::string, std::string> template_hashes;
  std::optional<DatasetProfile> profile;
  std::vector<ConversationTurn> turns;
  std::vector<Insight> insights;
  std::vector<Topic> topics;
  std::vector<std::string> attribute_order;
  std::map<std::string, std::int64_t> counters;  // diagnostic tallies
  std::set<TurnId> unprocessed_turns;
  TurnId next_turn_id = 1;
  std::vector<SessionEvent> events;

  const Insight* find_insight(std::string_view id) const;
  const Topic* find_topic(std::string_view id) const;
  const ConversationTurn* find_turn(TurnId id) const;

  bool operator==(const SessionState&) const = default;
};

void to_json(json& j, const SessionState& v);
void from_json(const json& j, SessionState& v);

class CorruptionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Pure transition. Throws CorruptionError on a sequence gap or duplicate, an
// unknown event kind, or a payload that does not fit the state.
SessionState apply_event(SessionState state, const SessionEvent& event);
void apply_event_in_place(SessionState& state, const SessionEvent& event);
SessionState replay_events(std::span<const SessionEvent> events);

struct HistogramBin {
  std::string attribute;
  std::int64_t insight_count = 0;

  bool operator==(const HistogramBin&) const = default;
};

// Insight count per attribute, in attribute_order; zero counts included.
std::vector<HistogramBin> attribute_histogram(const SessionState& state);
void to_json(json& j, const HistogramBin& v);

// Rejections carry a machine-readable reason for the API layer.
class RequestError : public std::runtime_error {
 public:
  enum class Status { not_found, conflict, invalid };
  RequestError(Status status, std::string reason, const std::string& message)
      : std::runtime_error(message), status_(status), reason_(std::move(reason)) {}
  Status status() const { return status_; }
  const std::string& reason() const { return reason_; }

 private:
  Status status_;
  std::string reason_;
};

// ---------------------------------------------------------------------------

// Thread-safe owner of one session's state. A single writer (the pipeline or
// the request handler) emits events; readers take consistent copies.
class Session {
 public:
  Session(std::string id, Config config, std::shared_ptr<Clock> clock,
          std::optional<std::filesystem::path> directory = std::nullopt);

  // Reopens a persisted session by replaying its event log.
  static std::unique_ptr<Session> restore(const std::filesystem::path& directory, Config config,
                                          std::shared_ptr<Clock> clock);

  const std::string& id() const { return id_; }
  const Config& config() const { return config_; }
  Clock& clock() { return *clock_; }

  SessionEvent emit(std::string kind, json payload);

  SessionState state() const;
  template <typename F>
  decltype(auto) read(F&& f) const {
    std::lock_guard lock(mutex_);
    return f(static_cast<const SessionState&>(state_));
  }

  std::int64_t event_count() const;
  std::vector<SessionEvent> events_since(std::int64_t from_seq) const;
  // Blocks until an event with seq >= from_seq exists or the timeout passes.
  bool wait_for_events(std::int64_t from_seq, std::chrono::milliseconds timeout) const;

  // Ingests CSV bytes, persists them beside the log and emits dataset_loaded.
  DatasetProfile load_dataset(std::string_view csv, std::string name);
  DatasetHandle dataset() const;
  std::optional<std::filesystem::path> dataset_path() const;

  Insight adjust_score(std::string_view insight_id, int value);
  std::vector<std::string> reorder_attributes(std::vector<std::string> order);

  // Writes snapshot.json (and nothing else) into the session directory.
  void persist_snapshot() const;
  const std::optional<std::filesystem::path>& directory() const { return directory_; }

 private:
  struct RestoreTag {};
  Session(RestoreTag, SessionState state, Config config, std::shared_ptr<Clock> clock,
          std::filesystem::path directory);

  std::string id_;
  Config config_;
  std::shared_ptr<Clock> clock_;
  std::optional<std::filesystem::path> directory_;
  std::ofstream log_;

  mutable std::mutex mutex_;
  mutable std::condition_variable changed_;
  SessionState state_;
  DatasetHandle dataset_;
  std::optional<std::filesystem::path> dataset_path_;
};

// File layout inside a session directory.
namespace layout {
inline constexpr const char* snapshot = "snapshot.json";
inline constexpr const char* events = "events.jsonl";
inline constexpr const char* transcript = "transcript.fixture.json";
inline constexpr const char* dataset = "dataset.csv";
}  // namespace layout

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);
std::string events_jsonl(std::span<const SessionEvent> events);
std::vector<SessionEvent> parse_events_jsonl(std::string_view text);

}  // namespace insightkit
