#include "insightkit/server.hpp"

#include <cstdlib>
#include <iostream>

#include <httplib.h>

#include "insightkit/chat.hpp"
#include "insightkit/clock.hpp"
#include "insightkit/dataset.hpp"
#include "insightkit/pipeline.hpp"
#include "insightkit/sse.hpp"

namespace insightkit {

namespace fs = std::filesystem;

struct ApiServer::Entry {
  std::unique_ptr<Session> session;
  std::unique_ptr<Provider> base_provider;
  std::unique_ptr<RecordingProvider> provider;
  std::unique_ptr<Executor> base_executor;
  std::unique_ptr<RecordingExecutor> executor;
  std::unique_ptr<InsightPipeline> pipeline;
  json prior_transcript = json::object();
  json queries = json::array();

  std::mutex mutex;
  std::condition_variable changed;
  std::deque<std::string> queue;
  bool turn_in_flight = false;  // accepted and not yet completed or failed
  bool busy = false;
  bool stop = false;
  std::thread thread;
};

namespace {

constexpr const char* kJson = "application/json";

void reply(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(canonical_dump(body), kJson);
}

void error(httplib::Response& res, int status, const std::string& reason, const std::string& message) {
  reply(res, status, json{{"error", reason}, {"message", message}});
}

int http_status(RequestError::Status s) {
  switch (s) {
    case RequestError::Status::not_found: return 404;
    case RequestError::Status::conflict: return 409;
    case RequestError::Status::invalid: return 422;
  }
  return 500;
}

std::optional<json> json_body(const httplib::Request& req, httplib::Response& res) {
  auto j = json::parse(req.body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    error(res, 422, "invalid_json", "request body must be a JSON object");
    return std::nullopt;
  }
  return j;
}

// Appends the arrays of `more` to those of `base`, channel by channel.
json merge_transcripts(json base, const json& more) {
  for (const char* key : {"queries", "executions"}) {
    auto& dst = base[key];
    if (!dst.is_array()) dst = json::array();
    for (const auto& v : more.value(key, json::array())) dst.push_back(v);
  }
  auto& chat = base["chat"];
  if (!chat.is_object()) chat = json::object();
  const auto more_chat = more.value("chat", json::object());
  for (const auto& [channel, responses] : more_chat.items()) {
    for (const auto& r : responses) chat[channel].push_back(r);
  }
  auto& embeddings = base["embeddings"];
  if (!embeddings.is_object()) embeddings = json::object();
  const auto more_embeddings = more.value("embeddings", json::object());
  for (const auto& [text, values] : more_embeddings.items()) {
    embeddings[text] = values;
  }
  return base;
}

}  // namespace

ApiServer::ApiServer(ServerOptions options)
    : options_(std::move(options)), http_(std::make_unique<httplib::Server>()) {
  if (!options_.clock) options_.clock = std::make_shared<SystemClock>();
  if (!options_.provider_factory) options_.provider_factory = live_provider_factory(options_.config);
  if (!options_.executor_factory) {
    options_.executor_factory = subprocess_executor_factory(options_.config);
  }
  restore_sessions();
  routes();
}

ApiServer::~ApiServer() {
  stop();
  std::map<std::string, std::shared_ptr<Entry>> sessions;
  {
    std::lock_guard lock(mutex_);
    sessions.swap(sessions_);
  }
  for (auto& [id, entry] : sessions) {
    {
      std::lock_guard lock(entry->mutex);
      entry->stop = true;
    }
    entry->changed.notify_all();
    if (entry->thread.joinable()) entry->thread.join();
  }
}

bool ApiServer::listen(const std::string& host, int port) { return http_->listen(host, port); }
int ApiServer::bind_to_any_port(const std::string& host) { return http_->bind_to_any_port(host); }
bool ApiServer::listen_after_bind() { return http_->listen_after_bind(); }
bool ApiServer::is_running() const { return http_->is_running(); }
void ApiServer::wait_until_ready() const { http_->wait_until_ready(); }

void ApiServer::stop() {
  stopping_ = true;
  http_->stop();
}

std::shared_ptr<ApiServer::Entry> ApiServer::find(const std::string& id) {
  std::lock_guard lock(mutex_);
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

std::shared_ptr<ApiServer::Entry> ApiServer::create(const std::string& id,
                                                    std::unique_ptr<Session> session) {
  auto entry = std::make_shared<Entry>();
  entry->session = std::move(session);
  entry->base_provider = options_.provider_factory(id);
  entry->provider = std::make_unique<RecordingProvider>(*entry->base_provider);
  entry->base_executor = options_.executor_factory(id, entry->session->directory());
  entry->executor = std::make_unique<RecordingExecutor>(*entry->base_executor);
  entry->pipeline = std::make_unique<InsightPipeline>(*entry->session, *entry->provider);
  if (const auto& dir = entry->session->directory(); dir && fs::exists(*dir / layout::transcript)) {
    entry->prior_transcript = json::parse(read_text_file(*dir / layout::transcript), nullptr, false);
    if (entry->prior_transcript.is_discarded()) entry->prior_transcript = json::object();
  }
  entry->thread = std::thread([this, raw = entry.get()] { worker(*raw); });
  std::lock_guard lock(mutex_);
  sessions_[id] = entry;
  return entry;
}

void ApiServer::restore_sessions() {
  if (!options_.sessions_dir || !fs::is_directory(*options_.sessions_dir)) return;
  std::vector<fs::path> dirs;
  for (const auto& d : fs::directory_iterator(*options_.sessions_dir)) {
    if (d.is_directory() && fs::exists(d.path() / layout::events)) dirs.push_back(d.path());
  }
  std::sort(dirs.begin(), dirs.end());
  for (const auto& dir : dirs) {
    try {
      auto session = Session::restore(dir, options_.config, options_.clock);
      const auto id = session->id();
      if (id.size() > 1 && id[0] == 's') {
        try {
          next_id_ = std::max<std::int64_t>(next_id_, std::stoll(id.substr(1)) + 1);
        } catch (const std::exception&) {
        }
      }
      auto entry = create(id, std::move(session));
      entry->pipeline->retry_unprocessed();
    } catch (const std::exception& e) {
      std::cerr << "skipping session " << dir << ": " << e.what() << "\n";
    }
  }
}

void ApiServer::worker(Entry& entry) {
  for (;;) {
    std::string query;
    {
      std::unique_lock lock(entry.mutex);
      entry.changed.wait(lock, [&] { return entry.stop || !entry.queue.empty(); });
      if (entry.stop) return;
      query = std::move(entry.queue.front());
      entry.queue.pop_front();
      entry.busy = true;
    }
    std::optional<ConversationTurn> turn;
    try {
      turn = run_turn(*entry.session, *entry.provider, *entry.executor, query);
    } catch (const std::exception&) {
      // run_turn has already emitted turn_error.
    }
    {
      std::lock_guard lock(entry.mutex);
      entry.turn_in_flight = false;
      entry.queries.push_back(query);
    }
    if (turn) {
      try {
        entry.pipeline->process_turn(*turn);
      } catch (const std::exception& e) {
        entry.session->emit(event::pipeline_error,
                            json{{"turn_id", turn->turn_id}, {"stage", "pipeline"}, {"message", e.what()}});
      }
    }
    if (const auto& dir = entry.session->directory()) {
      try {
        entry.session->persist_snapshot();
        auto recorded = entry.provider->transcript();
        recorded["queries"] = entry.queries;
        recorded["executions"] = entry.executor->transcript();
        write_text_file(*dir / layout::transcript,
                        canonical_dump(merge_transcripts(entry.prior_transcript, recorded)));
      } catch (const std::exception& e) {
        std::cerr << "cannot persist session " << entry.session->id() << ": " << e.what() << "\n";
      }
    }
    {
      std::lock_guard lock(entry.mutex);
      entry.busy = false;
    }
    entry.changed.notify_all();
  }
}

void ApiServer::wait_idle(const std::string& session_id) {
  auto entry = find(session_id);
  if (!entry) return;
  std::unique_lock lock(entry->mutex);
  entry->changed.wait(lock, [&] { return entry->queue.empty() && !entry->busy; });
}

void ApiServer::routes() {
  auto& http = *http_;
  const auto& server = options_.config.server;
  http.set_default_headers({{"Access-Control-Allow-Origin", server.cors_origin}});
  http.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
    res.status = 204;
    res.set_header("Access-Control-Allow-Methods", "GET, POST, PATCH, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type, Last-Event-ID");
  });

  // Resolves the session in match 1 or answers 404.
  auto with_session = [this](auto handler) {
    return [this, handler](const httplib::Request& req, httplib::Response& res) {
      auto entry = find(req.matches[1]);
      if (!entry) {
        error(res, 404, "unknown_session", "no session '" + std::string(req.matches[1]) + "'");
        return;
      }
      try {
        handler(*entry, req, res);
      } catch (const RequestError& e) {
        error(res, http_status(e.status()), e.reason(), e.what());
      }
    };
  };
  auto read_route = [&](const char* pattern, auto project) {
    http.Get(pattern, with_session([project](Entry& e, const httplib::Request&, httplib::Response& res) {
      reply(res, 200, e.session->read([&](const SessionState& s) { return project(s); }));
    }));
  };

  http.Post("/sessions", [this](const httplib::Request&, httplib::Response& res) {
    std::string id;
    std::optional<fs::path> dir;
    {
      std::lock_guard lock(mutex_);
      do {
        id = "s" + std::to_string(next_id_++);
        if (options_.sessions_dir) dir = *options_.sessions_dir / id;
      } while (sessions_.count(id) || (dir && fs::exists(*dir)));
    }
    try {
      create(id, std::make_unique<Session>(id, options_.config, options_.clock, dir));
    } catch (const std::exception& e) {
      error(res, 500, "session_create_failed", e.what());
      return;
    }
    reply(res, 201, json{{"session_id", id}});
  });

  http.Post(R"(/sessions/([^/]+)/dataset)",
            with_session([](Entry& e, const httplib::Request& req, httplib::Response& res) {
              {
                std::lock_guard lock(e.mutex);
                if (e.turn_in_flight || e.busy) {
                  error(res, 409, "turn_in_flight", "a turn is in progress");
                  return;
                }
              }
              const auto name = req.has_param("name") ? req.get_param_value("name") : "dataset";
              try {
                reply(res, 200, json(e.session->load_dataset(req.body, name)));
              } catch (const IngestError& ex) {
                error(res, 422, "invalid_csv", ex.what());
              }
            }));

  http.Post(R"(/sessions/([^/]+)/messages)",
            with_session([](Entry& e, const httplib::Request& req, httplib::Response& res) {
              const auto body = json_body(req, res);
              if (!body) return;
              const auto text = body->find("text");
              if (text == body->end() || !text->is_string() || text->get<std::string>().empty()) {
                error(res, 422, "missing_text", "body needs a non-empty \"text\" string");
                return;
              }
              if (!e.session->dataset()) {
                error(res, 422, "no_dataset", "upload a dataset before chatting");
                return;
              }
              {
                std::lock_guard lock(e.mutex);
                if (e.turn_in_flight) {
                  error(res, 409, "turn_in_flight", "a turn is already in progress");
                  return;
                }
                e.turn_in_flight = true;
                e.queue.push_back(text->get<std::string>());
              }
              e.changed.notify_all();
              reply(res, 202, json{{"status", "accepted"}});
            }));

  http.Get(R"(/sessions/([^/]+)/events)",
           with_session([this](Entry& e, const httplib::Request& req, httplib::Response& res) {
             std::int64_t from = 0;
             try {
               if (req.has_param("from")) {
                 from = std::stoll(req.get_param_value("from"));
               } else if (req.has_header("Last-Event-ID")) {
                 from = std::stoll(req.get_header_value("Last-Event-ID")) + 1;
               }
             } catch (const std::exception&) {
               error(res, 422, "invalid_cursor", "from must be an integer");
               return;
             }
             if (from < 0) {
               error(res, 422, "invalid_cursor", "from must be non-negative");
               return;
             }
             const bool follow = req.get_param_value("follow") != "0";
             Session* session = e.session.get();
             auto cursor = std::make_shared<std::int64_t>(from);
             res.set_header("Cache-Control", "no-cache");
             res.set_chunked_content_provider(
                 "text/event-stream", [this, session, cursor, follow](std::size_t, httplib::DataSink& sink) {
                   for (const auto& ev : session->events_since(*cursor)) {
                     const auto frame = sse::encode({ev.kind, ev.payload.dump(-1, ' ', false, json::error_handler_t::replace),
                                                     std::to_string(ev.seq)});
                     if (!sink.write(frame.data(), frame.size())) return false;
                     *cursor = ev.seq + 1;
                   }
                   if (!follow || stopping_) {
                     sink.done();
                     return true;
                   }
                   session->wait_for_events(*cursor, options_.stream_poll);
                   return sink.is_writable();
                 });
           }));

  read_route(R"(/sessions/([^/]+)/insights)", [](const SessionState& s) { return json(s.insights); });
  read_route(R"(/sessions/([^/]+)/topics)", [](const SessionState& s) { return json(s.topics); });
  read_route(R"(/sessions/([^/]+)/histogram)",
             [](const SessionState& s) { return json(attribute_histogram(s)); });
  read_route(R"(/sessions/([^/]+)/snapshot)", [](const SessionState& s) { return json(s); });

  http.Patch(R"(/sessions/([^/]+)/insights/([^/]+)/score)",
             with_session([](Entry& e, const httplib::Request& req, httplib::Response& res) {
               const auto body = json_body(req, res);
               if (!body) return;
               const auto value = body->find("value");
               if (value == body->end() || !value->is_number_integer()) {
                 error(res, 422, "invalid_value", "value must be an integer from 1 to 5");
                 return;
               }
               reply(res, 200, json(e.session->adjust_score(std::string(req.matches[2]), value->get<int>())));
             }));

  http.Patch(R"(/sessions/([^/]+)/attribute-order)",
             with_session([](Entry& e, const httplib::Request& req, httplib::Response& res) {
               const auto body = json_body(req, res);
               if (!body) return;
               const auto order = body->find("order");
               if (order == body->end() || !order->is_array() ||
                   !std::all_of(order->begin(), order->end(), [](const json& v) { return v.is_string(); })) {
                 error(res, 422, "invalid_order", "order must be an array of attribute names");
                 return;
               }
               const auto applied = e.session->reorder_attributes(order->get<std::vector<std::string>>());
               reply(res, 200, json{{"attribute_order", applied}});
             }));
}

ProviderFactory live_provider_factory(const Config& config) {
  return [provider = config.provider](const std::string&) -> std::unique_ptr<Provider> {
    const char* key = std::getenv(provider.api_key_env.c_str());
    return std::make_unique<LiveProvider>(provider, key ? key : "");
  };
}

ExecutorFactory subprocess_executor_factory(const Config& config) {
  return [chat = config.chat](const std::string& id, const std::optional<fs::path>& dir)
             -> std::unique_ptr<Executor> {
    const auto artifacts = dir ? *dir / "artifacts" : fs::temp_directory_path() / "insightkit" / id;
    return std::make_unique<SubprocessExecutor>(chat.python, chat.exec_timeout_ms, artifacts);
  };
}

}  // namespace insightkit
