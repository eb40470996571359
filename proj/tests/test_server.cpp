#include <doctest.h>

#include <condition_variable>
#include <mutex>
#include <thread>

#include <httplib.h>

#include "insightkit/server.hpp"
#include "insightkit/sse.hpp"
#include "support.hpp"

using namespace insightkit;

namespace {

const std::string kAnswer = "Japan leads with 33.2 MPG.";

json session_fixture() {
  return json{
      {"chat",
       {{"analysis", {kAnswer}},
        {"ie_agent",
         {json::array({{{"action", "identify_new"},
                        {"summary", kAnswer},
                        {"evidence", {{{"block_index", 0}, {"quote", "33.2 MPG"}}}},
                        {"categories", {"extremum"}}}})
              .dump()}},
        {"io_agent",
         {R"({"attributes":["Origin","MPG"],"actions":[]})",
          R"({"decision":"generate","title":"Efficiency","description":"d"})",
          R"({"decision":"generate","title":"Leaders","description":"d"})"}},
        {"semantic_score", {"4"}}}},
      {"embeddings", {{kAnswer, {1.0, 0.0}}, {"Efficiency: d", {1.0, 0.0}}, {"Leaders: d", {0.0, 1.0}}}}};
}

// Holds analysis requests until released, so a turn stays in flight.
class Gate {
 public:
  void wait() {
    std::unique_lock lock(mutex_);
    cv_.wait(lock, [&] { return open_; });
  }
  void release() {
    {
      std::lock_guard lock(mutex_);
      open_ = true;
    }
    cv_.notify_all();
  }

 private:
  std::mutex mutex_;
  std::condition_variable cv_;
  bool open_ = false;
};

class GatedProvider final : public Provider {
 public:
  GatedProvider(const json& fixture, Gate& gate) : inner_(fixture), gate_(gate) {}
  ChatResponse complete(const ChatRequest& request, const StreamSink& sink) override {
    if (request.channel == Channel::analysis) gate_.wait();
    return inner_.complete(request, sink);
  }
  std::vector<EmbeddingVector> embed(const std::vector<std::string>& texts) override { return inner_.embed(texts); }

 private:
  ScriptedProvider inner_;
  Gate& gate_;
};

class TestServer {
 public:
  explicit TestServer(std::optional<testkit::fs::path> dir = std::nullopt)
      : server_(options(std::move(dir))), port_(server_.bind_to_any_port("127.0.0.1")),
        thread_([this] { server_.listen_after_bind(); }), client_("127.0.0.1", port_) {
    server_.wait_until_ready();
    client_.set_read_timeout(10, 0);
  }
  ~TestServer() {
    gate_.release();
    server_.stop();
    thread_.join();
  }

  httplib::Client& http() { return client_; }
  int port() const { return port_; }
  ApiServer& server() { return server_; }
  Gate& gate() { return gate_; }

  std::string create_session() {
    const auto res = client_.Post("/sessions");
    REQUIRE(res);
    REQUIRE(res->status == 201);
    return json::parse(res->body).at("session_id").get<std::string>();
  }

  std::vector<sse::Message> events(const std::string& id, std::int64_t from) {
    const auto res = client_.Get("/sessions/" + id + "/events?from=" + std::to_string(from) + "&follow=0");
    REQUIRE(res);
    REQUIRE(res->status == 200);
    CHECK(res->get_header_value("Content-Type") == "text/event-stream");
    sse::Decoder decoder;
    return decoder.feed(res->body);
  }

 private:
  ServerOptions options(std::optional<testkit::fs::path> dir) {
    ServerOptions o;
    o.sessions_dir = std::move(dir);
    o.clock = std::make_shared<LogicalClock>();
    o.stream_poll = std::chrono::milliseconds(20);
    o.provider_factory = [this](const std::string&) -> std::unique_ptr<Provider> {
      return std::make_unique<GatedProvider>(session_fixture(), gate_);
    };
    o.executor_factory = [](const std::string&, const std::optional<testkit::fs::path>&) -> std::unique_ptr<Executor> {
      return std::make_unique<ScriptedExecutor>(json::object());
    };
    return o;
  }

  Gate gate_;
  ApiServer server_;
  int port_;
  std::thread thread_;
  httplib::Client client_;
};

json body_of(const httplib::Result& res) { return json::parse(res->body); }

void upload_cars(TestServer& t, const std::string& id) {
  const auto res = t.http().Post("/sessions/" + id + "/dataset?name=cars",
                                 testkit::read_file(testkit::fixture_path("cars/cars.csv")), "text/csv");
  REQUIRE(res);
  REQUIRE(res->status == 200);
}

// Uploads the dataset and completes one chat turn.
std::string session_with_turn(TestServer& t) {
  const auto id = t.create_session();
  upload_cars(t, id);
  t.gate().release();
  const auto res = t.http().Post("/sessions/" + id + "/messages", R"({"text":"Which origin is most efficient?"})",
                                 "application/json");
  REQUIRE(res);
  REQUIRE(res->status == 202);
  t.server().wait_idle(id);
  return id;
}

}  // namespace

TEST_CASE("sessions and datasets") {
  TestServer t;
  const auto id = t.create_session();
  CHECK(id == "s1");
  CHECK(t.create_session() == "s2");

  auto res = t.http().Post("/sessions/" + id + "/dataset", "a,b\n1\n", "text/csv");
  REQUIRE(res);
  CHECK(res->status == 422);
  CHECK(body_of(res).at("error") == "invalid_csv");
  CHECK(body_of(res).at("message") == "expected 2 fields, found 1 (row 2)");

  res = t.http().Post("/sessions/" + id + "/dataset?name=cars",
                      testkit::read_file(testkit::fixture_path("cars/cars.csv")), "text/csv");
  REQUIRE(res);
  CHECK(res->status == 200);
  const auto profile = body_of(res);
  CHECK(profile.at("name") == "cars");
  CHECK(profile.at("row_count") == 120);
  CHECK(profile.at("attributes").size() == 9);

  res = t.http().Get("/sessions/nope/insights");
  REQUIRE(res);
  CHECK(res->status == 404);
  CHECK(body_of(res).at("error") == "unknown_session");
}

TEST_CASE("message validation") {
  TestServer t;
  const auto id = t.create_session();
  auto post = [&](const std::string& body) {
    return t.http().Post("/sessions/" + id + "/messages", body, "application/json");
  };
  auto res = post(R"({"text":"hi"})");
  REQUIRE(res);
  CHECK(res->status == 422);
  CHECK(body_of(res).at("error") == "no_dataset");

  upload_cars(t, id);
  res = post(R"({"text":""})");
  CHECK(res->status == 422);
  CHECK(body_of(res).at("error") == "missing_text");
  res = post(R"({"query":"hi"})");
  CHECK(body_of(res).at("error") == "missing_text");
  res = post("not json");
  CHECK(res->status == 422);
  CHECK(body_of(res).at("error") == "invalid_json");
}

TEST_CASE("one turn in flight per session") {
  TestServer t;
  const auto id = t.create_session();
  upload_cars(t, id);
  auto post = [&] { return t.http().Post("/sessions/" + id + "/messages", R"({"text":"q"})", "application/json"); };

  auto res = post();
  REQUIRE(res);
  CHECK(res->status == 202);
  res = post();
  REQUIRE(res);
  CHECK(res->status == 409);
  CHECK(body_of(res).at("error") == "turn_in_flight");
  res = t.http().Post("/sessions/" + id + "/dataset", "x\n1\n", "text/csv");
  CHECK(res->status == 409);

  t.gate().release();
  t.server().wait_idle(id);
  res = t.http().Post("/sessions/" + id + "/dataset", "x\n1\n", "text/csv");
  CHECK(res->status == 409);
  CHECK(body_of(res).at("error") == "dataset_locked");
}

TEST_CASE("the event stream replays the log in order and resumes") {
  TestServer t;
  const auto id = session_with_turn(t);
  const auto snapshot = body_of(t.http().Get("/sessions/" + id + "/snapshot")).get<SessionState>();
  REQUIRE(snapshot.events.size() > 10);

  const auto all = t.events(id, 0);
  REQUIRE(all.size() == snapshot.events.size());
  for (std::size_t k = 0; k < all.size(); ++k) {
    CHECK(all[k].id == std::to_string(k));
    CHECK(all[k].event == snapshot.events[k].kind);
    CHECK(json::parse(all[k].data) == snapshot.events[k].payload);
  }
  const auto kinds = [&] {
    std::vector<std::string> out;
    for (const auto& m : all) out.push_back(m.event);
    return out;
  }();
  for (const char* kind : {"turn_started", "block_delta", "block_complete", "turn_complete", "insight_added",
                           "topic_added", "insight_organized", "turn_processed"}) {
    CHECK(std::count(kinds.begin(), kinds.end(), kind) >= 1);
  }

  const auto tail = t.events(id, 5);
  REQUIRE(tail.size() == all.size() - 5);
  CHECK(tail.front().id == "5");

  httplib::Headers headers{{"Last-Event-ID", "9"}};
  const auto resumed = t.http().Get("/sessions/" + id + "/events?follow=0", headers);
  REQUIRE(resumed);
  sse::Decoder decoder;
  CHECK(decoder.feed(resumed->body).front().id == "10");

  CHECK(t.events(id, 100000).empty());
  const auto bad = t.http().Get("/sessions/" + id + "/events?from=-1&follow=0");
  CHECK(bad->status == 422);
  CHECK(body_of(bad).at("error") == "invalid_cursor");
}

TEST_CASE("a following stream delivers events as they happen") {
  TestServer t;
  const auto id = t.create_session();
  upload_cars(t, id);
  const auto start = t.http().Get("/sessions/" + id + "/snapshot");
  const auto from = body_of(start).at("events").size();

  std::vector<sse::Message> received;
  sse::Decoder decoder;
  bool saw_processed = false;
  std::thread poster([&] {
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    t.gate().release();
    t.http().Post("/sessions/" + id + "/messages", R"({"text":"q"})", "application/json");
  });
  httplib::Client follower("127.0.0.1", t.port());
  follower.set_read_timeout(10, 0);
  follower.Get("/sessions/" + id + "/events?from=" + std::to_string(from),
               [&](const char* data, std::size_t n) {
                 for (auto& m : decoder.feed(std::string_view(data, n))) {
                   if (m.event == "turn_processed") saw_processed = true;
                   received.push_back(std::move(m));
                 }
                 return !saw_processed;
               });
  poster.join();
  CHECK(saw_processed);
  REQUIRE_FALSE(received.empty());
  CHECK(received.front().id == std::to_string(from));
  CHECK(received.front().event == "turn_started");
}

TEST_CASE("reads, score overrides and attribute order") {
  TestServer t;
  const auto id = session_with_turn(t);
  const auto base = "/sessions/" + id;

  const auto insights = body_of(t.http().Get(base + "/insights"));
  REQUIRE(insights.size() == 1);
  CHECK(insights[0].at("insight_id") == "i1");
  CHECK(insights[0].at("topic_id") == "t1");
  CHECK(body_of(t.http().Get(base + "/topics")).size() == 2);
  const auto histogram = body_of(t.http().Get(base + "/histogram"));
  REQUIRE(histogram.size() == 9);
  CHECK(std::count_if(histogram.begin(), histogram.end(), [](const json& b) { return b.at("insight_count") == 1; }) == 2);

  auto res = t.http().Patch(base + "/insights/i1/score", R"({"value":6})", "application/json");
  CHECK(res->status == 422);
  CHECK(body_of(res).at("error") == "score_out_of_range");
  res = t.http().Patch(base + "/insights/i1/score", R"({"value":"2"})", "application/json");
  CHECK(res->status == 422);
  res = t.http().Patch(base + "/insights/i9/score", R"({"value":2})", "application/json");
  CHECK(res->status == 404);
  CHECK(body_of(res).at("error") == "unknown_insight");
  res = t.http().Patch(base + "/insights/i1/score", R"({"value":2})", "application/json");
  CHECK(res->status == 200);
  CHECK(body_of(res).at("score").at("user_override") == 2);
  CHECK(body_of(t.http().Get(base + "/insights"))[0].at("score").at("user_override") == 2);

  res = t.http().Patch(base + "/attribute-order", R"({"order":["MPG"]})", "application/json");
  CHECK(res->status == 422);
  CHECK(body_of(res).at("error") == "not_a_permutation");
  auto order = body_of(t.http().Get(base + "/snapshot")).at("attribute_order");
  std::reverse(order.begin(), order.end());
  res = t.http().Patch(base + "/attribute-order", json{{"order", order}}.dump(), "application/json");
  CHECK(res->status == 200);
  CHECK(body_of(t.http().Get(base + "/snapshot")).at("attribute_order") == order);
}

TEST_CASE("cross-origin requests") {
  TestServer t;
  const auto res = t.http().Post("/sessions");
  CHECK(res->get_header_value("Access-Control-Allow-Origin") == Config{}.server.cors_origin);
  const auto preflight = t.http().Options("/sessions/s1/messages");
  REQUIRE(preflight);
  CHECK(preflight->status == 204);
  CHECK(preflight->get_header_value("Access-Control-Allow-Methods").find("PATCH") != std::string::npos);
  CHECK(preflight->get_header_value("Access-Control-Allow-Origin") == Config{}.server.cors_origin);
}

TEST_CASE("sessions survive a restart") {
  testkit::TempDir dir;
  json before;
  {
    TestServer t(dir.path());
    const auto id = session_with_turn(t);
    CHECK(t.http().Patch("/sessions/" + id + "/insights/i1/score", R"({"value":5})", "application/json")->status == 200);
    before = body_of(t.http().Get("/sessions/" + id + "/snapshot"));
    CHECK(testkit::fs::exists(dir / "s1" / "events.jsonl"));
    CHECK(testkit::fs::exists(dir / "s1" / "transcript.fixture.json"));
  }
  TestServer t(dir.path());
  const auto after = body_of(t.http().Get("/sessions/s1/snapshot"));
  CHECK(after == before);
  CHECK(t.create_session() == "s2");
  const auto transcript = testkit::read_json(dir / "s1" / "transcript.fixture.json");
  CHECK(transcript.at("queries") == json::array({"Which origin is most efficient?"}));
  CHECK(transcript.at("chat").at("analysis").size() == 1);
}
