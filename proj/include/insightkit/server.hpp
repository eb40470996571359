#pragma once
// HTTP facade over sessions: dataset upload, chat turns, canonical reads,
// score overrides, attribute reordering and a resumable SSE event stream.

#include <atomic>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

#include "insightkit/config.hpp"
#include "insightkit/executor.hpp"
#include "insightkit/llm.hpp"
#include "insightkit/session.hpp"

namespace httplib {
class Server;
}

namespace insightkit {

using ProviderFactory = std::function<std::unique_ptr<Provider>(const std::string& session_id)>;
using ExecutorFactory = std::function<std::unique_ptr<Executor>(
    const std::string& session_id, const std::optional<std::filesystem::path>& session_dir)>;

struct ServerOptions {
  Config config;
  // Sessions persist under this directory when set; otherwise memory only.
  std::optional<std::filesystem::path> sessions_dir;
  ProviderFactory provider_factory;
  ExecutorFactory executor_factory;
  std::shared_ptr<Clock> clock;  // defaults to the system clock
  std::chrono::milliseconds stream_poll{250};
};

class ApiServer {
 public:
  explicit ApiServer(ServerOptions options);
  ~ApiServer();

  ApiServer(const ApiServer&) = delete;
  ApiServer& operator=(const ApiServer&) = delete;

  // Blocks until stop(). Returns false if the address cannot be bound.
  bool listen(const std::string& host, int port);
  // Binds an ephemeral port; serve with listen_after_bind(). Returns the port or -1.
  int bind_to_any_port(const std::string& host);
  bool listen_after_bind();
  void stop();
  bool is_running() const;
  void wait_until_ready() const;

  // Blocks until the session has no queued or running work.
  void wait_idle(const std::string& session_id);

 private:
  struct Entry;
  void routes();
  std::shared_ptr<Entry> find(const std::string& id);
  std::shared_ptr<Entry> create(const std::string& id, std::unique_ptr<Session> session);
  void restore_sessions();
  void worker(Entry& entry);

  ServerOptions options_;
  std::unique_ptr<httplib::Server> http_;
  std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Entry>> sessions_;
  std::int64_t next_id_ = 1;
  std::atomic<bool> stopping_{false};
};

// Default factories: a live provider keyed from the environment and a
// subprocess executor storing images under the session directory.
ProviderFactory live_provider_factory(const Config& config);
ExecutorFactory subprocess_executor_factory(const Config& config);

}  // namespace insightkit
