#include "insightkit/executor.hpp"

#include <fcntl.h>
#include <poll.h>
#include <sched.h>
#include <signal.h>
#include <sys/types.h>
#include <sys/wait.h>
#include <unistd.h>

extern char** environ;

#include <algorithm>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "insightkit/llm.hpp"

namespace insightkit {

namespace fs = std::filesystem;

void to_json(json& j, const Artifact& v) {
  j = json{{"artifact_id", v.artifact_id}, {"kind", v.kind}, {"content", v.content}};
}

void from_json(const json& j, Artifact& v) {
  j.at("artifact_id").get_to(v.artifact_id);
  v.kind = j.value("kind", ArtifactKind::visualization);
  if (j.at("content").is_string()) {
    v.content = j["content"].get<std::string>();
  } else {
    v.content = j["content"].dump();
  }
}

void to_json(json& j, const ExecutionResult& v) {
  j = json{{"stdout", v.stdout_text},
           {"artifacts", v.artifacts},
           {"exit_status", v.exit_status},
           {"duration_ms", v.duration_ms},
           {"timed_out", v.timed_out}};
}

void from_json(const json& j, ExecutionResult& v) {
  v.stdout_text = j.value("stdout", "");
  v.artifacts = j.value("artifacts", std::vector<Artifact>{});
  v.exit_status = j.value("exit_status", 0);
  v.duration_ms = j.value("duration_ms", std::int64_t{0});
  v.timed_out = j.value("timed_out", false);
  if (v.duration_ms < 0) throw std::invalid_argument("duration_ms must be non-negative");
}

// ---------------------------------------------------------------------------

ScriptedExecutor::ScriptedExecutor(const json& fixture) {
  const auto it = fixture.find("executions");
  if (it == fixture.end()) return;
  for (const auto& entry : *it) {
    if (entry.is_string()) {
      queue_.push_back({entry.get<std::string>(), {}, 0, 0, false});
    } else {
      try {
        queue_.push_back(entry.get<ExecutionResult>());
      } catch (const std::exception& e) {
        throw FixtureError("invalid execution fixture #" + std::to_string(queue_.size() + 1) +
                           ": " + e.what());
      }
    }
  }
}

ExecutionResult ScriptedExecutor::execute(const std::string&, const ExecutionContext&) {
  std::lock_guard lock(mutex_);
  if (cursor_ >= queue_.size()) {
    throw FixtureError("fixture exhausted: executions (request #" + std::to_string(cursor_ + 1) +
                       ")");
  }
  return queue_[cursor_++];
}

ExecutionResult RecordingExecutor::execute(const std::string& code, const ExecutionContext& context) {
  auto result = inner_.execute(code, context);
  std::lock_guard lock(mutex_);
  served_.push_back(json(result));
  return result;
}

json RecordingExecutor::transcript() const {
  std::lock_guard lock(mutex_);
  return served_;
}

std::size_t ScriptedExecutor::served() const {
  std::lock_guard lock(mutex_);
  return cursor_;
}

std::size_t ScriptedExecutor::remaining() const {
  std::lock_guard lock(mutex_);
  return queue_.size() - cursor_;
}

// ---------------------------------------------------------------------------

SubprocessExecutor::SubprocessExecutor(std::string interpreter, std::int64_t timeout_ms,
                                       fs::path artifact_dir)
    : interpreter_(std::move(interpreter)),
      timeout_ms_(timeout_ms),
      artifact_dir_(std::move(artifact_dir)) {}

namespace {

struct ScratchDir {
  fs::path path;
  ScratchDir() {
    std::string tmpl = (fs::temp_directory_path() / "insightkit-exec-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("cannot create scratch directory");
    path = tmpl;
  }
  ~ScratchDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
  ScratchDir(const ScratchDir&) = delete;
  ScratchDir& operator=(const ScratchDir&) = delete;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

ExecutionResult SubprocessExecutor::execute(const std::string& code,
                                            const ExecutionContext& context) {
  ScratchDir scratch;
  {
    std::ofstream script(scratch.path / "snippet.py", std::ios::binary);
    script << code;
  }
  if (context.dataset_path) {
    std::error_code ec;
    fs::create_symlink(fs::absolute(*context.dataset_path),
                       scratch.path / context.dataset_path->filename(), ec);
  }

  // Built before fork: the child may only make async-signal-safe calls.
  std::vector<std::string> env_storage;
  for (char** e = environ; *e; ++e) {
    const std::string_view kv(*e);
    if (kv.starts_with("INSIGHTKIT_DATASET=") || kv.starts_with("MPLBACKEND=")) continue;
    env_storage.emplace_back(kv);
  }
  env_storage.push_back("MPLBACKEND=Agg");
  if (context.dataset_path) {
    env_storage.push_back("INSIGHTKIT_DATASET=" + fs::absolute(*context.dataset_path).string());
  }
  std::vector<char*> envp;
  for (auto& kv : env_storage) envp.push_back(kv.data());
  envp.push_back(nullptr);
  std::string script_name = "snippet.py";
  std::vector<char*> argv{interpreter_.data(), script_name.data(), nullptr};

  int pipefd[2];
  if (pipe2(pipefd, O_CLOEXEC) != 0) throw std::runtime_error("pipe failed");
  const auto started = std::chrono::steady_clock::now();
  const pid_t pid = fork();
  if (pid < 0) {
    close(pipefd[0]);
    close(pipefd[1]);
    throw std::runtime_error("fork failed");
  }
  if (pid == 0) {
    setpgid(0, 0);
    unshare(CLONE_NEWNET);  // no-op without privileges
    if (chdir(scratch.path.c_str()) != 0) _exit(127);
    dup2(pipefd[1], STDOUT_FILENO);
    dup2(pipefd[1], STDERR_FILENO);
    const int devnull = open("/dev/null", O_RDONLY);
    if (devnull >= 0) dup2(devnull, STDIN_FILENO);
    execvpe(interpreter_.c_str(), argv.data(), envp.data());
    _exit(127);
  }
  setpgid(pid, pid);
  close(pipefd[1]);

  ExecutionResult result;
  const auto deadline = started + std::chrono::milliseconds(timeout_ms_);
  char buffer[4096];
  while (true) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                          deadline - std::chrono::steady_clock::now())
                          .count();
    if (left <= 0) {
      result.timed_out = true;
      break;
    }
    pollfd pfd{pipefd[0], POLLIN, 0};
    const int ready = poll(&pfd, 1, static_cast<int>(std::min<std::int64_t>(left, 1000)));
    if (ready < 0 && errno == EINTR) continue;
    if (ready <= 0) continue;
    const ssize_t n = read(pipefd[0], buffer, sizeof buffer);
    if (n <= 0) break;
    if (result.stdout_text.size() < kMaxCapturedOutput) {
      result.stdout_text.append(buffer, static_cast<std::size_t>(n));
    }
  }
  close(pipefd[0]);
  if (result.timed_out) kill(-pid, SIGKILL);
  int status = 0;
  while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
  }
  kill(-pid, SIGKILL);  // stragglers that kept the pipe open
  result.duration_ms = std::max<std::int64_t>(
      0, std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() -
                                                               started)
             .count());
  if (result.timed_out) {
    result.exit_status = 124;
    if (!result.stdout_text.empty() && result.stdout_text.back() != '\n') result.stdout_text += '\n';
    result.stdout_text +=
        "[execution timed out after " + std::to_string(timeout_ms_) + " ms and was terminated]";
  } else if (WIFEXITED(status)) {
    result.exit_status = WEXITSTATUS(status);
  } else if (WIFSIGNALED(status)) {
    result.exit_status = 128 + WTERMSIG(status);
  }

  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(scratch.path)) {
    if (entry.is_regular_file() && !entry.is_symlink()) files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  std::lock_guard lock(mutex_);
  for (const auto& file : files) {
    const auto ext = file.extension().string();
    if (ext == ".json") {
      const auto text = slurp(file);
      const auto spec = json::parse(text, nullptr, false);
      if (spec.is_discarded()) continue;
      result.artifacts.push_back({"a" + std::to_string(++counter_) + "-" + file.filename().string(),
                                  ArtifactKind::visualization, spec.dump()});
    } else if (ext == ".png" || ext == ".svg") {
      const auto id = "a" + std::to_string(++counter_) + "-" + file.filename().string();
      fs::create_directories(artifact_dir_);
      const auto stored = artifact_dir_ / id;
      fs::copy_file(file, stored, fs::copy_options::overwrite_existing);
      result.artifacts.push_back({id, ArtifactKind::image, stored.string()});
    }
  }
  return result;
}

}  // namespace insightkit
