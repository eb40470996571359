#pragma once
// Code execution backends for the analysis chat loop.

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "insightkit/model.hpp"

namespace insightkit {

enum class ArtifactKind { visualization, image };
INSIGHTKIT_ENUM_NAMES(ArtifactKind, {ArtifactKind::visualization, "visualization"},
                      {ArtifactKind::image, "image"});

struct Artifact {
  std::string artifact_id;
  ArtifactKind kind = ArtifactKind::visualization;
  std::string content;  // chart spec JSON, or the stored image path

  bool operator==(const Artifact&) const = default;
};

struct ExecutionResult {
  std::string stdout_text;  // stdout and stderr, interleaved
  std::vector<Artifact> artifacts;
  int exit_status = 0;
  std::int64_t duration_ms = 0;
  bool timed_out = false;

  bool operator==(const ExecutionResult&) const = default;
};

void to_json(json& j, const Artifact& v);
void from_json(const json& j, Artifact& v);
void to_json(json& j, const ExecutionResult& v);
void from_json(const json& j, ExecutionResult& v);

struct ExecutionContext {
  std::optional<std::filesystem::path> dataset_path;
};

class Executor {
 public:
  virtual ~Executor() = default;
  virtual ExecutionResult execute(const std::string& code, const ExecutionContext& context) = 0;
};

// Replays {"executions": [result, ...]} FIFO. An entry may be a bare string,
// shorthand for a zero-exit result with that stdout.
class ScriptedExecutor final : public Executor {
 public:
  explicit ScriptedExecutor(const json& fixture);
  ExecutionResult execute(const std::string& code, const ExecutionContext& context) override;

  std::size_t served() const;
  std::size_t remaining() const;

 private:
  mutable std::mutex mutex_;
  std::vector<ExecutionResult> queue_;
  std::size_t cursor_ = 0;
};

// Decorator that keeps every served result; the list replays through
// ScriptedExecutor as {"executions": [...]}.
class RecordingExecutor final : public Executor {
 public:
  explicit RecordingExecutor(Executor& inner) : inner_(inner) {}
  ExecutionResult execute(const std::string& code, const ExecutionContext& context) override;
  json transcript() const;

 private:
  Executor& inner_;
  mutable std::mutex mutex_;
  json served_ = json::array();
};

// Runs each snippet with a fresh interpreter in a scratch directory, in its
// own process group, without network where the kernel allows it. The
// process group is killed at the wall-clock limit. Chart specs (*.json)
// written by the snippet become visualization artifacts; *.png and *.svg
// files are copied into artifact_dir and reported as image artifacts.
class SubprocessExecutor final : public Executor {
 public:
  SubprocessExecutor(std::string interpreter, std::int64_t timeout_ms,
                     std::filesystem::path artifact_dir);
  ExecutionResult execute(const std::string& code, const ExecutionContext& context) override;

 private:
  std::string interpreter_;
  std::int64_t timeout_ms_;
  std::filesystem::path artifact_dir_;
  std::mutex mutex_;
  int counter_ = 0;
};

inline constexpr std::size_t kMaxCapturedOutput = 1 << 20;

}  // namespace insightkit
