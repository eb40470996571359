#pragma once
// Shared helpers for the test binaries and the acceptance runner.

#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <random>
#include <string>

#include "insightkit/dataset.hpp"
#include "insightkit/model.hpp"
#include "insightkit/session.hpp"
#include "test_paths.hpp"

namespace testkit {

namespace fs = std::filesystem;
using insightkit::json;

inline fs::path source_path(const std::string& rel) { return fs::path(INSIGHTKIT_SOURCE_DIR) / rel; }
inline fs::path fixture_path(const std::string& rel) { return source_path("tests/fixtures/" + rel); }
inline fs::path golden_path(const std::string& rel) { return source_path("tests/golden/" + rel); }

inline std::string read_file(const fs::path& p) { return insightkit::read_text_file(p); }
inline json read_json(const fs::path& p) { return json::parse(read_file(p)); }

inline insightkit::Dataset load_cars() {
  return insightkit::ingest_csv(read_file(fixture_path("cars/cars.csv")), "cars");
}

// Removed with its contents on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (fs::temp_directory_path() / "insightkit-test-XXXXXX").string();
    if (!mkdtemp(tmpl.data())) throw std::runtime_error("mkdtemp failed");
    path_ = tmpl;
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& rel) const { return path_ / rel; }

 private:
  fs::path path_;
};

struct CommandResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr
};

inline CommandResult run_command(const std::string& command) {
  CommandResult result;
  FILE* pipe = popen((command + " 2>&1").c_str(), "r");
  if (!pipe) return result;
  std::array<char, 4096> buffer{};
  std::size_t n = 0;
  while ((n = fread(buffer.data(), 1, buffer.size(), pipe)) > 0) result.output.append(buffer.data(), n);
  const int status = pclose(pipe);
  result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return result;
}

inline std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

inline CommandResult run_cli(const std::string& args) {
  return run_command(quote(INSIGHTKIT_CLI) + " " + args);
}

inline CommandResult replay_cars(const fs::path& out, const fs::path& fixtures = fixture_path("cars/replay.json")) {
  return run_cli("replay --dataset " + quote(fixture_path("cars/cars.csv")) + " --fixtures " +
                 quote(fixtures) + " --out " + quote(out));
}

}  // namespace testkit
