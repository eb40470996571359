#include <csignal>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "insightkit/config.hpp"
#include "insightkit/harness.hpp"
#include "insightkit/server.hpp"

namespace {

using insightkit::Config;

Config config_or_default(const std::string& path) {
  return path.empty() ? Config{} : insightkit::load_config(path);
}

std::optional<std::filesystem::path> optional_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return std::filesystem::path(s);
}

void print_ratio(const char* name, const insightkit::Ratio& r) {
  std::cout << name << ": " << r.numerator << "/" << r.denominator << " = "
            << r.percent().value_or("n/a") << (r.percent() ? "%" : "") << "\n";
}

insightkit::ApiServer* g_server = nullptr;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Insight extraction and organization for conversational data analysis"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file")->check(CLI::ExistingFile);

  std::string dataset, fixtures, out, transcript, snapshot, labels;

  auto* replay = app.add_subcommand("replay", "Replay a fixture bundle through chat and the pipeline");
  replay->add_option("--dataset", dataset, "CSV dataset")->required()->check(CLI::ExistingFile);
  replay->add_option("--fixtures", fixtures, "Replay bundle JSON")->required()->check(CLI::ExistingFile);
  replay->add_option("--out", out, "Output directory")->required();

  auto* extract = app.add_subcommand("extract", "Run extraction and organization over recorded turns");
  extract->add_option("--transcript", transcript, "Turn list JSON")->required()->check(CLI::ExistingFile);
  extract->add_option("--dataset", dataset, "CSV dataset")->required()->check(CLI::ExistingFile);
  extract->add_option("--fixtures", fixtures, "Agent fixture JSON")->required()->check(CLI::ExistingFile);
  extract->add_option("--out", out, "Output directory");

  bool as_json = false;
  auto* evaluate = app.add_subcommand("evaluate", "Score a snapshot against human labels");
  evaluate->add_option("--snapshot", snapshot, "snapshot.json")->required()->check(CLI::ExistingFile);
  evaluate->add_option("--labels", labels, "Labels JSON")->required()->check(CLI::ExistingFile);
  evaluate->add_flag("--json", as_json, "Print the report as JSON");

  std::string host;
  int port = 0;
  std::string sessions_dir;
  auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
  serve->add_option("--host", host, "Bind address (default from config)");
  serve->add_option("--port", port, "Port (default from config)");
  serve->add_option("--sessions-dir", sessions_dir, "Session storage directory");

  CLI11_PARSE(app, argc, argv);

  try {
    const Config config = config_or_default(config_path);
    if (*replay) {
      const auto result = insightkit::replay(dataset, fixtures, config, std::filesystem::path(out));
      std::cout << "replayed " << result.state.turns.size() << " turns: "
                << result.state.insights.size() << " insights, " << result.state.topics.size()
                << " topics -> " << out << "\n";
    } else if (*extract) {
      const auto report = insightkit::extract(transcript, dataset, fixtures, config, optional_path(out));
      std::cout << insightkit::canonical_dump(report.to_json());
    } else if (*evaluate) {
      const auto report = insightkit::evaluate(std::filesystem::path(snapshot), std::filesystem::path(labels));
      if (as_json) {
        std::cout << insightkit::canonical_dump(report.to_json());
      } else {
        print_ratio("coverage", report.coverage);
        print_ratio("evidence_accuracy", report.evidence_accuracy);
        print_ratio("context_accuracy", report.context_accuracy);
        print_ratio("topic_accuracy", report.topic_accuracy);
      }
    } else if (*serve) {
      insightkit::ServerOptions options;
      options.config = config;
      options.sessions_dir = sessions_dir.empty() ? config.server.sessions_dir
                                                  : std::filesystem::path(sessions_dir);
      insightkit::ApiServer server(std::move(options));
      g_server = &server;
      std::signal(SIGINT, [](int) {
        if (g_server) g_server->stop();
      });
      std::signal(SIGTERM, [](int) {
        if (g_server) g_server->stop();
      });
      const auto bind_host = host.empty() ? config.server.host : host;
      const int bind_port = port == 0 ? config.server.port : port;
      std::cerr << "listening on " << bind_host << ":" << bind_port << "\n";
      if (!server.listen(bind_host, bind_port)) {
        std::cerr << "error: cannot listen on " << bind_host << ":" << bind_port << "\n";
        return 1;
      }
      g_server = nullptr;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
