#include "insightkit/chat.hpp"

#include "insightkit/blocks.hpp"
#include "insightkit/prompts.hpp"

namespace insightkit {

std::vector<ChatMessage> analysis_history(const SessionState& state,
                                          const std::string& dataset_path) {
  std::vector<ChatMessage> messages;
  const std::string description = state.profile ? state.profile->nl_description : "";
  messages.push_back({Role::system, prompts::render("analysis_system",
                                                    {{"dataset_path", dataset_path},
                                                     {"dataset_description", description}})});
  for (const auto& turn : state.turns) {
    messages.push_back({Role::user, turn.user_query});
    messages.push_back({Role::assistant, render_blocks(turn.blocks)});
  }
  return messages;
}

namespace {

std::string execution_feedback(const std::vector<std::pair<int, ExecutionResult>>& runs) {
  std::string out = "Execution results:\n";
  for (const auto& [index, r] : runs) {
    out += "--- code block " + std::to_string(index) + " (exit status " +
           std::to_string(r.exit_status) + ")\n" + r.stdout_text + "\n";
    for (const auto& a : r.artifacts) {
      out += "[" + std::string(to_string(a.kind)) + " artifact " + a.artifact_id + "]\n";
    }
  }
  out += "Interpret these results for the user.";
  return out;
}

}  // namespace

ConversationTurn run_turn(Session& session, Provider& provider, Executor& executor,
                          std::string_view user_query) {
  const auto data = session.dataset();
  if (!data) {
    throw RequestError(RequestError::Status::invalid, "no_dataset",
                       "upload a dataset before asking questions");
  }
  const auto path = session.dataset_path();
  const std::string dataset_path = path ? path->string() : data->profile.name;

  auto [turn_id, messages] = session.read([&](const SessionState& s) {
    return std::pair{s.next_turn_id, analysis_history(s, dataset_path)};
  });
  messages.push_back({Role::user, std::string(user_query)});
  session.emit(event::turn_started, json{{"turn_id", turn_id}, {"user_query", user_query}});

  ConversationTurn turn;
  turn.turn_id = turn_id;
  turn.user_query = std::string(user_query);

  auto push_block = [&](ResponseBlock block) {
    block.block_index = static_cast<int>(turn.blocks.size());
    session.emit(event::block_complete, json{{"turn_id", turn_id}, {"block", block}});
    turn.blocks.push_back(std::move(block));
  };

  const ExecutionContext exec_context{path};
  const int max_iterations = std::max(1, session.config().chat.max_iterations);
  try {
    for (int iteration = 1; iteration <= max_iterations; ++iteration) {
      ChatRequest request{Channel::analysis, messages, {}, 0.0};
      StreamingBlockParser parser;
      std::vector<ResponseBlock> reply_blocks;
      auto sink = [&](std::string_view delta) {
        session.emit(event::block_delta, json{{"turn_id", turn_id}, {"delta", delta}});
        for (auto& b : parser.feed(delta)) reply_blocks.push_back(std::move(b));
      };
      const auto response = provider.complete(request, sink);
      for (auto& b : parser.finish()) reply_blocks.push_back(std::move(b));

      std::vector<std::pair<int, ExecutionResult>> runs;
      for (auto& block : reply_blocks) {
        const bool runnable = block.kind == BlockKind::code && !block.unterminated &&
                              (block.language.empty() || block.language == "python" ||
                               block.language == "py");
        const std::string code = block.content;
        push_block(std::move(block));
        if (!runnable) continue;
        const int code_index = static_cast<int>(turn.blocks.size()) - 1;
        auto result = executor.execute(code, exec_context);
        if (!result.stdout_text.empty() || result.artifacts.empty()) {
          push_block({0, BlockKind::code_output, result.stdout_text, "", false});
        }
        for (const auto& artifact : result.artifacts) {
          push_block({0, BlockKind::visualization, artifact.content,
                      std::string(to_string(artifact.kind)), false});
        }
        runs.emplace_back(code_index, std::move(result));
      }
      if (runs.empty()) break;
      messages.push_back({Role::assistant, response.content});
      messages.push_back({Role::user, execution_feedback(runs)});
    }
  } catch (const std::exception& e) {
    session.emit(event::turn_error, json{{"turn_id", turn_id}, {"message", e.what()}});
    throw;
  }

  turn.created_at = session.clock().now();
  session.emit(event::turn_complete, json{{"turn", turn}});
  return turn;
}

}  // namespace insightkit
