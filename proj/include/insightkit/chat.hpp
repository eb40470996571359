#pragma once
// The analysis chat loop: prompt with the dataset description, stream the
// reply, execute code blocks, feed outputs back, and record the turn.

#include <string>
#include <string_view>
#include <vector>

#include "insightkit/executor.hpp"
#include "insightkit/llm.hpp"
#include "insightkit/session.hpp"

namespace insightkit {

// Runs one user turn. Streams turn_started, block_delta, block_complete and
// turn_complete on the session; on a provider failure emits turn_error and
// rethrows. Throws RequestError when the session has no dataset.
ConversationTurn run_turn(Session& session, Provider& provider, Executor& executor,
                          std::string_view user_query);

// Messages sent on the analysis channel before the new query.
std::vector<ChatMessage> analysis_history(const SessionState& state,
                                          const std::string& dataset_path);

}  // namespace insightkit
