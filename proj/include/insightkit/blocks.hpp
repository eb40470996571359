#pragma once
// Splits assistant responses into text and fenced code blocks.
//
// A fence opens on a line that starts with ``` (the rest of the line is the
// language tag) and closes on a line that is ``` followed only by whitespace.
// Text segments lose their leading and trailing line breaks and are dropped
// when blank. A fence still open at the end becomes a code block flagged
// unterminated. Block indices are positions in the returned list.

#include <string>
#include <string_view>
#include <vector>

#include "insightkit/model.hpp"

namespace insightkit {

std::vector<ResponseBlock> parse_blocks(std::string_view text);

// Removes one surrounding ``` fence (any info string) and outer whitespace.
std::string_view strip_json_fence(std::string_view reply);

// Text form of a block list for conversation history and agent prompts.
std::string render_blocks(const std::vector<ResponseBlock>& blocks);

// Incremental variant. After finish(), the concatenation of everything
// returned equals parse_blocks() of the concatenated input, regardless of
// how the input was chunked.
class StreamingBlockParser {
 public:
  // Returns blocks completed by this chunk.
  std::vector<ResponseBlock> feed(std::string_view chunk);
  std::vector<ResponseBlock> finish();

 private:
  void take_line(std::string_view line, std::vector<ResponseBlock>& out);
  void emit(BlockKind kind, std::vector<ResponseBlock>& out, bool unterminated = false);

  std::string partial_line_;
  std::string body_;  // accumulated lines of the open block
  bool body_has_line_ = false;
  bool in_code_ = false;
  std::string language_;
  int next_index_ = 0;
  bool finished_ = false;
};

}  // namespace insightkit
