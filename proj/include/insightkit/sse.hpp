#pragma once
// Server-sent events framing.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace insightkit::sse {

struct Message {
  std::string event;  // empty means the default "message" type
  std::string data;
  std::optional<std::string> id;
};

std::string encode(const Message& message);

// Incremental decoder: feed arbitrary byte chunks, collect complete messages.
class Decoder {
 public:
  std::vector<Message> feed(std::string_view chunk);

 private:
  void take_line(std::string_view line, std::vector<Message>& out);

  std::string partial_;
  Message current_;
  bool has_data_ = false;
};

}  // namespace insightkit::sse
