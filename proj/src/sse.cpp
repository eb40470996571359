#include "insightkit/sse.hpp"

namespace insightkit::sse {

std::string encode(const Message& message) {
  std::string out;
  if (message.id) out += "id: " + *message.id + "\n";
  if (!message.event.empty()) out += "event: " + message.event + "\n";
  std::string_view data = message.data;
  // Multi-line payloads become one data field per line.
  while (true) {
    const auto nl = data.find('\n');
    out += "data: ";
    out += data.substr(0, nl);
    out += "\n";
    if (nl == std::string_view::npos) break;
    data.remove_prefix(nl + 1);
  }
  out += "\n";
  return out;
}

std::vector<Message> Decoder::feed(std::string_view chunk) {
  std::vector<Message> out;
  partial_.append(chunk);
  std::size_t start = 0;
  while (true) {
    const auto nl = partial_.find('\n', start);
    if (nl == std::string::npos) break;
    std::string_view line(partial_.data() + start, nl - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    take_line(line, out);
    start = nl + 1;
  }
  partial_.erase(0, start);
  return out;
}

void Decoder::take_line(std::string_view line, std::vector<Message>& out) {
  if (line.empty()) {
    if (has_data_) out.push_back(std::move(current_));
    current_ = Message{};
    has_data_ = false;
    return;
  }
  if (line.front() == ':') return;  // comment / keep-alive
  const auto colon = line.find(':');
  std::string_view field = line.substr(0, colon);
  std::string_view value = colon == std::string_view::npos ? std::string_view{} : line.substr(colon + 1);
  if (!value.empty() && value.front() == ' ') value.remove_prefix(1);
  if (field == "data") {
    if (has_data_) current_.data += '\n';
    current_.data += value;
    has_data_ = true;
  } else if (field == "event") {
    current_.event = value;
  } else if (field == "id") {
    current_.id = std::string(value);
  }
}

}  // namespace insightkit::sse
