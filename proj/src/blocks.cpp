#include "insightkit/blocks.hpp"

#include <algorithm>
#include <cctype>

namespace insightkit {

namespace {

constexpr std::string_view kFence = "```";

bool opens_fence(std::string_view line) { return line.substr(0, kFence.size()) == kFence; }

bool closes_fence(std::string_view line) {
  if (!opens_fence(line)) return false;
  const auto rest = line.substr(kFence.size());
  return std::all_of(rest.begin(), rest.end(),
                     [](unsigned char c) { return std::isspace(c) != 0; });
}

std::string fence_language(std::string_view line) {
  auto rest = line.substr(kFence.size());
  while (!rest.empty() && std::isspace(static_cast<unsigned char>(rest.front()))) rest.remove_prefix(1);
  while (!rest.empty() && std::isspace(static_cast<unsigned char>(rest.back()))) rest.remove_suffix(1);
  return std::string(rest);
}

// Strips surrounding line breaks; nullopt when nothing but whitespace remains.
std::optional<std::string> clean_text(std::string_view s) {
  const bool blank = std::all_of(s.begin(), s.end(),
                                 [](unsigned char c) { return std::isspace(c) != 0; });
  if (blank) return std::nullopt;
  while (!s.empty() && (s.front() == '\n' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == '\n' || s.back() == '\r')) s.remove_suffix(1);
  return std::string(s);
}

}  // namespace

std::vector<ResponseBlock> parse_blocks(std::string_view text) {
  std::vector<std::string_view> lines;
  for (std::size_t start = 0;;) {
    const auto nl = text.find('\n', start);
    if (nl == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, nl - start));
    start = nl + 1;
  }

  std::vector<ResponseBlock> blocks;
  auto push = [&](BlockKind kind, std::string content, std::string language, bool unterminated) {
    blocks.push_back({static_cast<int>(blocks.size()), kind, std::move(content),
                      std::move(language), unterminated});
  };
  auto join = [](std::span<const std::string_view> part) {
    std::string out;
    for (std::size_t i = 0; i < part.size(); ++i) {
      if (i > 0) out += '\n';
      out += part[i];
    }
    return out;
  };

  bool in_code = false;
  std::string language;
  std::size_t segment_start = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = lines[i];
    const auto segment = std::span(lines).subspan(segment_start, i - segment_start);
    if (!in_code && opens_fence(line)) {
      if (auto t = clean_text(join(segment))) push(BlockKind::text, std::move(*t), "", false);
      in_code = true;
      language = fence_language(line);
      segment_start = i + 1;
    } else if (in_code && closes_fence(line)) {
      push(BlockKind::code, join(segment), std::move(language), false);
      language.clear();
      in_code = false;
      segment_start = i + 1;
    }
  }
  const auto tail = std::span(lines).subspan(segment_start);
  if (in_code) {
    push(BlockKind::code, join(tail), std::move(language), true);
  } else if (auto t = clean_text(join(tail))) {
    push(BlockKind::text, std::move(*t), "", false);
  }
  return blocks;
}

std::string_view strip_json_fence(std::string_view s) {
  auto trim = [](std::string_view v) {
    while (!v.empty() && std::isspace(static_cast<unsigned char>(v.front()))) v.remove_prefix(1);
    while (!v.empty() && std::isspace(static_cast<unsigned char>(v.back()))) v.remove_suffix(1);
    return v;
  };
  s = trim(s);
  if (!s.starts_with(kFence)) return s;
  const auto first_nl = s.find('\n');
  const auto last_fence = s.rfind(kFence);
  if (first_nl == std::string_view::npos || last_fence <= first_nl) return s;
  return trim(s.substr(first_nl + 1, last_fence - first_nl - 1));
}

std::string render_blocks(const std::vector<ResponseBlock>& blocks) {
  std::string out;
  for (const auto& b : blocks) {
    out += "[block " + std::to_string(b.block_index) + ", " + std::string(to_string(b.kind));
    if (!b.language.empty()) out += ", " + b.language;
    out += "]\n" + b.content + "\n";
  }
  return out;
}

// ---------------------------------------------------------------------------

std::vector<ResponseBlock> StreamingBlockParser::feed(std::string_view chunk) {
  std::vector<ResponseBlock> out;
  if (finished_) return out;
  while (!chunk.empty()) {
    const auto nl = chunk.find('\n');
    if (nl == std::string_view::npos) {
      partial_line_.append(chunk);
      break;
    }
    partial_line_.append(chunk.substr(0, nl));
    take_line(partial_line_, out);
    partial_line_.clear();
    chunk.remove_prefix(nl + 1);
  }
  return out;
}

std::vector<ResponseBlock> StreamingBlockParser::finish() {
  std::vector<ResponseBlock> out;
  if (finished_) return out;
  finished_ = true;
  take_line(partial_line_, out);
  partial_line_.clear();
  emit(in_code_ ? BlockKind::code : BlockKind::text, out, in_code_);
  return out;
}

void StreamingBlockParser::take_line(std::string_view line, std::vector<ResponseBlock>& out) {
  if (!in_code_ && opens_fence(line)) {
    emit(BlockKind::text, out);
    in_code_ = true;
    language_ = fence_language(line);
    return;
  }
  if (in_code_ && closes_fence(line)) {
    emit(BlockKind::code, out);
    in_code_ = false;
    return;
  }
  if (body_has_line_) body_ += '\n';
  body_.append(line);
  body_has_line_ = true;
}

void StreamingBlockParser::emit(BlockKind kind, std::vector<ResponseBlock>& out,
                                bool unterminated) {
  if (kind == BlockKind::code) {
    out.push_back({next_index_++, kind, std::move(body_), std::move(language_), unterminated});
  } else if (auto t = clean_text(body_)) {
    out.push_back({next_index_++, kind, std::move(*t), "", false});
  }
  body_.clear();
  language_.clear();
  body_has_line_ = false;
}

}  // namespace insightkit
