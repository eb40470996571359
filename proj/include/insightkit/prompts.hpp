#pragma once
// Versioned prompt templates with {{slot}} placeholders. Template files live
// in prompts/<name>.v<N>.txt and are compiled into the library.

#include <map>
#include <string>
#include <string_view>

namespace insightkit::prompts {

const std::map<std::string, std::string>& builtin_templates();

// Throws std::out_of_range for an unknown template.
const std::string& template_text(std::string_view name);

// Every {{slot}} in the text must be supplied; a missing slot throws
// std::invalid_argument. Slot values are inserted verbatim, not re-expanded.
std::string render_text(std::string_view text, const std::map<std::string, std::string>& slots);
std::string render(std::string_view name, const std::map<std::string, std::string>& slots);

std::string sha256_hex(std::string_view bytes);

// Template name -> SHA-256 of its text; recorded in every session.
std::map<std::string, std::string> template_hashes();

}  // namespace insightkit::prompts
