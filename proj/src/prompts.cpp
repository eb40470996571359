#include "insightkit/prompts.hpp"

#include <array>
#include <memory>
#include <stdexcept>

#include <openssl/evp.h>

namespace insightkit::prompts {

const std::string& template_text(std::string_view name) {
  const auto& all = builtin_templates();
  auto it = all.find(std::string(name));
  if (it == all.end()) throw std::out_of_range("unknown prompt template '" + std::string(name) + "'");
  return it->second;
}

std::string render_text(std::string_view text, const std::map<std::string, std::string>& slots) {
  std::string out;
  out.reserve(text.size());
  std::size_t pos = 0;
  while (pos < text.size()) {
    const auto open = text.find("{{", pos);
    if (open == std::string_view::npos) break;
    const auto close = text.find("}}", open + 2);
    if (close == std::string_view::npos) break;
    out.append(text.substr(pos, open - pos));
    const std::string slot(text.substr(open + 2, close - open - 2));
    auto it = slots.find(slot);
    if (it == slots.end()) throw std::invalid_argument("prompt slot '" + slot + "' not supplied");
    out += it->second;
    pos = close + 2;
  }
  out.append(text.substr(pos));
  return out;
}

std::string render(std::string_view name, const std::map<std::string, std::string>& slots) {
  return render_text(template_text(name), slots);
}

std::string sha256_hex(std::string_view bytes) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
  unsigned int length = 0;
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1 ||
      EVP_DigestUpdate(ctx.get(), bytes.data(), bytes.size()) != 1 ||
      EVP_DigestFinal_ex(ctx.get(), digest.data(), &length) != 1) {
    throw std::runtime_error("sha256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += kHex[digest[i] >> 4];
    out += kHex[digest[i] & 0xF];
  }
  return out;
}

std::map<std::string, std::string> template_hashes() {
  std::map<std::string, std::string> out;
  for (const auto& [name, text] : builtin_templates()) out[name] = sha256_hex(text);
  return out;
}

}  // namespace insightkit::prompts
