#include "insightkit/interestingness.hpp"

#include <algorithm>
#include <cctype>
#include <map>

#include "insightkit/prompts.hpp"

namespace insightkit {

namespace {

bool space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

void skip_prefix_noise(std::string_view& s) {
  for (bool changed = true; changed;) {
    changed = false;
    while (!s.empty() && (space(s.front()) || s.front() == '*' || s.front() == '#' ||
                          s.front() == '"' || s.front() == '\'' || s.front() == '`')) {
      s.remove_prefix(1);
      changed = true;
    }
    if (s.size() >= 5) {
      std::string head(s.substr(0, 5));
      for (auto& c : head) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      if (head == "score") {
        s.remove_prefix(5);
        while (!s.empty() && (space(s.front()) || s.front() == ':' || s.front() == '=')) s.remove_prefix(1);
        changed = true;
      }
    }
  }
}

std::string clean_rationale(std::string_view s) {
  if (s.size() >= 2 && s[0] == '/' && s[1] == '5') s.remove_prefix(2);
  for (bool changed = true; changed && !s.empty();) {
    changed = false;
    if (space(s.front()) || std::string_view("*:-.,)`\"'").find(s.front()) != std::string_view::npos) {
      s.remove_prefix(1);
      changed = true;
    } else if (s.starts_with("\xE2\x80\x94") || s.starts_with("\xE2\x80\x93")) {
      s.remove_prefix(3);
      changed = true;
    }
  }
  while (!s.empty() && space(s.back())) s.remove_suffix(1);
  return std::string(s);
}

SemanticReply clamp_reply(long long value, std::string rationale) {
  SemanticReply r;
  r.value = static_cast<int>(std::clamp<long long>(value, 1, 5));
  r.clamped = r.value != value;
  r.rationale = std::move(rationale);
  return r;
}

}  // namespace

std::optional<SemanticReply> parse_semantic_reply(std::string_view reply) {
  std::string_view s = reply;
  while (!s.empty() && space(s.front())) s.remove_prefix(1);
  if (!s.empty() && s.front() == '{') {
    const auto j = json::parse(s, nullptr, false);
    if (j.is_discarded() || !j.is_object() || !j.contains("score")) return std::nullopt;
    const auto& score = j["score"];
    if (!score.is_number_integer()) return std::nullopt;
    return clamp_reply(score.get<long long>(), j.value("rationale", ""));
  }
  skip_prefix_noise(s);
  std::size_t i = 0;
  if (i < s.size() && (s[i] == '-' || s[i] == '+')) ++i;
  const std::size_t digits_start = i;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
  if (i == digits_start || i - digits_start > 9) return std::nullopt;
  if (i + 1 < s.size() && s[i] == '.' && std::isdigit(static_cast<unsigned char>(s[i + 1]))) {
    return std::nullopt;  // fractional scores are not on the scale
  }
  const long long value = std::stoll(std::string(s.substr(0, i)));
  return clamp_reply(value, clean_rationale(s.substr(i)));
}

SemanticOutcome semantic_score(Provider& provider, const SemanticRequest& request) {
  std::string priors;
  for (const auto& p : request.prior_scores) {
    priors += "- " + p.insight_id + " (score " + std::to_string(p.s_sem) + "): " + p.summary + "\n";
  }
  if (priors.empty()) priors = "(none yet)\n";
  ChatRequest chat;
  chat.channel = Channel::semantic_score;
  chat.messages.push_back({Role::user, prompts::render("semantic_score",
                                                       {{"dataset_name", request.dataset_name},
                                                        {"user_query", request.user_query},
                                                        {"prior_scores", priors},
                                                        {"insight", request.insight}})});
  SemanticOutcome out;
  try {
    for (int attempt = 0; attempt < 2; ++attempt) {
      const auto response = provider.complete(chat);
      if (auto parsed = parse_semantic_reply(response.content)) {
        out.s_sem = parsed->value;
        out.rationale = parsed->rationale;
        if (parsed->clamped) {
          out.diagnostics.push_back({"semantic_score_clamped", "reply: " + response.content.substr(0, 80), 1});
        }
        return out;
      }
      chat.messages.push_back({Role::assistant, response.content});
      chat.messages.push_back({Role::user, prompts::render("semantic_repair", {})});
    }
    out.diagnostics.push_back({"semantic_score_defaulted", "unparseable reply after one repair", 1});
  } catch (const ProviderError& e) {
    out.diagnostics.push_back({"semantic_score_provider_error", e.what(), 1});
  }
  out.s_sem = 3;
  out.rationale = kDefaultedRationale;
  return out;
}

ScoreOutcome score_insight(Provider& provider, const SemanticRequest& request,
                           InsightCategory category, const DataContext& context,
                           const Dataset& data, const InterestingnessConfig& config) {
  ScoreOutcome out;
  auto semantic = semantic_score(provider, request);
  out.diagnostics = std::move(semantic.diagnostics);
  auto metric = statistical_metric(category, context, request.insight, data);
  int s_stat = 3;
  if (metric.reading) {
    s_stat = statistical_score(*metric.reading, config);
    out.reading = metric.reading;
  } else if (metric.diagnostic) {
    out.diagnostics.push_back(*metric.diagnostic);
  }
  out.score.s_sem = semantic.s_sem;
  out.score.s_stat = s_stat;
  out.score.weight_omega = config.omega;
  out.score.s_final = final_score(semantic.s_sem, s_stat, config.omega);
  out.score.rationale = std::move(semantic.rationale);
  return out;
}

InsightCategory majority_vote(const std::vector<InsightCategory>& votes) {
  if (votes.empty()) return InsightCategory::other;
  std::map<InsightCategory, int> tally;
  for (auto v : votes) ++tally[v];
  InsightCategory best = votes.front();
  for (auto v : votes) {  // first occurrence order breaks ties
    if (tally[v] > tally[best]) best = v;
  }
  return best;
}

}  // namespace insightkit
