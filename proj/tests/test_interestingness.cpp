#include <doctest.h>

#include "insightkit/interestingness.hpp"
#include "support.hpp"

using namespace insightkit;

namespace {

SemanticRequest request() { return {"cars", "q", "Japan cars are the most efficient.", {}}; }

ScriptedProvider replies(std::vector<std::string> texts) {
  return ScriptedProvider(json{{"chat", {{"semantic_score", texts}}}});
}

// Earliest-listed category among those with the highest count.
InsightCategory vote_oracle(const std::vector<InsightCategory>& votes) {
  if (votes.empty()) return InsightCategory::other;
  std::size_t best_index = 0;
  long best_count = -1;
  for (std::size_t i = 0; i < votes.size(); ++i) {
    const long count = std::count(votes.begin(), votes.end(), votes[i]);
    if (count > best_count) {
      best_count = count;
      best_index = i;
    }
  }
  return votes[best_index];
}

}  // namespace

TEST_CASE("semantic reply parsing") {
  auto r = parse_semantic_reply("5 \xE2\x80\x94 top-grossing category, central to the user's profit question");
  REQUIRE(r);
  CHECK(r->value == 5);
  CHECK(r->rationale == "top-grossing category, central to the user's profit question");
  CHECK_FALSE(r->clamped);

  r = parse_semantic_reply("7");
  REQUIRE(r);
  CHECK(r->value == 5);
  CHECK(r->clamped);

  r = parse_semantic_reply("**Score: 4**: solid");
  REQUIRE(r);
  CHECK(r->value == 4);
  CHECK(r->rationale == "solid");

  r = parse_semantic_reply(R"({"score": 2, "rationale": "minor"})");
  REQUIRE(r);
  CHECK(r->value == 2);
  CHECK(r->rationale == "minor");

  CHECK_FALSE(parse_semantic_reply("banana"));
  CHECK_FALSE(parse_semantic_reply("3.5 points"));
  CHECK(parse_semantic_reply("0")->value == 1);
}

TEST_CASE("semantic scoring falls back to 3") {
  SUBCASE("clamped") {
    auto p = replies({"7"});
    const auto out = semantic_score(p, request());
    CHECK(out.s_sem == 5);
    REQUIRE(out.diagnostics.size() == 1);
    CHECK(out.diagnostics[0].code == "semantic_score_clamped");
  }
  SUBCASE("unparseable twice") {
    auto p = replies({"banana", "banana"});
    const auto out = semantic_score(p, request());
    CHECK(out.s_sem == 3);
    CHECK(out.rationale == kDefaultedRationale);
    CHECK(out.diagnostics[0].code == "semantic_score_defaulted");
    CHECK(p.remaining(Channel::semantic_score) == 0);
  }
  SUBCASE("repaired") {
    auto p = replies({"banana", "4 - fine"});
    CHECK(semantic_score(p, request()).s_sem == 4);
  }
  SUBCASE("provider failure") {
    ScriptedProvider p(json{{"chat", {{"semantic_score", {{{"error", {{"kind", "timeout"}}}}}}}}});
    const auto out = semantic_score(p, request());
    CHECK(out.s_sem == 3);
    CHECK(out.diagnostics[0].code == "semantic_score_provider_error");
  }
}

TEST_CASE("combined score") {
  CHECK(final_score(5, 3, 0.6) == 4);
  CHECK(final_score(1, 1, 0.6) == 1);
  CHECK(final_score(5, 5, 0.6) == 5);
  CHECK(final_score(2, 5, 0.6) == 3);

  const auto data = testkit::load_cars();
  auto p = replies({"5 - striking"});
  DataContext context;
  context.attributes = {"Weight", "MPG"};
  const auto out = score_insight(p, request(), InsightCategory::correlation, context, data, {});
  REQUIRE(out.reading.has_value());
  CHECK(out.reading->metric == Metric::pearson_r);
  CHECK(out.score.s_sem == 5);
  CHECK(out.score.s_stat == statistical_score(*out.reading, {}));
  CHECK(out.score.s_final == final_score(5, out.score.s_stat, 0.6));

  auto q = replies({"2"});
  const auto other = score_insight(q, request(), InsightCategory::other, context, data, {});
  CHECK(other.score.s_stat == 3);
  CHECK(other.score.s_final == final_score(2, 3, 0.6));
  CHECK(other.diagnostics.back().code == "metric_undefined");
}

TEST_CASE("majority vote") {
  using C = InsightCategory;
  CHECK(majority_vote({C::correlation, C::correlation, C::trend}) == C::correlation);
  CHECK(majority_vote({C::trend, C::outlier}) == C::trend);
  CHECK(majority_vote({}) == C::other);

  // Exhaustive over all vote lists of length <= 4 drawn from 4 categories.
  const std::vector<C> pool{C::trend, C::outlier, C::correlation, C::extremum};
  long checked = 0;
  for (std::size_t length = 1; length <= 4; ++length) {
    std::vector<std::size_t> idx(length, 0);
    while (true) {
      std::vector<C> votes;
      for (auto i : idx) votes.push_back(pool[i]);
      CHECK(majority_vote(votes) == vote_oracle(votes));
      ++checked;
      std::size_t p = 0;
      while (p < length && ++idx[p] == pool.size()) idx[p++] = 0;
      if (p == length) break;
    }
  }
  CHECK(checked == 4 + 16 + 64 + 256);
}
