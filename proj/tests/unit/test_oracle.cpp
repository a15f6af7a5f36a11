#include <gtest/gtest.h>

#include <random>

#include "helpers.hpp"
#include "logsieve/engine.hpp"
#include "logsieve/errors.hpp"
#include "logsieve/explainer.hpp"
#include "oracle.hpp"
#include "random_queries.hpp"

using namespace logsieve;
using logsieve::testing::events_of;
using logsieve::testing::trace_of;

namespace {

constexpr Timestamp kMin = 60'000;

bool oracle_matches(const Trace& t, const std::string& text) {
  return oracle::any_match(t.events, parse_query(text));
}

std::vector<Occurrence> engine_occurrences(const std::vector<Event>& events, const Query& q, bool any = false) {
  CandidateStream s;
  s.trace_id = events.empty() ? 0 : events.front().trace_id;
  s.events = events;
  MatchPolicy p;
  p.return_all = q.return_all;
  if (any) p.strategy = Strategy::kSkipTillAnyMatch;
  return match_stream(compile(q.pattern, q.constraints), s, p);
}

Trace random_trace(std::mt19937_64& rng, TraceId id) {
  static const char* kTypes[] = {"A", "B", "C"};
  std::uniform_int_distribution<int> len(0, 9), type(0, 2), gap(1, 2);
  Trace t{id, {}};
  Timestamp ts = 0;
  const int n = len(rng);
  for (int k = 0; k < n; ++k) {
    ts += gap(rng);
    t.events.push_back({id, kTypes[type(rng)], ts, static_cast<Position>(k + 1)});
  }
  return t;
}

}  // namespace

TEST(Oracle, HandExamples) {
  auto t = trace_of(1, {{"A", 1}, {"B", 2}, {"C", 3}});
  EXPECT_TRUE(oracle_matches(t, "PATTERN A;B;C"));
  EXPECT_TRUE(oracle_matches(t, "PATTERN A;C"));
  EXPECT_FALSE(oracle_matches(t, "PATTERN C;A"));
  EXPECT_FALSE(oracle_matches(t, "PATTERN A;!B;C"));
  EXPECT_TRUE(oracle_matches(t, "PATTERN A;!D;C"));
  EXPECT_TRUE(oracle_matches(t, "PATTERN A;D*;B+"));
  EXPECT_TRUE(oracle_matches(t, "PATTERN D|A;C"));
  EXPECT_FALSE(oracle_matches(t, "PATTERN A;C WHERE time within 1 1 2"));
  EXPECT_TRUE(oracle_matches(t, "PATTERN A;C WHERE gap atleast 2 1 2"));
}

TEST(Oracle, ConstraintScenario) {
  auto t = trace_of(1, {{"A", 0}, {"A", 270 * kMin}, {"B", 300 * kMin}, {"C", 310 * kMin}});
  auto q = parse_query("PATTERN A;B;C WHERE time within 3600000 1 2");
  auto r = oracle::brute_force_detect({t}, q);
  ASSERT_EQ(r.matching_trace_ids, std::set<TraceId>{1});
  ASSERT_EQ(r.occurrences[1].size(), 1u);
  EXPECT_EQ(r.occurrences[1][0].first_event()->ts, 270 * kMin);
}

TEST(Oracle, VerifyRejectsBrokenOccurrences) {
  auto t = trace_of(1, {{"A", 1}, {"B", 2}, {"C", 3}});
  auto q = parse_query("PATTERN A;C");
  Occurrence good{1, {{1, {t.events[0]}}, {2, {t.events[2]}}}, std::nullopt};
  EXPECT_FALSE(oracle::verify_occurrence(t.events, q, good, oracle::KeyBy::kTs));
  Occurrence wrong_type{1, {{1, {t.events[1]}}, {2, {t.events[2]}}}, std::nullopt};
  EXPECT_TRUE(oracle::verify_occurrence(t.events, q, wrong_type, oracle::KeyBy::kTs));
  Occurrence reversed{1, {{1, {t.events[0]}}, {2, {t.events[0]}}}, std::nullopt};
  EXPECT_TRUE(oracle::verify_occurrence(t.events, parse_query("PATTERN A;A"), reversed, oracle::KeyBy::kPos));
  auto guarded = parse_query("PATTERN A;!B;C");
  EXPECT_TRUE(oracle::verify_occurrence(t.events, guarded, good, oracle::KeyBy::kTs));
}

TEST(Oracle, GroupStreamsRenumber) {
  auto q = parse_query("PATTERN A;B GROUPS (1,2)");
  auto merged = oracle::group_streams({trace_of(1, {{"A", 5}}), trace_of(2, {{"B", 3}, {"A", 5}})}, q);
  ASSERT_EQ(merged.size(), 1u);
  ASSERT_EQ(merged[0].size(), 3u);
  EXPECT_EQ(merged[0][0].event_type, "B");
  EXPECT_EQ(merged[0][1].trace_id, 1u);
  EXPECT_EQ(merged[0][2].pos, 3u);
}

TEST(Oracle, ExplainWorkedExample) {
  auto t = trace_of(1, {{"A", 2000}, {"B", 3000}, {"C", 6000}});
  auto q = parse_query("PATTERN B;A;C WHERE time within 2000 2 3 EXPLAIN-NON-ANSWERS 4000 1000 1000");
  EXPECT_EQ(oracle::brute_force_explain(t, q), std::optional<std::int64_t>{3000});
}

TEST(Oracle, EngineAgreesOnRandomInstances) {
  std::mt19937_64 rng(42);
  const oracle::QueryShape shape{{"A", "B", "C"}, 4, 6, 4, 0, 0, {}};
  for (int round = 0; round < 5000; ++round) {
    const auto q = oracle::random_query(rng, shape);
    const auto t = random_trace(rng, 1);
    const auto mine = engine_occurrences(t.events, q);
    const auto ref = oracle::brute_force_detect({t}, q);
    std::string evs;
    for (const auto& e : t.events) evs += e.event_type + "@" + std::to_string(e.ts) + " ";
    SCOPED_TRACE(to_json(q).dump() + " on " + evs + ", round " +
                 std::to_string(round));
    EXPECT_EQ(!mine.empty(), ref.matching_trace_ids.count(1) == 1);
    for (const auto& occ : mine) EXPECT_EQ(oracle::verify_occurrence(t.events, q, occ, oracle::KeyBy::kTs), std::nullopt);
    std::vector<Timestamp> starts_mine;
    std::vector<Timestamp> starts_ref;
    for (const auto& occ : mine) starts_mine.push_back(occ.first_event()->ts);
    if (auto it = ref.occurrences.find(1); it != ref.occurrences.end())
      for (const auto& occ : it->second) starts_ref.push_back(occ.first_event()->ts);
    EXPECT_EQ(starts_mine, starts_ref);
    for (const auto& occ : engine_occurrences(t.events, q, true))
      EXPECT_EQ(oracle::verify_occurrence(t.events, q, occ, oracle::KeyBy::kTs), std::nullopt);
  }
}

TEST(Oracle, ExplainerAgreesOnRandomInstances) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> len(2, 3), type(0, 2), n_events(1, 5), gap(1, 3), ku(0, 6), coin(0, 1);
  static const char* kTypes[] = {"A", "B", "C"};
  for (int round = 0; round < 300; ++round) {
    std::string text = "PATTERN ";
    const int n = len(rng);
    for (int k = 0; k < n; ++k) text += (k ? ";" : "") + std::string(kTypes[type(rng)]);
    if (coin(rng)) text += " WHERE time within " + std::to_string(gap(rng)) + " 1 " + std::to_string(n);
    text += " EXPLAIN-NON-ANSWERS " + std::to_string(ku(rng)) + " " + std::to_string(coin(rng) + 1) + " 1";
    const auto q = parse_query(text);
    Trace t{1, {}};
    Timestamp ts = 0;
    const int m = n_events(rng);
    for (int k = 0; k < m; ++k) {
      ts += gap(rng);
      t.events.push_back({1, kTypes[type(rng)], ts, static_cast<Position>(k + 1)});
    }
    CandidateStream s{1, false, {}, t.events, true, true};
    const auto got = explain(s, compile(q.pattern, q.constraints), q.explain->k, q.explain->uncertainty,
                             q.explain->step);
    SCOPED_TRACE(text + " round " + std::to_string(round));
    const auto ref = oracle::brute_force_explain(t, q);
    ASSERT_EQ(got.has_value(), ref.has_value());
    if (got) {
      EXPECT_EQ(got->cost, *ref);
    }
  }
}
