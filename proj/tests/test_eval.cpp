// Metric definitions, their invariants, and a randomized cross-check
// against a direct recount.

#include <catch_amalgamated.hpp>

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "qseg/common.hpp"
#include "qseg/eval.hpp"
#include "qseg/query.hpp"

namespace {

qseg::SegPair pair_of(const std::vector<bool>& gold, const std::vector<bool>& predicted) {
  return {qseg::Segmentation{gold}, qseg::Segmentation{predicted}};
}

std::vector<qseg::SegPair> random_pairs(std::mt19937_64& rng, int count, int max_tokens) {
  std::vector<qseg::SegPair> pairs;
  for (int i = 0; i < count; ++i) {
    // max_tokens tokens at most, so up to max_tokens-1 boundaries; zero
    // boundaries (single-token queries) stay in the mix on purpose.
    const std::size_t boundaries = rng() % static_cast<std::uint64_t>(max_tokens);
    std::vector<bool> gold(boundaries), pred(boundaries);
    for (std::size_t b = 0; b < boundaries; ++b) {
      gold[b] = rng() % 2 == 1;
      pred[b] = rng() % 2 == 1;
    }
    pairs.push_back(pair_of(gold, pred));
  }
  return pairs;
}

}  // namespace

TEST_CASE("segmentation accuracy counts boundary decisions micro-averaged") {
  // 3 boundaries, 2 of them match.
  const std::vector<qseg::SegPair> pairs = {pair_of({true, false, true}, {true, true, true})};
  REQUIRE(qseg::segmentation_accuracy(pairs) == Catch::Approx(2.0 / 3.0));
}

TEST_CASE("a set with no boundaries at all scores one") {
  const std::vector<qseg::SegPair> pairs = {pair_of({}, {}), pair_of({}, {})};
  REQUIRE(qseg::segmentation_accuracy(pairs) == 1.0);
  REQUIRE(qseg::macro_segmentation_accuracy(pairs) == 1.0);
  REQUIRE(qseg::query_accuracy(pairs) == 1.0);
  REQUIRE(qseg::segmentation_accuracy({}) == 1.0);
  REQUIRE(qseg::query_accuracy({}) == 1.0);
}

TEST_CASE("micro accuracy pools boundaries across queries") {
  // Query A: 1 of 1 correct; query B: 2 of 4 correct. Micro = 3/5.
  const std::vector<qseg::SegPair> pairs = {
      pair_of({true}, {true}),
      pair_of({false, false, true, true}, {false, true, false, true}),
  };
  REQUIRE(qseg::segmentation_accuracy(pairs) == Catch::Approx(3.0 / 5.0));
  // Macro averages per-query rates instead: (1 + 1/2) / 2 = 3/4.
  REQUIRE(qseg::macro_segmentation_accuracy(pairs) == Catch::Approx(3.0 / 4.0));
}

TEST_CASE("micro and macro differ when query lengths differ") {
  // Long query all wrong, short query all right.
  const std::vector<qseg::SegPair> pairs = {
      pair_of({true, true, true}, {false, false, false}),
      pair_of({false}, {false}),
  };
  REQUIRE(qseg::segmentation_accuracy(pairs) == Catch::Approx(1.0 / 4.0));
  REQUIRE(qseg::macro_segmentation_accuracy(pairs) == Catch::Approx(1.0 / 2.0));
}

TEST_CASE("query accuracy is the exact-match fraction") {
  const std::vector<qseg::SegPair> pairs = {
      pair_of({true, false}, {true, false}),
      pair_of({true, false}, {true, true}),
  };
  REQUIRE(qseg::query_accuracy(pairs) == 0.5);
}

TEST_CASE("single-token queries count as correct matches") {
  const std::vector<qseg::SegPair> pairs = {
      pair_of({}, {}),
      pair_of({true}, {false}),
  };
  REQUIRE(qseg::query_accuracy(pairs) == 0.5);
  // The empty pair adds no boundary, so micro accuracy is 0/1.
  REQUIRE(qseg::segmentation_accuracy(pairs) == 0.0);
}

TEST_CASE("an all-break predictor on an all-no-break gold scores zero") {
  const std::vector<qseg::SegPair> pairs = {
      pair_of({false, false}, {true, true}),
      pair_of({false}, {true}),
  };
  REQUIRE(qseg::segmentation_accuracy(pairs) == 0.0);
  REQUIRE(qseg::query_accuracy(pairs) == 0.0);
}

TEST_CASE("length mismatches inside a pair are rejected") {
  const std::vector<qseg::SegPair> pairs = {pair_of({true, false}, {true})};
  REQUIRE_THROWS_AS(qseg::segmentation_accuracy(pairs), qseg::LengthMismatch);
  REQUIRE_THROWS_AS(qseg::macro_segmentation_accuracy(pairs), qseg::LengthMismatch);
  REQUIRE_THROWS_AS(qseg::query_accuracy(pairs), qseg::LengthMismatch);
}

TEST_CASE("metrics are invariant under reordering and stable under duplication") {
  std::mt19937_64 rng(2026);
  std::vector<qseg::SegPair> pairs = random_pairs(rng, 50, 8);
  const double micro = qseg::segmentation_accuracy(pairs);
  const double macro = qseg::macro_segmentation_accuracy(pairs);
  const double query = qseg::query_accuracy(pairs);

  std::vector<qseg::SegPair> shuffled = pairs;
  qseg::seeded_shuffle(shuffled, rng);
  REQUIRE(qseg::segmentation_accuracy(shuffled) == micro);
  // The macro mean sums per-query ratios, so its rounding depends on order.
  REQUIRE(qseg::macro_segmentation_accuracy(shuffled) == Catch::Approx(macro).epsilon(1e-12));
  REQUIRE(qseg::query_accuracy(shuffled) == query);

  // Doubling every pair changes no ratio.
  std::vector<qseg::SegPair> doubled = pairs;
  doubled.insert(doubled.end(), pairs.begin(), pairs.end());
  REQUIRE(qseg::segmentation_accuracy(doubled) == Catch::Approx(micro));
  REQUIRE(qseg::macro_segmentation_accuracy(doubled) == Catch::Approx(macro));
  REQUIRE(qseg::query_accuracy(doubled) == Catch::Approx(query));
}

TEST_CASE("perfect query accuracy forces perfect segmentation accuracy") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<qseg::SegPair> pairs = random_pairs(rng, 10, 6);
    // Make every pair an exact match.
    for (qseg::SegPair& p : pairs) p.predicted = p.gold;
    REQUIRE(qseg::query_accuracy(pairs) == 1.0);
    REQUIRE(qseg::segmentation_accuracy(pairs) == 1.0);
  }
}

TEST_CASE("randomized pairs agree with a direct recount") {
  std::mt19937_64 rng(20260819);
  for (int trial = 0; trial < 50; ++trial) {
    const std::vector<qseg::SegPair> pairs = random_pairs(rng, 40, 12);

    std::int64_t total = 0, correct = 0, exact = 0;
    for (const qseg::SegPair& p : pairs) {
      bool all = true;
      for (std::size_t i = 0; i < p.gold.size(); ++i) {
        ++total;
        if (p.gold.breaks[i] == p.predicted.breaks[i]) {
          ++correct;
        } else {
          all = false;
        }
      }
      if (all) ++exact;
    }
    const double expect_micro =
        total == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(total);
    const double expect_query = static_cast<double>(exact) / static_cast<double>(pairs.size());
    REQUIRE(qseg::segmentation_accuracy(pairs) == expect_micro);
    REQUIRE(qseg::query_accuracy(pairs) == expect_query);
  }
}

TEST_CASE("evaluate runs the predictor and fills the report") {
  std::vector<qseg::AnnotatedQuery> corpus;
  {
    qseg::AnnotatedQuery aq;
    aq.query = qseg::tokenize("long sleeve dress");
    aq.gold = qseg::Segmentation{{false, true}};
    corpus.push_back(aq);
    aq.query = qseg::tokenize("shoes");
    aq.gold = qseg::Segmentation{{}};
    corpus.push_back(aq);
  }

  // A perfect predictor: echo the gold by construction.
  const auto perfect = [](const qseg::QueryTokens& q) {
    qseg::Segmentation s;
    if (q.size() == 3) s.breaks = {false, true};
    return s;
  };
  const qseg::EvalReport report = qseg::evaluate(perfect, corpus, true);
  REQUIRE(report.segmentation_accuracy == 1.0);
  REQUIRE(report.query_accuracy == 1.0);
  REQUIRE(report.n_queries == 2);
  REQUIRE(report.n_boundaries == 2);
  REQUIRE(report.per_query_detail.has_value());
  REQUIRE(report.per_query_detail->size() == 2);
  REQUIRE((*report.per_query_detail)[0].query == "long sleeve dress");
  REQUIRE((*report.per_query_detail)[0].gold == "long sleeve|dress");
  REQUIRE((*report.per_query_detail)[0].predicted == "long sleeve|dress");
  REQUIRE((*report.per_query_detail)[0].exact);
  REQUIRE((*report.per_query_detail)[1].predicted == "shoes");

  // An all-break predictor gets the two-boundary query wrong.
  const auto all_break = [](const qseg::QueryTokens& q) {
    qseg::Segmentation s;
    if (q.size() > 1) s.breaks.assign(q.size() - 1, true);
    return s;
  };
  const qseg::EvalReport worse = qseg::evaluate(all_break, corpus);
  REQUIRE(worse.segmentation_accuracy == 0.5);
  REQUIRE(worse.query_accuracy == 0.5);  // the single-token query still matches
  REQUIRE(!worse.per_query_detail.has_value());

  // A predictor that returns the wrong number of decisions is an error.
  const auto broken = [](const qseg::QueryTokens&) { return qseg::Segmentation{{true}}; };
  REQUIRE_THROWS_AS(qseg::evaluate(broken, corpus), qseg::LengthMismatch);
}

TEST_CASE("the JSON report carries all metrics and optional detail rows") {
  std::vector<qseg::AnnotatedQuery> corpus;
  qseg::AnnotatedQuery aq;
  aq.query = qseg::tokenize("a b");
  aq.gold = qseg::Segmentation{{true}};
  corpus.push_back(aq);

  const auto echo = [](const qseg::QueryTokens& q) {
    qseg::Segmentation s;
    s.breaks.assign(q.size() - 1, true);
    return s;
  };
  const nlohmann::json with = qseg::report_to_json(qseg::evaluate(echo, corpus, true));
  REQUIRE(with.at("segmentation_accuracy") == 1.0);
  REQUIRE(with.at("query_accuracy") == 1.0);
  REQUIRE(with.at("n_queries") == 1);
  REQUIRE(with.at("n_boundaries") == 1);
  REQUIRE(with.at("per_query_detail").size() == 1);
  REQUIRE(with.at("per_query_detail")[0].at("predicted") == "a|b");

  const nlohmann::json without = qseg::report_to_json(qseg::evaluate(echo, corpus));
  REQUIRE(!without.contains("per_query_detail"));
}

TEST_CASE("the text table lines up one row per system") {
  qseg::EvalReport r;
  r.segmentation_accuracy = 0.925;
  r.query_accuracy = 0.5;
  const std::string table = qseg::report_table({{"gbdt", r}, {"all-no-break", r}});
  REQUIRE(table.find("system") != std::string::npos);
  REQUIRE(table.find("seg_accuracy") != std::string::npos);
  REQUIRE(table.find("gbdt") != std::string::npos);
  REQUIRE(table.find("all-no-break") != std::string::npos);
  REQUIRE(table.find("0.9250") != std::string::npos);
  REQUIRE(std::count(table.begin(), table.end(), '\n') == 3);
}
