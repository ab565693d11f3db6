#pragma once

// Evaluation metrics for predicted vs gold segmentations: micro-averaged
// boundary accuracy ("segmentation accuracy") and exact-match fraction
// ("query accuracy"), plus report formatting.

#include <cstdint>
#include <functional>
#include <iomanip>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "qseg/common.hpp"
#include "qseg/query.hpp"
#include "qseg/segmenter.hpp"  // effective_gold

namespace qseg {

struct SegPair {
  Segmentation gold;
  Segmentation predicted;
};

namespace detail {

inline void check_pair_lengths(const std::vector<SegPair>& pairs) {
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    if (pairs[i].gold.size() != pairs[i].predicted.size()) {
      throw LengthMismatch("pair " + std::to_string(i) + ": gold has " +
                           std::to_string(pairs[i].gold.size()) + " boundaries, predicted has " +
                           std::to_string(pairs[i].predicted.size()));
    }
  }
}

}  // namespace detail

// Micro-average: correct boundary decisions over all boundary decisions.
// Queries with no boundaries contribute nothing; an all-0-boundary set
// scores 1 by convention (no decision was wrong).
inline double segmentation_accuracy(const std::vector<SegPair>& pairs) {
  detail::check_pair_lengths(pairs);
  std::int64_t total = 0;
  std::int64_t correct = 0;
  for (const SegPair& pair : pairs) {
    for (std::size_t i = 0; i < pair.gold.size(); ++i) {
      total += 1;
      correct += pair.gold.breaks[i] == pair.predicted.breaks[i] ? 1 : 0;
    }
  }
  return total == 0 ? 1.0 : static_cast<double>(correct) / static_cast<double>(total);
}

// Macro variant: mean per-query boundary accuracy over queries that have at
// least one boundary.
inline double macro_segmentation_accuracy(const std::vector<SegPair>& pairs) {
  detail::check_pair_lengths(pairs);
  double sum = 0.0;
  std::int64_t counted = 0;
  for (const SegPair& pair : pairs) {
    if (pair.gold.size() == 0) continue;
    std::int64_t correct = 0;
    for (std::size_t i = 0; i < pair.gold.size(); ++i) {
      correct += pair.gold.breaks[i] == pair.predicted.breaks[i] ? 1 : 0;
    }
    sum += static_cast<double>(correct) / static_cast<double>(pair.gold.size());
    counted += 1;
  }
  return counted == 0 ? 1.0 : sum / static_cast<double>(counted);
}

// Fraction of queries whose whole break vector matches; queries with no
// boundaries count as correct.
inline double query_accuracy(const std::vector<SegPair>& pairs) {
  detail::check_pair_lengths(pairs);
  if (pairs.empty()) return 1.0;
  std::int64_t hits = 0;
  for (const SegPair& pair : pairs) {
    hits += pair.gold.breaks == pair.predicted.breaks ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(pairs.size());
}

struct QueryDetail {
  std::string query;
  std::string gold;
  std::string predicted;
  bool exact = false;
};

struct EvalReport {
  double segmentation_accuracy = 0.0;
  double macro_segmentation_accuracy = 0.0;
  double query_accuracy = 0.0;
  std::int64_t n_queries = 0;
  std::int64_t n_boundaries = 0;
  std::optional<std::vector<QueryDetail>> per_query_detail;
};

// Runs a predictor over a gold-annotated corpus and scores it. The
// predictor sees only the tokens, never the gold.
inline EvalReport evaluate(const std::function<Segmentation(const QueryTokens&)>& predictor,
                           const std::vector<AnnotatedQuery>& corpus,
                           bool with_detail = false) {
  std::vector<SegPair> pairs;
  pairs.reserve(corpus.size());
  EvalReport report;
  if (with_detail) report.per_query_detail.emplace();
  for (const AnnotatedQuery& aq : corpus) {
    SegPair pair{effective_gold(aq), predictor(aq.query)};
    if (pair.gold.size() != pair.predicted.size()) {
      throw LengthMismatch("query '" + aq.query.joined() + "': predictor returned " +
                           std::to_string(pair.predicted.size()) + " decisions for " +
                           std::to_string(pair.gold.size()) + " boundaries");
    }
    if (with_detail) {
      report.per_query_detail->push_back(QueryDetail{
          aq.query.joined(), format_segmented(aq.query, pair.gold),
          format_segmented(aq.query, pair.predicted), pair.gold.breaks == pair.predicted.breaks});
    }
    report.n_boundaries += static_cast<std::int64_t>(pair.gold.size());
    pairs.push_back(std::move(pair));
  }
  report.n_queries = static_cast<std::int64_t>(pairs.size());
  report.segmentation_accuracy = segmentation_accuracy(pairs);
  report.macro_segmentation_accuracy = macro_segmentation_accuracy(pairs);
  report.query_accuracy = query_accuracy(pairs);
  return report;
}

inline nlohmann::json report_to_json(const EvalReport& report) {
  nlohmann::json j;
  j["segmentation_accuracy"] = report.segmentation_accuracy;
  j["macro_segmentation_accuracy"] = report.macro_segmentation_accuracy;
  j["query_accuracy"] = report.query_accuracy;
  j["n_queries"] = report.n_queries;
  j["n_boundaries"] = report.n_boundaries;
  if (report.per_query_detail.has_value()) {
    nlohmann::json rows = nlohmann::json::array();
    for (const QueryDetail& detail : *report.per_query_detail) {
      rows.push_back({{"query", detail.query},
                      {"gold", detail.gold},
                      {"predicted", detail.predicted},
                      {"exact", detail.exact}});
    }
    j["per_query_detail"] = std::move(rows);
  }
  return j;
}

// Aligned text table, one row per named system.
inline std::string report_table(const std::vector<std::pair<std::string, EvalReport>>& rows) {
  std::size_t name_width = std::string("system").size();
  for (const auto& [name, report] : rows) name_width = std::max(name_width, name.size());
  std::ostringstream out;
  out << std::left << std::setw(static_cast<int>(name_width)) << "system"
      << "  seg_accuracy  query_accuracy\n";
  out << std::setprecision(4) << std::fixed;
  for (const auto& [name, report] : rows) {
    out << std::left << std::setw(static_cast<int>(name_width)) << name << "  "
        << std::right << std::setw(12) << report.segmentation_accuracy << "  "
        << std::setw(14) << report.query_accuracy << '\n';
  }
  return out.str();
}

}  // namespace qseg
