#pragma once

// Naive n-gram frequency baseline: counts contiguous n-grams over a query
// log and picks the maximum-score segmentation per query.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "qseg/query.hpp"

namespace qseg {

// Counts for token windows of length 2..max_n, keyed by the space-joined
// window. Unigrams are not stored.
struct NGramTable {
  int max_n = 5;
  std::unordered_map<std::string, std::int64_t> counts;

  std::int64_t freq(const std::string& key) const {
    const auto it = counts.find(key);
    return it == counts.end() ? 0 : it->second;
  }
};

enum class WeightScheme {
  kSegLengthPow,  // |s|^|s| * freq(s)
  kFreqOnly,      // freq(s)
};

inline NGramTable count_ngrams(const std::vector<QueryTokens>& corpus, int max_n) {
  if (max_n < 2) throw ConfigInvalid("max_n must be >= 2");
  NGramTable table;
  table.max_n = max_n;
  std::string key;
  for (const QueryTokens& q : corpus) {
    const std::size_t n = q.size();
    for (std::size_t start = 0; start + 2 <= n; ++start) {
      key = q.tokens[start];
      const std::size_t max_len = std::min<std::size_t>(static_cast<std::size_t>(max_n), n - start);
      for (std::size_t len = 2; len <= max_len; ++len) {
        key += ' ';
        key += q.tokens[start + len - 1];
        table.counts[key] += 1;
      }
    }
  }
  return table;
}

// Shard merge: plain sum of counts; max_n must agree.
inline void merge_tables(NGramTable& into, const NGramTable& from) {
  if (into.max_n != from.max_n) throw ConfigInvalid("cannot merge tables with different max_n");
  for (const auto& [key, count] : from.counts) into.counts[key] += count;
}

// Weighted sum of segment frequencies; nullopt when any multi-token
// segment is unseen. The all-singletons segmentation scores exactly 0.
inline std::optional<double> score_segmentation(const QueryTokens& query,
                                                const Segmentation& seg,
                                                const NGramTable& table,
                                                WeightScheme scheme = WeightScheme::kSegLengthPow) {
  const auto spans = segment_spans(query, seg);  // throws LengthMismatch
  double score = 0.0;
  std::string key;
  for (const auto& [begin, end] : spans) {
    const std::size_t len = end - begin;
    if (len < 2) continue;
    key = query.tokens[begin];
    for (std::size_t i = begin + 1; i < end; ++i) {
      key += ' ';
      key += query.tokens[i];
    }
    const std::int64_t freq = table.freq(key);
    if (freq == 0) return std::nullopt;
    double weight = 1.0;
    if (scheme == WeightScheme::kSegLengthPow) {
      weight = std::pow(static_cast<double>(len), static_cast<double>(len));
    }
    score += weight * static_cast<double>(freq);
  }
  return score;
}

// All 2^(n-1) break vectors in deterministic order (bit i of the mask is
// breaks[i]).
inline std::vector<Segmentation> enumerate_segmentations(int n_tokens) {
  if (n_tokens < 1) throw ConfigInvalid("n_tokens must be >= 1");
  if (n_tokens > 20) throw TooLong("refusing to enumerate over 2^19 segmentations");
  const int gaps = n_tokens - 1;
  std::vector<Segmentation> out;
  out.reserve(std::size_t{1} << gaps);
  for (std::uint32_t mask = 0; mask < (std::uint32_t{1} << gaps); ++mask) {
    Segmentation seg;
    seg.breaks.resize(static_cast<std::size_t>(gaps));
    for (int i = 0; i < gaps; ++i) seg.breaks[static_cast<std::size_t>(i)] = (mask >> i) & 1u;
    out.push_back(std::move(seg));
  }
  return out;
}

namespace detail {

// Prefers higher score, then fewer breaks, then the lexicographically
// smaller break vector (false < true).
inline bool better_candidate(double score, const Segmentation& seg,
                             double best_score, const Segmentation& best) {
  if (score != best_score) return score > best_score;
  const std::size_t breaks = seg.break_count();
  const std::size_t best_breaks = best.break_count();
  if (breaks != best_breaks) return breaks < best_breaks;
  return seg.breaks < best.breaks;
}

}  // namespace detail

// Exhaustive argmax over all valid segmentations. The all-singleton
// segmentation (score 0) is always valid, so a result always exists.
inline Segmentation segment_naive(const QueryTokens& query, const NGramTable& table,
                                  WeightScheme scheme = WeightScheme::kSegLengthPow) {
  const std::size_t n = query.size();
  if (n == 0) throw EmptyQuery("cannot segment an empty query");
  if (n == 1) return Segmentation{};
  if (n > 20) throw TooLong("query too long for exhaustive segmentation");

  // Per-span weighted frequency, so mask enumeration touches no strings.
  // span_score[b][e-b-2] covers tokens [b, e); < 0 marks an unseen span.
  std::vector<std::vector<double>> span_score(n);
  {
    std::string key;
    for (std::size_t begin = 0; begin + 2 <= n; ++begin) {
      key = query.tokens[begin];
      for (std::size_t end = begin + 2; end <= n; ++end) {
        key += ' ';
        key += query.tokens[end - 1];
        const std::size_t len = end - begin;
        double value = -1.0;
        const std::int64_t freq = table.freq(key);
        if (freq > 0) {
          const double weight = scheme == WeightScheme::kSegLengthPow
              ? std::pow(static_cast<double>(len), static_cast<double>(len))
              : 1.0;
          value = weight * static_cast<double>(freq);
        }
        span_score[begin].push_back(value);
      }
    }
  }

  const int gaps = static_cast<int>(n) - 1;
  Segmentation best;
  best.breaks.assign(static_cast<std::size_t>(gaps), true);  // all singletons
  double best_score = 0.0;

  Segmentation candidate;
  candidate.breaks.resize(static_cast<std::size_t>(gaps));
  for (std::uint32_t mask = 0; mask < (std::uint32_t{1} << gaps); ++mask) {
    double score = 0.0;
    bool valid = true;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= static_cast<std::size_t>(gaps) && valid; ++i) {
      const bool at_break = i < static_cast<std::size_t>(gaps) ? ((mask >> i) & 1u) : true;
      if (!at_break) continue;
      const std::size_t end = i + 1;
      if (end - start >= 2) {
        const double s = span_score[start][end - start - 2];
        if (s < 0) valid = false;
        else score += s;
      }
      start = end;
    }
    if (!valid) continue;
    for (int i = 0; i < gaps; ++i) candidate.breaks[static_cast<std::size_t>(i)] = (mask >> i) & 1u;
    if (detail::better_candidate(score, candidate, best_score, best)) {
      best = candidate;
      best_score = score;
    }
  }
  return best;
}

// Persistence: "token-sequence \t count" sorted by key.
inline void save_ngram_table(const NGramTable& table, const std::string& path) {
  std::vector<const std::pair<const std::string, std::int64_t>*> rows;
  rows.reserve(table.counts.size());
  for (const auto& entry : table.counts) rows.push_back(&entry);
  std::sort(rows.begin(), rows.end(),
            [](const auto* a, const auto* b) { return a->first < b->first; });
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write n-gram table: " + path);
  for (const auto* row : rows) out << row->first << '\t' << row->second << '\n';
}

inline NGramTable load_ngram_table(const std::string& path, int max_n = 5) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open n-gram table: " + path);
  NGramTable table;
  table.max_n = max_n;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": missing tab separator");
    }
    const std::string key = line.substr(0, tab);
    std::int64_t count = 0;
    try {
      count = std::stoll(line.substr(tab + 1));
    } catch (const std::exception&) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": bad count");
    }
    if (count <= 0) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": counts must be positive");
    }
    table.counts[key] = count;
    const int len = static_cast<int>(std::count(key.begin(), key.end(), ' ')) + 1;
    if (len > table.max_n) table.max_n = len;
  }
  return table;
}

}  // namespace qseg
