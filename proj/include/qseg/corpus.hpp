#pragma once

// Annotation aggregation, train/val/test splitting and annotator
// agreement statistics.

#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <vector>

#include "qseg/query.hpp"

namespace qseg {

struct SplitSpec {
  double train_fraction = 0.6;
  double val_fraction = 0.2;
  double test_fraction = 0.2;
  std::uint64_t seed = 1;

  void validate() const {
    if (train_fraction < 0 || val_fraction < 0 || test_fraction < 0) {
      throw ConfigInvalid("split fractions must be non-negative");
    }
    if (std::abs(train_fraction + val_fraction + test_fraction - 1.0) > 1e-9) {
      throw ConfigInvalid("split fractions must sum to 1");
    }
  }
};

struct CorpusSplit {
  std::vector<AnnotatedQuery> train;
  std::vector<AnnotatedQuery> val;
  std::vector<AnnotatedQuery> test;
};

namespace detail {

inline void check_annotation_lengths(const AnnotatedQuery& aq) {
  const std::size_t expected = aq.query.size() - 1;
  for (const Segmentation& s : aq.annotations) {
    if (s.size() != expected) {
      throw LengthMismatch("annotation length " + std::to_string(s.size()) +
                           " does not match N-1 = " + std::to_string(expected));
    }
  }
}

// Identical-annotation groups, keyed by break vector. std::map keeps the
// grouping independent of annotation order.
inline std::map<std::vector<bool>, int> annotation_groups(const AnnotatedQuery& aq) {
  check_annotation_lengths(aq);
  std::map<std::vector<bool>, int> groups;
  for (const Segmentation& s : aq.annotations) groups[s.breaks] += 1;
  return groups;
}

}  // namespace detail

// The segmentation produced identically by at least `min_agree` annotators
// (whole-query exact match), or nothing when no group reaches the threshold.
// Ties between qualifying groups go to the lexicographically smallest
// break vector (false < true).
inline std::optional<Segmentation> aggregate_annotations(const AnnotatedQuery& aq,
                                                         int min_agree) {
  if (min_agree < 1) throw ConfigInvalid("min_agree must be >= 1");
  if (aq.annotations.empty()) throw ConfigInvalid("no annotations to aggregate");
  const auto groups = detail::annotation_groups(aq);
  const std::vector<bool>* best = nullptr;
  int best_count = 0;
  for (const auto& [breaks, count] : groups) {
    if (count > best_count) {
      best = &breaks;
      best_count = count;
    }
  }
  if (best_count < min_agree) return std::nullopt;
  return Segmentation{*best};
}

// Deterministic seeded shuffle, then contiguous train/val/test slices.
// Rounding remainder goes to train.
inline CorpusSplit split_corpus(const std::vector<AnnotatedQuery>& queries,
                                const SplitSpec& spec) {
  spec.validate();
  if (queries.empty()) throw ConfigInvalid("cannot split an empty corpus");
  const std::size_t n = queries.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(derive_seed(spec.seed, 0x53504c49ULL));
  seeded_shuffle(order, rng);

  const std::size_t n_val = static_cast<std::size_t>(spec.val_fraction * static_cast<double>(n));
  const std::size_t n_test = static_cast<std::size_t>(spec.test_fraction * static_cast<double>(n));
  const std::size_t n_train = n - n_val - n_test;

  CorpusSplit split;
  split.train.reserve(n_train);
  split.val.reserve(n_val);
  split.test.reserve(n_test);
  for (std::size_t i = 0; i < n; ++i) {
    const AnnotatedQuery& q = queries[order[i]];
    if (i < n_train) split.train.push_back(q);
    else if (i < n_train + n_val) split.val.push_back(q);
    else split.test.push_back(q);
  }
  return split;
}

// Buckets queries by the maximum number of annotators sharing an identical
// segmentation. All levels 1..k are present in the result.
inline std::map<int, std::size_t> agreement_histogram(const std::vector<AnnotatedQuery>& queries) {
  std::map<int, std::size_t> histogram;
  if (queries.empty()) return histogram;
  const std::size_t k = queries.front().annotations.size();
  for (std::size_t level = 1; level <= k; ++level) histogram[static_cast<int>(level)] = 0;
  for (const AnnotatedQuery& aq : queries) {
    if (aq.annotations.size() != k) {
      throw ConfigInvalid("annotator count differs across queries");
    }
    int max_agree = 0;
    for (const auto& [breaks, count] : detail::annotation_groups(aq)) {
      (void)breaks;
      if (count > max_agree) max_agree = count;
    }
    histogram[max_agree] += 1;
  }
  return histogram;
}

}  // namespace qseg
