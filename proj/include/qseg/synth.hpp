#pragma once

// Synthetic query corpus with planted multi-token phrases and known gold
// segmentations. Single tokens follow a Zipf law; phrases are fixed token
// runs that never contain a gold break, so segment joins are learnable.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "qseg/common.hpp"
#include "qseg/query.hpp"

namespace qseg {

struct SynthConfig {
  int vocab_size = 2000;
  int phrase_count = 200;
  int phrase_min_len = 2;
  int phrase_max_len = 4;
  int min_segments = 1;
  int max_segments = 3;
  int query_count = 50000;
  double zipf_exponent = 1.0;
  double noise_rate = 0.0;        // chance a query's gold flips one boundary
  double phrase_segment_prob = 0.5;
  std::uint64_t seed = 1;

  void validate() const {
    if (vocab_size < 1) throw ConfigInvalid("vocab_size must be >= 1");
    if (phrase_count < 0) throw ConfigInvalid("phrase_count must be >= 0");
    if (phrase_min_len < 2 || phrase_max_len < phrase_min_len) {
      throw ConfigInvalid("phrase length range must satisfy 2 <= min <= max");
    }
    if (phrase_max_len > vocab_size) {
      throw ConfigInvalid("phrase_max_len cannot exceed vocab_size");
    }
    if (min_segments < 1 || max_segments < min_segments) {
      throw ConfigInvalid("segment range must satisfy 1 <= min <= max");
    }
    if (query_count < 0) throw ConfigInvalid("query_count must be >= 0");
    if (zipf_exponent < 0) throw ConfigInvalid("zipf_exponent must be >= 0");
    if (noise_rate < 0 || noise_rate > 1) throw ConfigInvalid("noise_rate must be in [0,1]");
    if (phrase_segment_prob < 0 || phrase_segment_prob > 1) {
      throw ConfigInvalid("phrase_segment_prob must be in [0,1]");
    }
  }
};

namespace detail {

// Ranked token names of equal width so files sort cleanly.
inline std::vector<std::string> token_names(int vocab_size) {
  int width = 1;
  for (int v = vocab_size - 1; v >= 10; v /= 10) ++width;
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(vocab_size));
  for (int i = 0; i < vocab_size; ++i) {
    std::string digits = std::to_string(i);
    names.push_back("w" + std::string(static_cast<std::size_t>(width) - digits.size(), '0') +
                    digits);
  }
  return names;
}

class ZipfSampler {
 public:
  ZipfSampler(int vocab_size, double exponent) {
    cumulative_.reserve(static_cast<std::size_t>(vocab_size));
    double total = 0.0;
    for (int i = 0; i < vocab_size; ++i) {
      total += 1.0 / std::pow(static_cast<double>(i + 1), exponent);
      cumulative_.push_back(total);
    }
  }

  int sample(std::mt19937_64& rng) const {
    const double u = uniform01(rng) * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    return static_cast<int>(std::min<std::size_t>(
        static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1));
  }

 private:
  std::vector<double> cumulative_;
};

// Fixed phrase inventory. Tokens are drawn uniformly with a reuse cap so a
// token belongs to at most a few phrases and gold stays unambiguous.
inline std::vector<std::vector<int>> build_phrases(const SynthConfig& config,
                                                   std::mt19937_64& rng) {
  std::vector<int> uses(static_cast<std::size_t>(config.vocab_size), 0);
  std::vector<std::vector<int>> phrases;
  phrases.reserve(static_cast<std::size_t>(config.phrase_count));
  for (int p = 0; p < config.phrase_count; ++p) {
    const int len = config.phrase_min_len +
                    static_cast<int>(rng() % static_cast<std::uint64_t>(
                                                 config.phrase_max_len - config.phrase_min_len + 1));
    std::vector<int> phrase;
    for (int t = 0; t < len; ++t) {
      int token = 0;
      for (int attempt = 0; attempt < 100; ++attempt) {
        token = static_cast<int>(rng() % static_cast<std::uint64_t>(config.vocab_size));
        const bool repeated =
            std::find(phrase.begin(), phrase.end(), token) != phrase.end();
        if (!repeated && uses[static_cast<std::size_t>(token)] < 2) break;
      }
      uses[static_cast<std::size_t>(token)] += 1;
      phrase.push_back(token);
    }
    phrases.push_back(std::move(phrase));
  }
  return phrases;
}

}  // namespace detail

// Deterministic per seed; each query draws from its own derived RNG stream,
// so the corpus is independent of generation order.
inline std::vector<AnnotatedQuery> generate_corpus(const SynthConfig& config) {
  config.validate();
  const std::vector<std::string> names = detail::token_names(config.vocab_size);
  const detail::ZipfSampler zipf(config.vocab_size, config.zipf_exponent);
  std::mt19937_64 phrase_rng(derive_seed(config.seed, 0x50485253ULL));
  const std::vector<std::vector<int>> phrases = detail::build_phrases(config, phrase_rng);

  std::vector<AnnotatedQuery> corpus;
  corpus.reserve(static_cast<std::size_t>(config.query_count));
  for (int qi = 0; qi < config.query_count; ++qi) {
    std::mt19937_64 rng(
        derive_seed(config.seed, 0x5155455259ULL + static_cast<std::uint64_t>(qi)));
    const int n_segments =
        config.min_segments + static_cast<int>(rng() % static_cast<std::uint64_t>(
                                                   config.max_segments - config.min_segments + 1));
    AnnotatedQuery aq;
    Segmentation gold;
    for (int s = 0; s < n_segments; ++s) {
      if (s > 0) gold.breaks.push_back(true);
      const bool use_phrase =
          !phrases.empty() && uniform01(rng) < config.phrase_segment_prob;
      if (use_phrase) {
        const auto& phrase = phrases[rng() % phrases.size()];
        for (std::size_t t = 0; t < phrase.size(); ++t) {
          if (t > 0) gold.breaks.push_back(false);
          aq.query.tokens.push_back(names[static_cast<std::size_t>(phrase[t])]);
        }
      } else {
        aq.query.tokens.push_back(names[static_cast<std::size_t>(zipf.sample(rng))]);
      }
    }
    if (!gold.breaks.empty() && config.noise_rate > 0 && uniform01(rng) < config.noise_rate) {
      const std::size_t flip = rng() % gold.breaks.size();
      gold.breaks[flip] = !gold.breaks[flip];
    }
    aq.annotations.push_back(gold);
    aq.gold = std::move(gold);
    corpus.push_back(std::move(aq));
  }
  return corpus;
}

}  // namespace qseg
