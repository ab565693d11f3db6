#pragma once

// Word embeddings trained on query text with negative sampling (skip-gram
// and CBOW), plus loading of externally trained word2vec/GloVe-style text
// vector files.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <span>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "qseg/common.hpp"
#include "qseg/query.hpp"

namespace qseg {

enum class EmbedArch { kSkipGram, kCbow };

struct EmbedTrainConfig {
  EmbedArch architecture = EmbedArch::kSkipGram;
  int dimension = 300;
  int window = 3;
  int negative_samples = 5;
  int epochs = 5;
  double initial_learning_rate = 0.025;
  int min_count = 5;
  double subsample_threshold = 1e-3;  // 0 disables subsampling
  std::uint64_t seed = 1;
  int workers = 1;

  void validate() const {
    if (dimension < 1) throw ConfigInvalid("dimension must be >= 1");
    if (window < 1) throw ConfigInvalid("window must be >= 1");
    if (negative_samples < 1) throw ConfigInvalid("negative_samples must be >= 1");
    if (epochs < 0) throw ConfigInvalid("epochs must be >= 0");
    if (initial_learning_rate <= 0) throw ConfigInvalid("learning rate must be > 0");
    if (min_count < 1) throw ConfigInvalid("min_count must be >= 1");
    if (subsample_threshold < 0) throw ConfigInvalid("subsample threshold must be >= 0");
    if (workers < 1) throw ConfigInvalid("workers must be >= 1");
  }
};

struct EmbeddingTable {
  int dimension = 0;
  std::vector<std::string> tokens;                       // index -> token
  std::unordered_map<std::string, std::int32_t> vocab;   // token -> index
  std::vector<std::int64_t> token_counts;                // by index
  std::vector<double> input_vectors;                     // |V| x D row-major
  std::vector<double> output_vectors;                    // training only

  std::size_t vocab_size() const { return tokens.size(); }

  std::int32_t index_of(const std::string& token) const {
    const auto it = vocab.find(token);
    return it == vocab.end() ? -1 : it->second;
  }

  const double* row(std::int32_t index) const {
    return input_vectors.data() + static_cast<std::size_t>(index) * static_cast<std::size_t>(dimension);
  }
  double* row(std::int32_t index) {
    return input_vectors.data() + static_cast<std::size_t>(index) * static_cast<std::size_t>(dimension);
  }
  const double* out_row(std::int32_t index) const {
    return output_vectors.data() + static_cast<std::size_t>(index) * static_cast<std::size_t>(dimension);
  }
  double* out_row(std::int32_t index) {
    return output_vectors.data() + static_cast<std::size_t>(index) * static_cast<std::size_t>(dimension);
  }

  // Stored vector for in-vocabulary tokens, all zeros otherwise.
  std::vector<double> lookup(const std::string& token) const {
    const std::int32_t idx = index_of(token);
    if (idx < 0) return std::vector<double>(static_cast<std::size_t>(dimension), 0.0);
    return std::vector<double>(row(idx), row(idx) + dimension);
  }
};

// Tokens sorted by (count desc, token asc); tokens under min_count dropped.
inline EmbeddingTable build_vocab(const std::vector<QueryTokens>& corpus, int min_count) {
  if (min_count < 1) throw ConfigInvalid("min_count must be >= 1");
  std::unordered_map<std::string, std::int64_t> counts;
  for (const QueryTokens& q : corpus) {
    for (const std::string& t : q.tokens) counts[t] += 1;
  }
  std::vector<std::pair<std::string, std::int64_t>> kept;
  for (const auto& [token, count] : counts) {
    if (count >= min_count) kept.emplace_back(token, count);
  }
  if (kept.empty()) throw EmptyVocab("no token reaches min_count");
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  EmbeddingTable table;
  table.tokens.reserve(kept.size());
  table.token_counts.reserve(kept.size());
  for (std::size_t i = 0; i < kept.size(); ++i) {
    table.tokens.push_back(kept[i].first);
    table.token_counts.push_back(kept[i].second);
    table.vocab.emplace(kept[i].first, static_cast<std::int32_t>(i));
  }
  return table;
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

// log(sigmoid(x)) without overflow for large negative x.
inline double log_sigmoid(double x) {
  if (x >= 0) return -std::log1p(std::exp(-x));
  return x - std::log1p(std::exp(x));
}

namespace detail {

inline double dot(const double* a, const double* b, int d) {
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += a[i] * b[i];
  return s;
}

inline void axpy(double alpha, const double* x, double* y, int d) {
  for (int i = 0; i < d; ++i) y[i] += alpha * x[i];
}

// Draws from unigram^0.75 via binary search over the cumulative weights.
class NegativeSampler {
 public:
  explicit NegativeSampler(std::span<const std::int64_t> counts) {
    cumulative_.reserve(counts.size());
    double total = 0.0;
    for (const std::int64_t c : counts) {
      total += std::pow(static_cast<double>(c), 0.75);
      cumulative_.push_back(total);
    }
  }

  std::int32_t sample(std::mt19937_64& rng) const {
    const double u = uniform01(rng) * cumulative_.back();
    const auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), u);
    const std::size_t idx = std::min<std::size_t>(
        static_cast<std::size_t>(it - cumulative_.begin()), cumulative_.size() - 1);
    return static_cast<std::int32_t>(idx);
  }

 private:
  std::vector<double> cumulative_;
};

}  // namespace detail

// Negative-sampling loss for one skip-gram example:
//   -log s(u_ctx . v_center) - sum_i log s(-u_neg_i . v_center)
inline double ns_loss(const EmbeddingTable& t, std::int32_t center, std::int32_t context,
                      std::span<const std::int32_t> negatives) {
  const int d = t.dimension;
  double loss = -log_sigmoid(detail::dot(t.row(center), t.out_row(context), d));
  for (const std::int32_t n : negatives) {
    loss -= log_sigmoid(-detail::dot(t.row(center), t.out_row(n), d));
  }
  return loss;
}

struct NsGrad {
  std::vector<double> center;                  // d loss / d v_center
  std::vector<double> context;                 // d loss / d u_context
  std::vector<std::vector<double>> negatives;  // d loss / d u_neg_i
};

inline NsGrad ns_grad(const EmbeddingTable& t, std::int32_t center, std::int32_t context,
                      std::span<const std::int32_t> negatives) {
  const int d = t.dimension;
  NsGrad g;
  g.center.assign(static_cast<std::size_t>(d), 0.0);
  g.context.assign(static_cast<std::size_t>(d), 0.0);
  const double* v = t.row(center);

  const double g_pos = sigmoid(detail::dot(v, t.out_row(context), d)) - 1.0;
  detail::axpy(g_pos, t.out_row(context), g.center.data(), d);
  detail::axpy(g_pos, v, g.context.data(), d);
  for (const std::int32_t n : negatives) {
    const double g_neg = sigmoid(detail::dot(v, t.out_row(n), d));
    std::vector<double> grad_n(static_cast<std::size_t>(d), 0.0);
    detail::axpy(g_neg, v, grad_n.data(), d);
    detail::axpy(g_neg, t.out_row(n), g.center.data(), d);
    g.negatives.push_back(std::move(grad_n));
  }
  return g;
}

// CBOW variant: the hidden vector is the mean of the context input vectors
// and the positive output vector belongs to the center word.
inline double cbow_loss(const EmbeddingTable& t, std::span<const std::int32_t> context,
                        std::int32_t center, std::span<const std::int32_t> negatives) {
  const int d = t.dimension;
  std::vector<double> h(static_cast<std::size_t>(d), 0.0);
  for (const std::int32_t c : context) detail::axpy(1.0, t.row(c), h.data(), d);
  for (double& x : h) x /= static_cast<double>(context.size());
  double loss = -log_sigmoid(detail::dot(h.data(), t.out_row(center), d));
  for (const std::int32_t n : negatives) {
    loss -= log_sigmoid(-detail::dot(h.data(), t.out_row(n), d));
  }
  return loss;
}

struct CbowGrad {
  std::vector<double> context_input;           // d loss / d v_c, same for every c
  std::vector<double> center;                  // d loss / d u_center
  std::vector<std::vector<double>> negatives;  // d loss / d u_neg_i
};

inline CbowGrad cbow_grad(const EmbeddingTable& t, std::span<const std::int32_t> context,
                          std::int32_t center, std::span<const std::int32_t> negatives) {
  const int d = t.dimension;
  const double inv = 1.0 / static_cast<double>(context.size());
  std::vector<double> h(static_cast<std::size_t>(d), 0.0);
  for (const std::int32_t c : context) detail::axpy(1.0, t.row(c), h.data(), d);
  for (double& x : h) x *= inv;

  CbowGrad g;
  g.center.assign(static_cast<std::size_t>(d), 0.0);
  std::vector<double> grad_h(static_cast<std::size_t>(d), 0.0);

  const double g_pos = sigmoid(detail::dot(h.data(), t.out_row(center), d)) - 1.0;
  detail::axpy(g_pos, t.out_row(center), grad_h.data(), d);
  detail::axpy(g_pos, h.data(), g.center.data(), d);
  for (const std::int32_t n : negatives) {
    const double g_neg = sigmoid(detail::dot(h.data(), t.out_row(n), d));
    std::vector<double> grad_n(static_cast<std::size_t>(d), 0.0);
    detail::axpy(g_neg, h.data(), grad_n.data(), d);
    detail::axpy(g_neg, t.out_row(n), grad_h.data(), d);
    g.negatives.push_back(std::move(grad_n));
  }
  g.context_input.assign(static_cast<std::size_t>(d), 0.0);
  detail::axpy(inv, grad_h.data(), g.context_input.data(), d);
  return g;
}

struct EmbedTrainStats {
  std::vector<double> epoch_losses;  // mean per-example NS loss
  std::uint64_t examples = 0;
};

namespace detail {

struct TrainShared {
  EmbeddingTable* table;
  const std::vector<std::vector<std::int32_t>>* queries;  // vocab-filtered ids
  const EmbedTrainConfig* config;
  const NegativeSampler* sampler;
  std::uint64_t total_tokens = 0;  // per epoch, before subsampling
  std::atomic<std::uint64_t> tokens_done{0};
  std::vector<double> worker_loss;
  std::vector<std::uint64_t> worker_examples;
};

// One worker's pass over its query shard for one epoch. Updates to the
// shared matrices are lock-free; single-worker runs are bit-deterministic.
inline void train_worker(TrainShared& shared, int worker, std::mt19937_64& rng) {
  EmbeddingTable& t = *shared.table;
  const EmbedTrainConfig& cfg = *shared.config;
  const int d = cfg.dimension;
  const int k = cfg.negative_samples;
  const auto& queries = *shared.queries;
  const double total_steps =
      static_cast<double>(shared.total_tokens) * static_cast<double>(std::max(cfg.epochs, 1));

  const std::size_t begin = queries.size() * static_cast<std::size_t>(worker) /
                            static_cast<std::size_t>(cfg.workers);
  const std::size_t end = queries.size() * (static_cast<std::size_t>(worker) + 1) /
                          static_cast<std::size_t>(cfg.workers);

  std::vector<std::int32_t> sentence;
  std::vector<double> hidden(static_cast<std::size_t>(d));
  std::vector<double> grad_in(static_cast<std::size_t>(d));
  double loss_sum = 0.0;
  std::uint64_t examples = 0;

  const double subsample = cfg.subsample_threshold;
  const double total_count = static_cast<double>(shared.total_tokens);

  for (std::size_t qi = begin; qi < end; ++qi) {
    const auto& ids = queries[qi];
    if (ids.empty()) continue;
    const std::uint64_t done =
        shared.tokens_done.fetch_add(ids.size(), std::memory_order_relaxed);
    const double progress = static_cast<double>(done) / (total_steps + 1.0);
    const double alpha =
        std::max(cfg.initial_learning_rate * (1.0 - progress), cfg.initial_learning_rate * 1e-4);

    // Frequency subsampling, word2vec style.
    sentence.clear();
    for (const std::int32_t id : ids) {
      if (subsample > 0) {
        const double f = static_cast<double>(t.token_counts[static_cast<std::size_t>(id)]);
        const double keep = (std::sqrt(f / (subsample * total_count)) + 1.0) *
                            (subsample * total_count) / f;
        if (keep < 1.0 && uniform01(rng) > keep) continue;
      }
      sentence.push_back(id);
    }
    const int len = static_cast<int>(sentence.size());

    for (int i = 0; i < len; ++i) {
      const int reach = 1 + static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.window));
      const int lo = std::max(0, i - reach);
      const int hi = std::min(len - 1, i + reach);

      if (cfg.architecture == EmbedArch::kSkipGram) {
        const std::int32_t center = sentence[static_cast<std::size_t>(i)];
        double* v = t.row(center);
        for (int j = lo; j <= hi; ++j) {
          if (j == i) continue;
          const std::int32_t context = sentence[static_cast<std::size_t>(j)];
          std::fill(grad_in.begin(), grad_in.end(), 0.0);
          {
            double* u = t.out_row(context);
            const double z = dot(v, u, d);
            loss_sum -= log_sigmoid(z);
            const double g = (sigmoid(z) - 1.0) * alpha;
            axpy(-g, u, grad_in.data(), d);
            axpy(-g, v, u, d);
          }
          for (int s = 0; s < k; ++s) {
            const std::int32_t neg = shared.sampler->sample(rng);
            if (neg == context) continue;
            double* u = t.out_row(neg);
            const double z = dot(v, u, d);
            loss_sum -= log_sigmoid(-z);
            const double g = sigmoid(z) * alpha;
            axpy(-g, u, grad_in.data(), d);
            axpy(-g, v, u, d);
          }
          axpy(1.0, grad_in.data(), v, d);
          ++examples;
        }
      } else {  // CBOW
        int n_ctx = 0;
        std::fill(hidden.begin(), hidden.end(), 0.0);
        for (int j = lo; j <= hi; ++j) {
          if (j == i) continue;
          axpy(1.0, t.row(sentence[static_cast<std::size_t>(j)]), hidden.data(), d);
          ++n_ctx;
        }
        if (n_ctx == 0) continue;
        const double inv = 1.0 / static_cast<double>(n_ctx);
        for (double& x : hidden) x *= inv;

        const std::int32_t center = sentence[static_cast<std::size_t>(i)];
        std::fill(grad_in.begin(), grad_in.end(), 0.0);
        {
          double* u = t.out_row(center);
          const double z = dot(hidden.data(), u, d);
          loss_sum -= log_sigmoid(z);
          const double g = (sigmoid(z) - 1.0) * alpha;
          axpy(-g, u, grad_in.data(), d);
          axpy(-g, hidden.data(), u, d);
        }
        for (int s = 0; s < k; ++s) {
          const std::int32_t neg = shared.sampler->sample(rng);
          if (neg == center) continue;
          double* u = t.out_row(neg);
          const double z = dot(hidden.data(), u, d);
          loss_sum -= log_sigmoid(-z);
          const double g = sigmoid(z) * alpha;
          axpy(-g, u, grad_in.data(), d);
          axpy(-g, hidden.data(), u, d);
        }
        for (int j = lo; j <= hi; ++j) {
          if (j == i) continue;
          axpy(inv, grad_in.data(), t.row(sentence[static_cast<std::size_t>(j)]), d);
        }
        ++examples;
      }
    }
  }
  shared.worker_loss[static_cast<std::size_t>(worker)] = loss_sum;
  shared.worker_examples[static_cast<std::size_t>(worker)] = examples;
}

}  // namespace detail

// Trains embeddings on the corpus; every query is one sentence and context
// windows never cross query boundaries.
inline EmbeddingTable train_embeddings(const std::vector<QueryTokens>& corpus,
                                       const EmbedTrainConfig& config,
                                       EmbedTrainStats* stats = nullptr) {
  config.validate();
  EmbeddingTable table = build_vocab(corpus, config.min_count);
  table.dimension = config.dimension;
  const std::size_t v = table.vocab_size();
  const std::size_t d = static_cast<std::size_t>(config.dimension);

  // Input vectors uniform in [-0.5/D, 0.5/D]; output vectors zero.
  table.input_vectors.resize(v * d);
  table.output_vectors.assign(v * d, 0.0);
  {
    std::mt19937_64 rng(derive_seed(config.seed, 0x494e4954ULL));
    const double scale = 1.0 / static_cast<double>(config.dimension);
    for (double& x : table.input_vectors) x = (uniform01(rng) - 0.5) * scale;
  }

  std::vector<std::vector<std::int32_t>> queries;
  queries.reserve(corpus.size());
  std::uint64_t total_tokens = 0;
  for (const QueryTokens& q : corpus) {
    std::vector<std::int32_t> ids;
    ids.reserve(q.size());
    for (const std::string& tok : q.tokens) {
      const std::int32_t idx = table.index_of(tok);
      if (idx >= 0) ids.push_back(idx);
    }
    total_tokens += ids.size();
    queries.push_back(std::move(ids));
  }
  if (stats != nullptr) {
    stats->epoch_losses.clear();
    stats->examples = 0;
  }
  if (config.epochs == 0 || total_tokens == 0) return table;

  const detail::NegativeSampler sampler(table.token_counts);
  detail::TrainShared shared;
  shared.table = &table;
  shared.queries = &queries;
  shared.config = &config;
  shared.sampler = &sampler;
  shared.total_tokens = total_tokens;
  shared.worker_loss.assign(static_cast<std::size_t>(config.workers), 0.0);
  shared.worker_examples.assign(static_cast<std::size_t>(config.workers), 0);

  std::vector<std::mt19937_64> worker_rngs;
  for (int w = 0; w < config.workers; ++w) {
    worker_rngs.emplace_back(derive_seed(config.seed, 0x574f524bULL + static_cast<std::uint64_t>(w)));
  }

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    if (config.workers == 1) {
      detail::train_worker(shared, 0, worker_rngs[0]);
    } else {
      std::vector<std::thread> threads;
      for (int w = 0; w < config.workers; ++w) {
        threads.emplace_back([&shared, &worker_rngs, w] {
          detail::train_worker(shared, w, worker_rngs[static_cast<std::size_t>(w)]);
        });
      }
      for (std::thread& th : threads) th.join();
    }
    if (stats != nullptr) {
      double loss = 0.0;
      std::uint64_t examples = 0;
      for (int w = 0; w < config.workers; ++w) {
        loss += shared.worker_loss[static_cast<std::size_t>(w)];
        examples += shared.worker_examples[static_cast<std::size_t>(w)];
      }
      stats->epoch_losses.push_back(examples > 0 ? loss / static_cast<double>(examples) : 0.0);
      stats->examples += examples;
    }
  }
  return table;
}

inline double cosine(const EmbeddingTable& table, const std::string& a, const std::string& b) {
  const std::vector<double> va = table.lookup(a);
  const std::vector<double> vb = table.lookup(b);
  const double num = detail::dot(va.data(), vb.data(), table.dimension);
  const double na = std::sqrt(detail::dot(va.data(), va.data(), table.dimension));
  const double nb = std::sqrt(detail::dot(vb.data(), vb.data(), table.dimension));
  if (na == 0.0 || nb == 0.0) return 0.0;
  return num / (na * nb);
}

// Text vector file: optional "count dim" header, then one token plus D
// reals per line. The writer always emits the header.
inline void save_vectors(const EmbeddingTable& table, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ParseError("cannot write vector file: " + path);
  out << table.vocab_size() << ' ' << table.dimension << '\n';
  for (std::size_t i = 0; i < table.vocab_size(); ++i) {
    out << table.tokens[i];
    const double* r = table.row(static_cast<std::int32_t>(i));
    for (int j = 0; j < table.dimension; ++j) out << ' ' << format_double(r[j]);
    out << '\n';
  }
}

namespace detail {

inline bool is_integer_field(const std::string& s) {
  if (s.empty()) return false;
  for (const char c : s) {
    if (c < '0' || c > '9') return false;
  }
  return true;
}

}  // namespace detail

inline EmbeddingTable load_vectors(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open vector file: " + path);
  EmbeddingTable table;
  std::string line;
  std::size_t line_no = 0;
  bool saw_header = false;
  std::size_t declared_rows = 0;
  int declared_dim = 0;

  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;

    std::istringstream fields(line);
    std::string token;
    fields >> token;
    std::vector<double> values;
    std::string field;
    while (fields >> field) {
      try {
        std::size_t consumed = 0;
        values.push_back(std::stod(field, &consumed));
        if (consumed != field.size()) throw std::invalid_argument(field);
      } catch (const std::exception&) {
        throw ParseError(path + ":" + std::to_string(line_no) + ": bad number '" + field + "'");
      }
    }

    // A 2-field first line of integers is a "count dim" header.
    if (line_no == 1 && values.size() == 1 && detail::is_integer_field(token)) {
      std::istringstream probe(line);
      std::string a, b, rest;
      probe >> a >> b;
      if (detail::is_integer_field(b) && !(probe >> rest)) {
        saw_header = true;
        declared_rows = static_cast<std::size_t>(std::stoull(a));
        declared_dim = static_cast<int>(std::stoul(b));
        continue;
      }
    }

    if (values.empty()) {
      throw ParseError(path + ":" + std::to_string(line_no) + ": no vector values");
    }
    if (table.dimension == 0) {
      if (saw_header && declared_dim != static_cast<int>(values.size())) {
        throw DimensionMismatch(path + ":" + std::to_string(line_no) + ": header declares dim " +
                                std::to_string(declared_dim) + " but row has " +
                                std::to_string(values.size()));
      }
      table.dimension = static_cast<int>(values.size());
    } else if (static_cast<int>(values.size()) != table.dimension) {
      throw DimensionMismatch(path + ":" + std::to_string(line_no) + ": expected " +
                              std::to_string(table.dimension) + " values, got " +
                              std::to_string(values.size()));
    }
    if (table.vocab.contains(token)) continue;  // keep the first duplicate
    table.vocab.emplace(token, static_cast<std::int32_t>(table.tokens.size()));
    table.tokens.push_back(token);
    table.input_vectors.insert(table.input_vectors.end(), values.begin(), values.end());
  }
  if (table.tokens.empty()) throw ParseError(path + ": no vectors found");
  if (saw_header && declared_rows != table.vocab_size()) {
    throw ParseError(path + ": header declares " + std::to_string(declared_rows) +
                     " rows but file has " + std::to_string(table.vocab_size()));
  }
  table.token_counts.assign(table.vocab_size(), 0);
  return table;
}

}  // namespace qseg
