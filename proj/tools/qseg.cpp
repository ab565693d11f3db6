// qseg: command-line pipeline for query segmentation — synthetic corpora,
// data preparation, embedding training, n-gram counting, boundary-model
// training, segmentation, and evaluation.
//
// Exit codes: 0 success, 1 usage error, 2 data error, 3 internal error.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <unordered_set>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "qseg/common.hpp"
#include "qseg/corpus.hpp"
#include "qseg/embeddings.hpp"
#include "qseg/eval.hpp"
#include "qseg/gbdt.hpp"
#include "qseg/logistic.hpp"
#include "qseg/ngram.hpp"
#include "qseg/query.hpp"
#include "qseg/segmenter.hpp"
#include "qseg/synth.hpp"

namespace {

using nlohmann::json;

template <typename T>
void from_key(const json& j, const char* key, T& out) {
  if (j.contains(key)) j.at(key).get_to(out);
}

// Mandatory paths may come from either the command line or --config, so they
// are checked here rather than marked required at option registration.
void require_opt(const std::string& value, const char* flag) {
  if (value.empty()) throw qseg::ConfigInvalid(std::string(flag) + " is required");
}

json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw qseg::ParseError("cannot open config file: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw qseg::ParseError(path + ": " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw qseg::ParseError("cannot write file: " + path);
  out << content;
}

// Every artifact gets a sidecar recording the command, options, and seed
// that produced it (model files carry this inline instead).
void write_meta(const std::string& artifact_path, const std::string& command,
                const json& effective_config) {
  json meta;
  meta["artifact"] = std::filesystem::path(artifact_path).filename().string();
  meta["command"] = command;
  meta["config"] = effective_config;
  write_text_file(artifact_path + ".meta.json", meta.dump(2) + "\n");
}

struct GlobalOpts {
  std::uint64_t seed = 1;
  int workers = 1;
  std::string config_path;
  bool dump_config = false;

  void apply(const json& j) {
    from_key(j, "seed", seed);
    from_key(j, "workers", workers);
  }
  void to_json(json& j) const {
    j["seed"] = seed;
    j["workers"] = workers;
  }
};

// --- synth -------------------------------------------------------------

struct SynthOpts {
  std::string out_annotated;
  std::string out_raw;
  qseg::SynthConfig config;

  void apply(const json& j) {
    from_key(j, "out-annotated", out_annotated);
    from_key(j, "out-raw", out_raw);
    from_key(j, "vocab-size", config.vocab_size);
    from_key(j, "phrases", config.phrase_count);
    from_key(j, "phrase-min-len", config.phrase_min_len);
    from_key(j, "phrase-max-len", config.phrase_max_len);
    from_key(j, "min-segments", config.min_segments);
    from_key(j, "max-segments", config.max_segments);
    from_key(j, "queries", config.query_count);
    from_key(j, "zipf-exponent", config.zipf_exponent);
    from_key(j, "noise-rate", config.noise_rate);
    from_key(j, "phrase-prob", config.phrase_segment_prob);
  }
  void to_json(json& j) const {
    j["out-annotated"] = out_annotated;
    j["out-raw"] = out_raw;
    j["vocab-size"] = config.vocab_size;
    j["phrases"] = config.phrase_count;
    j["phrase-min-len"] = config.phrase_min_len;
    j["phrase-max-len"] = config.phrase_max_len;
    j["min-segments"] = config.min_segments;
    j["max-segments"] = config.max_segments;
    j["queries"] = config.query_count;
    j["zipf-exponent"] = config.zipf_exponent;
    j["noise-rate"] = config.noise_rate;
    j["phrase-prob"] = config.phrase_segment_prob;
  }
};

int run_synth(const GlobalOpts& global, const SynthOpts& opts, const json& effective) {
  require_opt(opts.out_annotated, "--out-annotated");
  require_opt(opts.out_raw, "--out-raw");
  qseg::SynthConfig config = opts.config;
  config.seed = global.seed;
  const std::vector<qseg::AnnotatedQuery> corpus = qseg::generate_corpus(config);
  qseg::write_annotated_file(opts.out_annotated, corpus);
  write_meta(opts.out_annotated, "synth", effective);
  std::vector<qseg::QueryTokens> raw;
  raw.reserve(corpus.size());
  for (const auto& aq : corpus) raw.push_back(aq.query);
  qseg::write_raw_log(opts.out_raw, raw);
  write_meta(opts.out_raw, "synth", effective);
  std::cout << "wrote " << corpus.size() << " queries to " << opts.out_annotated << " and "
            << opts.out_raw << "\n";
  return 0;
}

// --- prepare -----------------------------------------------------------

struct PrepareOpts {
  std::string input;
  std::string out_dir;
  double train_frac = 0.6;
  double val_frac = 0.2;
  double test_frac = 0.2;
  int min_agree = 2;

  void apply(const json& j) {
    from_key(j, "input", input);
    from_key(j, "out-dir", out_dir);
    from_key(j, "train-frac", train_frac);
    from_key(j, "val-frac", val_frac);
    from_key(j, "test-frac", test_frac);
    from_key(j, "min-agree", min_agree);
  }
  void to_json(json& j) const {
    j["input"] = input;
    j["out-dir"] = out_dir;
    j["train-frac"] = train_frac;
    j["val-frac"] = val_frac;
    j["test-frac"] = test_frac;
    j["min-agree"] = min_agree;
  }
};

int run_prepare(const GlobalOpts& global, const PrepareOpts& opts, const json& effective) {
  require_opt(opts.input, "--input");
  require_opt(opts.out_dir, "--out-dir");
  const std::vector<qseg::AnnotatedQuery> corpus = qseg::read_annotated_file(opts.input);

  // The histogram buckets by exact agreement level; the report shows
  // cumulative "at least k" counts, which is how thresholds are chosen.
  const std::map<int, std::size_t> histogram = qseg::agreement_histogram(corpus);
  std::map<int, std::size_t> at_least;
  std::size_t running = 0;
  for (auto it = histogram.rbegin(); it != histogram.rend(); ++it) {
    running += it->second;
    at_least[it->first] = running;
  }
  for (const auto& [level, count] : at_least) {
    std::cout << "agreement >= " << level << ": " << count << " queries\n";
  }

  // Queries whose annotators agree become labeled data; the rest still
  // contribute text to the embedding log below.
  std::vector<qseg::AnnotatedQuery> agreeing;
  for (const qseg::AnnotatedQuery& aq : corpus) {
    const std::optional<qseg::Segmentation> gold =
        qseg::aggregate_annotations(aq, opts.min_agree);
    if (!gold.has_value()) continue;
    qseg::AnnotatedQuery labeled;
    labeled.query = aq.query;
    labeled.annotations.push_back(*gold);
    labeled.gold = *gold;
    agreeing.push_back(std::move(labeled));
  }
  std::cout << "labeled: " << agreeing.size() << " of " << corpus.size() << " queries\n";

  qseg::SplitSpec spec;
  spec.train_fraction = opts.train_frac;
  spec.val_fraction = opts.val_frac;
  spec.test_fraction = opts.test_frac;
  spec.seed = global.seed;
  const qseg::CorpusSplit split = qseg::split_corpus(agreeing, spec);

  std::filesystem::create_directories(opts.out_dir);
  const std::string train_path = opts.out_dir + "/train.tsv";
  const std::string val_path = opts.out_dir + "/val.tsv";
  const std::string test_path = opts.out_dir + "/test.tsv";
  const std::string embed_path = opts.out_dir + "/embed.txt";
  qseg::write_annotated_file(train_path, split.train);
  qseg::write_annotated_file(val_path, split.val);
  qseg::write_annotated_file(test_path, split.test);

  // Embedding text: every input query except those whose text landed in
  // the test split, so no model component ever sees test queries.
  std::unordered_set<std::string> test_texts;
  for (const qseg::AnnotatedQuery& aq : split.test) test_texts.insert(aq.query.joined());
  std::vector<qseg::QueryTokens> embed_log;
  for (const qseg::AnnotatedQuery& aq : corpus) {
    if (test_texts.contains(aq.query.joined())) continue;
    embed_log.push_back(aq.query);
  }
  qseg::write_raw_log(embed_path, embed_log);

  write_meta(opts.out_dir + "/prepare", "prepare", effective);
  std::cout << "train: " << split.train.size() << "  val: " << split.val.size()
            << "  test: " << split.test.size() << "  embedding log: " << embed_log.size()
            << "\n";
  return 0;
}

// --- train-embeddings ----------------------------------------------------

struct TrainEmbedOpts {
  std::string input;
  std::string output;
  std::string arch = "skipgram";
  qseg::EmbedTrainConfig config;

  void apply(const json& j) {
    from_key(j, "input", input);
    from_key(j, "output", output);
    from_key(j, "arch", arch);
    from_key(j, "dim", config.dimension);
    from_key(j, "window", config.window);
    from_key(j, "negative", config.negative_samples);
    from_key(j, "epochs", config.epochs);
    from_key(j, "learning-rate", config.initial_learning_rate);
    from_key(j, "min-count", config.min_count);
    from_key(j, "subsample", config.subsample_threshold);
  }
  void to_json(json& j) const {
    j["input"] = input;
    j["output"] = output;
    j["arch"] = arch;
    j["dim"] = config.dimension;
    j["window"] = config.window;
    j["negative"] = config.negative_samples;
    j["epochs"] = config.epochs;
    j["learning-rate"] = config.initial_learning_rate;
    j["min-count"] = config.min_count;
    j["subsample"] = config.subsample_threshold;
  }
};

int run_train_embeddings(const GlobalOpts& global, const TrainEmbedOpts& opts,
                         const json& effective) {
  require_opt(opts.input, "--input");
  require_opt(opts.output, "--output");
  qseg::EmbedTrainConfig config = opts.config;
  if (opts.arch == "skipgram") {
    config.architecture = qseg::EmbedArch::kSkipGram;
  } else if (opts.arch == "cbow") {
    config.architecture = qseg::EmbedArch::kCbow;
  } else {
    throw qseg::ConfigInvalid("unknown architecture: " + opts.arch);
  }
  config.seed = global.seed;
  config.workers = global.workers;

  const std::vector<qseg::QueryTokens> raw = qseg::read_raw_log(opts.input);
  qseg::EmbedTrainStats stats;
  const qseg::EmbeddingTable table = qseg::train_embeddings(raw, config, &stats);
  std::cout << "vocabulary: " << table.vocab_size() << " tokens\n";
  for (std::size_t e = 0; e < stats.epoch_losses.size(); ++e) {
    std::cout << "epoch " << (e + 1) << " mean loss: " << qseg::format_double(stats.epoch_losses[e])
              << "\n";
  }
  qseg::save_vectors(table, opts.output);
  write_meta(opts.output, "train-embeddings", effective);
  std::cout << "wrote " << table.vocab_size() << " x " << table.dimension << " vectors to "
            << opts.output << "\n";
  return 0;
}

// --- count-ngrams ----------------------------------------------------------

struct CountNgramsOpts {
  std::string input;
  std::string output;
  int max_n = 5;

  void apply(const json& j) {
    from_key(j, "input", input);
    from_key(j, "output", output);
    from_key(j, "max-n", max_n);
  }
  void to_json(json& j) const {
    j["input"] = input;
    j["output"] = output;
    j["max-n"] = max_n;
  }
};

int run_count_ngrams(const CountNgramsOpts& opts, const json& effective) {
  require_opt(opts.input, "--input");
  require_opt(opts.output, "--output");
  const std::vector<qseg::QueryTokens> raw = qseg::read_raw_log(opts.input);
  const qseg::NGramTable table = qseg::count_ngrams(raw, opts.max_n);
  qseg::save_ngram_table(table, opts.output);
  write_meta(opts.output, "count-ngrams", effective);
  std::cout << "counted " << table.counts.size() << " n-grams (n <= " << table.max_n << ") from "
            << raw.size() << " queries\n";
  return 0;
}

// --- train -------------------------------------------------------------

struct TrainOpts {
  std::string train;
  std::string val;
  std::string vectors;
  std::string output;
  std::string model_type = "gbdt";
  std::string feature_mode = "concat";
  // logistic
  int epochs = 20;
  int batch_size = 256;
  double learning_rate = 0.05;
  double l2 = 1e-4;
  // gbdt
  int depth = 4;
  int estimators = 500;
  double shrinkage = 0.1;
  int max_bins = 256;
  int min_samples_leaf = 1;

  void apply(const json& j) {
    from_key(j, "train", train);
    from_key(j, "val", val);
    from_key(j, "vectors", vectors);
    from_key(j, "output", output);
    from_key(j, "model-type", model_type);
    from_key(j, "feature-mode", feature_mode);
    from_key(j, "epochs", epochs);
    from_key(j, "batch-size", batch_size);
    from_key(j, "learning-rate", learning_rate);
    from_key(j, "l2", l2);
    from_key(j, "depth", depth);
    from_key(j, "estimators", estimators);
    from_key(j, "shrinkage", shrinkage);
    from_key(j, "max-bins", max_bins);
    from_key(j, "min-samples-leaf", min_samples_leaf);
  }
  void to_json(json& j) const {
    j["train"] = train;
    j["val"] = val;
    j["vectors"] = vectors;
    j["output"] = output;
    j["model-type"] = model_type;
    j["feature-mode"] = feature_mode;
    j["epochs"] = epochs;
    j["batch-size"] = batch_size;
    j["learning-rate"] = learning_rate;
    j["l2"] = l2;
    j["depth"] = depth;
    j["estimators"] = estimators;
    j["shrinkage"] = shrinkage;
    j["max-bins"] = max_bins;
    j["min-samples-leaf"] = min_samples_leaf;
  }
};

int run_train(const GlobalOpts& global, const TrainOpts& opts, const json& effective) {
  require_opt(opts.train, "--train");
  require_opt(opts.vectors, "--vectors");
  require_opt(opts.output, "--output");
  const std::vector<qseg::AnnotatedQuery> train_corpus = qseg::read_annotated_file(opts.train);
  const qseg::EmbeddingTable table = qseg::load_vectors(opts.vectors);
  const qseg::FeatureMode mode = qseg::parse_feature_mode(opts.feature_mode);
  const qseg::BoundaryDataset data = qseg::build_dataset(train_corpus, table, mode);
  std::cout << "training on " << data.features.size() << " boundary examples from "
            << train_corpus.size() << " queries\n";

  qseg::BoundaryModel model;
  model.mode = mode;
  model.dimension = table.dimension;
  if (opts.model_type == "logistic") {
    qseg::LogisticConfig config;
    config.epochs = opts.epochs;
    config.batch_size = opts.batch_size;
    config.learning_rate = opts.learning_rate;
    config.l2 = opts.l2;
    config.seed = global.seed;
    std::vector<double> losses;
    model.impl = qseg::train_logistic(data.features, data.labels, config, &losses);
    if (!losses.empty()) {
      std::cout << "log-loss: " << qseg::format_double(losses.front()) << " -> "
                << qseg::format_double(losses.back()) << "\n";
    }
  } else if (opts.model_type == "gbdt") {
    qseg::GbdtConfig config;
    config.max_depth = opts.depth;
    config.n_estimators = opts.estimators;
    config.shrinkage = opts.shrinkage;
    config.max_bins = opts.max_bins;
    config.min_samples_leaf = opts.min_samples_leaf;
    std::vector<double> losses;
    model.impl = qseg::train_gbdt(data.features, data.labels, config, &losses);
    if (!losses.empty()) {
      std::cout << "log-loss: " << qseg::format_double(losses.front()) << " -> "
                << qseg::format_double(losses.back()) << "\n";
    }
  } else {
    throw qseg::ConfigInvalid("unknown model type: " + opts.model_type);
  }

  json provenance;
  provenance["command"] = "train";
  provenance["config"] = effective;
  qseg::save_boundary_model(model, opts.output, provenance);
  std::cout << "wrote model to " << opts.output << "\n";

  const auto predictor = [&](const qseg::QueryTokens& q) {
    return qseg::segment_query(q, table, model);
  };
  std::vector<std::pair<std::string, qseg::EvalReport>> rows;
  rows.emplace_back("train", qseg::evaluate(predictor, train_corpus));
  if (!opts.val.empty()) {
    const std::vector<qseg::AnnotatedQuery> val_corpus = qseg::read_annotated_file(opts.val);
    rows.emplace_back("val", qseg::evaluate(predictor, val_corpus));
  }
  std::cout << qseg::report_table(rows);
  return 0;
}

// --- grid-search -----------------------------------------------------------

struct GridSearchOpts {
  std::string train;
  std::string val;
  std::string vectors;
  std::string output_csv;
  std::string output_model;
  std::string feature_mode = "concat";
  std::vector<int> depths{4, 6};
  std::vector<int> estimators{500, 800};
  std::vector<double> lrs{0.1};
  int max_bins = 256;
  int min_samples_leaf = 1;

  void apply(const json& j) {
    from_key(j, "train", train);
    from_key(j, "val", val);
    from_key(j, "vectors", vectors);
    from_key(j, "output-csv", output_csv);
    from_key(j, "output-model", output_model);
    from_key(j, "feature-mode", feature_mode);
    from_key(j, "depths", depths);
    from_key(j, "estimators", estimators);
    from_key(j, "learning-rates", lrs);
    from_key(j, "max-bins", max_bins);
    from_key(j, "min-samples-leaf", min_samples_leaf);
  }
  void to_json(json& j) const {
    j["train"] = train;
    j["val"] = val;
    j["vectors"] = vectors;
    j["output-csv"] = output_csv;
    j["output-model"] = output_model;
    j["feature-mode"] = feature_mode;
    j["depths"] = depths;
    j["estimators"] = estimators;
    j["learning-rates"] = lrs;
    j["max-bins"] = max_bins;
    j["min-samples-leaf"] = min_samples_leaf;
  }
};

int run_grid_search(const GlobalOpts& global, const GridSearchOpts& opts, const json& effective) {
  require_opt(opts.train, "--train");
  require_opt(opts.val, "--val");
  require_opt(opts.vectors, "--vectors");
  require_opt(opts.output_csv, "--output-csv");
  const std::vector<qseg::AnnotatedQuery> train_corpus = qseg::read_annotated_file(opts.train);
  const std::vector<qseg::AnnotatedQuery> val_corpus = qseg::read_annotated_file(opts.val);
  const qseg::EmbeddingTable table = qseg::load_vectors(opts.vectors);
  const qseg::FeatureMode mode = qseg::parse_feature_mode(opts.feature_mode);

  qseg::GridSearchSpec spec;
  spec.depth_candidates = opts.depths;
  spec.estimator_candidates = opts.estimators;
  spec.lr_candidates = opts.lrs;
  qseg::GbdtConfig base;
  base.max_bins = opts.max_bins;
  base.min_samples_leaf = opts.min_samples_leaf;

  const qseg::GridSearchResult result =
      qseg::grid_search(spec, train_corpus, val_corpus, table, mode, base, global.workers);
  write_text_file(opts.output_csv, qseg::grid_search_csv(result));
  write_meta(opts.output_csv, "grid-search", effective);

  const qseg::GridCell& best = result.best();
  std::cout << "best cell: depth=" << best.depth << " estimators=" << best.estimators
            << " learning_rate=" << best.learning_rate
            << " val_seg_accuracy=" << qseg::format_double(best.val_seg_accuracy) << "\n";

  if (!opts.output_model.empty()) {
    qseg::GbdtConfig config = base;
    config.max_depth = best.depth;
    config.n_estimators = best.estimators;
    config.shrinkage = best.learning_rate;
    const qseg::BoundaryDataset data = qseg::build_dataset(train_corpus, table, mode);
    qseg::BoundaryModel model;
    model.mode = mode;
    model.dimension = table.dimension;
    model.impl = qseg::train_gbdt(data.features, data.labels, config);
    json provenance;
    provenance["command"] = "grid-search";
    provenance["config"] = effective;
    qseg::save_boundary_model(model, opts.output_model, provenance);
    std::cout << "wrote best model to " << opts.output_model << "\n";
  }
  return 0;
}

// --- segment / evaluate ------------------------------------------------

qseg::WeightScheme parse_weight_scheme(const std::string& name) {
  if (name == "pow") return qseg::WeightScheme::kSegLengthPow;
  if (name == "freq") return qseg::WeightScheme::kFreqOnly;
  throw qseg::ConfigInvalid("unknown weight scheme: " + name);
}

struct SegmentOpts {
  std::string model;
  std::string ngram_table;
  std::string vectors;
  std::string weight_scheme = "pow";
  double threshold = 0.5;

  void apply(const json& j) {
    from_key(j, "model", model);
    from_key(j, "ngram-table", ngram_table);
    from_key(j, "vectors", vectors);
    from_key(j, "weight-scheme", weight_scheme);
    from_key(j, "threshold", threshold);
  }
  void to_json(json& j) const {
    j["model"] = model;
    j["ngram-table"] = ngram_table;
    j["vectors"] = vectors;
    j["weight-scheme"] = weight_scheme;
    j["threshold"] = threshold;
  }
};

int run_segment(const SegmentOpts& opts) {
  if (opts.model.empty() == opts.ngram_table.empty()) {
    throw qseg::ConfigInvalid("pass exactly one of --model or --ngram-table");
  }

  std::function<qseg::Segmentation(const qseg::QueryTokens&)> predictor;
  qseg::EmbeddingTable table;
  qseg::BoundaryModel model;
  qseg::NGramTable ngrams;
  if (!opts.model.empty()) {
    if (opts.vectors.empty()) {
      throw qseg::ConfigInvalid("--model requires --vectors");
    }
    table = qseg::load_vectors(opts.vectors);
    model = qseg::load_boundary_model(opts.model);
    if (model.dimension != table.dimension) {
      throw qseg::DimensionMismatch("model expects dimension " +
                                    std::to_string(model.dimension) + " but vectors have " +
                                    std::to_string(table.dimension));
    }
    predictor = [&table, &model, threshold = opts.threshold](const qseg::QueryTokens& q) {
      return qseg::segment_query(q, table, model, threshold);
    };
  } else {
    ngrams = qseg::load_ngram_table(opts.ngram_table);
    predictor = [&ngrams, scheme = parse_weight_scheme(opts.weight_scheme)](
                    const qseg::QueryTokens& q) { return qseg::segment_naive(q, ngrams, scheme); };
  }

  std::string line;
  while (std::getline(std::cin, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (qseg::is_blank_line(line)) continue;
    const qseg::QueryTokens query = qseg::tokenize(line);
    std::cout << qseg::format_segmented(query, predictor(query)) << "\n";
  }
  return 0;
}

struct EvaluateOpts {
  std::string test;
  std::string model;
  std::string ngram_table;
  std::string baseline;
  std::string vectors;
  std::string output_json;
  std::string weight_scheme = "pow";
  double threshold = 0.5;
  bool detail = false;

  void apply(const json& j) {
    from_key(j, "test", test);
    from_key(j, "model", model);
    from_key(j, "ngram-table", ngram_table);
    from_key(j, "baseline", baseline);
    from_key(j, "vectors", vectors);
    from_key(j, "output-json", output_json);
    from_key(j, "weight-scheme", weight_scheme);
    from_key(j, "threshold", threshold);
    from_key(j, "detail", detail);
  }
  void to_json(json& j) const {
    j["test"] = test;
    j["model"] = model;
    j["ngram-table"] = ngram_table;
    j["baseline"] = baseline;
    j["vectors"] = vectors;
    j["output-json"] = output_json;
    j["weight-scheme"] = weight_scheme;
    j["threshold"] = threshold;
    j["detail"] = detail;
  }
};

int run_evaluate(const EvaluateOpts& opts, const json& effective) {
  require_opt(opts.test, "--test");
  const int sources = static_cast<int>(!opts.model.empty()) +
                      static_cast<int>(!opts.ngram_table.empty()) +
                      static_cast<int>(!opts.baseline.empty());
  if (sources != 1) {
    throw qseg::ConfigInvalid("pass exactly one of --model, --ngram-table, --baseline");
  }
  const std::vector<qseg::AnnotatedQuery> test_corpus = qseg::read_annotated_file(opts.test);

  std::function<qseg::Segmentation(const qseg::QueryTokens&)> predictor;
  std::string system;
  qseg::EmbeddingTable table;
  qseg::BoundaryModel model;
  qseg::NGramTable ngrams;
  if (!opts.model.empty()) {
    if (opts.vectors.empty()) {
      throw qseg::ConfigInvalid("--model requires --vectors");
    }
    table = qseg::load_vectors(opts.vectors);
    model = qseg::load_boundary_model(opts.model);
    if (model.dimension != table.dimension) {
      throw qseg::DimensionMismatch("model expects dimension " +
                                    std::to_string(model.dimension) + " but vectors have " +
                                    std::to_string(table.dimension));
    }
    system = std::holds_alternative<qseg::GbdtModel>(model.impl) ? "gbdt" : "logistic";
    predictor = [&table, &model, threshold = opts.threshold](const qseg::QueryTokens& q) {
      return qseg::segment_query(q, table, model, threshold);
    };
  } else if (!opts.ngram_table.empty()) {
    ngrams = qseg::load_ngram_table(opts.ngram_table);
    system = "naive-ngram";
    predictor = [&ngrams, scheme = parse_weight_scheme(opts.weight_scheme)](
                    const qseg::QueryTokens& q) { return qseg::segment_naive(q, ngrams, scheme); };
  } else if (opts.baseline == "all-break" || opts.baseline == "all-no-break") {
    const bool value = opts.baseline == "all-break";
    system = opts.baseline;
    predictor = [value](const qseg::QueryTokens& q) {
      qseg::Segmentation seg;
      if (q.size() > 1) seg.breaks.assign(q.size() - 1, value);
      return seg;
    };
  } else {
    throw qseg::ConfigInvalid("unknown baseline: " + opts.baseline);
  }

  const qseg::EvalReport report = qseg::evaluate(predictor, test_corpus, opts.detail);

  json j = qseg::report_to_json(report);
  j["system"] = system;
  j["config"] = effective;
  const std::string serialized = j.dump(2) + "\n";
  if (!opts.output_json.empty()) {
    std::cout << qseg::report_table({{system, report}});
    write_text_file(opts.output_json, serialized);
  } else {
    // Without --output-json, stdout carries the JSON document itself, so the
    // human-readable summary moves to stderr to keep the stream pipeable.
    std::cerr << qseg::report_table({{system, report}});
    std::cout << serialized;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"query segmentation toolkit"};
  app.require_subcommand(1);

  GlobalOpts global;
  app.add_option("--seed", global.seed, "master random seed (all randomness derives from it)");
  app.add_option("--workers", global.workers, "worker threads (1 = fully deterministic)");
  app.add_option("--config", global.config_path,
                 "JSON file of option values; explicit flags override it");
  app.add_flag("--dump-config", global.dump_config,
               "print the effective configuration as JSON and exit");

  SynthOpts synth;
  CLI::App* synth_cmd = app.add_subcommand("synth", "generate a synthetic annotated corpus");
  synth_cmd->add_option("--out-annotated", synth.out_annotated, "annotated corpus output path (required)");
  synth_cmd->add_option("--out-raw", synth.out_raw, "raw query log output path (required)");
  synth_cmd->add_option("--vocab-size", synth.config.vocab_size, "vocabulary size");
  synth_cmd->add_option("--phrases", synth.config.phrase_count, "planted phrase count");
  synth_cmd->add_option("--phrase-min-len", synth.config.phrase_min_len, "shortest phrase");
  synth_cmd->add_option("--phrase-max-len", synth.config.phrase_max_len, "longest phrase");
  synth_cmd->add_option("--min-segments", synth.config.min_segments, "fewest segments per query");
  synth_cmd->add_option("--max-segments", synth.config.max_segments, "most segments per query");
  synth_cmd->add_option("--queries", synth.config.query_count, "number of queries");
  synth_cmd->add_option("--zipf-exponent", synth.config.zipf_exponent, "token frequency skew");
  synth_cmd->add_option("--noise-rate", synth.config.noise_rate,
                        "chance a query's gold flips one boundary");
  synth_cmd->add_option("--phrase-prob", synth.config.phrase_segment_prob,
                        "chance a segment is a phrase rather than a single token");

  PrepareOpts prepare;
  CLI::App* prepare_cmd =
      app.add_subcommand("prepare", "aggregate annotations and split into train/val/test");
  prepare_cmd->add_option("--input", prepare.input, "annotated corpus path (required)");
  prepare_cmd->add_option("--out-dir", prepare.out_dir, "output directory (required)");
  prepare_cmd->add_option("--train-frac", prepare.train_frac, "train fraction");
  prepare_cmd->add_option("--val-frac", prepare.val_frac, "validation fraction");
  prepare_cmd->add_option("--test-frac", prepare.test_frac, "test fraction");
  prepare_cmd->add_option("--min-agree", prepare.min_agree,
                          "annotators that must agree for a query to be labeled");

  TrainEmbedOpts embed;
  CLI::App* embed_cmd =
      app.add_subcommand("train-embeddings", "train word vectors on a raw query log");
  embed_cmd->add_option("--input", embed.input, "raw query log path (required)");
  embed_cmd->add_option("--output", embed.output, "vector file output path (required)");
  embed_cmd->add_option("--arch", embed.arch, "architecture: skipgram or cbow");
  embed_cmd->add_option("--dim", embed.config.dimension, "vector dimension");
  embed_cmd->add_option("--window", embed.config.window, "maximum context window");
  embed_cmd->add_option("--negative", embed.config.negative_samples, "negative samples per pair");
  embed_cmd->add_option("--epochs", embed.config.epochs, "training epochs");
  embed_cmd->add_option("--learning-rate", embed.config.initial_learning_rate,
                        "initial learning rate");
  embed_cmd->add_option("--min-count", embed.config.min_count, "minimum token count");
  embed_cmd->add_option("--subsample", embed.config.subsample_threshold,
                        "frequency subsampling threshold (0 disables)");

  CountNgramsOpts ngrams;
  CLI::App* ngrams_cmd = app.add_subcommand("count-ngrams", "count n-grams in a raw query log");
  ngrams_cmd->add_option("--input", ngrams.input, "raw query log path (required)");
  ngrams_cmd->add_option("--output", ngrams.output, "n-gram table output path (required)");
  ngrams_cmd->add_option("--max-n", ngrams.max_n, "longest n-gram to count");

  TrainOpts train;
  CLI::App* train_cmd = app.add_subcommand("train", "train a boundary classifier");
  train_cmd->add_option("--train", train.train, "gold-annotated training file (required)");
  train_cmd->add_option("--val", train.val, "gold-annotated validation file");
  train_cmd->add_option("--vectors", train.vectors, "vector file (required)");
  train_cmd->add_option("--output", train.output, "model output path (required)");
  train_cmd->add_option("--model-type", train.model_type, "logistic or gbdt");
  train_cmd->add_option("--feature-mode", train.feature_mode, "concat or average");
  train_cmd->add_option("--epochs", train.epochs, "logistic: training epochs");
  train_cmd->add_option("--batch-size", train.batch_size, "logistic: mini-batch size");
  train_cmd->add_option("--learning-rate", train.learning_rate, "logistic: learning rate");
  train_cmd->add_option("--l2", train.l2, "logistic: L2 penalty");
  train_cmd->add_option("--depth", train.depth, "gbdt: maximum tree depth");
  train_cmd->add_option("--estimators", train.estimators, "gbdt: number of trees");
  train_cmd->add_option("--shrinkage", train.shrinkage, "gbdt: per-tree shrinkage");
  train_cmd->add_option("--max-bins", train.max_bins, "gbdt: histogram bins per feature");
  train_cmd->add_option("--min-samples-leaf", train.min_samples_leaf, "gbdt: smallest leaf");

  GridSearchOpts grid;
  CLI::App* grid_cmd =
      app.add_subcommand("grid-search", "search GBDT hyperparameters on a validation split");
  grid_cmd->add_option("--train", grid.train, "gold-annotated training file (required)");
  grid_cmd->add_option("--val", grid.val, "gold-annotated validation file (required)");
  grid_cmd->add_option("--vectors", grid.vectors, "vector file (required)");
  grid_cmd->add_option("--output-csv", grid.output_csv, "per-cell results CSV (required)");
  grid_cmd->add_option("--output-model", grid.output_model,
                       "retrain the best cell and save it here");
  grid_cmd->add_option("--feature-mode", grid.feature_mode, "concat or average");
  grid_cmd->add_option("--depths", grid.depths, "depth candidates")->delimiter(',');
  grid_cmd->add_option("--estimators", grid.estimators, "estimator candidates")->delimiter(',');
  grid_cmd->add_option("--learning-rates", grid.lrs, "shrinkage candidates")->delimiter(',');
  grid_cmd->add_option("--max-bins", grid.max_bins, "histogram bins per feature");
  grid_cmd->add_option("--min-samples-leaf", grid.min_samples_leaf, "smallest leaf");

  SegmentOpts segment;
  CLI::App* segment_cmd = app.add_subcommand(
      "segment", "segment queries from standard input to standard output (pipe format)");
  segment_cmd->add_option("--model", segment.model, "boundary model path");
  segment_cmd->add_option("--ngram-table", segment.ngram_table, "n-gram table path");
  segment_cmd->add_option("--vectors", segment.vectors, "vector file (required with --model)");
  segment_cmd->add_option("--weight-scheme", segment.weight_scheme,
                          "n-gram scoring: pow or freq");
  segment_cmd->add_option("--threshold", segment.threshold, "break probability threshold");

  EvaluateOpts evaluate;
  CLI::App* evaluate_cmd =
      app.add_subcommand("evaluate", "score a model or baseline against gold segmentations");
  evaluate_cmd->add_option("--test", evaluate.test, "gold-annotated test file (required)");
  evaluate_cmd->add_option("--model", evaluate.model, "boundary model path");
  evaluate_cmd->add_option("--ngram-table", evaluate.ngram_table, "n-gram table path");
  evaluate_cmd->add_option("--baseline", evaluate.baseline, "all-break or all-no-break");
  evaluate_cmd->add_option("--vectors", evaluate.vectors, "vector file (required with --model)");
  evaluate_cmd->add_option("--output-json", evaluate.output_json,
                           "write the JSON report here instead of standard output");
  evaluate_cmd->add_option("--weight-scheme", evaluate.weight_scheme,
                           "n-gram scoring: pow or freq");
  evaluate_cmd->add_option("--threshold", evaluate.threshold, "break probability threshold");
  evaluate_cmd->add_flag("--detail", evaluate.detail, "include per-query rows in the report");

  // Let global flags (--seed, --workers, ...) appear after the subcommand.
  for (CLI::App* sub : app.get_subcommands([](const CLI::App*) { return true; })) {
    sub->fallthrough();
  }

  // Config-file values are applied to the bound variables before parsing,
  // so anything given explicitly on the command line wins.  Only the active
  // subcommand's options are filled: different subcommands reuse key names
  // with different shapes (train's "estimators" is a number, grid-search's
  // is an array), so a dumped config must never leak across subcommands.
  std::string active_sub;
  bool skip_value = false;
  for (int i = 1; i < argc; ++i) {
    const std::string tok = argv[i];
    if (skip_value) {
      skip_value = false;
      continue;
    }
    if (tok == "--config" && i + 1 < argc) global.config_path = argv[i + 1];
    if (tok.rfind("--", 0) == 0) {
      skip_value = tok.find('=') == std::string::npos && tok != "--dump-config";
      continue;
    }
    if (active_sub.empty() && app.get_subcommand_no_throw(tok) != nullptr) active_sub = tok;
  }
  try {
    if (!global.config_path.empty()) {
      const json file = read_json_file(global.config_path);
      global.apply(file);
      if (active_sub == "synth") synth.apply(file);
      if (active_sub == "prepare") prepare.apply(file);
      if (active_sub == "train-embeddings") embed.apply(file);
      if (active_sub == "count-ngrams") ngrams.apply(file);
      if (active_sub == "train") train.apply(file);
      if (active_sub == "grid-search") grid.apply(file);
      if (active_sub == "segment") segment.apply(file);
      if (active_sub == "evaluate") evaluate.apply(file);
    }
  } catch (const qseg::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const json::exception& e) {
    std::cerr << "error: bad config file: " << e.what() << "\n";
    return 2;
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  try {
    json effective;
    global.to_json(effective);
    if (app.got_subcommand(synth_cmd)) {
      synth.to_json(effective);
      if (global.dump_config) {
        std::cout << effective.dump(2) << "\n";
        return 0;
      }
      return run_synth(global, synth, effective);
    }
    if (app.got_subcommand(prepare_cmd)) {
      prepare.to_json(effective);
      if (global.dump_config) {
        std::cout << effective.dump(2) << "\n";
        return 0;
      }
      return run_prepare(global, prepare, effective);
    }
    if (app.got_subcommand(embed_cmd)) {
      embed.to_json(effective);
      if (global.dump_config) {
        std::cout << effective.dump(2) << "\n";
        return 0;
      }
      return run_train_embeddings(global, embed, effective);
    }
    if (app.got_subcommand(ngrams_cmd)) {
      ngrams.to_json(effective);
      if (global.dump_config) {
        std::cout << effective.dump(2) << "\n";
        return 0;
      }
      return run_count_ngrams(ngrams, effective);
    }
    if (app.got_subcommand(train_cmd)) {
      train.to_json(effective);
      if (global.dump_config) {
        std::cout << effective.dump(2) << "\n";
        return 0;
      }
      return run_train(global, train, effective);
    }
    if (app.got_subcommand(grid_cmd)) {
      grid.to_json(effective);
      if (global.dump_config) {
        std::cout << effective.dump(2) << "\n";
        return 0;
      }
      return run_grid_search(global, grid, effective);
    }
    if (app.got_subcommand(segment_cmd)) {
      segment.to_json(effective);
      if (global.dump_config) {
        std::cout << effective.dump(2) << "\n";
        return 0;
      }
      return run_segment(segment);
    }
    if (app.got_subcommand(evaluate_cmd)) {
      evaluate.to_json(effective);
      if (global.dump_config) {
        std::cout << effective.dump(2) << "\n";
        return 0;
      }
      return run_evaluate(evaluate, effective);
    }
    std::cerr << "error: no subcommand\n";
    return 1;
  } catch (const qseg::ConfigInvalid& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const qseg::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 3;
  }
}
