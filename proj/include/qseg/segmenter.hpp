#pragma once

// Boundary classification: turns adjacent token pairs into feature vectors,
// trains logistic or GBDT models on gold breaks, and applies them to make
// the N-1 independent break decisions of a query.

#include <cstdint>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <variant>
#include <vector>

#include <json.hpp>

#include "qseg/common.hpp"
#include "qseg/embeddings.hpp"
#include "qseg/gbdt.hpp"
#include "qseg/logistic.hpp"
#include "qseg/query.hpp"

namespace qseg {

enum class FeatureMode { kConcat, kAverage };

inline std::string feature_mode_name(FeatureMode mode) {
  return mode == FeatureMode::kConcat ? "concat" : "average";
}

inline FeatureMode parse_feature_mode(const std::string& name) {
  if (name == "concat") return FeatureMode::kConcat;
  if (name == "average") return FeatureMode::kAverage;
  throw ConfigInvalid("unknown feature mode: " + name);
}

// One feature per adjacent token pair: [v(W_i) ++ v(W_i+1)] in concat mode,
// (v(W_i)+v(W_i+1))/2 in average mode. OOV tokens are zero vectors.
inline std::vector<std::vector<double>> build_features(const QueryTokens& query,
                                                       const EmbeddingTable& table,
                                                       FeatureMode mode) {
  std::vector<std::vector<double>> features;
  if (query.size() < 2) return features;
  features.reserve(query.size() - 1);
  const std::size_t d = static_cast<std::size_t>(table.dimension);
  std::vector<double> left = table.lookup(query.tokens[0]);
  for (std::size_t i = 0; i + 1 < query.size(); ++i) {
    std::vector<double> right = table.lookup(query.tokens[i + 1]);
    std::vector<double> f;
    if (mode == FeatureMode::kConcat) {
      f.reserve(2 * d);
      f.insert(f.end(), left.begin(), left.end());
      f.insert(f.end(), right.begin(), right.end());
    } else {
      f.resize(d);
      for (std::size_t j = 0; j < d; ++j) f[j] = (left[j] + right[j]) / 2.0;
    }
    features.push_back(std::move(f));
    left = std::move(right);
  }
  return features;
}

// Gold segmentation of an annotated query: the explicit gold if present,
// otherwise the single annotation.
inline const Segmentation& effective_gold(const AnnotatedQuery& aq) {
  if (aq.gold.has_value()) return *aq.gold;
  if (aq.annotations.size() == 1) return aq.annotations.front();
  throw ConfigInvalid("query '" + aq.query.joined() + "' has no unambiguous gold segmentation");
}

struct BoundaryDataset {
  std::vector<std::vector<double>> features;
  std::vector<int> labels;
};

inline BoundaryDataset build_dataset(const std::vector<AnnotatedQuery>& corpus,
                                     const EmbeddingTable& table, FeatureMode mode) {
  BoundaryDataset data;
  for (const AnnotatedQuery& aq : corpus) {
    const Segmentation& gold = effective_gold(aq);
    std::vector<std::vector<double>> features = build_features(aq.query, table, mode);
    for (std::size_t i = 0; i < features.size(); ++i) {
      data.features.push_back(std::move(features[i]));
      data.labels.push_back(gold.breaks[i] ? 1 : 0);
    }
  }
  return data;
}

struct BoundaryModel {
  FeatureMode mode = FeatureMode::kConcat;
  int dimension = 0;  // embedding dimension the model expects
  std::variant<LogisticModel, GbdtModel> impl;

  int feature_length() const {
    return mode == FeatureMode::kConcat ? 2 * dimension : dimension;
  }
};

inline double predict_boundary(const BoundaryModel& model, std::span<const double> feature) {
  if (static_cast<int>(feature.size()) != model.feature_length()) {
    throw DimensionMismatch("feature length " + std::to_string(feature.size()) +
                            " does not match model's " +
                            std::to_string(model.feature_length()));
  }
  if (const auto* logistic = std::get_if<LogisticModel>(&model.impl)) {
    return logistic->predict(feature);
  }
  return std::get<GbdtModel>(model.impl).predict(feature);
}

// breaks[i] = (P(break after token i) >= threshold); decisions are
// independent per boundary.
inline Segmentation segment_query(const QueryTokens& query, const EmbeddingTable& table,
                                  const BoundaryModel& model, double threshold = 0.5) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw ConfigInvalid("threshold must lie strictly between 0 and 1");
  }
  Segmentation seg;
  if (query.size() < 2) return seg;
  const std::vector<std::vector<double>> features = build_features(query, table, model.mode);
  seg.breaks.reserve(features.size());
  for (const auto& f : features) {
    seg.breaks.push_back(predict_boundary(model, f) >= threshold);
  }
  return seg;
}

// --- Persistence -----------------------------------------------------------
// Logistic models are a single-line JSON document. GBDT models are a JSON
// header line followed by packed little-endian tree data. Both carry a
// "format" field that load_boundary_model dispatches on.

namespace detail {

template <typename T>
void write_raw(std::ostream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
T read_raw(std::istream& in, const std::string& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw ParseError(path + ": truncated model data");
  return value;
}

}  // namespace detail

inline void save_boundary_model(const BoundaryModel& model, const std::string& path,
                                const nlohmann::json& provenance = nlohmann::json::object()) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot write model file: " + path);
  nlohmann::json header;
  header["version"] = 1;
  header["feature_mode"] = feature_mode_name(model.mode);
  header["dimension"] = model.dimension;
  if (!provenance.empty()) header["provenance"] = provenance;

  if (const auto* logistic = std::get_if<LogisticModel>(&model.impl)) {
    header["format"] = "qseg-logistic";
    header["bias"] = logistic->bias;
    header["weights"] = logistic->weights;
    out << header.dump() << '\n';
    return;
  }
  const GbdtModel& gbdt = std::get<GbdtModel>(model.impl);
  header["format"] = "qseg-gbdt";
  header["n_features"] = gbdt.n_features;
  header["max_depth"] = gbdt.max_depth;
  header["shrinkage"] = gbdt.shrinkage;
  header["prior_logodds"] = gbdt.prior_logodds;
  header["n_trees"] = gbdt.trees.size();
  out << header.dump() << '\n';
  for (const GbdtTree& tree : gbdt.trees) {
    detail::write_raw(out, static_cast<std::uint32_t>(tree.nodes.size()));
    for (const GbdtNode& node : tree.nodes) {
      detail::write_raw(out, node.feature);
      detail::write_raw(out, node.left);
      detail::write_raw(out, node.right);
      detail::write_raw(out, node.threshold);
      detail::write_raw(out, node.value);
    }
  }
}

inline BoundaryModel load_boundary_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open model file: " + path);
  std::string header_line;
  if (!std::getline(in, header_line)) throw ParseError(path + ": empty model file");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_line);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": bad model header: " + e.what());
  }
  if (!header.is_object() || !header.contains("format")) {
    throw ParseError(path + ": model header lacks a format field");
  }
  const std::string format = header.at("format").get<std::string>();

  BoundaryModel model;
  try {
    model.mode = parse_feature_mode(header.at("feature_mode").get<std::string>());
    model.dimension = header.at("dimension").get<int>();
    if (format == "qseg-logistic") {
      LogisticModel logistic;
      logistic.bias = header.at("bias").get<double>();
      logistic.weights = header.at("weights").get<std::vector<double>>();
      model.impl = std::move(logistic);
      return model;
    }
    if (format == "qseg-gbdt") {
      GbdtModel gbdt;
      gbdt.n_features = header.at("n_features").get<int>();
      gbdt.max_depth = header.at("max_depth").get<int>();
      gbdt.shrinkage = header.at("shrinkage").get<double>();
      gbdt.prior_logodds = header.at("prior_logodds").get<double>();
      const std::size_t n_trees = header.at("n_trees").get<std::size_t>();
      gbdt.trees.reserve(n_trees);
      for (std::size_t t = 0; t < n_trees; ++t) {
        const std::uint32_t n_nodes = detail::read_raw<std::uint32_t>(in, path);
        GbdtTree tree;
        tree.nodes.reserve(n_nodes);
        for (std::uint32_t a = 0; a < n_nodes; ++a) {
          GbdtNode node;
          node.feature = detail::read_raw<std::int32_t>(in, path);
          node.left = detail::read_raw<std::int32_t>(in, path);
          node.right = detail::read_raw<std::int32_t>(in, path);
          node.threshold = detail::read_raw<double>(in, path);
          node.value = detail::read_raw<double>(in, path);
          tree.nodes.push_back(node);
        }
        gbdt.trees.push_back(std::move(tree));
      }
      model.impl = std::move(gbdt);
      return model;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": bad model header: " + e.what());
  }
  throw ParseError(path + ": unknown model format '" + format + "'");
}

// --- Grid search ------------------------------------------------------------

struct GridSearchSpec {
  std::vector<int> depth_candidates{4, 6};
  std::vector<int> estimator_candidates{500, 800};
  std::vector<double> lr_candidates{0.1};

  void validate() const {
    if (depth_candidates.empty() || estimator_candidates.empty() || lr_candidates.empty()) {
      throw ConfigInvalid("grid search candidate lists must be non-empty");
    }
  }
};

struct GridCell {
  int depth = 0;
  int estimators = 0;
  double learning_rate = 0.0;
  double train_seg_accuracy = 0.0;
  double val_seg_accuracy = 0.0;
  double train_query_accuracy = 0.0;
  double val_query_accuracy = 0.0;
};

struct GridSearchResult {
  std::vector<GridCell> cells;  // row-major over depth x estimators x lr
  std::size_t best_index = 0;

  const GridCell& best() const { return cells[best_index]; }
};

namespace detail {

struct SegAccuracyCounts {
  std::int64_t boundaries = 0;
  std::int64_t boundary_hits = 0;
  std::int64_t queries = 0;
  std::int64_t query_hits = 0;
};

inline SegAccuracyCounts score_model(const BoundaryModel& model, const EmbeddingTable& table,
                                     const std::vector<AnnotatedQuery>& corpus) {
  SegAccuracyCounts counts;
  for (const AnnotatedQuery& aq : corpus) {
    const Segmentation& gold = effective_gold(aq);
    const Segmentation pred = segment_query(aq.query, table, model);
    bool all = true;
    for (std::size_t i = 0; i < gold.size(); ++i) {
      const bool hit = gold.breaks[i] == pred.breaks[i];
      counts.boundaries += 1;
      counts.boundary_hits += hit ? 1 : 0;
      all = all && hit;
    }
    counts.queries += 1;
    counts.query_hits += all ? 1 : 0;
  }
  return counts;
}

}  // namespace detail

// Trains one GBDT per grid cell and picks the best validation segmentation
// accuracy; ties prefer fewer estimators, then smaller depth, then smaller
// learning rate. Cells run on up to `workers` threads; results are
// positionally ordered so the outcome is independent of scheduling.
inline GridSearchResult grid_search(const GridSearchSpec& spec,
                                    const std::vector<AnnotatedQuery>& train,
                                    const std::vector<AnnotatedQuery>& val,
                                    const EmbeddingTable& table, FeatureMode mode,
                                    const GbdtConfig& base_config, int workers = 1) {
  spec.validate();
  if (train.empty() || val.empty()) throw ConfigInvalid("grid search needs non-empty splits");
  if (workers < 1) throw ConfigInvalid("workers must be >= 1");

  const BoundaryDataset train_data = build_dataset(train, table, mode);

  GridSearchResult result;
  for (const int depth : spec.depth_candidates) {
    for (const int estimators : spec.estimator_candidates) {
      for (const double lr : spec.lr_candidates) {
        GridCell cell;
        cell.depth = depth;
        cell.estimators = estimators;
        cell.learning_rate = lr;
        result.cells.push_back(cell);
      }
    }
  }

  const auto run_cell = [&](GridCell& cell) {
    GbdtConfig config = base_config;
    config.max_depth = cell.depth;
    config.n_estimators = cell.estimators;
    config.shrinkage = cell.learning_rate;
    BoundaryModel model;
    model.mode = mode;
    model.dimension = table.dimension;
    model.impl = train_gbdt(train_data.features, train_data.labels, config);
    const detail::SegAccuracyCounts on_train = detail::score_model(model, table, train);
    const detail::SegAccuracyCounts on_val = detail::score_model(model, table, val);
    cell.train_seg_accuracy =
        on_train.boundaries == 0
            ? 1.0
            : static_cast<double>(on_train.boundary_hits) / static_cast<double>(on_train.boundaries);
    cell.val_seg_accuracy =
        on_val.boundaries == 0
            ? 1.0
            : static_cast<double>(on_val.boundary_hits) / static_cast<double>(on_val.boundaries);
    cell.train_query_accuracy =
        static_cast<double>(on_train.query_hits) / static_cast<double>(on_train.queries);
    cell.val_query_accuracy =
        static_cast<double>(on_val.query_hits) / static_cast<double>(on_val.queries);
  };

  if (workers == 1 || result.cells.size() == 1) {
    for (GridCell& cell : result.cells) run_cell(cell);
  } else {
    std::vector<std::thread> threads;
    const int n_threads = std::min<int>(workers, static_cast<int>(result.cells.size()));
    for (int w = 0; w < n_threads; ++w) {
      threads.emplace_back([&, w] {
        for (std::size_t c = static_cast<std::size_t>(w); c < result.cells.size();
             c += static_cast<std::size_t>(n_threads)) {
          run_cell(result.cells[c]);
        }
      });
    }
    for (std::thread& th : threads) th.join();
  }

  for (std::size_t c = 1; c < result.cells.size(); ++c) {
    const GridCell& a = result.cells[c];
    const GridCell& b = result.cells[result.best_index];
    const auto key = [](const GridCell& g) {
      return std::make_tuple(-g.val_seg_accuracy, g.estimators, g.depth, g.learning_rate);
    };
    if (key(a) < key(b)) result.best_index = c;
  }
  return result;
}

inline std::string grid_search_csv(const GridSearchResult& result) {
  std::string csv =
      "depth,estimators,learning_rate,train_seg_accuracy,train_query_accuracy,"
      "val_seg_accuracy,val_query_accuracy,selected\n";
  for (std::size_t c = 0; c < result.cells.size(); ++c) {
    const GridCell& cell = result.cells[c];
    csv += std::to_string(cell.depth);
    csv += ',';
    csv += std::to_string(cell.estimators);
    csv += ',';
    csv += format_double(cell.learning_rate);
    csv += ',';
    csv += format_double(cell.train_seg_accuracy);
    csv += ',';
    csv += format_double(cell.train_query_accuracy);
    csv += ',';
    csv += format_double(cell.val_seg_accuracy);
    csv += ',';
    csv += format_double(cell.val_query_accuracy);
    csv += ',';
    csv += c == result.best_index ? '1' : '0';
    csv += '\n';
  }
  return csv;
}

}  // namespace qseg
