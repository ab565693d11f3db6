#pragma once

// Gradient-boosted decision trees for binary classification with logistic
// loss. Trees are grown level-wise on quantile-binned features; leaves take
// a Newton step. Training is deterministic: no row or feature subsampling.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "qseg/common.hpp"
#include "qseg/embeddings.hpp"  // sigmoid, log_sigmoid

namespace qseg {

struct GbdtConfig {
  int n_estimators = 500;
  int max_depth = 4;
  double shrinkage = 0.1;
  int max_bins = 256;
  int min_samples_leaf = 1;

  void validate() const {
    if (n_estimators < 0) throw ConfigInvalid("n_estimators must be >= 0");
    if (max_depth < 1) throw ConfigInvalid("max_depth must be >= 1");
    if (shrinkage <= 0) throw ConfigInvalid("shrinkage must be > 0");
    if (max_bins < 2 || max_bins > 256) throw ConfigInvalid("max_bins must be in [2,256]");
    if (min_samples_leaf < 1) throw ConfigInvalid("min_samples_leaf must be >= 1");
  }
};

// Axis-aligned split node; feature < 0 marks a leaf. Rows with
// x[feature] < threshold go left.
struct GbdtNode {
  std::int32_t feature = -1;
  double threshold = 0.0;
  double value = 0.0;
  std::int32_t left = -1;
  std::int32_t right = -1;
};

struct GbdtTree {
  std::vector<GbdtNode> nodes;

  double predict(std::span<const double> x) const {
    std::int32_t at = 0;
    while (nodes[static_cast<std::size_t>(at)].feature >= 0) {
      const GbdtNode& n = nodes[static_cast<std::size_t>(at)];
      at = x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(at)].value;
  }
};

struct GbdtModel {
  int n_features = 0;
  int max_depth = 0;
  double shrinkage = 0.1;
  double prior_logodds = 0.0;
  std::vector<GbdtTree> trees;

  double decision(std::span<const double> x) const {
    if (static_cast<int>(x.size()) != n_features) {
      throw DimensionMismatch("feature length " + std::to_string(x.size()) +
                              " does not match model's " + std::to_string(n_features));
    }
    double z = prior_logodds;
    for (const GbdtTree& t : trees) z += shrinkage * t.predict(x);
    return z;
  }

  double predict(std::span<const double> x) const { return sigmoid(decision(x)); }
};

namespace detail {

// Quantile cut points for one feature; bin b holds x with
// cuts[b-1] <= x < cuts[b], so "bin <= b" is exactly "x < cuts[b]".
inline std::vector<double> quantile_cuts(std::vector<double> values, int max_bins) {
  std::sort(values.begin(), values.end());
  values.erase(std::unique(values.begin(), values.end()), values.end());
  const std::size_t distinct = values.size();
  std::vector<double> cuts;
  if (distinct <= 1) return cuts;
  if (distinct <= static_cast<std::size_t>(max_bins)) {
    cuts.reserve(distinct - 1);
    for (std::size_t i = 0; i + 1 < distinct; ++i) {
      cuts.push_back(values[i] + (values[i + 1] - values[i]) / 2.0);
    }
    return cuts;
  }
  for (int b = 1; b < max_bins; ++b) {
    const std::size_t at = distinct * static_cast<std::size_t>(b) /
                           static_cast<std::size_t>(max_bins);
    const double cut = values[at - 1] + (values[at] - values[at - 1]) / 2.0;
    if (cuts.empty() || cut > cuts.back()) cuts.push_back(cut);
  }
  return cuts;
}

inline std::uint8_t bin_of(double x, const std::vector<double>& cuts) {
  const auto it = std::upper_bound(cuts.begin(), cuts.end(), x);
  return static_cast<std::uint8_t>(it - cuts.begin());
}

struct HistCell {
  double grad = 0.0;
  double hess = 0.0;
  std::int64_t count = 0;
};

}  // namespace detail

// Boosting on logistic loss. Each tree fits the per-row gradient p - y with
// variance-gain splits; leaf value is the Newton step -G/(H+eps) clamped to
// [-15,15]. When iteration_losses is given it receives the mean training
// log-loss after each tree (non-increasing for modest shrinkage).
inline GbdtModel train_gbdt(const std::vector<std::vector<double>>& features,
                            const std::vector<int>& labels, const GbdtConfig& config,
                            std::vector<double>* iteration_losses = nullptr) {
  config.validate();
  if (features.empty()) throw ConfigInvalid("empty training set");
  if (features.size() != labels.size()) {
    throw LengthMismatch("features and labels differ in size");
  }
  const std::size_t n = features.size();
  const std::size_t d = features.front().size();
  for (const auto& x : features) {
    if (x.size() != d) throw DimensionMismatch("inconsistent feature dimension");
  }
  std::int64_t positives = 0;
  for (const int y : labels) positives += y;
  if (positives == 0 || positives == static_cast<std::int64_t>(n)) {
    throw DegenerateLabels("training labels are all one class");
  }

  GbdtModel model;
  model.n_features = static_cast<int>(d);
  model.max_depth = config.max_depth;
  model.shrinkage = config.shrinkage;
  const double prior = static_cast<double>(positives) / static_cast<double>(n);
  model.prior_logodds = std::log(prior / (1.0 - prior));
  if (iteration_losses != nullptr) iteration_losses->clear();
  if (config.n_estimators == 0) return model;

  // Quantile-bin every feature once up front.
  std::vector<std::vector<double>> cuts(d);
  std::vector<std::uint8_t> codes(n * d);  // row-major
  {
    std::vector<double> column(n);
    for (std::size_t j = 0; j < d; ++j) {
      for (std::size_t i = 0; i < n; ++i) column[i] = features[i][j];
      cuts[j] = detail::quantile_cuts(column, config.max_bins);
      for (std::size_t i = 0; i < n; ++i) {
        codes[i * d + j] = detail::bin_of(features[i][j], cuts[j]);
      }
    }
  }

  std::vector<double> logit(n, model.prior_logodds);
  std::vector<double> grad(n);
  std::vector<double> hess(n);
  std::vector<std::int32_t> rows(n);
  std::vector<std::int32_t> leaf_of(n);

  struct NodeWork {
    std::int32_t node;   // index into tree.nodes
    std::size_t begin;   // range in `rows`
    std::size_t end;
    double grad_sum;
    double hess_sum;
  };

  for (int iter = 0; iter < config.n_estimators; ++iter) {
    double root_grad = 0.0;
    double root_hess = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double p = sigmoid(logit[i]);
      grad[i] = p - static_cast<double>(labels[i]);
      hess[i] = p * (1.0 - p);
      root_grad += grad[i];
      root_hess += hess[i];
      rows[i] = static_cast<std::int32_t>(i);
    }

    GbdtTree tree;
    tree.nodes.push_back(GbdtNode{});
    std::vector<NodeWork> level{{0, 0, n, root_grad, root_hess}};
    std::vector<NodeWork> next_level;
    std::vector<detail::HistCell> hist;

    for (int depth = 0; depth < config.max_depth && !level.empty(); ++depth) {
      next_level.clear();
      for (const NodeWork& work : level) {
        const std::size_t count = work.end - work.begin;
        if (count < 2 * static_cast<std::size_t>(config.min_samples_leaf)) continue;

        hist.assign(d * 256, detail::HistCell{});
        for (std::size_t r = work.begin; r < work.end; ++r) {
          const std::size_t i = static_cast<std::size_t>(rows[r]);
          const std::uint8_t* code = codes.data() + i * d;
          const double g = grad[i];
          const double h = hess[i];
          for (std::size_t j = 0; j < d; ++j) {
            detail::HistCell& cell = hist[j * 256 + code[j]];
            cell.grad += g;
            cell.hess += h;
            cell.count += 1;
          }
        }

        // gain(split) = GL^2/nL + GR^2/nR - G^2/n, the squared-error
        // reduction of fitting the residual by two constants.
        const double base = work.grad_sum * work.grad_sum / static_cast<double>(count);
        double best_gain = 1e-12;
        std::size_t best_feature = 0;
        int best_bin = -1;
        double best_gl = 0.0, best_hl = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          if (cuts[j].empty()) continue;
          double gl = 0.0, hl = 0.0;
          std::int64_t nl = 0;
          const std::size_t n_cuts = cuts[j].size();
          for (std::size_t b = 0; b < n_cuts; ++b) {
            const detail::HistCell& cell = hist[j * 256 + b];
            gl += cell.grad;
            hl += cell.hess;
            nl += cell.count;
            const std::int64_t nr = static_cast<std::int64_t>(count) - nl;
            if (nl < config.min_samples_leaf || nr < config.min_samples_leaf) continue;
            const double gr = work.grad_sum - gl;
            const double gain = gl * gl / static_cast<double>(nl) +
                                gr * gr / static_cast<double>(nr) - base;
            if (gain > best_gain) {
              best_gain = gain;
              best_feature = j;
              best_bin = static_cast<int>(b);
              best_gl = gl;
              best_hl = hl;
            }
          }
        }
        if (best_bin < 0) continue;

        const double threshold = cuts[best_feature][static_cast<std::size_t>(best_bin)];
        const auto mid = std::stable_partition(
            rows.begin() + static_cast<std::ptrdiff_t>(work.begin),
            rows.begin() + static_cast<std::ptrdiff_t>(work.end),
            [&](std::int32_t row) {
              return codes[static_cast<std::size_t>(row) * d + best_feature] <=
                     static_cast<std::uint8_t>(best_bin);
            });
        const std::size_t split_at =
            static_cast<std::size_t>(mid - rows.begin());

        GbdtNode& parent = tree.nodes[static_cast<std::size_t>(work.node)];
        parent.feature = static_cast<std::int32_t>(best_feature);
        parent.threshold = threshold;
        parent.left = static_cast<std::int32_t>(tree.nodes.size());
        parent.right = parent.left + 1;
        tree.nodes.push_back(GbdtNode{});
        tree.nodes.push_back(GbdtNode{});
        const std::int32_t left = tree.nodes[static_cast<std::size_t>(work.node)].left;
        const std::int32_t right = tree.nodes[static_cast<std::size_t>(work.node)].right;
        next_level.push_back({left, work.begin, split_at, best_gl, best_hl});
        next_level.push_back(
            {right, split_at, work.end, work.grad_sum - best_gl, work.hess_sum - best_hl});
      }
      std::swap(level, next_level);
    }

    // Newton leaf values, aggregated by the leaf each row lands in.
    for (std::size_t i = 0; i < n; ++i) {
      std::int32_t at = 0;
      while (tree.nodes[static_cast<std::size_t>(at)].feature >= 0) {
        const GbdtNode& node = tree.nodes[static_cast<std::size_t>(at)];
        at = features[i][static_cast<std::size_t>(node.feature)] < node.threshold ? node.left
                                                                                  : node.right;
      }
      leaf_of[i] = at;
    }
    std::vector<double> leaf_grad(tree.nodes.size(), 0.0);
    std::vector<double> leaf_hess(tree.nodes.size(), 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      leaf_grad[static_cast<std::size_t>(leaf_of[i])] += grad[i];
      leaf_hess[static_cast<std::size_t>(leaf_of[i])] += hess[i];
    }
    for (std::size_t a = 0; a < tree.nodes.size(); ++a) {
      GbdtNode& node = tree.nodes[a];
      if (node.feature >= 0) continue;
      const double value = -leaf_grad[a] / (leaf_hess[a] + 1e-12);
      node.value = std::clamp(value, -15.0, 15.0);
    }
    for (std::size_t i = 0; i < n; ++i) {
      logit[i] += config.shrinkage * tree.nodes[static_cast<std::size_t>(leaf_of[i])].value;
    }
    model.trees.push_back(std::move(tree));

    if (iteration_losses != nullptr) {
      double loss = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        loss -= labels[i] == 1 ? log_sigmoid(logit[i]) : log_sigmoid(-logit[i]);
      }
      iteration_losses->push_back(loss / static_cast<double>(n));
    }
  }
  return model;
}

}  // namespace qseg
