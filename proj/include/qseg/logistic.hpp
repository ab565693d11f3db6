#pragma once

// L2-regularized logistic regression trained with mini-batch gradient
// descent. Used as the linear baseline boundary classifier.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "qseg/common.hpp"
#include "qseg/embeddings.hpp"  // sigmoid, log_sigmoid

namespace qseg {

struct LogisticConfig {
  int epochs = 20;
  int batch_size = 256;
  double learning_rate = 0.05;
  double l2 = 1e-4;
  std::uint64_t seed = 1;

  void validate() const {
    if (epochs < 1) throw ConfigInvalid("epochs must be >= 1");
    if (batch_size < 1) throw ConfigInvalid("batch_size must be >= 1");
    if (learning_rate <= 0) throw ConfigInvalid("learning rate must be > 0");
    if (l2 < 0) throw ConfigInvalid("l2 must be >= 0");
  }
};

struct LogisticModel {
  std::vector<double> weights;
  double bias = 0.0;

  double decision(std::span<const double> x) const {
    double z = bias;
    for (std::size_t i = 0; i < weights.size(); ++i) z += weights[i] * x[i];
    return z;
  }

  double predict(std::span<const double> x) const { return sigmoid(decision(x)); }
};

// Mean logistic loss over the batch plus the L2 term (bias excluded), and
// its gradient. Shared by training and the finite-difference tests.
inline double logistic_loss_grad(const LogisticModel& model,
                                 const std::vector<std::vector<double>>& xs,
                                 std::span<const int> ys, double l2,
                                 std::vector<double>* grad_w, double* grad_b) {
  const std::size_t n = xs.size();
  const std::size_t d = model.weights.size();
  if (grad_w != nullptr) grad_w->assign(d, 0.0);
  if (grad_b != nullptr) *grad_b = 0.0;
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double z = model.decision(xs[i]);
    const double y = static_cast<double>(ys[i]);
    // -log p(y|x) = -y log s(z) - (1-y) log s(-z)
    loss -= y * log_sigmoid(z) + (1.0 - y) * log_sigmoid(-z);
    const double err = sigmoid(z) - y;
    if (grad_w != nullptr) {
      for (std::size_t j = 0; j < d; ++j) (*grad_w)[j] += err * xs[i][j];
    }
    if (grad_b != nullptr) *grad_b += err;
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  loss *= inv_n;
  if (grad_b != nullptr) *grad_b *= inv_n;
  for (std::size_t j = 0; j < d; ++j) {
    loss += 0.5 * l2 * model.weights[j] * model.weights[j];
    if (grad_w != nullptr) {
      (*grad_w)[j] = (*grad_w)[j] * inv_n + l2 * model.weights[j];
    }
  }
  return loss;
}

inline LogisticModel train_logistic(const std::vector<std::vector<double>>& features,
                                    const std::vector<int>& labels,
                                    const LogisticConfig& config,
                                    std::vector<double>* epoch_losses = nullptr) {
  config.validate();
  if (features.empty()) throw ConfigInvalid("empty training set");
  if (features.size() != labels.size()) {
    throw LengthMismatch("features and labels differ in size");
  }
  const bool has_pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
  const bool has_neg = std::find(labels.begin(), labels.end(), 0) != labels.end();
  if (!has_pos || !has_neg) throw DegenerateLabels("training labels are all one class");

  const std::size_t d = features.front().size();
  for (const auto& x : features) {
    if (x.size() != d) throw DimensionMismatch("inconsistent feature dimension");
  }

  LogisticModel model;
  model.weights.assign(d, 0.0);
  if (epoch_losses != nullptr) epoch_losses->clear();

  std::vector<std::size_t> order(features.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(derive_seed(config.seed, 0x4c4f4749ULL));

  std::vector<std::vector<double>> batch_x;
  std::vector<int> batch_y;
  std::vector<double> grad_w;
  double grad_b = 0.0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    seeded_shuffle(order, rng);
    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      batch_x.clear();
      batch_y.clear();
      for (std::size_t i = start; i < stop; ++i) {
        batch_x.push_back(features[order[i]]);
        batch_y.push_back(labels[order[i]]);
      }
      logistic_loss_grad(model, batch_x, batch_y, config.l2, &grad_w, &grad_b);
      for (std::size_t j = 0; j < d; ++j) model.weights[j] -= config.learning_rate * grad_w[j];
      model.bias -= config.learning_rate * grad_b;
    }
    if (epoch_losses != nullptr) {
      epoch_losses->push_back(
          logistic_loss_grad(model, features, labels, config.l2, nullptr, nullptr));
    }
  }
  return model;
}

}  // namespace qseg
