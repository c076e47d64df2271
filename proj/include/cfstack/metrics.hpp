#pragma once

#include <span>
#include <string>
#include <vector>

#include "cfstack/error.hpp"

namespace cfstack {

/// Classification quality. Macro averages run over the labels that occur in
/// the ground truth; labels with no true sample are excluded.
struct Metrics {
  double balanced_accuracy = 0.0;
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  std::vector<double> precision;  // per label
  std::vector<double> recall;
  std::vector<double> f1;
  std::vector<std::vector<std::size_t>> confusion;  // [truth][prediction]

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

inline Metrics compute_metrics(std::span<const int> predictions, std::span<const int> truth,
                               int num_labels) {
  if (predictions.size() != truth.size()) {
    throw ShapeError("predictions (" + std::to_string(predictions.size()) + ") and truth (" +
                     std::to_string(truth.size()) + ") differ in length");
  }
  if (truth.empty()) throw PreconditionError("metrics need at least one sample");
  if (num_labels < 1) throw PreconditionError("num_labels must be positive");
  const auto K = static_cast<std::size_t>(num_labels);
  auto check = [&](int y) {
    if (y < 0 || y >= num_labels) {
      throw PreconditionError("label " + std::to_string(y) + " outside [0, " +
                              std::to_string(num_labels) + ")");
    }
  };
  Metrics m;
  m.confusion.assign(K, std::vector<std::size_t>(K, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    check(truth[i]);
    check(predictions[i]);
    ++m.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predictions[i])];
    correct += truth[i] == predictions[i];
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(truth.size());
  m.precision.assign(K, 0.0);
  m.recall.assign(K, 0.0);
  m.f1.assign(K, 0.0);
  std::size_t present = 0;
  for (std::size_t k = 0; k < K; ++k) {
    std::size_t tp = m.confusion[k][k], row = 0, col = 0;
    for (std::size_t j = 0; j < K; ++j) {
      row += m.confusion[k][j];
      col += m.confusion[j][k];
    }
    const double p = col ? static_cast<double>(tp) / static_cast<double>(col) : 0.0;
    const double r = row ? static_cast<double>(tp) / static_cast<double>(row) : 0.0;
    m.precision[k] = p;
    m.recall[k] = r;
    m.f1[k] = p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
    if (row == 0) continue;
    ++present;
    m.macro_precision += p;
    m.macro_recall += r;
    m.macro_f1 += m.f1[k];
  }
  const auto n = static_cast<double>(present);
  m.macro_precision /= n;
  m.macro_recall /= n;
  m.macro_f1 /= n;
  m.balanced_accuracy = m.macro_recall;
  return m;
}

}  // namespace cfstack
