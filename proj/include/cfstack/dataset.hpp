#pragma once

#include <algorithm>
#include <cmath>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cfstack/error.hpp"
#include "cfstack/matrix.hpp"

namespace cfstack {

/// Feature matrix with dense integer labels in [0, num_labels).
struct LabeledDataset {
  Matrix features;
  std::vector<int> labels;
  int num_labels = 0;
  std::vector<std::string> feature_names;
  /// Original label text, by dense index. Empty for generated data.
  std::vector<std::string> label_names;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return features.cols(); }
  bool empty() const noexcept { return labels.empty(); }

  /// Throws PreconditionError if any invariant is broken.
  void validate() const {
    if (labels.empty()) throw PreconditionError("dataset is empty (n must be >= 1)");
    if (features.rows() != labels.size()) {
      throw ShapeError("dataset has " + std::to_string(features.rows()) + " feature rows but " +
                       std::to_string(labels.size()) + " labels");
    }
    for (int y : labels) {
      if (y < 0 || y >= num_labels) {
        throw PreconditionError("label " + std::to_string(y) + " outside [0, " +
                                std::to_string(num_labels) + ")");
      }
    }
    for (double v : features.values()) {
      if (!std::isfinite(v)) throw PreconditionError("dataset contains a non-finite feature");
    }
  }

  std::vector<std::size_t> label_histogram() const {
    std::vector<std::size_t> h(static_cast<std::size_t>(num_labels), 0);
    for (int y : labels) ++h[static_cast<std::size_t>(y)];
    return h;
  }

  std::set<int> present_labels() const { return {labels.begin(), labels.end()}; }

  /// Rows at the given indices, in order. Metadata is carried over.
  LabeledDataset subset(std::span<const std::size_t> indices) const {
    LabeledDataset out;
    out.features = features.select_rows(indices);
    out.labels.reserve(indices.size());
    for (auto i : indices) out.labels.push_back(labels[i]);
    out.num_labels = num_labels;
    out.feature_names = feature_names;
    out.label_names = label_names;
    return out;
  }

  /// Rows whose label is in `keep`.
  LabeledDataset filter_labels(const std::set<int>& keep) const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (keep.contains(labels[i])) idx.push_back(i);
    }
    return subset(idx);
  }
};

}  // namespace cfstack
