#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cfstack/csv.hpp"
#include "cfstack/error.hpp"
#include "cfstack/matrix.hpp"
#include "cfstack/rng.hpp"

namespace cfstack {

enum class Activation { relu, softmax };

struct DenseLayer {
  Matrix weights;  // out_dim x in_dim
  std::vector<double> bias;
  Activation activation = Activation::relu;

  std::size_t in_dim() const noexcept { return weights.cols(); }
  std::size_t out_dim() const noexcept { return weights.rows(); }
};

/// Feed-forward classifier: relu hidden layers followed by a softmax output.
class DenseNet {
 public:
  DenseNet() = default;

  explicit DenseNet(std::vector<DenseLayer> layers) : layers_(std::move(layers)) { validate(); }

  /// Builds input_dim -> hidden... -> num_labels with uniform(-s, s) weights,
  /// s = sqrt(6 / (in + out)), and zero biases.
  static DenseNet make(std::size_t input_dim, std::span<const int> hidden, int num_labels,
                       Rng& rng) {
    if (input_dim == 0) throw PreconditionError("input dimension must be positive");
    if (num_labels < 1) throw PreconditionError("num_labels must be positive");
    std::vector<DenseLayer> layers;
    std::size_t in = input_dim;
    auto add = [&](std::size_t out, Activation act) {
      DenseLayer layer;
      layer.weights = Matrix(out, in);
      layer.bias.assign(out, 0.0);
      layer.activation = act;
      const double s = std::sqrt(6.0 / static_cast<double>(in + out));
      for (double& w : layer.weights.values()) w = rng.uniform(-s, s);
      layers.push_back(std::move(layer));
      in = out;
    };
    for (int width : hidden) {
      if (width < 1) throw PreconditionError("hidden layer widths must be positive");
      add(static_cast<std::size_t>(width), Activation::relu);
    }
    add(static_cast<std::size_t>(num_labels), Activation::softmax);
    return DenseNet(std::move(layers));
  }

  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }

  std::size_t input_dim() const { return layers_.front().in_dim(); }
  int num_labels() const { return static_cast<int>(layers_.back().out_dim()); }
  /// Width feeding the output layer (the input dim for a single-layer net).
  std::size_t penultimate_width() const { return layers_.back().in_dim(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.values().size() + l.bias.size();
    return n;
  }

  void validate() const {
    if (layers_.empty()) throw PreconditionError("network has no layers");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto& l = layers_[i];
      if (l.bias.size() != l.out_dim()) {
        throw ShapeError("layer " + std::to_string(i) + ": bias length " +
                         std::to_string(l.bias.size()) + " != out_dim " +
                         std::to_string(l.out_dim()));
      }
      if (i + 1 < layers_.size() && layers_[i + 1].in_dim() != l.out_dim()) {
        throw ShapeError("layer " + std::to_string(i + 1) + ": in_dim " +
                         std::to_string(layers_[i + 1].in_dim()) + " != previous out_dim " +
                         std::to_string(l.out_dim()));
      }
      const bool last = i + 1 == layers_.size();
      if (last != (l.activation == Activation::softmax)) {
        throw PreconditionError("softmax must be the activation of the final layer only");
      }
    }
  }

  friend bool operator==(const DenseNet& a, const DenseNet& b) {
    if (a.layers_.size() != b.layers_.size()) return false;
    for (std::size_t i = 0; i < a.layers_.size(); ++i) {
      const auto& x = a.layers_[i];
      const auto& y = b.layers_[i];
      if (!(x.weights == y.weights) || x.bias != y.bias || x.activation != y.activation) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<DenseLayer> layers_;
};

/// Per-parameter gradients laid out like the network's layers.
struct Gradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> bias;

  static Gradients zeros_like(const DenseNet& net) {
    Gradients g;
    for (const auto& l : net.layers()) {
      g.weights.emplace_back(l.out_dim(), l.in_dim());
      g.bias.emplace_back(l.out_dim(), 0.0);
    }
    return g;
  }
};

namespace detail {

/// Activations of every layer for one sample; acts[0] is the input.
struct ForwardTrace {
  std::vector<std::vector<double>> acts;
  std::vector<double> logits;
  double log_norm = 0.0;  // log-sum-exp of the logits
};

inline void check_input(const DenseNet& net, std::size_t got) {
  if (got != net.input_dim()) {
    throw ShapeError("input has " + std::to_string(got) + " features, network expects " +
                     std::to_string(net.input_dim()));
  }
}

inline ForwardTrace forward_one(const DenseNet& net, std::span<const double> x) {
  ForwardTrace t;
  t.acts.reserve(net.layers().size() + 1);
  t.acts.emplace_back(x.begin(), x.end());
  for (const auto& layer : net.layers()) {
    const auto& in = t.acts.back();
    std::vector<double> z(layer.out_dim());
    for (std::size_t o = 0; o < layer.out_dim(); ++o) {
      auto w = layer.weights.row(o);
      double s = layer.bias[o];
      for (std::size_t i = 0; i < in.size(); ++i) s += w[i] * in[i];
      z[o] = s;
    }
    if (layer.activation == Activation::relu) {
      for (double& v : z) v = v > 0.0 ? v : 0.0;
      t.acts.push_back(std::move(z));
    } else {
      const double m = *std::max_element(z.begin(), z.end());
      double sum = 0.0;
      for (double v : z) sum += std::exp(v - m);
      t.log_norm = m + std::log(sum);
      std::vector<double> p(z.size());
      for (std::size_t k = 0; k < z.size(); ++k) p[k] = std::exp(z[k] - t.log_norm);
      t.logits = std::move(z);
      t.acts.push_back(std::move(p));
    }
  }
  return t;
}

inline double cross_entropy(const ForwardTrace& t, int label) {
  return t.log_norm - t.logits[static_cast<std::size_t>(label)];
}

/// Adds d(loss)/d(params) for one sample into `grads`.
inline void backprop_one(const DenseNet& net, const ForwardTrace& t, int label, Gradients& grads) {
  const auto& layers = net.layers();
  std::vector<double> delta = t.acts.back();
  delta[static_cast<std::size_t>(label)] -= 1.0;
  for (std::size_t li = layers.size(); li-- > 0;) {
    const auto& layer = layers[li];
    const auto& in = t.acts[li];
    auto& gw = grads.weights[li];
    auto& gb = grads.bias[li];
    for (std::size_t o = 0; o < layer.out_dim(); ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      gb[o] += d;
      auto row = gw.row(o);
      for (std::size_t i = 0; i < in.size(); ++i) row[i] += d * in[i];
    }
    if (li == 0) break;
    std::vector<double> prev(layer.in_dim(), 0.0);
    for (std::size_t o = 0; o < layer.out_dim(); ++o) {
      const double d = delta[o];
      if (d == 0.0) continue;
      auto w = layer.weights.row(o);
      for (std::size_t i = 0; i < prev.size(); ++i) prev[i] += w[i] * d;
    }
    // relu'(z) is 1 where the stored activation is positive.
    for (std::size_t i = 0; i < prev.size(); ++i) {
      if (in[i] <= 0.0) prev[i] = 0.0;
    }
    delta = std::move(prev);
  }
}

template <typename F>
void for_each_parameter(DenseNet& net, F&& f) {
  for (std::size_t li = 0; li < net.layers().size(); ++li) {
    auto& l = net.layers()[li];
    for (std::size_t j = 0; j < l.weights.values().size(); ++j) f(li, false, j, l.weights.values()[j]);
    for (std::size_t j = 0; j < l.bias.size(); ++j) f(li, true, j, l.bias[j]);
  }
}

}  // namespace detail

/// Class probabilities, one row per input row.
inline Matrix forward(const DenseNet& net, const Matrix& batch) {
  detail::check_input(net, batch.cols());
  Matrix out(batch.rows(), static_cast<std::size_t>(net.num_labels()));
  for (std::size_t r = 0; r < batch.rows(); ++r) {
    auto t = detail::forward_one(net, batch.row(r));
    std::copy(t.acts.back().begin(), t.acts.back().end(), out.row(r).begin());
  }
  return out;
}

/// Argmax of each probability row; ties go to the lowest label.
inline std::vector<int> argmax_rows(const Matrix& probs) {
  std::vector<int> out(probs.rows());
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    auto row = probs.row(r);
    out[r] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
  }
  return out;
}

inline std::vector<int> predict(const DenseNet& net, const Matrix& batch) {
  return argmax_rows(forward(net, batch));
}

inline double accuracy(const DenseNet& net, const Matrix& features, std::span<const int> labels) {
  if (labels.empty()) return 0.0;
  const auto pred = predict(net, features);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += pred[i] == labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

/// Mean softmax cross-entropy over the rows.
inline double mean_loss(const DenseNet& net, const Matrix& features, std::span<const int> labels) {
  detail::check_input(net, features.cols());
  if (labels.empty()) throw PreconditionError("mean_loss on an empty batch");
  double total = 0.0;
  for (std::size_t r = 0; r < features.rows(); ++r) {
    total += detail::cross_entropy(detail::forward_one(net, features.row(r)), labels[r]);
  }
  return total / static_cast<double>(labels.size());
}

/// Loss gradient for a single labeled row.
inline Gradients sample_gradients(const DenseNet& net, std::span<const double> x, int label) {
  detail::check_input(net, x.size());
  auto g = Gradients::zeros_like(net);
  detail::backprop_one(net, detail::forward_one(net, x), label, g);
  return g;
}

/// One pass of minibatch SGD over the data in a shuffled order drawn from `rng`.
/// Returns the mean per-sample loss, each sample's loss taken before the
/// update of its minibatch.
inline double train_epoch(DenseNet& net, const Matrix& features, std::span<const int> labels,
                          double lr, Rng& rng, std::size_t batch_size = 32) {
  if (labels.empty()) throw PreconditionError("train_epoch on an empty dataset");
  if (features.rows() != labels.size()) {
    throw ShapeError("features have " + std::to_string(features.rows()) + " rows, labels " +
                     std::to_string(labels.size()));
  }
  if (!(lr >= 0.0) || !std::isfinite(lr)) throw PreconditionError("learning rate must be >= 0");
  if (batch_size == 0) throw PreconditionError("batch size must be positive");
  detail::check_input(net, features.cols());
  const int k = net.num_labels();
  for (int y : labels) {
    if (y < 0 || y >= k) throw PreconditionError("label " + std::to_string(y) + " outside [0, K)");
  }

  std::vector<std::size_t> order(labels.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(std::span<std::size_t>(order));

  double total = 0.0;
  auto grads = Gradients::zeros_like(net);
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    for (auto& m : grads.weights) std::fill(m.values().begin(), m.values().end(), 0.0);
    for (auto& b : grads.bias) std::fill(b.begin(), b.end(), 0.0);
    for (std::size_t i = start; i < end; ++i) {
      const auto idx = order[i];
      auto t = detail::forward_one(net, features.row(idx));
      total += detail::cross_entropy(t, labels[idx]);
      detail::backprop_one(net, t, labels[idx], grads);
    }
    const double step = lr / static_cast<double>(end - start);
    for (std::size_t li = 0; li < net.layers().size(); ++li) {
      auto& l = net.layers()[li];
      auto w = l.weights.values();
      auto gw = grads.weights[li].values();
      for (std::size_t j = 0; j < w.size(); ++j) w[j] -= step * gw[j];
      for (std::size_t j = 0; j < l.bias.size(); ++j) l.bias[j] -= step * grads.bias[li][j];
    }
  }
  return total / static_cast<double>(labels.size());
}

/// Max relative error between `analytic` and central finite differences
/// over every parameter: |a - n| / max(|a|, |n|, 1e-8).
inline double gradient_check(const DenseNet& net, std::span<const double> x, int label,
                             double epsilon, const Gradients& analytic) {
  if (!(epsilon > 0.0 && epsilon <= 1e-2)) throw PreconditionError("epsilon must lie in (0, 1e-2]");
  detail::check_input(net, x.size());
  DenseNet probe = net;
  auto loss = [&] { return detail::cross_entropy(detail::forward_one(probe, x), label); };
  double worst = 0.0;
  detail::for_each_parameter(probe, [&](std::size_t li, bool is_bias, std::size_t j, double& p) {
    const double saved = p;
    p = saved + epsilon;
    const double up = loss();
    p = saved - epsilon;
    const double down = loss();
    p = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double a = is_bias ? analytic.bias[li][j] : analytic.weights[li].values()[j];
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  });
  return worst;
}

inline double gradient_check(const DenseNet& net, std::span<const double> x, int label,
                             double epsilon) {
  return gradient_check(net, x, label, epsilon, sample_gradients(net, x, label));
}

/// Flattened output-layer parameters of one client.
struct WeightVector {
  std::string client_id;
  std::vector<double> values;

  friend bool operator==(const WeightVector&, const WeightVector&) = default;
};

using WeightSet = std::vector<WeightVector>;

/// Final weight matrix in row-major order followed by the final bias.
inline WeightVector extract_output_weights(const DenseNet& net, std::string client_id) {
  if (net.layers().empty()) throw PreconditionError("network has no layers");
  const auto& out = net.layers().back();
  WeightVector wv{std::move(client_id), {}};
  wv.values.reserve(out.weights.values().size() + out.bias.size());
  wv.values.assign(out.weights.values().begin(), out.weights.values().end());
  wv.values.insert(wv.values.end(), out.bias.begin(), out.bias.end());
  return wv;
}

/// Header `client_id,w0,...` then one row per client, values at 17 significant digits.
inline void write_weight_csv(std::ostream& os, std::span<const WeightVector> set) {
  const std::size_t len = set.empty() ? 0 : set.front().values.size();
  os << "client_id";
  for (std::size_t j = 0; j < len; ++j) os << ",w" << j;
  os << '\n';
  for (const auto& wv : set) {
    if (wv.values.size() != len) throw ShapeError("weight vectors differ in length");
    os << wv.client_id;
    for (double v : wv.values) os << ',' << csv::format_g17(v);
    os << '\n';
  }
}

inline WeightSet read_weight_csv(std::istream& is) {
  auto table = csv::read_table(is);
  if (table.header.empty() || table.header[0] != "client_id") {
    throw SchemaError("weight CSV must start with a 'client_id' column");
  }
  WeightSet out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.header.size()) {
      throw ParseError("weight CSV row " + std::to_string(r + 1) + " has " +
                       std::to_string(row.size()) + " fields, header has " +
                       std::to_string(table.header.size()));
    }
    WeightVector wv{row[0], {}};
    for (std::size_t c = 1; c < row.size(); ++c) {
      auto v = csv::parse_double(row[c]);
      if (!v || !std::isfinite(*v)) {
        throw ParseError("weight CSV row " + std::to_string(r + 1) + ", column " +
                         std::to_string(c + 1) + ": not a finite number: '" + row[c] + "'");
      }
      wv.values.push_back(*v);
    }
    out.push_back(std::move(wv));
  }
  return out;
}

struct TraceEntry {
  int epoch = 0;
  double loss = 0.0;
  double accuracy = 0.0;

  friend bool operator==(const TraceEntry&, const TraceEntry&) = default;
};

/// Per-epoch training history; epochs count from 1.
struct TrainTrace {
  std::vector<TraceEntry> entries;

  friend bool operator==(const TrainTrace&, const TrainTrace&) = default;
};

}  // namespace cfstack
