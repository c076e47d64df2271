#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cfstack/dataset.hpp"
#include "cfstack/error.hpp"
#include "cfstack/lr_schedule.hpp"
#include "cfstack/metrics.hpp"
#include "cfstack/nn.hpp"
#include "cfstack/rng.hpp"

namespace cfstack {

struct ClientSpec {
  std::string client_id;
  std::vector<int> hidden_layers;  // last entry is the shared penultimate width
  LabeledDataset dataset;
  int epochs = 1;
  /// Seed of the initial weights when the server hands the same starting
  /// point to every client of one architecture. Unset: drawn from the
  /// training seed.
  std::optional<std::uint64_t> init_seed;

  void validate() const {
    if (client_id.empty()) throw PreconditionError("client id must not be empty");
    if (epochs < 1) throw PreconditionError("client '" + client_id + "': epochs must be >= 1");
    if (dataset.empty()) throw PreconditionError("client '" + client_id + "' has no data");
    dataset.validate();
  }
};

struct TrainedClient {
  ClientSpec spec;
  DenseNet net;
  WeightVector weight_vector;
  TrainTrace trace;
};

/// Concatenated client probabilities; block c of every row holds client c's
/// K probabilities. Clients are in ascending id order.
struct StackFeatures {
  std::vector<std::string> client_ids;
  int num_labels = 0;
  Matrix values;

  std::size_t width() const noexcept { return values.cols(); }
  friend bool operator==(const StackFeatures&, const StackFeatures&) = default;
};

struct GlobalModel {
  DenseNet net;
  std::vector<std::string> client_ids;
  TrainTrace trace;
};

/// Training knobs shared by the global and the per-cluster meta models.
struct MetaTraining {
  LRSchedule schedule;
  int epochs = 100;
  std::size_t batch_size = 32;
};

/// Stacked features plus labels used only to record per-epoch accuracy.
struct HeldOutStack {
  StackFeatures stack;
  std::vector<int> labels;
};

/// Seed of a meta model, a function of the membership so that two meta
/// models over the same clients are trained identically.
inline std::uint64_t meta_model_seed(std::uint64_t seed, std::span<const std::string> ids) {
  std::string key = "meta";
  for (const auto& id : ids) key += "|" + id;
  return derive_seed(seed, key);
}

/// Trains one client for spec.epochs with the schedule's per-epoch rate.
/// Trace accuracy is measured on `validation` when given, else on the
/// training data.
inline TrainedClient train_client(const ClientSpec& spec, const LRSchedule& schedule,
                                  std::uint64_t seed,
                                  const LabeledDataset* validation = nullptr,
                                  std::size_t batch_size = 32) {
  spec.validate();
  schedule.validate();
  Rng rng(seed);
  DenseNet net;
  if (spec.init_seed) {
    Rng init(*spec.init_seed);
    net = DenseNet::make(spec.dataset.dim(), spec.hidden_layers, spec.dataset.num_labels, init);
  } else {
    net = DenseNet::make(spec.dataset.dim(), spec.hidden_layers, spec.dataset.num_labels, rng);
  }
  TrainedClient out{spec, std::move(net), {}, {}};
  const auto& eval = validation ? *validation : spec.dataset;
  for (int e = 0; e < spec.epochs; ++e) {
    const double loss = train_epoch(out.net, spec.dataset.features, spec.dataset.labels,
                                    lr_at(schedule, e), rng, batch_size);
    out.trace.entries.push_back({e + 1, loss, accuracy(out.net, eval.features, eval.labels)});
  }
  out.weight_vector = extract_output_weights(out.net, spec.client_id);
  return out;
}

namespace detail {

inline std::vector<const TrainedClient*> ordered_clients(std::span<const TrainedClient> clients) {
  std::vector<const TrainedClient*> out;
  for (const auto& c : clients) out.push_back(&c);
  std::sort(out.begin(), out.end(), [](auto* a, auto* b) {
    return a->spec.client_id < b->spec.client_id;
  });
  for (std::size_t i = 1; i < out.size(); ++i) {
    if (out[i]->spec.client_id == out[i - 1]->spec.client_id) {
      throw InterfaceError("duplicate client id '" + out[i]->spec.client_id + "'");
    }
  }
  return out;
}

inline void check_interfaces(std::span<const TrainedClient* const> clients) {
  if (clients.empty()) throw PreconditionError("need at least one client");
  const auto* first = clients.front();
  for (const auto* c : clients) {
    if (c->net.num_labels() != first->net.num_labels()) {
      throw InterfaceError("client '" + c->spec.client_id + "' has K=" +
                           std::to_string(c->net.num_labels()) + ", client '" +
                           first->spec.client_id + "' has K=" +
                           std::to_string(first->net.num_labels()));
    }
    if (c->net.penultimate_width() != first->net.penultimate_width()) {
      throw InterfaceError("client '" + c->spec.client_id + "' has penultimate width " +
                           std::to_string(c->net.penultimate_width()) + ", expected " +
                           std::to_string(first->net.penultimate_width()));
    }
  }
}

}  // namespace detail

/// Probabilities of the given clients (in the given order) on `features`.
inline StackFeatures stack_predictions(std::span<const TrainedClient* const> clients,
                                       const Matrix& features) {
  detail::check_interfaces(clients);
  const auto K = static_cast<std::size_t>(clients.front()->net.num_labels());
  StackFeatures s;
  s.num_labels = static_cast<int>(K);
  s.values = Matrix(features.rows(), K * clients.size());
  for (std::size_t c = 0; c < clients.size(); ++c) {
    s.client_ids.push_back(clients[c]->spec.client_id);
    const Matrix probs = forward(clients[c]->net, features);
    for (std::size_t r = 0; r < probs.rows(); ++r) {
      auto src = probs.row(r);
      std::copy(src.begin(), src.end(), s.values.row(r).begin() + static_cast<std::ptrdiff_t>(c * K));
    }
  }
  return s;
}

/// Stacked predictions of the members named in `ids` (sorted internally).
inline StackFeatures stack_for_members(std::span<const TrainedClient> clients,
                                       std::vector<std::string> ids, const Matrix& features) {
  std::sort(ids.begin(), ids.end());
  std::map<std::string, const TrainedClient*> by_id;
  for (const auto& c : clients) by_id[c.spec.client_id] = &c;
  std::vector<const TrainedClient*> members;
  for (const auto& id : ids) {
    auto it = by_id.find(id);
    if (it == by_id.end()) throw InterfaceError("unknown client id '" + id + "'");
    members.push_back(it->second);
  }
  return stack_predictions(members, features);
}

/// Server-side stack of every client's predictions on the shared meta set,
/// plus the set of output-layer weight vectors. Both in ascending id order.
inline std::pair<StackFeatures, WeightSet> build_stack(std::span<const TrainedClient> clients,
                                                       const LabeledDataset& meta) {
  if (meta.empty()) throw PreconditionError("meta dataset is empty");
  const auto ordered = detail::ordered_clients(clients);
  detail::check_interfaces(ordered);
  if (ordered.front()->net.num_labels() != meta.num_labels) {
    throw InterfaceError("clients have K=" + std::to_string(ordered.front()->net.num_labels()) +
                         ", meta dataset has K=" + std::to_string(meta.num_labels));
  }
  WeightSet weights;
  for (const auto* c : ordered) weights.push_back(c->weight_vector);
  return {stack_predictions(ordered, meta.features), std::move(weights)};
}

/// Meta network over stacked features: one relu layer of width 2K, softmax output.
inline std::pair<DenseNet, TrainTrace> train_meta_net(const StackFeatures& stack,
                                                      std::span<const int> labels,
                                                      const MetaTraining& training,
                                                      std::uint64_t seed,
                                                      const HeldOutStack* held_out = nullptr) {
  if (stack.values.rows() != labels.size()) {
    throw ShapeError("stack has " + std::to_string(stack.values.rows()) + " rows, labels " +
                     std::to_string(labels.size()));
  }
  if (labels.empty()) throw PreconditionError("meta training set is empty");
  if (training.epochs < 1) throw PreconditionError("meta epochs must be >= 1");
  training.schedule.validate();
  if (held_out && held_out->stack.client_ids != stack.client_ids) {
    throw InterfaceError("held-out stack has different contributing clients");
  }
  Rng rng(meta_model_seed(seed, stack.client_ids));
  const int hidden[] = {2 * stack.num_labels};
  auto net = DenseNet::make(stack.width(), hidden, stack.num_labels, rng);
  TrainTrace trace;
  for (int e = 0; e < training.epochs; ++e) {
    const double loss = train_epoch(net, stack.values, labels, lr_at(training.schedule, e), rng,
                                    training.batch_size);
    const double acc = held_out ? accuracy(net, held_out->stack.values, held_out->labels)
                                : accuracy(net, stack.values, labels);
    trace.entries.push_back({e + 1, loss, acc});
  }
  return {std::move(net), std::move(trace)};
}

/// Trains the global model on the full stack against the meta labels.
inline GlobalModel train_global(const StackFeatures& stack, std::span<const int> labels,
                                const MetaTraining& training, std::uint64_t seed,
                                const HeldOutStack* held_out = nullptr) {
  auto [net, trace] = train_meta_net(stack, labels, training, seed, held_out);
  return {std::move(net), stack.client_ids, std::move(trace)};
}

/// Runs a meta net over the stacked predictions of `member_ids` on `test`.
inline Metrics evaluate_meta(const DenseNet& net, const std::vector<std::string>& member_ids,
                             std::span<const TrainedClient> clients, const LabeledDataset& test) {
  if (test.empty()) throw PreconditionError("test dataset is empty");
  const auto stack = stack_for_members(clients, member_ids, test.features);
  return compute_metrics(predict(net, stack.values), test.labels, test.num_labels);
}

inline Metrics evaluate(const GlobalModel& model, std::span<const TrainedClient> clients,
                        const LabeledDataset& test) {
  return evaluate_meta(model.net, model.client_ids, clients, test);
}

/// Union of the labels each client saw during training.
inline std::set<int> trained_labels(std::span<const TrainedClient> clients,
                                    const std::vector<std::string>& ids) {
  std::set<int> out;
  for (const auto& c : clients) {
    if (std::find(ids.begin(), ids.end(), c.spec.client_id) == ids.end()) continue;
    auto present = c.spec.dataset.present_labels();
    out.insert(present.begin(), present.end());
  }
  return out;
}

}  // namespace cfstack
