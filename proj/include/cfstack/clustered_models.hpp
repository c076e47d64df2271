#pragma once

#include <algorithm>
#include <cstdint>
#include <tuple>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "cfstack/clustering.hpp"
#include "cfstack/federation.hpp"
#include "cfstack/metrics.hpp"
#include "cfstack/parallel.hpp"

namespace cfstack {

/// Intermediate stacked model over the members of one cluster.
struct ClusterModel {
  ClusterMethod method = ClusterMethod::kmeans;
  int cluster = 0;
  std::vector<std::string> members;  // ascending
  DenseNet net;
  TrainTrace trace;
  Metrics metrics;
};

/// Test rows restricted to labels that at least one member trained on.
inline LabeledDataset cluster_test_slice(std::span<const TrainedClient> clients,
                                         const std::vector<std::string>& members,
                                         const LabeledDataset& test) {
  return test.filter_labels(trained_labels(clients, members));
}

namespace detail {

inline void check_coverage(const ClusterAssignment& a, std::span<const TrainedClient> clients) {
  std::set<std::string> assigned(a.client_ids.begin(), a.client_ids.end());
  if (assigned.size() != a.client_ids.size()) throw PreconditionError("assignment lists a client twice");
  if (a.labels.size() != a.client_ids.size()) throw PreconditionError("assignment labels and ids differ in length");
  for (const auto& c : clients) {
    if (!assigned.contains(c.spec.client_id)) {
      throw PreconditionError("client '" + c.spec.client_id + "' is not assigned to a cluster");
    }
  }
  if (assigned.size() != clients.size()) throw PreconditionError("assignment names unknown clients");
}

}  // namespace detail

/// One meta model per nonempty cluster, trained on the stack of only that
/// cluster's members. When `test` is given, each trace records accuracy on
/// the cluster's test slice.
inline std::vector<ClusterModel> build_cluster_models(const ClusterAssignment& assignment,
                                                      std::span<const TrainedClient> clients,
                                                      const LabeledDataset& meta,
                                                      const MetaTraining& training,
                                                      std::uint64_t seed,
                                                      const LabeledDataset* test = nullptr,
                                                      std::size_t workers = 1) {
  detail::check_coverage(assignment, clients);
  std::vector<std::vector<std::string>> groups;
  for (auto& m : assignment.members()) {
    if (m.empty()) continue;
    std::sort(m.begin(), m.end());
    groups.push_back(std::move(m));
  }
  std::vector<ClusterModel> models(groups.size());
  parallel_for(groups.size(), workers, [&](std::size_t c) {
    auto& model = models[c];
    model.method = assignment.method;
    model.cluster = static_cast<int>(c);
    model.members = groups[c];
    const auto stack = stack_for_members(clients, model.members, meta.features);
    if (test) {
      const auto slice = cluster_test_slice(clients, model.members, *test);
      HeldOutStack held{stack_for_members(clients, model.members, slice.features), slice.labels};
      std::tie(model.net, model.trace) = train_meta_net(stack, meta.labels, training, seed, &held);
    } else {
      std::tie(model.net, model.trace) = train_meta_net(stack, meta.labels, training, seed);
    }
  });
  return models;
}

/// Scores every cluster model on its test slice and stores the result in
/// the model. Returns the metrics in model order.
inline std::vector<Metrics> evaluate_clusters(std::vector<ClusterModel>& models,
                                              std::span<const TrainedClient> clients,
                                              const LabeledDataset& test) {
  if (test.empty()) throw PreconditionError("test dataset is empty");
  std::vector<Metrics> out;
  for (auto& m : models) {
    const auto slice = cluster_test_slice(clients, m.members, test);
    if (slice.empty()) {
      throw PreconditionError("cluster " + std::to_string(m.cluster) + " has an empty test slice");
    }
    m.metrics = evaluate_meta(m.net, m.members, clients, slice);
    out.push_back(m.metrics);
  }
  return out;
}

}  // namespace cfstack
