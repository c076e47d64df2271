// Two heterogeneous clients, one stacked global model, cosine distance
// between their output layers.

#include <iostream>

#include "cfstack/cfstack.hpp"

using namespace cfstack;

int main() {
  const auto data = generate_synthetic(axis_blob_spec(3, 4, 6.0, 1.0, 200), 7);
  auto [train, test] = split(data, 0.25, 1);
  auto [pool, meta] = split(train, 0.3, 2);

  CountMatrix counts;
  counts.rows = {{"alice", 0, {60, 60, 0}}, {"bob", 0, {20, 40, 60}}};
  auto parts = partition_non_iid(pool, counts, 3);

  const LRSchedule client_lr{0.01, 0.1, 4};
  std::vector<TrainedClient> clients;
  clients.push_back(train_client({"alice", {16, 8}, parts[0], 30}, client_lr, 11));
  clients.push_back(train_client({"bob", {32, 8}, parts[1], 30}, client_lr, 12));

  auto [stack, weights] = build_stack(clients, meta);
  MetaTraining meta_training{LRSchedule{}, 100, 8};
  auto global = train_global(stack, meta.labels, meta_training, 5);
  const auto m = evaluate(global, clients, test);

  std::cout << "stack width " << stack.width() << ", global balanced accuracy "
            << m.balanced_accuracy << '\n';
  std::cout << "cosine distance alice-bob "
            << distance_matrix(weights)(0, 1) << '\n';
}
