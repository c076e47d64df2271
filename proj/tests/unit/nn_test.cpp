#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "cfstack/cfstack.hpp"

using namespace cfstack;

namespace {

DenseNet single_layer(std::vector<std::vector<double>> w, std::vector<double> b) {
  DenseLayer l;
  l.weights = Matrix::from_rows(w);
  l.bias = std::move(b);
  l.activation = Activation::softmax;
  return DenseNet({l});
}

DenseNet random_net(Rng& rng, std::size_t in, std::vector<int> hidden, int k) {
  return DenseNet::make(in, hidden, k, rng);
}

LabeledDataset two_blobs(std::uint64_t seed, std::size_t per_class) {
  SyntheticSpec s;
  s.num_labels = 2;
  s.dim = 2;
  s.means = {{0, 0}, {4, 4}};
  s.scale = 0.7;
  s.samples_per_class = {per_class, per_class};
  return generate_synthetic(s, seed);
}

}  // namespace

TEST(Forward, ZeroNetIsUniform) {
  auto net = single_layer({{0, 0, 0}, {0, 0, 0}, {0, 0, 0}, {0, 0, 0}}, {0, 0, 0, 0});
  auto p = forward(net, Matrix::from_rows({{1, -2, 3}, {100, 5, -7}}));
  for (double v : p.values()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Forward, SoftmaxOfTenAndZero) {
  auto net = single_layer({{1, 0}, {0, 1}}, {0, 0});
  auto p = forward(net, Matrix::from_rows({{10, 0}}));
  const double expect = 1.0 / (1.0 + std::exp(-10.0));
  EXPECT_NEAR(p(0, 0), expect, 1e-15);
  EXPECT_NEAR(p(0, 1), 1.0 - expect, 1e-15);
  EXPECT_NEAR(p(0, 0), 0.99995, 1e-5);
}

TEST(Forward, RowsAreProbabilityVectors) {
  Rng rng(7);
  auto net = random_net(rng, 5, {12, 6}, 4);
  Matrix x(3, 5);
  for (double& v : x.values()) v = rng.uniform(-50, 50);
  auto p = forward(net, x);
  ASSERT_EQ(p.rows(), 3u);
  for (std::size_t r = 0; r < 3; ++r) {
    double s = 0;
    for (double v : p.row(r)) {
      EXPECT_GE(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-9);
  }
}

TEST(Forward, ExtremeLogitsStayFinite) {
  auto net = single_layer({{1000, 0}, {0, -1000}}, {0, 0});
  auto p = forward(net, Matrix::from_rows({{5, 5}}));
  EXPECT_TRUE(std::isfinite(p(0, 0)));
  EXPECT_NEAR(p(0, 0) + p(0, 1), 1.0, 1e-12);
}

TEST(Forward, WrongInputWidthNamesBothDims) {
  Rng rng(1);
  auto net = random_net(rng, 4, {3}, 2);
  try {
    forward(net, Matrix(1, 5));
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find('4'), std::string::npos);
    EXPECT_NE(msg.find('5'), std::string::npos);
  }
}

TEST(DenseNetShape, BrokenChainIsRejected) {
  DenseLayer a{Matrix(3, 2), {0, 0, 0}, Activation::relu};
  DenseLayer b{Matrix(2, 4), {0, 0}, Activation::softmax};
  EXPECT_THROW(DenseNet({a, b}), ShapeError);
  DenseLayer hidden_softmax{Matrix(3, 2), {0, 0, 0}, Activation::softmax};
  DenseLayer out{Matrix(2, 3), {0, 0}, Activation::softmax};
  EXPECT_THROW(DenseNet({hidden_softmax, out}), PreconditionError);
}

TEST(DenseNetShape, GlorotBounds) {
  Rng rng(3);
  auto net = random_net(rng, 10, {6}, 4);
  const double s0 = std::sqrt(6.0 / 16.0), s1 = std::sqrt(6.0 / 10.0);
  for (double w : net.layers()[0].weights.values()) EXPECT_LE(std::abs(w), s0);
  for (double w : net.layers()[1].weights.values()) EXPECT_LE(std::abs(w), s1);
  for (double b : net.layers()[0].bias) EXPECT_EQ(b, 0.0);
}

TEST(GradientCheck, RandomNetsAgreeWithFiniteDifferences) {
  Rng rng(2024);
  double worst = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t in = 1 + rng.index(6);
    std::vector<int> hidden;
    const auto depth = rng.index(3);
    for (std::size_t h = 0; h < depth; ++h) hidden.push_back(static_cast<int>(2 + rng.index(6)));
    const int k = static_cast<int>(2 + rng.index(4));
    auto net = random_net(rng, in, hidden, k);
    for (auto& l : net.layers()) {
      for (double& b : l.bias) b = rng.uniform(-0.5, 0.5);
    }
    std::vector<double> x(in);
    for (double& v : x) v = rng.uniform(-2, 2);
    worst = std::max(worst, gradient_check(net, x, static_cast<int>(rng.index(static_cast<std::size_t>(k))), 1e-5));
  }
  EXPECT_LE(worst, 1e-4);
}

TEST(GradientCheck, CorruptedGradientIsCaught) {
  Rng rng(5);
  auto net = random_net(rng, 3, {4}, 3);
  std::vector<double> x{0.3, -1.2, 0.8};
  auto g = sample_gradients(net, x, 1);
  g.weights.back().values()[0] += 0.5;
  EXPECT_GT(gradient_check(net, x, 1, 1e-5, g), 1e-2);
}

TEST(GradientCheck, ZeroInputGivesZeroFirstLayerWeightGradient) {
  Rng rng(9);
  auto net = random_net(rng, 4, {5}, 3);
  std::vector<double> x(4, 0.0);
  auto g = sample_gradients(net, x, 2);
  for (double v : g.weights.front().values()) EXPECT_EQ(v, 0.0);
}

TEST(GradientCheck, EpsilonRange) {
  Rng rng(1);
  auto net = random_net(rng, 2, {}, 2);
  std::vector<double> x{1, 2};
  EXPECT_THROW(gradient_check(net, x, 0, 0.0), PreconditionError);
  EXPECT_THROW(gradient_check(net, x, 0, 0.02), PreconditionError);
}

TEST(TrainEpoch, ZeroRateLeavesWeightsAndReportsInitialLoss) {
  auto data = two_blobs(11, 40);
  Rng init(4);
  auto net = random_net(init, 2, {8}, 2);
  const auto before = net;
  Rng rng(12);
  const double loss = train_epoch(net, data.features, data.labels, 0.0, rng);
  EXPECT_EQ(net, before);
  EXPECT_NEAR(loss, mean_loss(before, data.features, data.labels), 1e-12);
}

TEST(TrainEpoch, SeparableBlobsReachHighAccuracy) {
  auto data = two_blobs(21, 200);
  auto [train, test] = split(data, 0.25, 22);
  Rng rng(23);
  auto net = random_net(rng, 2, {8}, 2);
  for (int e = 0; e < 50; ++e) train_epoch(net, train.features, train.labels, 0.05, rng);
  EXPECT_GE(accuracy(net, test.features, test.labels), 0.95);
}

TEST(TrainEpoch, SameSeedSameWeights) {
  auto data = two_blobs(31, 50);
  auto run = [&] {
    Rng rng(99);
    auto net = random_net(rng, 2, {6, 4}, 2);
    for (int e = 0; e < 5; ++e) train_epoch(net, data.features, data.labels, 0.05, rng, 8);
    return net;
  };
  EXPECT_EQ(run(), run());
}

TEST(TrainEpoch, EmptyDataIsRejected) {
  Rng rng(1);
  auto net = random_net(rng, 2, {}, 2);
  std::vector<int> none;
  EXPECT_THROW(train_epoch(net, Matrix(0, 2), none, 0.1, rng), PreconditionError);
}

TEST(TrainEpoch, LossDropsOverFirstEpochAtSmallRate) {
  // Median over 20 seeds of (loss after one epoch - loss before) on the
  // standard synthetic task at lr 1e-3.
  auto spec = axis_blob_spec(8, 11, 6.0, 1.0, 60);
  auto data = generate_synthetic(spec, 5);
  std::vector<double> deltas;
  for (std::uint64_t s = 0; s < 20; ++s) {
    Rng rng(1000 + s);
    auto net = random_net(rng, 11, {32, 16}, 8);
    const double before = mean_loss(net, data.features, data.labels);
    train_epoch(net, data.features, data.labels, 1e-3, rng);
    deltas.push_back(mean_loss(net, data.features, data.labels) - before);
  }
  std::nth_element(deltas.begin(), deltas.begin() + 10, deltas.end());
  EXPECT_LE(deltas[10], 0.0);
}

TEST(OutputWeights, RowMajorThenBias) {
  auto net = single_layer({{1, 2, 3}, {4, 5, 6}}, {7, 8});
  auto wv = extract_output_weights(net, "a");
  EXPECT_EQ(wv.values, (std::vector<double>{1, 2, 3, 4, 5, 6, 7, 8}));
  EXPECT_EQ(wv.client_id, "a");
}

TEST(OutputWeights, LengthIsSharedAcrossHiddenStacks) {
  Rng rng(1);
  auto a = random_net(rng, 11, {32, 8}, 8);
  auto b = random_net(rng, 11, {64, 16, 8}, 8);
  EXPECT_EQ(extract_output_weights(a, "a").values.size(), 72u);
  EXPECT_EQ(extract_output_weights(b, "b").values.size(), 72u);
}

TEST(OutputWeights, CsvRoundTripIsExact) {
  Rng rng(8);
  WeightSet set;
  for (int i = 0; i < 3; ++i) {
    auto net = random_net(rng, 4, {5}, 3);
    set.push_back(extract_output_weights(net, "c" + std::to_string(i)));
  }
  set[0].values[0] = 1.0 / 3.0;
  set[1].values[1] = -2.5e-300;
  std::stringstream ss;
  write_weight_csv(ss, set);
  EXPECT_EQ(read_weight_csv(ss), set);
}

TEST(OutputWeights, CsvRejectsGarbage) {
  std::stringstream ss("client_id,w0\na,1.5\nb,oops\n");
  EXPECT_THROW(read_weight_csv(ss), ParseError);
  std::stringstream bad("id,w0\na,1\n");
  EXPECT_THROW(read_weight_csv(bad), SchemaError);
}
