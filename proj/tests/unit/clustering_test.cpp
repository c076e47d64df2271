#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "cfstack/cfstack.hpp"
#include "oracles.hpp"

using namespace cfstack;

namespace {

oracle::Points random_points(Rng& rng, std::size_t n, std::size_t d) {
  oracle::Points p(n, std::vector<double>(d));
  for (auto& row : p) {
    for (double& v : row) v = rng.uniform(-5, 5);
  }
  return p;
}

DistanceMatrix dm_from(const std::vector<std::vector<double>>& d) {
  DistanceMatrix dm;
  dm.values = Matrix::from_rows(d);
  for (std::size_t i = 0; i < d.size(); ++i) dm.client_ids.push_back("p" + std::to_string(i));
  return dm;
}

}  // namespace

TEST(Cosine, HandValues) {
  std::vector<double> a{3, 4}, x{1, 0}, y{0, 1};
  EXPECT_DOUBLE_EQ(cosine_similarity(a, a), 1.0);
  EXPECT_DOUBLE_EQ(cosine_similarity(x, y), 0.0);
  std::vector<double> u{1, 2, 3}, v{4, 5, 6};
  EXPECT_NEAR(cosine_similarity(u, v), 32.0 / (std::sqrt(14.0) * std::sqrt(77.0)), 1e-15);
  EXPECT_NEAR(cosine_similarity(u, v), 0.974632, 1e-6);
}

TEST(Cosine, SymmetricAndScaleInvariant) {
  Rng rng(3);
  for (int t = 0; t < 50; ++t) {
    std::vector<double> a(6), b(6);
    for (double& v : a) v = rng.uniform(-1, 1);
    for (double& v : b) v = rng.uniform(-1, 1);
    const double s = cosine_similarity(a, b);
    EXPECT_EQ(s, cosine_similarity(b, a));
    auto a2 = a;
    const double alpha = rng.uniform(0.1, 100);
    for (double& v : a2) v *= alpha;
    EXPECT_NEAR(cosine_similarity(a2, b), s, 1e-12);
    EXPECT_LE(std::abs(s), 1.0);
  }
}

TEST(Cosine, ZeroVectorUndefined) {
  std::vector<double> z{0, 0}, a{1, 2};
  EXPECT_THROW(cosine_similarity(z, a), UndefinedError);
}

TEST(Distances, StructureAndZeroVectorNaming) {
  Rng rng(1);
  WeightSet w;
  for (int i = 0; i < 15; ++i) {
    std::vector<double> v(72);
    for (double& x : v) x = rng.uniform(-1, 1);
    w.push_back({"c" + std::to_string(i), v});
  }
  auto dm = distance_matrix(w);
  ASSERT_EQ(dm.values.rows(), 15u);
  std::set<std::pair<std::size_t, std::size_t>> upper;
  for (std::size_t i = 0; i < 15; ++i) {
    EXPECT_EQ(dm.values(i, i), 0.0);
    for (std::size_t j = 0; j < 15; ++j) {
      EXPECT_EQ(dm.values(i, j), dm.values(j, i));
      EXPECT_GE(dm.values(i, j), 0.0);
      EXPECT_LE(dm.values(i, j), 2.0);
      if (i < j) upper.insert({i, j});
    }
  }
  EXPECT_EQ(upper.size(), 105u);

  WeightSet basic{{"x", {1, 0}}, {"y", {0, 1}}, {"z", {1, 0}}};
  auto d2 = distance_matrix(basic);
  EXPECT_DOUBLE_EQ(d2.values(0, 1), 1.0);
  EXPECT_DOUBLE_EQ(d2.values(0, 2), 0.0);

  w[7].values.assign(72, 0.0);
  try {
    distance_matrix(w);
    FAIL();
  } catch (const UndefinedError& e) {
    EXPECT_NE(std::string(e.what()).find("'c7'"), std::string::npos) << e.what();
  }
}

TEST(Distances, CsvRoundTripAtSixDecimals) {
  WeightSet w{{"a", {1, 2, 3}}, {"b", {3, -1, 0.5}}, {"c", {0.2, 0.1, 9}}};
  auto dm = distance_matrix(w);
  std::stringstream ss;
  write_distance_csv(ss, dm);
  auto back = read_distance_csv(ss);
  EXPECT_EQ(back.client_ids, dm.client_ids);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(back.values(i, j), dm.values(i, j), 5e-7);
  }
}

TEST(Wcss, HandValues) {
  auto w = oracle::as_weights({{0}, {2}});
  ClusterAssignment a;
  a.k = 1;
  a.labels = {0, 0};
  EXPECT_DOUBLE_EQ(wcss(w, a), 2.0);
  a.k = 2;
  a.labels = {0, 1};
  EXPECT_DOUBLE_EQ(wcss(w, a), 0.0);
}

TEST(Wcss, RefinementNeverIncreases) {
  // Split one cluster of a random assignment in two; compare by enumeration.
  Rng rng(11);
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = 3 + rng.index(5);
    auto pts = random_points(rng, n, 1 + rng.index(3));
    auto w = oracle::as_weights(pts);
    oracle::for_each_partition(n, 2, [&](const std::vector<int>& coarse) {
      ClusterAssignment a;
      a.k = 2;
      a.labels = coarse;
      const double base = wcss(w, a);
      EXPECT_NEAR(base, oracle::wcss(pts, coarse, 2), 1e-9);
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < n; ++i) {
        if (coarse[i] == 0) members.push_back(i);
      }
      if (members.size() < 2) return;
      for (std::size_t split_at = 1; split_at < members.size(); ++split_at) {
        auto fine = coarse;
        for (std::size_t m = split_at; m < members.size(); ++m) fine[members[m]] = 2;
        ClusterAssignment b;
        b.k = 3;
        b.labels = fine;
        EXPECT_LE(wcss(w, b), base + 1e-12);
      }
    });
  }
}

TEST(KMeans, SingleClusterCentroidIsMean) {
  auto w = oracle::as_weights({{0, 0}, {2, 4}, {4, 2}});
  auto a = kmeans(w, 1, 1);
  EXPECT_EQ(a.labels, (std::vector<int>{0, 0, 0}));
  EXPECT_DOUBLE_EQ(a.centroids[0][0], 2.0);
  EXPECT_DOUBLE_EQ(a.centroids[0][1], 2.0);
}

TEST(KMeans, KEqualsNGivesSingletons) {
  Rng rng(2);
  auto pts = random_points(rng, 6, 3);
  auto w = oracle::as_weights(pts);
  auto a = kmeans(w, 6, 4);
  EXPECT_EQ(oracle::groups_of(a.labels).size(), 6u);
  EXPECT_EQ(wcss(w, a), 0.0);
}

TEST(KMeans, FourPointsBruteForce) {
  oracle::Points pts{{0, 0}, {0, 1}, {10, 0}, {10, 1}};
  auto a = kmeans(oracle::as_weights(pts), 2, 5);
  EXPECT_EQ(a.labels, (std::vector<int>{0, 0, 1, 1}));
  EXPECT_NEAR(wcss(oracle::as_weights(pts), a), oracle::optimal_wcss(pts, 2), 1e-12);
}

TEST(KMeans, WcssNonIncreasingEveryIteration) {
  Rng rng(7);
  for (int t = 0; t < 30; ++t) {
    auto pts = random_points(rng, 40, 4);
    auto a = kmeans(oracle::as_weights(pts), 5, static_cast<std::uint64_t>(t));
    ASSERT_FALSE(a.history.empty());
    for (std::size_t i = 1; i < a.history.size(); ++i) EXPECT_LE(a.history[i], a.history[i - 1] + 1e-9);
  }
}

TEST(KMeans, MoreSeedingsNeverRaiseWcss) {
  Rng rng(12);
  for (int t = 0; t < 20; ++t) {
    const auto w = oracle::as_weights(random_points(rng, 8, 2));
    const auto seed = static_cast<std::uint64_t>(t);
    EXPECT_LE(wcss(w, kmeans(w, 3, seed, 300, 1e-6, 10)), wcss(w, kmeans(w, 3, seed, 300, 1e-6, 1)));
  }
}

TEST(KMeans, KOutOfRange) {
  auto w = oracle::as_weights({{0}, {1}});
  EXPECT_THROW(kmeans(w, 3, 1), PreconditionError);
  EXPECT_THROW(kmeans(w, 0, 1), PreconditionError);
  EXPECT_THROW(kmeans(w, 1, 1, 300, 1e-6, 0), PreconditionError);
}

TEST(KMeans, DuplicatePointsKeepEveryClusterNonEmpty) {
  auto w = oracle::as_weights({{1, 1}, {1, 1}, {1, 1}, {1, 1}, {5, 5}});
  auto a = kmeans(w, 3, 3);
  EXPECT_EQ(oracle::groups_of(a.labels).size(), 3u);
}

TEST(Agglomerative, HandExamples) {
  auto a = agglomerative(dm_from({{0, 0.1, 0.9}, {0.1, 0, 0.9}, {0.9, 0.9, 0}}), 2);
  EXPECT_EQ(a.labels, (std::vector<int>{0, 0, 1}));
  EXPECT_DOUBLE_EQ(a.history.front(), 0.1);

  auto id = agglomerative(dm_from({{0, 0.3, 0.2}, {0.3, 0, 0.4}, {0.2, 0.4, 0}}), 3);
  EXPECT_EQ(id.labels, (std::vector<int>{0, 1, 2}));
  EXPECT_TRUE(id.history.empty());

  auto one = agglomerative(dm_from({{0, 0.3, 0.2}, {0.3, 0, 0.4}, {0.2, 0.4, 0}}), 1);
  EXPECT_EQ(one.labels, (std::vector<int>{0, 0, 0}));
  EXPECT_EQ(one.history.size(), 2u);
}

TEST(Agglomerative, TightPairsRecovered) {
  auto a = agglomerative(dm_from({{0, 0.05, 0.8, 0.9},
                                  {0.05, 0, 0.85, 0.7},
                                  {0.8, 0.85, 0, 0.02},
                                  {0.9, 0.7, 0.02, 0}}),
                         2);
  EXPECT_EQ(a.labels, (std::vector<int>{0, 0, 1, 1}));
}

TEST(Agglomerative, TiesGoToLowestIndices) {
  // Every distance is 1, so each round merges the pair with the smallest
  // representatives: (0,1) first, then ({0,1},2).
  std::vector<std::vector<double>> d(4, std::vector<double>(4, 1.0));
  for (int i = 0; i < 4; ++i) d[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 0;
  auto a = agglomerative(dm_from(d), 2);
  EXPECT_EQ(oracle::groups_of(a.labels), oracle::average_linkage(d, 2));
  EXPECT_EQ(a.labels, (std::vector<int>{0, 0, 0, 1}));
}

TEST(Agglomerative, MatchesBruteForceSimulator) {
  Rng rng(13);
  for (int t = 0; t < 60; ++t) {
    const std::size_t n = 2 + rng.index(7);
    auto pts = random_points(rng, n, 1 + rng.index(3));
    auto dm = distance_matrix(oracle::as_weights(pts));
    std::vector<std::vector<double>> d(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) d[i][j] = dm.values(i, j);
    }
    for (int k = 1; k <= static_cast<int>(std::min<std::size_t>(n, 3)); ++k) {
      auto a = agglomerative(dm, k);
      EXPECT_EQ(oracle::groups_of(a.labels), oracle::average_linkage(d, k)) << "t=" << t << " k=" << k;
      EXPECT_EQ(a.history.size(), n - static_cast<std::size_t>(k));
    }
  }
}

TEST(Agglomerative, KOutOfRange) {
  EXPECT_THROW(agglomerative(dm_from({{0, 1}, {1, 0}}), 3), PreconditionError);
}

TEST(Gmm, SingleComponentIsSampleMoments) {
  oracle::Points pts{{1, 10}, {2, 14}, {6, 12}, {3, 8}};
  auto fit = gmm_fit(oracle::as_weights(pts), 1, 3);
  EXPECT_NEAR(fit.model.means[0][0], 3.0, 1e-12);
  EXPECT_NEAR(fit.model.means[0][1], 11.0, 1e-12);
  EXPECT_NEAR(fit.model.variances[0][0], (4.0 + 1 + 9 + 0) / 4, 1e-12);
  EXPECT_NEAR(fit.model.variances[0][1], (1.0 + 9 + 1 + 9) / 4, 1e-12);
  EXPECT_DOUBLE_EQ(fit.model.weights[0], 1.0);
  for (std::size_t i = 0; i < 4; ++i) EXPECT_DOUBLE_EQ(fit.responsibilities(i, 0), 1.0);
}

TEST(Gmm, TwoFarBlobsSplitAtMidpoint) {
  auto pts = oracle::blobs({{0}, {100}}, {50, 50}, 1.0, 21);
  auto fit = gmm_fit(oracle::as_weights(pts), 2, 4);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const int side = pts[i][0] > 50 ? 1 : 0;
    EXPECT_EQ(fit.assignment.labels[i], fit.assignment.labels[0] == 0 ? side : 1 - side);
  }
}

TEST(Gmm, ResponsibilitiesNormalizedAndWeightsOnSimplex) {
  Rng rng(5);
  for (int t = 0; t < 10; ++t) {
    auto pts = random_points(rng, 30, 3);
    auto fit = gmm_fit(oracle::as_weights(pts), 3, static_cast<std::uint64_t>(t));
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double s = 0;
      for (double r : fit.responsibilities.row(i)) s += r;
      EXPECT_NEAR(s, 1.0, 1e-9);
    }
    double ws = 0;
    for (double w : fit.model.weights) ws += w;
    EXPECT_NEAR(ws, 1.0, 1e-9);
    for (const auto& var : fit.model.variances) {
      for (double v : var) EXPECT_GE(v, 1e-6);
    }
  }
}

TEST(Gmm, LogLikelihoodNonDecreasing) {
  Rng rng(17);
  for (int t = 0; t < 20; ++t) {
    auto pts = oracle::blobs(random_points(rng, 3, 4), {10, 12, 8}, 1.5, static_cast<std::uint64_t>(t));
    auto fit = gmm_fit(oracle::as_weights(pts), 3, static_cast<std::uint64_t>(t));
    const auto& h = fit.assignment.history;
    for (std::size_t i = 1; i < h.size(); ++i) EXPECT_GE(h[i], h[i - 1] - 1e-9);
  }
}

TEST(Gmm, CollapsedComponentsStayFinite) {
  auto w = oracle::as_weights({{1, 1}, {1, 1}, {1, 1}, {2, 2}});
  auto fit = gmm_fit(w, 3, 1);
  EXPECT_TRUE(std::isfinite(fit.model.log_likelihood));
  EXPECT_TRUE(fit.singular);
  EXPECT_EQ(oracle::groups_of(fit.assignment.labels).size(), 3u);
  EXPECT_THROW(gmm_fit(w, 5, 1), PreconditionError);
}

TEST(Methods, DeterministicUnderSeed) {
  Rng rng(19);
  auto w = oracle::as_weights(random_points(rng, 20, 5));
  EXPECT_EQ(kmeans(w, 3, 8).labels, kmeans(w, 3, 8).labels);
  EXPECT_EQ(gmm_fit(w, 3, 8).assignment.labels, gmm_fit(w, 3, 8).assignment.labels);
  auto dm = distance_matrix(w);
  EXPECT_EQ(agglomerative(dm, 3).labels, agglomerative(dm, 3).labels);
}

TEST(Methods, SeparatedBlobsGiveSameKMeansAndAgglomerativeGroups) {
  for (std::uint64_t s = 0; s < 5; ++s) {
    oracle::Points centers(3, std::vector<double>(10, 0.0));
    for (std::size_t b = 0; b < 3; ++b) centers[b][b] = 30.0;
    auto pts = oracle::blobs(centers, {6, 5, 4}, 1.0, s);
    auto w = oracle::as_weights(pts);
    auto km = kmeans(w, 3, s);
    auto ag = agglomerative(distance_matrix(w), 3);
    EXPECT_EQ(oracle::groups_of(km.labels), oracle::groups_of(ag.labels));
    EXPECT_EQ(km.labels, (std::vector<int>{0, 0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 2, 2, 2, 2}));
  }
}

TEST(Assignments, CsvRoundTrip) {
  ClusterAssignment a;
  a.method = ClusterMethod::gmm;
  a.k = 2;
  a.client_ids = {"x", "y", "z"};
  a.labels = {0, 1, 0};
  std::stringstream ss;
  write_assignment_csv(ss, a);
  auto b = read_assignment_csv(ss, ClusterMethod::gmm);
  EXPECT_EQ(b.client_ids, a.client_ids);
  EXPECT_EQ(b.labels, a.labels);
  EXPECT_EQ(b.k, 2);
}
