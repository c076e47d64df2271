#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "cfstack/csv.hpp"
#include "cfstack/error.hpp"
#include "cfstack/matrix.hpp"
#include "cfstack/nn.hpp"
#include "cfstack/rng.hpp"

namespace cfstack {

enum class ClusterMethod { kmeans, agglomerative, gmm };

inline std::string_view to_string(ClusterMethod m) {
  switch (m) {
    case ClusterMethod::kmeans: return "kmeans";
    case ClusterMethod::agglomerative: return "agglomerative";
    case ClusterMethod::gmm: return "gmm";
  }
  return "?";
}

inline std::optional<ClusterMethod> parse_method(std::string_view s) {
  if (s == "kmeans") return ClusterMethod::kmeans;
  if (s == "agglomerative") return ClusterMethod::agglomerative;
  if (s == "gmm") return ClusterMethod::gmm;
  return std::nullopt;
}

/// (a . b) / (|a| |b|), clamped to [-1, 1].
inline double cosine_similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw ShapeError("cosine_similarity: lengths " + std::to_string(a.size()) + " and " +
                     std::to_string(b.size()) + " differ");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw UndefinedError("cosine similarity of a zero vector is undefined");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

/// Cosine distances (1 - similarity) between clients.
struct DistanceMatrix {
  std::vector<std::string> client_ids;
  Matrix values;

  std::size_t size() const noexcept { return client_ids.size(); }
  double operator()(std::size_t i, std::size_t j) const noexcept { return values(i, j); }
};

namespace detail {

using Points = std::vector<std::vector<double>>;

inline Points points_of(std::span<const WeightVector> set) {
  Points pts;
  pts.reserve(set.size());
  for (const auto& wv : set) {
    if (!pts.empty() && wv.values.size() != pts.front().size()) {
      throw ShapeError("weight vector '" + wv.client_id + "' has length " +
                       std::to_string(wv.values.size()) + ", expected " +
                       std::to_string(pts.front().size()));
    }
    for (double v : wv.values) {
      if (!std::isfinite(v)) throw PreconditionError("weight vector '" + wv.client_id + "' is not finite");
    }
    pts.push_back(wv.values);
  }
  if (!pts.empty() && pts.front().empty()) throw PreconditionError("weight vectors are empty");
  return pts;
}

inline double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline void check_k(int k, std::size_t n) {
  if (k < 1 || static_cast<std::size_t>(k) > n) {
    throw PreconditionError("k=" + std::to_string(k) + " must lie in [1, " + std::to_string(n) + "]");
  }
}

}  // namespace detail

inline DistanceMatrix distance_matrix(std::span<const WeightVector> weights) {
  if (weights.size() < 2) throw PreconditionError("distance matrix needs at least 2 vectors");
  const auto pts = detail::points_of(weights);
  DistanceMatrix dm;
  const std::size_t n = weights.size();
  dm.values = Matrix(n, n);
  for (const auto& wv : weights) dm.client_ids.push_back(wv.client_id);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      double s;
      try {
        s = cosine_similarity(pts[i], pts[j]);
      } catch (const UndefinedError&) {
        const auto& bad = std::all_of(pts[i].begin(), pts[i].end(), [](double v) { return v == 0.0; })
                              ? weights[i].client_id
                              : weights[j].client_id;
        throw UndefinedError("weight vector of client '" + bad +
                             "' is all zeros; cosine distance undefined");
      }
      const double d = std::clamp(1.0 - s, 0.0, 2.0);
      dm.values(i, j) = d;
      dm.values(j, i) = d;
    }
  }
  return dm;
}

/// Header of client ids, then one row per client with 6-decimal distances.
inline void write_distance_csv(std::ostream& os, const DistanceMatrix& dm) {
  os << csv::join(dm.client_ids) << '\n';
  for (std::size_t i = 0; i < dm.size(); ++i) {
    for (std::size_t j = 0; j < dm.size(); ++j) {
      if (j) os << ',';
      os << csv::format_fixed(dm(i, j), 6);
    }
    os << '\n';
  }
}

inline DistanceMatrix read_distance_csv(std::istream& is) {
  auto t = csv::read_table(is);
  const std::size_t n = t.header.size();
  if (t.rows.size() != n) {
    throw SchemaError("distance CSV has " + std::to_string(n) + " ids but " +
                      std::to_string(t.rows.size()) + " rows");
  }
  DistanceMatrix dm{t.header, Matrix(n, n)};
  for (std::size_t i = 0; i < n; ++i) {
    if (t.rows[i].size() != n) throw ParseError("distance CSV row " + std::to_string(i + 1) + " is ragged");
    for (std::size_t j = 0; j < n; ++j) {
      auto v = csv::parse_double(t.rows[i][j]);
      if (!v) throw ParseError("distance CSV row " + std::to_string(i + 1) + ": bad number");
      dm.values(i, j) = *v;
    }
  }
  return dm;
}

/// Client -> cluster mapping. Labels are canonical: clusters are numbered
/// in order of their first member in client order.
struct ClusterAssignment {
  ClusterMethod method = ClusterMethod::kmeans;
  int k = 0;
  std::vector<std::string> client_ids;
  std::vector<int> labels;
  /// Per-cluster centers (k-means centroids, GMM means); empty for agglomerative.
  std::vector<std::vector<double>> centroids;
  /// k-means: WCSS after each Lloyd iteration. GMM: log-likelihood after each
  /// E-step. Agglomerative: linkage distance of each merge.
  std::vector<double> history;
  int iterations = 0;

  std::vector<std::vector<std::string>> members() const {
    std::vector<std::vector<std::string>> out(static_cast<std::size_t>(k));
    for (std::size_t i = 0; i < labels.size(); ++i) {
      out[static_cast<std::size_t>(labels[i])].push_back(client_ids[i]);
    }
    return out;
  }
};

namespace detail {

/// Renumbers labels by first appearance; returns old -> new.
inline std::vector<int> canonicalize(std::vector<int>& labels, int k) {
  std::vector<int> remap(static_cast<std::size_t>(k), -1);
  int next = 0;
  for (int& l : labels) {
    auto& r = remap[static_cast<std::size_t>(l)];
    if (r < 0) r = next++;
    l = r;
  }
  return remap;
}

template <typename T>
std::vector<T> permute(const std::vector<T>& items, const std::vector<int>& remap) {
  std::vector<T> out(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (remap[i] >= 0) out[static_cast<std::size_t>(remap[i])] = items[i];
  }
  return out;
}

inline Points cluster_means(const Points& pts, const std::vector<int>& labels, int k) {
  const std::size_t d = pts.front().size();
  Points means(static_cast<std::size_t>(k), std::vector<double>(d, 0.0));
  std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    auto& m = means[static_cast<std::size_t>(labels[i])];
    for (std::size_t j = 0; j < d; ++j) m[j] += pts[i][j];
    ++counts[static_cast<std::size_t>(labels[i])];
  }
  for (std::size_t c = 0; c < means.size(); ++c) {
    if (counts[c] == 0) continue;
    for (double& v : means[c]) v /= static_cast<double>(counts[c]);
  }
  return means;
}

inline double wcss_of(const Points& pts, const std::vector<int>& labels, int k) {
  const auto means = cluster_means(pts, labels, k);
  double s = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    s += sq_dist(pts[i], means[static_cast<std::size_t>(labels[i])]);
  }
  return s;
}

/// D^2-weighted seeding.
inline Points kmeans_plus_plus(const Points& pts, int k, Rng& rng) {
  Points centers;
  centers.push_back(pts[rng.index(pts.size())]);
  std::vector<double> d2(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) d2[i] = sq_dist(pts[i], centers.back());
  while (centers.size() < static_cast<std::size_t>(k)) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    std::size_t pick = pts.size();
    if (total > 0.0) {
      const double r = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        acc += d2[i];
        if (d2[i] > 0.0 && r < acc) {
          pick = i;
          break;
        }
      }
      // Rounding can leave r at the very top of the range.
      if (pick == pts.size()) {
        for (std::size_t i = pts.size(); i-- > 0;) {
          if (d2[i] > 0.0) {
            pick = i;
            break;
          }
        }
      }
    } else {
      pick = rng.index(pts.size());
    }
    centers.push_back(pts[pick]);
    for (std::size_t i = 0; i < pts.size(); ++i) d2[i] = std::min(d2[i], sq_dist(pts[i], centers.back()));
  }
  return centers;
}

struct LloydResult {
  Points centroids;
  std::vector<int> labels;
  std::vector<double> wcss_history;
  int iterations = 0;
};

inline std::vector<int> nearest(const Points& pts, const Points& centers) {
  std::vector<int> labels(pts.size());
  for (std::size_t i = 0; i < pts.size(); ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < centers.size(); ++c) {
      const double d = sq_dist(pts[i], centers[c]);
      if (d < best) {
        best = d;
        labels[i] = static_cast<int>(c);
      }
    }
  }
  return labels;
}

inline LloydResult lloyd(const Points& pts, Points centroids, int max_iter, double tol) {
  const int k = static_cast<int>(centroids.size());
  LloydResult res;
  for (int it = 0; it < max_iter; ++it) {
    auto labels = nearest(pts, centroids);
    // Empty cluster repair: move the point farthest from its centroid.
    std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
    for (int l : labels) ++sizes[static_cast<std::size_t>(l)];
    for (int c = 0; c < k; ++c) {
      if (sizes[static_cast<std::size_t>(c)] > 0) continue;
      std::size_t far = 0;
      double far_d = -1.0;
      for (std::size_t i = 0; i < pts.size(); ++i) {
        if (sizes[static_cast<std::size_t>(labels[i])] < 2) continue;
        const double d = sq_dist(pts[i], centroids[static_cast<std::size_t>(labels[i])]);
        if (d > far_d) {
          far_d = d;
          far = i;
        }
      }
      --sizes[static_cast<std::size_t>(labels[far])];
      labels[far] = c;
      sizes[static_cast<std::size_t>(c)] = 1;
    }
    auto next = cluster_means(pts, labels, k);
    double shift = 0.0;
    for (int c = 0; c < k; ++c) {
      shift = std::max(shift, std::sqrt(sq_dist(next[static_cast<std::size_t>(c)],
                                                centroids[static_cast<std::size_t>(c)])));
    }
    centroids = std::move(next);
    res.labels = std::move(labels);
    res.wcss_history.push_back(wcss_of(pts, res.labels, k));
    res.iterations = it + 1;
    if (shift < tol) break;
  }
  if (res.labels.empty()) {
    res.labels = nearest(pts, centroids);
    res.wcss_history.push_back(wcss_of(pts, res.labels, k));
  }
  res.centroids = std::move(centroids);
  return res;
}

}  // namespace detail

/// Within-cluster sum of squared distances to member means.
inline double wcss(std::span<const WeightVector> vectors, const ClusterAssignment& a) {
  if (a.labels.size() != vectors.size()) {
    throw PreconditionError("assignment covers " + std::to_string(a.labels.size()) +
                            " clients, expected " + std::to_string(vectors.size()));
  }
  if (vectors.empty()) return 0.0;
  return detail::wcss_of(detail::points_of(vectors), a.labels, a.k);
}

/// Lloyd's algorithm from k-means++ seeds, until the largest centroid shift
/// drops below `tol` or `max_iter` iterations. Runs `n_init` seedings and
/// keeps the lowest final WCSS; ties keep the earlier seeding.
inline ClusterAssignment kmeans(std::span<const WeightVector> vectors, int k, std::uint64_t seed,
                                int max_iter = 300, double tol = 1e-6, int n_init = 10) {
  detail::check_k(k, vectors.size());
  if (max_iter < 1) throw PreconditionError("max_iter must be >= 1");
  if (n_init < 1) throw PreconditionError("n_init must be >= 1");
  const auto pts = detail::points_of(vectors);
  std::optional<detail::LloydResult> best;
  for (int r = 0; r < n_init; ++r) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(r)));
    auto run = detail::lloyd(pts, detail::kmeans_plus_plus(pts, k, rng), max_iter, tol);
    if (!best || run.wcss_history.back() < best->wcss_history.back()) best = std::move(run);
  }
  auto res = std::move(*best);

  ClusterAssignment a;
  a.method = ClusterMethod::kmeans;
  a.k = k;
  for (const auto& v : vectors) a.client_ids.push_back(v.client_id);
  a.labels = std::move(res.labels);
  const auto remap = detail::canonicalize(a.labels, k);
  a.centroids = detail::permute(res.centroids, remap);
  a.history = std::move(res.wcss_history);
  a.iterations = res.iterations;
  return a;
}

/// Average-linkage agglomeration down to k clusters. Among equally close
/// pairs, the pair whose lowest member indices are lexicographically
/// smallest merges first.
inline ClusterAssignment agglomerative(const DistanceMatrix& dist, int k) {
  const std::size_t n = dist.size();
  detail::check_k(k, n);
  if (dist.values.rows() != n || dist.values.cols() != n) throw ShapeError("distance matrix is not N x N");

  // Active clusters ordered by lowest member; sums of pairwise distances.
  std::vector<std::vector<std::size_t>> clusters(n);
  for (std::size_t i = 0; i < n; ++i) clusters[i] = {i};
  Matrix sums = dist.values;
  std::vector<std::size_t> active(n);
  std::iota(active.begin(), active.end(), std::size_t{0});

  ClusterAssignment a;
  a.method = ClusterMethod::agglomerative;
  a.k = k;
  a.client_ids = dist.client_ids;
  while (active.size() > static_cast<std::size_t>(k)) {
    std::size_t bi = 0, bj = 1;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t x = 0; x < active.size(); ++x) {
      for (std::size_t y = x + 1; y < active.size(); ++y) {
        const auto ca = active[x], cb = active[y];
        const double avg = sums(ca, cb) / static_cast<double>(clusters[ca].size() * clusters[cb].size());
        if (avg < best) {
          best = avg;
          bi = x;
          bj = y;
        }
      }
    }
    const auto keep = active[bi], gone = active[bj];
    for (auto c : active) {
      if (c == keep || c == gone) continue;
      sums(keep, c) += sums(gone, c);
      sums(c, keep) = sums(keep, c);
    }
    clusters[keep].insert(clusters[keep].end(), clusters[gone].begin(), clusters[gone].end());
    active.erase(active.begin() + static_cast<std::ptrdiff_t>(bj));
    a.history.push_back(best);
  }
  a.labels.assign(n, 0);
  for (std::size_t c = 0; c < active.size(); ++c) {
    for (auto m : clusters[active[c]]) a.labels[m] = static_cast<int>(c);
  }
  detail::canonicalize(a.labels, k);
  a.iterations = static_cast<int>(a.history.size());
  return a;
}

/// Diagonal-covariance Gaussian mixture.
struct GMMModel {
  std::vector<double> weights;
  std::vector<std::vector<double>> means;
  std::vector<std::vector<double>> variances;
  double log_likelihood = 0.0;

  int k() const noexcept { return static_cast<int>(weights.size()); }
  std::size_t dim() const noexcept { return means.empty() ? 0 : means.front().size(); }
};

struct GMMFit {
  GMMModel model;
  ClusterAssignment assignment;
  Matrix responsibilities;  // n x k, columns in assignment label order
  /// Some component collapsed onto a point, so the likelihood is unbounded
  /// in practice.
  bool singular = false;
};

struct GMMOptions {
  int max_iter = 300;
  double tol = 1e-6;
  double variance_floor = 1e-6;
};

namespace detail {

/// log(pi_j) + log N(x | mu_j, diag var_j) for every point and component.
inline Matrix component_log_densities(const GMMModel& g, const Points& pts) {
  const auto K = static_cast<std::size_t>(g.k());
  Matrix out(pts.size(), K);
  const double log_2pi = std::log(2.0 * std::numbers::pi);
  for (std::size_t j = 0; j < K; ++j) {
    const double lw = g.weights[j] > 0.0 ? std::log(g.weights[j])
                                          : -std::numeric_limits<double>::infinity();
    double norm = 0.0;
    for (double v : g.variances[j]) norm += log_2pi + std::log(v);
    for (std::size_t i = 0; i < pts.size(); ++i) {
      double q = 0.0;
      for (std::size_t d = 0; d < pts[i].size(); ++d) {
        const double diff = pts[i][d] - g.means[j][d];
        q += diff * diff / g.variances[j][d];
      }
      out(i, j) = lw - 0.5 * (norm + q);
    }
  }
  return out;
}

inline double log_sum_exp(std::span<const double> v) {
  const double m = *std::max_element(v.begin(), v.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double x : v) s += std::exp(x - m);
  return m + std::log(s);
}

/// E-step: fills responsibilities, returns total log-likelihood.
inline double e_step(const GMMModel& g, const Points& pts, Matrix& resp) {
  resp = component_log_densities(g, pts);
  double ll = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    auto row = resp.row(i);
    const double lse = log_sum_exp(row);
    ll += lse;
    for (double& r : row) r = std::exp(r - lse);
  }
  return ll;
}

inline void m_step(GMMModel& g, const Points& pts, const Matrix& resp, double floor) {
  const std::size_t n = pts.size(), d = pts.front().size();
  for (std::size_t j = 0; j < static_cast<std::size_t>(g.k()); ++j) {
    double nj = 0.0;
    for (std::size_t i = 0; i < n; ++i) nj += resp(i, j);
    g.weights[j] = nj / static_cast<double>(n);
    // A component with no mass keeps its previous shape.
    if (nj < 1e-12) continue;
    std::vector<double> mean(d, 0.0), var(d, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < d; ++t) mean[t] += resp(i, j) * pts[i][t];
    }
    for (double& m : mean) m /= nj;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t t = 0; t < d; ++t) {
        const double diff = pts[i][t] - mean[t];
        var[t] += resp(i, j) * diff * diff;
      }
    }
    for (double& v : var) v = std::max(v / nj, floor);
    g.means[j] = std::move(mean);
    g.variances[j] = std::move(var);
  }
  const double total = std::accumulate(g.weights.begin(), g.weights.end(), 0.0);
  for (double& w : g.weights) w /= total;
}

}  // namespace detail

/// EM for a diagonal Gaussian mixture. Means start from k-means++ seeds
/// refined by Lloyd iterations; every component starts with the pooled
/// per-dimension variance. Stops when the log-likelihood gain drops below
/// `tol` or after `max_iter` M-steps.
inline GMMFit gmm_fit(std::span<const WeightVector> vectors, int k, std::uint64_t seed,
                      const GMMOptions& opt = {}) {
  detail::check_k(k, vectors.size());
  if (opt.max_iter < 1) throw PreconditionError("max_iter must be >= 1");
  if (!(opt.variance_floor > 0.0)) throw PreconditionError("variance floor must be positive");
  const auto pts = detail::points_of(vectors);
  const std::size_t n = pts.size(), d = pts.front().size();

  Rng rng(seed);
  auto init = detail::lloyd(pts, detail::kmeans_plus_plus(pts, k, rng), opt.max_iter, opt.tol);

  const auto pooled_mean = detail::cluster_means(pts, std::vector<int>(n, 0), 1).front();
  std::vector<double> pooled_var(d, 0.0);
  for (const auto& p : pts) {
    for (std::size_t t = 0; t < d; ++t) pooled_var[t] += (p[t] - pooled_mean[t]) * (p[t] - pooled_mean[t]);
  }
  for (double& v : pooled_var) v = std::max(v / static_cast<double>(n), opt.variance_floor);

  GMMModel g;
  g.means = init.centroids;
  g.variances.assign(static_cast<std::size_t>(k), pooled_var);
  g.weights.assign(static_cast<std::size_t>(k), 0.0);
  for (int l : init.labels) g.weights[static_cast<std::size_t>(l)] += 1.0 / static_cast<double>(n);

  GMMFit fit;
  Matrix resp;
  double ll = detail::e_step(g, pts, resp);
  fit.assignment.history.push_back(ll);
  int iters = 0;
  for (int it = 1; it <= opt.max_iter; ++it) {
    detail::m_step(g, pts, resp, opt.variance_floor);
    const double next = detail::e_step(g, pts, resp);
    fit.assignment.history.push_back(next);
    iters = it;
    const double gain = next - ll;
    ll = next;
    if (gain < opt.tol) break;
  }
  g.log_likelihood = ll;

  // Hard assignment by largest responsibility; an empty component takes
  // the point it is most responsible for among multi-member clusters.
  std::vector<int> labels(n);
  std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
  for (std::size_t i = 0; i < n; ++i) {
    auto row = resp.row(i);
    labels[i] = static_cast<int>(std::max_element(row.begin(), row.end()) - row.begin());
    ++sizes[static_cast<std::size_t>(labels[i])];
  }
  for (std::size_t j = 0; j < static_cast<std::size_t>(k); ++j) {
    if (sizes[j] > 0) continue;
    std::size_t pick = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (sizes[static_cast<std::size_t>(labels[i])] < 2) continue;
      if (pick == n || resp(i, j) > resp(pick, j)) pick = i;
    }
    --sizes[static_cast<std::size_t>(labels[pick])];
    labels[pick] = static_cast<int>(j);
    sizes[j] = 1;
  }
  const auto remap = detail::canonicalize(labels, k);

  fit.model.weights = detail::permute(g.weights, remap);
  fit.model.means = detail::permute(g.means, remap);
  fit.model.variances = detail::permute(g.variances, remap);
  fit.model.log_likelihood = g.log_likelihood;
  // A component collapsed onto a point: every variance pinned at the floor.
  for (const auto& var : g.variances) {
    fit.singular = fit.singular ||
                   std::all_of(var.begin(), var.end(), [&](double v) { return v <= opt.variance_floor; });
  }
  fit.responsibilities = Matrix(n, static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < static_cast<std::size_t>(k); ++j) {
      fit.responsibilities(i, static_cast<std::size_t>(remap[j])) = resp(i, j);
    }
  }
  auto& a = fit.assignment;
  a.method = ClusterMethod::gmm;
  a.k = k;
  for (const auto& v : vectors) a.client_ids.push_back(v.client_id);
  a.labels = std::move(labels);
  a.centroids = fit.model.means;
  a.iterations = iters;
  return fit;
}

/// `client_id,cluster` rows.
inline void write_assignment_csv(std::ostream& os, const ClusterAssignment& a) {
  os << "client_id,cluster\n";
  for (std::size_t i = 0; i < a.labels.size(); ++i) os << a.client_ids[i] << ',' << a.labels[i] << '\n';
}

inline ClusterAssignment read_assignment_csv(std::istream& is, ClusterMethod method) {
  auto t = csv::read_table(is);
  if (t.header != std::vector<std::string>{"client_id", "cluster"}) {
    throw SchemaError("assignment CSV must have columns client_id,cluster");
  }
  ClusterAssignment a;
  a.method = method;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    auto label = t.rows[r].size() == 2 ? csv::parse_int<int>(t.rows[r][1]) : std::nullopt;
    if (!label || *label < 0) throw ParseError("assignment CSV row " + std::to_string(r + 1) + " is malformed");
    a.client_ids.push_back(t.rows[r][0]);
    a.labels.push_back(*label);
    a.k = std::max(a.k, *label + 1);
  }
  return a;
}

}  // namespace cfstack
