#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "cfstack/clustering.hpp"
#include "cfstack/csv.hpp"
#include "cfstack/error.hpp"
#include "cfstack/parallel.hpp"

namespace cfstack {

/// Sum over points of log sum_j pi_j N(x | mu_j, diag var_j), evaluated in log space.
inline double log_likelihood(const GMMModel& gmm, std::span<const WeightVector> vectors) {
  const auto pts = detail::points_of(vectors);
  if (pts.empty()) return 0.0;
  if (pts.front().size() != gmm.dim()) {
    throw ShapeError("mixture has dimension " + std::to_string(gmm.dim()) + ", vectors have " +
                     std::to_string(pts.front().size()));
  }
  const Matrix logp = detail::component_log_densities(gmm, pts);
  double ll = 0.0;
  for (std::size_t i = 0; i < pts.size(); ++i) ll += detail::log_sum_exp(logp.row(i));
  return ll;
}

/// Free parameters of a k-component diagonal mixture in d dimensions:
/// d means and d variances per component plus k-1 mixing weights.
constexpr long long parameter_count(int k, std::size_t d) {
  return static_cast<long long>(k) * 2 * static_cast<long long>(d) + (k - 1);
}

inline double bic_score(double log_likelihood, long long m_p, std::size_t n) {
  if (n < 2) throw PreconditionError("BIC needs at least 2 samples (ln(1) = 0 removes the penalty)");
  return -2.0 * log_likelihood + static_cast<double>(m_p) * std::log(static_cast<double>(n));
}

inline double bic(const GMMModel& gmm, std::span<const WeightVector> vectors) {
  if (vectors.size() < 2) throw PreconditionError("BIC needs at least 2 samples");
  return bic_score(log_likelihood(gmm, vectors), parameter_count(gmm.k(), gmm.dim()), vectors.size());
}

struct BICRecord {
  int k = 0;
  double log_likelihood = 0.0;
  long long m_p = 0;
  std::size_t n = 0;
  double bic = 0.0;

  friend bool operator==(const BICRecord&, const BICRecord&) = default;
};

struct BICResult {
  std::vector<BICRecord> records;  // ascending k
  int selected_k = 0;

  friend bool operator==(const BICResult&, const BICResult&) = default;
};

/// Index of the lowest score; ties resolve to the earliest (smallest k).
inline std::size_t argmin_first(std::span<const double> scores) {
  if (scores.empty()) throw PreconditionError("no scores to choose from");
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] < scores[best]) best = i;
  }
  return best;
}

/// Highest log-likelihood of `restarts` fits with k components, preferring
/// non-singular fits. Restart seeds depend only on (seed, k, restart index).
inline GMMFit best_gmm_fit(std::span<const WeightVector> vectors, int k, std::uint64_t seed,
                           int restarts = 5, const GMMOptions& opt = {}) {
  if (restarts < 1) throw PreconditionError("restarts must be >= 1");
  const auto k_seed = derive_seed(seed, static_cast<std::uint64_t>(k));
  std::optional<GMMFit> best;
  for (int r = 0; r < restarts; ++r) {
    auto fit = gmm_fit(vectors, k, derive_seed(k_seed, static_cast<std::uint64_t>(r)), opt);
    const bool better = !best || (best->singular && !fit.singular) ||
                        (best->singular == fit.singular &&
                         fit.model.log_likelihood > best->model.log_likelihood);
    if (better) best = std::move(fit);
  }
  return std::move(*best);
}

/// Fits mixtures for k = 1..k_max (best of `restarts` seeded fits per k)
/// and selects the k with the lowest BIC. A k whose every restart is
/// singular scores +inf.
inline BICResult select_k(std::span<const WeightVector> vectors, int k_max, std::uint64_t seed,
                          int restarts = 5, const GMMOptions& opt = {}, std::size_t workers = 1) {
  if (k_max < 1 || static_cast<std::size_t>(k_max) > vectors.size()) {
    throw PreconditionError("k_max=" + std::to_string(k_max) + " must lie in [1, " +
                            std::to_string(vectors.size()) + "]");
  }
  if (restarts < 1) throw PreconditionError("restarts must be >= 1");
  if (vectors.size() < 2) throw PreconditionError("BIC needs at least 2 samples");
  BICResult result;
  result.records.resize(static_cast<std::size_t>(k_max));
  parallel_for(static_cast<std::size_t>(k_max), workers, [&](std::size_t idx) {
    const int k = static_cast<int>(idx) + 1;
    const auto fit = best_gmm_fit(vectors, k, seed, restarts, opt);
    const GMMModel& best = fit.model;
    BICRecord rec;
    rec.k = k;
    rec.log_likelihood = best.log_likelihood;
    rec.m_p = parameter_count(k, best.dim());
    rec.n = vectors.size();
    // Singular fits are not eligible: their likelihood grows without bound
    // as a component shrinks onto a single point.
    rec.bic = fit.singular ? std::numeric_limits<double>::infinity()
                           : bic_score(rec.log_likelihood, rec.m_p, rec.n);
    result.records[idx] = rec;
  });
  std::vector<double> scores;
  for (const auto& r : result.records) scores.push_back(r.bic);
  result.selected_k = result.records[argmin_first(scores)].k;
  return result;
}

inline void write_bic_csv(std::ostream& os, const BICResult& r) {
  os << "k,log_likelihood,m_p,n,bic\n";
  for (const auto& rec : r.records) {
    os << rec.k << ',' << csv::format_g17(rec.log_likelihood) << ',' << rec.m_p << ',' << rec.n
       << ',' << csv::format_g17(rec.bic) << '\n';
  }
}

inline BICResult read_bic_csv(std::istream& is) {
  auto t = csv::read_table(is);
  if (t.header != std::vector<std::string>{"k", "log_likelihood", "m_p", "n", "bic"}) {
    throw SchemaError("BIC CSV must have columns k,log_likelihood,m_p,n,bic");
  }
  BICResult r;
  std::vector<double> scores;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    auto k = row.size() == 5 ? csv::parse_int<int>(row[0]) : std::nullopt;
    auto ll = row.size() == 5 ? csv::parse_double(row[1]) : std::nullopt;
    auto mp = row.size() == 5 ? csv::parse_int<long long>(row[2]) : std::nullopt;
    auto n = row.size() == 5 ? csv::parse_int<std::size_t>(row[3]) : std::nullopt;
    auto b = row.size() == 5 ? csv::parse_double(row[4]) : std::nullopt;
    if (!k || !ll || !mp || !n || !b) throw ParseError("BIC CSV row " + std::to_string(i + 1) + " is malformed");
    r.records.push_back({*k, *ll, *mp, *n, *b});
    scores.push_back(*b);
  }
  if (!scores.empty()) r.selected_k = r.records[argmin_first(scores)].k;
  return r;
}

}  // namespace cfstack
