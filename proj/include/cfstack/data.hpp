#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "cfstack/csv.hpp"
#include "cfstack/dataset.hpp"
#include "cfstack/error.hpp"
#include "cfstack/rng.hpp"

namespace cfstack {

/// Isotropic Gaussian blob per class.
struct SyntheticSpec {
  int num_labels = 2;
  int dim = 1;
  std::vector<std::vector<double>> means;  // num_labels x dim
  double scale = 1.0;                      // per-coordinate standard deviation
  std::vector<std::size_t> samples_per_class;

  void validate() const {
    if (num_labels < 2) throw PreconditionError("synthetic spec needs at least 2 labels");
    if (dim < 1) throw PreconditionError("synthetic spec needs dim >= 1");
    if (!(scale >= 0.0) || !std::isfinite(scale)) {
      throw PreconditionError("synthetic scale must be finite and non-negative");
    }
    if (means.size() != static_cast<std::size_t>(num_labels)) {
      throw PreconditionError("synthetic spec needs one mean per label");
    }
    for (const auto& m : means) {
      if (m.size() != static_cast<std::size_t>(dim)) {
        throw PreconditionError("synthetic mean has wrong dimension");
      }
    }
    if (samples_per_class.size() != static_cast<std::size_t>(num_labels)) {
      throw PreconditionError("synthetic spec needs one sample count per label");
    }
    for (auto n : samples_per_class) {
      if (n == 0) throw PreconditionError("synthetic spec has a class with 0 samples");
    }
  }
};

/// Class k centered at `separation` along axis k (axes reused when dim < labels).
inline SyntheticSpec axis_blob_spec(int num_labels, int dim, double separation, double scale,
                                    std::size_t per_class) {
  SyntheticSpec spec;
  spec.num_labels = num_labels;
  spec.dim = dim;
  spec.scale = scale;
  spec.samples_per_class.assign(static_cast<std::size_t>(std::max(num_labels, 0)), per_class);
  for (int k = 0; k < num_labels; ++k) {
    std::vector<double> mean(static_cast<std::size_t>(std::max(dim, 0)), 0.0);
    if (dim > 0) {
      const int axis = k % dim;
      const int ring = k / dim + 1;
      mean[static_cast<std::size_t>(axis)] = separation * ring;
    }
    spec.means.push_back(std::move(mean));
  }
  return spec;
}

/// Samples are emitted class by class, in label order.
inline LabeledDataset generate_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  spec.validate();
  Rng rng(seed);
  LabeledDataset ds;
  ds.num_labels = spec.num_labels;
  const std::size_t total =
      std::accumulate(spec.samples_per_class.begin(), spec.samples_per_class.end(), std::size_t{0});
  ds.features = Matrix(total, static_cast<std::size_t>(spec.dim));
  ds.labels.reserve(total);
  std::size_t r = 0;
  for (int k = 0; k < spec.num_labels; ++k) {
    const auto& mean = spec.means[static_cast<std::size_t>(k)];
    for (std::size_t i = 0; i < spec.samples_per_class[static_cast<std::size_t>(k)]; ++i, ++r) {
      auto row = ds.features.row(r);
      for (std::size_t j = 0; j < mean.size(); ++j) row[j] = mean[j] + spec.scale * rng.normal();
      ds.labels.push_back(k);
    }
  }
  for (int j = 0; j < spec.dim; ++j) ds.feature_names.push_back("x" + std::to_string(j));
  return ds;
}

/// Per-client label counts (one row per client).
struct CountMatrix {
  struct Row {
    std::string client_id;
    long long declared_total = 0;
    std::vector<std::size_t> counts;

    std::size_t sum() const {
      return std::accumulate(counts.begin(), counts.end(), std::size_t{0});
    }
  };
  std::vector<Row> rows;

  int num_labels() const { return rows.empty() ? 0 : static_cast<int>(rows.front().counts.size()); }

  void validate() const {
    if (rows.empty()) throw PreconditionError("count matrix has no rows");
    for (const auto& row : rows) {
      if (row.counts.size() != rows.front().counts.size()) {
        throw PreconditionError("count matrix rows differ in label count");
      }
      if (row.sum() == 0) {
        throw PreconditionError("client '" + row.client_id + "' has no positive count");
      }
    }
  }

  /// Per-label totals across clients.
  std::vector<std::size_t> label_totals() const {
    std::vector<std::size_t> t(static_cast<std::size_t>(num_labels()), 0);
    for (const auto& row : rows) {
      for (std::size_t k = 0; k < t.size(); ++k) t[k] += row.counts[k];
    }
    return t;
  }
};

/// Rows whose per-label counts do not add up to the declared total. The
/// per-label counts are what partitioning uses; the total is informational.
inline std::vector<std::string> count_total_warnings(const CountMatrix& m) {
  std::vector<std::string> out;
  for (const auto& row : m.rows) {
    if (row.declared_total > 0 && static_cast<long long>(row.sum()) != row.declared_total) {
      out.push_back("client '" + row.client_id + "': per-label counts sum to " +
                    std::to_string(row.sum()) + " but declared total is " +
                    std::to_string(row.declared_total) + "; using per-label counts");
    }
  }
  return out;
}

/// Label-count table of the 15-subject, 8-activity wearable HAR study.
/// Subject 6 has no samples of activities 7 and 8, and its declared total
/// (11812) disagrees with its per-label sum (20832).
inline CountMatrix table_one_counts() {
  static constexpr long long raw[15][9] = {
      {27724, 2800, 1148, 1380, 1648, 3556, 9420, 3016, 4756},
      {22712, 2400, 1068, 1216, 1548, 3680, 4880, 2756, 5164},
      {26900, 2400, 1740, 1172, 1516, 3640, 8640, 2952, 4840},
      {26528, 2280, 2092, 1312, 1900, 4028, 7580, 2376, 4960},
      {26924, 2400, 1860, 1160, 1728, 3320, 9020, 2356, 5080},
      {11812, 2532, 1720, 1236, 2132, 4192, 9020, 0, 0},
      {28580, 2472, 1624, 1096, 2012, 4140, 9700, 2836, 4700},
      {23992, 2400, 1648, 1292, 1680, 3080, 7200, 1924, 4768},
      {26212, 2400, 1932, 1140, 2216, 3820, 7368, 2356, 4980},
      {28424, 2392, 1868, 1220, 1952, 3748, 8336, 4328, 4580},
      {28052, 2400, 1828, 1296, 1960, 3440, 9632, 2616, 4880},
      {23680, 2408, 1936, 1120, 1920, 3560, 5840, 2116, 4780},
      {26996, 2420, 1988, 1160, 1992, 3588, 8112, 2836, 4900},
      {25584, 2432, 1824, 1300, 2008, 3816, 6924, 2460, 4820},
      {23504, 2444, 1676, 1416, 1620, 3140, 5760, 2636, 4812},
  };
  CountMatrix m;
  for (int s = 0; s < 15; ++s) {
    CountMatrix::Row row;
    char id[16];
    std::snprintf(id, sizeof id, "s%02d", s + 1);
    row.client_id = id;
    row.declared_total = raw[s][0];
    for (int k = 1; k < 9; ++k) row.counts.push_back(static_cast<std::size_t>(raw[s][k]));
    m.rows.push_back(std::move(row));
  }
  return m;
}

/// `clients` rows cycling through the 15 study rows, ids c001, c002, ...
inline CountMatrix table_one_cycled(std::size_t clients) {
  const auto base = table_one_counts();
  CountMatrix m;
  const int width = clients >= 1000 ? 4 : 3;
  for (std::size_t i = 0; i < clients; ++i) {
    auto row = base.rows[i % base.rows.size()];
    char id[24];
    std::snprintf(id, sizeof id, "c%0*zu", width, i + 1);
    row.client_id = id;
    m.rows.push_back(std::move(row));
  }
  return m;
}

inline CountMatrix uniform_counts(std::size_t clients, int num_labels, std::size_t per_label) {
  CountMatrix m;
  const int width = clients >= 1000 ? 4 : 3;
  for (std::size_t i = 0; i < clients; ++i) {
    char id[24];
    std::snprintf(id, sizeof id, "c%0*zu", width, i + 1);
    CountMatrix::Row row{id, static_cast<long long>(per_label) * num_labels,
                         std::vector<std::size_t>(static_cast<std::size_t>(num_labels), per_label)};
    m.rows.push_back(std::move(row));
  }
  return m;
}

/// Multiplies every count by `factor`, rounding down; nonzero entries stay >= 1.
inline CountMatrix scale_counts(const CountMatrix& m, double factor) {
  if (!(factor > 0.0) || !std::isfinite(factor)) {
    throw PreconditionError("count scale factor must be positive");
  }
  CountMatrix out = m;
  for (auto& row : out.rows) {
    for (auto& c : row.counts) {
      if (c == 0) continue;
      const auto scaled = static_cast<std::size_t>(std::floor(static_cast<double>(c) * factor));
      c = std::max<std::size_t>(scaled, 1);
    }
    row.declared_total =
        static_cast<long long>(std::floor(static_cast<double>(row.declared_total) * factor));
  }
  return out;
}

/// CSV with columns client_id,total,label_0..label_{K-1}.
inline CountMatrix load_count_matrix(const std::filesystem::path& path) {
  const auto t = csv::read_table(path);
  if (t.header.size() < 3 || t.header[0] != "client_id" || t.header[1] != "total") {
    throw SchemaError("count matrix '" + path.string() +
                      "' must have columns client_id,total,label_0,...");
  }
  for (std::size_t c = 2; c < t.header.size(); ++c) {
    if (t.header[c] != "label_" + std::to_string(c - 2)) {
      throw SchemaError("count matrix column " + std::to_string(c + 1) + " should be 'label_" +
                        std::to_string(c - 2) + "', found '" + t.header[c] + "'");
    }
  }
  CountMatrix m;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (row.size() != t.header.size()) {
      throw ParseError("count matrix row " + std::to_string(r + 1) + " has " +
                       std::to_string(row.size()) + " fields");
    }
    CountMatrix::Row out;
    out.client_id = row[0];
    auto total = csv::parse_int<long long>(row[1]);
    if (!total) throw ParseError("count matrix row " + std::to_string(r + 1) + ": bad total");
    out.declared_total = *total;
    for (std::size_t c = 2; c < row.size(); ++c) {
      auto v = csv::parse_int<std::size_t>(row[c]);
      if (!v) {
        throw ParseError("count matrix row " + std::to_string(r + 1) + ", column " +
                         std::to_string(c + 1) + ": not a non-negative integer");
      }
      out.counts.push_back(*v);
    }
    m.rows.push_back(std::move(out));
  }
  m.validate();
  return m;
}

/// Hands each client exactly its per-label counts, drawing without
/// replacement from a per-label shuffled pool. Clients are served in row order.
inline std::vector<LabeledDataset> partition_non_iid(const LabeledDataset& data,
                                                     const CountMatrix& counts,
                                                     std::uint64_t seed) {
  data.validate();
  counts.validate();
  if (counts.num_labels() != data.num_labels) {
    throw InterfaceError("count matrix has " + std::to_string(counts.num_labels()) +
                         " labels, dataset has " + std::to_string(data.num_labels));
  }
  const auto K = static_cast<std::size_t>(data.num_labels);
  std::vector<std::vector<std::size_t>> pools(K);
  for (std::size_t i = 0; i < data.size(); ++i) {
    pools[static_cast<std::size_t>(data.labels[i])].push_back(i);
  }
  const auto need = counts.label_totals();
  std::string deficient;
  for (std::size_t k = 0; k < K; ++k) {
    if (need[k] > pools[k].size()) {
      if (!deficient.empty()) deficient += "; ";
      deficient += "label " + std::to_string(k) + " needs " + std::to_string(need[k]) +
                   ", has " + std::to_string(pools[k].size());
    }
  }
  if (!deficient.empty()) throw PreconditionError("infeasible partition: " + deficient);

  Rng rng(seed);
  for (auto& pool : pools) rng.shuffle(std::span<std::size_t>(pool));

  std::vector<std::size_t> cursor(K, 0);
  std::vector<LabeledDataset> out;
  out.reserve(counts.rows.size());
  for (const auto& row : counts.rows) {
    std::vector<std::size_t> idx;
    for (std::size_t k = 0; k < K; ++k) {
      for (std::size_t c = 0; c < row.counts[k]; ++c) idx.push_back(pools[k][cursor[k]++]);
    }
    std::sort(idx.begin(), idx.end());
    out.push_back(data.subset(idx));
  }
  return out;
}

/// Reads a headered CSV. `label_column` is removed from the features and
/// re-encoded to dense integers in order of first appearance.
inline LabeledDataset load_csv(const std::filesystem::path& path, const std::string& label_column) {
  const auto t = csv::read_table(path);
  auto it = std::find(t.header.begin(), t.header.end(), label_column);
  if (it == t.header.end()) {
    throw SchemaError("'" + path.string() + "' has no label column '" + label_column + "'");
  }
  const auto label_col = static_cast<std::size_t>(it - t.header.begin());
  if (t.rows.empty()) throw PreconditionError("'" + path.string() + "' has no data rows");

  LabeledDataset ds;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    if (c != label_col) ds.feature_names.push_back(t.header[c]);
  }
  ds.features = Matrix(t.rows.size(), ds.feature_names.size());
  std::map<std::string, int> codes;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    if (row.size() != t.header.size()) {
      throw ParseError("row " + std::to_string(r + 1) + ": expected " +
                       std::to_string(t.header.size()) + " fields, found " +
                       std::to_string(row.size()));
    }
    std::size_t out_c = 0;
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c == label_col) continue;
      auto v = csv::parse_double(row[c]);
      if (!v || !std::isfinite(*v)) {
        throw ParseError("row " + std::to_string(r + 1) + ", column " + std::to_string(c + 1) +
                         " ('" + t.header[c] + "'): not a finite number: '" + row[c] + "'");
      }
      ds.features(r, out_c++) = *v;
    }
    auto [pos, inserted] = codes.try_emplace(row[label_col], static_cast<int>(codes.size()));
    if (inserted) ds.label_names.push_back(row[label_col]);
    ds.labels.push_back(pos->second);
  }
  ds.num_labels = static_cast<int>(codes.size());
  ds.validate();
  return ds;
}

/// Stratified split. Per label, floor(n * test_fraction) samples go to test
/// and the remainder to train. Both outputs keep input order.
inline std::pair<LabeledDataset, LabeledDataset> split(const LabeledDataset& data,
                                                       double test_fraction, std::uint64_t seed) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw PreconditionError("test_fraction must lie in (0, 1)");
  }
  data.validate();
  const auto K = static_cast<std::size_t>(data.num_labels);
  std::vector<std::vector<std::size_t>> by_label(K);
  for (std::size_t i = 0; i < data.size(); ++i) {
    by_label[static_cast<std::size_t>(data.labels[i])].push_back(i);
  }
  Rng rng(seed);
  std::vector<std::size_t> train_idx, test_idx;
  for (std::size_t k = 0; k < K; ++k) {
    auto& idx = by_label[k];
    if (idx.empty()) continue;
    if (idx.size() < 2) {
      throw PreconditionError("cannot stratify: label " + std::to_string(k) + " has " +
                              std::to_string(idx.size()) + " sample(s), need >= 2");
    }
    rng.shuffle(std::span<std::size_t>(idx));
    const auto n_test = static_cast<std::size_t>(std::floor(static_cast<double>(idx.size()) * test_fraction + 1e-9));
    test_idx.insert(test_idx.end(), idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_test));
    train_idx.insert(train_idx.end(), idx.begin() + static_cast<std::ptrdiff_t>(n_test), idx.end());
  }
  std::sort(train_idx.begin(), train_idx.end());
  std::sort(test_idx.begin(), test_idx.end());
  return {data.subset(train_idx), data.subset(test_idx)};
}

}  // namespace cfstack
