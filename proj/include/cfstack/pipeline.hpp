#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "cfstack/clustered_models.hpp"
#include "cfstack/clustering.hpp"
#include "cfstack/config.hpp"
#include "cfstack/data.hpp"
#include "cfstack/federation.hpp"
#include "cfstack/model_selection.hpp"
#include "cfstack/parallel.hpp"

namespace cfstack {

struct ClientSummary {
  std::string client_id;
  std::vector<int> hidden_layers;
  std::optional<std::uint64_t> init_seed;
  std::vector<std::size_t> label_counts;
  TrainTrace trace;
  WeightVector weights;
  /// The client alone, on the test rows of labels it trained on.
  Metrics test_metrics;
};

struct MethodResult {
  ClusterMethod method = ClusterMethod::kmeans;
  ClusterAssignment assignment;
  std::vector<ClusterModel> models;
};

struct RunReport {
  nlohmann::ordered_json manifest;
  std::vector<ClientSummary> clients;
  DistanceMatrix distances;
  BICResult bic;
  int k = 0;  // k used for clustering (override or BIC choice)
  std::vector<MethodResult> methods;
  TrainTrace global_trace;
  Metrics global_metrics;
  std::vector<std::string> warnings;
};

/// Per-stage seeds split off the root seed.
struct StageSeeds {
  std::uint64_t data, split_test, split_meta, partition, clients, init, meta, bic, kmeans, gmm;

  explicit StageSeeds(std::uint64_t root)
      : data(derive_seed(root, "data")),
        split_test(derive_seed(root, "split/test")),
        split_meta(derive_seed(root, "split/meta")),
        partition(derive_seed(root, "partition")),
        clients(derive_seed(root, "clients")),
        init(derive_seed(root, "init")),
        meta(derive_seed(root, "meta")),
        bic(derive_seed(root, "bic")),
        kmeans(derive_seed(root, "cluster/kmeans")),
        gmm(derive_seed(root, "cluster/gmm")) {}
};

namespace detail {

template <typename F>
auto run_stage(const char* stage, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(stage, e.what());
  }
}

inline CountMatrix resolve_counts(const RunConfig& c, int num_labels) {
  CountMatrix m;
  if (const auto* t = std::get_if<TableOneCounts>(&c.counts)) {
    m = t->clients == 15 ? table_one_counts() : table_one_cycled(t->clients);
  } else if (const auto* u = std::get_if<UniformCounts>(&c.counts)) {
    m = uniform_counts(u->clients, num_labels, u->per_label);
  } else if (const auto* f = std::get_if<FileCounts>(&c.counts)) {
    m = load_count_matrix(f->path);
  } else {
    m = std::get<InlineCounts>(c.counts).matrix;
  }
  if (m.num_labels() != num_labels) {
    throw ConfigError("count matrix has " + std::to_string(m.num_labels()) +
                      " labels but the dataset has " + std::to_string(num_labels));
  }
  if (m.rows.size() < 2) throw ConfigError("need at least 2 clients");
  return m;
}

/// Rows left for clients after the test and meta splits take their floors.
inline std::size_t pool_after_splits(std::size_t n, double test_fraction, double meta_relative) {
  const auto after_test = n - static_cast<std::size_t>(std::floor(static_cast<double>(n) * test_fraction + 1e-9));
  return after_test - static_cast<std::size_t>(std::floor(static_cast<double>(after_test) * meta_relative + 1e-9));
}

}  // namespace detail

/// data -> local training + stack + global model -> distances -> BIC ->
/// clustering -> cluster models -> evaluation. Configuration problems raise
/// ConfigError before any training; stage failures raise StageError.
inline RunReport run_pipeline(const RunConfig& config, std::size_t workers = 1) {
  config.validate();
  const StageSeeds seeds(config.seed);
  const double meta_relative = config.meta_fraction / (1.0 - config.test_fraction);

  RunReport report;

  // Resolve the inputs that determine the shape of the run.
  LabeledDataset full;
  int num_labels = 0;
  if (const auto* s = std::get_if<SyntheticSource>(&config.dataset)) {
    num_labels = s->labels;
  } else {
    const auto& src = std::get<CsvSource>(config.dataset);
    full = detail::run_stage("data", [&] { return load_csv(src.path, src.label_column); });
    num_labels = full.num_labels;
  }
  CountMatrix declared;
  try {
    declared = detail::resolve_counts(config, num_labels);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("counts: ") + e.what());
  }
  report.warnings = count_total_warnings(declared);
  const CountMatrix counts = scale_counts(declared, config.count_scale);
  const std::size_t n_clients = counts.rows.size();
  if (config.k && static_cast<std::size_t>(*config.k) > n_clients) {
    throw ConfigError("k=" + std::to_string(*config.k) + " exceeds the number of clients (" +
                      std::to_string(n_clients) + ")");
  }

  // data
  LabeledDataset test, meta;
  std::vector<LabeledDataset> partitions;
  detail::run_stage("data", [&] {
    if (const auto* s = std::get_if<SyntheticSource>(&config.dataset)) {
      const auto need = counts.label_totals();
      std::vector<std::size_t> per_class(need.size());
      for (std::size_t k = 0; k < need.size(); ++k) {
        std::size_t n = s->samples_per_class;
        if (n == 0) {
          n = std::max<std::size_t>(s->min_per_class, 2);
          n = std::max(n, static_cast<std::size_t>(std::ceil(
                              static_cast<double>(need[k]) /
                              ((1.0 - config.test_fraction) * (1.0 - meta_relative)))));
          while (detail::pool_after_splits(n, config.test_fraction, meta_relative) < need[k]) ++n;
        }
        per_class[k] = n;
      }
      auto spec = axis_blob_spec(s->labels, s->features, s->separation, s->scale, 1);
      spec.samples_per_class = per_class;
      full = generate_synthetic(spec, seeds.data);
    }
    auto [rest, test_part] = split(full, config.test_fraction, seeds.split_test);
    auto [pool, meta_part] = split(rest, meta_relative, seeds.split_meta);
    test = std::move(test_part);
    meta = std::move(meta_part);
    partitions = partition_non_iid(pool, counts, seeds.partition);
    return 0;
  });

  // federation
  std::vector<TrainedClient> clients(n_clients);
  GlobalModel global;
  StackFeatures stack;
  WeightSet weights;
  LabeledDataset global_slice;
  detail::run_stage("federation", [&] {
    parallel_for(n_clients, workers, [&](std::size_t i) {
      const auto arch = i % config.architectures.size();
      ClientSpec spec{counts.rows[i].client_id, config.architectures[arch], partitions[i],
                      config.client_epochs, std::nullopt};
      if (config.shared_init) spec.init_seed = derive_seed(seeds.init, static_cast<std::uint64_t>(arch));
      const auto slice = test.filter_labels(spec.dataset.present_labels());
      clients[i] = train_client(spec, config.client_schedule,
                                derive_seed(seeds.clients, spec.client_id), &slice,
                                config.client_batch_size);
    });
    std::tie(stack, weights) = build_stack(clients, meta);
    std::vector<std::string> all_ids = stack.client_ids;
    global_slice = test.filter_labels(trained_labels(clients, all_ids));
    HeldOutStack held{stack_for_members(clients, all_ids, global_slice.features), global_slice.labels};
    global = train_global(stack, meta.labels, config.meta_training, seeds.meta, &held);
    report.global_trace = global.trace;
    report.global_metrics = evaluate(global, clients, global_slice);
    for (const auto& c : clients) {
      ClientSummary s;
      s.client_id = c.spec.client_id;
      s.hidden_layers = c.spec.hidden_layers;
      s.init_seed = c.spec.init_seed;
      s.label_counts = c.spec.dataset.label_histogram();
      s.trace = c.trace;
      s.weights = c.weight_vector;
      const auto slice = test.filter_labels(c.spec.dataset.present_labels());
      s.test_metrics = compute_metrics(predict(c.net, slice.features), slice.labels, slice.num_labels);
      report.clients.push_back(std::move(s));
    }
    std::sort(report.clients.begin(), report.clients.end(),
              [](const auto& a, const auto& b) { return a.client_id < b.client_id; });
    return 0;
  });

  // clustering: distances between output-layer weights
  report.distances = detail::run_stage("clustering", [&] { return distance_matrix(weights); });

  // model_selection
  const GMMOptions gmm_opt{config.max_iter, config.tol, config.variance_floor};
  report.bic = detail::run_stage("model_selection", [&] {
    const int k_max = std::min<int>(config.k_max, static_cast<int>(weights.size()));
    return select_k(weights, k_max, seeds.bic, config.restarts, gmm_opt, workers);
  });
  report.k = config.k ? *config.k : report.bic.selected_k;

  // clustering: assignments
  detail::run_stage("clustering", [&] {
    for (auto method : config.methods) {
      MethodResult r;
      r.method = method;
      switch (method) {
        case ClusterMethod::kmeans:
          r.assignment = kmeans(weights, report.k, seeds.kmeans, config.max_iter, config.tol);
          break;
        case ClusterMethod::agglomerative:
          r.assignment = agglomerative(report.distances, report.k);
          break;
        case ClusterMethod::gmm:
          // Same restart seeds as the BIC curve, so the mixture behind the
          // assignment is the one scored there.
          r.assignment = best_gmm_fit(weights, report.k, seeds.bic, config.restarts, gmm_opt).assignment;
          break;
      }
      report.methods.push_back(std::move(r));
    }
    return 0;
  });

  // clustered_models
  detail::run_stage("clustered_models", [&] {
    for (auto& r : report.methods) {
      r.models = build_cluster_models(r.assignment, clients, meta, config.meta_training, seeds.meta,
                                      &test, workers);
      evaluate_clusters(r.models, clients, test);
    }
    return 0;
  });

  auto& m = report.manifest;
  m["config"] = config_json(config);
  m["seeds"] = {{"root", config.seed},          {"data", seeds.data},
                {"split_test", seeds.split_test}, {"split_meta", seeds.split_meta},
                {"partition", seeds.partition}, {"clients", seeds.clients}, {"init", seeds.init},
                {"meta", seeds.meta},           {"bic", seeds.bic},
                {"kmeans", seeds.kmeans},       {"gmm", seeds.gmm}};
  m["sizes"] = {{"dataset", full.size()}, {"meta", meta.size()}, {"test", test.size()}};
  auto cl = nlohmann::ordered_json::array();
  for (const auto& c : report.clients) {
    cl.push_back({{"client_id", c.client_id},
                  {"hidden_layers", c.hidden_layers},
                  {"init_seed", c.init_seed ? nlohmann::ordered_json(*c.init_seed) : nlohmann::ordered_json(nullptr)},
                  {"epochs", config.client_epochs},
                  {"seed", derive_seed(seeds.clients, c.client_id)},
                  {"label_counts", c.label_counts}});
  }
  m["clients"] = cl;
  m["bic_selected_k"] = report.bic.selected_k;
  m["k"] = report.k;
  m["warnings"] = report.warnings;
  return report;
}

namespace detail {

/// Writes via a temporary file and rename, so a failed write leaves no partial file.
inline std::filesystem::path write_file(const std::filesystem::path& dir, const std::string& name,
                                        const std::string& content) {
  const auto target = dir / name;
  const auto tmp = dir / (name + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + tmp.string() + "'");
    out << content;
    out.flush();
    if (!out) throw IoError("write to '" + tmp.string() + "' failed");
  }
  std::error_code ec;
  std::filesystem::rename(tmp, target, ec);
  if (ec) {
    std::filesystem::remove(tmp, ec);
    throw IoError("cannot move '" + tmp.string() + "' into place");
  }
  return target;
}

}  // namespace detail

struct MetricsRow {
  std::string model;
  double balanced_accuracy = 0.0, precision = 0.0, recall = 0.0, f1 = 0.0;

  friend bool operator==(const MetricsRow&, const MetricsRow&) = default;
};

/// Global model first, then each method's clusters in order.
inline std::vector<MetricsRow> metrics_rows(const RunReport& r) {
  auto row = [](std::string name, const Metrics& m) {
    return MetricsRow{std::move(name), m.balanced_accuracy, m.macro_precision, m.macro_recall, m.macro_f1};
  };
  std::vector<MetricsRow> out{row("global", r.global_metrics)};
  for (const auto& mr : r.methods) {
    for (const auto& cm : mr.models) {
      out.push_back(row(std::string(to_string(mr.method)) + "_" + std::to_string(cm.cluster), cm.metrics));
    }
  }
  return out;
}

inline void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows) {
  os << "model,balanced_accuracy,precision,recall,f1\n";
  for (const auto& r : rows) {
    os << r.model << ',' << csv::format_g17(r.balanced_accuracy) << ',' << csv::format_g17(r.precision)
       << ',' << csv::format_g17(r.recall) << ',' << csv::format_g17(r.f1) << '\n';
  }
}

inline std::vector<MetricsRow> read_metrics_csv(std::istream& is) {
  auto t = csv::read_table(is);
  if (t.header != std::vector<std::string>{"model", "balanced_accuracy", "precision", "recall", "f1"}) {
    throw SchemaError("metrics CSV must have columns model,balanced_accuracy,precision,recall,f1");
  }
  std::vector<MetricsRow> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    if (row.size() != 5) throw ParseError("metrics CSV row " + std::to_string(i + 1) + " is malformed");
    MetricsRow r{row[0]};
    double* fields[] = {&r.balanced_accuracy, &r.precision, &r.recall, &r.f1};
    for (int c = 0; c < 4; ++c) {
      auto v = csv::parse_double(row[static_cast<std::size_t>(c) + 1]);
      if (!v) throw ParseError("metrics CSV row " + std::to_string(i + 1) + " has a bad number");
      *fields[c] = *v;
    }
    out.push_back(std::move(r));
  }
  return out;
}

inline void write_trace_csv(std::ostream& os, const TrainTrace& t) {
  os << "epoch,loss,accuracy\n";
  for (const auto& e : t.entries) {
    os << e.epoch << ',' << csv::format_g17(e.loss) << ',' << csv::format_g17(e.accuracy) << '\n';
  }
}

inline TrainTrace read_trace_csv(std::istream& is) {
  auto t = csv::read_table(is);
  if (t.header != std::vector<std::string>{"epoch", "loss", "accuracy"}) {
    throw SchemaError("trace CSV must have columns epoch,loss,accuracy");
  }
  TrainTrace out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& row = t.rows[i];
    auto e = row.size() == 3 ? csv::parse_int<int>(row[0]) : std::nullopt;
    auto l = row.size() == 3 ? csv::parse_double(row[1]) : std::nullopt;
    auto a = row.size() == 3 ? csv::parse_double(row[2]) : std::nullopt;
    if (!e || !l || !a) throw ParseError("trace CSV row " + std::to_string(i + 1) + " is malformed");
    out.entries.push_back({*e, *l, *a});
  }
  return out;
}

/// Writes the report files into `dir` and returns their paths. The file
/// set and contents depend only on the report.
inline std::vector<std::filesystem::path> emit_reports(const RunReport& report,
                                                       const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) {
    throw IoError("cannot create output directory '" + dir.string() + "'");
  }
  std::vector<std::filesystem::path> files;
  auto emit = [&](const std::string& name, auto&& writer) {
    std::ostringstream os;
    writer(os);
    files.push_back(detail::write_file(dir, name, os.str()));
  };
  emit("manifest.json", [&](std::ostream& os) { os << report.manifest.dump(2) << '\n'; });
  emit("distance_matrix.csv", [&](std::ostream& os) { write_distance_csv(os, report.distances); });
  emit("bic_curve.csv", [&](std::ostream& os) { write_bic_csv(os, report.bic); });
  for (const auto& mr : report.methods) {
    const std::string m(to_string(mr.method));
    emit("assignments_" + m + ".csv", [&](std::ostream& os) { write_assignment_csv(os, mr.assignment); });
    for (const auto& cm : mr.models) {
      emit("convergence_" + m + "_" + std::to_string(cm.cluster) + ".csv",
           [&](std::ostream& os) { write_trace_csv(os, cm.trace); });
    }
  }
  emit("metrics.csv", [&](std::ostream& os) { write_metrics_csv(os, metrics_rows(report)); });
  return files;
}

}  // namespace cfstack
