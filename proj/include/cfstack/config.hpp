#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "cfstack/clustering.hpp"
#include "cfstack/data.hpp"
#include "cfstack/error.hpp"
#include "cfstack/federation.hpp"
#include "cfstack/lr_schedule.hpp"

namespace cfstack {

/// Axis-aligned Gaussian blobs, one per label.
struct SyntheticSource {
  int labels = 8;
  int features = 11;
  double separation = 6.0;
  double scale = 1.0;
  /// 0 = size each class from the count matrix and split fractions.
  std::size_t samples_per_class = 0;
  /// Lower bound per class when sizing automatically.
  std::size_t min_per_class = 50;
};

struct CsvSource {
  std::string path;
  std::string label_column;
};

struct TableOneCounts {
  std::size_t clients = 15;  // rows are cycled beyond 15
};
struct UniformCounts {
  std::size_t clients = 15;
  std::size_t per_label = 100;
};
struct FileCounts {
  std::string path;
};
struct InlineCounts {
  CountMatrix matrix;
};

/// Every knob of a run. Defaults are the documented ones.
struct RunConfig {
  std::uint64_t seed = 42;
  std::variant<SyntheticSource, CsvSource> dataset = SyntheticSource{};
  std::variant<TableOneCounts, UniformCounts, FileCounts, InlineCounts> counts = TableOneCounts{};
  double count_scale = 0.01;

  /// Hidden stacks assigned to clients round-robin; all end in the same width.
  std::vector<std::vector<int>> architectures = {{32, 16}, {64, 16}, {16, 16}};
  /// Clients sharing an architecture start from the same initial weights.
  bool shared_init = true;
  int client_epochs = 50;
  LRSchedule client_schedule{0.01, 0.1, 4};
  std::size_t client_batch_size = 32;

  double meta_fraction = 0.3;
  double test_fraction = 0.2;

  std::vector<ClusterMethod> methods = {ClusterMethod::kmeans, ClusterMethod::agglomerative,
                                        ClusterMethod::gmm};
  std::optional<int> k;
  int k_max = 9;
  int restarts = 5;
  int max_iter = 300;
  double tol = 1e-6;
  double variance_floor = 1e-6;

  // Meta models take one sample per step.
  MetaTraining meta_training{LRSchedule{}, 100, 1};

  std::string output_dir = "out";

  int penultimate_width() const { return architectures.front().back(); }

  /// Throws ConfigError on the first violated constraint.
  void validate() const {
    auto fail = [](const std::string& m) { throw ConfigError(m); };
    if (!(meta_fraction > 0.0 && meta_fraction < 1.0)) fail("split.meta must lie in (0, 1)");
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) fail("split.test must lie in (0, 1)");
    if (!(meta_fraction + test_fraction < 1.0)) fail("split.meta + split.test must be < 1");
    if (!(count_scale > 0.0)) fail("counts.scale must be positive");
    if (architectures.empty()) fail("clients.architectures must not be empty");
    for (const auto& a : architectures) {
      if (a.empty()) fail("every architecture needs at least one hidden layer");
      for (int w : a) {
        if (w < 1) fail("hidden widths must be positive");
      }
      if (a.back() != architectures.front().back()) {
        fail("all architectures must end in the same penultimate width");
      }
    }
    if (client_epochs < 1) fail("clients.epochs must be >= 1");
    if (client_batch_size < 1 || meta_training.batch_size < 1) fail("batch sizes must be >= 1");
    if (meta_training.epochs < 1) fail("meta.epochs must be >= 1");
    try {
      client_schedule.validate();
      meta_training.schedule.validate();
    } catch (const PreconditionError& e) {
      fail(std::string("schedule: ") + e.what());
    }
    if (k && *k < 1) fail("k must be >= 1");
    if (k_max < 1) fail("k_max must be >= 1");
    if (restarts < 1) fail("restarts must be >= 1");
    if (max_iter < 1) fail("max_iter must be >= 1");
    if (!(tol > 0.0)) fail("tol must be positive");
    if (!(variance_floor > 0.0)) fail("variance_floor must be positive");
    std::set<ClusterMethod> seen;
    for (auto m : methods) {
      if (!seen.insert(m).second) fail("method listed twice: " + std::string(to_string(m)));
    }
    if (const auto* s = std::get_if<SyntheticSource>(&dataset)) {
      if (s->labels < 2 || s->features < 1 || !(s->scale >= 0.0)) fail("invalid synthetic dataset");
    }
    if (const auto* c = std::get_if<CsvSource>(&dataset)) {
      if (c->path.empty() || c->label_column.empty()) fail("csv dataset needs path and label_column");
    }
    if (const auto* t = std::get_if<TableOneCounts>(&counts); t && t->clients < 2) fail("need >= 2 clients");
    if (const auto* u = std::get_if<UniformCounts>(&counts); u && (u->clients < 2 || u->per_label < 1)) {
      fail("uniform counts need >= 2 clients and per_label >= 1");
    }
    if (const auto* i = std::get_if<InlineCounts>(&counts); i && i->matrix.rows.size() < 2) {
      fail("need >= 2 clients");
    }
  }
};

namespace detail {

using Json = nlohmann::json;

inline void only_keys(const Json& j, const std::string& where, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw ConfigError(where + " must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* k : keys) ok = ok || it.key() == k;
    if (!ok) throw ConfigError("unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
void read(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + key + " has the wrong type");
  }
}

inline LRSchedule read_schedule(const Json& j, LRSchedule s, const std::string& where) {
  only_keys(j, where, {"base_lr", "max_lr", "step_size"});
  read(j, "base_lr", s.base_lr, where);
  read(j, "max_lr", s.max_lr, where);
  read(j, "step_size", s.step_size, where);
  return s;
}

inline Json schedule_json(const LRSchedule& s) {
  return {{"base_lr", s.base_lr}, {"max_lr", s.max_lr}, {"step_size", s.step_size}};
}

}  // namespace detail

/// Parses the JSON run configuration. Unknown keys are rejected.
inline RunConfig parse_config(const nlohmann::json& j) {
  using detail::only_keys;
  using detail::read;
  RunConfig c;
  only_keys(j, "config", {"seed", "dataset", "counts", "clients", "split", "methods", "k", "k_max",
                          "restarts", "max_iter", "tol", "variance_floor", "meta", "output"});
  read(j, "seed", c.seed, "config");
  if (j.contains("dataset")) {
    const auto& d = j["dataset"];
    only_keys(d, "dataset", {"synthetic", "csv"});
    if (d.size() != 1) throw ConfigError("dataset must hold exactly one of synthetic, csv");
    if (d.contains("synthetic")) {
      SyntheticSource s;
      const auto& sj = d["synthetic"];
      only_keys(sj, "dataset.synthetic",
                {"labels", "features", "separation", "scale", "samples_per_class", "min_per_class"});
      read(sj, "labels", s.labels, "dataset.synthetic");
      read(sj, "features", s.features, "dataset.synthetic");
      read(sj, "separation", s.separation, "dataset.synthetic");
      read(sj, "scale", s.scale, "dataset.synthetic");
      read(sj, "samples_per_class", s.samples_per_class, "dataset.synthetic");
      read(sj, "min_per_class", s.min_per_class, "dataset.synthetic");
      c.dataset = s;
    } else {
      CsvSource s;
      only_keys(d["csv"], "dataset.csv", {"path", "label_column"});
      read(d["csv"], "path", s.path, "dataset.csv");
      read(d["csv"], "label_column", s.label_column, "dataset.csv");
      c.dataset = s;
    }
  }
  if (j.contains("counts")) {
    const auto& cj = j["counts"];
    only_keys(cj, "counts", {"table_one", "uniform", "file", "inline", "scale"});
    read(cj, "scale", c.count_scale, "counts");
    int sources = 0;
    if (cj.contains("table_one")) {
      ++sources;
      TableOneCounts t;
      only_keys(cj["table_one"], "counts.table_one", {"clients"});
      read(cj["table_one"], "clients", t.clients, "counts.table_one");
      c.counts = t;
    }
    if (cj.contains("uniform")) {
      ++sources;
      UniformCounts u;
      only_keys(cj["uniform"], "counts.uniform", {"clients", "per_label"});
      read(cj["uniform"], "clients", u.clients, "counts.uniform");
      read(cj["uniform"], "per_label", u.per_label, "counts.uniform");
      c.counts = u;
    }
    if (cj.contains("file")) {
      ++sources;
      FileCounts f;
      if (!cj["file"].is_string()) throw ConfigError("counts.file must be a path string");
      f.path = cj["file"].get<std::string>();
      c.counts = f;
    }
    if (cj.contains("inline")) {
      ++sources;
      InlineCounts in;
      if (!cj["inline"].is_array()) throw ConfigError("counts.inline must be an array of rows");
      for (const auto& row : cj["inline"]) {
        only_keys(row, "counts.inline[]", {"client_id", "total", "counts"});
        CountMatrix::Row r;
        read(row, "client_id", r.client_id, "counts.inline[]");
        read(row, "total", r.declared_total, "counts.inline[]");
        read(row, "counts", r.counts, "counts.inline[]");
        in.matrix.rows.push_back(std::move(r));
      }
      try {
        in.matrix.validate();
      } catch (const PreconditionError& e) {
        throw ConfigError(std::string("counts.inline: ") + e.what());
      }
      c.counts = in;
    }
    if (sources > 1) throw ConfigError("counts must hold at most one source");
  }
  if (j.contains("clients")) {
    const auto& cj = j["clients"];
    only_keys(cj, "clients", {"architectures", "shared_init", "epochs", "schedule", "batch_size"});
    read(cj, "shared_init", c.shared_init, "clients");
    read(cj, "architectures", c.architectures, "clients");
    read(cj, "epochs", c.client_epochs, "clients");
    read(cj, "batch_size", c.client_batch_size, "clients");
    if (cj.contains("schedule")) c.client_schedule = detail::read_schedule(cj["schedule"], c.client_schedule, "clients.schedule");
  }
  if (j.contains("split")) {
    only_keys(j["split"], "split", {"meta", "test"});
    read(j["split"], "meta", c.meta_fraction, "split");
    read(j["split"], "test", c.test_fraction, "split");
  }
  if (j.contains("methods")) {
    if (!j["methods"].is_array()) throw ConfigError("methods must be an array");
    c.methods.clear();
    for (const auto& m : j["methods"]) {
      auto parsed = m.is_string() ? parse_method(m.get<std::string>()) : std::nullopt;
      if (!parsed) throw ConfigError("unknown clustering method " + m.dump());
      c.methods.push_back(*parsed);
    }
  }
  if (j.contains("k") && !j["k"].is_null()) {
    int k = 0;
    read(j, "k", k, "config");
    c.k = k;
  }
  read(j, "k_max", c.k_max, "config");
  read(j, "restarts", c.restarts, "config");
  read(j, "max_iter", c.max_iter, "config");
  read(j, "tol", c.tol, "config");
  read(j, "variance_floor", c.variance_floor, "config");
  if (j.contains("meta")) {
    const auto& mj = j["meta"];
    only_keys(mj, "meta", {"epochs", "schedule", "batch_size"});
    read(mj, "epochs", c.meta_training.epochs, "meta");
    read(mj, "batch_size", c.meta_training.batch_size, "meta");
    if (mj.contains("schedule")) {
      c.meta_training.schedule = detail::read_schedule(mj["schedule"], c.meta_training.schedule, "meta.schedule");
    }
  }
  read(j, "output", c.output_dir, "config");
  c.validate();
  return c;
}

inline RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError("config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return parse_config(j);
}

/// Resolved configuration as JSON (the manifest echo). Round-trips through
/// parse_config.
inline nlohmann::ordered_json config_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["seed"] = c.seed;
  if (const auto* s = std::get_if<SyntheticSource>(&c.dataset)) {
    j["dataset"]["synthetic"] = {{"labels", s->labels},         {"features", s->features},
                                 {"separation", s->separation}, {"scale", s->scale},
                                 {"samples_per_class", s->samples_per_class},
                                 {"min_per_class", s->min_per_class}};
  } else {
    const auto& cs = std::get<CsvSource>(c.dataset);
    j["dataset"]["csv"] = {{"path", cs.path}, {"label_column", cs.label_column}};
  }
  auto& cj = j["counts"];
  std::visit(
      [&](const auto& src) {
        using T = std::decay_t<decltype(src)>;
        if constexpr (std::is_same_v<T, TableOneCounts>) {
          cj["table_one"] = {{"clients", src.clients}};
        } else if constexpr (std::is_same_v<T, UniformCounts>) {
          cj["uniform"] = {{"clients", src.clients}, {"per_label", src.per_label}};
        } else if constexpr (std::is_same_v<T, FileCounts>) {
          cj["file"] = src.path;
        } else {
          auto rows = nlohmann::ordered_json::array();
          for (const auto& r : src.matrix.rows) {
            rows.push_back({{"client_id", r.client_id}, {"total", r.declared_total}, {"counts", r.counts}});
          }
          cj["inline"] = rows;
        }
      },
      c.counts);
  cj["scale"] = c.count_scale;
  j["clients"] = {{"architectures", c.architectures},
                  {"shared_init", c.shared_init},
                  {"epochs", c.client_epochs},
                  {"schedule", detail::schedule_json(c.client_schedule)},
                  {"batch_size", c.client_batch_size}};
  j["split"] = {{"meta", c.meta_fraction}, {"test", c.test_fraction}};
  auto methods = nlohmann::ordered_json::array();
  for (auto m : c.methods) methods.push_back(std::string(to_string(m)));
  j["methods"] = methods;
  j["k"] = c.k ? nlohmann::ordered_json(*c.k) : nlohmann::ordered_json(nullptr);
  j["k_max"] = c.k_max;
  j["restarts"] = c.restarts;
  j["max_iter"] = c.max_iter;
  j["tol"] = c.tol;
  j["variance_floor"] = c.variance_floor;
  j["meta"] = {{"epochs", c.meta_training.epochs},
               {"schedule", detail::schedule_json(c.meta_training.schedule)},
               {"batch_size", c.meta_training.batch_size}};
  return j;
}

}  // namespace cfstack
