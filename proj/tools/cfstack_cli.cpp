// Command-line front end: run | select-k | cluster | schedule.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "cfstack/cfstack.hpp"

namespace fs = std::filesystem;
using namespace cfstack;

namespace {

constexpr int kExitStage = 1;
constexpr int kExitConfig = 2;

std::vector<ClusterMethod> parse_methods(const std::vector<std::string>& names) {
  std::vector<ClusterMethod> out;
  for (const auto& n : names) {
    auto m = parse_method(n);
    if (!m) throw ConfigError("unknown method '" + n + "' (expected kmeans, agglomerative or gmm)");
    out.push_back(*m);
  }
  return out;
}

WeightSet load_weights(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open weight CSV '" + path + "'");
  return read_weight_csv(in);
}

void write_to(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << content;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Clustered stacked federated learning simulator"};
  app.require_subcommand(1);

  // run
  auto* run = app.add_subcommand("run", "Run the full pipeline and write reports");
  std::string config_path, out_dir, weights_out;
  std::optional<std::uint64_t> seed;
  std::size_t workers = 1;
  std::vector<std::string> methods;
  std::optional<int> k;
  run->add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  run->add_option("--out", out_dir, "Output directory (overrides config 'output')");
  run->add_option("--seed", seed, "Root seed override");
  run->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);
  run->add_option("--method", methods, "Clustering method (repeatable)");
  run->add_option("--k", k, "Cluster count override (default: BIC choice)");
  run->add_option("--weights-out", weights_out, "Also write client weight vectors to this CSV");

  // select-k
  auto* sel = app.add_subcommand("select-k", "BIC curve from a weight-vector CSV");
  std::string weights_path;
  int k_max = 9, restarts = 5;
  std::uint64_t sel_seed = 42;
  std::string sel_out;
  sel->add_option("--weights", weights_path, "Weight-vector CSV")->required()->check(CLI::ExistingFile);
  sel->add_option("--k-max", k_max, "Largest k to try (capped at the vector count)");
  sel->add_option("--restarts", restarts, "EM restarts per k");
  sel->add_option("--seed", sel_seed, "Seed");
  sel->add_option("--out", sel_out, "Output directory (default: stdout)");

  // cluster
  auto* clu = app.add_subcommand("cluster", "Cluster a weight-vector CSV");
  std::string clu_weights, clu_out = "out";
  std::vector<std::string> clu_methods{"kmeans", "agglomerative", "gmm"};
  std::optional<int> clu_k;
  std::uint64_t clu_seed = 42;
  int clu_k_max = 9, clu_restarts = 5;
  clu->add_option("--weights", clu_weights, "Weight-vector CSV")->required()->check(CLI::ExistingFile);
  clu->add_option("--method", clu_methods, "Clustering method (repeatable)");
  clu->add_option("--k", clu_k, "Cluster count (default: BIC choice)");
  clu->add_option("--k-max", clu_k_max, "Largest k for BIC");
  clu->add_option("--restarts", clu_restarts, "EM restarts per k");
  clu->add_option("--seed", clu_seed, "Seed");
  clu->add_option("--out", clu_out, "Output directory");

  // schedule
  auto* sch = app.add_subcommand("schedule", "Dump the cyclical learning-rate curve as CSV");
  LRSchedule schedule;
  int epochs = 100;
  std::string sch_out;
  sch->add_option("--base-lr", schedule.base_lr, "Base learning rate");
  sch->add_option("--max-lr", schedule.max_lr, "Peak learning rate of the first cycle");
  sch->add_option("--step-size", schedule.step_size, "Epochs per half-cycle");
  sch->add_option("--epochs", epochs, "Number of epochs to emit");
  sch->add_option("--out", sch_out, "Output CSV (default: stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitConfig;
  }

  try {
    if (*run) {
      RunConfig config = config_path.empty() ? RunConfig{} : load_config(config_path);
      if (seed) config.seed = *seed;
      if (!methods.empty()) config.methods = parse_methods(methods);
      if (k) config.k = *k;
      if (!out_dir.empty()) config.output_dir = out_dir;
      config.validate();
      const auto report = run_pipeline(config, workers);
      for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
      const auto files = emit_reports(report, config.output_dir);
      if (!weights_out.empty()) {
        std::ostringstream os;
        WeightSet ws;
        for (const auto& c : report.clients) ws.push_back(c.weights);
        write_weight_csv(os, ws);
        write_to(weights_out, os.str());
      }
      std::cout << "selected k (BIC): " << report.bic.selected_k << ", clustering with k=" << report.k << '\n';
      for (const auto& r : metrics_rows(report)) {
        std::cout << r.model << ": balanced_accuracy=" << r.balanced_accuracy << " f1=" << r.f1 << '\n';
      }
      for (const auto& f : files) std::cout << "wrote " << f.string() << '\n';
    } else if (*sel) {
      const auto ws = load_weights(weights_path);
      if (ws.size() < 2) throw ConfigError("need at least 2 weight vectors");
      const int kmax = std::min<int>(k_max, static_cast<int>(ws.size()));
      const auto result = select_k(ws, kmax, sel_seed, restarts);
      std::ostringstream os;
      write_bic_csv(os, result);
      if (sel_out.empty()) {
        std::cout << os.str();
      } else {
        write_to(fs::path(sel_out) / "bic_curve.csv", os.str());
      }
      std::cerr << "selected k: " << result.selected_k << '\n';
    } else if (*clu) {
      const auto ws = load_weights(clu_weights);
      if (ws.size() < 2) throw ConfigError("need at least 2 weight vectors");
      const auto ms = parse_methods(clu_methods);
      const auto dm = distance_matrix(ws);
      const int kmax = std::min<int>(clu_k_max, static_cast<int>(ws.size()));
      const auto bic_result = select_k(ws, kmax, derive_seed(clu_seed, "bic"), clu_restarts);
      const int kk = clu_k.value_or(bic_result.selected_k);
      if (kk < 1 || static_cast<std::size_t>(kk) > ws.size()) throw ConfigError("k out of range");
      std::ostringstream dos, bos;
      write_distance_csv(dos, dm);
      write_bic_csv(bos, bic_result);
      write_to(fs::path(clu_out) / "distance_matrix.csv", dos.str());
      write_to(fs::path(clu_out) / "bic_curve.csv", bos.str());
      for (auto m : ms) {
        ClusterAssignment a;
        switch (m) {
          case ClusterMethod::kmeans: a = kmeans(ws, kk, derive_seed(clu_seed, "cluster/kmeans")); break;
          case ClusterMethod::agglomerative: a = agglomerative(dm, kk); break;
          case ClusterMethod::gmm: a = best_gmm_fit(ws, kk, derive_seed(clu_seed, "bic"), clu_restarts).assignment; break;
        }
        std::ostringstream os;
        write_assignment_csv(os, a);
        write_to(fs::path(clu_out) / ("assignments_" + std::string(to_string(m)) + ".csv"), os.str());
      }
      std::cout << "k=" << kk << " (BIC choice " << bic_result.selected_k << "), wrote " << clu_out << '\n';
    } else if (*sch) {
      schedule.validate();
      std::ostringstream os;
      os << "epoch,lr\n";
      for (int e = 0; e < epochs; ++e) os << e << ',' << csv::format_g17(lr_at(schedule, e)) << '\n';
      if (sch_out.empty()) {
        std::cout << os.str();
      } else {
        write_to(sch_out, os.str());
      }
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const PreconditionError& e) {
    // Raised by argument validation before any computation in the helper commands.
    std::cerr << "invalid arguments: " << e.what() << '\n';
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitStage;
  }
  return 0;
}
