#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "cfstack/cfstack.hpp"

using namespace cfstack;
namespace fs = std::filesystem;

namespace {

const char* kSmall = R"({
  "seed": 5,
  "dataset": {"synthetic": {"labels": 4, "features": 6, "separation": 6.0}},
  "counts": {"uniform": {"clients": 6, "per_label": 20}, "scale": 1.0},
  "clients": {"architectures": [[12, 8], [20, 8], [8]], "epochs": 8},
  "k_max": 4,
  "restarts": 2,
  "meta": {"epochs": 12}
})";

RunConfig small(const std::string& patch = "{}") {
  auto j = nlohmann::json::parse(kSmall);
  j.merge_patch(nlohmann::json::parse(patch));
  return parse_config(j);
}

fs::path fresh_dir(const std::string& name) {
  auto d = fs::temp_directory_path() / "cfstack_pipeline_test" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(CFSTACK_CLI) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(Config, DefaultsAreValid) {
  auto c = parse_config(nlohmann::json::object());
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.methods.size(), 3u);
  EXPECT_EQ(c.meta_training.schedule, LRSchedule{});
  EXPECT_EQ(c.penultimate_width(), 16);
}

TEST(Config, UnknownKeysRejected) {
  EXPECT_THROW(parse_config(nlohmann::json::parse(R"({"sead": 1})")), ConfigError);
  EXPECT_THROW(parse_config(nlohmann::json::parse(R"({"clients": {"epoch": 1}})")), ConfigError);
  EXPECT_THROW(parse_config(nlohmann::json::parse(R"({"meta": {"schedule": {"max": 1}}})")), ConfigError);
}

TEST(Config, ConstraintsChecked) {
  EXPECT_THROW(small(R"({"split": {"meta": 0.5, "test": 0.5}})"), ConfigError);
  EXPECT_THROW(small(R"({"split": {"test": 0}})"), ConfigError);
  EXPECT_THROW(small(R"({"counts": {"uniform": {"clients": 1}}})"), ConfigError);
  EXPECT_THROW(small(R"({"clients": {"architectures": [[8, 4], [8, 6]]}})"), ConfigError);
  EXPECT_THROW(small(R"({"methods": ["kmeans", "spectral"]})"), ConfigError);
  EXPECT_THROW(small(R"({"methods": ["gmm", "gmm"]})"), ConfigError);
  EXPECT_THROW(small(R"({"seed": "x"})"), ConfigError);
  EXPECT_THROW(small(R"({"meta": {"schedule": {"base_lr": 0.1, "max_lr": 0.01}}})"), ConfigError);
  EXPECT_THROW(small(R"({"counts": {"uniform": {"clients": 3}, "table_one": {}}})"), ConfigError);
}

TEST(Config, EchoRoundTrips) {
  auto c = small(R"({"k": 2, "methods": ["gmm"]})");
  auto echoed = parse_config(nlohmann::json::parse(config_json(c).dump()));
  EXPECT_EQ(config_json(echoed), config_json(c));
  EXPECT_EQ(echoed.k, 2);
}

TEST(Config, KBeyondClientsRejectedBeforeWork) {
  EXPECT_THROW(run_pipeline(small(R"({"k": 7})")), ConfigError);
}

TEST(Pipeline, FailingStageIsNamed) {
  auto c = small(R"({"dataset": {"synthetic": {"samples_per_class": 30}}})");
  try {
    run_pipeline(c);
    FAIL();
  } catch (const StageError& e) {
    EXPECT_EQ(e.stage(), "data");
    EXPECT_NE(std::string(e.what()).find("label"), std::string::npos);
  }
}

TEST(Pipeline, ReportStructure) {
  auto r = run_pipeline(small());
  EXPECT_EQ(r.clients.size(), 6u);
  EXPECT_EQ(r.k, r.bic.selected_k);
  EXPECT_EQ(r.bic.records.size(), 4u);
  ASSERT_EQ(r.methods.size(), 3u);
  std::size_t cluster_rows = 0;
  for (const auto& m : r.methods) {
    EXPECT_EQ(m.assignment.k, r.k);
    EXPECT_EQ(m.assignment.client_ids.size(), 6u);
    cluster_rows += m.models.size();
    for (const auto& cm : m.models) EXPECT_EQ(cm.trace.entries.size(), 12u);
  }
  EXPECT_EQ(metrics_rows(r).size(), 1 + cluster_rows);
  EXPECT_EQ(metrics_rows(r).front().model, "global");
  EXPECT_EQ(r.manifest["k"], r.k);
  EXPECT_EQ(r.manifest["clients"].size(), 6u);
  for (std::size_t i = 0; i < 6; ++i) {
    EXPECT_EQ(r.distances.values(i, i), 0.0);
    for (std::size_t j = 0; j < 6; ++j) EXPECT_EQ(r.distances.values(i, j), r.distances.values(j, i));
  }
}

TEST(Pipeline, KOneMatchesGlobalForEveryMethod) {
  auto r = run_pipeline(small(R"({"k": 1})"));
  for (const auto& m : r.methods) {
    ASSERT_EQ(m.models.size(), 1u);
    const auto& cm = m.models[0].metrics;
    EXPECT_EQ(cm.balanced_accuracy, r.global_metrics.balanced_accuracy);
    EXPECT_EQ(cm.macro_precision, r.global_metrics.macro_precision);
    EXPECT_EQ(cm.macro_recall, r.global_metrics.macro_recall);
    EXPECT_EQ(cm.macro_f1, r.global_metrics.macro_f1);
    EXPECT_EQ(m.models[0].trace, r.global_trace);
  }
}

TEST(Pipeline, ReportsAreByteIdenticalAcrossRunsAndWorkers) {
  const auto a = fresh_dir("det_a"), b = fresh_dir("det_b");
  auto fa = emit_reports(run_pipeline(small(), 1), a);
  auto fb = emit_reports(run_pipeline(small(), 3), b);
  ASSERT_EQ(fa.size(), fb.size());
  for (std::size_t i = 0; i < fa.size(); ++i) {
    EXPECT_EQ(fa[i].filename(), fb[i].filename());
    EXPECT_EQ(slurp(fa[i]), slurp(fb[i])) << fa[i];
  }
}

TEST(Reports, FileSetFollowsMethodsAndClusters) {
  auto r = run_pipeline(small(R"({"k": 3})"));
  const auto dir = fresh_dir("files");
  auto files = emit_reports(r, dir);
  std::set<std::string> names;
  for (const auto& f : files) names.insert(f.filename().string());
  int convergence = 0;
  for (const auto& n : names) convergence += n.rfind("convergence_", 0) == 0;
  EXPECT_EQ(convergence, 9);
  for (const char* n : {"manifest.json", "distance_matrix.csv", "bic_curve.csv", "metrics.csv",
                        "assignments_kmeans.csv", "assignments_agglomerative.csv", "assignments_gmm.csv",
                        "convergence_gmm_2.csv"}) {
    EXPECT_TRUE(names.contains(n)) << n;
  }
  for (const auto& e : fs::directory_iterator(dir)) EXPECT_NE(e.path().extension(), ".tmp");
}

TEST(Reports, EmptyMethodListEmitsGlobalOnly) {
  auto r = run_pipeline(small(R"({"methods": []})"));
  const auto dir = fresh_dir("nomethods");
  auto files = emit_reports(r, dir);
  std::set<std::string> names;
  for (const auto& f : files) names.insert(f.filename().string());
  EXPECT_EQ(names, (std::set<std::string>{"manifest.json", "distance_matrix.csv", "bic_curve.csv", "metrics.csv"}));
  std::ifstream in(dir / "metrics.csv");
  auto rows = read_metrics_csv(in);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].model, "global");
}

TEST(Reports, CsvsRoundTrip) {
  auto r = run_pipeline(small(R"({"k": 2})"));
  const auto dir = fresh_dir("roundtrip");
  emit_reports(r, dir);
  std::ifstream metrics(dir / "metrics.csv");
  const auto rows = read_metrics_csv(metrics);
  EXPECT_EQ(rows, metrics_rows(r));
  std::ifstream trace(dir / "convergence_kmeans_0.csv");
  EXPECT_EQ(read_trace_csv(trace), r.methods[0].models[0].trace);
  std::ifstream bic(dir / "bic_curve.csv");
  EXPECT_EQ(read_bic_csv(bic), r.bic);
  std::ifstream assign(dir / "assignments_gmm.csv");
  EXPECT_EQ(read_assignment_csv(assign, ClusterMethod::gmm).labels, r.methods[2].assignment.labels);
  std::ifstream dist(dir / "distance_matrix.csv");
  const auto d = read_distance_csv(dist);
  for (std::size_t i = 0; i < 6; ++i) {
    for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(d.values(i, j), r.distances.values(i, j), 5e-7);
  }
  auto manifest = nlohmann::json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(parse_config(manifest["config"]).seed, 5u);
}

TEST(Reports, UnwritableDirectory) {
  RunReport r;
  const auto blocker = fresh_dir("blocked") / "file";
  std::ofstream(blocker) << "x";
  EXPECT_THROW(emit_reports(r, blocker / "sub"), IoError);
}

TEST(Cli, ExitCodes) {
  const auto dir = fresh_dir("cli");
  std::ofstream(dir / "ok.json") << kSmall;
  std::ofstream(dir / "bad.json") << R"({"colour": 1})";
  std::ofstream(dir / "infeasible.json")
      << R"({"dataset": {"synthetic": {"labels": 4, "samples_per_class": 10}}, "counts": {"uniform": {"clients": 3, "per_label": 20}, "scale": 1}})";
  EXPECT_EQ(run_cli("run --config " + (dir / "ok.json").string() + " --out " + (dir / "out").string() +
                    " --weights-out " + (dir / "w.csv").string()),
            0);
  EXPECT_TRUE(fs::exists(dir / "out" / "metrics.csv"));
  EXPECT_EQ(run_cli("run --config " + (dir / "bad.json").string()), 2);
  EXPECT_EQ(run_cli("run --config " + (dir / "missing.json").string()), 2);
  EXPECT_EQ(run_cli("run --config " + (dir / "infeasible.json").string() + " --out " + (dir / "x").string()), 1);
  EXPECT_EQ(run_cli("select-k --weights " + (dir / "w.csv").string() + " --k-max 3 --out " + (dir / "sk").string()), 0);
  EXPECT_TRUE(fs::exists(dir / "sk" / "bic_curve.csv"));
  EXPECT_EQ(run_cli("cluster --weights " + (dir / "w.csv").string() + " --method agglomerative --k 2 --out " +
                    (dir / "cl").string()),
            0);
  EXPECT_TRUE(fs::exists(dir / "cl" / "assignments_agglomerative.csv"));
  EXPECT_EQ(run_cli("schedule --epochs 30 --out " + (dir / "lr.csv").string()), 0);
  std::ifstream lr(dir / "lr.csv");
  std::string header, first;
  std::getline(lr, header);
  std::getline(lr, first);
  EXPECT_EQ(header, "epoch,lr");
  EXPECT_EQ(first.substr(0, 2), "0,");
  EXPECT_EQ(run_cli("schedule --base-lr 0.1 --max-lr 0.01"), 2);
  EXPECT_EQ(run_cli("frobnicate"), 2);
}
