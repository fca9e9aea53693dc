#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "json.hpp"
#include "rbslam/config.hpp"
#include "rbslam/errors.hpp"
#include "rbslam/experiment.hpp"
#include "rbslam/io.hpp"

namespace rbslam {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string config_error_key(const json& j) {
  try {
    parse_manifest(j);
  } catch (const ConfigError& e) {
    return e.key();
  }
  return "<none>";
}

json minimal(const char* scenario = "radio_square") { return json{{"scenario", scenario}, {"seed", 3}}; }

TEST(Manifest, MinimalUsesScenarioDefaults) {
  const ExperimentManifest m = parse_manifest(minimal("radio_line"));
  EXPECT_EQ(m.scenario, ScenarioKind::radio_line);
  EXPECT_EQ(m.seed, 3u);
  EXPECT_FALSE(m.methods.empty());
  EXPECT_DOUBLE_EQ(m.radio.turn_var, 0.09);
}

TEST(Manifest, SeedIsMandatory) {
  EXPECT_EQ(config_error_key(json{{"scenario", "radio_square"}}), "seed");
}

TEST(Manifest, UnknownKeysAreRejected) {
  json j = minimal();
  j["partciles"] = 10;
  EXPECT_EQ(config_error_key(j), "partciles");
  j = minimal();
  j["radio"] = json{{"hyper", json{{"elll", 0.3}}}};
  EXPECT_EQ(config_error_key(j), "radio.hyper.elll");
}

TEST(Manifest, TypeAndValueErrorsNameTheKey) {
  json j = minimal();
  j["particles"] = "many";
  EXPECT_EQ(config_error_key(j), "particles");
  j = minimal();
  j["particles"] = 0;
  EXPECT_EQ(config_error_key(j), "particles");
  j = minimal();
  j["methods"] = json::array();
  EXPECT_EQ(config_error_key(j), "methods");
  j = minimal();
  j["methods"] = {"PF", "XYZ"};
  EXPECT_EQ(config_error_key(j).rfind("methods", 0), 0u);
  j = minimal();
  j["scenario"] = "submarine";
  EXPECT_EQ(config_error_key(j), "scenario");
  j = minimal();
  j["methods"] = {"localize"};
  EXPECT_EQ(config_error_key(j).rfind("methods", 0), 0u);
}

TEST(Manifest, RoundTripIsExact) {
  for (auto kind : {ScenarioKind::radio_square, ScenarioKind::radio_line, ScenarioKind::magnetic_3d,
                    ScenarioKind::visual2d, ScenarioKind::localization}) {
    ExperimentManifest m = default_manifest(kind);
    m.seed = 77;
    m.levels = {0.0, 0.5};
    m.radio.hyper.ell = 0.3;
    const json j = to_json(m);
    EXPECT_EQ(to_json(parse_manifest(j)), j) << to_string(kind);
  }
}

TEST(Manifest, FigureManifests) {
  EXPECT_EQ(figure_manifest(4).scenario, ScenarioKind::radio_square);
  EXPECT_EQ(figure_manifest(5).scenario, ScenarioKind::radio_line);
  EXPECT_EQ(figure_manifest(7).scenario, ScenarioKind::magnetic_3d);
  EXPECT_EQ(figure_manifest(8).scenario, ScenarioKind::visual2d);
  EXPECT_THROW(figure_manifest(6), ConfigError);
  for (int f : {4, 5, 7, 8}) EXPECT_NO_THROW(parse_manifest(to_json(figure_manifest(f))));
}

TEST(Manifest, FullScaleEnlargesStudy) {
  ExperimentManifest m = default_manifest(ScenarioKind::magnetic_3d);
  m.seed = 1;
  apply_full_scale(m);
  EXPECT_EQ(m.levels, (std::vector<double>{0.0, 1.0, 5.0, 10.0}));
  EXPECT_NO_THROW(parse_manifest(to_json(m)));
}

TEST(Manifest, LoadFromFile) {
  const fs::path p = fs::temp_directory_path() / "rbslam_manifest_test.json";
  std::ofstream(p) << minimal().dump();
  EXPECT_EQ(load_manifest(p.string()).seed, 3u);
  std::ofstream(p) << "{ not json";
  EXPECT_THROW(load_manifest(p.string()), ConfigError);
  fs::remove(p);
}

// --- artifacts ----------------------------------------------------------------

ExperimentManifest tiny_manifest(const fs::path& dir) {
  ExperimentManifest m = default_manifest(ScenarioKind::radio_square);
  m.seed = 5;
  m.methods = {Method::PF, Method::PS, Method::EKF};
  m.monte_carlo_runs = 2;
  m.particles = 10;
  m.smoother_samples = 2;
  m.radio.leg_length = 1.0;
  m.radio.basis = 16;
  m.exports.map_grid_points = 5;
  m.output_dir = dir.string();
  return m;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::string> lines(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

class Artifacts : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    dir_ = fs::temp_directory_path() / "rbslam_artifacts_test";
    fs::remove_all(dir_);
    result_ = new ExperimentResult(run_experiment(tiny_manifest(dir_)));
    write_experiment(*result_, dir_);
  }
  static void TearDownTestSuite() {
    delete result_;
    fs::remove_all(dir_);
  }
  static fs::path dir_;
  static ExperimentResult* result_;
};
fs::path Artifacts::dir_;
ExperimentResult* Artifacts::result_ = nullptr;

TEST_F(Artifacts, TreeIsComplete) {
  for (const char* f : {"resolved_config.json", "results.csv", "box_stats.csv", "metrics.csv", "degeneracy.csv", "run_log.txt"})
    EXPECT_TRUE(fs::exists(dir_ / f)) << f;
  for (const char* m : {"PF", "PS", "EKF", "truth", "odometry"})
    EXPECT_TRUE(fs::exists(dir_ / "trajectories" / (std::string(m) + "_L0.csv"))) << m;
  EXPECT_TRUE(fs::exists(dir_ / "maps" / "truth_L0_run0.csv"));
  EXPECT_TRUE(fs::exists(dir_ / "maps" / "PS_L0_run0.csv"));
}

TEST_F(Artifacts, CsvHeaders) {
  const std::string prov = provenance_line(5);
  EXPECT_EQ(prov, "# seed=5 config=resolved_config.json");
  const std::vector<std::pair<std::string, std::string>> expected{
      {"results.csv", "scenario,level,method,run_id,rmse"},
      {"box_stats.csv", "scenario,level,method,count,median,q1,q3,whisker_low,whisker_high,outliers"},
      {"metrics.csv", "scenario,level,method,run_id,metric,index,value"},
      {"degeneracy.csv", "level,run_id,method,t,count"},
      {"trajectories/PF_L0.csv", "run_id,sample_k,t,x,y,heading,weight"},
      {"maps/truth_L0_run0.csv", "x,y,mean_0,var_0"}};
  for (const auto& [file, header] : expected) {
    const auto ls = lines(dir_ / file);
    ASSERT_GE(ls.size(), 2u) << file;
    EXPECT_EQ(ls[0], prov) << file;
    EXPECT_EQ(ls[1], header) << file;
  }
}

TEST_F(Artifacts, ResultsRowsMatchResult) {
  const auto rows = read_results_csv(dir_ / "results.csv");
  ASSERT_EQ(rows.size(), 6u);  // 2 runs x 3 methods
  for (const auto& r : rows) {
    EXPECT_EQ(r.scenario, "radio_square");
    const auto v = result_->rmse(0, method_from_string(r.method));
    EXPECT_EQ(v[r.run_id], r.rmse);
  }
}

TEST_F(Artifacts, BoxStatsRecomputeIdentically) {
  const fs::path again = dir_ / "box_again.csv";
  write_box_stats(read_results_csv(dir_ / "results.csv"), 5, again);
  EXPECT_EQ(slurp(again), slurp(dir_ / "box_stats.csv"));
}

TEST_F(Artifacts, ResolvedConfigParses) {
  const ExperimentManifest m = load_manifest((dir_ / "resolved_config.json").string());
  EXPECT_EQ(to_json(m), to_json(tiny_manifest(dir_)));
}

TEST_F(Artifacts, MetricsPresent) {
  const auto& run = result_->runs.front();
  ASSERT_NE(run.find(Method::PF), nullptr);
  EXPECT_TRUE(run.find(Method::PF)->metric("unique_ancestors_half").has_value());
  EXPECT_TRUE(run.find(Method::PS)->metric("distinct_after_turn").has_value());
  EXPECT_EQ(result_->metric(0, Method::PS, "sample_rmse").size(), 4u);  // 2 runs x K = 2
}

// Noiseless position odometry leaves the along-track position variance at zero
// on straight legs, so the RTS backward pass has nothing to invert.
TEST(Experiment, SmootherBaselineOnExactOdometryIsSingular) {
  ExperimentManifest m = tiny_manifest(fs::temp_directory_path() / "rbslam_eks_singular");
  m.methods = {Method::EKS};
  m.monte_carlo_runs = 1;
  EXPECT_THROW(run_experiment(m), SingularInnovation);
}

TEST(Experiment, RerunAndWorkerCountGiveIdenticalCsvs) {
  const fs::path a = fs::temp_directory_path() / "rbslam_det_a", b = fs::temp_directory_path() / "rbslam_det_b";
  ExperimentManifest m = tiny_manifest(a);
  write_experiment(run_experiment(m), a);
  m.workers = 2;
  m.output_dir = b.string();
  write_experiment(run_experiment(m), b);
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
    const fs::path rel = fs::relative(e.path(), a);
    EXPECT_EQ(slurp(e.path()), slurp(b / rel)) << rel;
  }
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(Experiment, LevelsArePairedOverSimulationSeeds) {
  ExperimentManifest m = default_manifest(ScenarioKind::visual2d);
  m.seed = 4;
  EXPECT_EQ(simulation_seeds(m, 3).key(), simulation_seeds(m, 3).key());
  EXPECT_NE(simulation_seeds(m, 3).key(), simulation_seeds(m, 4).key());
}

TEST(Io, SimulationDump) {
  const fs::path d = fs::temp_directory_path() / "rbslam_sim_test";
  fs::remove_all(d);
  ExperimentManifest m = tiny_manifest(d);
  write_simulation(m, 0, 1, d);
  for (const char* f : {"truth.csv", "odometry.csv", "measurements.csv", "metadata.json"})
    EXPECT_TRUE(fs::exists(d / f)) << f;
  EXPECT_EQ(lines(d / "measurements.csv")[1], "t,index,id,value");
  const json meta = json::parse(slurp(d / "metadata.json"));
  EXPECT_EQ(meta["run_id"], 1);
  fs::remove_all(d);
}

TEST(Io, ReadResultsRejectsBadSchema) {
  const fs::path p = fs::temp_directory_path() / "rbslam_bad_results.csv";
  std::ofstream(p) << "# seed=1\nscenario,level,rmse\nradio_square,0,1.0\n";
  EXPECT_THROW(read_results_csv(p), Error);
  fs::remove(p);
}

// --- command line -------------------------------------------------------------

int run_cli(const std::string& args) {
  const std::string cmd = std::string(RBSLAM_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

TEST(Cli, ConfigErrorsExitWithTwo) {
  EXPECT_EQ(run_cli("filter --scenario radio_square"), 2);  // no seed
  EXPECT_EQ(run_cli("filter --scenario nowhere --seed 1"), 2);
  const fs::path p = fs::temp_directory_path() / "rbslam_cli_bad.json";
  std::ofstream(p) << R"({"scenario": "radio_square", "seed": 1, "bogus": 2})";
  EXPECT_EQ(run_cli("smooth --manifest " + p.string()), 2);
  fs::remove(p);
}

TEST(Cli, VerifyPassesAndDetectsCorruptedDensity) {
  EXPECT_EQ(run_cli("verify --seed 2"), 0);
  EXPECT_EQ(run_cli("verify --spectral-scale 1.1"), 1);
}

TEST(Cli, SimulateFilterEvaluate) {
  const fs::path d = fs::temp_directory_path() / "rbslam_cli_run";
  fs::remove_all(d);
  ExperimentManifest m = tiny_manifest(d);
  m.monte_carlo_runs = 1;
  const fs::path mf = fs::temp_directory_path() / "rbslam_cli_manifest.json";
  std::ofstream(mf) << to_json(m).dump();
  EXPECT_EQ(run_cli("simulate --manifest " + mf.string() + " --out " + (d / "sim").string()), 0);
  EXPECT_TRUE(fs::exists(d / "sim" / "sim_L0_run0" / "truth.csv"));
  EXPECT_EQ(run_cli("filter -q --manifest " + mf.string() + " --out " + (d / "f").string()), 0);
  const auto rows = read_results_csv(d / "f" / "results.csv");
  ASSERT_EQ(rows.size(), 2u);  // PF and EKF only
  fs::remove(d / "f" / "box_stats.csv");
  EXPECT_EQ(run_cli("evaluate " + (d / "f").string()), 0);
  EXPECT_TRUE(fs::exists(d / "f" / "box_stats.csv"));
  fs::remove_all(d);
  fs::remove(mf);
}

}  // namespace
}  // namespace rbslam
