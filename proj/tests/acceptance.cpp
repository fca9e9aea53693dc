// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// nonzero if any selected criterion fails. Pass criterion ids (A1 ... A10) to
// run a subset.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <fmt/format.h>
#include <omp.h>

#include "rbslam/config.hpp"
#include "rbslam/evaluation.hpp"
#include "rbslam/experiment.hpp"
#include "rbslam/io.hpp"
#include "rbslam/verify.hpp"

namespace fs = std::filesystem;
using namespace rbslam;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

double median(const std::vector<double>& v) { return mc_aggregate(v).median; }

int count_if(const std::vector<double>& v, const std::function<bool(double)>& pred) {
  return static_cast<int>(std::count_if(v.begin(), v.end(), pred));
}

ExperimentResult run(ExperimentManifest m) {
  m.workers = 1;
  return run_experiment(m);
}

Outcome from_check(const VerifyCheck& c) {
  return {c.passed, fmt::format("{} = {:.3e} (tol {:.0e})", c.name, c.observed, c.tolerance)};
}

Outcome a1() { return from_check(check_rb_batch_equivalence(1, 200)); }
Outcome a2() { return from_check(check_chain_rule(1, 100)); }
Outcome a3() {
  Outcome o = from_check(check_kernel_reconstruction());
  o.detail += ", absolute; tolerance is 5% of sigma_f2 = 2";
  return o;
}
Outcome a4() { return from_check(check_ancestor_sampling(1, 100000)); }

// N = 100, K = 50, 20 runs on the square.
Outcome a5() {
  const ExperimentResult r = run(figure_manifest(4));
  const auto half = r.metric(0, Method::PF, "unique_ancestors_half");
  const auto turn = r.metric(0, Method::PS, "distinct_after_turn");
  const int pf_ok = count_if(half, [](double v) { return v == 1.0; });
  const int ps_ok = count_if(turn, [](double v) { return v >= 2.0; });
  return {pf_ok >= 18 && ps_ok >= 18,
          fmt::format("PF single ancestor at T/2 in {}/{} runs (median {}), PS >= 2 distinct after turn in {}/{}",
                      pf_ok, half.size(), median(half), ps_ok, turn.size())};
}

Outcome a6() {
  const ExperimentResult r = run(figure_manifest(5));
  const double ps = median(r.metric(0, Method::PS, "sample_rmse"));
  const double pf = median(r.rmse(0, Method::PF));
  const double ps_h = median(r.metric(0, Method::PS, "heading_msd"));
  const double pf_h = median(r.metric(0, Method::PF, "heading_msd"));
  return {ps < pf && ps_h < pf_h,
          fmt::format("median RMSE PS samples {:.4f} vs PF {:.4f}; heading msd PS {:.3e} vs PF {:.3e}", ps, pf, ps_h,
                      pf_h)};
}

Outcome a7() {
  ExperimentManifest m = figure_manifest(7);
  m.levels = {0.0, 5.0};
  m.monte_carlo_runs = 10;
  m.particles = 100;
  m.smoother_samples = 10;
  const ExperimentResult r = run(m);
  const double ps0 = median(r.rmse(0, Method::PS)), ps5 = median(r.rmse(1, Method::PS));
  const double pf0 = median(r.rmse(0, Method::PF)), pf5 = median(r.rmse(1, Method::PF));
  const double ekf0 = median(r.rmse(0, Method::EKF)), ekf5 = median(r.rmse(1, Method::EKF));
  const bool ok = ps5 <= 2.0 * ps0 && ekf5 > ekf0 && ekf5 > ps5 && ps0 <= pf0 && ps5 <= pf5;
  return {ok, fmt::format("medians o=0: PS {:.3f} PF {:.3f} EKF {:.3f} | o=5: PS {:.3f} PF {:.3f} EKF {:.3f}", ps0,
                          pf0, ekf0, ps5, pf5, ekf5)};
}

Outcome a8() {
  ExperimentManifest m = figure_manifest(8);
  m.levels = {m.levels.front(), m.levels.back()};
  m.monte_carlo_runs = 20;
  m.particles = 100;
  m.smoother_samples = 10;
  const ExperimentResult r = run(m);
  auto med = [&](int li, Method meth) { return median(r.rmse(li, meth)); };
  const bool low = med(0, Method::EKS) <= 1.5 * med(0, Method::PS);
  const bool high = med(1, Method::PS) < med(1, Method::EKS) && med(1, Method::PF) < med(1, Method::EKF);
  return {low && high,
          fmt::format("level {}: EKS {:.3f} PS {:.3f} | level {}: PS {:.3f} EKS {:.3f} PF {:.3f} EKF {:.3f}",
                      m.levels[0], med(0, Method::EKS), med(0, Method::PS), m.levels[1], med(1, Method::PS),
                      med(1, Method::EKS), med(1, Method::PF), med(1, Method::EKF))};
}

int localized_runs(const ExperimentManifest& m) {
  const ExperimentResult r = run(m);
  const double ell = m.localization.radio.hyper.ell;
  return count_if(r.metric(0, Method::localize, "final_error"), [ell](double e) { return e < ell; });
}

Outcome a9() {
  ExperimentManifest m = default_manifest(ScenarioKind::localization);
  m.seed = 1;
  m.monte_carlo_runs = 20;
  const int ok = localized_runs(m);
  return {ok >= 18, fmt::format("final error < ell ({}) in {}/20 runs, {} channels, N = {}",
                                m.localization.radio.hyper.ell, ok, m.localization.radio.channels, m.particles)};
}

// Not a criterion on its own: the sharper single-channel map for comparison.
std::string a9_single_channel() {
  ExperimentManifest m = default_manifest(ScenarioKind::localization);
  m.seed = 1;
  m.monte_carlo_runs = 20;
  m.localization.radio.channels = 1;
  m.localization.radio.hyper.ell = 0.25;
  return fmt::format("single channel, ell = 0.25: {}/20 runs localized", localized_runs(m));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Outcome a10() {
  const fs::path base = fs::temp_directory_path() / "rbslam_acceptance_a10";
  fs::remove_all(base);
  ExperimentManifest m = default_manifest(ScenarioKind::visual2d);
  m.seed = 11;
  m.monte_carlo_runs = 3;
  m.particles = 30;
  m.smoother_samples = 3;
  m.visual.steps = 80;
  omp_set_num_threads(4);
  m.workers = 1;  // OpenMP kernels inside one run
  write_experiment(run_experiment(m), base / "serial_runs");
  m.workers = 3;  // runs spread over a thread pool, serial kernels
  write_experiment(run_experiment(m), base / "parallel_runs");
  int files = 0, differing = 0;
  for (const auto& e : fs::recursive_directory_iterator(base / "serial_runs")) {
    if (!e.is_regular_file() || e.path().extension() != ".csv") continue;
    ++files;
    if (slurp(e.path()) != slurp(base / "parallel_runs" / fs::relative(e.path(), base / "serial_runs"))) ++differing;
  }
  fs::remove_all(base);
  return {files > 0 && differing == 0, fmt::format("{} CSV files compared, {} differ", files, differing)};
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"A1", a1}, {"A2", a2}, {"A3", a3}, {"A4", a4}, {"A5", a5},
      {"A6", a6}, {"A7", a7}, {"A8", a8}, {"A9", a9}, {"A10", a10}};
  std::set<std::string> selected(argv + 1, argv + argc);
  int failures = 0;
  for (const auto& [id, fn] : criteria) {
    if (!selected.empty() && !selected.count(id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    fmt::print("{:<4} {}  {}  [{:.1f} s]\n", id, o.passed ? "PASS" : "FAIL", o.detail, s);
    if (id == "A9") fmt::print("     info  {}\n", a9_single_channel());
    std::fflush(stdout);
    failures += o.passed ? 0 : 1;
  }
  fmt::print("{} criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
