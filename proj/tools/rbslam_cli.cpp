// Command line front end: runs manifest-driven experiments and the verification suite.

#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <fmt/format.h>

#include "CLI11.hpp"
#include "rbslam/config.hpp"
#include "rbslam/errors.hpp"
#include "rbslam/experiment.hpp"
#include "rbslam/io.hpp"
#include "rbslam/verify.hpp"

namespace {

using namespace rbslam;

struct CommonArgs {
  std::string manifest;
  std::string scenario;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  bool full_scale = false;
  bool quiet = false;
};

void add_common(CLI::App* app, CommonArgs& a, bool with_scenario) {
  app->add_option("--manifest", a.manifest, "experiment manifest (JSON)")->check(CLI::ExistingFile);
  if (with_scenario)
    app->add_option("--scenario", a.scenario,
                    "use built-in defaults for radio_square, radio_line, magnetic_3d, visual2d or localization");
  app->add_option("--out", a.out, "output directory (overrides the manifest)");
  app->add_option("--seed", a.seed, "root seed (overrides the manifest)");
  app->add_option("--workers", a.workers, "worker threads (overrides RBSLAM_WORKERS and the manifest)")
      ->check(CLI::PositiveNumber);
  app->add_flag("--paper-scale", a.full_scale, "Monte Carlo counts and sweep levels of the original study");
  app->add_flag("-q,--quiet", a.quiet, "no per-run progress");
}

/// Manifest file, else built-in scenario defaults (which then need --seed).
ExperimentManifest resolve(const CommonArgs& a, std::optional<ExperimentManifest> fallback = std::nullopt) {
  ExperimentManifest m;
  if (!a.manifest.empty()) {
    m = load_manifest(a.manifest);
  } else if (!a.scenario.empty()) {
    m = default_manifest(scenario_from_string(a.scenario));
    if (!a.seed) throw ConfigError("seed", "missing (pass --seed or a manifest)");
  } else if (fallback) {
    m = *fallback;
  } else {
    throw ConfigError("manifest", "pass --manifest PATH or --scenario NAME");
  }
  if (a.full_scale) apply_full_scale(m);
  if (a.seed) m.seed = *a.seed;
  if (!a.out.empty()) m.output_dir = a.out;
  if (a.workers) {
    m.workers = *a.workers;
  } else if (const char* env = std::getenv("RBSLAM_WORKERS")) {
    try {
      m.workers = std::stoi(env);
    } catch (const std::exception&) {
      throw ConfigError("RBSLAM_WORKERS", std::string("not an integer: '") + env + "'");
    }
    if (m.workers < 1) throw ConfigError("RBSLAM_WORKERS", "must be at least 1");
  }
  return m;
}

/// Keeps only the manifest methods in `allowed`, falling back to `fallback` when none remain.
void restrict_methods(ExperimentManifest& m, std::initializer_list<Method> allowed, Method fallback) {
  std::vector<Method> keep;
  for (Method x : m.methods)
    if (std::find(allowed.begin(), allowed.end(), x) != allowed.end()) keep.push_back(x);
  m.methods = keep.empty() ? std::vector<Method>{fallback} : keep;
}

int run_and_write(const ExperimentManifest& m, bool quiet) {
  // Re-parse the final manifest so CLI overrides go through the same validation.
  const ExperimentManifest checked = parse_manifest(to_json(m));
  const ExperimentResult res = run_experiment(checked, [&](const RunOutput& r) {
    if (quiet) return;
    std::string line = fmt::format("level {} run {}:", r.level, r.run_id);
    for (const MethodResult& x : r.methods) line += fmt::format(" {} {:.4f}", to_string(x.method), x.rmse);
    std::cerr << line << fmt::format(" ({:.1f} s)\n", r.seconds);
  });
  write_experiment(res, checked.output_dir);
  print_summary(res, std::cout);
  std::cout << "wrote " << checked.output_dir << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rao-Blackwellized particle SLAM with reduced-rank GP maps"};
  app.require_subcommand(1);

  CommonArgs sim_args, filter_args, smooth_args, loc_args, fig_args;
  int sim_runs = 1;
  auto* simulate = app.add_subcommand("simulate", "write simulated data streams");
  add_common(simulate, sim_args, true);
  simulate->add_option("--runs", sim_runs, "repetitions to write per level")->check(CLI::PositiveNumber);

  auto* filter = app.add_subcommand("filter", "run the filters of the manifest (PF, EKF)");
  add_common(filter, filter_args, true);
  auto* smooth = app.add_subcommand("smooth", "run the smoothers of the manifest (PS, EKS)");
  add_common(smooth, smooth_args, true);
  auto* localize = app.add_subcommand("localize", "particle filter localization in a known map");
  add_common(localize, loc_args, false);

  std::string eval_dir;
  auto* evaluate = app.add_subcommand("evaluate", "recompute box statistics from a results directory");
  evaluate->add_option("dir", eval_dir, "directory containing results.csv")->required()->check(CLI::ExistingDirectory);

  VerifyOptions vopt;
  auto* verify = app.add_subcommand("verify", "oracle and derivative checks");
  verify->add_option("--seed", vopt.seed, "seed for the randomized checks");
  verify->add_option("--spectral-scale", vopt.spectral_scale,
                     "scale the spectral density in the kernel check (sensitivity test)");

  int figure = 0;
  auto* reproduce = app.add_subcommand("reproduce-figure", "desk-scale study for figure 4, 5, 7 or 8");
  reproduce->add_option("figure", figure, "figure number")->required()->check(CLI::IsMember({4, 5, 7, 8}));
  add_common(reproduce, fig_args, false);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*simulate) {
      const ExperimentManifest m = parse_manifest(to_json(resolve(sim_args)));
      for (int li = 0; li < static_cast<int>(m.levels.size()); ++li)
        for (int r = 0; r < sim_runs; ++r) {
          const auto dir = std::filesystem::path(m.output_dir) / fmt::format("sim_L{}_run{}", li, r);
          write_simulation(m, li, r, dir);
          std::cout << "wrote " << dir.string() << '\n';
        }
      return 0;
    }
    if (*filter) {
      ExperimentManifest m = resolve(filter_args);
      restrict_methods(m, {Method::PF, Method::EKF}, Method::PF);
      return run_and_write(m, filter_args.quiet);
    }
    if (*smooth) {
      ExperimentManifest m = resolve(smooth_args);
      restrict_methods(m, {Method::PS, Method::EKS}, Method::PS);
      return run_and_write(m, smooth_args.quiet);
    }
    if (*localize) {
      ExperimentManifest fallback = default_manifest(ScenarioKind::localization);
      fallback.seed = 1;
      ExperimentManifest m = resolve(loc_args, fallback);
      if (m.scenario != ScenarioKind::localization) throw ConfigError("scenario", "localize needs 'localization'");
      m.methods = {Method::localize};
      return run_and_write(m, loc_args.quiet);
    }
    if (*evaluate) {
      const auto dir = std::filesystem::path(eval_dir);
      const auto rows = read_results_csv(dir / "results.csv");
      if (rows.empty()) throw Error("results.csv has no rows");
      std::uint64_t seed = 0;
      if (std::filesystem::exists(dir / "resolved_config.json")) seed = load_manifest((dir / "resolved_config.json").string()).seed;
      write_box_stats(rows, seed, dir / "box_stats.csv");
      std::cout << "wrote " << (dir / "box_stats.csv").string() << " from " << rows.size() << " rows\n";
      return 0;
    }
    if (*verify) {
      const VerifyReport rep = verify_suite(vopt);
      rep.print(std::cout);
      return rep.all_passed() ? 0 : 1;
    }
    if (*reproduce) {
      const ExperimentManifest m = resolve(fig_args, figure_manifest(figure));
      return run_and_write(m, fig_args.quiet);
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
