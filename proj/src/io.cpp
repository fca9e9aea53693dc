#include "rbslam/io.hpp"

#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "rbslam/errors.hpp"
#include "rbslam/evaluation.hpp"

namespace rbslam {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& file) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  std::ofstream os(file, std::ios::binary);
  if (!os) throw Error("cannot open " + file.string() + " for writing");
  return os;
}

std::ofstream open_csv(const fs::path& file, std::uint64_t seed, const std::string& columns) {
  std::ofstream os = open_out(file);
  os << provenance_line(seed) << '\n' << columns << '\n';
  return os;
}

std::string join(const std::vector<double>& v, char sep) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += fmt::format("{}", v[i]);
  }
  return out;
}

void write_trajectories(const ExperimentResult& res, const fs::path& dir) {
  const std::uint64_t seed = res.manifest.seed;
  const bool spatial3 = res.manifest.scenario == ScenarioKind::magnetic_3d;
  const std::string cols = spatial3 ? "run_id,sample_k,t,x,y,z,qw,qx,qy,qz,weight"
                                    : "run_id,sample_k,t,x,y,heading,weight";
  // One file per (method, level), runs in order; std::map keeps file creation deterministic.
  std::map<std::string, std::ofstream> files;
  for (const RunOutput& run : res.runs) {
    for (const TrajectoryExport& tr : run.trajectories) {
      const std::string name = fmt::format("{}_L{}.csv", tr.method, run.level_index);
      auto it = files.find(name);
      if (it == files.end()) it = files.emplace(name, open_csv(dir / "trajectories" / name, seed, cols)).first;
      std::ofstream& os = it->second;
      for (std::size_t t = 0; t < tr.position.size(); ++t) {
        const Eigen::VectorXd& p = tr.position[t];
        const Eigen::VectorXd& o = tr.orientation[t];
        fmt::print(os, "{},{},{},{},{},{}\n", run.run_id, tr.sample_k, t,
                   join(std::vector<double>(p.data(), p.data() + p.size()), ','),
                   join(std::vector<double>(o.data(), o.data() + o.size()), ','), tr.weight);
      }
    }
  }
}

void write_maps(const ExperimentResult& res, const fs::path& dir) {
  for (const RunOutput& run : res.runs) {
    for (const MapGridExport& mg : run.maps) {
      const auto dim = mg.points.empty() ? 2 : mg.points.front().size();
      std::string cols = dim == 3 ? "x,y,z" : "x,y";
      for (Eigen::Index c = 0; c < mg.mean.cols(); ++c) cols += fmt::format(",mean_{}", c);
      for (Eigen::Index c = 0; c < mg.variance.cols(); ++c) cols += fmt::format(",var_{}", c);
      std::ofstream os = open_csv(dir / "maps" / fmt::format("{}_L{}_run{}.csv", mg.method, run.level_index, run.run_id),
                                  res.manifest.seed, cols);
      for (std::size_t i = 0; i < mg.points.size(); ++i) {
        const auto r = static_cast<Eigen::Index>(i);
        std::vector<double> row(mg.points[i].data(), mg.points[i].data() + mg.points[i].size());
        for (Eigen::Index c = 0; c < mg.mean.cols(); ++c) row.push_back(mg.mean(r, c));
        for (Eigen::Index c = 0; c < mg.variance.cols(); ++c) row.push_back(mg.variance(r, c));
        os << join(row, ',') << '\n';
      }
    }
  }
}

void write_landmarks(const ExperimentResult& res, const fs::path& dir) {
  std::map<int, std::ofstream> files;
  for (const RunOutput& run : res.runs) {
    for (const LandmarkExport& lm : run.landmarks) {
      auto it = files.find(run.level_index);
      if (it == files.end())
        it = files
                 .emplace(run.level_index, open_csv(dir / fmt::format("landmarks_L{}.csv", run.level_index),
                                                    res.manifest.seed, "run_id,method,j,x,y,true_x,true_y"))
                 .first;
      for (Eigen::Index j = 0; 2 * j + 1 < lm.estimate.size(); ++j)
        fmt::print(it->second, "{},{},{},{},{},{},{}\n", run.run_id, lm.method, j, lm.estimate[2 * j],
                   lm.estimate[2 * j + 1], lm.truth[2 * j], lm.truth[2 * j + 1]);
    }
  }
}

template <class Stream, class Pose>
void write_truth(Stream& os, const std::vector<Pose>& truth) {
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if constexpr (std::is_same_v<Pose, Pose3D>) {
      const auto& q = truth[t].orientation;
      fmt::print(os, "{},{},{},{},{},{},{},{}\n", t, truth[t].position.x(), truth[t].position.y(),
                 truth[t].position.z(), q.w(), q.x(), q.y(), q.z());
    } else {
      fmt::print(os, "{},{},{},{}\n", t, truth[t].position.x(), truth[t].position.y(), truth[t].heading);
    }
  }
}

template <class Problem>
void write_streams(const Problem& prob, const auto& truth, const fs::path& dir, std::uint64_t seed) {
  using Pose = typename Problem::Pose;
  constexpr bool k3 = std::is_same_v<Pose, Pose3D>;
  std::ofstream tr = open_csv(dir / "truth.csv", seed, k3 ? "t,x,y,z,qw,qx,qy,qz" : "t,x,y,heading");
  write_truth(tr, truth);

  std::ofstream od = open_csv(dir / "odometry.csv", seed,
                              k3 ? "t,dx,dy,dz,dqw,dqx,dqy,dqz,dt,qp_xx,qp_yy,qp_zz,qq_xx,qq_yy,qq_zz"
                                 : "t,dx,dy,dheading,dt,qp_xx,qp_yy,qq");
  for (std::size_t t = 0; t < prob.odometry.size(); ++t) {
    const auto& o = prob.odometry[t];
    if constexpr (k3) {
      const auto& q = o.increment.dq;
      fmt::print(od, "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", t, o.increment.dp.x(), o.increment.dp.y(),
                 o.increment.dp.z(), q.w(), q.x(), q.y(), q.z(), o.noise.dt, o.noise.Qp(0, 0), o.noise.Qp(1, 1),
                 o.noise.Qp(2, 2), o.noise.Qq(0, 0), o.noise.Qq(1, 1), o.noise.Qq(2, 2));
    } else {
      fmt::print(od, "{},{},{},{},{},{},{},{}\n", t, o.increment.dp.x(), o.increment.dp.y(), o.increment.dq,
                 o.noise.dt, o.noise.Qp(0, 0), o.noise.Qp(1, 1), o.noise.Qq);
    }
  }

  std::ofstream ms = open_csv(dir / "measurements.csv", seed, "t,index,id,value");
  for (std::size_t t = 0; t < prob.measurements.size(); ++t) {
    const Measurement& y = prob.measurements[t];
    for (Eigen::Index i = 0; i < y.values.size(); ++i) {
      const auto iu = static_cast<std::size_t>(i);
      const int id = iu < y.ids.size() ? y.ids[iu] : static_cast<int>(i);
      fmt::print(ms, "{},{},{},{}\n", t, i, id, y.values[i]);
    }
  }
}

}  // namespace

std::string provenance_line(std::uint64_t seed) { return fmt::format("# seed={} config=resolved_config.json", seed); }

void write_box_stats(const std::vector<ResultRow>& rows, std::uint64_t seed, const fs::path& file) {
  struct Group {
    std::string scenario;
    double level;
    std::string method;
    std::vector<double> values;
  };
  std::vector<Group> groups;
  for (const ResultRow& r : rows) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
      return g.scenario == r.scenario && g.level == r.level && g.method == r.method;
    });
    if (it == groups.end()) it = groups.insert(groups.end(), Group{r.scenario, r.level, r.method, {}});
    it->values.push_back(r.rmse);
  }
  std::ofstream os =
      open_csv(file, seed, "scenario,level,method,count,median,q1,q3,whisker_low,whisker_high,outliers");
  for (const Group& g : groups) {
    const BoxStats b = mc_aggregate(g.values);
    fmt::print(os, "{},{},{},{},{},{},{},{},{},{}\n", g.scenario, g.level, g.method, b.count, b.median, b.q1, b.q3,
               b.whisker_low, b.whisker_high, join(b.outliers, ';'));
  }
}

void write_experiment(const ExperimentResult& res, const fs::path& dir) {
  const ExperimentManifest& m = res.manifest;
  fs::create_directories(dir);
  {
    std::ofstream os = open_out(dir / "resolved_config.json");
    os << to_json(m).dump(2) << '\n';
  }
  const std::string scenario = to_string(m.scenario);

  std::vector<ResultRow> rows;
  for (const RunOutput& run : res.runs)
    for (const MethodResult& r : run.methods) rows.push_back({scenario, run.level, to_string(r.method), run.run_id, r.rmse});
  {
    std::ofstream os = open_csv(dir / "results.csv", m.seed, "scenario,level,method,run_id,rmse");
    for (const ResultRow& r : rows) fmt::print(os, "{},{},{},{},{}\n", r.scenario, r.level, r.method, r.run_id, r.rmse);
  }
  write_box_stats(rows, m.seed, dir / "box_stats.csv");
  {
    std::ofstream os = open_csv(dir / "metrics.csv", m.seed, "scenario,level,method,run_id,metric,index,value");
    for (const RunOutput& run : res.runs)
      for (const MethodResult& r : run.methods)
        for (const Metric& x : r.metrics)
          fmt::print(os, "{},{},{},{},{},{},{}\n", scenario, run.level, to_string(r.method), run.run_id, x.name,
                     x.index, x.value);
  }
  {
    std::ofstream os = open_csv(dir / "degeneracy.csv", m.seed, "level,run_id,method,t,count");
    for (const RunOutput& run : res.runs)
      for (const DegeneracyExport& d : run.degeneracy)
        for (std::size_t t = 0; t < d.counts.size(); ++t)
          fmt::print(os, "{},{},{},{},{}\n", run.level, run.run_id, d.method, t, d.counts[t]);
  }
  if (m.exports.trajectories) write_trajectories(res, dir);
  if (m.exports.maps) {
    write_maps(res, dir);
    write_landmarks(res, dir);
  }
  {
    std::ofstream os = open_out(dir / "run_log.txt");
    os << provenance_line(m.seed) << '\n';
    for (const RunOutput& run : res.runs) {
      fmt::print(os, "level={} run={} seconds={:.3f}", run.level, run.run_id, run.seconds);
      for (const MethodResult& r : run.methods) fmt::print(os, " {}={:.3f}s", to_string(r.method), r.seconds);
      os << '\n';
    }
    fmt::print(os, "total seconds={:.3f} workers={}\n", res.seconds, m.workers);
  }
}

void write_simulation(const ExperimentManifest& m, int level_index, int run_id, const fs::path& dir) {
  const SeedStream sim = simulation_seeds(m, run_id);
  const double level = m.levels.at(level_index);
  fs::create_directories(dir);
  switch (m.scenario) {
    case ScenarioKind::radio_square:
    case ScenarioKind::radio_line: {
      RadioScenario cfg = m.radio;
      cfg.shape = m.scenario == ScenarioKind::radio_line ? RadioShape::line : RadioShape::square;
      const RadioRun run = gen_radio(cfg, sim);
      write_streams(run.problem, run.truth, dir, m.seed);
      break;
    }
    case ScenarioKind::localization: {
      const RadioRun run = gen_radio(m.localization.radio, sim);
      write_streams(run.problem, run.truth, dir, m.seed);
      break;
    }
    case ScenarioKind::magnetic_3d: {
      MagneticScenario cfg = m.magnetic;
      cfg.bias = level;
      const MagneticRun run = gen_magnetic(cfg, sim);
      write_streams(run.problem, run.truth, dir, m.seed);
      break;
    }
    case ScenarioKind::visual2d: {
      VisualScenario cfg = m.visual;
      cfg.init_var = level;
      const VisualRun run = gen_visual2d(cfg, sim);
      write_streams(run.problem, run.truth, dir, m.seed);
      break;
    }
  }
  nlohmann::json meta;
  meta["seed"] = m.seed;
  meta["level_index"] = level_index;
  meta["level"] = level;
  meta["run_id"] = run_id;
  meta["config"] = to_json(m);
  std::ofstream os = open_out(dir / "metadata.json");
  os << meta.dump(2) << '\n';
}

void print_summary(const ExperimentResult& res, std::ostream& os) {
  const ExperimentManifest& m = res.manifest;
  fmt::print(os, "{}: {} run(s) x {} level(s), seed {}, {:.1f} s\n", to_string(m.scenario), m.monte_carlo_runs,
             m.levels.size(), m.seed, res.seconds);
  for (int li = 0; li < static_cast<int>(m.levels.size()); ++li) {
    fmt::print(os, "level {}\n", m.levels[li]);
    for (Method method : m.methods) {
      const std::vector<double> r = res.rmse(li, method);
      if (r.empty()) continue;
      const BoxStats b = mc_aggregate(r);
      fmt::print(os, "  {:<9} median rmse {:.4f}  [q1 {:.4f}, q3 {:.4f}]\n", to_string(method), b.median, b.q1, b.q3);
      std::vector<std::string> names;
      for (const RunOutput& run : res.runs)
        if (const MethodResult* x = run.find(method))
          for (const Metric& mt : x->metrics)
            if (std::find(names.begin(), names.end(), mt.name) == names.end()) names.push_back(mt.name);
      for (const std::string& name : names) {
        const std::vector<double> v = res.metric(li, method, name);
        fmt::print(os, "  {:<9}   {} median {:.6g} (n={})\n", "", name, mc_aggregate(v).median, v.size());
      }
    }
  }
}

std::vector<ResultRow> read_results_csv(const fs::path& file) {
  std::ifstream is(file);
  if (!is) throw Error("cannot open " + file.string());
  std::vector<ResultRow> rows;
  std::string line;
  bool header = false;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      if (line != "scenario,level,method,run_id,rmse") throw Error(file.string() + ": unexpected header '" + line + "'");
      header = true;
      continue;
    }
    std::vector<std::string> f;
    std::stringstream ss(line);
    for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
    if (f.size() != 5) throw Error(fmt::format("{}:{}: expected 5 fields", file.string(), lineno));
    try {
      rows.push_back({f[0], std::stod(f[1]), f[2], std::stoi(f[3]), std::stod(f[4])});
    } catch (const std::exception&) {
      throw Error(fmt::format("{}:{}: malformed number", file.string(), lineno));
    }
  }
  if (!header) throw Error(file.string() + ": missing header");
  return rows;
}

}  // namespace rbslam
