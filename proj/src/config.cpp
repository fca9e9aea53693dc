#include "rbslam/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <type_traits>

#include "rbslam/errors.hpp"

namespace rbslam {

using nlohmann::json;

namespace {

const std::vector<std::pair<ScenarioKind, std::string>> kScenarioNames = {
    {ScenarioKind::radio_square, "radio_square"}, {ScenarioKind::radio_line, "radio_line"},
    {ScenarioKind::magnetic_3d, "magnetic_3d"},   {ScenarioKind::visual2d, "visual2d"},
    {ScenarioKind::localization, "localization"}};

const std::vector<std::pair<Method, std::string>> kMethodNames = {
    {Method::PF, "PF"}, {Method::PS, "PS"}, {Method::EKF, "EKF"}, {Method::EKS, "EKS"}, {Method::localize, "localize"}};

/// Walks one JSON object, records which keys were consumed and rejects the rest.
class Reader {
 public:
  Reader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_.empty() ? "<root>" : path_, "expected an object");
  }

  bool has(const char* key) const { return j_.contains(key); }

  template <class T>
  void get(const char* key, T& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    out = convert<T>(j_.at(key), sub(key));
  }

  void get_vec3(const char* key, Eigen::Vector3d& out) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    const json& v = j_.at(key);
    if (!v.is_array() || v.size() != 3) throw ConfigError(sub(key), "expected an array of three numbers");
    for (int i = 0; i < 3; ++i) out[i] = convert<double>(v[i], sub(key));
  }

  template <class Fn>
  void object(const char* key, Fn&& fn) {
    if (!j_.contains(key)) return;
    seen_.insert(key);
    Reader r(j_.at(key), sub(key));
    fn(r);
    r.finish();
  }

  void finish() const {
    for (const auto& item : j_.items())
      if (!seen_.count(item.key())) throw ConfigError(sub(item.key()), "unknown key");
  }

  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  template <class T>
  static T convert(const json& v, const std::string& path) {
    if constexpr (std::is_same_v<T, bool>) {
      if (!v.is_boolean()) throw ConfigError(path, "expected a boolean");
      return v.get<bool>();
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!v.is_number_integer() || (!v.is_number_unsigned() && v.get<std::int64_t>() < 0))
        throw ConfigError(path, "expected a non-negative integer");
      return v.get<std::uint64_t>();
    } else if constexpr (std::is_integral_v<T>) {
      if (!v.is_number_integer()) throw ConfigError(path, "expected an integer");
      return v.get<T>();
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!v.is_number()) throw ConfigError(path, "expected a number");
      return v.get<T>();
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!v.is_string()) throw ConfigError(path, "expected a string");
      return v.get<std::string>();
    } else if constexpr (std::is_same_v<T, std::vector<double>>) {
      if (!v.is_array()) throw ConfigError(path, "expected an array of numbers");
      std::vector<double> out;
      for (const auto& e : v) out.push_back(convert<double>(e, path));
      return out;
    } else if constexpr (std::is_same_v<T, std::vector<std::string>>) {
      if (!v.is_array()) throw ConfigError(path, "expected an array of strings");
      std::vector<std::string> out;
      for (const auto& e : v) out.push_back(convert<std::string>(e, path));
      return out;
    } else {
      static_assert(sizeof(T) == 0, "unsupported config type");
    }
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

void read_hyper(Reader& r, KernelHyper& h, bool with_lin) {
  r.get("sigma_f2", h.sigma_f2);
  r.get("ell", h.ell);
  if (with_lin) r.get("sigma_lin2", h.sigma_lin2);
  r.get("sigma_noise2", h.sigma_noise2);
}

json hyper_json(const KernelHyper& h, bool with_lin) {
  json j = {{"sigma_f2", h.sigma_f2}, {"ell", h.ell}, {"sigma_noise2", h.sigma_noise2}};
  if (with_lin) j["sigma_lin2"] = h.sigma_lin2;
  return j;
}

void read_radio(Reader& r, RadioScenario& c) {
  r.object("hyper", [&](Reader& h) { read_hyper(h, c.hyper, false); });
  r.get("basis", c.basis);
  r.get("channels", c.channels);
  r.get("leg_length", c.leg_length);
  r.get("step_length", c.step_length);
  r.get("turn_var", c.turn_var);
  r.get("straight_var", c.straight_var);
  r.get("lateral_margin", c.lateral_margin);
}

json radio_json(const RadioScenario& c) {
  return {{"hyper", hyper_json(c.hyper, false)},
          {"basis", c.basis},
          {"channels", c.channels},
          {"leg_length", c.leg_length},
          {"step_length", c.step_length},
          {"turn_var", c.turn_var},
          {"straight_var", c.straight_var},
          {"lateral_margin", c.lateral_margin}};
}

json vec3(const Eigen::Vector3d& v) { return json::array({v[0], v[1], v[2]}); }

void require(bool ok, const std::string& key, const std::string& what) {
  if (!ok) throw ConfigError(key, what);
}

void validate_hyper(const KernelHyper& h, const std::string& key, bool with_lin) {
  require(h.sigma_f2 > 0.0, key + ".sigma_f2", "must be positive");
  require(h.ell > 0.0, key + ".ell", "must be positive");
  require(h.sigma_noise2 > 0.0, key + ".sigma_noise2", "must be positive");
  if (with_lin) require(h.sigma_lin2 > 0.0, key + ".sigma_lin2", "must be positive");
}

void validate_radio(const RadioScenario& c, const std::string& key) {
  validate_hyper(c.hyper, key + ".hyper", false);
  require(c.basis >= 1, key + ".basis", "must be at least 1");
  require(c.channels >= 1, key + ".channels", "must be at least 1");
  require(c.leg_length > 0.0, key + ".leg_length", "must be positive");
  require(c.step_length > 0.0 && c.step_length <= c.leg_length, key + ".step_length",
          "must be positive and at most leg_length");
  require(c.turn_var >= 0.0, key + ".turn_var", "must be non-negative");
  require(c.straight_var >= 0.0, key + ".straight_var", "must be non-negative");
}

void validate(const ExperimentManifest& m) {
  require(!m.methods.empty(), "methods", "must list at least one method");
  for (Method meth : m.methods) {
    const bool ok = m.scenario == ScenarioKind::localization ? meth == Method::localize : meth != Method::localize;
    require(ok, "methods", "method " + to_string(meth) + " is not available for scenario " + to_string(m.scenario));
  }
  require(m.workers >= 1, "workers", "must be at least 1");
  require(m.monte_carlo_runs >= 1, "monte_carlo_runs", "must be at least 1");
  require(m.particles >= 2, "particles", "must be at least 2");
  require(m.smoother_samples >= 1, "smoother_samples", "must be at least 1");
  require(!m.levels.empty(), "levels", "must not be empty");
  require(m.prune_log_ratio > 0.0, "prune_log_ratio", "must be positive");
  require(!m.output_dir.empty(), "output_dir", "must not be empty");
  if (m.scenario == ScenarioKind::visual2d)
    for (double l : m.levels) require(l >= 0.0, "levels", "initialization variances must be non-negative");
  validate_radio(m.radio, "radio");
  validate_radio(m.localization.radio, "localization.radio");
  require(m.localization.position_var >= 0.0, "localization.position_var", "must be non-negative");
  validate_hyper(m.magnetic.hyper, "magnetic.hyper", true);
  require(m.magnetic.basis >= 1 && m.magnetic.truth_basis >= 1, "magnetic.basis", "must be at least 1");
  require(m.magnetic.steps >= 2, "magnetic.steps", "must be at least 2");
  require(m.magnetic.dt > 0.0, "magnetic.dt", "must be positive");
  require(m.visual.landmarks >= 1, "visual.landmarks", "must be at least 1");
  require(m.visual.steps >= 2, "visual.steps", "must be at least 2");
  require(m.visual.sigma_v2 > 0.0, "visual.sigma_v2", "must be positive");
  require(m.visual.prior_var > 0.0, "visual.prior_var", "must be positive");
  require(m.visual.camera.f > 0.0, "visual.focal_length", "must be positive");
  require(m.exports.map_grid_points >= 2, "export.map_grid_points", "must be at least 2");
  require(m.exports.detail_runs >= 0, "export.detail_runs", "must be non-negative");
}

}  // namespace

std::string to_string(ScenarioKind kind) {
  for (const auto& [k, n] : kScenarioNames)
    if (k == kind) return n;
  return "unknown";
}

ScenarioKind scenario_from_string(const std::string& name) {
  for (const auto& [k, n] : kScenarioNames)
    if (n == name) return k;
  throw ConfigError("scenario", "unknown scenario '" + name + "'");
}

std::string to_string(Method m) {
  for (const auto& [k, n] : kMethodNames)
    if (k == m) return n;
  return "unknown";
}

Method method_from_string(const std::string& name) {
  for (const auto& [k, n] : kMethodNames)
    if (n == name) return k;
  throw ConfigError("methods", "unknown method '" + name + "'");
}

bool ExperimentManifest::has(Method m) const { return std::find(methods.begin(), methods.end(), m) != methods.end(); }

ExperimentManifest default_manifest(ScenarioKind kind) {
  ExperimentManifest m;
  m.scenario = kind;
  m.localization.radio.shape = RadioShape::square;
  switch (kind) {
    case ScenarioKind::radio_square:
      m.methods = {Method::PF, Method::PS};
      m.radio.shape = RadioShape::square;
      break;
    case ScenarioKind::radio_line:
      m.methods = {Method::PF, Method::PS};
      m.radio.shape = RadioShape::line;
      m.radio.leg_length = 5.0;
      m.radio.turn_var = 0.3 * 0.3;
      break;
    case ScenarioKind::magnetic_3d:
      m.methods = {Method::PF, Method::PS, Method::EKF};
      m.monte_carlo_runs = 10;
      m.smoother_samples = 10;
      m.levels = {0.0, 5.0};
      break;
    case ScenarioKind::visual2d:
      m.methods = {Method::PF, Method::PS, Method::EKF, Method::EKS};
      m.smoother_samples = 10;
      m.levels = {0.0, 4.0, 25.0};
      break;
    case ScenarioKind::localization:
      m.methods = {Method::localize};
      // Three transmitters and a smoother field: the cloud of 500 particles is too
      // sparse for the single-channel ell = 0.25 map (see README).
      m.localization.radio.channels = 3;
      m.localization.radio.hyper.ell = 0.75;
      m.particles = 500;
      m.smoother_samples = 1;
      break;
  }
  return m;
}

void apply_full_scale(ExperimentManifest& m) {
  switch (m.scenario) {
    case ScenarioKind::radio_line:
      m.monte_carlo_runs = 100;
      break;
    case ScenarioKind::magnetic_3d:
      m.monte_carlo_runs = 20;
      m.levels = {0.0, 1.0, 5.0, 10.0};
      break;
    case ScenarioKind::visual2d:
      m.monte_carlo_runs = 20;
      break;
    default:
      break;
  }
}

ExperimentManifest figure_manifest(int figure) {
  ScenarioKind kind{};
  switch (figure) {
    case 4: kind = ScenarioKind::radio_square; break;
    case 5: kind = ScenarioKind::radio_line; break;
    case 7: kind = ScenarioKind::magnetic_3d; break;
    case 8: kind = ScenarioKind::visual2d; break;
    default: throw ConfigError("figure", "no study for figure " + std::to_string(figure) + " (expected 4, 5, 7 or 8)");
  }
  ExperimentManifest m = default_manifest(kind);
  m.seed = 1;
  m.output_dir = "figure" + std::to_string(figure);
  return m;
}

ExperimentManifest parse_manifest(const json& j) {
  Reader root(j, "");
  if (!root.has("scenario")) throw ConfigError("scenario", "missing (required)");
  std::string scen;
  root.get("scenario", scen);
  ExperimentManifest m = default_manifest(scenario_from_string(scen));
  if (!root.has("seed")) throw ConfigError("seed", "missing (required)");
  root.get("seed", m.seed);
  if (root.has("methods")) {
    std::vector<std::string> names;
    root.get("methods", names);
    m.methods.clear();
    for (const auto& n : names) {
      const Method meth = method_from_string(n);
      if (!m.has(meth)) m.methods.push_back(meth);
    }
  }
  root.get("output_dir", m.output_dir);
  root.get("workers", m.workers);
  root.get("monte_carlo_runs", m.monte_carlo_runs);
  root.get("particles", m.particles);
  root.get("smoother_samples", m.smoother_samples);
  root.get("levels", m.levels);
  root.get("prune_log_ratio", m.prune_log_ratio);
  root.object("radio", [&](Reader& r) { read_radio(r, m.radio); });
  root.object("magnetic", [&](Reader& r) {
    r.object("hyper", [&](Reader& h) { read_hyper(h, m.magnetic.hyper, true); });
    r.get("truth_basis", m.magnetic.truth_basis);
    r.get("basis", m.magnetic.basis);
    r.get("steps", m.magnetic.steps);
    r.get("dt", m.magnetic.dt);
    r.get_vec3("qp_diag", m.magnetic.qp_diag);
    r.get_vec3("qq_diag_deg2", m.magnetic.qq_diag_deg);
    r.get("semi_major", m.magnetic.semi_major);
    r.get("semi_minor", m.magnetic.semi_minor);
    r.get("laps", m.magnetic.laps);
    r.get("z_amplitude", m.magnetic.z_amplitude);
    r.get("tilt_amplitude_deg", m.magnetic.tilt_amplitude_deg);
  });
  root.object("visual", [&](Reader& r) {
    r.get("focal_length", m.visual.camera.f);
    r.get("principal_point", m.visual.camera.c);
    r.get("depth_min", m.visual.camera.depth_min);
    r.get("landmarks", m.visual.landmarks);
    r.get("sigma_v2", m.visual.sigma_v2);
    r.get("steps", m.visual.steps);
    r.get("dt", m.visual.dt);
    r.get("radius", m.visual.radius);
    r.get("loops", m.visual.loops);
    r.get("landmark_radius_min", m.visual.landmark_radius_min);
    r.get("landmark_radius_max", m.visual.landmark_radius_max);
    r.get("drift", m.visual.drift);
    r.get("qp", m.visual.qp);
    r.get("qq", m.visual.qq);
    r.get("prior_var", m.visual.prior_var);
  });
  root.object("localization", [&](Reader& r) {
    r.object("radio", [&](Reader& rr) { read_radio(rr, m.localization.radio); });
    r.get("position_var", m.localization.position_var);
    r.get("init_margin", m.localization.init_margin);
    r.get("heading_known", m.localization.heading_known);
  });
  root.object("export", [&](Reader& r) {
    r.get("trajectories", m.exports.trajectories);
    r.get("maps", m.exports.maps);
    r.get("map_grid_points", m.exports.map_grid_points);
    r.get("detail_runs", m.exports.detail_runs);
  });
  root.finish();
  validate(m);
  return m;
}

ExperimentManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("manifest", "cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("manifest", std::string("invalid JSON: ") + e.what());
  }
  return parse_manifest(j);
}

json to_json(const ExperimentManifest& m) {
  json methods = json::array();
  for (Method meth : m.methods) methods.push_back(to_string(meth));
  const auto& g = m.magnetic;
  const auto& v = m.visual;
  return {
      {"scenario", to_string(m.scenario)},
      {"seed", m.seed},
      {"methods", methods},
      {"output_dir", m.output_dir},
      {"workers", m.workers},
      {"monte_carlo_runs", m.monte_carlo_runs},
      {"particles", m.particles},
      {"smoother_samples", m.smoother_samples},
      {"levels", m.levels},
      {"prune_log_ratio", m.prune_log_ratio},
      {"radio", radio_json(m.radio)},
      {"magnetic",
       {{"hyper", hyper_json(g.hyper, true)},
        {"truth_basis", g.truth_basis},
        {"basis", g.basis},
        {"steps", g.steps},
        {"dt", g.dt},
        {"qp_diag", vec3(g.qp_diag)},
        {"qq_diag_deg2", vec3(g.qq_diag_deg)},
        {"semi_major", g.semi_major},
        {"semi_minor", g.semi_minor},
        {"laps", g.laps},
        {"z_amplitude", g.z_amplitude},
        {"tilt_amplitude_deg", g.tilt_amplitude_deg}}},
      {"visual",
       {{"focal_length", v.camera.f},
        {"principal_point", v.camera.c},
        {"depth_min", v.camera.depth_min},
        {"landmarks", v.landmarks},
        {"sigma_v2", v.sigma_v2},
        {"steps", v.steps},
        {"dt", v.dt},
        {"radius", v.radius},
        {"loops", v.loops},
        {"landmark_radius_min", v.landmark_radius_min},
        {"landmark_radius_max", v.landmark_radius_max},
        {"drift", v.drift},
        {"qp", v.qp},
        {"qq", v.qq},
        {"prior_var", v.prior_var}}},
      {"localization",
       {{"radio", radio_json(m.localization.radio)},
        {"position_var", m.localization.position_var},
        {"init_margin", m.localization.init_margin},
        {"heading_known", m.localization.heading_known}}},
      {"export",
       {{"trajectories", m.exports.trajectories},
        {"maps", m.exports.maps},
        {"map_grid_points", m.exports.map_grid_points},
        {"detail_runs", m.exports.detail_runs}}},
  };
}

}  // namespace rbslam
