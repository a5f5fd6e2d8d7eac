#include "cspr/scenario.hpp"

#include <fstream>
#include <nlohmann/json.hpp>
#include <stdexcept>

namespace cspr {

using nlohmann::json;

const char* trajectory_kind_name(TrajectorySpec::Kind k) {
  switch (k) {
    case TrajectorySpec::Kind::kHold: return "hold";
    case TrajectorySpec::Kind::kLine: return "line";
    case TrajectorySpec::Kind::kSquare: return "square";
  }
  return "?";
}

const char* injection_kind_name(InjectionSpec::Kind k) {
  switch (k) {
    case InjectionSpec::Kind::kPylon: return "pylon";
    case InjectionSpec::Kind::kClamp: return "clamp";
    case InjectionSpec::Kind::kForce: return "force";
  }
  return "?";
}

namespace {

template <typename T>
void get_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

Vec3 get_vec3(const json& j, const char* key, const Vec3& fallback) {
  if (!j.contains(key)) return fallback;
  auto v = j.at(key).get<std::vector<double>>();
  if (v.size() != 3) throw std::runtime_error(std::string("scenario: ") + key + " needs 3 entries");
  return Vec3(v[0], v[1], v[2]);
}

Vec2 get_vec2(const json& j, const char* key, const Vec2& fallback) {
  if (!j.contains(key)) return fallback;
  auto v = j.at(key).get<std::vector<double>>();
  if (v.size() != 2) throw std::runtime_error(std::string("scenario: ") + key + " needs 2 entries");
  return Vec2(v[0], v[1]);
}

}  // namespace

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("scenario: cannot open " + path);
  json j;
  in >> j;
  if (j.value("format", std::string()) != "cspr-scenario")
    throw std::runtime_error("scenario: bad format tag in " + path);
  if (j.value("version", 0) > kConfigVersion)
    throw std::runtime_error("scenario: config version newer than supported");

  Scenario sc;
  get_opt(j, "name", sc.name);
  get_opt(j, "model_file", sc.model_file);
  get_opt(j, "seed", sc.seed);
  get_opt(j, "duration", sc.duration);
  get_opt(j, "dt", sc.dt);
  get_opt(j, "dt_sub", sc.dt_sub);
  get_opt(j, "model_scale", sc.model_scale);
  if (j.contains("level")) {
    const std::string s = j.at("level").get<std::string>();
    if (s == "velocity") sc.level = ControlLevel::kVelocity;
    else if (s == "acceleration") sc.level = ControlLevel::kAcceleration;
    else if (s == "torque") sc.level = ControlLevel::kTorque;
    else throw std::runtime_error("scenario: unknown level " + s);
  }
  get_opt(j, "iec_enabled", sc.iec_enabled);
  if (j.contains("kappa")) {
    const json& b = j.at("kappa");
    get_opt(b, "activation", sc.kappa.hi_a);
    get_opt(b, "safety", sc.kappa.hi_s);
  }
  if (j.contains("clearance")) {
    const json& b = j.at("clearance");
    get_opt(b, "activation", sc.clearance.lo_a);
    get_opt(b, "safety", sc.clearance.lo_s);
  }
  sc.eps_r = get_vec3(j, "eps_r", sc.eps_r);
  sc.eps_g = get_vec3(j, "eps_g", sc.eps_g);
  sc.observer_gain = get_vec3(j, "observer_gain", sc.observer_gain);
  get_opt(j, "d_react", sc.d_react);
  get_opt(j, "q_react", sc.q_react);
  get_opt(j, "encoder", sc.encoder);
  get_opt(j, "ideal_velocity", sc.ideal_velocity);
  if (j.contains("classifiers")) {
    const json& c = j.at("classifiers");
    const std::string s = c.value("source", "oracle");
    if (s == "none") sc.classifiers = ClassifierSource::kNone;
    else if (s == "oracle") sc.classifiers = ClassifierSource::kOracle;
    else if (s == "files") sc.classifiers = ClassifierSource::kFiles;
    else throw std::runtime_error("scenario: unknown classifier source " + s);
    get_opt(c, "type_file", sc.cls_type_file);
    get_opt(c, "chain_file", sc.cls_chain_file);
    get_opt(c, "body_file", sc.cls_body_file);
  }

  if (j.contains("trajectory")) {
    const json& t = j.at("trajectory");
    const std::string kind = t.value("type", "hold");
    if (kind == "hold") sc.traj.kind = TrajectorySpec::Kind::kHold;
    else if (kind == "line") sc.traj.kind = TrajectorySpec::Kind::kLine;
    else if (kind == "square") sc.traj.kind = TrajectorySpec::Kind::kSquare;
    else throw std::runtime_error("scenario: unknown trajectory type " + kind);
    sc.traj.start = get_vec3(t, "start", sc.traj.start);
    sc.traj.start = get_vec3(t, "center", sc.traj.start);  // square alias
    sc.traj.target = get_vec3(t, "target", sc.traj.target);
    get_opt(t, "edge", sc.traj.edge);
    get_opt(t, "v_max", sc.traj.v_max);
    get_opt(t, "a_max", sc.traj.a_max);
    get_opt(t, "j_max", sc.traj.j_max);
    get_opt(t, "corner_dwell", sc.traj.corner_dwell);
    get_opt(t, "t0", sc.traj.t0);
  }

  for (const json& i : j.value("injections", json::array())) {
    InjectionSpec spec;
    const std::string kind = i.value("kind", "force");
    if (kind == "pylon") spec.kind = InjectionSpec::Kind::kPylon;
    else if (kind == "clamp") spec.kind = InjectionSpec::Kind::kClamp;
    else if (kind == "force") spec.kind = InjectionSpec::Kind::kForce;
    else throw std::runtime_error("scenario: unknown injection kind " + kind);
    get_opt(i, "t", spec.t);
    if (i.contains("body")) {
      auto b = body_from_name(i.at("body").get<std::string>());
      if (!b.ok()) throw std::runtime_error("scenario: unknown body " + i.at("body").get<std::string>());
      spec.body = *b;
    }
    get_opt(i, "l_c", spec.l_c);
    spec.direction = get_vec2(i, "direction", spec.direction);
    get_opt(i, "radius", spec.radius);
    get_opt(i, "standoff", spec.standoff);
    get_opt(i, "chain", spec.chain);
    get_opt(i, "clearance", spec.clearance);
    spec.f = get_vec2(i, "f", spec.f);
    get_opt(i, "link_frame", spec.link_frame);
    spec.lever = get_vec2(i, "lever", spec.lever);
    get_opt(i, "rise", spec.rise);
    get_opt(i, "duration", spec.duration);
    get_opt(i, "stiffness", spec.stiffness);
    get_opt(i, "damping", spec.damping);
    if (spec.t < 0.0 || spec.t > sc.duration)
      throw std::runtime_error("scenario: injection time outside the episode");
    sc.injections.push_back(spec);
  }
  return sc;
}

void save_scenario(const Scenario& sc, const std::string& path) {
  json j;
  j["format"] = "cspr-scenario";
  j["version"] = kConfigVersion;
  j["name"] = sc.name;
  if (!sc.model_file.empty()) j["model_file"] = sc.model_file;
  j["seed"] = sc.seed;
  j["duration"] = sc.duration;
  j["dt"] = sc.dt;
  j["dt_sub"] = sc.dt_sub;
  j["model_scale"] = sc.model_scale;
  j["level"] = sc.level == ControlLevel::kVelocity       ? "velocity"
               : sc.level == ControlLevel::kAcceleration ? "acceleration"
                                                         : "torque";
  j["iec_enabled"] = sc.iec_enabled;
  j["kappa"] = {{"activation", sc.kappa.hi_a}, {"safety", sc.kappa.hi_s}};
  j["clearance"] = {{"activation", sc.clearance.lo_a}, {"safety", sc.clearance.lo_s}};
  j["eps_r"] = {sc.eps_r(0), sc.eps_r(1), sc.eps_r(2)};
  j["eps_g"] = {sc.eps_g(0), sc.eps_g(1), sc.eps_g(2)};
  j["observer_gain"] = {sc.observer_gain(0), sc.observer_gain(1), sc.observer_gain(2)};
  j["d_react"] = sc.d_react;
  j["q_react"] = sc.q_react;
  j["encoder"] = sc.encoder;
  j["ideal_velocity"] = sc.ideal_velocity;
  json cls;
  cls["source"] = sc.classifiers == ClassifierSource::kNone     ? "none"
                  : sc.classifiers == ClassifierSource::kOracle ? "oracle"
                                                                : "files";
  if (!sc.cls_type_file.empty()) cls["type_file"] = sc.cls_type_file;
  if (!sc.cls_chain_file.empty()) cls["chain_file"] = sc.cls_chain_file;
  if (!sc.cls_body_file.empty()) cls["body_file"] = sc.cls_body_file;
  j["classifiers"] = cls;

  json t;
  t["type"] = trajectory_kind_name(sc.traj.kind);
  t["start"] = {sc.traj.start(0), sc.traj.start(1), sc.traj.start(2)};
  t["target"] = {sc.traj.target(0), sc.traj.target(1), sc.traj.target(2)};
  t["edge"] = sc.traj.edge;
  t["v_max"] = sc.traj.v_max;
  t["a_max"] = sc.traj.a_max;
  t["j_max"] = sc.traj.j_max;
  t["corner_dwell"] = sc.traj.corner_dwell;
  t["t0"] = sc.traj.t0;
  j["trajectory"] = t;

  json arr = json::array();
  for (const auto& spec : sc.injections) {
    json i;
    i["kind"] = injection_kind_name(spec.kind);
    i["t"] = spec.t;
    i["body"] = body_name(spec.body);
    i["l_c"] = spec.l_c;
    i["direction"] = {spec.direction(0), spec.direction(1)};
    i["radius"] = spec.radius;
    i["standoff"] = spec.standoff;
    i["chain"] = spec.chain;
    i["clearance"] = spec.clearance;
    i["f"] = {spec.f(0), spec.f(1)};
    i["link_frame"] = spec.link_frame;
    i["lever"] = {spec.lever(0), spec.lever(1)};
    i["rise"] = spec.rise;
    i["duration"] = spec.duration;
    if (spec.stiffness > 0.0) i["stiffness"] = spec.stiffness;
    if (spec.damping > 0.0) i["damping"] = spec.damping;
    arr.push_back(i);
  }
  j["injections"] = arr;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("scenario: cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace cspr
