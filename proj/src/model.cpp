#include "cspr/model.hpp"

#include <fstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

namespace cspr {

using nlohmann::json;

RobotModel::RobotModel() {
  // Chains at -150/-30/+90 deg; platform anchors aligned at the home pose.
  base_angle = {-5.0 * M_PI / 6.0, -M_PI / 6.0, M_PI / 2.0};
  platform_angle = base_angle;
}

RobotModel RobotModel::perturbed_inertia(double scale) const {
  RobotModel p = *this;
  p.m1 *= scale;
  p.I1 *= scale;
  p.m2 *= scale;
  p.I2 *= scale;
  p.mP *= scale;
  p.IP *= scale;
  return p;
}

void RobotModel::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0)) throw std::runtime_error(std::string("model: ") + name + " must be > 0");
  };
  positive(base_radius, "base_radius");
  positive(platform_radius, "platform_radius");
  positive(hull_radius, "hull_radius");
  positive(l1, "l1");
  positive(l2, "l2");
  positive(m1, "m1");
  positive(m2, "m2");
  positive(mP, "mP");
  positive(I1, "I1");
  positive(I2, "I2");
  positive(IP, "IP");
  positive(char_length, "char_length");
  positive(tau_max, "tau_max");
  if (platform_radius >= base_radius)
    throw std::runtime_error("model: platform_radius must be smaller than base_radius");
  if (fric_viscous < 0 || fric_coulomb < 0)
    throw std::runtime_error("model: friction coefficients must be >= 0");
}

namespace {

template <typename T>
void get_opt(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

RobotModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("model: cannot open " + path);
  json j;
  in >> j;
  if (j.value("format", std::string()) != "cspr-model")
    throw std::runtime_error("model: bad format tag in " + path);
  if (j.value("version", 0) > kConfigVersion)
    throw std::runtime_error("model: config version newer than supported");

  RobotModel m;
  get_opt(j, "base_radius", m.base_radius);
  get_opt(j, "platform_radius", m.platform_radius);
  get_opt(j, "hull_radius", m.hull_radius);
  get_opt(j, "l1", m.l1);
  get_opt(j, "l2", m.l2);
  get_opt(j, "link_thickness", m.link_thickness);
  if (j.contains("base_angle_deg")) {
    auto v = j.at("base_angle_deg").get<std::vector<double>>();
    if (v.size() != kNumChains) throw std::runtime_error("model: base_angle_deg needs 3 entries");
    for (int i = 0; i < kNumChains; ++i) m.base_angle[i] = v[i] * M_PI / 180.0;
  }
  if (j.contains("platform_angle_deg")) {
    auto v = j.at("platform_angle_deg").get<std::vector<double>>();
    if (v.size() != kNumChains) throw std::runtime_error("model: platform_angle_deg needs 3 entries");
    for (int i = 0; i < kNumChains; ++i) m.platform_angle[i] = v[i] * M_PI / 180.0;
  }
  get_opt(j, "m1", m.m1);
  get_opt(j, "c1", m.c1);
  get_opt(j, "I1", m.I1);
  get_opt(j, "m2", m.m2);
  get_opt(j, "c2", m.c2);
  get_opt(j, "I2", m.I2);
  get_opt(j, "mP", m.mP);
  get_opt(j, "IP", m.IP);
  get_opt(j, "fric_viscous", m.fric_viscous);
  get_opt(j, "fric_coulomb", m.fric_coulomb);
  get_opt(j, "fric_sharpness", m.fric_sharpness);
  if (j.contains("gravity")) {
    auto v = j.at("gravity").get<std::vector<double>>();
    if (v.size() != 2) throw std::runtime_error("model: gravity needs 2 entries");
    m.gravity = Vec2(v[0], v[1]);
  }
  get_opt(j, "encoder_enabled", m.encoder_enabled);
  get_opt(j, "encoder_res_active", m.encoder_res_active);
  get_opt(j, "encoder_res_passive", m.encoder_res_passive);
  get_opt(j, "ideal_velocity", m.ideal_velocity);
  get_opt(j, "velocity_lp_hz", m.velocity_lp_hz);
  get_opt(j, "char_length", m.char_length);
  get_opt(j, "fd_delta", m.fd_delta);
  get_opt(j, "jdot_dt", m.jdot_dt);
  get_opt(j, "tau_max", m.tau_max);
  get_opt(j, "kappa_cap", m.kappa_cap);
  get_opt(j, "sc_floor", m.sc_floor);
  get_opt(j, "contact_stiffness", m.contact_stiffness);
  get_opt(j, "contact_damping", m.contact_damping);
  m.validate();
  return m;
}

void save_model(const RobotModel& m, const std::string& path) {
  json j;
  j["format"] = "cspr-model";
  j["version"] = kConfigVersion;
  j["base_radius"] = m.base_radius;
  j["platform_radius"] = m.platform_radius;
  j["hull_radius"] = m.hull_radius;
  j["l1"] = m.l1;
  j["l2"] = m.l2;
  j["link_thickness"] = m.link_thickness;
  j["base_angle_deg"] = {m.base_angle[0] * 180.0 / M_PI, m.base_angle[1] * 180.0 / M_PI,
                         m.base_angle[2] * 180.0 / M_PI};
  j["platform_angle_deg"] = {m.platform_angle[0] * 180.0 / M_PI,
                             m.platform_angle[1] * 180.0 / M_PI,
                             m.platform_angle[2] * 180.0 / M_PI};
  j["m1"] = m.m1;
  j["c1"] = m.c1;
  j["I1"] = m.I1;
  j["m2"] = m.m2;
  j["c2"] = m.c2;
  j["I2"] = m.I2;
  j["mP"] = m.mP;
  j["IP"] = m.IP;
  j["fric_viscous"] = m.fric_viscous;
  j["fric_coulomb"] = m.fric_coulomb;
  j["fric_sharpness"] = m.fric_sharpness;
  j["gravity"] = {m.gravity.x(), m.gravity.y()};
  j["encoder_enabled"] = m.encoder_enabled;
  j["encoder_res_active"] = m.encoder_res_active;
  j["encoder_res_passive"] = m.encoder_res_passive;
  j["ideal_velocity"] = m.ideal_velocity;
  j["velocity_lp_hz"] = m.velocity_lp_hz;
  j["char_length"] = m.char_length;
  j["fd_delta"] = m.fd_delta;
  j["jdot_dt"] = m.jdot_dt;
  j["tau_max"] = m.tau_max;
  j["kappa_cap"] = m.kappa_cap;
  j["sc_floor"] = m.sc_floor;
  j["contact_stiffness"] = m.contact_stiffness;
  j["contact_damping"] = m.contact_damping;

  std::ofstream out(path);
  if (!out) throw std::runtime_error("model: cannot write " + path);
  out << j.dump(2) << "\n";
}

}  // namespace cspr
