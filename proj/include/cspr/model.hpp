#pragma once

#include <array>
#include <string>

#include "cspr/types.hpp"

namespace cspr {

// Config file format version, written into model/scenario headers.
inline constexpr int kConfigVersion = 1;

// Planar 3-RRR parallel robot: three identical RRR chains, active joint at the
// base, passive elbow, passive coupling joint on a rigid moving platform.
struct RobotModel {
  // --- geometry -----------------------------------------------------------
  double base_radius = 0.5;           // circumradius of equilateral base [m]
  double platform_radius = 0.1;       // coupling-joint circumradius [m]
  double hull_radius = 0.12;          // circular platform hull (outer) [m]
  double l1 = 0.35;                   // proximal link length [m]
  double l2 = 0.35;                   // distal link length [m]
  double link_thickness = 0.06;       // physical link width, informational [m]
  std::array<double, kNumChains> base_angle{};      // base joint polar angles [rad]
  std::array<double, kNumChains> platform_angle{};  // coupling anchor angles [rad]

  // --- inertia ------------------------------------------------------------
  double m1 = 1.2;      // proximal link mass [kg]
  double c1 = 0.175;    // proximal COM offset along link [m]
  double I1 = 0.0123;   // proximal link inertia about its COM [kg m^2]
  double m2 = 0.8;      // distal link mass [kg]
  double c2 = 0.175;    // distal COM offset along link [m]
  double I2 = 0.0082;   // distal link inertia about its COM [kg m^2]
  double mP = 2.0;      // platform mass [kg]
  double IP = 0.02;     // platform inertia about its COM [kg m^2]

  // --- joint friction (active joints only) --------------------------------
  double fric_viscous = 0.4;     // [N m s/rad]
  double fric_coulomb = 0.15;    // [N m]
  double fric_sharpness = 1e3;   // tanh slope for smooth Coulomb model

  // --- gravity (in-plane components; horizontal bench => zero) ------------
  Vec2 gravity = Vec2::Zero();   // [m/s^2]

  // --- sensing -------------------------------------------------------------
  bool encoder_enabled = false;        // quantize measured joint angles
  double encoder_res_active = 9.7738e-5;   // 0.0056 deg [rad]
  double encoder_res_passive = 1.7453e-3;  // 0.1 deg [rad]
  bool ideal_velocity = true;          // bypass differentiation + low-pass
  double velocity_lp_hz = 30.0;        // first-order velocity filter cutoff

  // --- numerics ------------------------------------------------------------
  double char_length = 0.1;      // scales the rotational row for cond() [m]
  double fd_delta = 1e-4;        // one-sided step for constraint-gradient FD [rad]
  double jdot_dt = 1e-6;         // central-difference step for Jdot [s]

  // --- limits / plant ------------------------------------------------------
  double tau_max = 100.0;        // actuator saturation [N m]
  double kappa_cap = 200.0;      // hard abort threshold on cond(J_xqa)
  double sc_floor = 0.005;       // hard abort threshold on link clearance [m]
  double contact_stiffness = 2e4;  // penalty contact k_c [N/m]
  double contact_damping = 50.0;   // penalty contact d_c [N s/m]

  RobotModel();

  // Uniformly scales all masses/inertias; models estimation error.
  RobotModel perturbed_inertia(double scale) const;

  void validate() const;  // throws std::runtime_error on bad values
};

RobotModel load_model(const std::string& path);
void save_model(const RobotModel& m, const std::string& path);

}  // namespace cspr
