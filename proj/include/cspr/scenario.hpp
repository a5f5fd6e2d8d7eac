#pragma once

#include <string>
#include <vector>

#include "cspr/supervisor.hpp"
#include "cspr/world.hpp"

namespace cspr {

// Desired platform motion of an episode.
struct TrajectorySpec {
  enum class Kind { kHold, kLine, kSquare } kind = Kind::kHold;
  Vec3 start = Vec3::Zero();   // hold pose, line start, or square center
  Vec3 target = Vec3::Zero();  // line end
  double edge = 0.3;           // square edge length [m]
  double v_max = 0.5, a_max = 5.0, j_max = 100.0;
  double corner_dwell = 0.05;  // square corner rest [s]
  double t0 = 0.0;             // hold the start pose until then [s]
};

const char* trajectory_kind_name(TrajectorySpec::Kind k);

// One contact event. Pylons and clamping probes are placed geometrically by a
// kinematic dry pass of the nominal trajectory at time t; force injections
// are applied directly at the named body point.
struct InjectionSpec {
  enum class Kind { kPylon, kClamp, kForce } kind = Kind::kForce;
  double t = 1.0;  // placement / onset time [s]

  Body body = Body::kPlatform;  // pylon & force target
  double l_c = 0.5;             // link abscissa (clamp: along the distal link)

  // pylon: approach normal; zero = along the nominal motion of the point
  Vec2 direction = Vec2::Zero();
  double radius = 0.02;   // disc radius [m]
  double standoff = 0.0;  // extra gap at time t [m]

  // clamp
  int chain = 0;
  double clearance = 0.002;  // initial gap to the nearer link [m]

  // force profile: ramps over `rise`, holds until t + duration
  Vec2 f = Vec2::Zero();
  bool link_frame = false;  // rotate f with the link each tick
  Vec2 lever = Vec2::Zero();
  double rise = 0.01;
  double duration = 0.5;

  // contact material; zero = model defaults
  double stiffness = 0.0, damping = 0.0;
};

const char* injection_kind_name(InjectionSpec::Kind k);

// Classifier source for the pipeline: none (degrade on detection), scenario
// ground truth, or trained networks loaded from files.
enum class ClassifierSource : std::uint8_t { kNone, kOracle, kFiles };

struct Scenario {
  std::string name = "episode";
  std::string model_file;  // empty = built-in default model
  std::uint64_t seed = 1;
  double duration = 3.0;  // [s]
  double dt = 1e-3;
  double dt_sub = 1e-4;
  double model_scale = 1.0;  // controller-side inertia error factor

  ControlLevel level = ControlLevel::kTorque;
  bool iec_enabled = true;
  SetBounds kappa = SupervisorConfig{}.kappa;
  SetBounds clearance = SupervisorConfig{}.clearance;
  Vec3 eps_r = Vec3(10.0, 10.0, 1.0);
  Vec3 eps_g = Vec3(150.0, 150.0, 15.0);
  Vec3 observer_gain = Vec3::Constant(20.0);
  double d_react = 0.05;
  double q_react = 0.35;

  bool encoder = false;
  bool ideal_velocity = true;

  ClassifierSource classifiers = ClassifierSource::kOracle;
  std::string cls_type_file, cls_chain_file, cls_body_file;

  TrajectorySpec traj;
  std::vector<InjectionSpec> injections;
};

Scenario load_scenario(const std::string& path);
void save_scenario(const Scenario& sc, const std::string& path);

}  // namespace cspr
