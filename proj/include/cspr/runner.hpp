#pragma once

#include <string>
#include <utility>
#include <vector>

#include "cspr/scenario.hpp"
#include "cspr/supervisor.hpp"
#include "cspr/world.hpp"

namespace cspr {

// One control tick of an episode: the supervisor's view plus the plant truth
// over the interval the command was applied.
struct TickRecord {
  int tick = 0;
  double t = 0.0;
  Vec3 x = Vec3::Zero();      // measured platform pose
  Vec3 xdot = Vec3::Zero();
  Vec3 x_d = Vec3::Zero();    // nominal trajectory pose
  Vec3 qa = Vec3::Zero();
  Vec3 tau = Vec3::Zero();    // commanded joint torque
  Wrench F_hat = Wrench::Zero();
  Vec3 tau_ext_hat = Vec3::Zero();
  int phase = 0;              // Phase enum value
  int mode = 1;
  int family = 0;             // ReactionFamily enum value
  bool detected = false;
  bool blending = false;
  double blend_w = 1.0;
  double sigma_kappa = 0.0;
  double sigma_clear = 0.0;
  bool ok_kappa = true;
  bool ok_clear = true;
  // plant truth during [t, t+dt)
  double f_true = 0.0;        // max single-load magnitude [N]
  int contact_body = -1;      // strongest contact at the last substep
  double contact_l = 0.0;
  Wrench F_true_mP = Wrench::Zero();
  double drift = 0.0;
  // identification
  bool pf_valid = false;
  double pf_l = 0.0;
  Vec2 pf_f = Vec2::Zero();
  // torque-level energy monitors, padded to the stack limit
  int n_tasks = 0;
  double V[3] = {0, 0, 0};
  double Vdot[3] = {0, 0, 0};
};

struct SimLog {
  std::string scenario;
  double dt = 1e-3;
  std::vector<TickRecord> ticks;
  AbortReason abort = AbortReason::kNone;
  int abort_tick = -1;
  std::vector<std::pair<int, std::string>> notes;

  void write_csv(const std::string& path) const;
};

// Column names of the CSV form, shared with the audit reader.
std::vector<std::string> simlog_header();

// Builds the tracking reference of a trajectory spec. x at t=0 is the
// episode's start pose.
TrackingRef make_tracking_ref(const TrajectorySpec& traj);

// Geometric resolution of pylon/clamp injections against the nominal
// trajectory (kinematic dry pass at the injection time).
struct ResolvedContact {
  InjectionSpec spec;
  ContactDisc disc;  // pylon/clamp only
};
Expected<std::vector<ResolvedContact>> resolve_injections(const RobotModel& m,
                                                          const Scenario& sc);

// Full pipeline: sensors -> observer -> supervisor -> plant, 1 kHz.
// The hooks override the scenario's classifier source when non-empty.
Expected<SimLog> run_episode(const Scenario& sc);
Expected<SimLog> run_episode(const Scenario& sc, ClassifierHooks hooks);

}  // namespace cspr
