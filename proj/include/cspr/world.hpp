#pragma once

#include <vector>

#include "cspr/dynamics.hpp"
#include "cspr/model.hpp"
#include "cspr/types.hpp"

namespace cspr {

// Why a fixed-step episode ended early.
enum class AbortReason : std::uint8_t {
  kNone = 0,
  kSingularity,     // cond(J_xqa) reached the hard cap
  kSelfCollision,   // link clearance fell through the floor
  kSolver,          // pose projection or dynamics evaluation failed
};
const char* abort_name(AbortReason r);

// Fixed disc in the workspace (pylon) or wedged between two links (clamping
// probe). Penalty contact: f = k*depth + d*depth_rate along the surface
// normal, compression only.
struct ContactDisc {
  Vec2 center = Vec2::Zero();
  double radius = 0.02;            // [m]
  double stiffness = 2e4;          // [N/m]
  double damping = 50.0;           // [N s/m]
  std::vector<Body> bodies;        // allowed partners; empty = any body
};

// Direct external point force, bypassing the disc geometry. Used for clean
// classifier datasets and observer checks.
struct AppliedForce {
  Body body = Body::kPlatform;
  double l_c = 0.0;                // link abscissa; ignored for the platform
  Vec2 lever = Vec2::Zero();       // platform-frame offset of the push point
  Vec2 f_world = Vec2::Zero();
};

struct ContactForce {
  Body body = Body::kPlatform;
  double l_c = 0.0;                // abscissa of the true contact point
  Vec2 point = Vec2::Zero();       // world contact point
  Vec2 f_world = Vec2::Zero();     // force on the robot
  double depth = 0.0;              // penetration [m]
};

struct PlantState {
  double t = 0.0;
  Vec3 qa = Vec3::Zero();
  Vec3 qadot = Vec3::Zero();
  Vec3 x = Vec3::Zero();
  Vec3 xdot = Vec3::Zero();
  Vec9 q = Vec9::Zero();
};

// Per-control-interval integration summary.
struct StepOutcome {
  std::vector<ContactForce> contacts;  // state at the last substep
  double f_peak = 0.0;                 // max single-contact magnitude [N]
  Vec3 tau_ext = Vec3::Zero();         // true external joint torque, last substep
  Wrench F_ext_mP = Wrench::Zero();    // true platform wrench, last substep
  double drift = 0.0;                  // max loop-closure residual after projection
  double kappa = 0.0;                  // cond(J_xqa) at the last substep
  double clearance = 0.0;              // min link clearance at the last substep
};

// Rigid-body plant for the closed chain. Integrates the actuated joints with
// semi-implicit Euler and projects the remaining coordinates back onto the
// loop-closure manifold every substep.
class Plant {
 public:
  explicit Plant(const RobotModel& m, double dt_sub = 1e-4);

  // Places the robot at rest on the manifold. Clears any previous abort.
  Err reset(const Vec3& x0, const Vec3& xdot0 = Vec3::Zero());

  // Advances one control interval (dt split into <= dt_sub substeps).
  // tau_a is clamped to the actuator limit. After an abort the plant is
  // frozen and the abort code is returned again.
  Err step(const Vec3& tau_a, double dt, const std::vector<ContactDisc>& discs = {},
           const std::vector<AppliedForce>& forces = {});

  // Contact forces at the current state without stepping.
  std::vector<ContactForce> probe_contacts(const std::vector<ContactDisc>& discs) const;

  const PlantState& state() const { return s_; }
  const StepOutcome& last() const { return out_; }
  AbortReason abort_reason() const { return abort_; }
  const RobotModel& model() const { return m_; }

 private:
  Err substep(const Vec3& tau_a, double h, const std::vector<ContactDisc>& discs,
              const std::vector<AppliedForce>& forces);

  RobotModel m_;
  double dt_sub_;
  PlantState s_;
  StepOutcome out_;
  AbortReason abort_ = AbortReason::kNone;
};

}  // namespace cspr
