#pragma once

#include <string>
#include <vector>

#include "cspr/dynamics.hpp"
#include "cspr/types.hpp"

namespace cspr {

enum class TaskKind : std::uint8_t {
  kPlatformPosition = 0,
  kPlatformOrientation,
  kReactionPlatform,
  kReactionFirstLink,
  kReactionSecondLink,
  kReactionClampActive,
  kReactionClampPassive,
  kIecCondition,
  kIecClearance,
};

const char* task_kind_name(TaskKind k);

// Diagonal gains for one task at the three control levels.
struct TaskGains {
  VecX Ksd;   // velocity level, 1/s
  VecX Ksdd;  // acceleration level, 1/s^2
  VecX Dsdd;  // acceleration level, 1/s
  VecX KF;    // torque level, task stiffness
  VecX Dxi;   // torque level, damping ratio (dimensionless)
};

TaskGains uniform_gains(int n, double ksd, double ksdd, double dsdd, double kf, double dxi);

// Stock presets (per-task tuning used throughout).
TaskGains gains_iec_condition();           // 1-D
TaskGains gains_iec_clearance();           // 1-D
TaskGains gains_platform_collision();      // 2-D
TaskGains gains_first_link_collision();    // 1-D
TaskGains gains_second_link_collision();   // 2-D
TaskGains gains_clamping();                // 1-D (same row used for active/passive)
TaskGains gains_platform_position();       // 2-D
TaskGains gains_platform_orientation();    // 1-D
TaskGains gains_for_kind(TaskKind k);

// One prioritized task: current/desired coordinate samples plus its Jacobian
// w.r.t. the actuated joints.
struct Task {
  std::string id;
  TaskKind kind = TaskKind::kPlatformPosition;
  VecX sigma;
  VecX sigma_dot;
  VecX sigma_d;
  VecX sigma_dot_d;
  VecX sigma_ddot_d;
  MatX J;     // n_sigma x 3
  MatX Jdot;  // n_sigma x 3 (used by the acceleration level; zero is fine elsewhere)
  TaskGains gains;

  int dim() const { return static_cast<int>(J.rows()); }
  void resize(int n);
  bool consistent() const;
};

// Output of one resolution step. `ref` is the level's intermediate command
// (qadot_ref, qaddot_ref or tau_ref) kept for logging.
struct Resolved {
  Vec3 tau = Vec3::Zero();
  Vec3 ref = Vec3::Zero();
  bool degraded = false;
};

// Motor stiffness/damping wrapper of the velocity level.
struct VelocityLaw {
  double Kqa = 3000.0;  // N*m/rad
  double Dqa = 60.0;    // N*m*s/rad
};

Expected<Resolved> resolve_velocity(const std::vector<Task>& stack, const DynTerms& dyn,
                                    double dt, const VelocityLaw& law = {});
Expected<Resolved> resolve_acceleration(const std::vector<Task>& stack, const DynTerms& dyn);
Expected<Resolved> resolve_torque(const std::vector<Task>& stack, const DynTerms& dyn);

// D = sqrt(M) Dxi sqrt(K) + sqrt(K) Dxi sqrt(M), all SPD.
MatX factorization_damping(const MatX& M, const MatX& K, const VecX& dxi);

struct ImpedanceGains {
  Vec3 Kd = Vec3(2000.0, 2000.0, 85.0);
  Vec3 Dxi = Vec3::Ones();
};

// Platform-space impedance wrench (model compensation + stiffness/damping).
Expected<Wrench> impedance_control(const DynTerms& dyn, const Vec3& x, const Vec3& xdot,
                                   const Vec3& x_d, const Vec3& xdot_d, const Vec3& xddot_d,
                                   const ImpedanceGains& g = {});

// Pose error with the orientation component wrapped to (-pi, pi].
Vec3 pose_error(const Vec3& x_d, const Vec3& x);

// Energy-style monitor of one torque-level task. Mi_dot is finite-differenced
// across successive calls.
struct LyapunovSample {
  double V = 0.0;
  double Vdot = 0.0;
};

class LyapunovMonitor {
 public:
  void reset();
  LyapunovSample update(const VecX& e, const VecX& edot, const MatX& Mi, const MatX& KF,
                        const MatX& DF, const VecX& F_ext_i, double dt);

 private:
  bool has_prev_ = false;
  MatX Mi_prev_;
};

Vec3 saturate_torque(const Vec3& tau, double tau_max);

}  // namespace cspr
