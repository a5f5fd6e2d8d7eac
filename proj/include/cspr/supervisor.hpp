#pragma once

#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "cspr/control.hpp"
#include "cspr/dynamics.hpp"
#include "cspr/features.hpp"
#include "cspr/isolation.hpp"
#include "cspr/kinematics.hpp"
#include "cspr/model.hpp"
#include "cspr/pfilter.hpp"
#include "cspr/trajectory.hpp"
#include "cspr/types.hpp"

namespace cspr {

// --- set-based (inequality) constraints --------------------------------------

// Safety and activation bounds of one set-based quantity. Unused sides stay
// at +-inf; where both are present the activation bound sits strictly inside
// the safety bound.
struct SetBounds {
  double lo_s = -std::numeric_limits<double>::infinity();
  double lo_a = -std::numeric_limits<double>::infinity();
  double hi_a = std::numeric_limits<double>::infinity();
  double hi_s = std::numeric_limits<double>::infinity();

  bool valid() const;
};

// True while sigma lies strictly inside the activation window.
bool check_status(double sigma, const SetBounds& b);

// Mode from the two status booleans (condition number, self-collision):
//   (true,  true)  -> 1   no constraint task
//   (false, true)  -> 2   condition-number task active
//   (true,  false) -> 3   clearance task active
//   (false, false) -> 4   both active
int select_mode(bool ok_kappa, bool ok_clearance);

// Linear blend between the outgoing and incoming control law. t <= 0 returns
// exactly tau_prev, t >= T_blend exactly tau_new.
Vec3 interpolate_modes(const Vec3& tau_prev, const Vec3& tau_new, double t_since_switch,
                       double T_blend);

// --- classification hookup ----------------------------------------------------

class MLP;

// Pluggable classifier calls so the decision pipeline can run against trained
// networks or against ground-truth oracles in closed-loop tests. Any error
// return degrades the tick to the zero-g fallback.
struct ClassifierHooks {
  std::function<Expected<ContactType>(const VecX&)> type;  // features: 3
  std::function<Expected<int>(const VecX&)> chain;         // features: 6
  std::function<Expected<Body>(const VecX&)> body;         // features: 12
};

// Adapter over trained networks; predictions whose top class probability
// falls below min_confidence are rejected (-> zero-g).
ClassifierHooks mlp_classifier_hooks(const MLP* type, const MLP* chain, const MLP* body,
                                     double min_confidence = 0.6);

// --- reaction planning ---------------------------------------------------------

enum class ReactionFamily : std::uint8_t {
  kNone = 0,     // tracking, no contact
  kPlatform,     // retract the platform along the line of action
  kFirstLink,    // back-drive the struck chain's crank
  kSecondLink,   // retract the estimated contact point
  kClamp,        // open the clamped chain's gap with both joint tasks
  kZeroG,        // gravity compensation only
};

const char* reaction_family_name(ReactionFamily f);

struct ContactEvent {
  int tick = 0;
  double t = 0.0;
  Wrench F_hat = Wrench::Zero();
  Vec3 tau_ext = Vec3::Zero();
  ContactType type = ContactType::kCollision;
  Body body = Body::kPlatform;  // collision location
  int chain = -1;               // clamped chain
  IsolationFeatures iso;
  PFEstimate pf;                // first estimate for second-link contacts
  bool pf_valid = false;
};

// Frozen at the detection tick; trajectories are sampled relative to t0.
struct ReactionPlan {
  ReactionFamily family = ReactionFamily::kNone;
  ContactEvent event;
  double t0 = 0.0;

  // Cartesian retraction (platform or second-link contact point).
  Vec2 n_hat = Vec2::Zero();  // unit retraction direction
  Vec2 p0 = Vec2::Zero();     // retraction start point
  LinePath path;              // p0 -> p0 + d_react * n_hat
  double l_hat = 0.0;         // frozen contact abscissa (second link)

  // Joint-space tasks (first link and clamping).
  int joint_chain = -1;
  double qa0 = 0.0, qp0 = 0.0;
  double sign_a = 1.0, sign_p = 1.0;
  SCurve qa_traj, qp_traj;  // signed displacement profiles
};

// --- supervisor -----------------------------------------------------------------

enum class Phase : std::uint8_t { kTracking = 0, kReacting, kZeroG };
const char* phase_name(Phase p);

enum class ControlLevel : std::uint8_t { kVelocity = 0, kAcceleration, kTorque };

struct SupervisorConfig {
  ControlLevel level = ControlLevel::kTorque;
  double dt = 1e-3;        // control period [s]
  double blend_T = 0.010;  // law transition window [s]

  Vec3 eps_r = Vec3(10.0, 10.0, 1.0);     // reaction thresholds on |F_hat| [N, N, N m]
  Vec3 eps_g = Vec3(150.0, 150.0, 15.0);  // zero-g thresholds [N, N, N m]
  double eps_tau = 0.5;                   // drive-torque feature threshold [N m]

  double d_react = 0.05;  // Cartesian retraction distance [m]
  double q_react = 0.35;  // joint retraction angle [rad]
  double tau_max = 100.0;

  bool iec_enabled = true;
  // Activation sits above the nominal tracking envelope (kappa stays < 4.1 on
  // a 300 mm square at 1.5 m/s); the safety bound leaves the IEC braking
  // authority long before the cond-number cap.
  SetBounds kappa = {-std::numeric_limits<double>::infinity(),
                     -std::numeric_limits<double>::infinity(), 6.0, 9.0};
  SetBounds clearance = {0.06, 0.08, std::numeric_limits<double>::infinity(),
                         std::numeric_limits<double>::infinity()};

  // Jerk-limited profile limits per trajectory family.
  double react_v = 1.0, react_a = 20.0, react_j = 400.0;      // Cartesian [m/s, ...]
  double joint_v = 2.0, joint_a = 40.0, joint_j = 800.0;      // joint [rad/s, ...]
  double kappa_v = 100.0, kappa_a = 2000.0, kappa_j = 4e4;    // condition number [1/s, ...]
  double clear_v = 0.2, clear_a = 4.0, clear_j = 80.0;        // clearance [m/s, ...]

  PFilterConfig pf;  // contact-point filter for second-link reactions
};

// Everything one control tick needs; assembled by the owning loop from the
// state estimate and the momentum observer.
struct SupervisorInput {
  int tick = 0;
  double t = 0.0;
  DynTerms dyn;
  Vec3 x = Vec3::Zero();
  Vec3 xdot = Vec3::Zero();
  Wrench F_hat = Wrench::Zero();  // observer estimate of the platform wrench
  Vec3 tau_ext = Vec3::Zero();    // J_xqa^T F_hat
  bool reset = false;             // operator clears the active case
};

struct SupervisorOutput {
  int tick = 0;
  double t = 0.0;
  Vec3 tau = Vec3::Zero();  // commanded drive torque (saturated)

  Phase phase = Phase::kTracking;
  int mode = 1;
  ReactionFamily family = ReactionFamily::kNone;

  bool blending = false;
  double blend_w = 1.0;
  Vec3 tau_prev = Vec3::Zero();  // outgoing-law torque during a blend
  Vec3 tau_new = Vec3::Zero();   // incoming-law torque

  double sigma_kappa = 0.0;  // NaN when the pose solve fails
  double sigma_clear = 0.0;
  bool ok_kappa = true;  // latched status (false = constraint task active)
  bool ok_clear = true;

  bool detected_now = false;  // a contact was classified this tick
  ContactType ctype = ContactType::kCollision;
  Body body = Body::kPlatform;
  int chain = -1;
  PFEstimate pf;
  bool pf_valid = false;

  std::vector<std::string> task_ids;  // active stack, highest priority first
  std::vector<LyapunovSample> lyap;   // per task; torque level only
  bool degraded = false;
  std::string note;  // transition/error annotations
};

// Reference supplier for the pre-contact tracking tasks.
using TrackingRef = std::function<void(double t, Vec3& x_d, Vec3& xd_d, Vec3& xdd_d)>;

Expected<ReactionPlan> build_reaction(const RobotModel& m, const SupervisorConfig& cfg,
                                      const ContactEvent& ev, const SupervisorInput& in);

// Detection-reaction state machine advanced once per control tick:
// tracking until the observer estimate crosses eps_r, then classification,
// reaction-plan construction and set-based constraint supervision; eps_g or
// any pipeline error drops the robot into gravity compensation. Law changes
// are blended over blend_T.
class Supervisor {
 public:
  Supervisor(const RobotModel& m, const SupervisorConfig& cfg = {},
             ClassifierHooks hooks = {}, TrackingRef ref = {});

  SupervisorOutput tick(const SupervisorInput& in);

  Phase phase() const { return cur_.phase; }
  int mode() const { return cur_.mode; }
  const SupervisorConfig& config() const { return cfg_; }
  // Active reaction plan, or nullptr while tracking.
  const ReactionPlan* plan() const;

 private:
  struct Regime {
    Phase phase = Phase::kTracking;
    int mode = 1;
    ReactionPlan plan;
    bool kappa_armed = false, clear_armed = false;
    SCurve kappa_traj, clear_traj;
    double kappa_sigma0 = 0.0, clear_sigma0 = 0.0;
    double kappa_t0 = 0.0, clear_t0 = 0.0;
    // Post-reaction standstill: the reaction profile has finished and the
    // estimate dropped back under eps_r, so hold the full pose instead of
    // leaving the task nullspace to drift.
    bool settled = false;
    Vec3 hold_x = Vec3::Zero();
  };

  struct Eval {
    Vec3 tau = Vec3::Zero();
    bool degraded = false;
    bool failed = false;
    std::vector<Task> stack;
    std::string err;
  };

  Eval evaluate(const Regime& r, const SupervisorInput& in) const;
  std::vector<Task> tracking_stack(const SupervisorInput& in) const;
  Expected<std::vector<Task>> reaction_stack(const Regime& r, const SupervisorInput& in) const;
  void switch_regime(const Regime& next, double t, const SupervisorInput& in,
                     SupervisorOutput& out);
  void enter_zero_g(const SupervisorInput& in, SupervisorOutput& out, const std::string& why);
  bool detect_and_plan(const SupervisorInput& in, SupervisorOutput& out);
  bool arm_iec(Regime& r, double t, double sigma_kappa, double sigma_clear) const;
  void lyapunov(const std::vector<Task>& stack, const SupervisorInput& in,
                SupervisorOutput& out);

  const RobotModel* m_;
  SupervisorConfig cfg_;
  ClassifierHooks hooks_;
  TrackingRef ref_;

  Regime cur_, prev_;
  bool blend_active_ = false;
  double switch_t_ = 0.0;

  bool hold_set_ = false;
  Vec3 x_hold_ = Vec3::Zero();

  int settle_run_ = 0;  // consecutive quiet ticks since the profile finished

  ParticleFilter pf_;
  std::vector<LyapunovMonitor> lyap_mon_;
  std::vector<std::string> lyap_ids_;
};

}  // namespace cspr
