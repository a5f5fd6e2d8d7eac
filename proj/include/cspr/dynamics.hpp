#pragma once

#include "cspr/kinematics.hpp"
#include "cspr/model.hpp"
#include "cspr/types.hpp"

namespace cspr {

// Equations of motion in platform coordinates,
//   M_x xddot + C_x xdot + g_x + F_fr,x = F_a + F_ext,
// and their actuated-joint-space counterparts,
//   M_qa qaddot + c_qa + g_qa + tau_fr = tau_a + tau_ext.
struct DynTerms {
  Mat3 Mx = Mat3::Zero();
  Mat3 Cx = Mat3::Zero();        // Christoffel factorization: Mx_dot = Cx + Cx^T
  Vec3 cx = Vec3::Zero();        // Cx * xdot
  Vec3 gx = Vec3::Zero();
  Vec3 Ffr_x = Vec3::Zero();
  Mat3 Mqa = Mat3::Zero();
  Vec3 cqa = Vec3::Zero();
  Vec3 gqa = Vec3::Zero();
  Vec3 taufr_qa = Vec3::Zero();
  Mat3 Jxqa = Mat3::Zero();
  Mat3 Jxqa_dot = Mat3::Zero();
  Mat93 Jqx = Mat93::Zero();
  Vec9 q = Vec9::Zero();
  Vec3 qadot = Vec3::Zero();
};

Expected<Mat3> mass_matrix(const RobotModel& m, const Vec3& x,
                           const Branch& branch = default_branch());

Expected<DynTerms> dynamics_terms(const RobotModel& m, const Vec3& x, const Vec3& xdot,
                                  const Branch& branch = default_branch());

// Gravity/friction-free kinetic energy at a state.
Expected<double> kinetic_energy(const RobotModel& m, const Vec3& x, const Vec3& xdot,
                                const Branch& branch = default_branch());

// External point force (world frame) on a body -> equivalent platform wrench
// and actuated-joint torques.
struct ProjectedWrench {
  Wrench F_ext_mP = Wrench::Zero();
  Vec3 tau_a_ext = Vec3::Zero();
};
ProjectedWrench project_wrench(const ContactFrame& frame, const Vec2& f_world);

// --- task-space dynamic quantities -----------------------------------------

struct TaskDyn {
  MatX Mi;          // task-space inertia (n_s x n_s)
  MatX Jbar;        // dynamically consistent generalized inverse (3 x n_s)
  bool degraded = false;  // damped inverse engaged (task Jacobian rank loss)
};

TaskDyn task_space_inertia(const MatX& J, const Mat3& Mqa_inv, double damping = 1e-8);

// N = I - pinv(JA) JA  (kinematic nullspace of the augmented Jacobian)
Mat3 nullspace_projector(const MatX& JA);

// Nbar = I - JA^T JbarA^T; satisfies JA Mqa^-1 Nbar = 0.
Mat3 dyn_nullspace_projector(const MatX& JA, const Mat3& Mqa_inv, bool* degraded = nullptr);

}  // namespace cspr
