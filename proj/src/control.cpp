#include "cspr/control.hpp"

#include <Eigen/Cholesky>

namespace cspr {

const char* task_kind_name(TaskKind k) {
  switch (k) {
    case TaskKind::kPlatformPosition: return "platform_position";
    case TaskKind::kPlatformOrientation: return "platform_orientation";
    case TaskKind::kReactionPlatform: return "reaction_platform";
    case TaskKind::kReactionFirstLink: return "reaction_first_link";
    case TaskKind::kReactionSecondLink: return "reaction_second_link";
    case TaskKind::kReactionClampActive: return "reaction_clamp_active";
    case TaskKind::kReactionClampPassive: return "reaction_clamp_passive";
    case TaskKind::kIecCondition: return "iec_condition";
    case TaskKind::kIecClearance: return "iec_clearance";
  }
  return "unknown";
}

TaskGains uniform_gains(int n, double ksd, double ksdd, double dsdd, double kf, double dxi) {
  TaskGains g;
  g.Ksd = VecX::Constant(n, ksd);
  g.Ksdd = VecX::Constant(n, ksdd);
  g.Dsdd = VecX::Constant(n, dsdd);
  g.KF = VecX::Constant(n, kf);
  g.Dxi = VecX::Constant(n, dxi);
  return g;
}

TaskGains gains_iec_condition() { return uniform_gains(1, 20.0, 1500.0, 62.5, 1.0, 2.0); }
TaskGains gains_iec_clearance() { return uniform_gains(1, 30.0, 1500.0, 100.0, 16000.0, 2.0); }
TaskGains gains_platform_collision() { return uniform_gains(2, 30.0, 2000.0, 50.0, 2000.0, 1.0); }
TaskGains gains_first_link_collision() { return uniform_gains(1, 10.0, 1250.0, 50.0, 2500.0, 1.0); }
TaskGains gains_second_link_collision() { return uniform_gains(2, 10.0, 1250.0, 50.0, 2000.0, 1.0); }
TaskGains gains_clamping() { return uniform_gains(1, 10.0, 1250.0, 75.0, 1000.0, 1.0); }
TaskGains gains_platform_position() { return uniform_gains(2, 30.0, 2000.0, 50.0, 2000.0, 1.0); }
TaskGains gains_platform_orientation() { return uniform_gains(1, 40.0, 2500.0, 75.0, 85.0, 1.0); }

TaskGains gains_for_kind(TaskKind k) {
  switch (k) {
    case TaskKind::kPlatformPosition: return gains_platform_position();
    case TaskKind::kPlatformOrientation: return gains_platform_orientation();
    case TaskKind::kReactionPlatform: return gains_platform_collision();
    case TaskKind::kReactionFirstLink: return gains_first_link_collision();
    case TaskKind::kReactionSecondLink: return gains_second_link_collision();
    case TaskKind::kReactionClampActive: return gains_clamping();
    case TaskKind::kReactionClampPassive: return gains_clamping();
    case TaskKind::kIecCondition: return gains_iec_condition();
    case TaskKind::kIecClearance: return gains_iec_clearance();
  }
  return gains_platform_position();
}

void Task::resize(int n) {
  sigma = VecX::Zero(n);
  sigma_dot = VecX::Zero(n);
  sigma_d = VecX::Zero(n);
  sigma_dot_d = VecX::Zero(n);
  sigma_ddot_d = VecX::Zero(n);
  J = MatX::Zero(n, 3);
  Jdot = MatX::Zero(n, 3);
  gains = gains_for_kind(kind);
}

bool Task::consistent() const {
  const int n = dim();
  return sigma.size() == n && sigma_dot.size() == n && sigma_d.size() == n &&
         sigma_dot_d.size() == n && sigma_ddot_d.size() == n && Jdot.rows() == n &&
         J.cols() == 3 && Jdot.cols() == 3 && gains.Ksd.size() == n && gains.Ksdd.size() == n &&
         gains.Dsdd.size() == n && gains.KF.size() == n && gains.Dxi.size() == n &&
         gains.Ksd.minCoeff() > 0.0 && gains.Ksdd.minCoeff() > 0.0 &&
         gains.Dsdd.minCoeff() > 0.0 && gains.KF.minCoeff() > 0.0 && gains.Dxi.minCoeff() > 0.0;
}

namespace {

MatX vstack(const MatX& top, const MatX& bottom) {
  MatX out(top.rows() + bottom.rows(), top.cols());
  out.topRows(top.rows()) = top;
  out.bottomRows(bottom.rows()) = bottom;
  return out;
}

int total_dim(const std::vector<Task>& stack) {
  int n = 0;
  for (const auto& t : stack) n += t.dim();
  return n;
}

bool stack_valid(const std::vector<Task>& stack) {
  if (stack.empty()) return false;
  for (const auto& t : stack)
    if (t.dim() < 1 || !t.consistent()) return false;
  return total_dim(stack) <= 3;
}

Vec3 bias_torque(const DynTerms& dyn) { return dyn.cqa + dyn.gqa + dyn.taufr_qa; }

}  // namespace

Expected<Resolved> resolve_velocity(const std::vector<Task>& stack, const DynTerms& dyn,
                                    double dt, const VelocityLaw& law) {
  if (!stack_valid(stack)) return Err::kConfig;
  Resolved out;
  Vec3 qd_ref = Vec3::Zero();
  MatX JA;
  for (const auto& t : stack) {
    const VecX sdot_ref =
        t.sigma_dot_d + t.gains.Ksd.cwiseProduct(t.sigma_d - t.sigma);
    bool deg = false;
    const MatX Jp = pinv(t.J, 1e-6, 1e-8, &deg);
    out.degraded = out.degraded || deg;
    if (JA.size() == 0) {
      qd_ref = Jp * sdot_ref;
      JA = t.J;
    } else {
      qd_ref += nullspace_projector(JA) * (Jp * sdot_ref);
      JA = vstack(JA, t.J);
    }
  }
  out.ref = qd_ref;
  out.tau = law.Kqa * qd_ref * dt + law.Dqa * (qd_ref - dyn.qadot) + bias_torque(dyn);
  return out;
}

Expected<Resolved> resolve_acceleration(const std::vector<Task>& stack, const DynTerms& dyn) {
  if (!stack_valid(stack)) return Err::kConfig;
  Resolved out;
  Vec3 qdd_ref = Vec3::Zero();
  MatX JA;
  for (const auto& t : stack) {
    const VecX sdd_ref = t.sigma_ddot_d + t.gains.Ksdd.cwiseProduct(t.sigma_d - t.sigma) +
                         t.gains.Dsdd.cwiseProduct(t.sigma_dot_d - t.sigma_dot);
    bool deg = false;
    const MatX Jp = pinv(t.J, 1e-6, 1e-8, &deg);
    out.degraded = out.degraded || deg;
    const VecX rhs = sdd_ref - t.Jdot * dyn.qadot;
    if (JA.size() == 0) {
      qdd_ref = Jp * rhs;
      JA = t.J;
    } else {
      qdd_ref += nullspace_projector(JA) * (Jp * rhs);
      JA = vstack(JA, t.J);
    }
  }
  out.ref = qdd_ref;
  out.tau = dyn.Mqa * qdd_ref + bias_torque(dyn);
  return out;
}

Expected<Resolved> resolve_torque(const std::vector<Task>& stack, const DynTerms& dyn) {
  if (!stack_valid(stack)) return Err::kConfig;
  Resolved out;
  const Mat3 Mqa_inv = dyn.Mqa.llt().solve(Mat3::Identity());
  Vec3 tau_ref = Vec3::Zero();
  MatX JA;
  for (const auto& t : stack) {
    const TaskDyn td = task_space_inertia(t.J, Mqa_inv);
    out.degraded = out.degraded || td.degraded;
    const MatX KF = MatX(t.gains.KF.asDiagonal());
    const MatX DF = factorization_damping(td.Mi, KF, t.gains.Dxi);
    const VecX F_ref = td.Mi * t.sigma_ddot_d + KF * (t.sigma_d - t.sigma) +
                       DF * (t.sigma_dot_d - t.sigma_dot);
    const Vec3 contrib = t.J.transpose() * F_ref;
    if (JA.size() == 0) {
      tau_ref = contrib;
      JA = t.J;
    } else {
      bool deg = false;
      tau_ref += dyn_nullspace_projector(JA, Mqa_inv, &deg) * contrib;
      out.degraded = out.degraded || deg;
      JA = vstack(JA, t.J);
    }
  }
  out.ref = tau_ref;
  out.tau = tau_ref + bias_torque(dyn);
  return out;
}

MatX factorization_damping(const MatX& M, const MatX& K, const VecX& dxi) {
  const MatX Ms = spd_sqrt_x(M);
  const MatX Ks = spd_sqrt_x(K);
  const MatX D = MatX(dxi.asDiagonal());
  return Ms * D * Ks + Ks * D * Ms;
}

Vec3 pose_error(const Vec3& x_d, const Vec3& x) {
  Vec3 e = x_d - x;
  e.z() = wrap_pi(e.z());
  return e;
}

Expected<Wrench> impedance_control(const DynTerms& dyn, const Vec3& x, const Vec3& xdot,
                                   const Vec3& x_d, const Vec3& xdot_d, const Vec3& xddot_d,
                                   const ImpedanceGains& g) {
  const Vec3 e = pose_error(x_d, x);
  const Vec3 edot = xdot_d - xdot;
  const Mat3 Kd = g.Kd.asDiagonal();
  const MatX Dd = factorization_damping(dyn.Mx, Kd, g.Dxi);
  Wrench F = dyn.cx + dyn.gx + dyn.Ffr_x + dyn.Mx * xddot_d + Kd * e + Dd * edot;
  if (!F.allFinite()) return Err::kSingular;
  return F;
}

void LyapunovMonitor::reset() { has_prev_ = false; }

LyapunovSample LyapunovMonitor::update(const VecX& e, const VecX& edot, const MatX& Mi,
                                       const MatX& KF, const MatX& DF, const VecX& F_ext_i,
                                       double dt) {
  LyapunovSample s;
  s.V = 0.5 * edot.dot(Mi * edot) + 0.5 * e.dot(KF * e);
  MatX Mi_dot = MatX::Zero(Mi.rows(), Mi.cols());
  if (has_prev_ && dt > 0.0) Mi_dot = (Mi - Mi_prev_) / dt;
  // Constant task stiffness: the KF_dot term drops.
  s.Vdot = edot.dot(F_ext_i) + 0.5 * edot.dot(Mi_dot * edot) - edot.dot(DF * edot);
  Mi_prev_ = Mi;
  has_prev_ = true;
  return s;
}

Vec3 saturate_torque(const Vec3& tau, double tau_max) {
  return tau.cwiseMax(-tau_max).cwiseMin(tau_max);
}

}  // namespace cspr
