#include "cspr/dynamics.hpp"

#include <cmath>

namespace cspr {

namespace {

// Mass matrix assembled from per-body COM/angular velocity maps, all rows
// expressed through qdot = J_qx xdot.
Mat3 assemble_mass(const RobotModel& m, const Vec9& q, const Mat93& Jqx) {
  Mat3 M = Mat3::Zero();
  for (int i = 0; i < kNumChains; ++i) {
    double a = q(idx_active(i)), p = q(idx_passive(i));
    Eigen::RowVector3d ra = Jqx.row(idx_active(i));
    Eigen::RowVector3d rp = Jqx.row(idx_passive(i));
    // proximal link: rotates about the fixed base joint
    Eigen::Matrix<double, 2, 3> Jv1 = m.c1 * unit_dir_perp(a) * ra;
    M += m.m1 * Jv1.transpose() * Jv1 + m.I1 * ra.transpose() * ra;
    // distal link
    Eigen::RowVector3d rw = ra + rp;
    Eigen::Matrix<double, 2, 3> Jv2 =
        m.l1 * unit_dir_perp(a) * ra + m.c2 * unit_dir_perp(a + p) * rw;
    M += m.m2 * Jv2.transpose() * Jv2 + m.I2 * rw.transpose() * rw;
  }
  M(0, 0) += m.mP;
  M(1, 1) += m.mP;
  M(2, 2) += m.IP;
  return M;
}

Vec3 assemble_gravity(const RobotModel& m, const Vec9& q, const Mat93& Jqx) {
  if (m.gravity.isZero()) return Vec3::Zero();
  Vec3 g = Vec3::Zero();
  for (int i = 0; i < kNumChains; ++i) {
    double a = q(idx_active(i)), p = q(idx_passive(i));
    Eigen::RowVector3d ra = Jqx.row(idx_active(i));
    Eigen::RowVector3d rp = Jqx.row(idx_passive(i));
    Eigen::Matrix<double, 2, 3> Jv1 = m.c1 * unit_dir_perp(a) * ra;
    g -= Jv1.transpose() * (m.m1 * m.gravity);
    Eigen::Matrix<double, 2, 3> Jv2 =
        m.l1 * unit_dir_perp(a) * ra + m.c2 * unit_dir_perp(a + p) * (ra + rp);
    g -= Jv2.transpose() * (m.m2 * m.gravity);
  }
  g.head<2>() -= m.mP * m.gravity;
  return g;
}

}  // namespace

Expected<Mat3> mass_matrix(const RobotModel& m, const Vec3& x, const Branch& branch) {
  auto q = inverse_kinematics(m, x, branch);
  if (!q.ok()) return q.err;
  auto Jqx = jacobian_qx(m, *q, x);
  if (!Jqx.ok()) return Jqx.err;
  return assemble_mass(m, *q, *Jqx);
}

Expected<double> kinetic_energy(const RobotModel& m, const Vec3& x, const Vec3& xdot,
                                const Branch& branch) {
  auto M = mass_matrix(m, x, branch);
  if (!M.ok()) return M.err;
  return 0.5 * xdot.dot((*M) * xdot);
}

Expected<DynTerms> dynamics_terms(const RobotModel& m, const Vec3& x, const Vec3& xdot,
                                  const Branch& branch) {
  DynTerms t;
  auto q = inverse_kinematics(m, x, branch);
  if (!q.ok()) return q.err;
  t.q = *q;
  auto Jqx = jacobian_qx(m, t.q, x);
  if (!Jqx.ok()) return Jqx.err;
  t.Jqx = *Jqx;
  Vec3 qa(t.q(0), t.q(3), t.q(6));
  auto Jxqa = jacobian_xqa(m, qa, x);
  if (!Jxqa.ok()) return Jxqa.err;
  t.Jxqa = *Jxqa;

  t.Mx = assemble_mass(m, t.q, t.Jqx);
  t.gx = assemble_gravity(m, t.q, t.Jqx);

  // Coriolis via Christoffel symbols of the configuration-dependent mass
  // matrix; numeric gradients keep Mx_dot = Cx + Cx^T exact to FD accuracy.
  const double h = 1e-5;
  Mat3 dM[3];
  for (int k = 0; k < 3; ++k) {
    Vec3 xp = x, xm = x;
    xp(k) += h;
    xm(k) -= h;
    auto Mp = mass_matrix(m, xp, branch);
    auto Mm = mass_matrix(m, xm, branch);
    if (!Mp.ok() || !Mm.ok()) return Err::kUnreachable;
    dM[k] = ((*Mp) - (*Mm)) / (2.0 * h);
  }
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double c = 0;
      for (int k = 0; k < 3; ++k)
        c += 0.5 * (dM[k](i, j) + dM[j](i, k) - dM[i](j, k)) * xdot(k);
      t.Cx(i, j) = c;
    }
  t.cx = t.Cx * xdot;

  // friction lives at the active joints; map through the actuation Jacobian
  t.qadot = t.Jxqa.partialPivLu().solve(xdot);
  for (int i = 0; i < 3; ++i)
    t.taufr_qa(i) = m.fric_viscous * t.qadot(i) +
                    m.fric_coulomb * std::tanh(m.fric_sharpness * t.qadot(i));
  t.Ffr_x = t.Jxqa.transpose().partialPivLu().solve(t.taufr_qa);

  auto Jd = jacobian_xqa_dot(m, x, xdot, branch);
  if (!Jd.ok()) return Jd.err;
  t.Jxqa_dot = *Jd;

  t.Mqa = t.Jxqa.transpose() * t.Mx * t.Jxqa;
  t.cqa = t.Jxqa.transpose() * (t.cx + t.Mx * t.Jxqa_dot * t.qadot);
  t.gqa = t.Jxqa.transpose() * t.gx;
  return t;
}

ProjectedWrench project_wrench(const ContactFrame& frame, const Vec2& f_world) {
  ProjectedWrench w;
  w.F_ext_mP = frame.J_x.transpose() * f_world;
  w.tau_a_ext = frame.J_qa.transpose() * f_world;
  return w;
}

TaskDyn task_space_inertia(const MatX& J, const Mat3& Mqa_inv, double damping) {
  TaskDyn td;
  MatX A = J * Mqa_inv * J.transpose();
  Eigen::JacobiSVD<MatX> svd(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VecX& s = svd.singularValues();
  double smax = s.size() ? s(0) : 0.0;
  td.degraded = s.size() == 0 || s(s.size() - 1) < 1e-10 * std::max(smax, 1.0);
  if (td.degraded) {
    td.Mi = (A + damping * MatX::Identity(A.rows(), A.cols())).inverse();
  } else {
    td.Mi = A.inverse();
  }
  td.Jbar = Mqa_inv * J.transpose() * td.Mi;
  return td;
}

Mat3 nullspace_projector(const MatX& JA) {
  return Mat3::Identity() - pinv(JA) * JA;
}

Mat3 dyn_nullspace_projector(const MatX& JA, const Mat3& Mqa_inv, bool* degraded) {
  TaskDyn td = task_space_inertia(JA, Mqa_inv);
  if (degraded) *degraded = td.degraded;
  return Mat3::Identity() - JA.transpose() * td.Jbar.transpose();
}

}  // namespace cspr
