#include "cspr/kinematics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cspr {

Vec2 base_point(const RobotModel& m, int chain) {
  return m.base_radius * unit_dir(m.base_angle[chain]);
}

Vec2 platform_anchor(const RobotModel& m, const Vec3& x, int chain) {
  return x.head<2>() + rot2(x(2)) * (m.platform_radius * unit_dir(m.platform_angle[chain]));
}

Vec2 elbow_point(const RobotModel& m, const Vec9& q, int chain) {
  return base_point(m, chain) + m.l1 * unit_dir(q(idx_active(chain)));
}

Vec2 coupling_point(const RobotModel& m, const Vec9& q, int chain) {
  double th2 = q(idx_active(chain)) + q(idx_passive(chain));
  return elbow_point(m, q, chain) + m.l2 * unit_dir(th2);
}

Expected<Vec9> inverse_kinematics(const RobotModel& m, const Vec3& x, const Branch& branch) {
  Vec9 q;
  for (int i = 0; i < kNumChains; ++i) {
    Vec2 w = platform_anchor(m, x, i) - base_point(m, i);
    double D = w.norm();
    if (D > m.l1 + m.l2 || D < std::abs(m.l1 - m.l2) || D < 1e-12)
      return Err::kUnreachable;
    double cb = (m.l1 * m.l1 + D * D - m.l2 * m.l2) / (2.0 * m.l1 * D);
    cb = std::clamp(cb, -1.0, 1.0);
    double beta = std::acos(cb);
    double gamma = std::atan2(w.y(), w.x());
    // branch +1: elbow on the clockwise side of the chord, sin(qp) > 0
    double qa = (branch[i] > 0) ? gamma - beta : gamma + beta;
    Vec2 p = base_point(m, i) + m.l1 * unit_dir(qa);
    Vec2 d = platform_anchor(m, x, i) - p;
    double th2 = std::atan2(d.y(), d.x());
    double qp = wrap_pi(th2 - qa);
    double qc = wrap_pi(x(2) - qa - qp);
    q(idx_active(i)) = qa;
    q(idx_passive(i)) = qp;
    q(idx_coupling(i)) = qc;
  }
  return q;
}

Vec9 reconstruct_q(const RobotModel& m, const Vec3& qa, const Vec3& x) {
  Vec9 q;
  for (int i = 0; i < kNumChains; ++i) {
    Vec2 p = base_point(m, i) + m.l1 * unit_dir(qa(i));
    Vec2 d = platform_anchor(m, x, i) - p;
    double th2 = std::atan2(d.y(), d.x());
    double qp = wrap_pi(th2 - qa(i));
    q(idx_active(i)) = qa(i);
    q(idx_passive(i)) = qp;
    q(idx_coupling(i)) = wrap_pi(x(2) - qa(i) - qp);
  }
  return q;
}

Vec3 constraint_red(const RobotModel& m, const Vec3& qa, const Vec3& x) {
  Vec3 r;
  for (int i = 0; i < kNumChains; ++i) {
    Vec2 w = platform_anchor(m, x, i) - (base_point(m, i) + m.l1 * unit_dir(qa(i)));
    r(i) = 0.5 * (w.squaredNorm() - m.l2 * m.l2);
  }
  return r;
}

Mat3 constraint_red_dqa(const RobotModel& m, const Vec3& qa, const Vec3& x) {
  Mat3 d = Mat3::Zero();
  for (int i = 0; i < kNumChains; ++i) {
    Vec2 w = platform_anchor(m, x, i) - (base_point(m, i) + m.l1 * unit_dir(qa(i)));
    d(i, i) = -m.l1 * w.dot(unit_dir_perp(qa(i)));
  }
  return d;
}

Mat3 constraint_red_dx(const RobotModel& m, const Vec3& qa, const Vec3& x) {
  Mat3 d;
  for (int i = 0; i < kNumChains; ++i) {
    Vec2 b = rot2(x(2)) * (m.platform_radius * unit_dir(m.platform_angle[i]));
    Vec2 w = x.head<2>() + b - (base_point(m, i) + m.l1 * unit_dir(qa(i)));
    d(i, 0) = w.x();
    d(i, 1) = w.y();
    d(i, 2) = w.dot(perp_ccw(b));
  }
  return d;
}

Expected<Vec3> forward_kinematics(const RobotModel& m, const Vec3& qa, const Vec3& qp,
                                  const Vec3& x_guess, int max_iter, double tol) {
  Vec3 x = x_guess;
  if (!x.allFinite()) {
    // synthesize a pose guess from the measured chain angles
    Vec2 t = Vec2::Zero();
    for (int i = 0; i < kNumChains; ++i)
      t += base_point(m, i) + m.l1 * unit_dir(qa(i)) + m.l2 * unit_dir(qa(i) + qp(i));
    t /= kNumChains;
    double sr = 0, cr = 0;
    for (int i = 0; i < kNumChains; ++i) {
      Vec2 k = base_point(m, i) + m.l1 * unit_dir(qa(i)) + m.l2 * unit_dir(qa(i) + qp(i));
      double ri = std::atan2((k - t).y(), (k - t).x()) - m.platform_angle[i];
      sr += std::sin(ri);
      cr += std::cos(ri);
    }
    x << t.x(), t.y(), std::atan2(sr, cr);
  }
  for (int it = 0; it < max_iter; ++it) {
    Vec3 r = constraint_red(m, qa, x);
    if (r.lpNorm<Eigen::Infinity>() < tol) return x;
    Mat3 J = constraint_red_dx(m, qa, x);
    double det = J.determinant();
    if (std::abs(det) < 1e-14) return Err::kNoConvergence;
    Vec3 dx = J.partialPivLu().solve(r);
    if (!dx.allFinite() || dx.head<2>().norm() > 0.5 * (m.l1 + m.l2))
      return Err::kNoConvergence;
    x -= dx;
  }
  return Err::kNoConvergence;
}

Vec9 constraint_full(const RobotModel& m, const Vec9& q, const Vec3& x) {
  Vec9 r;
  for (int i = 0; i < kNumChains; ++i) {
    double a = q(idx_active(i)), p = q(idx_passive(i)), c = q(idx_coupling(i));
    Vec2 pos = base_point(m, i) + m.l1 * unit_dir(a) + m.l2 * unit_dir(a + p) -
               platform_anchor(m, x, i);
    r(3 * i) = pos.x();
    r(3 * i + 1) = pos.y();
    r(3 * i + 2) = wrap_pi(a + p + c - x(2));
  }
  return r;
}

Mat99 constraint_full_dq(const RobotModel& m, const Vec9& q) {
  Mat99 d = Mat99::Zero();
  for (int i = 0; i < kNumChains; ++i) {
    double a = q(idx_active(i)), p = q(idx_passive(i));
    Vec2 da = m.l1 * unit_dir_perp(a) + m.l2 * unit_dir_perp(a + p);
    Vec2 dp = m.l2 * unit_dir_perp(a + p);
    int r = 3 * i;
    d(r, idx_active(i)) = da.x();
    d(r + 1, idx_active(i)) = da.y();
    d(r, idx_passive(i)) = dp.x();
    d(r + 1, idx_passive(i)) = dp.y();
    d(r + 2, idx_active(i)) = 1;
    d(r + 2, idx_passive(i)) = 1;
    d(r + 2, idx_coupling(i)) = 1;
  }
  return d;
}

Mat93 constraint_full_dx(const RobotModel& m, const Vec3& x) {
  Mat93 d = Mat93::Zero();
  for (int i = 0; i < kNumChains; ++i) {
    Vec2 b = rot2(x(2)) * (m.platform_radius * unit_dir(m.platform_angle[i]));
    int r = 3 * i;
    d(r, 0) = -1;
    d(r + 1, 1) = -1;
    d.block<2, 1>(r, 2) = -perp_ccw(b);
    d(r + 2, 2) = -1;
  }
  return d;
}

Expected<Mat93> jacobian_qx(const RobotModel& m, const Vec9& q, const Vec3& x) {
  // chain-wise analytic inverse of the block-diagonal constraint gradient
  Mat93 dx = constraint_full_dx(m, x);
  Mat93 J;
  for (int i = 0; i < kNumChains; ++i) {
    double a = q(idx_active(i)), p = q(idx_passive(i));
    Vec2 da = m.l1 * unit_dir_perp(a) + m.l2 * unit_dir_perp(a + p);
    Vec2 dp = m.l2 * unit_dir_perp(a + p);
    double det = da.x() * dp.y() - da.y() * dp.x();  // = l1*l2*sin(p)
    if (std::abs(det) < 1e-12) return Err::kSingular;
    Mat2 Ginv;
    Ginv << dp.y() / det, -dp.x() / det, -da.y() / det, da.x() / det;
    Eigen::Matrix<double, 2, 3> pos = dx.block<2, 3>(3 * i, 0);
    Eigen::Matrix<double, 2, 3> top = -Ginv * pos;
    J.block<1, 3>(idx_active(i), 0) = top.row(0);
    J.block<1, 3>(idx_passive(i), 0) = top.row(1);
    // orientation row: qc_dot = x_r_dot - qa_dot - qp_dot
    J.block<1, 3>(idx_coupling(i), 0) = -(top.row(0) + top.row(1));
    J(idx_coupling(i), 2) += 1.0;
  }
  return J;
}

Expected<Mat3> jacobian_xqa(const RobotModel& m, const Vec3& qa, const Vec3& x) {
  Mat3 dX = constraint_red_dx(m, qa, x);
  if (std::abs(dX.determinant()) < 1e-14) return Err::kSingular;
  Mat3 J = -dX.partialPivLu().solve(constraint_red_dqa(m, qa, x));
  return J;
}

Expected<Mat3> jacobian_xqa_dot(const RobotModel& m, const Vec3& x, const Vec3& xdot,
                                const Branch& branch) {
  if (xdot.norm() < 1e-12) return Mat3::Zero().eval();
  double h = m.jdot_dt;
  Vec3 xp = x + h * xdot, xm = x - h * xdot;
  auto qp = inverse_kinematics(m, xp, branch);
  auto qm = inverse_kinematics(m, xm, branch);
  if (!qp.ok() || !qm.ok()) return Err::kUnreachable;
  Vec3 qap(qp->coeff(0), qp->coeff(3), qp->coeff(6));
  Vec3 qam(qm->coeff(0), qm->coeff(3), qm->coeff(6));
  auto Jp = jacobian_xqa(m, qap, xp);
  auto Jm = jacobian_xqa(m, qam, xm);
  if (!Jp.ok() || !Jm.ok()) return Err::kSingular;
  return Mat3(((*Jp) - (*Jm)) / (2.0 * h));
}

const char* body_name(Body b) {
  switch (b) {
    case Body::kC1L1: return "C1L1";
    case Body::kC1L2: return "C1L2";
    case Body::kC2L1: return "C2L1";
    case Body::kC2L2: return "C2L2";
    case Body::kC3L1: return "C3L1";
    case Body::kC3L2: return "C3L2";
    case Body::kPlatform: return "mP";
  }
  return "?";
}

Expected<Body> body_from_name(const std::string& s) {
  for (int i = 0; i < kNumBodies; ++i)
    if (s == body_name(static_cast<Body>(i))) return static_cast<Body>(i);
  return Err::kConfig;
}

int chain_of(Body b) {
  int v = static_cast<int>(b);
  return v >= 6 ? -1 : v / 2;
}

bool first_link(Body b) {
  int v = static_cast<int>(b);
  return v < 6 && v % 2 == 0;
}

namespace {

// Rows of xdot_c = J_q qdot for a point fixed on a link (2x9, sparse).
Eigen::Matrix<double, 2, 9> link_point_jq(const RobotModel& m, const Vec9& q, int chain,
                                          bool first, double l_c) {
  Eigen::Matrix<double, 2, 9> Jq = Eigen::Matrix<double, 2, 9>::Zero();
  double a = q(idx_active(chain)), p = q(idx_passive(chain));
  if (first) {
    Jq.block<2, 1>(0, idx_active(chain)) = l_c * m.l1 * unit_dir_perp(a);
  } else {
    Jq.block<2, 1>(0, idx_active(chain)) =
        m.l1 * unit_dir_perp(a) + l_c * m.l2 * unit_dir_perp(a + p);
    Jq.block<2, 1>(0, idx_passive(chain)) = l_c * m.l2 * unit_dir_perp(a + p);
  }
  return Jq;
}

}  // namespace

Expected<ContactFrame> contact_frame(const RobotModel& m, const Vec9& q, const Vec3& x,
                                     Body body, double l_c, const Vec2& lever) {
  ContactFrame f;
  auto Jqx = jacobian_qx(m, q, x);
  if (!Jqx.ok()) return Jqx.err;
  Vec3 qa(q(0), q(3), q(6));
  auto Jxqa = jacobian_xqa(m, qa, x);
  if (!Jxqa.ok()) return Jxqa.err;

  if (body == Body::kPlatform) {
    Vec2 r = rot2(x(2)) * lever;
    f.pos = x.head<2>() + r;
    f.J_x.setZero();
    f.J_x.block<2, 2>(0, 0).setIdentity();
    f.J_x.block<2, 1>(0, 2) = perp_ccw(r);
    // platform point as a function of all joints, via the loop closure
    Mat93 dX = constraint_full_dx(m, x);
    MatX Xq = -pinv(dX) * constraint_full_dq(m, q);
    f.J_q = f.J_x * Xq;
  } else {
    int chain = chain_of(body);
    double lc = std::clamp(l_c, 0.0, 1.0);
    if (first_link(body)) {
      f.pos = base_point(m, chain) + lc * m.l1 * unit_dir(q(idx_active(chain)));
    } else {
      f.pos = elbow_point(m, q, chain) +
              lc * m.l2 * unit_dir(q(idx_active(chain)) + q(idx_passive(chain)));
    }
    f.J_q = link_point_jq(m, q, chain, first_link(body), lc);
    f.J_x = f.J_q * (*Jqx);
  }
  f.J_qa = f.J_x * (*Jxqa);
  return f;
}

double segment_distance(const Vec2& a0, const Vec2& a1, const Vec2& b0, const Vec2& b1) {
  // closest points between two segments (Ericson-style clamped solve)
  const Vec2 d1 = a1 - a0, d2 = b1 - b0, r = a0 - b0;
  const double a = d1.dot(d1), e = d2.dot(d2), f = d2.dot(r);
  const double eps = 1e-14;
  double s = 0, t = 0;
  if (a <= eps && e <= eps) return r.norm();
  if (a <= eps) {
    t = std::clamp(f / e, 0.0, 1.0);
  } else {
    double c = d1.dot(r);
    if (e <= eps) {
      s = std::clamp(-c / a, 0.0, 1.0);
    } else {
      double b = d1.dot(d2);
      double den = a * e - b * b;
      s = (den > eps * a * e) ? std::clamp((b * f - c * e) / den, 0.0, 1.0) : 0.0;
      t = (b * s + f) / e;
      if (t < 0) {
        t = 0;
        s = std::clamp(-c / a, 0.0, 1.0);
      } else if (t > 1) {
        t = 1;
        s = std::clamp((b - c) / a, 0.0, 1.0);
      }
    }
  }
  return (a0 + s * d1 - (b0 + t * d2)).norm();
}

ClearancePair min_link_clearance(const RobotModel& m, const Vec9& q) {
  std::array<std::array<Vec2, 3>, kNumChains> pts;  // base, elbow, coupling
  for (int i = 0; i < kNumChains; ++i)
    pts[i] = {base_point(m, i), elbow_point(m, q, i), coupling_point(m, q, i)};
  ClearancePair best;
  best.dist = std::numeric_limits<double>::infinity();
  for (int i = 0; i < kNumChains; ++i) {
    for (int j = i + 1; j < kNumChains; ++j) {
      for (int a = 0; a < 2; ++a) {
        for (int b = 0; b < 2; ++b) {
          double d = segment_distance(pts[i][a], pts[i][a + 1], pts[j][b], pts[j][b + 1]);
          if (d < best.dist) best = {d, i, a, j, b};
        }
      }
    }
  }
  return best;
}

Expected<double> cond_xqa(const RobotModel& m, const Vec3& qa, const Vec3& x) {
  auto J = jacobian_xqa(m, qa, x);
  if (!J.ok()) return J.err;
  Mat3 Js = *J;
  Js.row(2) *= m.char_length;
  Eigen::SelfAdjointEigenSolver<Mat3> es(Js.transpose() * Js, Eigen::EigenvaluesOnly);
  double lmin = es.eigenvalues()(0), lmax = es.eigenvalues()(2);
  if (lmin < 1e-300) return Err::kSingular;
  return std::sqrt(lmax / lmin);
}

Expected<IecGradients> iec_gradients(const RobotModel& m, const Vec3& qa, const Vec3& x) {
  IecGradients g;
  auto k0 = cond_xqa(m, qa, x);
  if (!k0.ok()) return k0.err;
  g.kappa = *k0;
  g.clearance = min_link_clearance(m, reconstruct_q(m, qa, x)).dist;
  for (int j = 0; j < kNumChains; ++j) {
    Vec3 qa_d = qa;
    qa_d(j) += m.fd_delta;
    auto xd = forward_kinematics(m, qa_d, Vec3::Zero(), x);
    if (!xd.ok()) return xd.err;
    auto kd = cond_xqa(m, qa_d, *xd);
    if (!kd.ok()) return kd.err;
    g.J_kappa(j) = (*kd - g.kappa) / m.fd_delta;
    double dd = min_link_clearance(m, reconstruct_q(m, qa_d, *xd)).dist;
    g.J_clearance(j) = (dd - g.clearance) / m.fd_delta;
  }
  return g;
}

}  // namespace cspr
