#include "cspr/isolation.hpp"

#include <cmath>

namespace cspr {

Expected<LineOfAction> line_of_action(const Wrench& Fhat, const Vec3& x,
                                      double hull_radius, double force_floor) {
  Vec2 f = Fhat.head<2>();
  double fn = f.norm();
  if (fn < force_floor) return Err::kConfig;
  LineOfAction loa;
  loa.dir = f / fn;
  // minimal-norm arm solving cross(r, f) = m; perpendicular to f
  loa.lever = (Fhat(2) / (fn * fn)) * Vec2(f.y(), -f.x());
  // the arm is perpendicular to the line, so the chord is symmetric
  double disc = hull_radius * hull_radius - loa.lever.squaredNorm();
  if (disc >= 0) {
    loa.intersects = true;
    loa.lambda2 = std::sqrt(disc);
    loa.lambda1 = -loa.lambda2;
    loa.push_point = x.head<2>() + loa.lever + loa.lambda2 * loa.dir;
  }
  return loa;
}

Expected<IsolationFeatures> isolation_features(const RobotModel& m, const Vec9& q,
                                               const Vec3& x, const Wrench& Fhat,
                                               const Vec3& tau_ext, double eps_tau) {
  auto loa = line_of_action(Fhat, x, m.hull_radius);
  if (!loa.ok()) return loa.err;
  IsolationFeatures out;
  out.loa = *loa;
  Vec2 anchor = x.head<2>() + loa->lever;
  for (int i = 0; i < kNumChains; ++i) {
    Vec2 cj = coupling_point(m, q, i);
    out.d(i) = std::abs(cross2(cj - anchor, loa->dir));
    Vec2 link = cj - elbow_point(m, q, i);
    out.alpha(i) = std::atan2(cross2(loa->dir, link), loa->dir.dot(link));
    out.tau_active[i] = std::abs(tau_ext(i)) > eps_tau;
    if (out.tau_active[i]) ++out.n_tau;
  }
  return out;
}

}  // namespace cspr
