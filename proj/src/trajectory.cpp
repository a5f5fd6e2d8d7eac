#include "cspr/trajectory.hpp"

#include <cmath>
#include <stdexcept>

namespace cspr {

SCurve::SCurve(double displacement, double v_max, double a_max, double j_max) {
  if (!(v_max > 0) || !(a_max > 0) || !(j_max > 0))
    throw std::invalid_argument("SCurve: limits must be positive");
  sign_ = displacement < 0 ? -1.0 : 1.0;
  L_ = std::abs(displacement);
  if (L_ < 1e-15) {
    T_ = 0;
    return;
  }

  // peak acceleration / velocity selection
  double tj, ta, v_pk;
  if (v_max * j_max >= a_max * a_max) {
    tj = a_max / j_max;
    ta = v_max / a_max - tj;
  } else {
    tj = std::sqrt(v_max / j_max);
    ta = 0;
  }
  v_pk = v_max;
  double ramp_dist2 = v_pk * (2 * tj + ta);  // accel + decel distance
  double tv;
  if (L_ >= ramp_dist2) {
    tv = (L_ - ramp_dist2) / v_pk;
  } else {
    tv = 0;
    // try keeping a_max saturated with a reduced peak velocity
    double tja = a_max / j_max;
    double v = 0.5 * a_max * (-tja + std::sqrt(tja * tja + 4 * L_ / a_max));
    if (v * j_max >= a_max * a_max) {
      v_pk = v;
      tj = tja;
      ta = v / a_max - tja;
    } else {
      tj = std::cbrt(L_ / (2 * j_max));
      ta = 0;
      v_pk = j_max * tj * tj;
    }
  }

  const double jseq[7] = {j_max, 0, -j_max, 0, -j_max, 0, j_max};
  const double tseq[7] = {tj, ta, tj, tv, tj, ta, tj};
  double t = 0, s = 0, v = 0, a = 0;
  for (int k = 0; k < 7; ++k) {
    if (tseq[k] <= 0) continue;
    segs_.push_back({t, s, v, a, jseq[k]});
    double dt = tseq[k];
    s += v * dt + 0.5 * a * dt * dt + jseq[k] * dt * dt * dt / 6.0;
    v += a * dt + 0.5 * jseq[k] * dt * dt;
    a += jseq[k] * dt;
    t += dt;
  }
  T_ = t;
  // absorb numerical residue so the profile lands exactly on L
  if (std::abs(s - L_) > 1e-9 * std::max(1.0, L_))
    throw std::runtime_error("SCurve: planning residual too large");
  L_ = s;
}

SCurve::Sample SCurve::sample(double t) const {
  Sample out;
  if (segs_.empty() || t >= T_) {
    out.s = sign_ * L_;
    return out;
  }
  if (t <= 0) return out;
  size_t k = segs_.size() - 1;
  while (k > 0 && segs_[k].t0 > t) --k;
  const Seg& g = segs_[k];
  double dt = t - g.t0;
  out.s = sign_ * (g.s0 + g.v0 * dt + 0.5 * g.a0 * dt * dt + g.j * dt * dt * dt / 6.0);
  out.v = sign_ * (g.v0 + g.a0 * dt + 0.5 * g.j * dt * dt);
  out.a = sign_ * (g.a0 + g.j * dt);
  return out;
}

LinePath::LinePath(const VecX& from, const VecX& to, double v_max, double a_max,
                   double j_max)
    : p0_(from) {
  VecX d = to - from;
  double len = d.norm();
  dir_ = len > 1e-15 ? VecX(d / len) : VecX(VecX::Zero(from.size()));
  curve_ = SCurve(len, v_max, a_max, j_max);
}

void LinePath::sample(double t, VecX& p, VecX& v, VecX& a) const {
  auto s = curve_.sample(t);
  p = p0_ + dir_ * s.s;
  v = dir_ * s.v;
  a = dir_ * s.a;
}

SquarePath::SquarePath(const Vec3& center, double edge, double v_max, double a_max,
                       double j_max, double corner_dwell)
    : center_(center), dwell_(corner_dwell) {
  double h = edge / 2;
  corners_ = {Vec2(-h, -h), Vec2(h, -h), Vec2(h, h), Vec2(-h, h), Vec2(-h, -h)};
  edge_curve_ = SCurve(edge, v_max, a_max, j_max);
}

double SquarePath::duration() const { return 4 * (edge_curve_.duration() + dwell_); }

void SquarePath::sample(double t, Vec3& x_d, Vec3& xd_d, Vec3& xdd_d) const {
  x_d = center_;
  xd_d.setZero();
  xdd_d.setZero();
  double leg = edge_curve_.duration() + dwell_;
  int e = std::min(3, static_cast<int>(t >= 0 ? t / leg : 0));
  double tl = t - e * leg;
  Vec2 from = corners_[e], to = corners_[e + 1];
  Vec2 u = (to - from).normalized();
  auto s = edge_curve_.sample(tl);
  x_d.head<2>() = center_.head<2>() + from + u * std::abs(s.s);
  xd_d.head<2>() = u * s.v;
  xdd_d.head<2>() = u * s.a;
}

}  // namespace cspr
