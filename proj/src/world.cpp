#include "cspr/world.hpp"

#include <algorithm>
#include <cmath>

#include "cspr/control.hpp"

namespace cspr {

const char* abort_name(AbortReason r) {
  switch (r) {
    case AbortReason::kNone: return "none";
    case AbortReason::kSingularity: return "singularity";
    case AbortReason::kSelfCollision: return "self_collision";
    case AbortReason::kSolver: return "solver";
  }
  return "?";
}

namespace {

struct SegGeom {
  Vec2 a, b;       // world endpoints
  double r_body;   // effective surface radius around the centerline
};

// Centerline segment (links) or center point (platform hull) per body.
SegGeom body_geometry(const RobotModel& m, const Vec9& q, const Vec3& x, Body body) {
  SegGeom g;
  if (body == Body::kPlatform) {
    g.a = g.b = x.head<2>();
    g.r_body = m.hull_radius;
    return g;
  }
  const int c = chain_of(body);
  g.r_body = 0.5 * m.link_thickness;
  if (first_link(body)) {
    g.a = base_point(m, c);
    g.b = elbow_point(m, q, c);
  } else {
    g.a = elbow_point(m, q, c);
    g.b = coupling_point(m, q, c);
  }
  return g;
}

// Closest-point parameter of p on segment [a,b], clamped to [0,1].
double seg_param(const Vec2& a, const Vec2& b, const Vec2& p) {
  const Vec2 ab = b - a;
  const double len2 = ab.squaredNorm();
  if (len2 <= 0.0) return 0.0;
  return std::clamp(ab.dot(p - a) / len2, 0.0, 1.0);
}

bool disc_allows(const ContactDisc& d, Body b) {
  return d.bodies.empty() || std::find(d.bodies.begin(), d.bodies.end(), b) != d.bodies.end();
}

constexpr Body kAllBodies[kNumBodies] = {Body::kC1L1, Body::kC1L2,     Body::kC2L1, Body::kC2L2,
                                         Body::kC3L1, Body::kC3L2, Body::kPlatform};

}  // namespace

Plant::Plant(const RobotModel& m, double dt_sub) : m_(m), dt_sub_(dt_sub) {
  if (!(dt_sub_ > 0.0) || dt_sub_ > 1e-4) dt_sub_ = 1e-4;
}

Err Plant::reset(const Vec3& x0, const Vec3& xdot0) {
  auto q = inverse_kinematics(m_, x0);
  if (!q.ok()) return q.err;
  auto Jxqa = jacobian_xqa(m_, Vec3((*q)(0), (*q)(3), (*q)(6)), x0);
  if (!Jxqa.ok()) return Jxqa.err;
  s_ = PlantState{};
  s_.x = x0;
  s_.xdot = xdot0;
  s_.q = *q;
  s_.qa = Vec3((*q)(0), (*q)(3), (*q)(6));
  s_.qadot = Jxqa->partialPivLu().solve(xdot0);
  out_ = StepOutcome{};
  out_.kappa = cond_xqa(m_, s_.qa, s_.x).value;
  out_.clearance = min_link_clearance(m_, s_.q).dist;
  abort_ = AbortReason::kNone;
  return Err::kOk;
}

std::vector<ContactForce> Plant::probe_contacts(const std::vector<ContactDisc>& discs) const {
  std::vector<ContactForce> out;
  for (const auto& d : discs) {
    for (Body b : kAllBodies) {
      if (!disc_allows(d, b)) continue;
      const SegGeom g = body_geometry(m_, s_.q, s_.x, b);
      const double lc = seg_param(g.a, g.b, d.center);
      const Vec2 p = g.a + lc * (g.b - g.a);
      const Vec2 off = p - d.center;
      const double dist = off.norm();
      const double depth = (d.radius + g.r_body) - dist;
      if (depth <= 0.0 || dist <= 1e-12) continue;
      const Vec2 n = off / dist;
      // Penetration rate from the centerline point's velocity; the abscissa
      // drift is tangential and drops out along the normal.
      auto frame = contact_frame(m_, s_.q, s_.x, b, lc);
      if (!frame.ok()) continue;
      const Vec2 pdot = frame->J_qa * s_.qadot;
      double f = d.stiffness * depth - d.damping * n.dot(pdot);
      if (f <= 0.0) continue;  // compression only
      ContactForce c;
      c.body = b;
      c.l_c = lc;
      c.point = p - n * g.r_body;  // surface point
      c.f_world = f * n;
      c.depth = depth;
      out.push_back(c);
    }
  }
  return out;
}

Err Plant::substep(const Vec3& tau_a, double h, const std::vector<ContactDisc>& discs,
                   const std::vector<AppliedForce>& forces) {
  // external loads at the current state
  Vec3 tau_ext = Vec3::Zero();
  Wrench F_mP = Wrench::Zero();
  out_.contacts = probe_contacts(discs);
  for (const auto& c : out_.contacts) {
    auto frame = contact_frame(m_, s_.q, s_.x, c.body, c.l_c);
    if (!frame.ok()) continue;
    const ProjectedWrench w = project_wrench(*frame, c.f_world);
    tau_ext += w.tau_a_ext;
    F_mP += w.F_ext_mP;
    out_.f_peak = std::max(out_.f_peak, c.f_world.norm());
  }
  for (const auto& a : forces) {
    auto frame = contact_frame(m_, s_.q, s_.x, a.body, a.l_c, a.lever);
    if (!frame.ok()) continue;
    const ProjectedWrench w = project_wrench(*frame, a.f_world);
    tau_ext += w.tau_a_ext;
    F_mP += w.F_ext_mP;
    ContactForce c;
    c.body = a.body;
    c.l_c = a.l_c;
    c.point = frame->pos;
    c.f_world = a.f_world;
    out_.contacts.push_back(c);
    out_.f_peak = std::max(out_.f_peak, a.f_world.norm());
  }
  out_.tau_ext = tau_ext;
  out_.F_ext_mP = F_mP;

  auto dyn = dynamics_terms(m_, s_.x, s_.xdot);
  if (!dyn.ok()) return dyn.err;

  const Vec3 rhs = tau_a + tau_ext - dyn->cqa - dyn->gqa - dyn->taufr_qa;
  const Vec3 qaddot = dyn->Mqa.ldlt().solve(rhs);
  if (!qaddot.allFinite()) return Err::kSingular;

  // semi-implicit: new velocity drives the position update
  s_.qadot += h * qaddot;
  s_.qa += h * s_.qadot;
  s_.t += h;

  // project the dependent coordinates back onto the loop closure
  const Vec3 qp(s_.q(1), s_.q(4), s_.q(7));
  auto x = forward_kinematics(m_, s_.qa, qp, s_.x);
  if (!x.ok()) return x.err;
  s_.x = *x;
  s_.q = reconstruct_q(m_, s_.qa, s_.x);
  out_.drift = std::max(out_.drift, constraint_full(m_, s_.q, s_.x).norm());

  auto Jxqa = jacobian_xqa(m_, s_.qa, s_.x);
  if (!Jxqa.ok()) return Jxqa.err;
  s_.xdot = (*Jxqa) * s_.qadot;
  return Err::kOk;
}

Err Plant::step(const Vec3& tau_cmd, double dt, const std::vector<ContactDisc>& discs,
                const std::vector<AppliedForce>& forces) {
  switch (abort_) {
    case AbortReason::kNone: break;
    case AbortReason::kSingularity: return Err::kSingular;
    case AbortReason::kSelfCollision: return Err::kConfig;
    case AbortReason::kSolver: return Err::kNoConvergence;
  }
  const Vec3 tau_a = saturate_torque(tau_cmd, m_.tau_max);
  const int n = std::max(1, static_cast<int>(std::ceil(dt / dt_sub_ - 1e-9)));
  const double h = dt / n;

  out_.f_peak = 0.0;
  out_.drift = 0.0;
  for (int i = 0; i < n; ++i) {
    const Err e = substep(tau_a, h, discs, forces);
    if (e != Err::kOk) {
      abort_ = AbortReason::kSolver;
      return e;
    }
    auto kappa = cond_xqa(m_, s_.qa, s_.x);
    out_.kappa = kappa.ok() ? *kappa : m_.kappa_cap;
    if (!kappa.ok() || *kappa >= m_.kappa_cap) {
      abort_ = AbortReason::kSingularity;
      return Err::kSingular;
    }
    out_.clearance = min_link_clearance(m_, s_.q).dist;
    if (out_.clearance <= m_.sc_floor) {
      abort_ = AbortReason::kSelfCollision;
      return Err::kConfig;
    }
  }
  return Err::kOk;
}

}  // namespace cspr
