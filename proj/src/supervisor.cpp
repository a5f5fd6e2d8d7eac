#include "cspr/supervisor.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "cspr/mlp.hpp"

namespace cspr {

bool SetBounds::valid() const {
  if (std::isfinite(lo_a) && std::isfinite(lo_s) && !(lo_a > lo_s)) return false;
  if (std::isfinite(hi_a) && std::isfinite(hi_s) && !(hi_a < hi_s)) return false;
  return lo_a < hi_a;
}

bool check_status(double sigma, const SetBounds& b) {
  return sigma > b.lo_a && sigma < b.hi_a;
}

int select_mode(bool ok_kappa, bool ok_clearance) {
  if (ok_kappa && ok_clearance) return 1;
  if (!ok_kappa && ok_clearance) return 2;
  if (ok_kappa && !ok_clearance) return 3;
  return 4;
}

Vec3 interpolate_modes(const Vec3& tau_prev, const Vec3& tau_new, double t_since_switch,
                       double T_blend) {
  if (!(T_blend > 0.0) || t_since_switch >= T_blend) return tau_new;
  if (t_since_switch <= 0.0) return tau_prev;
  const double w = t_since_switch / T_blend;
  return (1.0 - w) * tau_prev + w * tau_new;
}

const char* reaction_family_name(ReactionFamily f) {
  switch (f) {
    case ReactionFamily::kNone: return "none";
    case ReactionFamily::kPlatform: return "platform";
    case ReactionFamily::kFirstLink: return "first_link";
    case ReactionFamily::kSecondLink: return "second_link";
    case ReactionFamily::kClamp: return "clamp";
    case ReactionFamily::kZeroG: return "zero_g";
  }
  return "?";
}

const char* phase_name(Phase p) {
  switch (p) {
    case Phase::kTracking: return "tracking";
    case Phase::kReacting: return "reacting";
    case Phase::kZeroG: return "zero_g";
  }
  return "?";
}

ClassifierHooks mlp_classifier_hooks(const MLP* type, const MLP* chain, const MLP* body,
                                     double min_confidence) {
  ClassifierHooks h;
  auto confident = [min_confidence](const MLP& net, const VecX& f, int* cls) {
    if (net.n_in() != f.size()) return Err::kConfig;
    const VecX p = net.predict_proba(f);
    int best = 0;
    p.maxCoeff(&best);
    if (p[best] < min_confidence) return Err::kNoConvergence;
    *cls = best;
    return Err::kOk;
  };
  if (type) {
    h.type = [type, confident](const VecX& f) -> Expected<ContactType> {
      int c = 0;
      if (Err e = confident(*type, f, &c); e != Err::kOk) return e;
      return static_cast<ContactType>(c);
    };
  }
  if (chain) {
    h.chain = [chain, confident](const VecX& f) -> Expected<int> {
      int c = 0;
      if (Err e = confident(*chain, f, &c); e != Err::kOk) return e;
      return c;
    };
  }
  if (body) {
    h.body = [body, confident](const VecX& f) -> Expected<Body> {
      int c = 0;
      if (Err e = confident(*body, f, &c); e != Err::kOk) return e;
      if (c < 0 || c >= kNumBodies) return Err::kConfig;
      return static_cast<Body>(c);
    };
  }
  return h;
}

// --- reaction planning --------------------------------------------------------

namespace {

Vec3 active_joints(const Vec9& q) { return {q[0], q[3], q[6]}; }

// Minimum-norm generalized joint torques reproducing a platform wrench,
// tau_q = J_qx (J_qx^T J_qx)^-1 F; used only for direction inference.
Vec9 full_joint_torque(const Mat93& Jqx, const Wrench& F) {
  const Mat3 G = Jqx.transpose() * Jqx;
  return Jqx * G.ldlt().solve(F);
}

double sgn(double v) { return v < 0.0 ? -1.0 : 1.0; }

}  // namespace

Expected<ReactionPlan> build_reaction(const RobotModel& m, const SupervisorConfig& cfg,
                                      const ContactEvent& ev, const SupervisorInput& in) {
  ReactionPlan plan;
  plan.event = ev;
  plan.t0 = in.t;

  if (ev.type == ContactType::kClamping) {
    if (ev.chain < 0 || ev.chain >= kNumChains) return Err::kConfig;
    plan.family = ReactionFamily::kClamp;
    plan.joint_chain = ev.chain;
    plan.qa0 = in.dyn.q[idx_active(ev.chain)];
    plan.qp0 = in.dyn.q[idx_passive(ev.chain)];
    // Both links open the gap: the crank follows its measured external torque,
    // the passive joint the yield direction of the estimated wrench.
    plan.sign_a = sgn(ev.tau_ext[ev.chain]);
    const Vec9 tau_q = full_joint_torque(in.dyn.Jqx, ev.F_hat);
    plan.sign_p = sgn(tau_q[idx_passive(ev.chain)]);
    plan.qa_traj = SCurve(plan.sign_a * cfg.q_react, cfg.joint_v, cfg.joint_a, cfg.joint_j);
    plan.qp_traj = SCurve(plan.sign_p * cfg.q_react, cfg.joint_v, cfg.joint_a, cfg.joint_j);
    return plan;
  }

  if (ev.body == Body::kPlatform) {
    plan.family = ReactionFamily::kPlatform;
    if (ev.iso.loa.dir.norm() < 0.5) return Err::kConfig;  // no line of action
    plan.n_hat = ev.iso.loa.dir;
    plan.p0 = in.x.head<2>();
    const Vec2 goal = plan.p0 + cfg.d_react * plan.n_hat;
    plan.path = LinePath(VecX(plan.p0), VecX(goal), cfg.react_v, cfg.react_a, cfg.react_j);
    return plan;
  }

  const int chain = chain_of(ev.body);
  if (chain < 0) return Err::kConfig;
  if (first_link(ev.body)) {
    plan.family = ReactionFamily::kFirstLink;
    plan.joint_chain = chain;
    plan.qa0 = in.dyn.q[idx_active(chain)];
    plan.sign_a = sgn(ev.tau_ext[chain]);
    plan.qa_traj = SCurve(plan.sign_a * cfg.q_react, cfg.joint_v, cfg.joint_a, cfg.joint_j);
    return plan;
  }

  // Second link: retract the contact point, frozen at the filter's first
  // estimate, along the estimated contact force.
  if (!ev.pf_valid) return Err::kConfig;
  plan.family = ReactionFamily::kSecondLink;
  plan.joint_chain = chain;
  plan.l_hat = ev.pf.l_c;
  const double fn = ev.pf.f_world.norm();
  if (fn < 1e-9) return Err::kConfig;
  plan.n_hat = ev.pf.f_world / fn;
  auto frame = contact_frame(m, in.dyn.q, in.x, ev.body, plan.l_hat);
  if (!frame.ok()) return frame.err;
  plan.p0 = frame->pos;
  const Vec2 goal = plan.p0 + cfg.d_react * plan.n_hat;
  plan.path = LinePath(VecX(plan.p0), VecX(goal), cfg.react_v, cfg.react_a, cfg.react_j);
  return plan;
}

// --- supervisor ----------------------------------------------------------------

namespace {

TaskGains sized_gains(TaskKind k, int n) {
  TaskGains g = gains_for_kind(k);
  if (g.Ksd.size() == n) return g;
  return uniform_gains(n, g.Ksd[0], g.Ksdd[0], g.Dsdd[0], g.KF[0], g.Dxi[0]);
}

Task make_task(const std::string& id, TaskKind kind, int n) {
  Task t;
  t.id = id;
  t.kind = kind;
  t.resize(n);
  t.gains = sized_gains(kind, n);
  return t;
}

double plan_duration(const ReactionPlan& p) {
  switch (p.family) {
    case ReactionFamily::kPlatform:
    case ReactionFamily::kSecondLink: return p.path.duration();
    case ReactionFamily::kFirstLink: return p.qa_traj.duration();
    case ReactionFamily::kClamp: return std::max(p.qa_traj.duration(), p.qp_traj.duration());
    default: return 0.0;
  }
}

}  // namespace

Supervisor::Supervisor(const RobotModel& m, const SupervisorConfig& cfg, ClassifierHooks hooks,
                       TrackingRef ref)
    : m_(&m), cfg_(cfg), hooks_(std::move(hooks)), ref_(std::move(ref)), pf_(cfg.pf) {}

const ReactionPlan* Supervisor::plan() const {
  return cur_.plan.family == ReactionFamily::kNone ? nullptr : &cur_.plan;
}

std::vector<Task> Supervisor::tracking_stack(const SupervisorInput& in) const {
  Vec3 x_d = x_hold_, xd_d = Vec3::Zero(), xdd_d = Vec3::Zero();
  if (ref_) ref_(in.t, x_d, xd_d, xdd_d);

  std::vector<Task> stack;
  Task pos = make_task("track_xt", TaskKind::kPlatformPosition, 2);
  pos.sigma = in.x.head<2>();
  pos.sigma_dot = in.xdot.head<2>();
  pos.sigma_d = x_d.head<2>();
  pos.sigma_dot_d = xd_d.head<2>();
  pos.sigma_ddot_d = xdd_d.head<2>();
  pos.J = in.dyn.Jxqa.topRows<2>();
  pos.Jdot = in.dyn.Jxqa_dot.topRows<2>();
  stack.push_back(std::move(pos));

  Task rot = make_task("track_xr", TaskKind::kPlatformOrientation, 1);
  rot.sigma[0] = in.x[2];
  rot.sigma_dot[0] = in.xdot[2];
  rot.sigma_d[0] = in.x[2] + wrap_pi(x_d[2] - in.x[2]);
  rot.sigma_dot_d[0] = xd_d[2];
  rot.sigma_ddot_d[0] = xdd_d[2];
  rot.J = in.dyn.Jxqa.row(2);
  rot.Jdot = in.dyn.Jxqa_dot.row(2);
  stack.push_back(std::move(rot));
  return stack;
}

Expected<std::vector<Task>> Supervisor::reaction_stack(const Regime& r,
                                                       const SupervisorInput& in) const {
  std::vector<Task> stack;
  if (r.kappa_armed || r.clear_armed) {
    auto g = iec_gradients(*m_, active_joints(in.dyn.q), in.x);
    if (!g.ok()) return g.err;
    if (r.kappa_armed) {
      Task t = make_task("iec_kappa", TaskKind::kIecCondition, 1);
      t.sigma[0] = g->kappa;
      t.sigma_dot[0] = g->J_kappa.dot(in.dyn.qadot);
      const auto s = r.kappa_traj.sample(in.t - r.kappa_t0);
      t.sigma_d[0] = r.kappa_sigma0 + s.s;
      t.sigma_dot_d[0] = s.v;
      t.sigma_ddot_d[0] = s.a;
      t.J = g->J_kappa;
      stack.push_back(std::move(t));
    }
    if (r.clear_armed) {
      Task t = make_task("iec_clear", TaskKind::kIecClearance, 1);
      t.sigma[0] = g->clearance;
      t.sigma_dot[0] = g->J_clearance.dot(in.dyn.qadot);
      const auto s = r.clear_traj.sample(in.t - r.clear_t0);
      t.sigma_d[0] = r.clear_sigma0 + s.s;
      t.sigma_dot_d[0] = s.v;
      t.sigma_ddot_d[0] = s.a;
      t.J = g->J_clearance;
      stack.push_back(std::move(t));
    }
  }

  const int remaining = 3 - static_cast<int>(stack.size());
  const ReactionPlan& p = r.plan;
  const double ts = in.t - p.t0;

  if (r.settled) {
    // Standstill after the reaction: pin as much of the pose as the armed
    // constraints leave room for (rotation first when only one row is free,
    // since that is the axis the reaction families leave uncommanded).
    if (remaining >= 2) {
      Task t = make_task("hold_xt", TaskKind::kPlatformPosition, 2);
      t.sigma = in.x.head<2>();
      t.sigma_dot = in.xdot.head<2>();
      t.sigma_d = r.hold_x.head<2>();
      t.J = in.dyn.Jxqa.topRows<2>();
      t.Jdot = in.dyn.Jxqa_dot.topRows<2>();
      stack.push_back(std::move(t));
    }
    if (remaining == 1 || remaining == 3) {
      Task t = make_task("hold_xr", TaskKind::kPlatformOrientation, 1);
      t.sigma[0] = in.x[2];
      t.sigma_dot[0] = in.xdot[2];
      t.sigma_d[0] = in.x[2] + wrap_pi(r.hold_x[2] - in.x[2]);
      t.J = in.dyn.Jxqa.row(2);
      t.Jdot = in.dyn.Jxqa_dot.row(2);
      stack.push_back(std::move(t));
    }
    return stack;
  }

  switch (p.family) {
    case ReactionFamily::kPlatform:
    case ReactionFamily::kSecondLink: {
      Vec2 sig, sigd;
      MatX J2(2, 3);
      MatX J2dot = MatX::Zero(2, 3);
      if (p.family == ReactionFamily::kPlatform) {
        sig = in.x.head<2>();
        sigd = in.xdot.head<2>();
        J2 = in.dyn.Jxqa.topRows<2>();
        J2dot = in.dyn.Jxqa_dot.topRows<2>();
      } else {
        auto frame = contact_frame(*m_, in.dyn.q, in.x, p.event.body, p.l_hat);
        if (!frame.ok()) return frame.err;
        sig = frame->pos;
        sigd = frame->J_qa * in.dyn.qadot;
        J2 = frame->J_qa;
      }
      VecX pd(2), vd(2), ad(2);
      p.path.sample(ts, pd, vd, ad);
      const TaskKind kind = p.family == ReactionFamily::kPlatform
                                ? TaskKind::kReactionPlatform
                                : TaskKind::kReactionSecondLink;
      const char* base = p.family == ReactionFamily::kPlatform ? "react_platform"
                                                               : "react_second_link";
      if (remaining >= 2) {
        Task t = make_task(base, kind, 2);
        t.sigma = sig;
        t.sigma_dot = sigd;
        t.sigma_d = pd;
        t.sigma_dot_d = vd;
        t.sigma_ddot_d = ad;
        t.J = J2;
        t.Jdot = J2dot;
        stack.push_back(std::move(t));
      } else {
        // Both constraint tasks active: only the projection onto the
        // retraction direction fits into the remaining freedom.
        Task t = make_task(std::string(base) + "_1d", kind, 1);
        t.sigma[0] = p.n_hat.dot(sig);
        t.sigma_dot[0] = p.n_hat.dot(sigd);
        t.sigma_d[0] = p.n_hat.dot(Vec2(pd));
        t.sigma_dot_d[0] = p.n_hat.dot(Vec2(vd));
        t.sigma_ddot_d[0] = p.n_hat.dot(Vec2(ad));
        t.J = p.n_hat.transpose() * J2;
        t.Jdot = p.n_hat.transpose() * J2dot;
        stack.push_back(std::move(t));
      }
      break;
    }
    case ReactionFamily::kFirstLink: {
      Task t = make_task("react_first_link", TaskKind::kReactionFirstLink, 1);
      const int j = p.joint_chain;
      t.sigma[0] = in.dyn.q[idx_active(j)];
      t.sigma_dot[0] = in.dyn.qadot[j];
      const auto s = p.qa_traj.sample(ts);
      t.sigma_d[0] = p.qa0 + s.s;
      t.sigma_dot_d[0] = s.v;
      t.sigma_ddot_d[0] = s.a;
      t.J(0, j) = 1.0;
      stack.push_back(std::move(t));
      break;
    }
    case ReactionFamily::kClamp: {
      const int j = p.joint_chain;
      Task ta = make_task("react_clamp_qa", TaskKind::kReactionClampActive, 1);
      ta.sigma[0] = in.dyn.q[idx_active(j)];
      ta.sigma_dot[0] = in.dyn.qadot[j];
      const auto sa = p.qa_traj.sample(ts);
      ta.sigma_d[0] = p.qa0 + sa.s;
      ta.sigma_dot_d[0] = sa.v;
      ta.sigma_ddot_d[0] = sa.a;
      ta.J(0, j) = 1.0;
      stack.push_back(std::move(ta));
      if (remaining >= 2) {
        Task tp = make_task("react_clamp_qp", TaskKind::kReactionClampPassive, 1);
        const Eigen::RowVector3d Jp = (in.dyn.Jqx * in.dyn.Jxqa).row(idx_passive(j));
        tp.sigma[0] = in.dyn.q[idx_passive(j)];
        tp.sigma_dot[0] = Jp.dot(in.dyn.qadot);
        const auto sp = p.qp_traj.sample(ts);
        tp.sigma_d[0] = p.qp0 + sp.s;
        tp.sigma_dot_d[0] = sp.v;
        tp.sigma_ddot_d[0] = sp.a;
        tp.J = Jp;
        stack.push_back(std::move(tp));
      }
      break;
    }
    case ReactionFamily::kZeroG:
    case ReactionFamily::kNone:
      break;
  }
  return stack;
}

Supervisor::Eval Supervisor::evaluate(const Regime& r, const SupervisorInput& in) const {
  Eval ev;
  if (r.phase == Phase::kZeroG) {
    ev.tau = saturate_torque(in.dyn.gqa, cfg_.tau_max);
    return ev;
  }
  if (r.phase == Phase::kTracking) {
    ev.stack = tracking_stack(in);
  } else {
    auto rs = reaction_stack(r, in);
    if (!rs.ok()) {
      ev.failed = true;
      ev.err = err_name(rs.err);
      ev.tau = saturate_torque(in.dyn.gqa, cfg_.tau_max);
      return ev;
    }
    ev.stack = std::move(*rs);
    if (ev.stack.empty()) {  // zero-g reaction plan carries no tasks
      ev.tau = saturate_torque(in.dyn.gqa, cfg_.tau_max);
      return ev;
    }
  }
  Expected<Resolved> res = Err::kConfig;
  switch (cfg_.level) {
    case ControlLevel::kVelocity: res = resolve_velocity(ev.stack, in.dyn, cfg_.dt); break;
    case ControlLevel::kAcceleration: res = resolve_acceleration(ev.stack, in.dyn); break;
    case ControlLevel::kTorque: res = resolve_torque(ev.stack, in.dyn); break;
  }
  if (!res.ok()) {
    ev.failed = true;
    ev.err = err_name(res.err);
    ev.tau = saturate_torque(in.dyn.gqa, cfg_.tau_max);
    return ev;
  }
  ev.degraded = res->degraded;
  ev.tau = saturate_torque(res->tau, cfg_.tau_max);
  return ev;
}

void Supervisor::switch_regime(const Regime& next, double t, const SupervisorInput&,
                               SupervisorOutput& out) {
  prev_ = cur_;
  cur_ = next;
  blend_active_ = true;
  switch_t_ = t;
  settle_run_ = 0;  // any regime change restarts the standstill dwell
  if (!out.note.empty()) out.note += "; ";
  out.note += std::string(phase_name(cur_.phase)) + "/m" + std::to_string(cur_.mode);
}

void Supervisor::enter_zero_g(const SupervisorInput& in, SupervisorOutput& out,
                              const std::string& why) {
  Regime next;
  next.phase = Phase::kZeroG;
  next.mode = cur_.mode;
  next.plan.family = ReactionFamily::kZeroG;
  next.plan.t0 = in.t;
  if (!out.note.empty()) out.note += "; ";
  out.note += "zero_g: " + why;
  switch_regime(next, in.t, in, out);
}

bool Supervisor::arm_iec(Regime& r, double t, double sigma_kappa, double sigma_clear) const {
  if (!cfg_.iec_enabled || r.phase != Phase::kReacting) return false;
  // A missing safety bound leaves nothing to steer toward, so the constraint
  // stays unarmed even if its activation bound is crossed.
  const bool viol_k = std::isfinite(cfg_.kappa.hi_s) && std::isfinite(sigma_kappa) &&
                      !check_status(sigma_kappa, cfg_.kappa);
  const bool viol_c =
      std::isfinite(cfg_.clearance.lo_s) && !check_status(sigma_clear, cfg_.clearance);
  bool changed = false;
  if (viol_k && !r.kappa_armed) {
    r.kappa_armed = true;  // latched until the case is cleared
    r.kappa_sigma0 = sigma_kappa;
    r.kappa_t0 = t;
    r.kappa_traj =
        SCurve(cfg_.kappa.hi_s - sigma_kappa, cfg_.kappa_v, cfg_.kappa_a, cfg_.kappa_j);
    changed = true;
  }
  if (viol_c && !r.clear_armed) {
    r.clear_armed = true;
    r.clear_sigma0 = sigma_clear;
    r.clear_t0 = t;
    r.clear_traj =
        SCurve(cfg_.clearance.lo_s - sigma_clear, cfg_.clear_v, cfg_.clear_a, cfg_.clear_j);
    changed = true;
  }
  if (changed) r.mode = select_mode(!r.kappa_armed, !r.clear_armed);
  return changed;
}

bool Supervisor::detect_and_plan(const SupervisorInput& in, SupervisorOutput& out) {
  auto iso = isolation_features(*m_, in.dyn.q, in.x, in.F_hat, in.tau_ext, cfg_.eps_tau);
  if (!iso.ok()) {
    enter_zero_g(in, out, std::string("isolation: ") + err_name(iso.err));
    return false;
  }
  if (!hooks_.type) {
    enter_zero_g(in, out, "no type classifier");
    return false;
  }
  auto type = hooks_.type(type_features(in.F_hat));
  if (!type.ok()) {
    enter_zero_g(in, out, std::string("type classifier: ") + err_name(type.err));
    return false;
  }

  ContactEvent ev;
  ev.tick = in.tick;
  ev.t = in.t;
  ev.F_hat = in.F_hat;
  ev.tau_ext = in.tau_ext;
  ev.type = *type;
  ev.iso = *iso;

  if (ev.type == ContactType::kClamping) {
    if (!hooks_.chain) {
      enter_zero_g(in, out, "no chain classifier");
      return false;
    }
    auto ch = hooks_.chain(chain_features(in.F_hat, iso->d));
    if (!ch.ok() || *ch < 0 || *ch >= kNumChains) {
      enter_zero_g(in, out, "chain classifier");
      return false;
    }
    ev.chain = *ch;
  } else {
    if (!hooks_.body) {
      enter_zero_g(in, out, "no body classifier");
      return false;
    }
    auto body = hooks_.body(body_features(in.F_hat, in.tau_ext, iso->d, iso->alpha));
    if (!body.ok()) {
      enter_zero_g(in, out, "body classifier");
      return false;
    }
    ev.body = *body;
    if (ev.body != Body::kPlatform && !first_link(ev.body)) {
      // Second-link contact: the plan freezes the filter's first estimate.
      pf_ = ParticleFilter(cfg_.pf);
      if (pf_.init(*m_, in.dyn.q, in.x, ev.body, in.tau_ext) != Err::kOk) {
        enter_zero_g(in, out, "filter init");
        return false;
      }
      auto est = pf_.step(*m_, in.dyn.q, in.x, ev.body, in.tau_ext);
      if (!est.ok()) {
        enter_zero_g(in, out, "filter step");
        return false;
      }
      ev.pf = *est;
      ev.pf_valid = true;
    }
  }

  auto plan = build_reaction(*m_, cfg_, ev, in);
  if (!plan.ok()) {
    enter_zero_g(in, out, std::string("reaction plan: ") + err_name(plan.err));
    return false;
  }

  Regime next;
  next.phase = Phase::kReacting;
  next.plan = std::move(*plan);
  next.mode = 1;
  // Constraint supervision starts with the detection (same tick), so the
  // blend source stays the tracking law even if a bound is already violated.
  arm_iec(next, in.t, out.sigma_kappa, out.sigma_clear);
  switch_regime(next, in.t, in, out);

  out.detected_now = true;
  out.ctype = ev.type;
  out.body = ev.body;
  out.chain = ev.chain;
  out.pf = ev.pf;
  out.pf_valid = ev.pf_valid;
  return true;
}

void Supervisor::lyapunov(const std::vector<Task>& stack, const SupervisorInput& in,
                          SupervisorOutput& out) {
  if (cfg_.level != ControlLevel::kTorque || stack.empty()) return;
  std::vector<std::string> ids;
  ids.reserve(stack.size());
  for (const auto& t : stack) ids.push_back(t.id);
  if (ids != lyap_ids_) {
    lyap_ids_ = ids;
    lyap_mon_.assign(stack.size(), LyapunovMonitor{});
  }
  const Mat3 Mqa_inv = in.dyn.Mqa.llt().solve(Mat3::Identity());
  for (size_t i = 0; i < stack.size(); ++i) {
    const Task& t = stack[i];
    const TaskDyn td = task_space_inertia(t.J, Mqa_inv);
    const MatX KF = MatX(t.gains.KF.asDiagonal());
    const MatX DF = factorization_damping(td.Mi, KF, t.gains.Dxi);
    const VecX e = t.sigma_d - t.sigma;
    const VecX edot = t.sigma_dot_d - t.sigma_dot;
    const VecX F_ext = td.Jbar.transpose() * in.tau_ext;
    out.lyap.push_back(lyap_mon_[i].update(e, edot, td.Mi, KF, DF, F_ext, cfg_.dt));
  }
}

SupervisorOutput Supervisor::tick(const SupervisorInput& in) {
  SupervisorOutput out;
  out.tick = in.tick;
  out.t = in.t;

  if (!hold_set_) {
    x_hold_ = in.x;
    hold_set_ = true;
  }

  auto ck = cond_xqa(*m_, active_joints(in.dyn.q), in.x);
  out.sigma_kappa = ck.ok() ? *ck : std::numeric_limits<double>::quiet_NaN();
  out.sigma_clear = min_link_clearance(*m_, in.dyn.q).dist;

  if (in.reset && cur_.phase != Phase::kTracking) {
    Regime next;  // back to plain tracking, constraints disarmed
    out.note = "reset";
    switch_regime(next, in.t, in, out);
  }

  if (cur_.phase != Phase::kZeroG &&
      (in.F_hat.cwiseAbs().array() >= cfg_.eps_g.array()).any()) {
    enter_zero_g(in, out, "eps_g");
  } else if (cur_.phase == Phase::kTracking &&
             (in.F_hat.cwiseAbs().array() >= cfg_.eps_r.array()).any()) {
    detect_and_plan(in, out);
  } else if (cur_.phase == Phase::kReacting) {
    Regime next = cur_;
    if (arm_iec(next, in.t, out.sigma_kappa, out.sigma_clear))
      switch_regime(next, in.t, in, out);
    if (cur_.plan.family == ReactionFamily::kSecondLink && pf_.initialized()) {
      auto est = pf_.step(*m_, in.dyn.q, in.x, cur_.plan.event.body, in.tau_ext);
      if (est.ok()) {
        out.pf = *est;
        out.pf_valid = true;
      }
    }
    if (!cur_.settled) {
      // Once the retraction profile has run out and the observer has been
      // quiet for 50 ms, pin the pose. Without this the task nullspace keeps
      // its momentum (the bias feedforward cancels friction) and drifts into
      // the conditioning wall.
      const bool done = in.t - cur_.plan.t0 >= plan_duration(cur_.plan);
      const bool quiet = (in.F_hat.cwiseAbs().array() < cfg_.eps_r.array()).all();
      settle_run_ = (done && quiet) ? settle_run_ + 1 : 0;
      if (settle_run_ >= 50) {
        Regime s = cur_;
        s.settled = true;
        s.hold_x = in.x;
        if (!out.note.empty()) out.note += "; ";
        out.note += "settle";
        switch_regime(s, in.t, in, out);
      }
    }
  }

  Eval now = evaluate(cur_, in);
  if (now.failed && cur_.phase != Phase::kZeroG) {
    enter_zero_g(in, out, "law: " + now.err);
    now = evaluate(cur_, in);
  }

  out.phase = cur_.phase;
  out.mode = cur_.mode;
  out.family = cur_.plan.family;
  out.ok_kappa = !cur_.kappa_armed;
  out.ok_clear = !cur_.clear_armed;
  out.degraded = now.degraded;
  if (!now.err.empty()) {
    if (!out.note.empty()) out.note += "; ";
    out.note += now.err;
  }
  for (const auto& t : now.stack) out.task_ids.push_back(t.id);
  lyapunov(now.stack, in, out);

  out.tau_new = now.tau;
  out.tau_prev = now.tau;
  // Half-tick slack so accumulated time error cannot stretch the window by a
  // whole sample.
  if (blend_active_ && in.t - switch_t_ >= cfg_.blend_T - 0.5 * cfg_.dt) blend_active_ = false;
  if (blend_active_) {
    const Eval before = evaluate(prev_, in);
    out.tau_prev = before.tau;
    out.blending = true;
    out.blend_w = std::clamp((in.t - switch_t_) / cfg_.blend_T, 0.0, 1.0);
    out.tau = interpolate_modes(out.tau_prev, out.tau_new, in.t - switch_t_, cfg_.blend_T);
  } else {
    out.tau = now.tau;
  }
  return out;
}

}  // namespace cspr
