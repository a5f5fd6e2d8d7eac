#include "cspr/runner.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include "cspr/log.hpp"
#include "cspr/mlp.hpp"
#include "cspr/observer.hpp"
#include "cspr/sensors.hpp"
#include "cspr/trajectory.hpp"

namespace cspr {

TrackingRef make_tracking_ref(const TrajectorySpec& traj) {
  switch (traj.kind) {
    case TrajectorySpec::Kind::kHold: {
      const Vec3 pose = traj.start;
      return [pose](double, Vec3& x_d, Vec3& xd_d, Vec3& xdd_d) {
        x_d = pose;
        xd_d.setZero();
        xdd_d.setZero();
      };
    }
    case TrajectorySpec::Kind::kLine: {
      LinePath path(traj.start, traj.target, traj.v_max, traj.a_max, traj.j_max);
      const double t0 = traj.t0;
      return [path, t0](double t, Vec3& x_d, Vec3& xd_d, Vec3& xdd_d) {
        VecX p(3), v(3), a(3);
        path.sample(t - t0, p, v, a);
        x_d = p;
        xd_d = v;
        xdd_d = a;
      };
    }
    case TrajectorySpec::Kind::kSquare: {
      SquarePath path(traj.start, traj.edge, traj.v_max, traj.a_max, traj.j_max,
                      traj.corner_dwell);
      const double t0 = traj.t0;
      return [path, t0](double t, Vec3& x_d, Vec3& xd_d, Vec3& xdd_d) {
        path.sample(t - t0, x_d, xd_d, xdd_d);
      };
    }
  }
  return {};
}

namespace {

Vec2 perp(const Vec2& u) { return Vec2(-u.y(), u.x()); }

// Trajectory start pose; the square path begins at its first corner.
Vec3 episode_start(const TrajectorySpec& traj) {
  Vec3 x0 = traj.start, v, a;
  if (auto ref = make_tracking_ref(traj)) ref(0.0, x0, v, a);
  return x0;
}

double body_surface_radius(const RobotModel& m, Body b) {
  return b == Body::kPlatform ? m.hull_radius : 0.5 * m.link_thickness;
}

}  // namespace

Expected<std::vector<ResolvedContact>> resolve_injections(const RobotModel& m,
                                                          const Scenario& sc) {
  std::vector<ResolvedContact> out;
  TrackingRef ref = make_tracking_ref(sc.traj);
  for (const auto& spec : sc.injections) {
    ResolvedContact rc;
    rc.spec = spec;
    if (spec.kind == InjectionSpec::Kind::kForce) {
      out.push_back(rc);
      continue;
    }
    Vec3 x_d, xd_d, xdd_d;
    ref(spec.t, x_d, xd_d, xdd_d);
    auto q = inverse_kinematics(m, x_d);
    if (!q.ok()) return q.err;

    ContactDisc disc;
    disc.radius = spec.radius;
    disc.stiffness = spec.stiffness > 0.0 ? spec.stiffness : m.contact_stiffness;
    disc.damping = spec.damping > 0.0 ? spec.damping : m.contact_damping;

    if (spec.kind == InjectionSpec::Kind::kPylon) {
      auto frame = contact_frame(m, *q, x_d, spec.body, spec.l_c);
      if (!frame.ok()) return frame.err;
      const Vec2 p = spec.body == Body::kPlatform ? Vec2(x_d.head<2>()) : frame->pos;
      Vec2 n = spec.direction;
      if (n.norm() < 1e-12) {
        n = frame->J_x * xd_d;  // nominal motion of the contact point
        if (n.norm() < 1e-6) return Err::kConfig;  // nothing to run into
      }
      if (spec.body != Body::kPlatform) {
        // Offsetting along the link axis would bury the disc inside the
        // capsule at another abscissa; only the perpendicular component
        // separates the disc from the whole segment.
        const int c = chain_of(spec.body);
        double theta = (*q)(idx_active(c));
        if (!first_link(spec.body)) theta += (*q)(idx_passive(c));
        const Vec2 axis = unit_dir(theta);
        n -= n.dot(axis) * axis;
        if (n.norm() < 1e-6) return Err::kConfig;  // approach parallel to the link
      }
      n.normalize();
      disc.center = p + n * (spec.radius + body_surface_radius(m, spec.body) + spec.standoff);
      disc.bodies = {spec.body};
    } else {  // clamp probe in the elbow wedge of the chain
      const int c = spec.chain;
      if (c < 0 || c >= kNumChains) return Err::kConfig;
      const double a1 = (*q)(idx_active(c));
      const double p12 = (*q)(idx_passive(c));
      const Vec2 u1 = unit_dir(a1);        // base -> elbow
      const Vec2 u2 = unit_dir(a1 + p12);  // elbow -> coupling
      const Vec2 pu2 = perp(u2);
      const double side = (-u1).dot(pu2);
      if (std::abs(side) < 1e-9) return Err::kConfig;  // chain stretched flat
      const Vec2 nw = (side > 0 ? 1.0 : -1.0) * pu2;
      const Vec2 p2 =
          elbow_point(m, *q, c) + std::clamp(spec.l_c, 0.0, 1.0) * m.l2 * u2;
      disc.center =
          p2 + nw * (spec.radius + 0.5 * m.link_thickness + spec.clearance);
      disc.bodies = {static_cast<Body>(2 * c), static_cast<Body>(2 * c + 1)};
    }
    rc.disc = disc;
    out.push_back(rc);
  }
  return out;
}

namespace {

// Ground-truth classifiers answering from the injection active at the time
// the runner last advanced to.
ClassifierHooks oracle_hooks(const Scenario& sc, std::shared_ptr<const double> now) {
  auto pick = [injections = sc.injections, now]() -> const InjectionSpec* {
    const InjectionSpec* best = nullptr;
    for (const auto& i : injections)
      if (i.t <= *now + 1e-12 && (!best || i.t > best->t)) best = &i;
    if (!best && !injections.empty()) best = &injections.front();
    return best;
  };
  ClassifierHooks h;
  h.type = [pick](const VecX&) -> Expected<ContactType> {
    const auto* i = pick();
    if (!i) return Err::kNoConvergence;
    return i->kind == InjectionSpec::Kind::kClamp ? ContactType::kClamping
                                                  : ContactType::kCollision;
  };
  h.chain = [pick](const VecX&) -> Expected<int> {
    const auto* i = pick();
    if (!i || i->kind != InjectionSpec::Kind::kClamp) return Err::kNoConvergence;
    return i->chain;
  };
  h.body = [pick](const VecX&) -> Expected<Body> {
    const auto* i = pick();
    if (!i || i->kind == InjectionSpec::Kind::kClamp) return Err::kNoConvergence;
    return i->body;
  };
  return h;
}

struct LoadedNets {
  std::unique_ptr<MLP> type, chain, body;
};

Expected<SimLog> run_impl(const Scenario& sc, ClassifierHooks hooks) {
  RobotModel plant_model = sc.model_file.empty() ? RobotModel{} : load_model(sc.model_file);
  plant_model.encoder_enabled = sc.encoder;
  plant_model.ideal_velocity = sc.ideal_velocity;
  RobotModel ctrl_model = plant_model.perturbed_inertia(sc.model_scale);

  auto now = std::make_shared<double>(0.0);
  LoadedNets nets;
  if (!hooks.type) {
    switch (sc.classifiers) {
      case ClassifierSource::kNone: break;
      case ClassifierSource::kOracle: hooks = oracle_hooks(sc, now); break;
      case ClassifierSource::kFiles: {
        auto tn = MLP::load(sc.cls_type_file);
        if (!tn.ok()) return tn.err;
        nets.type = std::make_unique<MLP>(std::move(*tn));
        if (!sc.cls_chain_file.empty()) {
          auto cn = MLP::load(sc.cls_chain_file);
          if (!cn.ok()) return cn.err;
          nets.chain = std::make_unique<MLP>(std::move(*cn));
        }
        if (!sc.cls_body_file.empty()) {
          auto bn = MLP::load(sc.cls_body_file);
          if (!bn.ok()) return bn.err;
          nets.body = std::make_unique<MLP>(std::move(*bn));
        }
        hooks = mlp_classifier_hooks(nets.type.get(), nets.chain.get(), nets.body.get());
        break;
      }
    }
  }

  auto contacts = resolve_injections(plant_model, sc);
  if (!contacts.ok()) return contacts.err;

  TrackingRef ref = make_tracking_ref(sc.traj);
  const Vec3 x0 = episode_start(sc.traj);

  Plant plant(plant_model, sc.dt_sub);
  if (Err e = plant.reset(x0); e != Err::kOk) return e;

  SupervisorConfig cfg;
  cfg.level = sc.level;
  cfg.dt = sc.dt;
  cfg.eps_r = sc.eps_r;
  cfg.eps_g = sc.eps_g;
  cfg.d_react = sc.d_react;
  cfg.q_react = sc.q_react;
  cfg.tau_max = plant_model.tau_max;
  cfg.iec_enabled = sc.iec_enabled;
  cfg.kappa = sc.kappa;
  cfg.clearance = sc.clearance;
  cfg.pf.seed = sc.seed;

  Supervisor sup(ctrl_model, cfg, hooks, ref);
  MomentumObserver obs(sc.observer_gain);
  JointSensors sensors(plant_model);
  sensors.reset(plant.state().qa, plant.state().qadot);

  SimLog log;
  log.scenario = sc.name;
  log.dt = sc.dt;
  const int n_ticks = static_cast<int>(std::lround(sc.duration / sc.dt));
  log.ticks.reserve(n_ticks);

  Vec3 tau_prev = Vec3::Zero();
  Vec3 x_meas = x0;
  std::string last_note;

  for (int k = 0; k < n_ticks; ++k) {
    const double t = k * sc.dt;
    *now = t;

    // --- sensing ------------------------------------------------------------
    const PlantState& ps = plant.state();
    const auto reading = sensors.sample(sc.dt, ps.qa, ps.qadot);
    Vec3 qp(ps.q(1), ps.q(4), ps.q(7));
    if (plant_model.encoder_enabled)
      for (int i = 0; i < 3; ++i) qp(i) = quantize(qp(i), plant_model.encoder_res_passive);
    auto xm = forward_kinematics(ctrl_model, reading.qa, qp, x_meas);
    if (!xm.ok()) {
      log.abort = AbortReason::kSolver;
      log.abort_tick = k;
      log.notes.emplace_back(k, "pose estimate diverged");
      break;
    }
    x_meas = *xm;
    auto Jm = jacobian_xqa(ctrl_model, reading.qa, x_meas);
    if (!Jm.ok()) {
      log.abort = AbortReason::kSolver;
      log.abort_tick = k;
      log.notes.emplace_back(k, "measured jacobian singular");
      break;
    }
    const Vec3 xdot_m = (*Jm) * reading.qadot;
    auto dyn = dynamics_terms(ctrl_model, x_meas, xdot_m);
    if (!dyn.ok()) {
      log.abort = AbortReason::kSolver;
      log.abort_tick = k;
      log.notes.emplace_back(k, "dynamics evaluation failed");
      break;
    }

    // --- observer -----------------------------------------------------------
    if (k == 0) obs.reset(dyn->Mx, xdot_m);
    const Vec3 F_a = dyn->Jxqa.transpose().partialPivLu().solve(tau_prev);
    const Wrench F_hat = obs.update(sc.dt, *dyn, xdot_m, F_a);
    const Vec3 tau_ext_hat = obs.joint_estimate(dyn->Jxqa);

    // --- supervisor ---------------------------------------------------------
    SupervisorInput si;
    si.tick = k;
    si.t = t;
    si.dyn = *dyn;
    si.x = x_meas;
    si.xdot = xdot_m;
    si.F_hat = F_hat;
    si.tau_ext = tau_ext_hat;
    const SupervisorOutput out = sup.tick(si);
    tau_prev = out.tau;
    if (!out.note.empty() && out.note != last_note) log.notes.emplace_back(k, out.note);
    last_note = out.note;

    // --- plant --------------------------------------------------------------
    std::vector<ContactDisc> discs;
    std::vector<AppliedForce> forces;
    for (const auto& rc : *contacts) {
      if (t + 1e-12 < rc.spec.t) continue;
      if (rc.spec.kind == InjectionSpec::Kind::kForce) {
        const double since = t - rc.spec.t;
        if (since > rc.spec.duration) continue;
        const double env =
            rc.spec.rise > 0.0 ? std::clamp(since / rc.spec.rise, 0.0, 1.0) : 1.0;
        AppliedForce af;
        af.body = rc.spec.body;
        af.l_c = rc.spec.l_c;
        af.lever = rc.spec.lever;
        Vec2 f = rc.spec.f;
        if (rc.spec.link_frame && rc.spec.body != Body::kPlatform) {
          const int c = chain_of(rc.spec.body);
          double theta = ps.q(idx_active(c));
          if (!first_link(rc.spec.body)) theta += ps.q(idx_passive(c));
          f = f.x() * unit_dir(theta) + f.y() * unit_dir_perp(theta);
        } else if (rc.spec.link_frame) {
          f = rot2(ps.x(2)) * f;
        }
        af.f_world = env * f;
        forces.push_back(af);
      } else {
        discs.push_back(rc.disc);
      }
    }
    const Err pe = plant.step(out.tau, sc.dt, discs, forces);

    // --- record -------------------------------------------------------------
    TickRecord r;
    r.tick = k;
    r.t = t;
    r.x = x_meas;
    r.xdot = xdot_m;
    Vec3 v_d, a_d;
    ref(t, r.x_d, v_d, a_d);
    r.qa = reading.qa;
    r.tau = out.tau;
    r.F_hat = F_hat;
    r.tau_ext_hat = tau_ext_hat;
    r.phase = static_cast<int>(out.phase);
    r.mode = out.mode;
    r.family = static_cast<int>(out.family);
    r.detected = out.detected_now;
    r.blending = out.blending;
    r.blend_w = out.blend_w;
    r.sigma_kappa = out.sigma_kappa;
    r.sigma_clear = out.sigma_clear;
    r.ok_kappa = out.ok_kappa;
    r.ok_clear = out.ok_clear;
    const StepOutcome& so = plant.last();
    r.f_true = so.f_peak;
    r.F_true_mP = so.F_ext_mP;
    r.drift = so.drift;
    if (!so.contacts.empty()) {
      const auto it = std::max_element(
          so.contacts.begin(), so.contacts.end(),
          [](const ContactForce& a, const ContactForce& b) {
            return a.f_world.squaredNorm() < b.f_world.squaredNorm();
          });
      r.contact_body = static_cast<int>(it->body);
      r.contact_l = it->l_c;
    }
    r.pf_valid = out.pf_valid;
    if (out.pf_valid) {
      r.pf_l = out.pf.l_c;
      r.pf_f = out.pf.f_world;
    }
    r.n_tasks = static_cast<int>(out.lyap.size());
    for (int i = 0; i < std::min<int>(3, r.n_tasks); ++i) {
      r.V[i] = out.lyap[static_cast<size_t>(i)].V;
      r.Vdot[i] = out.lyap[static_cast<size_t>(i)].Vdot;
    }
    log.ticks.push_back(r);

    if (pe != Err::kOk) {
      log.abort = plant.abort_reason();
      log.abort_tick = k;
      log.notes.emplace_back(k, std::string("plant abort: ") + abort_name(log.abort));
      break;
    }
  }
  return log;
}

}  // namespace

Expected<SimLog> run_episode(const Scenario& sc) { return run_impl(sc, {}); }

Expected<SimLog> run_episode(const Scenario& sc, ClassifierHooks hooks) {
  return run_impl(sc, std::move(hooks));
}

std::vector<std::string> simlog_header() {
  return {"tick",
          "t [s]",
          "x_t1 [m]",
          "x_t2 [m]",
          "x_r [rad]",
          "xdot_t1 [m/s]",
          "xdot_t2 [m/s]",
          "xdot_r [rad/s]",
          "xd_t1 [m]",
          "xd_t2 [m]",
          "xd_r [rad]",
          "qa1 [rad]",
          "qa2 [rad]",
          "qa3 [rad]",
          "tau1 [N m]",
          "tau2 [N m]",
          "tau3 [N m]",
          "Fhat_x [N]",
          "Fhat_y [N]",
          "Mhat_z [N m]",
          "tauext1 [N m]",
          "tauext2 [N m]",
          "tauext3 [N m]",
          "phase",
          "mode",
          "family",
          "detected",
          "blending",
          "blend_w",
          "sigma_kappa",
          "sigma_clear [m]",
          "ok_kappa",
          "ok_clear",
          "f_true [N]",
          "contact_body",
          "contact_l",
          "Ftrue_x [N]",
          "Ftrue_y [N]",
          "Mtrue_z [N m]",
          "drift",
          "pf_valid",
          "pf_l",
          "pf_fx [N]",
          "pf_fy [N]",
          "n_tasks",
          "V1 [J]",
          "Vdot1 [W]",
          "V2 [J]",
          "Vdot2 [W]",
          "V3 [J]",
          "Vdot3 [W]"};
}

void SimLog::write_csv(const std::string& path) const {
  std::vector<std::vector<double>> rows;
  rows.reserve(ticks.size());
  for (const auto& r : ticks) {
    rows.push_back({static_cast<double>(r.tick),
                    r.t,
                    r.x(0),
                    r.x(1),
                    r.x(2),
                    r.xdot(0),
                    r.xdot(1),
                    r.xdot(2),
                    r.x_d(0),
                    r.x_d(1),
                    r.x_d(2),
                    r.qa(0),
                    r.qa(1),
                    r.qa(2),
                    r.tau(0),
                    r.tau(1),
                    r.tau(2),
                    r.F_hat(0),
                    r.F_hat(1),
                    r.F_hat(2),
                    r.tau_ext_hat(0),
                    r.tau_ext_hat(1),
                    r.tau_ext_hat(2),
                    static_cast<double>(r.phase),
                    static_cast<double>(r.mode),
                    static_cast<double>(r.family),
                    static_cast<double>(r.detected),
                    static_cast<double>(r.blending),
                    r.blend_w,
                    r.sigma_kappa,
                    r.sigma_clear,
                    static_cast<double>(r.ok_kappa),
                    static_cast<double>(r.ok_clear),
                    r.f_true,
                    static_cast<double>(r.contact_body),
                    r.contact_l,
                    r.F_true_mP(0),
                    r.F_true_mP(1),
                    r.F_true_mP(2),
                    r.drift,
                    static_cast<double>(r.pf_valid),
                    r.pf_l,
                    r.pf_f(0),
                    r.pf_f(1),
                    static_cast<double>(r.n_tasks),
                    r.V[0],
                    r.Vdot[0],
                    r.V[1],
                    r.Vdot[1],
                    r.V[2],
                    r.Vdot[2]});
  }
  cspr::write_csv(path, simlog_header(), rows);
}

}  // namespace cspr
