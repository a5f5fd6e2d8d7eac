#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "cspr/dynamics.hpp"
#include "cspr/mlp.hpp"
#include "cspr/supervisor.hpp"

using namespace cspr;

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct World {
  RobotModel m;
  Vec3 x;
  Vec9 q;
  DynTerms dyn;
};

World make_world(const Vec3& x = Vec3(0.02, -0.03, 0.1)) {
  World w;
  w.x = x;
  auto q = inverse_kinematics(w.m, x);
  REQUIRE(q.ok());
  w.q = *q;
  auto dyn = dynamics_terms(w.m, x, Vec3::Zero());
  REQUIRE(dyn.ok());
  w.dyn = *dyn;
  return w;
}

SupervisorInput make_input(const World& w, int tick, const Wrench& F = Wrench::Zero()) {
  SupervisorInput in;
  in.tick = tick;
  in.t = tick * 1e-3;
  in.dyn = w.dyn;
  in.x = w.x;
  in.xdot = Vec3::Zero();
  in.F_hat = F;
  in.tau_ext = w.dyn.Jxqa.transpose() * F;
  return in;
}

ClassifierHooks oracle_hooks(ContactType type, Body body = Body::kPlatform, int chain = -1) {
  ClassifierHooks h;
  h.type = [type](const VecX&) -> Expected<ContactType> { return type; };
  h.body = [body](const VecX&) -> Expected<Body> { return body; };
  h.chain = [chain](const VecX&) -> Expected<int> { return chain; };
  return h;
}

// IEC supervision disabled via unbounded windows.
SupervisorConfig open_config() {
  SupervisorConfig cfg;
  cfg.kappa = SetBounds{};
  cfg.clearance = SetBounds{};
  return cfg;
}

double inf_norm(const Vec3& v) { return v.cwiseAbs().maxCoeff(); }

}  // namespace

TEST_CASE("set bounds and status checks") {
  SetBounds upper;  // condition-number style: only upper bounds
  upper.hi_a = 40.0;
  upper.hi_s = 55.0;
  CHECK(upper.valid());
  CHECK(check_status(30.0, upper));
  CHECK_FALSE(check_status(40.0, upper));  // boundary hit counts as violation
  CHECK_FALSE(check_status(41.0, upper));

  SetBounds lower;  // clearance style: only lower bounds
  lower.lo_s = 0.06;
  lower.lo_a = 0.08;
  CHECK(lower.valid());
  CHECK(check_status(0.1, lower));
  CHECK_FALSE(check_status(0.08, lower));
  CHECK_FALSE(check_status(0.05, lower));

  SetBounds open;  // both sides absent -> always true
  CHECK(open.valid());
  CHECK(check_status(-1e9, open));
  CHECK(check_status(0.0, open));
  CHECK(check_status(1e9, open));

  SetBounds bad = upper;
  bad.hi_a = 60.0;  // activation outside safety
  CHECK_FALSE(bad.valid());
}

TEST_CASE("mode selection map") {
  CHECK(select_mode(true, true) == 1);
  CHECK(select_mode(false, true) == 2);
  CHECK(select_mode(true, false) == 3);
  CHECK(select_mode(false, false) == 4);
}

TEST_CASE("mode interpolation endpoints and ramp") {
  const Vec3 a(4.0, -2.0, 1.0), b(-6.0, 8.0, 3.0);
  CHECK((interpolate_modes(a, b, 0.0, 0.01) - a).norm() == 0.0);
  CHECK((interpolate_modes(a, b, -1e-9, 0.01) - a).norm() == 0.0);
  CHECK((interpolate_modes(a, b, 0.01, 0.01) - b).norm() == 0.0);
  CHECK((interpolate_modes(a, b, 0.02, 0.01) - b).norm() == 0.0);
  const Vec3 mid = interpolate_modes(a, b, 0.005, 0.01);
  CHECK((mid - 0.5 * (a + b)).norm() < 1e-12);

  // Sampled at 1 kHz over the 10 ms window, the per-tick jump never exceeds
  // one tenth of the law gap.
  Vec3 last = interpolate_modes(a, b, 0.0, 0.01);
  double max_jump = 0.0;
  for (int k = 1; k <= 12; ++k) {
    const Vec3 cur = interpolate_modes(a, b, k * 1e-3, 0.01);
    max_jump = std::max(max_jump, inf_norm(cur - last));
    last = cur;
  }
  CHECK(max_jump <= inf_norm(b - a) / 10.0 + 1e-12);
}

TEST_CASE("reaction plans per contact class") {
  World w = make_world();
  SupervisorConfig cfg = open_config();

  SUBCASE("platform retraction along the line of action") {
    const Wrench F(30.0, 0.0, 0.0);
    SupervisorInput in = make_input(w, 0, F);
    ContactEvent ev;
    ev.type = ContactType::kCollision;
    ev.body = Body::kPlatform;
    ev.F_hat = F;
    ev.tau_ext = in.tau_ext;
    auto iso = isolation_features(w.m, w.q, w.x, F, in.tau_ext, cfg.eps_tau);
    REQUIRE(iso.ok());
    ev.iso = *iso;

    auto plan = build_reaction(w.m, cfg, ev, in);
    REQUIRE(plan.ok());
    CHECK(plan->family == ReactionFamily::kPlatform);
    CHECK((plan->n_hat - Vec2(1.0, 0.0)).norm() < 1e-12);
    VecX p(2), v(2), a(2);
    plan->path.sample(plan->path.duration() + 1.0, p, v, a);
    const Vec2 goal = w.x.head<2>() + Vec2(cfg.d_react, 0.0);
    CHECK((Vec2(p) - goal).norm() < 1e-12);
    CHECK(v.norm() == 0.0);
  }

  SUBCASE("first link backs the crank out along its external torque") {
    SupervisorInput in = make_input(w, 0);
    in.tau_ext = Vec3(0.0, 2.0, 0.0);  // chain index 1 pushed positive
    ContactEvent ev;
    ev.type = ContactType::kCollision;
    ev.body = Body::kC2L1;
    ev.tau_ext = in.tau_ext;
    auto plan = build_reaction(w.m, cfg, ev, in);
    REQUIRE(plan.ok());
    CHECK(plan->family == ReactionFamily::kFirstLink);
    CHECK(plan->joint_chain == 1);
    CHECK(plan->sign_a == 1.0);
    CHECK(plan->qa0 == w.q[idx_active(1)]);
    CHECK(plan->qa_traj.displacement() == doctest::Approx(cfg.q_react));

    in.tau_ext[1] = -2.0;
    ev.tau_ext = in.tau_ext;
    auto neg = build_reaction(w.m, cfg, ev, in);
    REQUIRE(neg.ok());
    CHECK(neg->sign_a == -1.0);
    CHECK(neg->qa_traj.displacement() == doctest::Approx(-cfg.q_react));
  }

  SUBCASE("second link retracts the estimated contact point") {
    SupervisorInput in = make_input(w, 0);
    ContactEvent ev;
    ev.type = ContactType::kCollision;
    ev.body = Body::kC2L2;
    ev.pf_valid = true;
    ev.pf.l_c = 0.4;
    ev.pf.f_world = Vec2(0.0, 20.0);
    auto plan = build_reaction(w.m, cfg, ev, in);
    REQUIRE(plan.ok());
    CHECK(plan->family == ReactionFamily::kSecondLink);
    CHECK(plan->l_hat == 0.4);
    CHECK((plan->n_hat - Vec2(0.0, 1.0)).norm() < 1e-12);
    auto frame = contact_frame(w.m, w.q, w.x, Body::kC2L2, 0.4);
    REQUIRE(frame.ok());
    CHECK((plan->p0 - frame->pos).norm() < 1e-12);

    ev.pf_valid = false;  // no estimate -> no plan
    CHECK_FALSE(build_reaction(w.m, cfg, ev, in).ok());
  }

  SUBCASE("clamping opens the gap with both joint tasks") {
    const Wrench F(12.0, -8.0, 0.5);
    SupervisorInput in = make_input(w, 0, F);
    ContactEvent ev;
    ev.type = ContactType::kClamping;
    ev.chain = 2;
    ev.F_hat = F;
    ev.tau_ext = in.tau_ext;
    auto plan = build_reaction(w.m, cfg, ev, in);
    REQUIRE(plan.ok());
    CHECK(plan->family == ReactionFamily::kClamp);
    CHECK(plan->joint_chain == 2);
    CHECK(plan->qa0 == w.q[idx_active(2)]);
    CHECK(plan->qp0 == w.q[idx_passive(2)]);
    CHECK(plan->sign_a == (in.tau_ext[2] < 0 ? -1.0 : 1.0));
    // Passive direction follows the yield of the estimated wrench.
    const Mat3 G = w.dyn.Jqx.transpose() * w.dyn.Jqx;
    const Vec9 tau_q = w.dyn.Jqx * G.ldlt().solve(F);
    CHECK(plan->sign_p == (tau_q[idx_passive(2)] < 0 ? -1.0 : 1.0));
    CHECK(plan->qa_traj.displacement() == doctest::Approx(plan->sign_a * cfg.q_react));
    CHECK(plan->qp_traj.displacement() == doctest::Approx(plan->sign_p * cfg.q_react));

    ev.chain = -1;  // unknown chain -> no plan
    CHECK_FALSE(build_reaction(w.m, cfg, ev, in).ok());
  }
}

TEST_CASE("tracking only while contact free") {
  World w = make_world();
  SupervisorConfig cfg = open_config();
  // Bounds that would trip immediately if the constraints were checked.
  cfg.clearance.lo_s = 0.5;
  cfg.clearance.lo_a = 1.0;

  Supervisor sup(w.m, cfg, oracle_hooks(ContactType::kCollision));
  std::vector<Vec3> taus;
  for (int k = 0; k < 20; ++k) {
    auto out = sup.tick(make_input(w, k));
    CHECK(out.phase == Phase::kTracking);
    CHECK(out.mode == 1);
    CHECK(out.ok_clear);
    CHECK(out.family == ReactionFamily::kNone);
    REQUIRE(out.task_ids.size() == 2);
    CHECK(out.task_ids[0] == "track_xt");
    CHECK(out.task_ids[1] == "track_xr");
    CHECK(out.tau.allFinite());
    taus.push_back(out.tau);
  }
  CHECK(sup.plan() == nullptr);

  // Same trace -> bit-identical torques.
  Supervisor sup2(w.m, cfg, oracle_hooks(ContactType::kCollision));
  for (int k = 0; k < 20; ++k) {
    auto out = sup2.tick(make_input(w, k));
    CHECK(out.tau == taus[static_cast<size_t>(k)]);
  }
}

TEST_CASE("detection plans in the same tick and blends from the old law") {
  World w = make_world();
  Supervisor sup(w.m, open_config(), oracle_hooks(ContactType::kCollision, Body::kPlatform));

  Vec3 tau_before = Vec3::Zero();
  for (int k = 0; k < 5; ++k) tau_before = sup.tick(make_input(w, k)).tau;

  const Wrench F(20.0, 0.0, 0.0);
  auto hit = sup.tick(make_input(w, 5, F));
  CHECK(hit.detected_now);
  CHECK(hit.phase == Phase::kReacting);
  CHECK(hit.family == ReactionFamily::kPlatform);
  CHECK(hit.ctype == ContactType::kCollision);
  REQUIRE(sup.plan() != nullptr);
  CHECK(sup.plan()->t0 == doctest::Approx(5e-3));
  // Blend starts at the outgoing law: the commanded torque is still the
  // tracking torque on the detection tick.
  CHECK(hit.blending);
  CHECK(hit.blend_w == 0.0);
  CHECK(hit.tau == hit.tau_prev);
  CHECK((hit.tau - tau_before).norm() < 1e-9);
  REQUIRE(!hit.task_ids.empty());
  CHECK(hit.task_ids[0] == "react_platform");

  // Weight ramps linearly and the blend closes after 10 ms.
  auto mid = sup.tick(make_input(w, 10, F));
  CHECK(mid.blending);
  CHECK(mid.blend_w == doctest::Approx(0.5));
  auto done = sup.tick(make_input(w, 15, F));
  CHECK_FALSE(done.blending);
  CHECK(done.tau == done.tau_new);
}

TEST_CASE("iec latching and stack composition per mode") {
  World wa = make_world();
  World wb = make_world(Vec3(0.06, 0.01, -0.15));

  auto kap_a = cond_xqa(wa.m, Vec3(wa.q[0], wa.q[3], wa.q[6]), wa.x);
  REQUIRE(kap_a.ok());
  const double sc_a = min_link_clearance(wa.m, wa.q).dist;
  const double sc_b = min_link_clearance(wb.m, wb.q).dist;
  REQUIRE(std::abs(sc_a - sc_b) > 1e-4);

  const Wrench F(20.0, 0.0, 0.0);

  SUBCASE("condition-number task joins in mode 2 and keeps the 2-D reaction") {
    SupervisorConfig cfg = open_config();
    cfg.kappa.hi_a = *kap_a - 1.0;  // already violated at detection
    cfg.kappa.hi_s = *kap_a + 5.0;
    Supervisor sup(wa.m, cfg, oracle_hooks(ContactType::kCollision, Body::kPlatform));
    sup.tick(make_input(wa, 0));
    auto out = sup.tick(make_input(wa, 1, F));
    CHECK(out.phase == Phase::kReacting);
    CHECK(out.mode == 2);
    CHECK_FALSE(out.ok_kappa);
    CHECK(out.ok_clear);
    REQUIRE(out.task_ids.size() == 2);
    CHECK(out.task_ids[0] == "iec_kappa");
    CHECK(out.task_ids[1] == "react_platform");
  }

  SUBCASE("mode 4 falls back to the one-dimensional reaction") {
    SupervisorConfig cfg = open_config();
    cfg.kappa.hi_a = *kap_a - 1.0;
    cfg.kappa.hi_s = *kap_a + 5.0;
    cfg.clearance.lo_a = sc_a + 0.01;
    cfg.clearance.lo_s = sc_a - 0.01;
    Supervisor sup(wa.m, cfg, oracle_hooks(ContactType::kCollision, Body::kPlatform));
    sup.tick(make_input(wa, 0));
    auto out = sup.tick(make_input(wa, 1, F));
    CHECK(out.mode == 4);
    REQUIRE(out.task_ids.size() == 3);
    CHECK(out.task_ids[0] == "iec_kappa");
    CHECK(out.task_ids[1] == "iec_clear");
    CHECK(out.task_ids[2] == "react_platform_1d");
  }

  SUBCASE("clamping keeps both joint tasks until constraints need the freedom") {
    SupervisorConfig cfg = open_config();
    Supervisor sup(wa.m, cfg, oracle_hooks(ContactType::kClamping, Body::kPlatform, 2));
    sup.tick(make_input(wa, 0));
    auto out = sup.tick(make_input(wa, 1, F));
    CHECK(out.mode == 1);
    REQUIRE(out.task_ids.size() == 2);
    CHECK(out.task_ids[0] == "react_clamp_qa");
    CHECK(out.task_ids[1] == "react_clamp_qp");

    SupervisorConfig tight = open_config();
    tight.kappa.hi_a = *kap_a - 1.0;
    tight.kappa.hi_s = *kap_a + 5.0;
    tight.clearance.lo_a = sc_a + 0.01;
    tight.clearance.lo_s = sc_a - 0.01;
    Supervisor sup4(wa.m, tight, oracle_hooks(ContactType::kClamping, Body::kPlatform, 2));
    sup4.tick(make_input(wa, 0));
    auto out4 = sup4.tick(make_input(wa, 1, F));
    CHECK(out4.mode == 4);
    REQUIRE(out4.task_ids.size() == 3);
    CHECK(out4.task_ids[0] == "iec_kappa");
    CHECK(out4.task_ids[1] == "iec_clear");
    CHECK(out4.task_ids[2] == "react_clamp_qa");
  }

  SUBCASE("a violated constraint stays latched after the measure recovers") {
    const double lo = std::min(sc_a, sc_b);
    const double hi = std::max(sc_a, sc_b);
    SupervisorConfig cfg = open_config();
    cfg.clearance.lo_a = 0.5 * (lo + hi);  // violated at the tighter pose only
    cfg.clearance.lo_s = lo - 0.01;
    World* tight = sc_a < sc_b ? &wa : &wb;
    World* loose = sc_a < sc_b ? &wb : &wa;

    Supervisor sup(tight->m, cfg, oracle_hooks(ContactType::kCollision, Body::kPlatform));
    sup.tick(make_input(*tight, 0));
    auto armed = sup.tick(make_input(*tight, 1, F));
    CHECK(armed.mode == 3);
    CHECK_FALSE(armed.ok_clear);

    auto recovered = sup.tick(make_input(*loose, 2, F));
    CHECK(check_status(recovered.sigma_clear, cfg.clearance));  // measure is back inside
    CHECK(recovered.mode == 3);                                 // but the task stays
    CHECK_FALSE(recovered.ok_clear);
  }
}

TEST_CASE("gravity fallback is absorbing and reset clears it") {
  World w = make_world();
  Supervisor sup(w.m, open_config(), oracle_hooks(ContactType::kCollision, Body::kPlatform));
  for (int k = 0; k < 3; ++k) sup.tick(make_input(w, k));
  sup.tick(make_input(w, 3, Wrench(20.0, 0.0, 0.0)));  // normal reaction first
  CHECK(sup.phase() == Phase::kReacting);

  auto severe = sup.tick(make_input(w, 4, Wrench(200.0, 0.0, 0.0)));
  CHECK(severe.phase == Phase::kZeroG);
  CHECK(severe.family == ReactionFamily::kZeroG);
  CHECK(severe.note.find("eps_g") != std::string::npos);
  CHECK(severe.task_ids.empty());

  // Force vanishes, phase stays; torque settles to gravity compensation
  // once the transition window closes.
  const Vec3 g_comp = saturate_torque(w.dyn.gqa, sup.config().tau_max);
  for (int k = 5; k < 20; ++k) {
    auto out = sup.tick(make_input(w, k));
    CHECK(out.phase == Phase::kZeroG);
    if (k >= 15) CHECK((out.tau - g_comp).norm() < 1e-12);
  }

  SupervisorInput rst = make_input(w, 20);
  rst.reset = true;
  auto back = sup.tick(rst);
  CHECK(back.phase == Phase::kTracking);
  CHECK(back.note.find("reset") != std::string::npos);
  auto after = sup.tick(make_input(w, 35));
  CHECK(after.task_ids.size() == 2);
}

TEST_CASE("classifier errors degrade to the gravity fallback") {
  World w = make_world();
  const Wrench F(20.0, 0.0, 0.0);

  SUBCASE("no classifiers installed") {
    Supervisor sup(w.m, open_config());
    auto out = sup.tick(make_input(w, 0, F));
    CHECK(out.phase == Phase::kZeroG);
    CHECK(out.note.find("type classifier") != std::string::npos);
  }

  SUBCASE("low-confidence network prediction is rejected") {
    MLP type_net(3, {4}, 2, 7);
    // Zero-initialized biases plus a squashed input push both class
    // probabilities to exactly one half, below any sane threshold.
    type_net.scaler().stdev = VecX::Constant(3, 1e9);
    auto hooks = mlp_classifier_hooks(&type_net, nullptr, nullptr, 0.9);
    Supervisor sup(w.m, open_config(), hooks);
    auto out = sup.tick(make_input(w, 0, F));
    CHECK(out.phase == Phase::kZeroG);
    CHECK(out.note.find("type classifier") != std::string::npos);
  }

  SUBCASE("hook error on the body stage") {
    ClassifierHooks h = oracle_hooks(ContactType::kCollision);
    h.body = [](const VecX&) -> Expected<Body> { return Err::kNoConvergence; };
    Supervisor sup(w.m, open_config(), h);
    auto out = sup.tick(make_input(w, 0, F));
    CHECK(out.phase == Phase::kZeroG);
    CHECK(out.note.find("body classifier") != std::string::npos);
  }
}

TEST_CASE("second link reaction uses the filter's first estimate") {
  World w = make_world();
  const Body body = Body::kC2L2;
  const double l_true = 0.45;
  auto frame = contact_frame(w.m, w.q, w.x, body, l_true);
  REQUIRE(frame.ok());
  const double theta = w.q[idx_active(1)] + w.q[idx_passive(1)];
  const Vec2 f_world = 25.0 * unit_dir_perp(theta);  // pure normal force on the link
  const ProjectedWrench pw = project_wrench(*frame, f_world);

  SupervisorInput in = make_input(w, 0);
  in.F_hat = pw.F_ext_mP;
  in.tau_ext = pw.tau_a_ext;
  REQUIRE((in.F_hat.cwiseAbs().array() >= Vec3(10.0, 10.0, 1.0).array()).any());

  Supervisor sup(w.m, open_config(), oracle_hooks(ContactType::kCollision, body));
  auto out = sup.tick(in);
  CHECK(out.detected_now);
  CHECK(out.family == ReactionFamily::kSecondLink);
  REQUIRE(out.pf_valid);
  REQUIRE(sup.plan() != nullptr);
  const ReactionPlan& plan = *sup.plan();
  CHECK(plan.l_hat >= 0.0);
  CHECK(plan.l_hat <= 1.0);
  CHECK(std::abs(plan.l_hat - l_true) < 0.15);
  CHECK(plan.n_hat.dot(f_world.normalized()) > 0.7);

  // The filter keeps running for identification while the plan stays frozen.
  SupervisorInput in2 = in;
  in2.tick = 1;
  in2.t = 1e-3;
  auto next = sup.tick(in2);
  CHECK(next.pf_valid);
  CHECK(sup.plan()->l_hat == plan.l_hat);
}

TEST_CASE("torque stays continuous across a forced switch") {
  World w = make_world();
  Supervisor sup(w.m, open_config(), oracle_hooks(ContactType::kCollision, Body::kPlatform));

  std::vector<SupervisorOutput> log;
  for (int k = 0; k < 30; ++k) {
    const Wrench F = k >= 10 ? Wrench(20.0, 0.0, 0.0) : Wrench::Zero();
    log.push_back(sup.tick(make_input(w, k, F)));
  }
  REQUIRE(log[10].detected_now);

  double max_gap = 0.0;
  for (int k = 10; k <= 20; ++k) max_gap = std::max(max_gap, inf_norm(log[k].tau_new - log[k].tau_prev));
  for (int k = 11; k <= 20; ++k) {
    const double jump = inf_norm(log[k].tau - log[k - 1].tau);
    const double drift = inf_norm(log[k].tau_new - log[k - 1].tau_new) +
                         inf_norm(log[k].tau_prev - log[k - 1].tau_prev);
    CHECK(jump <= max_gap / 10.0 + drift + 1e-9);
  }
  CHECK(log[20].blending == false);
  CHECK(log[20].tau == log[20].tau_new);

  // Torque-level stack ships Lyapunov samples; a quiescent regulation tick
  // cannot gain energy.
  REQUIRE(!log[5].lyap.empty());
  for (const auto& s : log[5].lyap) CHECK(s.Vdot <= 1e-6);
}
