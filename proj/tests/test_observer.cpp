#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "cspr/observer.hpp"
#include "oracles.hpp"

using namespace cspr;

namespace {

// Reference trajectory generator: integrates the platform-space equations of
// motion under given applied and external wrenches with RK4, then hands the
// sampled states to the observer. Keeps the observer test independent of the
// plant implementation.
struct Trace {
  std::vector<Vec3> x, xdot, F_a;
};

Trace simulate(const RobotModel& m, const Vec3& x0, const Vec3& xd0,
               const std::function<Vec3(double)>& F_a_of_t,
               const std::function<Vec3(double)>& F_ext_of_t, double T, double dt) {
  auto rhs = [&](double t, const Eigen::VectorXd& s) -> Eigen::VectorXd {
    Vec3 x = s.head<3>(), xd = s.tail<3>();
    auto d = dynamics_terms(m, x, xd);
    REQUIRE(d.ok());
    Eigen::VectorXd out(6);
    out.head<3>() = xd;
    out.tail<3>() =
        d->Mx.ldlt().solve(F_a_of_t(t) + F_ext_of_t(t) - d->cx - d->gx - d->Ffr_x);
    return out;
  };
  Trace tr;
  Eigen::VectorXd s(6);
  s << x0, xd0;
  int n = static_cast<int>(std::round(T / dt));
  for (int k = 0; k <= n; ++k) {
    double t = k * dt;
    tr.x.push_back(s.head<3>());
    tr.xdot.push_back(s.tail<3>());
    tr.F_a.push_back(F_a_of_t(t));
    if (k < n) s = oracles::rk4(rhs, s, t, t + dt, 20);
  }
  return tr;
}

}  // namespace

TEST_CASE("observer stays at zero without external force") {
  RobotModel m;
  m.fric_viscous = 0;
  m.fric_coulomb = 0;
  auto zero = [](double) { return Vec3::Zero().eval(); };
  Trace tr = simulate(m, Vec3::Zero(), Vec3::Zero(), zero, zero, 0.2, 1e-3);
  MomentumObserver obs;
  auto d0 = dynamics_terms(m, tr.x[0], tr.xdot[0]);
  REQUIRE(d0.ok());
  obs.reset(d0->Mx, tr.xdot[0]);
  for (size_t k = 1; k < tr.x.size(); ++k) {
    auto d = dynamics_terms(m, tr.x[k], tr.xdot[k]);
    REQUIRE(d.ok());
    Wrench f = obs.update(1e-3, *d, tr.xdot[k], tr.F_a[k]);
    CHECK(f.norm() < 1e-9);
  }
}

TEST_CASE("step response is first order with the configured time constant") {
  RobotModel m;
  m.fric_viscous = 0;
  m.fric_coulomb = 0;
  const Vec3 step(8.0, 0.0, 0.0);
  auto zero = [](double) { return Vec3::Zero().eval(); };
  auto fext = [&](double t) { return t >= 0 ? step : Vec3::Zero().eval(); };
  const double dt = 1e-3;
  Trace tr = simulate(m, Vec3::Zero(), Vec3::Zero(), zero, fext, 0.12, dt);

  MomentumObserver obs(Vec3::Constant(20.0));  // time constant 50 ms
  auto d0 = dynamics_terms(m, tr.x[0], tr.xdot[0]);
  REQUIRE(d0.ok());
  obs.reset(d0->Mx, tr.xdot[0]);
  std::vector<Wrench> fh;
  fh.push_back(Wrench::Zero());
  for (size_t k = 1; k < tr.x.size(); ++k) {
    auto d = dynamics_terms(m, tr.x[k], tr.xdot[k]);
    REQUIRE(d.ok());
    fh.push_back(obs.update(dt, *d, tr.xdot[k], tr.F_a[k]));
  }

  SUBCASE("63.2 percent rise at one time constant, within one tick") {
    double target = step(0) * (1.0 - std::exp(-1.0));
    // find first tick at/above the 63.2% level
    size_t k_rise = 0;
    for (size_t k = 0; k < fh.size(); ++k)
      if (fh[k](0) >= target) {
        k_rise = k;
        break;
      }
    CHECK(std::abs(static_cast<double>(k_rise) - 50.0) <= 1.0);
  }
  SUBCASE("whole trace matches the analytic first-order curve") {
    for (size_t k = 0; k < fh.size(); ++k) {
      double expect = step(0) * (1.0 - std::exp(-20.0 * k * dt));
      CHECK(fh[k](0) == doctest::Approx(expect).epsilon(0.01).scale(1.0));
    }
  }
  SUBCASE("axes stay decoupled") {
    for (const auto& f : fh) {
      CHECK(std::abs(f(1)) < 0.1);
      CHECK(std::abs(f(2)) < 0.02);
    }
  }
  SUBCASE("filtered derivative identity holds") {
    for (size_t k = 1; k < fh.size(); ++k) {
      double lhs = (fh[k](0) - fh[k - 1](0)) / dt / 20.0 + 0.5 * (fh[k](0) + fh[k - 1](0));
      CHECK(lhs == doctest::Approx(step(0)).epsilon(0.02));
    }
  }
}

TEST_CASE("moving start is unbiased thanks to the initial momentum") {
  RobotModel m;
  m.fric_viscous = 0;
  m.fric_coulomb = 0;
  auto zero = [](double) { return Vec3::Zero().eval(); };
  Trace tr = simulate(m, Vec3(0.02, 0.0, 0.0), Vec3(0.2, -0.1, 0.3), zero, zero, 0.1, 1e-3);
  MomentumObserver obs;
  auto d0 = dynamics_terms(m, tr.x[0], tr.xdot[0]);
  REQUIRE(d0.ok());
  obs.reset(d0->Mx, tr.xdot[0]);
  double worst = 0;
  for (size_t k = 1; k < tr.x.size(); ++k) {
    auto d = dynamics_terms(m, tr.x[k], tr.xdot[k]);
    REQUIRE(d.ok());
    worst = std::max(worst, obs.update(1e-3, *d, tr.xdot[k], tr.F_a[k]).norm());
  }
  CHECK(worst < 5e-6);
}

TEST_CASE("5 percent inertia error biases the estimate only transiently") {
  RobotModel m;
  m.fric_viscous = 0;
  m.fric_coulomb = 0;
  RobotModel m_est = m.perturbed_inertia(1.05);
  auto drive = [](double t) { return Vec3(6.0 * std::cos(4 * M_PI * t), 0.0, 0.0).eval(); };
  auto zero = [](double) { return Vec3::Zero().eval(); };
  Trace tr = simulate(m, Vec3::Zero(), Vec3::Zero(), drive, zero, 0.5, 1e-3);
  MomentumObserver obs;
  auto d0 = dynamics_terms(m_est, tr.x[0], tr.xdot[0]);
  REQUIRE(d0.ok());
  obs.reset(d0->Mx, tr.xdot[0]);
  double peak = 0;
  for (size_t k = 1; k < tr.x.size(); ++k) {
    auto d = dynamics_terms(m_est, tr.x[k], tr.xdot[k]);
    REQUIRE(d.ok());
    peak = std::max(peak, obs.update(1e-3, *d, tr.xdot[k], tr.F_a[k]).norm());
  }
  // bias scales with the inertia error: ~5% of the inertial wrench
  CHECK(peak > 0.01);
  CHECK(peak < 0.05 * 6.0 * 1.5 + 0.1);
}

TEST_CASE("detection threshold semantics") {
  Vec3 eps(10.0, 10.0, 1.0);
  CHECK(!detect_contact(Wrench(9.9, -9.9, 0.99), eps));
  CHECK(detect_contact(Wrench(10.0, 0, 0), eps));
  CHECK(detect_contact(Wrench(0, -10.1, 0), eps));
  CHECK(detect_contact(Wrench(0, 0, 1.5), eps));
}
