#pragma once

#include "cspr/dynamics.hpp"
#include "cspr/types.hpp"

namespace cspr {

// Generalized-momentum disturbance observer in platform coordinates.
// Produces a first-order-filtered estimate of the external platform wrench:
// per axis, Fhat tracks F_ext with time constant 1/gain.
class MomentumObserver {
 public:
  explicit MomentumObserver(const Vec3& gain = Vec3::Constant(20.0)) : ko_(gain) {}

  // Capture the initial generalized momentum so a moving start is unbiased.
  void reset(const Mat3& Mx, const Vec3& xdot);

  // d must be evaluated from the *controller's* model at the measured state;
  // F_a is the commanded platform wrench. Trapezoidal update, implicit in the
  // estimate itself.
  const Wrench& update(double dt, const DynTerms& d, const Vec3& xdot, const Vec3& F_a);

  const Wrench& estimate() const { return Fhat_; }

  // Equivalent external torque at the active joints.
  Vec3 joint_estimate(const Mat3& Jxqa) const { return Jxqa.transpose() * Fhat_; }

 private:
  Vec3 ko_;
  Vec3 integral_ = Vec3::Zero();
  Vec3 p0_ = Vec3::Zero();
  Vec3 phi_prev_ = Vec3::Zero();
  Wrench Fhat_ = Wrench::Zero();
  bool primed_ = false;
};

// Per-axis threshold test; strictly greater-or-equal on any axis trips it.
bool detect_contact(const Wrench& Fhat, const Vec3& eps);

}  // namespace cspr
