#include "cspr/observer.hpp"

namespace cspr {

void MomentumObserver::reset(const Mat3& Mx, const Vec3& xdot) {
  p0_ = Mx * xdot;
  integral_.setZero();
  phi_prev_.setZero();
  Fhat_.setZero();
  primed_ = false;
}

const Wrench& MomentumObserver::update(double dt, const DynTerms& d, const Vec3& xdot,
                                       const Vec3& F_a) {
  const Vec3 p = d.Mx * xdot;
  const Vec3 beta = d.gx + d.Ffr_x - d.Cx.transpose() * xdot;
  const Vec3 phi_known = F_a - beta;  // integrand minus the estimate itself

  if (!primed_) {
    phi_prev_ = phi_known + Fhat_;
    primed_ = true;
  }
  // trapezoid: I_k = I_{k-1} + dt/2 (phi_{k-1} + phi_known_k + Fhat_k),
  // solved for Fhat_k per axis.
  for (int i = 0; i < 3; ++i) {
    double rhs = ko_(i) * (p(i) - p0_(i) - integral_(i) -
                           0.5 * dt * (phi_prev_(i) + phi_known(i)));
    Fhat_(i) = rhs / (1.0 + 0.5 * dt * ko_(i));
  }
  const Vec3 phi = phi_known + Fhat_;
  integral_ += 0.5 * dt * (phi_prev_ + phi);
  phi_prev_ = phi;
  return Fhat_;
}

bool detect_contact(const Wrench& Fhat, const Vec3& eps) {
  for (int i = 0; i < 3; ++i)
    if (std::abs(Fhat(i)) >= eps(i)) return true;
  return false;
}

}  // namespace cspr
