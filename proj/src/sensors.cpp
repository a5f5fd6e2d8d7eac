#include "cspr/sensors.hpp"

#include <cmath>

namespace cspr {

double quantize(double value, double resolution) {
  if (resolution <= 0) return value;
  return resolution * std::round(value / resolution);
}

void JointSensors::reset(const Vec3& qa, const Vec3& qadot) {
  qa_prev_ = qa;
  vel_f_ = qadot;
  primed_ = true;
  if (m_.encoder_enabled)
    for (int i = 0; i < 3; ++i) qa_prev_(i) = quantize(qa(i), m_.encoder_res_active);
}

JointSensors::Reading JointSensors::sample(double dt, const Vec3& qa_true,
                                           const Vec3& qadot_true) {
  Reading r;
  r.qa = qa_true;
  if (m_.encoder_enabled)
    for (int i = 0; i < 3; ++i) r.qa(i) = quantize(qa_true(i), m_.encoder_res_active);

  if (m_.ideal_velocity) {
    r.qadot = qadot_true;
    qa_prev_ = r.qa;
    vel_f_ = qadot_true;
    primed_ = true;
    return r;
  }
  if (!primed_) reset(qa_true, qadot_true);
  Vec3 v_raw = (r.qa - qa_prev_) / dt;
  qa_prev_ = r.qa;
  // first-order low-pass at velocity_lp_hz
  double alpha = dt / (dt + 1.0 / (2.0 * M_PI * m_.velocity_lp_hz));
  vel_f_ += alpha * (v_raw - vel_f_);
  r.qadot = vel_f_;
  return r;
}

}  // namespace cspr
