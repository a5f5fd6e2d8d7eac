#pragma once

#include "cspr/model.hpp"
#include "cspr/types.hpp"

namespace cspr {

double quantize(double value, double resolution);

// Measurement chain for the active joints: optional encoder quantization,
// backward-difference velocity, first-order low-pass. With ideal_velocity
// set on the model the true rates pass straight through.
class JointSensors {
 public:
  explicit JointSensors(const RobotModel& m) : m_(m) {}

  void reset(const Vec3& qa, const Vec3& qadot);

  struct Reading {
    Vec3 qa = Vec3::Zero();      // measured crank angles
    Vec3 qadot = Vec3::Zero();   // estimated crank rates
  };
  Reading sample(double dt, const Vec3& qa_true, const Vec3& qadot_true);

 private:
  RobotModel m_;
  Vec3 qa_prev_ = Vec3::Zero();
  Vec3 vel_f_ = Vec3::Zero();
  bool primed_ = false;
};

}  // namespace cspr
