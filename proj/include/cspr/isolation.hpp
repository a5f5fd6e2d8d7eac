#pragma once

#include "cspr/kinematics.hpp"
#include "cspr/types.hpp"

namespace cspr {

inline constexpr double kZeroForceFloor = 1e-3;  // [N]

// Line of action of an estimated platform wrench: the unique line with
// direction f/|f| whose minimal-norm moment arm reproduces the moment.
struct LineOfAction {
  Vec2 lever = Vec2::Zero();   // perpendicular arm from the platform center
  Vec2 dir = Vec2::Zero();     // unit force direction
  double lambda1 = 0;          // hull intersections along dir, lambda1 <= lambda2
  double lambda2 = 0;
  bool intersects = false;
  Vec2 push_point = Vec2::Zero();  // hull point at lambda2
};

Expected<LineOfAction> line_of_action(const Wrench& Fhat, const Vec3& x,
                                      double hull_radius,
                                      double force_floor = kZeroForceFloor);

// Geometric contact features per chain, derived from the line of action:
//  d      perpendicular distance of the coupling joint to the line
//  alpha  angle from the force direction to the distal link axis
//  n_tau  number of drives whose external torque magnitude exceeds eps_tau
struct IsolationFeatures {
  Vec3 d = Vec3::Zero();
  Vec3 alpha = Vec3::Zero();
  int n_tau = 0;
  std::array<bool, kNumChains> tau_active{};
  LineOfAction loa;
};

Expected<IsolationFeatures> isolation_features(const RobotModel& m, const Vec9& q,
                                               const Vec3& x, const Wrench& Fhat,
                                               const Vec3& tau_ext, double eps_tau);

}  // namespace cspr
