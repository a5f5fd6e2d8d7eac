#pragma once

#include <array>
#include <vector>

#include "cspr/types.hpp"

namespace cspr {

// Rest-to-rest scalar motion profile with trapezoidal acceleration
// (bounded jerk). Sampling outside [0, duration] clamps to the endpoints.
class SCurve {
 public:
  SCurve() = default;
  // Plans |L| >= 0 along the signed displacement; limits must be positive.
  SCurve(double displacement, double v_max, double a_max, double j_max);

  double duration() const { return T_; }
  double displacement() const { return sign_ * L_; }

  struct Sample {
    double s = 0, v = 0, a = 0;
  };
  Sample sample(double t) const;

 private:
  struct Seg {
    double t0 = 0, s0 = 0, v0 = 0, a0 = 0, j = 0;
  };
  std::vector<Seg> segs_;
  double T_ = 0, L_ = 0, sign_ = 1;
};

// Straight-line vector profile driven by a scalar SCurve.
class LinePath {
 public:
  LinePath() = default;
  LinePath(const VecX& from, const VecX& to, double v_max, double a_max, double j_max);
  double duration() const { return curve_.duration(); }
  void sample(double t, VecX& p, VecX& v, VecX& a) const;

 private:
  VecX p0_, dir_;
  SCurve curve_;
};

// Closed square path for the platform at constant orientation; one lap,
// rest at every corner, then holds the final pose.
class SquarePath {
 public:
  SquarePath(const Vec3& center, double edge, double v_max, double a_max, double j_max,
             double corner_dwell = 0.05);
  double duration() const;
  void sample(double t, Vec3& x_d, Vec3& xd_d, Vec3& xdd_d) const;

 private:
  Vec3 center_;
  std::array<Vec2, 5> corners_;
  SCurve edge_curve_;
  double dwell_;
};

}  // namespace cspr
