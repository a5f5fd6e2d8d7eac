#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <string>

namespace cspr {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using VecX = Eigen::VectorXd;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using MatX = Eigen::MatrixXd;

// Planar wrench on the platform: [f_x, f_y, m_z].
using Wrench = Vec3;

inline constexpr int kNumChains = 3;

enum class Err : std::uint8_t {
  kOk = 0,
  kUnreachable,      // inverse kinematics target outside chain annulus
  kNoConvergence,    // iterative solve failed
  kSingular,         // matrix not invertible at requested state
  kRankDeficient,    // task Jacobian lost rank, damped fallback used
  kConfig,           // invalid configuration value
  kIo,               // file/parse problem
};

const char* err_name(Err e);

// Minimal value-or-error carrier; avoids exceptions in the servo path.
template <typename T>
struct Expected {
  T value{};
  Err err = Err::kOk;

  Expected() = default;
  Expected(T v) : value(std::move(v)) {}
  Expected(Err e) : err(e) {}
  bool ok() const { return err == Err::kOk; }
  explicit operator bool() const { return ok(); }
  const T& operator*() const { return value; }
  T& operator*() { return value; }
  const T* operator->() const { return &value; }
  T* operator->() { return &value; }
};

inline Vec2 unit_dir(double theta) { return {std::cos(theta), std::sin(theta)}; }

// d/dtheta of unit_dir; also unit_dir rotated +90 deg.
inline Vec2 unit_dir_perp(double theta) { return {-std::sin(theta), std::cos(theta)}; }

inline Mat2 rot2(double theta) {
  Mat2 r;
  r << std::cos(theta), -std::sin(theta), std::sin(theta), std::cos(theta);
  return r;
}

inline double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

inline Vec2 perp_ccw(const Vec2& v) { return {-v.y(), v.x()}; }

inline double wrap_pi(double a) {
  a = std::fmod(a + M_PI, 2.0 * M_PI);
  if (a < 0) a += 2.0 * M_PI;
  return a - M_PI;
}

// Moore-Penrose pseudoinverse with damped fallback when the smallest
// singular value drops below sigma_min_tol (Tikhonov lambda^2 = damping).
MatX pinv(const MatX& J, double sigma_min_tol = 1e-6, double damping = 1e-8,
          bool* degraded = nullptr);

// Symmetric positive (semi)definite principal square root via eigendecomposition.
Mat3 spd_sqrt(const Mat3& A);
MatX spd_sqrt_x(const MatX& A);

}  // namespace cspr
