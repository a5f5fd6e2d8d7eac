#pragma once

#include <array>

#include "cspr/model.hpp"
#include "cspr/types.hpp"

namespace cspr {

// Joint vector layout: chain-major, q = [a1 p1 c1  a2 p2 c2  a3 p3 c3].
//  a_i  active crank angle, absolute w.r.t. world x-axis
//  p_i  passive elbow angle, relative to the crank (distal dir = a_i + p_i)
//  c_i  coupling angle, closes the orientation loop: a_i + p_i + c_i = x_r
// Platform pose x = [x_t; x_r] with coupling anchors at
// x_t + R(x_r) * platform_radius * u(platform_angle_i).
using Vec9 = Eigen::Matrix<double, 9, 1>;
using Mat93 = Eigen::Matrix<double, 9, 3>;
using Mat99 = Eigen::Matrix<double, 9, 9>;

inline int idx_active(int chain) { return 3 * chain; }
inline int idx_passive(int chain) { return 3 * chain + 1; }
inline int idx_coupling(int chain) { return 3 * chain + 2; }

// Elbow branch per chain: sign of sin(p_i). +1 = default build configuration.
using Branch = std::array<int, kNumChains>;
inline Branch default_branch() { return {+1, +1, +1}; }

Vec2 base_point(const RobotModel& m, int chain);
Vec2 platform_anchor(const RobotModel& m, const Vec3& x, int chain);
Vec2 elbow_point(const RobotModel& m, const Vec9& q, int chain);
Vec2 coupling_point(const RobotModel& m, const Vec9& q, int chain);

// Closed-form chain-wise inverse kinematics. kUnreachable if any coupling
// anchor leaves the chain annulus.
Expected<Vec9> inverse_kinematics(const RobotModel& m, const Vec3& x,
                                  const Branch& branch = default_branch());

// Newton-Raphson on the reduced loop constraints, warm-started at x_guess.
// q_p is only used to synthesize a pose guess when x_guess is non-finite.
Expected<Vec3> forward_kinematics(const RobotModel& m, const Vec3& qa,
                                  const Vec3& qp, const Vec3& x_guess,
                                  int max_iter = 30, double tol = 1e-12);

// Rebuilds the full joint vector from a consistent (q_a, x) pair.
Vec9 reconstruct_q(const RobotModel& m, const Vec3& qa, const Vec3& x);

// Full loop-closure residual, 3 rows per chain (2 position + 1 orientation).
Vec9 constraint_full(const RobotModel& m, const Vec9& q, const Vec3& x);
Mat99 constraint_full_dq(const RobotModel& m, const Vec9& q);
Mat93 constraint_full_dx(const RobotModel& m, const Vec3& x);

// Reduced residual (passive joints eliminated): one scalar loop per chain,
// 0.5*(|anchor - elbow|^2 - l2^2).
Vec3 constraint_red(const RobotModel& m, const Vec3& qa, const Vec3& x);
Mat3 constraint_red_dqa(const RobotModel& m, const Vec3& qa, const Vec3& x);
Mat3 constraint_red_dx(const RobotModel& m, const Vec3& qa, const Vec3& x);

// qdot = J_qx * xdot (9x3), from the full constraint gradients.
Expected<Mat93> jacobian_qx(const RobotModel& m, const Vec9& q, const Vec3& x);

// xdot = J_xqa * qadot (3x3), from the reduced constraint gradients.
// Loses rank at type-II (parallel) singularities.
Expected<Mat3> jacobian_xqa(const RobotModel& m, const Vec3& qa, const Vec3& x);

// Time derivative of J_xqa by central differencing along the platform twist.
Expected<Mat3> jacobian_xqa_dot(const RobotModel& m, const Vec3& x,
                                const Vec3& xdot, const Branch& branch);

// --- contact geometry ------------------------------------------------------

enum class Body : int {
  kC1L1 = 0, kC1L2, kC2L1, kC2L2, kC3L1, kC3L2, kPlatform,
};
inline constexpr int kNumBodies = 7;

const char* body_name(Body b);
Expected<Body> body_from_name(const std::string& s);
int chain_of(Body b);            // -1 for platform
bool first_link(Body b);

struct ContactFrame {
  Vec2 pos = Vec2::Zero();                              // world contact point
  Eigen::Matrix<double, 2, 9> J_q;                      // xdot_c = J_q qdot
  Eigen::Matrix<double, 2, 3> J_x;                      // xdot_c = J_x xdot
  Eigen::Matrix<double, 2, 3> J_qa;                     // xdot_c = J_qa qadot
};

// l_c in [0,1]: normalized abscissa along the link (0 = proximal joint).
// For the platform body l_c is ignored and `lever` (body frame) locates the
// contact point; zero lever = platform center.
Expected<ContactFrame> contact_frame(const RobotModel& m, const Vec9& q,
                                     const Vec3& x, Body body, double l_c,
                                     const Vec2& lever = Vec2::Zero());

// --- set-based constraint measures ------------------------------------------

// cond_2 of J_xqa with the rotational row scaled by char_length.
Expected<double> cond_xqa(const RobotModel& m, const Vec3& qa, const Vec3& x);

struct ClearancePair {
  double dist = 0;
  int chain_a = -1, link_a = -1, chain_b = -1, link_b = -1;
};

// Minimal centerline clearance between links of different chains.
ClearancePair min_link_clearance(const RobotModel& m, const Vec9& q);

// One-sided numeric gradients of the two constraint measures w.r.t. the
// active joints; each column re-solves the pose for the perturbed crank.
struct IecGradients {
  double kappa = 0;
  double clearance = 0;
  Eigen::RowVector3d J_kappa = Eigen::RowVector3d::Zero();
  Eigen::RowVector3d J_clearance = Eigen::RowVector3d::Zero();
};
Expected<IecGradients> iec_gradients(const RobotModel& m, const Vec3& qa,
                                     const Vec3& x);

double segment_distance(const Vec2& a0, const Vec2& a1, const Vec2& b0,
                        const Vec2& b1);

}  // namespace cspr
