#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "cspr/kinematics.hpp"
#include "cspr/model.hpp"
#include "cspr/types.hpp"

namespace cspr {

struct PFilterConfig {
  int particles = 50;
  bool extended = false;   // also estimate the along-link force component
  double sigma_l = 1e-2;   // motion noise on the normalized abscissa
  double sigma_f = 1.0;    // motion noise per force component [N]
  // Extended-variant motion noise. With a free along-link component, one
  // residual-torque sample constrains (l, f) only to a manifold; localization
  // comes from the pose changing between samples, and a tighter diffusion
  // keeps stale fits from re-solving themselves onto the moved manifold.
  // Calibrated once on the angled-contact scenario, then frozen.
  double sigma_l_ext = 2e-3;
  double sigma_f_ext = 0.02;
  double sigma_meas = 0.05;  // residual-torque noise per joint [N m]
  double init_f_std = 20.0;  // fallback spread when the force seed degenerates [N]
  std::uint64_t seed = 9;
};

// State per particle: contact abscissa l in [0,1] plus the contact force in
// the link frame, f = (f_x along link, f_y normal). The basic variant pins
// f_x = 0.
struct PFParticle {
  double l = 0.5;
  Vec2 f = Vec2::Zero();
};

struct PFEstimate {
  double l_c = 0.0;
  Vec2 f_link = Vec2::Zero();  // (f_x, f_y) in the link frame
  Vec2 f_world = Vec2::Zero();
  double ess = 0.0;            // effective sample size after weighting
  bool reinitialized = false;
};

class ParticleFilter {
 public:
  explicit ParticleFilter(const PFilterConfig& cfg = {});

  // Seeds the cloud: l ~ U[0,1], force from a damped least-squares fit of
  // tau_hat at each particle's own abscissa.
  Err init(const RobotModel& m, const Vec9& q, const Vec3& x, Body body, const Vec3& tau_hat);

  // One diffuse/weight/resample cycle against the measured residual torques.
  Expected<PFEstimate> step(const RobotModel& m, const Vec9& q, const Vec3& x, Body body,
                            const Vec3& tau_hat);

  bool initialized() const { return !cloud_.empty(); }
  const std::vector<PFParticle>& particles() const { return cloud_; }
  const VecX& weights() const { return w_; }

 private:
  Vec3 predicted_tau(const RobotModel& m, const Vec9& q, const Vec3& x, Body body,
                     const PFParticle& p) const;

  PFilterConfig cfg_;
  std::mt19937_64 rng_;
  std::vector<PFParticle> cloud_;
  VecX w_;
};

}  // namespace cspr
