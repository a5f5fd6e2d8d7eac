#include "cspr/pfilter.hpp"

#include <algorithm>
#include <cmath>

namespace cspr {

namespace {

// Link frame of the contact body: ex along the link, ey its +90 deg normal.
void link_axes(const Vec9& q, Body body, Vec2& ex, Vec2& ey) {
  const int c = chain_of(body);
  const double theta = first_link(body) ? q(idx_active(c)) : q(idx_active(c)) + q(idx_passive(c));
  ex = unit_dir(theta);
  ey = unit_dir_perp(theta);
}

}  // namespace

ParticleFilter::ParticleFilter(const PFilterConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {}

Vec3 ParticleFilter::predicted_tau(const RobotModel& m, const Vec9& q, const Vec3& x, Body body,
                                   const PFParticle& p) const {
  auto frame = contact_frame(m, q, x, body, p.l);
  if (!frame.ok()) return Vec3::Zero();
  Vec2 ex, ey;
  link_axes(q, body, ex, ey);
  const Vec2 f_world = p.f.x() * ex + p.f.y() * ey;
  return frame->J_qa.transpose() * f_world;
}

Err ParticleFilter::init(const RobotModel& m, const Vec9& q, const Vec3& x, Body body,
                         const Vec3& tau_hat) {
  if (chain_of(body) < 0) return Err::kConfig;  // platform handled by the line of action
  Vec2 ex, ey;
  link_axes(q, body, ex, ey);

  // Uniform in l, with the force seeded by a damped least-squares fit at each
  // particle's own abscissa. One measurement only constrains (l, f) to a
  // manifold, so the cloud starts spread along it instead of scattered far
  // from the likelihood mass (which would starve the ESS immediately).
  std::uniform_real_distribution<double> ul(0.0, 1.0);
  std::normal_distribution<double> nf(0.0, cfg_.extended ? cfg_.sigma_f_ext : cfg_.sigma_f);
  std::normal_distribution<double> nwide(0.0, cfg_.init_f_std);
  cloud_.assign(cfg_.particles, PFParticle{});
  for (auto& p : cloud_) {
    p.l = ul(rng_);
    auto frame = contact_frame(m, q, x, body, p.l);
    if (!frame.ok()) return frame.err;
    const Vec3 ay = frame->J_qa.transpose() * ey;
    if (cfg_.extended) {
      const Vec3 ax = frame->J_qa.transpose() * ex;
      Eigen::Matrix2d AtA;
      AtA << ax.squaredNorm(), ax.dot(ay), ax.dot(ay), ay.squaredNorm();
      AtA.diagonal().array() += 1e-4;
      const Vec2 Atb(ax.dot(tau_hat), ay.dot(tau_hat));
      p.f = AtA.ldlt().solve(Atb) + Vec2(nf(rng_), nf(rng_));
    } else {
      p.f = Vec2(0.0, ay.dot(tau_hat) / (ay.squaredNorm() + 1e-4) + nf(rng_));
    }
    if (!p.f.allFinite() || p.f.norm() > 1e4)
      p.f = Vec2(cfg_.extended ? nwide(rng_) : 0.0, nwide(rng_));
  }
  w_ = VecX::Constant(cfg_.particles, 1.0 / cfg_.particles);
  return Err::kOk;
}

Expected<PFEstimate> ParticleFilter::step(const RobotModel& m, const Vec9& q, const Vec3& x,
                                          Body body, const Vec3& tau_hat) {
  if (cloud_.empty()) return Err::kConfig;

  std::normal_distribution<double> nl(0.0, cfg_.extended ? cfg_.sigma_l_ext : cfg_.sigma_l);
  std::normal_distribution<double> nf(0.0, cfg_.extended ? cfg_.sigma_f_ext : cfg_.sigma_f);
  for (auto& p : cloud_) {
    p.l = std::clamp(p.l + nl(rng_), 0.0, 1.0);
    p.f.y() += nf(rng_);
    if (cfg_.extended) p.f.x() += nf(rng_);
  }

  const double inv_var = 1.0 / (cfg_.sigma_meas * cfg_.sigma_meas);
  auto reweight = [&]() {
    VecX logw(cloud_.size());
    for (size_t r = 0; r < cloud_.size(); ++r) {
      const Vec3 residual = tau_hat - predicted_tau(m, q, x, body, cloud_[r]);
      logw(r) = -0.5 * inv_var * residual.squaredNorm();
    }
    logw.array() -= logw.maxCoeff();
    w_ = logw.array().exp();
    const double sum = w_.sum();
    if (!(sum > 0.0) || !std::isfinite(sum)) return false;
    w_ /= sum;
    return true;
  };

  PFEstimate est;
  if (!reweight()) {
    est.reinitialized = true;
  } else {
    est.ess = 1.0 / w_.squaredNorm();
    if (est.ess < 2.0) est.reinitialized = true;
  }
  if (est.reinitialized) {
    // Degenerate posterior: rebuild the cloud and weight it against the same
    // measurement so the upcoming resample can still concentrate.
    const Err e = init(m, q, x, body, tau_hat);
    if (e != Err::kOk) return e;
    if (reweight())
      est.ess = 1.0 / w_.squaredNorm();
    else
      est.ess = static_cast<double>(cfg_.particles);  // keep uniform weights
  }

  // Point estimate: weighted mean before resampling.
  double l_mean = 0.0;
  Vec2 f_mean = Vec2::Zero();
  for (size_t r = 0; r < cloud_.size(); ++r) {
    l_mean += w_(r) * cloud_[r].l;
    f_mean += w_(r) * cloud_[r].f;
  }
  est.l_c = l_mean;
  est.f_link = f_mean;
  Vec2 ex, ey;
  link_axes(q, body, ex, ey);
  est.f_world = f_mean.x() * ex + f_mean.y() * ey;

  // Systematic resampling.
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const double step = 1.0 / cloud_.size();
  double pointer = u01(rng_) * step;
  std::vector<PFParticle> next;
  next.reserve(cloud_.size());
  double cum = w_(0);
  size_t i = 0;
  for (size_t r = 0; r < cloud_.size(); ++r) {
    const double target = pointer + r * step;
    while (cum < target && i + 1 < cloud_.size()) cum += w_(++i);
    next.push_back(cloud_[i]);
  }
  cloud_ = std::move(next);
  w_.setConstant(1.0 / cloud_.size());
  return est;
}

}  // namespace cspr
