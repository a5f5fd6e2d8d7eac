#include "cspr/types.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

namespace cspr {

const char* err_name(Err e) {
  switch (e) {
    case Err::kOk: return "OK";
    case Err::kUnreachable: return "UNREACHABLE";
    case Err::kNoConvergence: return "NO_CONVERGENCE";
    case Err::kSingular: return "SINGULAR";
    case Err::kRankDeficient: return "RANK_DEFICIENT";
    case Err::kConfig: return "CONFIG";
    case Err::kIo: return "IO";
  }
  return "UNKNOWN";
}

MatX pinv(const MatX& J, double sigma_min_tol, double damping, bool* degraded) {
  Eigen::JacobiSVD<MatX> svd(J, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const VecX& s = svd.singularValues();
  bool damped = s.size() == 0 || s(s.size() - 1) < sigma_min_tol;
  if (degraded) *degraded = damped;
  VecX inv(s.size());
  for (int i = 0; i < s.size(); ++i) {
    if (damped) {
      inv(i) = s(i) / (s(i) * s(i) + damping);
    } else {
      inv(i) = 1.0 / s(i);
    }
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

MatX spd_sqrt_x(const MatX& A) {
  Eigen::SelfAdjointEigenSolver<MatX> es(A);
  VecX d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

Mat3 spd_sqrt(const Mat3& A) {
  Eigen::SelfAdjointEigenSolver<Mat3> es(A);
  Vec3 d = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace cspr
