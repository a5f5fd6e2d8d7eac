#pragma once

#include "cspr/types.hpp"

namespace cspr {

// Contact categories emitted by the type classifier.
enum class ContactType : std::uint8_t { kCollision = 0, kClamping = 1 };
inline constexpr int kNumContactTypes = 2;

inline const char* contact_type_name(ContactType t) {
  return t == ContactType::kCollision ? "collision" : "clamping";
}

// Classifier feature vectors. The three networks consume, in order:
//   type  (2 classes): estimated platform wrench                          (3)
//   chain (3 classes): wrench + per-chain line-of-action distances        (6)
//   body  (7 classes): wrench + drive torques + distances + angles        (12)
inline VecX type_features(const Wrench& F_hat) {
  VecX f(3);
  f << F_hat.x(), F_hat.y(), F_hat.z();
  return f;
}

inline VecX chain_features(const Wrench& F_hat, const Vec3& d) {
  VecX f(6);
  f << F_hat, d;
  return f;
}

inline VecX body_features(const Wrench& F_hat, const Vec3& tau_ext, const Vec3& d,
                          const Vec3& alpha) {
  VecX f(12);
  f << F_hat, tau_ext, d, alpha;
  return f;
}

}  // namespace cspr
