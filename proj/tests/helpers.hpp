#pragma once

#include <invobs/framework.hpp>
#include <invobs/rigid_body.hpp>
#include <invobs/so3.hpp>

namespace invobs::test {

// Componentwise cross product, independent of Eigen's.
inline Vec3 cross_by_hand(const Vec3& a, const Vec3& b) {
  return Vec3(a.y() * b.z() - a.z() * b.y(),
              a.z() * b.x() - a.x() * b.z(),
              a.x() * b.y() - a.y() * b.x());
}

inline double inf_norm(const VecX& v) { return v.cwiseAbs().maxCoeff(); }

}  // namespace invobs::test
