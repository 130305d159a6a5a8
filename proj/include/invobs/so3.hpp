// SO(3) primitives: skew operators, exponential map, polar projection and
// Haar-uniform sampling, all on plain 3x3 matrices.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>

namespace invobs {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Rng = std::mt19937_64;

struct NotSkew : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct Degenerate : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NotRotation : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Frobenius distance from orthonormality, |R^T R - I|_F.
inline double orthonormality_error(const Mat3& m) {
  return (m.transpose() * m - Mat3::Identity()).norm();
}

/// Element of SO(3), stored as a direction-cosine matrix. Construction via
/// from_matrix enforces |R^T R - I|_F <= 1e-12 and det within 1e-12 of 1.
class Rotation {
 public:
  Rotation() : m_(Mat3::Identity()) {}

  static Rotation identity() { return Rotation(); }

  static Rotation from_matrix(const Mat3& m) {
    if (!m.allFinite() || orthonormality_error(m) > 1e-12 ||
        std::abs(m.determinant() - 1.0) > 1e-12) {
      throw NotRotation("matrix is not a rotation within tolerance");
    }
    return Rotation(m);
  }

  /// Trusted constructor for matrices already known to be orthonormal
  /// (products of rotations, exact identities).
  static Rotation from_matrix_unchecked(const Mat3& m) { return Rotation(m); }

  const Mat3& matrix() const { return m_; }

  Rotation inverse() const { return Rotation(m_.transpose()); }

  /// Group action on 3-vectors.
  Vec3 operator*(const Vec3& v) const { return m_ * v; }

  /// Group composition.
  Rotation operator*(const Rotation& other) const {
    return Rotation(m_ * other.m_);
  }

 private:
  explicit Rotation(const Mat3& m) : m_(m) {}
  Mat3 m_;
};

/// Skew-symmetric cross-product matrix: hat(w) * b == w x b.
inline Mat3 hat(const Vec3& w) {
  Mat3 m;
  m << 0.0, -w.z(), w.y(),
       w.z(), 0.0, -w.x(),
      -w.y(), w.x(), 0.0;
  return m;
}

/// Inverse of hat. Requires |M + M^T|_F <= 1e-9.
inline Vec3 vee(const Mat3& m) {
  if ((m + m.transpose()).norm() > 1e-9) {
    throw NotSkew("matrix is not skew-symmetric within tolerance");
  }
  return Vec3(m(2, 1), m(0, 2), m(1, 0));
}

/// Exponential map via the Rodrigues formula with a second-order Taylor
/// branch below |w| = 1e-4 (keeps relative error at round-off level).
inline Rotation exp_so3(const Vec3& w) {
  const double theta2 = w.squaredNorm();
  const Mat3 k = hat(w);
  double a, b;  // R = I + a*K + b*K^2
  if (theta2 < 1e-8) {
    a = 1.0 - theta2 / 6.0;
    b = 0.5 - theta2 / 24.0;
  } else {
    const double theta = std::sqrt(theta2);
    a = std::sin(theta) / theta;
    b = (1.0 - std::cos(theta)) / theta2;
  }
  return Rotation::from_matrix_unchecked(Mat3::Identity() + a * k +
                                         b * (k * k));
}

/// Nearest rotation in Frobenius norm (polar factor, Newton iteration
/// X <- (X + X^-T)/2). Repairs integration drift; requires det(M) > 0 and
/// M well away from rank loss.
inline Rotation project_to_so3(const Mat3& m) {
  if (!m.allFinite() || m.determinant() <= 0.0) {
    throw Degenerate("projection needs a finite matrix with positive det");
  }
  if (orthonormality_error(m) > 1e-3) {
    // Far from orthonormal: screen for rank loss before iterating.
    Eigen::SelfAdjointEigenSolver<Mat3> es(m.transpose() * m);
    const double smin = std::sqrt(std::max(0.0, es.eigenvalues()(0)));
    const double smax = std::sqrt(std::max(0.0, es.eigenvalues()(2)));
    if (smin <= 1e-9 * smax) {
      throw Degenerate("matrix is near rank-deficient");
    }
  }
  Mat3 x = m;
  for (int i = 0; i < 100; ++i) {
    const Mat3 next = 0.5 * (x + x.inverse().transpose());
    const double step = (next - x).cwiseAbs().maxCoeff();
    x = next;
    if (step <= 1e-13) {
      break;
    }
  }
  return Rotation::from_matrix_unchecked(x);
}

/// Haar-uniform random rotation: a uniform unit quaternion is drawn from
/// four standard normals and mapped through axis-angle into exp_so3.
inline Rotation random_rotation(Rng& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::Vector4d q;
  do {
    q << gauss(rng), gauss(rng), gauss(rng), gauss(rng);
  } while (q.norm() < 1e-12);
  q.normalize();
  const Vec3 im = q.tail<3>();
  const double im_norm = im.norm();
  if (im_norm == 0.0) {
    return Rotation::identity();
  }
  const double angle = 2.0 * std::atan2(im_norm, q(0));
  return exp_so3((angle / im_norm) * im);
}

/// Single draw from a fresh seed; two calls with the same seed agree.
inline Rotation random_rotation(std::uint64_t seed) {
  Rng rng(seed);
  return random_rotation(rng);
}

/// splitmix64 step; used to derive independent per-run RNG streams.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t index) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace invobs
