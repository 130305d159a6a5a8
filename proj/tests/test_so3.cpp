#include "invobs/so3.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

using namespace invobs;

namespace {

Vec3 random_vec3(Rng& rng, double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, scale);
  return Vec3(gauss(rng), gauss(rng), gauss(rng));
}

// Independent componentwise cross product, the oracle for hat().
Vec3 cross_oracle(const Vec3& a, const Vec3& b) {
  return Vec3(a.y() * b.z() - a.z() * b.y(),
              a.z() * b.x() - a.x() * b.z(),
              a.x() * b.y() - a.y() * b.x());
}

// SVD polar factor, the oracle for project_to_so3.
Mat3 polar_svd_oracle(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    const Mat3 flip = Vec3(1.0, 1.0, -1.0).asDiagonal();
    r = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return r;
}

}  // namespace

TEST_CASE("hat produces the cross-product matrix") {
  CHECK(hat(Vec3::Zero()).isZero(0.0));
  CHECK((hat(Vec3(0, 0, 1)) * Vec3(1, 0, 0) - Vec3(0, 1, 0)).norm() == 0.0);

  Rng rng(12345);
  double max_err = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Vec3 w = random_vec3(rng);
    const Vec3 b = random_vec3(rng);
    max_err = std::max(max_err,
                       (hat(w) * b - cross_oracle(w, b)).cwiseAbs().maxCoeff());
    CHECK((hat(w) + hat(w).transpose()).norm() == 0.0);
  }
  CHECK(max_err <= 1e-15);
}

TEST_CASE("vee inverts hat") {
  CHECK(vee(Mat3::Zero()) == Vec3::Zero());
  CHECK(vee(hat(Vec3(1, 2, 3))) == Vec3(1, 2, 3));

  Rng rng(777);
  for (int i = 0; i < 100; ++i) {
    const Vec3 w = random_vec3(rng, 3.0);
    CHECK((vee(hat(w)) - w).cwiseAbs().maxCoeff() <= 1e-15);
  }
}

TEST_CASE("vee rejects non-skew input") {
  Mat3 m = Mat3::Identity();
  CHECK_THROWS_AS(vee(m), NotSkew);
  m = hat(Vec3(1, 2, 3));
  m(0, 1) += 1e-6;
  CHECK_THROWS_AS(vee(m), NotSkew);
}

TEST_CASE("exp_so3 matches hand-evaluated Rodrigues cases") {
  CHECK(exp_so3(Vec3::Zero()).matrix() == Mat3::Identity());

  // Quarter turn about e3 maps e1 to e2.
  const Rotation quarter = exp_so3(Vec3(0, 0, M_PI / 2));
  CHECK((quarter * Vec3(1, 0, 0) - Vec3(0, 1, 0)).norm() <= 1e-12);

  // First-order Taylor truncation oracle for a tiny angle.
  const Vec3 w(1e-8, -2e-8, 0.5e-8);
  const Mat3 taylor = Mat3::Identity() + hat(w);
  CHECK((exp_so3(w).matrix() - taylor).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("exp_so3 is orthonormal up to pi and continuous at the branch") {
  Rng rng(99);
  for (int i = 0; i < 200; ++i) {
    std::uniform_real_distribution<double> u(0.0, M_PI);
    Vec3 axis = random_vec3(rng);
    axis.normalize();
    const Rotation r = exp_so3(u(rng) * axis);
    CHECK(orthonormality_error(r.matrix()) <= 1e-13);
    CHECK(std::abs(r.matrix().determinant() - 1.0) <= 1e-12);
  }
  // Small-angle branch agrees with the trig branch near the threshold.
  for (double theta : {0.9e-4, 1.1e-4}) {
    const Vec3 w = theta * Vec3(1, 1, 1).normalized();
    const double theta2 = theta * theta;
    const Mat3 k = hat(w);
    const Mat3 trig = Mat3::Identity() + std::sin(theta) / theta * k +
                      (1 - std::cos(theta)) / theta2 * k * k;
    CHECK((exp_so3(w).matrix() - trig).cwiseAbs().maxCoeff() <= 1e-15);
  }
}

TEST_CASE("group axioms hold numerically") {
  Rng rng(2024);
  double assoc = 0.0, act_comp = 0.0, conj = 0.0, inv = 0.0;
  for (int i = 0; i < 200; ++i) {
    const Rotation a = random_rotation(rng);
    const Rotation b = random_rotation(rng);
    const Rotation c = random_rotation(rng);
    const Vec3 v = random_vec3(rng);
    assoc = std::max(
        assoc, (((a * b) * c).matrix() - (a * (b * c)).matrix()).norm());
    act_comp = std::max(act_comp, ((a * b) * v - a * (b * v)).norm());
    // hat(R w) = R hat(w) R^T, used in the system-invariance proof.
    conj = std::max(conj, (hat(a * v) - a.matrix() * hat(v) *
                                            a.matrix().transpose())
                              .cwiseAbs()
                              .maxCoeff());
    inv = std::max(inv, ((a * a.inverse()).matrix() - Mat3::Identity()).norm());
  }
  CHECK(assoc <= 1e-13);
  CHECK(act_comp <= 1e-13);
  CHECK(conj <= 1e-13);
  CHECK(inv <= 1e-13);
  CHECK((Rotation::identity() * Vec3(0.3, -2.0, 5.0)) == Vec3(0.3, -2.0, 5.0));
}

TEST_CASE("commuting one-parameter subgroup composes additively") {
  const Vec3 axis = Vec3(1, 2, -1).normalized();
  const Vec3 a = 0.7 * axis;
  const Vec3 b = -1.9 * axis;
  const Mat3 lhs = (exp_so3(a) * exp_so3(b)).matrix();
  CHECK((lhs - exp_so3(a + b).matrix()).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("project_to_so3 recovers the polar factor") {
  Rng rng(5150);
  const Rotation r = random_rotation(rng);

  CHECK((project_to_so3(r.matrix()).matrix() - r.matrix())
            .cwiseAbs()
            .maxCoeff() <= 1e-14);
  CHECK((project_to_so3(1.001 * r.matrix()).matrix() - r.matrix())
            .cwiseAbs()
            .maxCoeff() <= 1e-12);

  for (int i = 0; i < 50; ++i) {
    const Rotation base = random_rotation(rng);
    Mat3 noise;
    noise.setRandom();
    noise *= 1e-6 / noise.norm();
    const Mat3 perturbed = base.matrix() + noise;
    const Mat3 projected = project_to_so3(perturbed).matrix();
    CHECK((projected - base.matrix()).norm() <= 2e-6);
    CHECK(orthonormality_error(projected) <= 1e-12);
    CHECK((projected - polar_svd_oracle(perturbed)).cwiseAbs().maxCoeff() <=
          1e-12);
  }
}

TEST_CASE("project_to_so3 rejects degenerate input") {
  CHECK_THROWS_AS(project_to_so3(-Mat3::Identity()), Degenerate);
  Mat3 squashed = Mat3::Identity();
  squashed(2, 2) = 0.0;
  CHECK_THROWS_AS(project_to_so3(squashed), Degenerate);
}

TEST_CASE("random_rotation is deterministic and stays on the manifold") {
  CHECK((random_rotation(std::uint64_t{42}).matrix() -
         random_rotation(std::uint64_t{42}).matrix())
            .isZero(0.0));

  Rng rng(31337);
  for (int i = 0; i < 10000; ++i) {
    const Rotation r = random_rotation(rng);
    REQUIRE(orthonormality_error(r.matrix()) <= 1e-12);
    REQUIRE(std::abs(r.matrix().determinant() - 1.0) <= 1e-12);
  }
}

TEST_CASE("random_rotation is isotropic (Haar symmetry, Monte Carlo 3 sigma)") {
  Rng rng(8675309);
  Vec3 mean = Vec3::Zero();
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    mean += random_rotation(rng) * Vec3(1, 0, 0);
  }
  mean /= static_cast<double>(n);
  CHECK(mean.norm() <= 0.02);
}

TEST_CASE("mix_seed decorrelates run indices") {
  CHECK(mix_seed(1, 0) != mix_seed(1, 1));
  CHECK(mix_seed(1, 0) != mix_seed(2, 0));
  CHECK(mix_seed(7, 3) == mix_seed(7, 3));
}
