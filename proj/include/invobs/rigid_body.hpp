#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <tuple>
#include <utility>
#include <vector>

#include "invobs/framework.hpp"
#include "invobs/so3.hpp"

namespace invobs {

inline constexpr double kStandardGravity = 9.80665;

/// NED convention: +z is down, so gravity points along +z.
inline Vec3 ned_gravity() { return Vec3(0.0, 0.0, kStandardGravity); }

/// Full rigid-body state: body velocity (unmeasured), inertial position and
/// body-to-inertial attitude (measured).
struct RigidBodyState {
  Vec3 v = Vec3::Zero();
  Vec3 q = Vec3::Zero();
  Rotation R_IB;
};

/// Measured part only.
struct RigidBodyPose {
  Vec3 q = Vec3::Zero();
  Rotation R_IB;
};

struct RigidBodyInput {
  Vec3 omega = Vec3::Zero();
  Vec3 a = Vec3::Zero();
};

struct RigidBodyPoseRate {
  Vec3 qdot = Vec3::Zero();
  Mat3 Rdot = Mat3::Zero();
};

struct NotHurwitz : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Observer tuning. Construction enforces that -L is Hurwitz, the condition
/// for the invariant error to decay.
struct ObserverGains {
  Mat3 L;
  Vec3 gravity;

  explicit ObserverGains(const Mat3& L_in, const Vec3& gravity_in = ned_gravity())
      : L(L_in), gravity(gravity_in) {
    if (!L.allFinite() || !gravity.allFinite()) {
      throw NotHurwitz("gains must be finite");
    }
    const Eigen::EigenSolver<Mat3> es(-L);
    for (int i = 0; i < 3; ++i) {
      if (es.eigenvalues()(i).real() >= 0.0) {
        throw NotHurwitz("-L must have all eigenvalues in the open left half-plane");
      }
    }
  }
};

/// Velocity dynamics: vdot = v x omega + R_IB^T g + a.
inline Vec3 f_rb(const Vec3& v, const RigidBodyPose& y, const RigidBodyInput& u,
                 const ObserverGains& gains) {
  return v.cross(u.omega) + y.R_IB.inverse() * gains.gravity + u.a;
}

/// Pose kinematics: qdot = R_IB v, Rdot = R_IB hat(omega).
inline RigidBodyPoseRate h_rb(const Vec3& v, const RigidBodyPose& y,
                              const RigidBodyInput& u) {
  return {y.R_IB * v, y.R_IB.matrix() * hat(u.omega)};
}

// Blocks layout: y = {vec: [q], rot: [R_IB]}, u = {vec: [omega, a]}, x = v.

inline Blocks to_blocks(const RigidBodyPose& y) {
  Blocks b;
  b.vec.push_back(y.q);
  b.rot.push_back(y.R_IB);
  return b;
}

inline RigidBodyPose pose_from_blocks(const Blocks& b) {
  return {Vec3(b.vec.at(0)), b.rot.at(0)};
}

inline Blocks to_blocks(const RigidBodyInput& u) {
  Blocks b;
  b.vec.push_back(u.omega);
  b.vec.push_back(u.a);
  return b;
}

inline RigidBodyInput input_from_blocks(const Blocks& b) {
  return {Vec3(b.vec.at(0)), Vec3(b.vec.at(1))};
}

inline BlocksTangent to_tangent(const RigidBodyPoseRate& r) {
  BlocksTangent t;
  t.vec.push_back(r.qdot);
  t.rot.push_back(r.Rdot);
  return t;
}

/// SO(3) acting by phi_g(v) = R_g v, rho_g(q, R) = (q, R R_g^T),
/// psi_g(omega, a) = (R_g omega, R_g a). Position carries no group action.
inline TransformationGroup<Rotation> so3_group() {
  TransformationGroup<Rotation> g;
  g.phi = [](const Rotation& r, const VecX& x) -> VecX { return r.matrix() * x; };
  g.rho = [](const Rotation& r, const Blocks& y) {
    Blocks out = y;
    out.rot[0] = y.rot[0] * r.inverse();
    return out;
  };
  g.psi = [](const Rotation& r, const Blocks& u) {
    Blocks out = u;
    for (auto& v : out.vec) v = r.matrix() * v;
    return out;
  };
  g.tangent_rho = [](const Rotation& r, const Blocks&, const BlocksTangent& yd) {
    BlocksTangent out = yd;
    out.rot[0] = yd.rot[0] * r.matrix().transpose();
    return out;
  };
  g.group_compose = [](const Rotation& a, const Rotation& b) { return a * b; };
  g.group_inverse = [](const Rotation& a) { return a.inverse(); };
  g.group_identity = []() { return Rotation(); };
  g.group_distance = [](const Rotation& a, const Rotation& b) {
    return (a.matrix() - b.matrix()).norm();
  };
  return g;
}

/// Framework dynamics descriptor for the rigid body.
inline SystemModel<Rotation> rb_system_model(const ObserverGains& gains) {
  SystemModel<Rotation> m;
  m.f = [gains](const VecX& x, const Blocks& y, const Blocks& u) -> VecX {
    return f_rb(Vec3(x), pose_from_blocks(y), input_from_blocks(u), gains);
  };
  m.h = [](const VecX& x, const Blocks& y, const Blocks& u) {
    return to_tangent(h_rb(Vec3(x), pose_from_blocks(y), input_from_blocks(u)));
  };
  m.dim_x = 3;
  m.dim_y = 6;
  m.dim_group = 3;
  return m;
}

/// Moving frame gamma(y) = R_IB, tuning map ell(y) = L q, so
/// beta(y) = R_IB^T L q. Analytic tangents:
/// T_y beta(qdot, Rdot) = R_IB^T L qdot + Rdot^T L q and
/// T lambda = Rdot xi (lambda(y; xi) = R_IB xi).
inline ObserverDesign<Rotation> rb_observer_design(const ObserverGains& gains) {
  const Mat3 L = gains.L;
  ObserverDesign<Rotation> d;
  d.gamma = [](const Blocks& y) { return y.rot.at(0); };
  d.ell = [L](const Blocks& y) -> VecX { return L * y.vec.at(0); };
  d.tangent_beta = [L](const Blocks& y, const BlocksTangent& yd) -> VecX {
    const Mat3 Rt = y.rot[0].matrix().transpose();
    return Rt * (L * yd.vec[0]) + yd.rot[0].transpose() * (L * y.vec[0]);
  };
  d.tangent_lambda = [](const Blocks&, const BlocksTangent& yd, const VecX& xi) -> VecX {
    return yd.rot[0] * xi;
  };
  return d;
}

/// Closed-form invariant error dynamics: etadot = -L eta.
inline Vec3 rb_error_rhs(const Vec3& eta, const ObserverGains& gains) {
  return -gains.L * eta;
}

/// Pre-observer field written out termwise, used to cross-check the generic
/// assembly: (z + R^T L q) x omega + R^T g + a + hat(omega) R^T L q
///           - R^T L R (z + R^T L q).
inline Vec3 rb_alpha_closed_form(const Vec3& z, const RigidBodyPose& y,
                                 const RigidBodyInput& u, const ObserverGains& gains) {
  const Mat3 Rt = y.R_IB.matrix().transpose();
  const Vec3 beta_y = Rt * (gains.L * y.q);
  const Vec3 xhat = z + beta_y;
  return xhat.cross(u.omega) + Rt * gains.gravity + u.a + hat(u.omega) * beta_y -
         Rt * gains.L * y.R_IB.matrix() * xhat;
}

// Samplers used by the verification suite. Scales are moderate so the
// finite-difference checks stay far from both truncation and roundoff.

inline Vec3 sample_vec3(Rng& rng, double stddev = 1.0) {
  std::normal_distribution<double> n(0.0, stddev);
  return Vec3(n(rng), n(rng), n(rng));
}

inline Blocks sample_pose_blocks(Rng& rng) {
  Blocks y;
  y.vec.push_back(sample_vec3(rng, 2.0));
  y.rot.push_back(random_rotation(rng));
  return y;
}

inline Blocks sample_input_blocks(Rng& rng) {
  Blocks u;
  u.vec.push_back(sample_vec3(rng));
  u.vec.push_back(sample_vec3(rng));
  return u;
}

/// Tangent at y: free qdot, Rdot = R hat(w) for random body rate w.
inline BlocksTangent sample_pose_tangent(Rng& rng, const Blocks& y) {
  BlocksTangent t;
  t.vec.push_back(sample_vec3(rng));
  t.rot.push_back(y.rot[0].matrix() * hat(sample_vec3(rng)));
  return t;
}

/// Full verification suite for the rigid-body instance. Row order is fixed;
/// the first rows are the ones a broken moving frame must trip. bad_frame
/// replaces gamma with the identity frame as a negative-control hook.
inline std::vector<CheckReport> rb_check_suite(const ObserverGains& gains,
                                               std::uint64_t seed,
                                               bool bad_frame = false) {
  const TransformationGroup<Rotation> grp = so3_group();
  const SystemModel<Rotation> model = rb_system_model(gains);
  ObserverDesign<Rotation> design = rb_observer_design(gains);
  if (bad_frame) {
    design.gamma = [](const Blocks&) { return Rotation(); };
    design.tangent_beta = nullptr;
    design.tangent_lambda = nullptr;
  }

  // Finite-difference variant: same design with analytic tangents dropped.
  ObserverDesign<Rotation> design_fd = design;
  design_fd.tangent_beta = nullptr;
  design_fd.tangent_lambda = nullptr;

  const auto sample_gy = [](Rng& rng) {
    return std::make_pair(random_rotation(rng), sample_pose_blocks(rng));
  };
  const auto sample_gxyu = [](Rng& rng) {
    return std::make_tuple(random_rotation(rng), VecX(sample_vec3(rng)),
                           sample_pose_blocks(rng), sample_input_blocks(rng));
  };
  const auto sample_gyyd = [](Rng& rng) {
    const Rotation g = random_rotation(rng);
    const Blocks y = sample_pose_blocks(rng);
    BlocksTangent yd = sample_pose_tangent(rng, y);
    return std::make_tuple(g, y, yd);
  };
  const auto sample_gzxyu = [](Rng& rng) {
    return std::make_tuple(random_rotation(rng), VecX(sample_vec3(rng)),
                           VecX(sample_vec3(rng)), sample_pose_blocks(rng),
                           sample_input_blocks(rng));
  };
  const auto sample_xyu = [](Rng& rng) {
    return std::make_tuple(VecX(sample_vec3(rng)), sample_pose_blocks(rng),
                           sample_input_blocks(rng));
  };
  const auto sample_zxy = [](Rng& rng) {
    return std::make_tuple(random_rotation(rng), VecX(sample_vec3(rng)),
                           VecX(sample_vec3(rng)), sample_pose_blocks(rng));
  };

  std::vector<CheckReport> rows;
  int row = 0;
  const auto row_rng = [&]() { return Rng(mix_seed(seed, static_cast<std::uint64_t>(row++))); };

  {
    Rng rng = row_rng();
    rows.push_back(check_frame_equivariance<Rotation>(design, grp, sample_gy, 1000, rng));
  }
  {
    Rng rng = row_rng();
    rows.push_back(check_system_invariance<Rotation>(model, grp, sample_gxyu, 1000, rng));
  }
  {
    Rng rng = row_rng();
    rows.push_back(check_beta_commutation<Rotation>(design, grp, sample_gy, 1000, rng));
  }
  {
    Rng rng = row_rng();
    rows.push_back(check_beta_tangent_commutation<Rotation>(design, grp, sample_gyyd, 1000,
                                                            rng, 1e-12, false));
  }
  {
    Rng rng = row_rng();
    rows.push_back(check_beta_tangent_commutation<Rotation>(design, grp, sample_gyyd, 1000,
                                                            rng, 1e-6, true));
  }
  {
    Rng rng = row_rng();
    rows.push_back(
        check_lambda_identity<Rotation>(design, grp, model, sample_gzxyu, 200, rng));
  }
  {
    Rng rng = row_rng();
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const auto [x, y, u] = sample_xyu(rng);
      const VecX z = VecX(sample_vec3(rng));
      const VecX generic = alpha(model, design, grp, z, y, u);
      const Vec3 closed = rb_alpha_closed_form(Vec3(z), pose_from_blocks(y),
                                               input_from_blocks(u), gains);
      worst = std::max(worst, (generic - VecX(closed)).cwiseAbs().maxCoeff());
    }
    rows.push_back(make_report("alpha-closed-form", 1000, worst, 1e-11));
  }
  {
    Rng rng = row_rng();
    double worst = 0.0;
    for (int i = 0; i < 500; ++i) {
      const auto [x, y, u] = sample_xyu(rng);
      const VecX eta = VecX(sample_vec3(rng));
      const NormalizedPoint p = normalize_invariants(design, grp, x, y, u);
      const VecX generic = invariant_error_rhs(model, design_fd, grp, eta, p.x, p.y, p.u);
      const Vec3 closed = rb_error_rhs(Vec3(eta), gains);
      worst = std::max(worst, (generic - VecX(closed)).cwiseAbs().maxCoeff());
    }
    rows.push_back(make_report("error-rhs-closed-form", 500, worst, 1e-6));
  }
  {
    Rng rng = row_rng();
    rows.push_back(check_manifold_tangency<Rotation>(model, design, grp, sample_xyu, 1000, rng));
  }
  {
    Rng rng = row_rng();
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const auto [g, z, x, y] = sample_zxy(rng);
      const VecX before = invariant_error(design, grp, z, x, y).eta;
      const VecX after =
          invariant_error(design, grp, grp.phi(g, z), grp.phi(g, x), grp.rho(g, y)).eta;
      worst = std::max(worst, (after - before).cwiseAbs().maxCoeff());
    }
    rows.push_back(make_report("eta-invariance", 1000, worst, 1e-11));
  }
  return rows;
}

}  // namespace invobs
