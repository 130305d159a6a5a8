#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <iomanip>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "invobs/so3.hpp"

namespace invobs {

using VecX = Eigen::VectorXd;

/// Moving frame is not defined at the given measured state.
struct FrameUndefined : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Point on the measured-state (or input) space: ordered vector blocks
/// followed by ordered rotation blocks. The unmeasured state space stays a
/// plain real vector.
struct Blocks {
  std::vector<VecX> vec;
  std::vector<Rotation> rot;
};

/// Tangent at a Blocks point. Rotation-block tangents are ambient matrices
/// Rdot with R^T Rdot skew (skew part is taken where roundoff breaks this).
struct BlocksTangent {
  std::vector<VecX> vec;
  std::vector<Mat3> rot;
};

inline BlocksTangent tangent_sub(const BlocksTangent& a, const BlocksTangent& b) {
  BlocksTangent out;
  out.vec.reserve(a.vec.size());
  out.rot.reserve(a.rot.size());
  for (std::size_t i = 0; i < a.vec.size(); ++i) out.vec.push_back(a.vec[i] - b.vec[i]);
  for (std::size_t i = 0; i < a.rot.size(); ++i) out.rot.push_back(a.rot[i] - b.rot[i]);
  return out;
}

inline double tangent_norm_inf(const BlocksTangent& t) {
  double m = 0.0;
  for (const auto& v : t.vec) {
    if (v.size() > 0) m = std::max(m, v.cwiseAbs().maxCoeff());
  }
  for (const auto& w : t.rot) m = std::max(m, w.cwiseAbs().maxCoeff());
  return m;
}

/// Body-frame angular velocity recovered from an ambient rotation tangent.
inline Vec3 rotation_rate_body(const Rotation& r, const Mat3& rdot) {
  const Mat3 m = r.matrix().transpose() * rdot;
  return vee(0.5 * (m - m.transpose()));
}

/// Curve point c(s) with c(0) = y and c'(0) = yd; rotation blocks move along
/// geodesics so the perturbed point stays on the manifold.
inline Blocks retract(const Blocks& y, const BlocksTangent& yd, double s) {
  Blocks out = y;
  for (std::size_t i = 0; i < y.vec.size(); ++i) out.vec[i] = y.vec[i] + s * yd.vec[i];
  for (std::size_t i = 0; i < y.rot.size(); ++i) {
    out.rot[i] = y.rot[i] * exp_so3(s * rotation_rate_body(y.rot[i], yd.rot[i]));
  }
  return out;
}

inline double blocks_scale(const Blocks& y) {
  double m = 1.0;
  for (const auto& v : y.vec) m = std::max(m, v.norm());
  return m;
}

inline double tangent_scale(const BlocksTangent& yd) {
  double m = 0.0;
  for (const auto& v : yd.vec) m = std::max(m, v.norm());
  for (const auto& w : yd.rot) m = std::max(m, w.norm());
  return m;
}

/// Directional derivative of a vector-valued map along the curve through y
/// with velocity yd, by central difference. Step keeps the perturbation near
/// 1e-6 of the point scale.
template <class F>
VecX central_difference_along(F&& value_at, const Blocks& y, const BlocksTangent& yd) {
  const double rate = tangent_scale(yd);
  if (rate == 0.0) {
    VecX at = value_at(y);
    return VecX::Zero(at.size());
  }
  const double s = 1e-6 * blocks_scale(y) / rate;
  const VecX plus = value_at(retract(y, yd, s));
  const VecX minus = value_at(retract(y, yd, -s));
  return (plus - minus) / (2.0 * s);
}

/// Group actions and structure. phi must be linear in its vector argument;
/// identity and composition must act as the identity / composed transforms
/// on all three actions.
template <class G>
struct TransformationGroup {
  std::function<VecX(const G&, const VecX&)> phi;
  std::function<Blocks(const G&, const Blocks&)> rho;
  std::function<Blocks(const G&, const Blocks&)> psi;
  std::function<BlocksTangent(const G&, const Blocks&, const BlocksTangent&)> tangent_rho;
  std::function<G(const G&, const G&)> group_compose;
  std::function<G(const G&)> group_inverse;
  std::function<G()> group_identity;
  std::function<double(const G&, const G&)> group_distance;
};

/// Split dynamics: xdot = f(x, y, u), ydot = h(x, y, u).
template <class G>
struct SystemModel {
  std::function<VecX(const VecX&, const Blocks&, const Blocks&)> f;
  std::function<BlocksTangent(const VecX&, const Blocks&, const Blocks&)> h;
  int dim_x = 0;
  int dim_y = 0;
  int dim_group = 0;
};

/// Observer ingredients: moving frame gamma (throws FrameUndefined where it
/// fails), tuning map ell, and optional analytic tangents. Empty tangent
/// callbacks fall back to central finite differences.
template <class G>
struct ObserverDesign {
  std::function<G(const Blocks&)> gamma;
  std::function<VecX(const Blocks&)> ell;
  std::function<VecX(const Blocks&, const BlocksTangent&)> tangent_beta;
  std::function<VecX(const Blocks&, const BlocksTangent&, const VecX&)> tangent_lambda;
};

struct InvariantError {
  VecX eta;
};

/// Observer map: beta(y) = phi(gamma(y)^-1, ell(rho(gamma(y), y))).
template <class G>
VecX beta(const ObserverDesign<G>& design, const TransformationGroup<G>& group,
          const Blocks& y) {
  const G frame = design.gamma(y);
  return group.phi(group.group_inverse(frame), design.ell(group.rho(frame, y)));
}

template <class G>
VecX tangent_beta_fd(const ObserverDesign<G>& design, const TransformationGroup<G>& group,
                     const Blocks& y, const BlocksTangent& yd) {
  return central_difference_along(
      [&](const Blocks& p) { return beta(design, group, p); }, y, yd);
}

/// T_y beta applied to yd; analytic when registered, finite-difference otherwise.
template <class G>
VecX tangent_beta_apply(const ObserverDesign<G>& design, const TransformationGroup<G>& group,
                        const Blocks& y, const BlocksTangent& yd) {
  if (design.tangent_beta) return design.tangent_beta(y, yd);
  return tangent_beta_fd(design, group, y, yd);
}

/// Pre-observer field: alpha(z, y, u) = f(z + beta(y), y, u) - T_y beta(h(z + beta(y), y, u)).
template <class G>
VecX alpha(const SystemModel<G>& model, const ObserverDesign<G>& design,
           const TransformationGroup<G>& group, const VecX& z, const Blocks& y,
           const Blocks& u) {
  const VecX xhat = z + beta(design, group, y);
  const BlocksTangent yd = model.h(xhat, y, u);
  return model.f(xhat, y, u) - tangent_beta_apply(design, group, y, yd);
}

/// State estimate: xhat = z + beta(y).
template <class G>
VecX estimate(const ObserverDesign<G>& design, const TransformationGroup<G>& group,
              const VecX& z, const Blocks& y) {
  return z + beta(design, group, y);
}

/// Invariant error coordinates:
/// eta = phi(gamma(y), z) + ell(rho(gamma(y), y)) - phi(gamma(y), x).
/// By linearity of phi this equals phi(gamma(y), z + beta(y) - x); eta = 0
/// exactly on the zero-error manifold z = x - beta(y).
template <class G>
InvariantError invariant_error(const ObserverDesign<G>& design,
                               const TransformationGroup<G>& group, const VecX& z,
                               const VecX& x, const Blocks& y) {
  const G frame = design.gamma(y);
  const Blocks normalized = group.rho(frame, y);
  return {group.phi(frame, z) + design.ell(normalized) - group.phi(frame, x)};
}

/// Tangent of lambda(y; xi) = phi(gamma(y), xi) in its y slot, along yd,
/// with xi held fixed. Always central finite differences.
template <class G>
VecX lambda_tangent_fd(const ObserverDesign<G>& design, const TransformationGroup<G>& group,
                       const Blocks& y, const BlocksTangent& yd, const VecX& xi) {
  return central_difference_along(
      [&](const Blocks& p) { return group.phi(design.gamma(p), xi); }, y, yd);
}

template <class G>
VecX lambda_tangent(const ObserverDesign<G>& design, const TransformationGroup<G>& group,
                    const Blocks& y, const BlocksTangent& yd, const VecX& xi) {
  if (design.tangent_lambda) return design.tangent_lambda(y, yd, xi);
  return lambda_tangent_fd(design, group, y, yd, xi);
}

/// Invariant error dynamics at moving-frame-normalized arguments (X, Y, U):
/// etadot = f(X+eta, Y, U) - f(X, Y, U)
///        - T_Y beta(h(X+eta, Y, U) - h(X, Y, U))
///        + T_(Y;eta) lambda(h(X, Y, U)).
template <class G>
VecX invariant_error_rhs(const SystemModel<G>& model, const ObserverDesign<G>& design,
                         const TransformationGroup<G>& group, const VecX& eta,
                         const VecX& X, const Blocks& Y, const Blocks& U) {
  const VecX f_err = model.f(X + eta, Y, U) - model.f(X, Y, U);
  const BlocksTangent h_at = model.h(X, Y, U);
  const BlocksTangent h_diff = tangent_sub(model.h(X + eta, Y, U), h_at);
  const VecX beta_term = tangent_beta_apply(design, group, Y, h_diff);
  const VecX lambda_term = lambda_tangent(design, group, Y, h_at, eta);
  return f_err - beta_term + lambda_term;
}

/// Moving-frame normalization of a system point.
struct NormalizedPoint {
  VecX x;
  Blocks y;
  Blocks u;
};

template <class G>
NormalizedPoint normalize_invariants(const ObserverDesign<G>& design,
                                     const TransformationGroup<G>& group, const VecX& x,
                                     const Blocks& y, const Blocks& u) {
  const G frame = design.gamma(y);
  return {group.phi(frame, x), group.rho(frame, y), group.psi(frame, u)};
}

/// One verification outcome: worst residual over the sampled instances.
struct CheckReport {
  std::string name;
  int samples = 0;
  double max_residual = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

inline CheckReport make_report(std::string name, int samples, double worst, double tol) {
  return {std::move(name), samples, worst, tol, worst <= tol};
}

inline std::string report_csv(const std::vector<CheckReport>& rows) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "check,samples,max_residual,tolerance,pass\n";
  for (const auto& r : rows) {
    os << r.name << ',' << r.samples << ',' << r.max_residual << ',' << r.tolerance
       << ',' << (r.pass ? "pass" : "fail") << '\n';
  }
  return os.str();
}

inline std::string report_text(const std::vector<CheckReport>& rows) {
  std::ostringstream os;
  for (const auto& r : rows) {
    os << (r.pass ? "[pass] " : "[FAIL] ") << std::left << std::setw(28) << r.name
       << " samples=" << std::setw(5) << r.samples << std::scientific
       << std::setprecision(3) << " max_residual=" << r.max_residual
       << " tol=" << r.tolerance << '\n';
    os.unsetf(std::ios::floatfield);
  }
  return os.str();
}

/// gamma(rho(g, y)) * g = gamma(y) over sampled (g, y).
template <class G>
CheckReport check_frame_equivariance(
    const ObserverDesign<G>& design, const TransformationGroup<G>& group,
    const std::function<std::pair<G, Blocks>(Rng&)>& sample, int n, Rng& rng,
    double tol = 1e-12) {
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto [g, y] = sample(rng);
    const G lhs = group.group_compose(design.gamma(group.rho(g, y)), g);
    worst = std::max(worst, group.group_distance(lhs, design.gamma(y)));
  }
  return make_report("frame-equivariance", n, worst, tol);
}

/// f and h commute with the group action:
/// phi(g, f(x,y,u)) = f(phi(g,x), rho(g,y), psi(g,u)) and
/// tangent_rho(g, y, h(x,y,u)) = h(phi(g,x), rho(g,y), psi(g,u)).
template <class G>
CheckReport check_system_invariance(
    const SystemModel<G>& model, const TransformationGroup<G>& group,
    const std::function<std::tuple<G, VecX, Blocks, Blocks>(Rng&)>& sample, int n,
    Rng& rng, double tol = 1e-11) {
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto [g, x, y, u] = sample(rng);
    const VecX xg = group.phi(g, x);
    const Blocks yg = group.rho(g, y);
    const Blocks ug = group.psi(g, u);
    const VecX f_res = group.phi(g, model.f(x, y, u)) - model.f(xg, yg, ug);
    const BlocksTangent h_res =
        tangent_sub(group.tangent_rho(g, y, model.h(x, y, u)), model.h(xg, yg, ug));
    worst = std::max(worst, f_res.cwiseAbs().maxCoeff());
    worst = std::max(worst, tangent_norm_inf(h_res));
  }
  return make_report("system-invariance", n, worst, tol);
}

/// beta(rho(g, y)) = phi(g, beta(y)) over sampled (g, y).
template <class G>
CheckReport check_beta_commutation(
    const ObserverDesign<G>& design, const TransformationGroup<G>& group,
    const std::function<std::pair<G, Blocks>(Rng&)>& sample, int n, Rng& rng,
    double tol = 1e-12) {
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto [g, y] = sample(rng);
    const VecX lhs = beta(design, group, group.rho(g, y));
    const VecX rhs = group.phi(g, beta(design, group, y));
    worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
  }
  return make_report("beta-commutation", n, worst, tol);
}

/// Tangent half of the commutation:
/// T_{rho(g,y)} beta (T_y rho_g (yd)) = phi(g, T_y beta (yd)).
/// force_fd evaluates the left tangent by finite differences even when an
/// analytic tangent is registered.
template <class G>
CheckReport check_beta_tangent_commutation(
    const ObserverDesign<G>& design, const TransformationGroup<G>& group,
    const std::function<std::tuple<G, Blocks, BlocksTangent>(Rng&)>& sample, int n,
    Rng& rng, double tol, bool force_fd) {
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto [g, y, yd] = sample(rng);
    const Blocks yg = group.rho(g, y);
    const BlocksTangent ydg = group.tangent_rho(g, y, yd);
    const VecX lhs = force_fd ? tangent_beta_fd(design, group, yg, ydg)
                              : tangent_beta_apply(design, group, yg, ydg);
    const VecX inner = force_fd ? tangent_beta_fd(design, group, y, yd)
                                : tangent_beta_apply(design, group, y, yd);
    const VecX rhs = group.phi(g, inner);
    worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
  }
  return make_report(force_fd ? "beta-tangent-fd" : "beta-tangent", n, worst, tol);
}

/// Both sides of the lambda tangent identity, each by central differences:
/// T_(y; phi(g^-1, zeta)) lambda (h(x,y,u))
///   = T_(rho(g,y); zeta) lambda (h(phi(g,x), rho(g,y), psi(g,u))).
template <class G>
CheckReport check_lambda_identity(
    const ObserverDesign<G>& design, const TransformationGroup<G>& group,
    const SystemModel<G>& model,
    const std::function<std::tuple<G, VecX, VecX, Blocks, Blocks>(Rng&)>& sample, int n,
    Rng& rng, double tol = 1e-6) {
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto [g, zeta, x, y, u] = sample(rng);
    const VecX xi = group.phi(group.group_inverse(g), zeta);
    const VecX lhs = lambda_tangent_fd(design, group, y, model.h(x, y, u), xi);
    const Blocks yg = group.rho(g, y);
    const BlocksTangent hg = model.h(group.phi(g, x), yg, group.psi(g, u));
    const VecX rhs = lambda_tangent_fd(design, group, yg, hg, zeta);
    worst = std::max(worst, (lhs - rhs).cwiseAbs().maxCoeff());
  }
  return make_report("lambda-identity", n, worst, tol);
}

/// On the zero-error manifold z = x - beta(y) the assembled derivative of
/// z - x + beta(y) vanishes identically:
/// alpha(z, y, u) - f(x, y, u) + T_y beta(h(x, y, u)) = 0.
template <class G>
CheckReport check_manifold_tangency(
    const SystemModel<G>& model, const ObserverDesign<G>& design,
    const TransformationGroup<G>& group,
    const std::function<std::tuple<VecX, Blocks, Blocks>(Rng&)>& sample, int n,
    Rng& rng, double tol = 1e-12) {
  double worst = 0.0;
  for (int i = 0; i < n; ++i) {
    const auto [x, y, u] = sample(rng);
    const VecX z = x - beta(design, group, y);
    const VecX residual = alpha(model, design, group, z, y, u) - model.f(x, y, u) +
                          tangent_beta_apply(design, group, y, model.h(x, y, u));
    worst = std::max(worst, residual.cwiseAbs().maxCoeff());
  }
  return make_report("zero-error-tangency", n, worst, tol);
}

}  // namespace invobs
