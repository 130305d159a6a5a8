// Acceptance gate: one line per criterion, nonzero exit on any failure.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <functional>
#include <string>
#include <tuple>
#include <vector>

#include <invobs/rigid_body.hpp>
#include <invobs/simulation.hpp>

using namespace invobs;

namespace {

constexpr std::uint64_t kSeed = 20240901;

struct Gate {
  bool all_pass = true;
  int index = 0;

  void line(const std::string& name, bool pass, const std::string& detail) {
    ++index;
    std::printf("AC%-2d %-28s %s  (%s)\n", index, name.c_str(),
                pass ? "PASS" : "FAIL", detail.c_str());
    all_pass = all_pass && pass;
  }

  void run(const std::string& name,
           const std::function<std::pair<bool, std::string>()>& body) {
    try {
      const auto [pass, detail] = body();
      line(name, pass, detail);
    } catch (const std::exception& e) {
      line(name, false, std::string("exception: ") + e.what());
    }
  }
};

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3g", x);
  return buf;
}

double wall_seconds(const std::function<void()>& fn) {
  const auto t0 = std::chrono::steady_clock::now();
  fn();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double>(t1 - t0).count();
}

// Rotation vector of a rotation matrix; exact for angles below pi.
Vec3 log_rotation(const Mat3& r) {
  const double c = std::min(1.0, std::max(-1.0, 0.5 * (r.trace() - 1.0)));
  const double theta = std::acos(c);
  const Vec3 w = vee(0.5 * (r - r.transpose()));  // sin(theta) * axis
  if (theta < 1e-8) return w;
  return (theta / std::sin(theta)) * w;
}

}  // namespace

int main() {
  Gate gate;
  const ObserverGains gains(10.0 * Mat3::Identity(), ned_gravity());
  const TransformationGroup<Rotation> grp = so3_group();
  const SystemModel<Rotation> model = rb_system_model(gains);
  const ObserverDesign<Rotation> design = rb_observer_design(gains);

  // 1: reference scenario decays exactly at the gain rate.
  gate.run("closed-form-decay", [&]() {
    SimConfig cfg;
    cfg.dt = 1e-4;
    cfg.t_end = 1.0;
    TrajectoryRecord rec;
    const double secs = wall_seconds([&]() { rec = simulate(cfg); });
    const double eta0 = rec.steps.front().eta.norm();
    double worst = 0.0;
    for (const auto& s : rec.steps) {
      const Vec3 ideal = std::exp(-10.0 * s.t) * rec.steps.front().eta;
      worst = std::max(worst, (s.eta - ideal).norm() / eta0);
    }
    const bool pass = worst <= 1e-6 && secs <= 5.0;
    return std::make_pair(pass, "max_rel_dev=" + fmt(worst) + " tol=1e-6, runtime=" +
                                    fmt(secs) + "s limit=5s");
  });

  // 2: moving frame equivariance.
  gate.run("frame-equivariance", [&]() {
    Rng rng(mix_seed(kSeed, 2));
    const auto r = check_frame_equivariance<Rotation>(
        design, grp,
        [](Rng& g) {
          return std::make_pair(random_rotation(g), sample_pose_blocks(g));
        },
        1000, rng, 1e-12);
    return std::make_pair(r.pass, "max_residual=" + fmt(r.max_residual) +
                                      " tol=1e-12, n=1000");
  });

  // 3: dynamics and output map commute with the group action.
  gate.run("system-invariance", [&]() {
    Rng rng(mix_seed(kSeed, 3));
    const auto r = check_system_invariance<Rotation>(
        model, grp,
        [](Rng& g) {
          return std::make_tuple(random_rotation(g), VecX(sample_vec3(g)),
                                 sample_pose_blocks(g), sample_input_blocks(g));
        },
        1000, rng, 1e-11);
    return std::make_pair(r.pass, "max_residual=" + fmt(r.max_residual) +
                                      " tol=1e-11, n=1000");
  });

  // 4: observer map commutes, pointwise and on tangents.
  gate.run("beta-commutation", [&]() {
    const auto sample_gy = [](Rng& g) {
      return std::make_pair(random_rotation(g), sample_pose_blocks(g));
    };
    const auto sample_gyyd = [](Rng& g) {
      const Rotation rot = random_rotation(g);
      const Blocks y = sample_pose_blocks(g);
      const BlocksTangent yd = sample_pose_tangent(g, y);
      return std::make_tuple(rot, y, yd);
    };
    Rng rng_a(mix_seed(kSeed, 4));
    const auto point =
        check_beta_commutation<Rotation>(design, grp, sample_gy, 1000, rng_a, 1e-12);
    Rng rng_b(mix_seed(kSeed, 40));
    const auto tangent = check_beta_tangent_commutation<Rotation>(
        design, grp, sample_gyyd, 1000, rng_b, 1e-6, true);
    return std::make_pair(point.pass && tangent.pass,
                          "point=" + fmt(point.max_residual) +
                              " tol=1e-12; tangent_fd=" + fmt(tangent.max_residual) +
                              " tol=1e-6; n=1000 each");
  });

  // 5: generic pre-observer field equals the closed-form expression.
  gate.run("alpha-cross-check", [&]() {
    Rng rng(mix_seed(kSeed, 5));
    double worst = 0.0;
    for (int i = 0; i < 1000; ++i) {
      const VecX z = VecX(sample_vec3(rng));
      const Blocks y = sample_pose_blocks(rng);
      const Blocks u = sample_input_blocks(rng);
      const VecX generic = alpha(model, design, grp, z, y, u);
      const Vec3 closed =
          rb_alpha_closed_form(Vec3(z), pose_from_blocks(y), input_from_blocks(u), gains);
      worst = std::max(worst, (generic - VecX(closed)).cwiseAbs().maxCoeff());
    }
    return std::make_pair(worst <= 1e-11,
                          "max_diff=" + fmt(worst) + " tol=1e-11, n=1000");
  });

  // 6: zero-error manifold is positively invariant.
  gate.run("zero-error-manifold", [&]() {
    SimConfig cfg;
    cfg.dt = 1e-4;
    cfg.t_end = 10.0;
    const Blocks y0 = to_blocks(RigidBodyPose{cfg.q0, cfg.R0});
    cfg.z0 = Vec3(cfg.v0 - Vec3(beta(design, grp, y0)));
    const TrajectoryRecord rec = simulate(cfg);
    double worst = 0.0;
    for (const auto& s : rec.steps) worst = std::max(worst, s.eta.norm());
    return std::make_pair(worst <= 1e-9,
                          "max_eta=" + fmt(worst) + " tol=1e-9, 10s horizon");
  });

  // 7: generic invariant error dynamics reduce to the linear law.
  gate.run("error-dynamics-linear", [&]() {
    ObserverDesign<Rotation> design_fd = design;
    design_fd.tangent_beta = nullptr;
    design_fd.tangent_lambda = nullptr;
    Rng rng(mix_seed(kSeed, 7));
    double worst = 0.0;
    for (int i = 0; i < 500; ++i) {
      const VecX eta = VecX(sample_vec3(rng));
      const VecX x = VecX(sample_vec3(rng));
      const Blocks y = sample_pose_blocks(rng);
      const Blocks u = sample_input_blocks(rng);
      const NormalizedPoint p = normalize_invariants(design, grp, x, y, u);
      const VecX generic = invariant_error_rhs(model, design_fd, grp, eta, p.x, p.y, p.u);
      const Vec3 closed = rb_error_rhs(Vec3(eta), gains);
      worst = std::max(worst, (generic - VecX(closed)).cwiseAbs().maxCoeff());
    }
    return std::make_pair(worst <= 1e-6,
                          "max_diff=" + fmt(worst) + " tol=1e-6, n=500, fd tangents");
  });

  // 8: estimates transform with the group over whole trajectories.
  gate.run("end-to-end-invariance", [&]() {
    SimConfig cfg;
    const TrajectoryRecord base = simulate(cfg);
    Rng rng(mix_seed(kSeed, 8));
    double worst = 0.0;
    for (int trial = 0; trial < 10; ++trial) {
      const Rotation g = random_rotation(rng);
      const Mat3 Rg = g.matrix();
      const TrajectoryRecord moved = simulate(transform_scenario(cfg, g));
      if (moved.steps.size() != base.steps.size()) {
        return std::make_pair(false, std::string("row count mismatch"));
      }
      for (std::size_t i = 0; i < base.steps.size(); ++i) {
        worst = std::max(worst,
                         (moved.steps[i].vhat - Rg * base.steps[i].vhat).norm());
      }
    }
    return std::make_pair(worst <= 1e-8,
                          "max_dev=" + fmt(worst) + " tol=1e-8, 10 shifts");
  });

  // 9: noise calibration and bounded noisy tracking.
  gate.run("noise-statistics", [&]() {
    const NoiseSpec spec;
    Rng rng(mix_seed(kSeed, 9));
    const RigidBodyPose y{Vec3::Zero(), Rotation()};
    const RigidBodyInput u;
    const int calls = 333334;  // > 1e6 scalar draws per channel
    Eigen::Matrix<double, 4, 1> sum = Eigen::Matrix<double, 4, 1>::Zero();
    Eigen::Matrix<double, 4, 1> sum_sq = Eigen::Matrix<double, 4, 1>::Zero();
    for (int i = 0; i < calls; ++i) {
      const auto [ym, um] = corrupt(y, u, spec, rng);
      const Vec3 rot_noise = log_rotation(ym.R_IB.matrix());
      for (int k = 0; k < 3; ++k) {
        sum(0) += ym.q[k];
        sum_sq(0) += ym.q[k] * ym.q[k];
        sum(1) += rot_noise[k];
        sum_sq(1) += rot_noise[k] * rot_noise[k];
        sum(2) += um.omega[k];
        sum_sq(2) += um.omega[k] * um.omega[k];
        sum(3) += um.a[k];
        sum_sq(3) += um.a[k] * um.a[k];
      }
    }
    const double n = 3.0 * calls;
    const Eigen::Matrix<double, 4, 1> expected{
        spec.psd_q * spec.sample_rate, spec.psd_R * spec.sample_rate,
        spec.psd_omega * spec.sample_rate, spec.psd_a * spec.sample_rate};
    double worst_rel = 0.0;
    for (int c = 0; c < 4; ++c) {
      const double mean = sum(c) / n;
      const double var = sum_sq(c) / n - mean * mean;
      worst_rel = std::max(worst_rel, std::abs(var - expected(c)) / expected(c));
    }

    // Bounded 60 s maneuver: steady coordinated turn (constant body-frame
    // rate and specific force), so the path is a circle, position stays in a
    // fixed region, and the noise floor has a stationary level to hold.
    SimConfig cfg;
    cfg.t_end = 60.0;
    cfg.noise = spec;
    const double turn_rate = 0.5;  // rad/s
    cfg.params.omega_amp = Vec3(0.0, 0.0, turn_rate);
    cfg.params.omega_freq_hz = 0.0;
    cfg.params.omega_phase = std::acos(0.0);  // sin == 1: constant rate
    cfg.params.accel_amp = Vec3::Zero();
    cfg.params.accel_base =
        Vec3(0.0, turn_rate * cfg.v0.x(), -kStandardGravity);  // centripetal
    const TrajectoryRecord rec = simulate(cfg);
    double worst_err = 0.0;
    for (const auto& s : rec.steps) {
      if (s.t >= 30.0) worst_err = std::max(worst_err, (s.vhat - s.v).norm());
    }
    std::vector<double> bin_t, bin_e;
    double acc = 0.0;
    int count = 0;
    int bin = 0;
    for (const auto& s : rec.steps) {
      if (s.t < 30.0) continue;
      acc += (s.vhat - s.v).norm();
      ++count;
      if (s.t >= 30.0 + bin + 1.0 - 0.5 * cfg.dt) {
        bin_t.push_back(30.0 + bin + 0.5);
        bin_e.push_back(acc / count);
        acc = 0.0;
        count = 0;
        ++bin;
      }
    }
    const LinearFit fit = linear_fit(bin_t, bin_e);
    const bool no_trend = fit.slope <= 3.0 * fit.slope_stderr;
    const bool bounded = worst_err <= 100.0;  // divergence sentinel
    const bool calibrated = worst_rel <= 0.01;
    return std::make_pair(calibrated && no_trend && bounded,
                          "worst_var_rel_err=" + fmt(worst_rel) +
                              " tol=0.01; slope=" + fmt(fit.slope) + " stderr=" +
                              fmt(fit.slope_stderr) + " max_err=" + fmt(worst_err) +
                              " over final 30s");
  });

  // 10: fitted decay tracks the gain across a sweep.
  gate.run("gain-sweep-decay", [&]() {
    double worst_rel = 0.0;
    std::string rates;
    for (const double k : {1.0, 5.0, 10.0, 20.0}) {
      SimConfig cfg;
      cfg.L = k * Mat3::Identity();
      const Metrics m = metrics(simulate(cfg));
      worst_rel = std::max(worst_rel, std::abs(m.decay_rate - k) / k);
      if (!rates.empty()) rates += "/";
      rates += fmt(m.decay_rate);
    }
    return std::make_pair(worst_rel <= 0.01, "rates=" + rates +
                                                 " worst_rel_err=" + fmt(worst_rel) +
                                                 " tol=0.01");
  });

  std::printf("%s: %d criteria\n", gate.all_pass ? "ALL PASS" : "FAILURES PRESENT",
              gate.index);
  return gate.all_pass ? 0 : 1;
}
