#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "invobs/framework.hpp"
#include "invobs/rigid_body.hpp"
#include "invobs/so3.hpp"

namespace invobs {

struct InvalidConfig : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct UnknownProfile : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct NonFinite : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EmptyWindow : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Measurement/input corruption intensities. Discrete per-sample variance is
/// PSD * sample_rate (band-limited white noise at that rate).
struct NoiseSpec {
  double psd_q = 5e-4;      // m^2/Hz
  double psd_R = 1e-7;      // 1/Hz
  double psd_omega = 1e-5;  // (rad/s)^2/Hz
  double psd_a = 2e-2;      // (m/s^2)^2/Hz
  double sample_rate = 1000.0;  // Hz

  void validate() const {
    if (!(psd_q >= 0.0 && psd_R >= 0.0 && psd_omega >= 0.0 && psd_a >= 0.0)) {
      throw InvalidConfig("noise PSDs must be nonnegative");
    }
    if (!(sample_rate > 0.0)) {
      throw InvalidConfig("noise sample rate must be positive");
    }
  }
};

enum class ProfileKind { level, sinusoid, doublet };

inline ProfileKind profile_from_string(const std::string& s) {
  if (s == "level") return ProfileKind::level;
  if (s == "sinusoid") return ProfileKind::sinusoid;
  if (s == "doublet") return ProfileKind::doublet;
  throw UnknownProfile("unknown input profile: " + s);
}

inline std::string to_string(ProfileKind k) {
  switch (k) {
    case ProfileKind::level: return "level";
    case ProfileKind::sinusoid: return "sinusoid";
    case ProfileKind::doublet: return "doublet";
  }
  throw UnknownProfile("unknown input profile enumerator");
}

/// Per-axis sinusoid parameters share one frequency and phase so a rotated
/// amplitude vector expresses the group-transformed profile exactly.
struct ProfileParams {
  Vec3 omega_amp = Vec3(0.5, 0.5, 0.5);  // rad/s
  double omega_freq_hz = 0.2;
  double omega_phase = 0.0;  // rad
  Vec3 accel_base = Vec3(0.0, 0.0, -kStandardGravity);  // m/s^2
  Vec3 accel_amp = Vec3(1.0, 1.0, 1.0);  // m/s^2
  double accel_freq_hz = 0.2;
  double accel_phase = 0.0;        // rad
  Vec3 doublet_axis = Vec3(0.0, 0.0, 1.0);
  double doublet_amp = 0.5;    // rad/s
  double doublet_start = 1.0;  // s
  double doublet_width = 1.0;  // s per lobe
};

/// Deterministic input signal. `level` and `doublet` hold specific force at
/// the gravity-cancelling value for the current attitude; segments of the
/// doublet are half-open [start, end).
inline RigidBodyInput input_profile(ProfileKind kind, const ProfileParams& p, double t,
                                    const Mat3& R, const Vec3& gravity) {
  RigidBodyInput u;
  switch (kind) {
    case ProfileKind::level: {
      u.omega = Vec3::Zero();
      u.a = -(R.transpose() * gravity);
      return u;
    }
    case ProfileKind::sinusoid: {
      const double sw = std::sin(2.0 * M_PI * p.omega_freq_hz * t + p.omega_phase);
      const double sa = std::sin(2.0 * M_PI * p.accel_freq_hz * t + p.accel_phase);
      u.omega = sw * p.omega_amp;
      u.a = p.accel_base + sa * p.accel_amp;
      return u;
    }
    case ProfileKind::doublet: {
      u.a = -(R.transpose() * gravity);
      if (t >= p.doublet_start && t < p.doublet_start + p.doublet_width) {
        u.omega = p.doublet_amp * p.doublet_axis;
      } else if (t >= p.doublet_start + p.doublet_width &&
                 t < p.doublet_start + 2.0 * p.doublet_width) {
        u.omega = -p.doublet_amp * p.doublet_axis;
      } else {
        u.omega = Vec3::Zero();
      }
      return u;
    }
  }
  throw UnknownProfile("unknown input profile enumerator");
}

struct SimConfig {
  double t_end = 10.0;
  double dt = 1e-3;
  Mat3 L = 10.0 * Mat3::Identity();
  Vec3 gravity = ned_gravity();
  Vec3 v0 = Vec3(20.0, 0.0, 0.0);
  Vec3 q0 = Vec3::Zero();
  Rotation R0;
  Vec3 xhat0 = Vec3::Zero();      // used unless z0 is set directly
  std::optional<Vec3> z0;
  ProfileKind profile = ProfileKind::sinusoid;
  ProfileParams params;
  std::optional<NoiseSpec> noise;  // nullopt = clean
  std::uint64_t seed = 1;
};

/// Steps per noise sample; validates that dt divides the noise interval.
inline long long noise_hold_steps(const SimConfig& cfg) {
  const double ratio = 1.0 / (cfg.noise->sample_rate * cfg.dt);
  const long long m = std::llround(ratio);
  if (m < 1 || std::abs(ratio - static_cast<double>(m)) > 1e-6) {
    throw InvalidConfig("noise sample interval must be an integer multiple of dt");
  }
  return m;
}

inline void validate(const SimConfig& cfg) {
  if (!(cfg.dt > 0.0)) throw InvalidConfig("dt must be positive");
  if (!(cfg.t_end >= cfg.dt)) throw InvalidConfig("t_end must be at least dt");
  if (!cfg.v0.allFinite() || !cfg.q0.allFinite() || !cfg.xhat0.allFinite()) {
    throw InvalidConfig("initial conditions must be finite");
  }
  if (cfg.noise) {
    cfg.noise->validate();
    noise_hold_steps(cfg);
  }
}

struct TrajectoryStep {
  double t = 0.0;
  Vec3 v = Vec3::Zero();
  Vec3 q = Vec3::Zero();
  Rotation R;
  Vec3 z = Vec3::Zero();
  Vec3 vhat = Vec3::Zero();
  Vec3 eta = Vec3::Zero();
  // Held measured signals, populated when noise is enabled.
  Vec3 q_meas = Vec3::Zero();
  Rotation R_meas;
  Vec3 omega_meas = Vec3::Zero();
  Vec3 a_meas = Vec3::Zero();
};

struct TrajectoryRecord {
  bool has_noise = false;
  std::vector<TrajectoryStep> steps;
};

/// One corrupted measurement/input sample. Draw order is fixed (q, R, omega,
/// a; x,y,z within each) so records are reproducible for a given stream.
inline std::pair<RigidBodyPose, RigidBodyInput> corrupt(const RigidBodyPose& y,
                                                        const RigidBodyInput& u,
                                                        const NoiseSpec& spec, Rng& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  const auto draw3 = [&](double psd) {
    const double sigma = std::sqrt(psd * spec.sample_rate);
    return Vec3(sigma * n(rng), sigma * n(rng), sigma * n(rng));
  };
  RigidBodyPose ym;
  RigidBodyInput um;
  ym.q = y.q + draw3(spec.psd_q);
  ym.R_IB = y.R_IB * exp_so3(draw3(spec.psd_R));
  um.omega = u.omega + draw3(spec.psd_omega);
  um.a = u.a + draw3(spec.psd_a);
  return {ym, um};
}

namespace detail {

// Integration state with the attitude ambient; stages evaluate plain matrix
// algebra and the step end projects back to the manifold.
struct AmbientState {
  Vec3 v;
  Vec3 q;
  Mat3 R;
  Vec3 z;
};

struct AmbientRates {
  Vec3 v;
  Vec3 q;
  Mat3 R;
  Vec3 z;
};

inline AmbientState advance(const AmbientState& s, const AmbientRates& k, double h) {
  return {s.v + h * k.v, s.q + h * k.q, s.R + h * k.R, s.z + h * k.z};
}

// Pre-observer field extended off the manifold by reading R^T as the plain
// transpose; coincides with the framework assembly for orthonormal R.
inline Vec3 alpha_ambient(const Vec3& z, const Vec3& q, const Mat3& R,
                          const RigidBodyInput& u, const ObserverGains& g) {
  const Mat3 Rt = R.transpose();
  const Vec3 b = Rt * (g.L * q);
  const Vec3 xhat = z + b;
  return xhat.cross(u.omega) + Rt * g.gravity + u.a + hat(u.omega) * b -
         Rt * g.L * R * xhat;
}

}  // namespace detail

/// One classical Runge-Kutta step of the coupled plant/observer system.
/// Inputs are sampled per stage time from `profile`. With `held`, the
/// observer consumes the fixed measured pair instead of the true signals
/// (zero-order hold); the plant always integrates truth.
struct HeldSignals {
  RigidBodyPose y;
  RigidBodyInput u;
};

inline void step(RigidBodyState& state, Vec3& z, ProfileKind profile,
                 const ProfileParams& params, const ObserverGains& gains, double t,
                 double dt, const HeldSignals* held = nullptr) {
  const auto rates = [&](const detail::AmbientState& s,
                         double tau) -> detail::AmbientRates {
    const RigidBodyInput u = input_profile(profile, params, tau, s.R, gains.gravity);
    detail::AmbientRates k;
    k.v = s.v.cross(u.omega) + s.R.transpose() * gains.gravity + u.a;
    k.q = s.R * s.v;
    k.R = s.R * hat(u.omega);
    if (held != nullptr) {
      k.z = rb_alpha_closed_form(s.z, held->y, held->u, gains);
    } else {
      k.z = detail::alpha_ambient(s.z, s.q, s.R, u, gains);
    }
    return k;
  };

  const detail::AmbientState s0{state.v, state.q, state.R_IB.matrix(), z};
  const detail::AmbientRates k1 = rates(s0, t);
  const detail::AmbientRates k2 = rates(detail::advance(s0, k1, 0.5 * dt), t + 0.5 * dt);
  const detail::AmbientRates k3 = rates(detail::advance(s0, k2, 0.5 * dt), t + 0.5 * dt);
  const detail::AmbientRates k4 = rates(detail::advance(s0, k3, dt), t + dt);

  const double w = dt / 6.0;
  state.v += w * (k1.v + 2.0 * k2.v + 2.0 * k3.v + k4.v);
  state.q += w * (k1.q + 2.0 * k2.q + 2.0 * k3.q + k4.q);
  const Mat3 R_ambient =
      state.R_IB.matrix() + w * (k1.R + 2.0 * k2.R + 2.0 * k3.R + k4.R);
  z += w * (k1.z + 2.0 * k2.z + 2.0 * k3.z + k4.z);

  if (!state.v.allFinite() || !state.q.allFinite() || !R_ambient.allFinite() ||
      !z.allFinite()) {
    throw NonFinite("state left the finite range at t = " + std::to_string(t + dt));
  }
  state.R_IB = project_to_so3(R_ambient);
}

/// Couple plant and observer over [0, t_end]. Records round(t_end/dt) + 1
/// rows, one before each step and one final. When noise is enabled the
/// observer consumes corrupted signals held constant over each noise sample
/// interval; eta is always computed from the true state.
inline TrajectoryRecord simulate(const SimConfig& cfg) {
  validate(cfg);
  const ObserverGains gains(cfg.L, cfg.gravity);
  const auto grp = so3_group();
  const auto design = rb_observer_design(gains);

  const long long n_steps = std::llround(cfg.t_end / cfg.dt);
  const long long hold = cfg.noise ? noise_hold_steps(cfg) : 0;

  RigidBodyState state{cfg.v0, cfg.q0, cfg.R0};
  Rng rng(cfg.seed);

  HeldSignals held;
  const auto true_pose = [&]() -> RigidBodyPose { return {state.q, state.R_IB}; };
  const auto input_at = [&](double t) {
    return input_profile(cfg.profile, cfg.params, t, state.R_IB.matrix(), cfg.gravity);
  };

  if (cfg.noise) {
    const auto [ym, um] = corrupt(true_pose(), input_at(0.0), *cfg.noise, rng);
    held = {ym, um};
  }

  // The observer state starts from xhat0 against the measurements it will
  // actually consume, unless z0 is pinned directly.
  Vec3 z;
  if (cfg.z0) {
    z = *cfg.z0;
  } else {
    const Blocks y0 = to_blocks(cfg.noise ? held.y : true_pose());
    z = cfg.xhat0 - Vec3(beta(design, grp, y0));
  }

  TrajectoryRecord rec;
  rec.has_noise = cfg.noise.has_value();
  rec.steps.reserve(static_cast<std::size_t>(n_steps) + 1);

  for (long long i = 0; i <= n_steps; ++i) {
    const double t = static_cast<double>(i) * cfg.dt;
    if (cfg.noise && i > 0 && i % hold == 0) {
      const auto [ym, um] = corrupt(true_pose(), input_at(t), *cfg.noise, rng);
      held = {ym, um};
    }

    TrajectoryStep row;
    row.t = t;
    row.v = state.v;
    row.q = state.q;
    row.R = state.R_IB;
    row.z = z;
    const Blocks y_obs = to_blocks(cfg.noise ? held.y : true_pose());
    row.vhat = Vec3(estimate(design, grp, VecX(z), y_obs));
    row.eta = Vec3(invariant_error(design, grp, VecX(z), VecX(state.v),
                                   to_blocks(true_pose()))
                       .eta);
    if (cfg.noise) {
      row.q_meas = held.y.q;
      row.R_meas = held.y.R_IB;
      row.omega_meas = held.u.omega;
      row.a_meas = held.u.a;
    }
    rec.steps.push_back(row);

    if (i < n_steps) {
      step(state, z, cfg.profile, cfg.params, gains, t, cfg.dt,
           cfg.noise ? &held : nullptr);
    }
  }
  return rec;
}

/// The same scenario as seen by a group-shifted reference: initial conditions
/// through the actions, profile amplitudes rotated. Estimates of the
/// transformed run equal the rotated estimates of the original.
inline SimConfig transform_scenario(const SimConfig& cfg, const Rotation& g) {
  SimConfig out = cfg;
  const Mat3 Rg = g.matrix();
  out.v0 = Rg * cfg.v0;
  out.R0 = cfg.R0 * g.inverse();
  out.xhat0 = Rg * cfg.xhat0;
  if (cfg.z0) out.z0 = Vec3(Rg * (*cfg.z0));
  out.params.omega_amp = Rg * cfg.params.omega_amp;
  out.params.accel_base = Rg * cfg.params.accel_base;
  out.params.accel_amp = Rg * cfg.params.accel_amp;
  out.params.doublet_axis = Rg * cfg.params.doublet_axis;
  return out;
}

inline void write_csv(const TrajectoryRecord& rec, std::ostream& os) {
  os << std::setprecision(17);
  os << "t,v_x,v_y,v_z,q_x,q_y,q_z,R_11,R_12,R_13,R_21,R_22,R_23,R_31,R_32,R_33,"
        "z_x,z_y,z_z,vhat_x,vhat_y,vhat_z,eta_x,eta_y,eta_z";
  if (rec.has_noise) {
    os << ",q_meas_x,q_meas_y,q_meas_z,R_meas_11,R_meas_12,R_meas_13,R_meas_21,"
          "R_meas_22,R_meas_23,R_meas_31,R_meas_32,R_meas_33,omega_meas_x,"
          "omega_meas_y,omega_meas_z,a_meas_x,a_meas_y,a_meas_z";
  }
  os << '\n';
  const auto put3 = [&os](const Vec3& v) { os << ',' << v.x() << ',' << v.y() << ',' << v.z(); };
  const auto put9 = [&os](const Mat3& m) {
    for (int r = 0; r < 3; ++r) {
      for (int c = 0; c < 3; ++c) os << ',' << m(r, c);
    }
  };
  for (const auto& s : rec.steps) {
    os << s.t;
    put3(s.v);
    put3(s.q);
    put9(s.R.matrix());
    put3(s.z);
    put3(s.vhat);
    put3(s.eta);
    if (rec.has_noise) {
      put3(s.q_meas);
      put9(s.R_meas.matrix());
      put3(s.omega_meas);
      put3(s.a_meas);
    }
    os << '\n';
  }
}

inline std::string to_csv(const TrajectoryRecord& rec) {
  std::ostringstream os;
  write_csv(rec, os);
  return os.str();
}

/// Ordinary least squares y = intercept + slope * t, with the slope's
/// standard error from the residual variance.
struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_stderr = 0.0;
};

inline LinearFit linear_fit(const std::vector<double>& t, const std::vector<double>& y) {
  const std::size_t n = t.size();
  if (n < 2 || y.size() != n) throw EmptyWindow("linear fit needs at least two points");
  double tm = 0.0, ym = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    tm += t[i];
    ym += y[i];
  }
  tm /= static_cast<double>(n);
  ym /= static_cast<double>(n);
  double stt = 0.0, sty = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    stt += (t[i] - tm) * (t[i] - tm);
    sty += (t[i] - tm) * (y[i] - ym);
  }
  if (stt == 0.0) throw EmptyWindow("linear fit needs spread in t");
  LinearFit fit;
  fit.slope = sty / stt;
  fit.intercept = ym - fit.slope * tm;
  if (n > 2) {
    double ss_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double r = y[i] - (fit.intercept + fit.slope * t[i]);
      ss_res += r * r;
    }
    fit.slope_stderr = std::sqrt(ss_res / (static_cast<double>(n) - 2.0) / stt);
  }
  return fit;
}

/// Post-run summary: per-axis estimate RMSE over [window_start, end], the
/// fitted exponential decay rate of |eta| (least squares on log|eta| down to
/// rel_floor of the initial error), and the worst |eta| in the window.
struct Metrics {
  Vec3 rmse = Vec3::Zero();
  double decay_rate = std::numeric_limits<double>::quiet_NaN();
  double max_eta_post_transient = 0.0;
};

inline Metrics metrics(const TrajectoryRecord& rec, double window_start = 1.0,
                       double rel_floor = 1e-6) {
  if (rec.steps.empty()) throw EmptyWindow("empty trajectory record");

  Metrics out;
  Vec3 sq = Vec3::Zero();
  long long count = 0;
  for (const auto& s : rec.steps) {
    if (s.t < window_start) continue;
    const Vec3 e = s.vhat - s.v;
    sq += e.cwiseProduct(e);
    out.max_eta_post_transient = std::max(out.max_eta_post_transient, s.eta.norm());
    ++count;
  }
  if (count == 0) throw EmptyWindow("no samples at or after the metrics window start");
  out.rmse = (sq / static_cast<double>(count)).cwiseSqrt();

  const double eta0 = rec.steps.front().eta.norm();
  if (eta0 > 0.0) {
    std::vector<double> ts, logs;
    for (const auto& s : rec.steps) {
      const double e = s.eta.norm();
      if (e < rel_floor * eta0) break;
      ts.push_back(s.t);
      logs.push_back(std::log(e));
    }
    if (ts.size() >= 2) out.decay_rate = -linear_fit(ts, logs).slope;
  }
  return out;
}

}  // namespace invobs
