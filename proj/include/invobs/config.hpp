#pragma once

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <invobs/simulation.hpp>

namespace invobs {

struct MetricsConfig {
  double window_start = 1.0;
  double decay_floor_rel = 1e-6;
};

struct SweepConfig {
  std::vector<double> l_scales = {1.0, 5.0, 10.0, 20.0};
  std::vector<double> noise_scales = {1.0};
};

/// Full run description. Defaults reproduce the clean reference scenario,
/// so an empty config file is a valid one.
struct AppConfig {
  SimConfig sim;
  std::string noise_mode = "off";  // off | paper | custom
  NoiseSpec noise;                 // consulted only in custom mode
  MetricsConfig metrics;
  SweepConfig sweep;
};

/// Applies the noise mode to sim.noise. Idempotent; paper mode pins the
/// stock intensities regardless of any psd_* keys in the file.
inline void resolve_noise(AppConfig& cfg) {
  if (cfg.noise_mode == "off") {
    cfg.sim.noise.reset();
  } else if (cfg.noise_mode == "paper") {
    cfg.sim.noise = NoiseSpec{};
  } else if (cfg.noise_mode == "custom") {
    cfg.sim.noise = cfg.noise;
  } else {
    throw InvalidConfig("noise mode must be off, paper, or custom; got '" +
                        cfg.noise_mode + "'");
  }
}

namespace detail {

inline std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

inline std::vector<double> parse_numbers(const std::string& value,
                                         const std::string& where) {
  std::vector<double> out;
  std::istringstream is(value);
  std::string tok;
  while (is >> tok) {
    std::size_t used = 0;
    double x = 0.0;
    try {
      x = std::stod(tok, &used);
    } catch (const std::exception&) {
      throw InvalidConfig(where + ": '" + tok + "' is not a number");
    }
    if (used != tok.size()) {
      throw InvalidConfig(where + ": '" + tok + "' is not a number");
    }
    out.push_back(x);
  }
  if (out.empty()) throw InvalidConfig(where + ": empty value");
  return out;
}

inline double parse_scalar(const std::string& value, const std::string& where) {
  const auto xs = parse_numbers(value, where);
  if (xs.size() != 1) throw InvalidConfig(where + ": expected one number");
  return xs[0];
}

inline Vec3 parse_vec3(const std::string& value, const std::string& where) {
  const auto xs = parse_numbers(value, where);
  if (xs.size() != 3) throw InvalidConfig(where + ": expected three numbers");
  return Vec3(xs[0], xs[1], xs[2]);
}

inline Mat3 parse_mat3_rows(const std::vector<double>& xs) {
  Mat3 m;
  m << xs[0], xs[1], xs[2], xs[3], xs[4], xs[5], xs[6], xs[7], xs[8];
  return m;
}

inline std::uint64_t parse_seed(const std::string& value, const std::string& where) {
  const std::string v = trim(value);
  if (v.empty() || v.find_first_not_of("0123456789") != std::string::npos) {
    throw InvalidConfig(where + ": seed must be a non-negative integer");
  }
  try {
    return std::stoull(v);
  } catch (const std::exception&) {
    throw InvalidConfig(where + ": seed out of range");
  }
}

inline std::string format_double(double x) {
  std::ostringstream os;
  os << std::setprecision(17) << x;
  return os.str();
}

inline std::string format_vec3(const Vec3& v) {
  return format_double(v.x()) + " " + format_double(v.y()) + " " +
         format_double(v.z());
}

inline std::string format_numbers(const std::vector<double>& xs) {
  std::string out;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (i) out += " ";
    out += format_double(xs[i]);
  }
  return out;
}

inline std::string format_mat3_rows(const Mat3& m) {
  std::vector<double> xs;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) xs.push_back(m(r, c));
  return format_numbers(xs);
}

}  // namespace detail

/// Parses the flat sectioned key = value format. Unknown sections, unknown
/// keys, and repeated keys are errors; every key is optional.
inline AppConfig parse_config_text(const std::string& text) {
  using detail::trim;
  AppConfig cfg;
  std::istringstream is(text);
  std::string raw;
  std::string section;
  std::set<std::string> seen;
  int line_no = 0;

  while (std::getline(is, raw)) {
    ++line_no;
    const std::string line = trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;

    const std::string where = "line " + std::to_string(line_no);
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) {
        throw InvalidConfig(where + ": malformed section header");
      }
      section = trim(line.substr(1, line.size() - 2));
      static const std::set<std::string> known = {
          "plant", "observer", "sim", "profile", "noise", "metrics", "sweep"};
      if (!known.count(section)) {
        throw InvalidConfig(where + ": unknown section [" + section + "]");
      }
      continue;
    }

    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw InvalidConfig(where + ": expected key = value");
    }
    if (section.empty()) {
      throw InvalidConfig(where + ": key before any section header");
    }
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const std::string id = section + "." + key;
    const std::string ctx = where + " (" + id + ")";
    if (!seen.insert(id).second) {
      throw InvalidConfig(ctx + ": repeated key");
    }
    if (value.empty()) throw InvalidConfig(ctx + ": empty value");

    using detail::parse_numbers;
    using detail::parse_scalar;
    using detail::parse_vec3;

    if (section == "plant") {
      if (key == "v0") {
        cfg.sim.v0 = parse_vec3(value, ctx);
      } else if (key == "q0") {
        cfg.sim.q0 = parse_vec3(value, ctx);
      } else if (key == "R0") {
        if (value == "identity") {
          cfg.sim.R0 = Rotation();
        } else {
          const auto xs = parse_numbers(value, ctx);
          if (xs.size() != 9) {
            throw InvalidConfig(ctx + ": expected 'identity' or nine numbers");
          }
          const Mat3 m = detail::parse_mat3_rows(xs);
          if (!m.allFinite() || orthonormality_error(m) > 1e-6) {
            throw InvalidConfig(ctx + ": matrix is not close to a rotation");
          }
          cfg.sim.R0 = project_to_so3(m);
        }
      } else if (key == "gravity") {
        cfg.sim.gravity = parse_vec3(value, ctx);
      } else {
        throw InvalidConfig(ctx + ": unknown key");
      }
    } else if (section == "observer") {
      if (key == "L") {
        const auto xs = parse_numbers(value, ctx);
        if (xs.size() == 1) {
          cfg.sim.L = xs[0] * Mat3::Identity();
        } else if (xs.size() == 9) {
          cfg.sim.L = detail::parse_mat3_rows(xs);
        } else {
          throw InvalidConfig(ctx + ": expected one scalar or nine numbers");
        }
      } else if (key == "xhat0") {
        cfg.sim.xhat0 = parse_vec3(value, ctx);
      } else if (key == "z0") {
        if (value == "auto") {
          cfg.sim.z0.reset();
        } else {
          cfg.sim.z0 = parse_vec3(value, ctx);
        }
      } else {
        throw InvalidConfig(ctx + ": unknown key");
      }
    } else if (section == "sim") {
      if (key == "t_end") {
        cfg.sim.t_end = parse_scalar(value, ctx);
      } else if (key == "dt") {
        cfg.sim.dt = parse_scalar(value, ctx);
      } else if (key == "seed") {
        cfg.sim.seed = detail::parse_seed(value, ctx);
      } else {
        throw InvalidConfig(ctx + ": unknown key");
      }
    } else if (section == "profile") {
      ProfileParams& p = cfg.sim.params;
      if (key == "kind") {
        try {
          cfg.sim.profile = profile_from_string(value);
        } catch (const UnknownProfile& e) {
          throw InvalidConfig(ctx + ": " + e.what());
        }
      } else if (key == "omega_amp") {
        p.omega_amp = parse_vec3(value, ctx);
      } else if (key == "omega_freq_hz") {
        p.omega_freq_hz = parse_scalar(value, ctx);
      } else if (key == "omega_phase") {
        p.omega_phase = parse_scalar(value, ctx);
      } else if (key == "accel_base") {
        p.accel_base = parse_vec3(value, ctx);
      } else if (key == "accel_amp") {
        p.accel_amp = parse_vec3(value, ctx);
      } else if (key == "accel_freq_hz") {
        p.accel_freq_hz = parse_scalar(value, ctx);
      } else if (key == "accel_phase") {
        p.accel_phase = parse_scalar(value, ctx);
      } else if (key == "doublet_axis") {
        p.doublet_axis = parse_vec3(value, ctx);
      } else if (key == "doublet_amp") {
        p.doublet_amp = parse_scalar(value, ctx);
      } else if (key == "doublet_start") {
        p.doublet_start = parse_scalar(value, ctx);
      } else if (key == "doublet_width") {
        p.doublet_width = parse_scalar(value, ctx);
      } else {
        throw InvalidConfig(ctx + ": unknown key");
      }
    } else if (section == "noise") {
      if (key == "mode") {
        cfg.noise_mode = value;
      } else if (key == "psd_q") {
        cfg.noise.psd_q = parse_scalar(value, ctx);
      } else if (key == "psd_R") {
        cfg.noise.psd_R = parse_scalar(value, ctx);
      } else if (key == "psd_omega") {
        cfg.noise.psd_omega = parse_scalar(value, ctx);
      } else if (key == "psd_a") {
        cfg.noise.psd_a = parse_scalar(value, ctx);
      } else if (key == "sample_rate_hz") {
        cfg.noise.sample_rate = parse_scalar(value, ctx);
      } else {
        throw InvalidConfig(ctx + ": unknown key");
      }
    } else if (section == "metrics") {
      if (key == "window_start") {
        cfg.metrics.window_start = parse_scalar(value, ctx);
      } else if (key == "decay_floor_rel") {
        cfg.metrics.decay_floor_rel = parse_scalar(value, ctx);
      } else {
        throw InvalidConfig(ctx + ": unknown key");
      }
    } else if (section == "sweep") {
      if (key == "l_scales") {
        cfg.sweep.l_scales = parse_numbers(value, ctx);
      } else if (key == "noise_scales") {
        cfg.sweep.noise_scales = parse_numbers(value, ctx);
      } else {
        throw InvalidConfig(ctx + ": unknown key");
      }
    }
  }

  resolve_noise(cfg);
  return cfg;
}

/// Loads and parses a config file; a missing file is a config error that
/// names the path.
inline AppConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot read config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_config_text(buf.str());
}

/// Serializes the fully resolved configuration. Parsing the result yields
/// the same configuration and the same rendering.
inline std::string render_config(const AppConfig& cfg) {
  using detail::format_double;
  using detail::format_mat3_rows;
  using detail::format_numbers;
  using detail::format_vec3;
  std::ostringstream os;
  const ProfileParams& p = cfg.sim.params;
  os << "[plant]\n"
     << "v0 = " << format_vec3(cfg.sim.v0) << "\n"
     << "q0 = " << format_vec3(cfg.sim.q0) << "\n"
     << "R0 = " << format_mat3_rows(cfg.sim.R0.matrix()) << "\n"
     << "gravity = " << format_vec3(cfg.sim.gravity) << "\n"
     << "\n[observer]\n"
     << "L = " << format_mat3_rows(cfg.sim.L) << "\n"
     << "xhat0 = " << format_vec3(cfg.sim.xhat0) << "\n"
     << "z0 = " << (cfg.sim.z0 ? format_vec3(*cfg.sim.z0) : std::string("auto"))
     << "\n"
     << "\n[sim]\n"
     << "t_end = " << format_double(cfg.sim.t_end) << "\n"
     << "dt = " << format_double(cfg.sim.dt) << "\n"
     << "seed = " << cfg.sim.seed << "\n"
     << "\n[profile]\n"
     << "kind = " << to_string(cfg.sim.profile) << "\n"
     << "omega_amp = " << format_vec3(p.omega_amp) << "\n"
     << "omega_freq_hz = " << format_double(p.omega_freq_hz) << "\n"
     << "omega_phase = " << format_double(p.omega_phase) << "\n"
     << "accel_base = " << format_vec3(p.accel_base) << "\n"
     << "accel_amp = " << format_vec3(p.accel_amp) << "\n"
     << "accel_freq_hz = " << format_double(p.accel_freq_hz) << "\n"
     << "accel_phase = " << format_double(p.accel_phase) << "\n"
     << "doublet_axis = " << format_vec3(p.doublet_axis) << "\n"
     << "doublet_amp = " << format_double(p.doublet_amp) << "\n"
     << "doublet_start = " << format_double(p.doublet_start) << "\n"
     << "doublet_width = " << format_double(p.doublet_width) << "\n"
     << "\n[noise]\n"
     << "mode = " << cfg.noise_mode << "\n"
     << "psd_q = " << format_double(cfg.noise.psd_q) << "\n"
     << "psd_R = " << format_double(cfg.noise.psd_R) << "\n"
     << "psd_omega = " << format_double(cfg.noise.psd_omega) << "\n"
     << "psd_a = " << format_double(cfg.noise.psd_a) << "\n"
     << "sample_rate_hz = " << format_double(cfg.noise.sample_rate) << "\n"
     << "\n[metrics]\n"
     << "window_start = " << format_double(cfg.metrics.window_start) << "\n"
     << "decay_floor_rel = " << format_double(cfg.metrics.decay_floor_rel) << "\n"
     << "\n[sweep]\n"
     << "l_scales = " << format_numbers(cfg.sweep.l_scales) << "\n"
     << "noise_scales = " << format_numbers(cfg.sweep.noise_scales) << "\n";
  return os.str();
}

/// Command-line overrides layered on top of the file.
struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<std::string> noise_mode;
  std::optional<double> dt;
  std::optional<double> t_end;
  std::optional<std::string> profile;
};

inline void apply_overrides(AppConfig& cfg, const Overrides& ov) {
  if (ov.seed) cfg.sim.seed = *ov.seed;
  if (ov.dt) cfg.sim.dt = *ov.dt;
  if (ov.t_end) cfg.sim.t_end = *ov.t_end;
  if (ov.profile) {
    try {
      cfg.sim.profile = profile_from_string(*ov.profile);
    } catch (const UnknownProfile& e) {
      throw InvalidConfig(std::string("--profile: ") + e.what());
    }
  }
  if (ov.noise_mode) cfg.noise_mode = *ov.noise_mode;
  resolve_noise(cfg);
}

}  // namespace invobs
