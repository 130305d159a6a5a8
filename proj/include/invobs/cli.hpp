#pragma once

#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include <invobs/config.hpp>
#include <invobs/rigid_body.hpp>
#include <invobs/svg_plot.hpp>

namespace invobs {

// Exit codes are the machine contract.
constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;
constexpr int kExitVerify = 4;

namespace cli_detail {

namespace fs = std::filesystem;

inline AppConfig load_or_default(const std::string& config_path) {
  if (config_path.empty()) return AppConfig{};
  return load_config(config_path);
}

inline void write_text_file(const fs::path& p, const std::string& content) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw InvalidConfig("cannot open for writing: " + p.string());
  out << content;
  out.flush();
  if (!out) throw InvalidConfig("write failed: " + p.string());
}

inline fs::path prepare_out_dir(const std::string& out_dir) {
  if (out_dir.empty()) throw InvalidConfig("output directory must be given");
  std::error_code ec;
  fs::create_directories(out_dir, ec);
  if (ec) {
    throw InvalidConfig("cannot create output directory " + out_dir + ": " +
                        ec.message());
  }
  return fs::path(out_dir);
}

inline std::string metrics_csv(const Metrics& m, const MetricsConfig& mc) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "rmse_x,rmse_y,rmse_z,decay_rate,max_eta_post_transient,"
        "window_start,decay_floor_rel\n"
     << m.rmse.x() << "," << m.rmse.y() << "," << m.rmse.z() << ","
     << m.decay_rate << "," << m.max_eta_post_transient << ","
     << mc.window_start << "," << mc.decay_floor_rel << "\n";
  return os.str();
}

inline void write_manifest(const fs::path& dir, const std::string& command,
                           const std::string& config_path, const AppConfig& cfg,
                           std::vector<std::string> artifacts, bool pass,
                           const std::string& detail) {
  artifacts.push_back("manifest.json");
  nlohmann::ordered_json j;
  j["command"] = command;
  j["config_path"] = config_path;
  j["resolved_config"] = render_config(cfg);
  j["out_dir"] = dir.string();
  j["seed"] = cfg.sim.seed;
  j["artifacts"] = artifacts;
  j["summary"] = {{"pass", pass}, {"detail", detail}};
  write_text_file(dir / "manifest.json", j.dump(2) + "\n");
}

/// Maps the library's failure taxonomy onto the exit-code contract.
template <typename Fn>
int run_command(std::ostream& err, Fn&& fn) {
  try {
    return fn();
  } catch (const NonFinite& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const Degenerate& e) {
    err << "error: " << e.what() << "\n";
    return kExitNumeric;
  } catch (const EmptyWindow& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const NotHurwitz& e) {
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {  // InvalidConfig, UnknownProfile, I/O
    err << "error: " << e.what() << "\n";
    return kExitConfig;
  }
}

inline unsigned sweep_thread_cap() {
  unsigned cap = std::max(1u, std::thread::hardware_concurrency());
  if (const char* env = std::getenv("INVOBS_THREADS")) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (env[0] == '\0' || end == nullptr || *end != '\0' || v < 1 || v > 1024) {
      throw InvalidConfig("INVOBS_THREADS must be an integer in [1, 1024]");
    }
    cap = static_cast<unsigned>(v);
  }
  return cap;
}

struct SweepRow {
  double l_scale = 1.0;
  double noise_scale = 1.0;
  std::uint64_t seed = 0;
  bool ok = false;
  bool non_finite = false;
  Metrics m;
  std::string note;
};

inline std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::ostringstream os;
  os << std::setprecision(17);
  os << "l_scale,noise_scale,seed,status,rmse_x,rmse_y,rmse_z,decay_rate,"
        "max_eta_post_transient,note\n";
  for (const auto& r : rows) {
    std::string note = r.note;
    for (char& c : note) {
      if (c == ',' || c == '\n') c = ';';
    }
    os << r.l_scale << "," << r.noise_scale << "," << r.seed << ","
       << (r.ok ? "ok" : "invalid") << ",";
    if (r.ok) {
      os << r.m.rmse.x() << "," << r.m.rmse.y() << "," << r.m.rmse.z() << ","
         << r.m.decay_rate << "," << r.m.max_eta_post_transient;
    } else {
      os << "nan,nan,nan,nan,nan";
    }
    os << "," << note << "\n";
  }
  return os.str();
}

}  // namespace cli_detail

/// Runs one simulation and writes trajectory CSV, metrics summary, velocity
/// plot, and the run manifest into out_dir.
inline int cmd_simulate(const std::string& config_path,
                        const std::string& out_dir, const Overrides& ov,
                        std::ostream& err = std::cerr) {
  namespace d = cli_detail;
  return d::run_command(err, [&]() {
    AppConfig cfg = d::load_or_default(config_path);
    apply_overrides(cfg, ov);
    const auto dir = d::prepare_out_dir(out_dir);

    const TrajectoryRecord rec = simulate(cfg.sim);
    const Metrics m =
        metrics(rec, cfg.metrics.window_start, cfg.metrics.decay_floor_rel);

    d::write_text_file(dir / "trajectory.csv", to_csv(rec));
    d::write_text_file(dir / "metrics.csv", d::metrics_csv(m, cfg.metrics));
    d::write_text_file(dir / "velocity.svg", velocity_plot_svg(rec));

    std::ostringstream detail;
    detail << "decay_rate=" << std::setprecision(6) << m.decay_rate
           << " max_rmse=" << m.rmse.maxCoeff();
    d::write_manifest(dir, "simulate", config_path, cfg,
                      {"trajectory.csv", "metrics.csv", "velocity.svg"}, true,
                      detail.str());
    return kExitOk;
  });
}

/// Runs the rigid-body verification suite and writes the report CSV. Fails
/// with the first failing check named on stderr.
inline int cmd_verify(const std::string& config_path,
                      const std::string& out_dir, const Overrides& ov,
                      bool inject_bad_frame, std::ostream& err = std::cerr) {
  namespace d = cli_detail;
  return d::run_command(err, [&]() {
    AppConfig cfg = d::load_or_default(config_path);
    apply_overrides(cfg, ov);
    const auto dir = d::prepare_out_dir(out_dir);

    const ObserverGains gains(cfg.sim.L, cfg.sim.gravity);
    const std::vector<CheckReport> rows =
        rb_check_suite(gains, cfg.sim.seed, inject_bad_frame);

    d::write_text_file(dir / "report.csv", report_csv(rows));

    const CheckReport* first_fail = nullptr;
    for (const auto& r : rows) {
      if (!r.pass && !first_fail) first_fail = &r;
    }
    const bool all_pass = first_fail == nullptr;
    const std::string detail =
        all_pass ? std::to_string(rows.size()) + " checks passed"
                 : "first failing check: " + first_fail->name;
    d::write_manifest(dir, "verify", config_path, cfg, {"report.csv"}, all_pass,
                      detail);
    if (!all_pass) {
      err << "error: verification failed: " << first_fail->name << "\n";
      return kExitVerify;
    }
    return kExitOk;
  });
}

/// Runs the (L scale) x (noise scale) grid, one metrics row per point.
/// Rows run independently; partial failures are recorded per row.
inline int cmd_sweep(const std::string& config_path, const std::string& out_dir,
                     const Overrides& ov, std::ostream& err = std::cerr) {
  namespace d = cli_detail;
  return d::run_command(err, [&]() {
    AppConfig cfg = d::load_or_default(config_path);
    apply_overrides(cfg, ov);
    const auto dir = d::prepare_out_dir(out_dir);

    std::vector<double> ls = cfg.sweep.l_scales;
    std::vector<double> ns = cfg.sweep.noise_scales;
    std::sort(ls.begin(), ls.end());
    std::sort(ns.begin(), ns.end());

    std::vector<d::SweepRow> rows(ls.size() * ns.size());
    for (std::size_t i = 0; i < ls.size(); ++i) {
      for (std::size_t j = 0; j < ns.size(); ++j) {
        auto& r = rows[i * ns.size() + j];
        r.l_scale = ls[i];
        r.noise_scale = ns[j];
        r.seed = mix_seed(cfg.sim.seed, i * ns.size() + j);
      }
    }

    const auto run_row = [&](d::SweepRow& r) {
      try {
        SimConfig sub = cfg.sim;
        sub.L = r.l_scale * cfg.sim.L;
        sub.seed = r.seed;
        if (sub.noise) {
          sub.noise->psd_q *= r.noise_scale;
          sub.noise->psd_R *= r.noise_scale;
          sub.noise->psd_omega *= r.noise_scale;
          sub.noise->psd_a *= r.noise_scale;
        }
        const TrajectoryRecord rec = simulate(sub);
        r.m = metrics(rec, cfg.metrics.window_start, cfg.metrics.decay_floor_rel);
        r.ok = true;
      } catch (const NonFinite& e) {
        r.non_finite = true;
        r.note = e.what();
      } catch (const std::exception& e) {
        r.note = e.what();
      }
    };

    const unsigned n_threads =
        std::min<unsigned>(d::sweep_thread_cap(),
                           static_cast<unsigned>(rows.size()));
    if (n_threads <= 1) {
      for (auto& r : rows) run_row(r);
    } else {
      std::atomic<std::size_t> next{0};
      std::vector<std::thread> pool;
      for (unsigned t = 0; t < n_threads; ++t) {
        pool.emplace_back([&]() {
          for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= rows.size()) break;
            run_row(rows[i]);
          }
        });
      }
      for (auto& th : pool) th.join();
    }

    d::write_text_file(dir / "sweep.csv", d::sweep_csv(rows));

    std::size_t ok = 0;
    bool any_non_finite = false;
    for (const auto& r : rows) {
      ok += r.ok ? 1 : 0;
      any_non_finite = any_non_finite || r.non_finite;
    }
    d::write_manifest(dir, "sweep", config_path, cfg, {"sweep.csv"}, ok > 0,
                      std::to_string(ok) + "/" + std::to_string(rows.size()) +
                          " grid points succeeded");
    if (ok == 0) {
      err << "error: every grid point failed\n";
      return any_non_finite ? kExitNumeric : kExitConfig;
    }
    return kExitOk;
  });
}

}  // namespace invobs
