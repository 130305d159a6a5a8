#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <vector>

#include <invobs/simulation.hpp>

namespace invobs {
namespace plot_detail {

// 1-2-5 ladder for tick spacing.
inline double nice_num(double x, bool round_result) {
  const double expv = std::floor(std::log10(x));
  const double f = x / std::pow(10.0, expv);
  double nf;
  if (round_result) {
    nf = f < 1.5 ? 1.0 : f < 3.0 ? 2.0 : f < 7.0 ? 5.0 : 10.0;
  } else {
    nf = f <= 1.0 ? 1.0 : f <= 2.0 ? 2.0 : f <= 5.0 ? 5.0 : 10.0;
  }
  return nf * std::pow(10.0, expv);
}

inline std::vector<double> ticks(double lo, double hi, int target = 5) {
  const double range = nice_num(hi - lo, false);
  const double step = nice_num(range / (target - 1), true);
  const double t0 = std::ceil(lo / step) * step;
  std::vector<double> out;
  for (double t = t0; t <= hi + 0.5 * step; t += step) {
    out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  }
  return out;
}

inline std::string fmt_px(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

inline std::string fmt_label(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", x);
  return buf;
}

}  // namespace plot_detail

/// Renders truth vs estimate for the three velocity components as stacked
/// panels in one standalone SVG. Output bytes depend only on the record.
inline std::string velocity_plot_svg(const TrajectoryRecord& rec) {
  using plot_detail::fmt_label;
  using plot_detail::fmt_px;
  if (rec.steps.empty()) throw EmptyWindow("nothing to plot");

  const double width = 860.0, left = 64.0, right = 18.0;
  const double top = 30.0, bottom = 44.0, panel_h = 176.0, gap = 30.0;
  const double height = top + 3.0 * panel_h + 2.0 * gap + bottom;
  const double plot_w = width - left - right;

  const std::size_t n = rec.steps.size();
  const std::size_t stride = std::max<std::size_t>(1, (n - 1) / 2000 + 1);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < n; i += stride) idx.push_back(i);
  if (idx.back() != n - 1) idx.push_back(n - 1);

  const double t_lo = rec.steps.front().t;
  const double t_hi = rec.steps.back().t;
  const double t_span = std::max(t_hi - t_lo, 1e-12);

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
     << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << " "
     << height << "\">\n"
     << "<rect width=\"" << width << "\" height=\"" << height
     << "\" fill=\"#ffffff\"/>\n"
     << "<style>text{font-family:sans-serif;fill:#333333;}"
        ".tick{font-size:11px;}.axis{font-size:13px;}</style>\n";

  const char* axis_names[3] = {"v_x [m/s]", "v_y [m/s]", "v_z [m/s]"};
  for (int axis = 0; axis < 3; ++axis) {
    const double py = top + axis * (panel_h + gap);

    double lo = 1e300, hi = -1e300;
    for (const std::size_t i : idx) {
      lo = std::min({lo, rec.steps[i].v[axis], rec.steps[i].vhat[axis]});
      hi = std::max({hi, rec.steps[i].v[axis], rec.steps[i].vhat[axis]});
    }
    if (hi - lo < 1e-9) {
      lo -= 0.5;
      hi += 0.5;
    }
    const double pad = 0.06 * (hi - lo);
    lo -= pad;
    hi += pad;

    const auto x_of = [&](double t) {
      return left + (t - t_lo) / t_span * plot_w;
    };
    const auto y_of = [&](double v) {
      return py + panel_h - (v - lo) / (hi - lo) * panel_h;
    };

    os << "<rect x=\"" << left << "\" y=\"" << py << "\" width=\"" << plot_w
       << "\" height=\"" << panel_h
       << "\" fill=\"none\" stroke=\"#888888\" stroke-width=\"1\"/>\n";

    for (const double tv : plot_detail::ticks(lo, hi)) {
      const double yy = y_of(tv);
      if (yy < py - 0.5 || yy > py + panel_h + 0.5) continue;
      os << "<line x1=\"" << left << "\" y1=\"" << fmt_px(yy) << "\" x2=\""
         << width - right << "\" y2=\"" << fmt_px(yy)
         << "\" stroke=\"#dddddd\" stroke-width=\"1\"/>\n"
         << "<text class=\"tick\" x=\"" << left - 6 << "\" y=\""
         << fmt_px(yy + 3.5) << "\" text-anchor=\"end\">" << fmt_label(tv)
         << "</text>\n";
    }
    for (const double tv : plot_detail::ticks(t_lo, t_hi, 7)) {
      const double xx = x_of(tv);
      if (xx < left - 0.5 || xx > width - right + 0.5) continue;
      os << "<line x1=\"" << fmt_px(xx) << "\" y1=\"" << py + panel_h
         << "\" x2=\"" << fmt_px(xx) << "\" y2=\"" << py + panel_h + 4
         << "\" stroke=\"#888888\" stroke-width=\"1\"/>\n";
      if (axis == 2) {
        os << "<text class=\"tick\" x=\"" << fmt_px(xx) << "\" y=\""
           << py + panel_h + 18 << "\" text-anchor=\"middle\">" << fmt_label(tv)
           << "</text>\n";
      }
    }

    for (int series = 0; series < 2; ++series) {
      os << "<polyline fill=\"none\" stroke=\""
         << (series == 0 ? "#1a1a1a" : "#c0392b") << "\" stroke-width=\"1.4\""
         << (series == 0 ? "" : " stroke-dasharray=\"6 4\"") << " points=\"";
      bool first = true;
      for (const std::size_t i : idx) {
        const double v =
            series == 0 ? rec.steps[i].v[axis] : rec.steps[i].vhat[axis];
        if (!first) os << " ";
        os << fmt_px(x_of(rec.steps[i].t)) << "," << fmt_px(y_of(v));
        first = false;
      }
      os << "\"/>\n";
    }

    os << "<text class=\"axis\" transform=\"rotate(-90 " << 16 << " "
       << fmt_px(py + panel_h / 2) << ")\" x=\"16\" y=\""
       << fmt_px(py + panel_h / 2)
       << "\" text-anchor=\"middle\">" << axis_names[axis] << "</text>\n";
  }

  os << "<text class=\"axis\" x=\"" << left + plot_w / 2 << "\" y=\""
     << height - 12 << "\" text-anchor=\"middle\">t [s]</text>\n";

  const double lx = width - right - 170.0, ly = top + 14.0;
  os << "<line x1=\"" << lx << "\" y1=\"" << ly << "\" x2=\"" << lx + 30
     << "\" y2=\"" << ly << "\" stroke=\"#1a1a1a\" stroke-width=\"1.4\"/>\n"
     << "<text class=\"tick\" x=\"" << lx + 36 << "\" y=\"" << ly + 3.5
     << "\">truth</text>\n"
     << "<line x1=\"" << lx + 90 << "\" y1=\"" << ly << "\" x2=\"" << lx + 120
     << "\" y2=\"" << ly
     << "\" stroke=\"#c0392b\" stroke-width=\"1.4\" stroke-dasharray=\"6 4\"/>\n"
     << "<text class=\"tick\" x=\"" << lx + 126 << "\" y=\"" << ly + 3.5
     << "\">estimate</text>\n"
     << "</svg>\n";
  return os.str();
}

}  // namespace invobs
