#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "dpc/controller.hpp"
#include "dpc/errors.hpp"

namespace dpc::io {

/// Fixed-precision text so identical inputs give identical bytes.
inline std::string fixed(double v, int digits = 2) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  std::string s(buf);
  if (s == "-0.00" || s == "-0.0" || s == "-0") s.erase(0, 1);
  return s;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  bool empty() const { return !(lo <= hi); }
  double span() const { return hi - lo; }
  void pad(double frac) {
    if (empty()) {
      lo = 0.0;
      hi = 1.0;
      return;
    }
    double s = span();
    if (s <= 0.0) s = std::max(1.0, std::abs(lo));
    lo -= frac * s;
    hi += frac * s;
  }
};

/// Tick positions at 1/2/5 x 10^k spacing.
inline std::vector<double> nice_ticks(const Range& r, int target = 6) {
  const double raw = r.span() / target;
  if (!(raw > 0.0) || !std::isfinite(raw)) return {r.lo};
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  double step = mag;
  for (double f : {1.0, 2.0, 5.0, 10.0}) {
    step = f * mag;
    if (step >= raw) break;
  }
  std::vector<double> out;
  for (double t = std::ceil(r.lo / step) * step; t <= r.hi + 1e-9 * step; t += step) out.push_back(std::abs(t) < 1e-12 * step ? 0.0 : t);
  return out;
}

inline int tick_digits(const std::vector<double>& ticks) {
  if (ticks.size() < 2) return 2;
  const double step = ticks[1] - ticks[0];
  return std::clamp(static_cast<int>(-std::floor(std::log10(step))), 0, 6);
}

inline const char* palette(std::size_t i) {
  static const char* colors[] = {"#d62728", "#1f77b4", "#e8a317", "#2ca02c", "#9467bd", "#8c564b", "#e377c2", "#17becf"};
  return colors[i % 8];
}

/// Minimal SVG canvas with data coordinates mapped into a framed plot area.
class Figure {
 public:
  Figure(std::string title, std::string xlabel, std::string ylabel, Range x, Range y, bool equal_aspect = false)
      : title_(std::move(title)), xlabel_(std::move(xlabel)), ylabel_(std::move(ylabel)), x_(x), y_(y) {
    if (equal_aspect) {
      const double sx = x_.span() / plot_w(), sy = y_.span() / plot_h();
      if (sx > sy) {
        const double extra = (sx * plot_h() - y_.span()) / 2;
        y_.lo -= extra;
        y_.hi += extra;
      } else {
        const double extra = (sy * plot_w() - x_.span()) / 2;
        x_.lo -= extra;
        x_.hi += extra;
      }
    }
  }

  double px(double x) const { return kLeft + (x - x_.lo) / x_.span() * plot_w(); }
  double py(double y) const { return kTop + (y_.hi - y) / y_.span() * plot_h(); }

  void polyline(const std::vector<Point>& pts, const std::string& color, double width, bool dashed = false,
                double opacity = 1.0) {
    if (pts.size() < 2) return;
    body_ << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << fixed(width, 2) << '"';
    if (dashed) body_ << " stroke-dasharray=\"6,4\"";
    if (opacity < 1.0) body_ << " stroke-opacity=\"" << fixed(opacity, 2) << '"';
    body_ << " points=\"";
    for (std::size_t i = 0; i < pts.size(); ++i) {
      if (i) body_ << ' ';
      body_ << fixed(px(pts[i].x())) << ',' << fixed(py(pts[i].y()));
    }
    body_ << "\"/>\n";
  }

  void dot(const Point& p, double r, const std::string& color, double opacity = 1.0) {
    body_ << "<circle cx=\"" << fixed(px(p.x())) << "\" cy=\"" << fixed(py(p.y())) << "\" r=\"" << fixed(r) << "\" fill=\""
          << color << '"';
    if (opacity < 1.0) body_ << " fill-opacity=\"" << fixed(opacity, 2) << '"';
    body_ << "/>\n";
  }

  void ring(const Point& p, double r, const std::string& color) {
    body_ << "<circle cx=\"" << fixed(px(p.x())) << "\" cy=\"" << fixed(py(p.y())) << "\" r=\"" << fixed(r)
          << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
  }

  void cross(const Point& p, double r, const std::string& color) {
    const double x = px(p.x()), y = py(p.y());
    body_ << "<path d=\"M" << fixed(x - r) << ',' << fixed(y - r) << " L" << fixed(x + r) << ',' << fixed(y + r) << " M"
          << fixed(x - r) << ',' << fixed(y + r) << " L" << fixed(x + r) << ',' << fixed(y - r) << "\" stroke=\"" << color
          << "\" stroke-width=\"2\"/>\n";
  }

  void hline(double y, const std::string& color) {
    if (y < y_.lo || y > y_.hi) return;
    body_ << "<line x1=\"" << fixed(kLeft) << "\" y1=\"" << fixed(py(y)) << "\" x2=\"" << fixed(kLeft + plot_w())
          << "\" y2=\"" << fixed(py(y)) << "\" stroke=\"" << color << "\" stroke-width=\"1\"/>\n";
  }

  void legend(const std::string& label, const std::string& color, bool dashed = false) {
    legend_.push_back({label, color, dashed});
  }

  std::string str() const {
    std::ostringstream out;
    out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
        << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    out << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">" << escape(title_)
        << "</text>\n";
    out << "<defs><clipPath id=\"plot\"><rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w()
        << "\" height=\"" << plot_h() << "\"/></clipPath></defs>\n";
    const auto xt = nice_ticks(x_), yt = nice_ticks(y_);
    const int xd = tick_digits(xt), yd = tick_digits(yt);
    for (double t : xt) {
      const double x = px(t);
      out << "<line x1=\"" << fixed(x) << "\" y1=\"" << kTop << "\" x2=\"" << fixed(x) << "\" y2=\"" << kTop + plot_h()
          << "\" stroke=\"#e6e6e6\"/>\n";
      out << "<text x=\"" << fixed(x) << "\" y=\"" << kTop + plot_h() + 16 << "\" text-anchor=\"middle\">" << fixed(t, xd)
          << "</text>\n";
    }
    for (double t : yt) {
      const double y = py(t);
      out << "<line x1=\"" << kLeft << "\" y1=\"" << fixed(y) << "\" x2=\"" << kLeft + plot_w() << "\" y2=\"" << fixed(y)
          << "\" stroke=\"#e6e6e6\"/>\n";
      out << "<text x=\"" << kLeft - 6 << "\" y=\"" << fixed(y + 4) << "\" text-anchor=\"end\">" << fixed(t, yd)
          << "</text>\n";
    }
    out << "<g clip-path=\"url(#plot)\">\n" << body_.str() << "</g>\n";
    out << "<rect x=\"" << kLeft << "\" y=\"" << kTop << "\" width=\"" << plot_w() << "\" height=\"" << plot_h()
        << "\" fill=\"none\" stroke=\"black\"/>\n";
    out << "<text x=\"" << kLeft + plot_w() / 2 << "\" y=\"" << kHeight - 14 << "\" text-anchor=\"middle\">"
        << escape(xlabel_) << "</text>\n";
    out << "<text transform=\"translate(18," << kTop + plot_h() / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
        << escape(ylabel_) << "</text>\n";
    for (std::size_t i = 0; i < legend_.size(); ++i) {
      const int y = kTop + 14 + 18 * static_cast<int>(i);
      const int x = kLeft + plot_w() - 170;
      out << "<line x1=\"" << x << "\" y1=\"" << y - 4 << "\" x2=\"" << x + 24 << "\" y2=\"" << y - 4 << "\" stroke=\""
          << legend_[i].color << "\" stroke-width=\"2\"" << (legend_[i].dashed ? " stroke-dasharray=\"6,4\"" : "")
          << "/>\n";
      out << "<text x=\"" << x + 30 << "\" y=\"" << y << "\">" << escape(legend_[i].label) << "</text>\n";
    }
    out << "</svg>\n";
    return out.str();
  }

 private:
  static constexpr int kWidth = 760;
  static constexpr int kHeight = 600;
  static constexpr int kLeft = 70;
  static constexpr int kTop = 40;
  static constexpr int kRight = 20;
  static constexpr int kBottom = 50;
  static constexpr int plot_w() { return kWidth - kLeft - kRight; }
  static constexpr int plot_h() { return kHeight - kTop - kBottom; }

  static std::string escape(const std::string& s) {
    std::string out;
    for (char c : s) {
      if (c == '<') out += "&lt;";
      else if (c == '>') out += "&gt;";
      else if (c == '&') out += "&amp;";
      else out += c;
    }
    return out;
  }

  struct LegendEntry {
    std::string label;
    std::string color;
    bool dashed;
  };

  std::string title_, xlabel_, ylabel_;
  Range x_, y_;
  std::ostringstream body_;
  std::vector<LegendEntry> legend_;
};

/// Inclusive step window; an unset bound is open.
struct Window {
  int lo = std::numeric_limits<int>::min();
  int hi = std::numeric_limits<int>::max();

  bool contains(int k) const { return k >= lo && k <= hi; }
};

struct TrajectoryPoint {
  int agent = 0;
  int k = 0;
  Point y = Point::Zero();
};

/// Reference samples (shaded by weight), one path per agent, start crosses and end rings.
inline std::string plot_trajectories(const std::vector<Point>& reference, const std::vector<double>& ref_weights,
                                     const std::vector<TrajectoryPoint>& traj, const std::vector<Point>& starts,
                                     const Window& win) {
  std::vector<std::vector<Point>> paths(starts.size());
  for (const auto& t : traj) {
    if (!win.contains(t.k)) continue;
    if (t.agent < 0 || static_cast<std::size_t>(t.agent) >= paths.size()) throw InputError("plot: agent id out of range");
    paths[static_cast<std::size_t>(t.agent)].push_back(t.y);
  }
  const bool any = std::any_of(paths.begin(), paths.end(), [](const auto& p) { return !p.empty(); });
  if (!any) throw InputError("plot: no trajectory points in the window");
  const bool from_start = win.lo <= 1;

  Range xr, yr;
  for (const auto& p : reference) xr.add(p.x()), yr.add(p.y());
  for (const auto& path : paths) {
    for (const auto& p : path) xr.add(p.x()), yr.add(p.y());
  }
  if (from_start) {
    for (const auto& s : starts) xr.add(s.x()), yr.add(s.y());
  }
  xr.pad(0.03);
  yr.pad(0.03);
  Figure fig("Agent trajectories", "x [m]", "y [m]", xr, yr, true);
  const double wmax = ref_weights.empty() ? 1.0 : *std::max_element(ref_weights.begin(), ref_weights.end());
  for (std::size_t j = 0; j < reference.size(); ++j) {
    const double shade = wmax > 0 ? ref_weights[j] / wmax : 1.0;
    fig.dot(reference[j], 1.6, "#7f7f7f", 0.15 + 0.45 * shade);
  }
  for (std::size_t a = 0; a < paths.size(); ++a) {
    std::vector<Point> path = paths[a];
    if (from_start && !path.empty()) path.insert(path.begin(), starts[a]);
    fig.polyline(path, palette(a), 1.4);
    if (!path.empty()) {
      fig.cross(path.front(), 5, "#1f3b99");
      fig.ring(path.back(), 5, "#e8a317");
    }
    fig.legend("agent " + std::to_string(a), palette(a));
  }
  return fig.str();
}

struct DeltaWPoint {
  int agent = 0;
  int k = 0;
  double delta_w = 0.0;
  double delta_w_unc = std::numeric_limits<double>::quiet_NaN();
};

/// Predicted change of the squared local distance per step, one line per agent.
inline std::string plot_delta_w(const std::vector<DeltaWPoint>& pts, std::size_t agents, const Window& win) {
  std::vector<std::vector<Point>> series(agents), unc(agents);
  Range xr, yr;
  for (const auto& p : pts) {
    if (!win.contains(p.k)) continue;
    if (p.agent < 0 || static_cast<std::size_t>(p.agent) >= agents) throw InputError("plot: agent id out of range");
    series[static_cast<std::size_t>(p.agent)].emplace_back(p.k, p.delta_w);
    xr.add(p.k);
    yr.add(p.delta_w);
    if (std::isfinite(p.delta_w_unc)) {
      unc[static_cast<std::size_t>(p.agent)].emplace_back(p.k, p.delta_w_unc);
      yr.add(p.delta_w_unc);
    }
  }
  if (xr.empty()) throw InputError("plot: no steps in the window");
  yr.add(0.0);
  xr.pad(0.01);
  yr.pad(0.05);
  Figure fig("Predicted change of the local Wasserstein distance", "step k", "delta W", xr, yr);
  fig.hline(0.0, "#444444");
  bool constrained = false;
  for (std::size_t a = 0; a < agents; ++a) {
    // the unconstrained optimum only differs where constraints bind
    bool differs = false;
    for (std::size_t i = 0; i < unc[a].size() && i < series[a].size(); ++i) differs |= unc[a][i].y() != series[a][i].y();
    if (differs) {
      fig.polyline(unc[a], palette(a), 1.0, true, 0.7);
      constrained = true;
    }
    fig.polyline(series[a], palette(a), 1.2);
    fig.legend("agent " + std::to_string(a), palette(a));
  }
  if (constrained) fig.legend("unconstrained optimum", "#444444", true);
  return fig.str();
}

struct EllipseStep {
  int k = 0;
  GainTerms gains;
  Vector u;
  Vector u_unc;
};

/// Convergence ellipses in input space with the chosen and unconstrained input traces.
inline std::string plot_ellipses(const std::vector<EllipseStep>& steps, int agent) {
  if (steps.empty()) throw InputError("plot: no steps in the window");
  std::vector<std::vector<Point>> rings;
  std::vector<Point> chosen, unconstrained;
  Range xr, yr;
  for (const auto& s : steps) {
    if (s.u.size() != 2) throw InputError("plot: ellipses need a 2-dimensional input");
    chosen.emplace_back(s.u(0), s.u(1));
    unconstrained.emplace_back(s.u_unc(0), s.u_unc(1));
    xr.add(s.u(0)), yr.add(s.u(1)), xr.add(s.u_unc(0)), yr.add(s.u_unc(1));
    try {
      auto ring = convergence_ellipse(s.gains, 96);
      ring.push_back(ring.front());
      for (const auto& p : ring) xr.add(p.x()), yr.add(p.y());
      rings.push_back(std::move(ring));
    } catch (const InputError&) {
      // empty or unbounded range at this step: nothing to draw
    }
  }
  xr.pad(0.05);
  yr.pad(0.05);
  Figure fig("Convergence ranges, agent " + std::to_string(agent) + ", steps " + std::to_string(steps.front().k) + " to " +
                 std::to_string(steps.back().k),
             "u1", "u2", xr, yr, true);
  for (const auto& r : rings) fig.polyline(r, "#8c8c8c", 1.0, true);
  fig.polyline(unconstrained, "#d62728", 1.4, true);
  fig.polyline(chosen, "#1f77b4", 1.6);
  for (const auto& p : unconstrained) fig.dot(p, 3, "#d62728");
  for (const auto& p : chosen) fig.dot(p, 3, "#1f77b4");
  fig.legend("convergence range", "#8c8c8c", true);
  fig.legend("unconstrained input", "#d62728", true);
  fig.legend("applied input", "#1f77b4");
  return fig.str();
}

/// Global 2-Wasserstein distance between trajectory and reference over time.
inline std::string plot_global_w(const std::vector<std::pair<int, double>>& series, const Window& win) {
  std::vector<Point> pts;
  Range xr, yr;
  for (const auto& [k, w] : series) {
    if (!win.contains(k)) continue;
    pts.emplace_back(k, w);
    xr.add(k);
    yr.add(w);
  }
  if (pts.empty()) throw InputError("plot: no global W samples in the window");
  yr.add(0.0);
  xr.pad(0.02);
  yr.pad(0.05);
  Figure fig("Global Wasserstein distance", "step k", "W2 [m]", xr, yr);
  fig.polyline(pts, "#d62728", 1.6);
  for (const auto& p : pts) fig.dot(p, 2.5, "#d62728");
  return fig.str();
}

}  // namespace dpc::io
