#include "phtraffic/svg.hpp"

#include "phtraffic/csv.hpp"
#include "phtraffic/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace phtraffic {

namespace {

std::string num(double v) {
  // Two decimals are plenty for pixel coordinates.
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(2);
  s << v;
  return s.str();
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();

  void add(double v) {
    if (!std::isfinite(v)) return;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  void finish() {
    if (!(lo <= hi)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12) {
      lo -= 0.5;
      hi += 0.5;
    }
  }
};

/// A rectangular plotting area mapping data coordinates to pixels.
class Panel {
 public:
  Panel(double left, double top, double width, double height, Range x, Range y)
      : left_(left), top_(top), width_(width), height_(height), x_(x), y_(y) {
    x_.finish();
    y_.finish();
  }

  double px(double x) const { return left_ + (x - x_.lo) / (x_.hi - x_.lo) * width_; }
  double py(double y) const { return top_ + height_ - (y - y_.lo) / (y_.hi - y_.lo) * height_; }

  void frame(std::ostream& out, const std::string& title, const std::string& x_label,
             const std::string& y_label) const {
    out << "<rect x=\"" << num(left_) << "\" y=\"" << num(top_) << "\" width=\"" << num(width_) << "\" height=\""
        << num(height_) << "\" fill=\"none\" stroke=\"black\"/>\n";
    out << "<text x=\"" << num(left_ + width_ / 2) << "\" y=\"" << num(top_ - 8)
        << "\" text-anchor=\"middle\" font-size=\"14\">" << title << "</text>\n";
    out << "<text x=\"" << num(left_ + width_ / 2) << "\" y=\"" << num(top_ + height_ + 34)
        << "\" text-anchor=\"middle\" font-size=\"12\">" << x_label << "</text>\n";
    out << "<text x=\"" << num(left_ - 46) << "\" y=\"" << num(top_ + height_ / 2)
        << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 " << num(left_ - 46) << ' '
        << num(top_ + height_ / 2) << ")\">" << y_label << "</text>\n";
    for (int i = 0; i <= 4; ++i) {
      const double xv = x_.lo + (x_.hi - x_.lo) * i / 4.0;
      const double yv = y_.lo + (y_.hi - y_.lo) * i / 4.0;
      out << "<text x=\"" << num(px(xv)) << "\" y=\"" << num(top_ + height_ + 16)
          << "\" text-anchor=\"middle\" font-size=\"10\">" << format_tick(xv) << "</text>\n";
      out << "<text x=\"" << num(left_ - 6) << "\" y=\"" << num(py(yv) + 3)
          << "\" text-anchor=\"end\" font-size=\"10\">" << format_tick(yv) << "</text>\n";
    }
  }

  void polyline(std::ostream& out, const std::vector<std::pair<double, double>>& pts, const std::string& color,
                double width) const {
    if (pts.size() < 2) return;
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"" << num(width) << "\" points=\"";
    for (const auto& [x, y] : pts) out << num(px(x)) << ',' << num(py(y)) << ' ';
    out << "\"/>\n";
  }

 private:
  static std::string format_tick(double v) {
    std::ostringstream s;
    s.precision(3);
    s << v;
    return s.str();
  }

  double left_, top_, width_, height_;
  Range x_, y_;
};

const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                          "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

void header(std::ostream& out, int width, int height) {
  out << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
      << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
      << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
}

// Every k-th index so that at most `limit` points remain.
std::size_t thinning(std::size_t count, std::size_t limit) { return std::max<std::size_t>(1, count / limit); }

}  // namespace

std::string svg_simulation(const TimeSeries& ts, const ObservableSeries& obs) {
  std::ostringstream out;
  header(out, 900, 860);
  const double length = ts.params.ring_length;

  Range t_range, q_range;
  for (double t : ts.times) t_range.add(t);
  q_range.add(0.0);
  q_range.add(length);
  const Panel top(80, 40, 780, 360, t_range, q_range);
  top.frame(out, "Vehicle trajectories (position mod L)", "time", "position");

  const std::size_t stride = thinning(ts.states.size(), 1500);
  const int n = ts.params.n_vehicles;
  for (int v = 0; v < n; ++v) {
    std::vector<std::pair<double, double>> segment;
    double previous = std::numeric_limits<double>::quiet_NaN();
    for (std::size_t k = 0; k < ts.states.size(); k += stride) {
      const double q = wrap_position(ts.states[k].q[v], length);
      if (!segment.empty() && std::abs(q - previous) > 0.5 * length) {
        top.polyline(out, segment, "#1f77b4", 0.6);
        segment.clear();
      }
      segment.emplace_back(ts.times[k], q);
      previous = q;
    }
    top.polyline(out, segment, "#1f77b4", 0.6);
  }

  Range y_range;
  for (std::size_t k = 0; k < obs.times.size(); ++k) {
    y_range.add(obs.mean_speed[k]);
    y_range.add(obs.speed_variance[k]);
    y_range.add(obs.single_vehicle_speed[k]);
  }
  const Panel bottom(80, 480, 780, 300, t_range, y_range);
  bottom.frame(out, "Mean speed, speed variance, speed of vehicle 1", "time", "value");
  const std::vector<std::pair<const std::vector<double>*, std::string>> curves{
      {&obs.mean_speed, "mean speed"}, {&obs.speed_variance, "speed variance V(t)"},
      {&obs.single_vehicle_speed, "speed of vehicle 1"}};
  const std::size_t obs_stride = thinning(obs.times.size(), 3000);
  for (std::size_t c = 0; c < curves.size(); ++c) {
    std::vector<std::pair<double, double>> pts;
    for (std::size_t k = 0; k < obs.times.size(); k += obs_stride) pts.emplace_back(obs.times[k], (*curves[c].first)[k]);
    bottom.polyline(out, pts, kPalette[c + 1], 1.0);
    out << "<text x=\"" << 100 + 220 * c << "\" y=\"840\" font-size=\"12\" fill=\"" << kPalette[c + 1] << "\">"
        << curves[c].second << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string svg_spectrum(const Spectrum& spectrum) {
  std::ostringstream out;
  header(out, 640, 560);
  Range re, im;
  for (const auto& e : spectrum.entries) {
    re.add(e.lambda.real());
    im.add(e.lambda.imag());
  }
  re.add(0.0);
  im.add(0.0);
  const double pad_re = 0.05 * (re.hi - re.lo + 1e-9);
  const double pad_im = 0.05 * (im.hi - im.lo + 1e-9);
  re.lo -= pad_re, re.hi += pad_re, im.lo -= pad_im, im.hi += pad_im;
  const Panel panel(80, 40, 520, 440, re, im);
  panel.frame(out, std::string("Spectrum of B (") + std::string(regime_name(spectrum.regime)) + ")", "Re lambda",
              "Im lambda");
  panel.polyline(out, {{0.0, im.lo}, {0.0, im.hi}}, "#999999", 0.8);
  for (const auto& e : spectrum.entries) {
    const char* color = e.lambda.real() > kMarginalBand ? "#d62728" : "#1f77b4";
    out << "<circle cx=\"" << num(panel.px(e.lambda.real())) << "\" cy=\"" << num(panel.py(e.lambda.imag()))
        << "\" r=\"3\" fill=\"" << color << "\"><title>j=" << e.mode.j << " k=" << e.mode.k << " "
        << format_number(e.lambda.real()) << (e.lambda.imag() < 0 ? "" : "+") << format_number(e.lambda.imag())
        << "i</title></circle>\n";
  }
  out << "</svg>\n";
  return out.str();
}

std::string svg_stability_map(const std::vector<HeatmapCell>& cells, const std::string& x_label,
                              const std::string& y_label) {
  std::ostringstream out;
  header(out, 640, 600);
  std::vector<double> xs, ys;
  for (const auto& c : cells) {
    xs.push_back(c.x);
    ys.push_back(c.y);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  std::sort(ys.begin(), ys.end());
  ys.erase(std::unique(ys.begin(), ys.end()), ys.end());
  const double dx = xs.size() > 1 ? (xs.back() - xs.front()) / (xs.size() - 1) : 1.0;
  const double dy = ys.size() > 1 ? (ys.back() - ys.front()) / (ys.size() - 1) : 1.0;
  Range xr{xs.front() - dx / 2, xs.back() + dx / 2};
  Range yr{ys.front() - dy / 2, ys.back() + dy / 2};
  const Panel panel(80, 40, 520, 460, xr, yr);
  for (const auto& c : cells) {
    const char* fill = c.sufficient_stable ? "#2b8cbe" : c.exact_stable ? "#a6bddb" : "#fdd0a2";
    const double x0 = panel.px(c.x - dx / 2), x1 = panel.px(c.x + dx / 2);
    const double y0 = panel.py(c.y + dy / 2), y1 = panel.py(c.y - dy / 2);
    out << "<rect x=\"" << num(x0) << "\" y=\"" << num(y0) << "\" width=\"" << num(x1 - x0 + 0.3)
        << "\" height=\"" << num(y1 - y0 + 0.3) << "\" fill=\"" << fill << "\"/>\n";
  }
  panel.frame(out, "Closed-loop stability", x_label, y_label);
  out << "<text x=\"80\" y=\"570\" font-size=\"12\" fill=\"#2b8cbe\">sufficient and exact</text>\n"
      << "<text x=\"260\" y=\"570\" font-size=\"12\" fill=\"#6a8fc0\">exact only</text>\n"
      << "<text x=\"380\" y=\"570\" font-size=\"12\" fill=\"#e6550d\">unstable</text>\n"
      << "</svg>\n";
  return out.str();
}

}  // namespace phtraffic
