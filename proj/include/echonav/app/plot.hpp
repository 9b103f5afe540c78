#ifndef ECHONAV_APP_PLOT_HPP_
#define ECHONAV_APP_PLOT_HPP_

// Minimal SVG line and grouped-bar charts for experiment reports.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

namespace echonav::app {

struct Series {
  std::string label;
  std::string color;
  std::vector<double> y;
};

namespace plot_detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

inline std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Frame {
  double width = 560, height = 360, left = 64, right = 150, top = 36, bottom = 48;
  double y_min = 0.0, y_max = 1.0;

  double plot_w() const { return width - left - right; }
  double plot_h() const { return height - top - bottom; }
  double py(double v) const { return top + plot_h() * (1.0 - (v - y_min) / (y_max - y_min)); }
};

inline void y_range(const std::vector<Series>& series, Frame& f) {
  double hi = 0.0;
  for (const auto& s : series) {
    for (double v : s.y) hi = std::max(hi, v);
  }
  f.y_min = 0.0;
  f.y_max = hi > 0.0 ? hi * 1.1 : 1.0;
}

inline std::string open(const Frame& f, const std::string& title, const std::string& y_label) {
  std::string s = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + num(f.width) + "\" height=\"" +
                  num(f.height) + "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  s += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s += "<text x=\"" + num(f.left) + "\" y=\"20\" font-size=\"14\">" + escape(title) + "</text>\n";
  s += "<line x1=\"" + num(f.left) + "\" y1=\"" + num(f.top) + "\" x2=\"" + num(f.left) + "\" y2=\"" +
       num(f.top + f.plot_h()) + "\" stroke=\"black\"/>\n";
  s += "<line x1=\"" + num(f.left) + "\" y1=\"" + num(f.top + f.plot_h()) + "\" x2=\"" + num(f.left + f.plot_w()) +
       "\" y2=\"" + num(f.top + f.plot_h()) + "\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 4; ++k) {
    const double v = f.y_min + (f.y_max - f.y_min) * k / 4.0;
    s += "<text x=\"" + num(f.left - 6) + "\" y=\"" + num(f.py(v) + 4) + "\" text-anchor=\"end\">" + num(v) +
         "</text>\n";
  }
  s += "<text x=\"16\" y=\"" + num(f.top + f.plot_h() / 2) + "\" transform=\"rotate(-90 16 " +
       num(f.top + f.plot_h() / 2) + ")\" text-anchor=\"middle\">" + escape(y_label) + "</text>\n";
  return s;
}

inline std::string legend(const Frame& f, const std::vector<Series>& series) {
  std::string s;
  for (std::size_t i = 0; i < series.size(); ++i) {
    const double y = f.top + 12 + 18.0 * static_cast<double>(i);
    const double x = f.left + f.plot_w() + 12;
    s += "<rect x=\"" + num(x) + "\" y=\"" + num(y - 9) + "\" width=\"12\" height=\"10\" fill=\"" +
         series[i].color + "\"/>\n";
    s += "<text x=\"" + num(x + 18) + "\" y=\"" + num(y) + "\">" + escape(series[i].label) + "</text>\n";
  }
  return s;
}

}  // namespace plot_detail

/// One polyline per series over shared categorical x positions.
inline std::string svg_line_plot(const std::string& title, const std::string& x_label, const std::string& y_label,
                                 const std::vector<std::string>& x, const std::vector<Series>& series) {
  using namespace plot_detail;
  Frame f;
  y_range(series, f);
  auto px = [&](std::size_t i) {
    return f.left + f.plot_w() * (x.size() < 2 ? 0.5 : static_cast<double>(i) / static_cast<double>(x.size() - 1));
  };
  std::string s = open(f, title, y_label);
  for (std::size_t i = 0; i < x.size(); ++i) {
    s += "<text x=\"" + num(px(i)) + "\" y=\"" + num(f.top + f.plot_h() + 16) + "\" text-anchor=\"middle\">" +
         escape(x[i]) + "</text>\n";
  }
  s += "<text x=\"" + num(f.left + f.plot_w() / 2) + "\" y=\"" + num(f.height - 8) + "\" text-anchor=\"middle\">" +
       escape(x_label) + "</text>\n";
  for (const auto& sr : series) {
    std::string pts;
    for (std::size_t i = 0; i < sr.y.size() && i < x.size(); ++i) {
      if (!pts.empty()) pts += " ";
      pts += num(px(i)) + "," + num(f.py(sr.y[i]));
    }
    s += "<polyline fill=\"none\" stroke=\"" + sr.color + "\" stroke-width=\"2\" points=\"" + pts + "\"/>\n";
    for (std::size_t i = 0; i < sr.y.size() && i < x.size(); ++i) {
      s += "<circle cx=\"" + num(px(i)) + "\" cy=\"" + num(f.py(sr.y[i])) + "\" r=\"3\" fill=\"" + sr.color +
           "\"/>\n";
    }
  }
  s += legend(f, series);
  s += "</svg>\n";
  return s;
}

/// Bars grouped by category, one bar per series within each group.
inline std::string svg_bar_chart(const std::string& title, const std::string& y_label,
                                 const std::vector<std::string>& groups, const std::vector<Series>& series) {
  using namespace plot_detail;
  Frame f;
  y_range(series, f);
  std::string s = open(f, title, y_label);
  const double group_w = f.plot_w() / static_cast<double>(std::max<std::size_t>(groups.size(), 1));
  const double bar_w = group_w * 0.8 / static_cast<double>(std::max<std::size_t>(series.size(), 1));
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const double gx = f.left + group_w * static_cast<double>(g);
    s += "<text x=\"" + num(gx + group_w / 2) + "\" y=\"" + num(f.top + f.plot_h() + 16) +
         "\" text-anchor=\"middle\">" + escape(groups[g]) + "</text>\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
      if (g >= series[k].y.size()) continue;
      const double v = series[k].y[g];
      const double x = gx + group_w * 0.1 + bar_w * static_cast<double>(k);
      s += "<rect class=\"bar\" x=\"" + num(x) + "\" y=\"" + num(f.py(v)) + "\" width=\"" + num(bar_w) +
           "\" height=\"" + num(f.py(f.y_min) - f.py(v)) + "\" fill=\"" + series[k].color + "\"/>\n";
    }
  }
  s += legend(f, series);
  s += "</svg>\n";
  return s;
}

}  // namespace echonav::app

#endif  // ECHONAV_APP_PLOT_HPP_
