#include <algorithm>
#include <cmath>
#include <cstdio>
#include <string>

#include "rearsim/cli.hpp"

namespace rearsim::cli {

namespace {

constexpr double kWidth = 760.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 170.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 50.0;
constexpr const char* kPalette[] = {"#222222", "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string f2(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char ch : s) {
    switch (ch) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += ch;
    }
  }
  return out;
}

/// 1, 2 or 5 times a power of ten, giving roughly `target` ticks over `span`.
double nice_step(double span, int target) {
  const double raw = span / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0}) {
    if (m * mag >= raw) return m * mag;
  }
  return 10.0 * mag;
}

struct Frame {
  double x_max;
  double y_max;
  double px(double x) const { return kLeft + (kWidth - kLeft - kRight) * x / x_max; }
  double py(double y) const { return kHeight - kBottom - (kHeight - kTop - kBottom) * y / y_max; }
};

std::string open(const std::string& title) {
  return "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + f2(kWidth) + "\" height=\"" + f2(kHeight) +
         "\" font-family=\"sans-serif\" font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
         "<text x=\"" + f2(kWidth / 2) + "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" + escape(title) +
         "</text>\n";
}

std::string y_axis(const Frame& f, const std::string& label) {
  std::string s = "<line x1=\"" + f2(kLeft) + "\" y1=\"" + f2(f.py(0)) + "\" x2=\"" + f2(kLeft) + "\" y2=\"" +
                  f2(f.py(f.y_max)) + "\" stroke=\"black\"/>\n";
  const double step = nice_step(f.y_max, 5);
  for (double y = 0.0; y <= f.y_max * (1 + 1e-9); y += step) {
    s += "<line x1=\"" + f2(kLeft - 4) + "\" y1=\"" + f2(f.py(y)) + "\" x2=\"" + f2(kLeft) + "\" y2=\"" +
         f2(f.py(y)) + "\" stroke=\"black\"/>\n<text x=\"" + f2(kLeft - 7) + "\" y=\"" + f2(f.py(y) + 4) +
         "\" text-anchor=\"end\">" + (step < 0.1 ? f2(y * 100).substr(0, 5) + "%" : f2(y)) + "</text>\n";
  }
  s += "<text transform=\"translate(16," + f2((kTop + kHeight - kBottom) / 2) +
       ") rotate(-90)\" text-anchor=\"middle\">" + escape(label) + "</text>\n";
  return s;
}

}  // namespace

std::string svg_histograms(const std::string& title, const std::vector<Series>& series) {
  double x_max = 10.0;
  double y_max = 0.0;
  for (const auto& s : series) {
    const double total = s.hist.total();
    if (total > 0.0) y_max = std::max(y_max, s.hist.weights.maxCoeff() / total);
    x_max = std::max(x_max, s.hist.bin_high(s.hist.bins() - 1));
  }
  const Frame f{x_max, y_max > 0.0 ? 1.1 * y_max : 1.0};
  std::string svg = open(title) + y_axis(f, "share of crashes");
  svg += "<line x1=\"" + f2(kLeft) + "\" y1=\"" + f2(f.py(0)) + "\" x2=\"" + f2(f.px(x_max)) + "\" y2=\"" +
         f2(f.py(0)) + "\" stroke=\"black\"/>\n";
  const double step = nice_step(x_max, 8);
  for (double x = 0.0; x <= x_max + 1e-9; x += step) {
    svg += "<text x=\"" + f2(f.px(x)) + "\" y=\"" + f2(f.py(0) + 16) + "\" text-anchor=\"middle\">" + f2(x).substr(0, f2(x).find('.')) +
           "</text>\n";
  }
  svg += "<text x=\"" + f2(f.px(x_max / 2)) + "\" y=\"" + f2(kHeight - 12) + "\" text-anchor=\"middle\">delta-v (km/h)</text>\n";

  for (std::size_t i = 0; i < series.size(); ++i) {
    const auto& h = series[i].hist;
    const double total = h.total();
    const char* colour = kPalette[i % std::size(kPalette)];
    std::string pts = f2(f.px(0)) + "," + f2(f.py(0));
    for (Eigen::Index k = 0; k < h.bins(); ++k) {
      const double y = total > 0.0 ? h.weights[k] / total : 0.0;
      pts += " " + f2(f.px(h.bin_low(k))) + "," + f2(f.py(y)) + " " + f2(f.px(h.bin_high(k))) + "," + f2(f.py(y));
    }
    if (h.bins() > 0) pts += " " + f2(f.px(h.bin_high(h.bins() - 1))) + "," + f2(f.py(0));
    svg += "<polyline fill=\"none\" stroke=\"" + std::string(colour) + "\" stroke-width=\"1.6\" points=\"" + pts + "\"/>\n";
    const double ly = kTop + 18.0 * static_cast<double>(i);
    svg += "<line x1=\"" + f2(kWidth - kRight + 12) + "\" y1=\"" + f2(ly) + "\" x2=\"" + f2(kWidth - kRight + 32) +
           "\" y2=\"" + f2(ly) + "\" stroke=\"" + colour + "\" stroke-width=\"2\"/>\n<text x=\"" +
           f2(kWidth - kRight + 38) + "\" y=\"" + f2(ly + 4) + "\">" + escape(series[i].name) + "</text>\n";
  }
  return svg + "</svg>\n";
}

std::string svg_bars(const std::string& title, const std::vector<std::string>& labels, const std::vector<double>& values,
                     const std::string& y_label) {
  double y_max = 0.0;
  for (double v : values) y_max = std::max(y_max, v);
  const auto n = static_cast<double>(std::max<std::size_t>(values.size(), 1));
  const Frame f{n, y_max > 0.0 ? 1.1 * y_max : 1.0};
  std::string svg = open(title) + y_axis(f, y_label);
  svg += "<line x1=\"" + f2(kLeft) + "\" y1=\"" + f2(f.py(0)) + "\" x2=\"" + f2(f.px(n)) + "\" y2=\"" + f2(f.py(0)) +
         "\" stroke=\"black\"/>\n";
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double x0 = f.px(static_cast<double>(i) + 0.1);
    const double x1 = f.px(static_cast<double>(i) + 0.9);
    const double top = f.py(std::max(0.0, values[i]));
    svg += "<rect x=\"" + f2(x0) + "\" y=\"" + f2(top) + "\" width=\"" + f2(x1 - x0) + "\" height=\"" +
           f2(f.py(0) - top) + "\" fill=\"#1f77b4\"/>\n<text x=\"" + f2((x0 + x1) / 2) + "\" y=\"" +
           f2(f.py(0) + 16) + "\" text-anchor=\"middle\">" + escape(labels[i]) + "</text>\n";
  }
  return svg + "</svg>\n";
}

}  // namespace rearsim::cli
