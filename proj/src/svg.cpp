#include "onshap/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace onshap {
namespace {

constexpr double kWidth = 720.0;
constexpr double kHeight = 420.0;
constexpr double kLeft = 70.0;
constexpr double kRight = 170.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 90.0;

const char* colour(std::size_t k) {
  static const char* palette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                                  "#9467bd", "#8c564b", "#e377c2", "#7f7f7f"};
  return palette[k % 8];
}

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(4);
  s << v;
  return s.str();
}

struct Axis {
  double lo;
  double hi;
  double top;
  double bottom;
  double map(double v) const { return bottom - (v - lo) / (hi - lo) * (bottom - top); }
};

Axis make_axis(double lo, double hi, double top, double bottom) {
  if (!(hi > lo)) {
    lo -= 0.5;
    hi += 0.5;
  }
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad, top, bottom};
}

void header(std::ostringstream& out, const std::string& title) {
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\">\n"
      << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      << "<text x=\"" << kWidth / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
      << escape(title) << "</text>\n";
}

void y_ticks(std::ostringstream& out, const Axis& axis) {
  for (int t = 0; t <= 4; ++t) {
    const double v = axis.lo + (axis.hi - axis.lo) * t / 4.0;
    const double y = axis.map(v);
    out << "<line x1=\"" << kLeft - 4 << "\" x2=\"" << kWidth - kRight << "\" y1=\"" << y
        << "\" y2=\"" << y << "\" stroke=\"#ddd\"/>\n"
        << "<text x=\"" << kLeft - 8 << "\" y=\"" << y + 4
        << "\" text-anchor=\"end\" font-size=\"11\">" << fmt(v) << "</text>\n";
  }
}

void legend(std::ostringstream& out, const std::vector<std::string>& names) {
  for (std::size_t k = 0; k < names.size(); ++k) {
    const double y = kTop + 10 + 20.0 * static_cast<double>(k);
    out << "<rect x=\"" << kWidth - kRight + 15 << "\" y=\"" << y - 10
        << "\" width=\"12\" height=\"12\" fill=\"" << colour(k) << "\"/>\n"
        << "<text x=\"" << kWidth - kRight + 33 << "\" y=\"" << y
        << "\" font-size=\"12\">" << escape(names[k]) << "</text>\n";
  }
}

}  // namespace

std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& categories,
                          const std::vector<BarSeries>& series) {
  double lo = 0.0, hi = 0.0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.values.size(); ++i) {
      const double e = i < s.errors.size() ? s.errors[i] : 0.0;
      lo = std::min(lo, s.values[i] - e);
      hi = std::max(hi, s.values[i] + e);
    }
  }
  const Axis axis = make_axis(lo, hi, kTop, kHeight - kBottom);
  std::ostringstream out;
  header(out, title);
  y_ticks(out, axis);
  const double plot_width = kWidth - kLeft - kRight;
  const double group = plot_width / static_cast<double>(std::max<std::size_t>(1, categories.size()));
  const double bar = 0.8 * group / static_cast<double>(std::max<std::size_t>(1, series.size()));
  const double zero = axis.map(0.0);
  for (std::size_t c = 0; c < categories.size(); ++c) {
    const double gx = kLeft + group * static_cast<double>(c) + 0.1 * group;
    for (std::size_t k = 0; k < series.size(); ++k) {
      if (c >= series[k].values.size()) continue;
      const double v = series[k].values[c];
      const double x = gx + bar * static_cast<double>(k);
      const double y = axis.map(v);
      out << "<rect x=\"" << x << "\" y=\"" << std::min(y, zero) << "\" width=\"" << bar
          << "\" height=\"" << std::abs(zero - y) << "\" fill=\"" << colour(k) << "\"/>\n";
      if (c < series[k].errors.size()) {
        const double e = series[k].errors[c];
        const double cx = x + bar / 2;
        out << "<line x1=\"" << cx << "\" x2=\"" << cx << "\" y1=\"" << axis.map(v - e)
            << "\" y2=\"" << axis.map(v + e) << "\" stroke=\"black\"/>\n";
      }
    }
    const double lx = kLeft + group * (static_cast<double>(c) + 0.5);
    const double ly = kHeight - kBottom + 14;
    out << "<text x=\"" << lx << "\" y=\"" << ly << "\" font-size=\"11\" text-anchor=\"end\" "
        << "transform=\"rotate(-40 " << lx << ' ' << ly << ")\">" << escape(categories[c])
        << "</text>\n";
  }
  out << "<line x1=\"" << kLeft << "\" x2=\"" << kWidth - kRight << "\" y1=\"" << zero
      << "\" y2=\"" << zero << "\" stroke=\"black\"/>\n";
  std::vector<std::string> names;
  for (const auto& s : series) names.push_back(s.name);
  legend(out, names);
  out << "</svg>\n";
  return out.str();
}

std::string line_chart_svg(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<LineSeries>& series) {
  double xlo = std::numeric_limits<double>::infinity(), xhi = -xlo;
  double ylo = 0.0, yhi = 0.0;
  for (const auto& s : series) {
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      xlo = std::min(xlo, s.x[i]);
      xhi = std::max(xhi, s.x[i]);
      ylo = std::min(ylo, s.y[i]);
      yhi = std::max(yhi, s.y[i]);
    }
  }
  if (!std::isfinite(xlo)) xlo = 0.0, xhi = 1.0;
  const Axis yaxis = make_axis(ylo, yhi, kTop, kHeight - kBottom);
  const double span = xhi > xlo ? xhi - xlo : 1.0;
  auto map_x = [&](double v) { return kLeft + (v - xlo) / span * (kWidth - kLeft - kRight); };
  std::ostringstream out;
  header(out, title);
  y_ticks(out, yaxis);
  for (int t = 0; t <= 4; ++t) {
    const double v = xlo + span * t / 4.0;
    out << "<text x=\"" << map_x(v) << "\" y=\"" << kHeight - kBottom + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(v) << "</text>\n";
  }
  out << "<text x=\"" << (kLeft + kWidth - kRight) / 2 << "\" y=\"" << kHeight - kBottom + 42
      << "\" text-anchor=\"middle\" font-size=\"13\">" << escape(x_label) << "</text>\n"
      << "<text x=\"18\" y=\"" << (kTop + kHeight - kBottom) / 2
      << "\" text-anchor=\"middle\" font-size=\"13\" transform=\"rotate(-90 18 "
      << (kTop + kHeight - kBottom) / 2 << ")\">" << escape(y_label) << "</text>\n";
  for (std::size_t k = 0; k < series.size(); ++k) {
    out << "<polyline fill=\"none\" stroke=\"" << colour(k) << "\" stroke-width=\"2\" points=\"";
    for (std::size_t i = 0; i < series[k].x.size(); ++i) {
      out << map_x(series[k].x[i]) << ',' << yaxis.map(series[k].y[i]) << ' ';
    }
    out << "\"/>\n";
    for (std::size_t i = 0; i < series[k].x.size(); ++i) {
      out << "<circle cx=\"" << map_x(series[k].x[i]) << "\" cy=\"" << yaxis.map(series[k].y[i])
          << "\" r=\"3\" fill=\"" << colour(k) << "\"/>\n";
    }
  }
  std::vector<std::string> names;
  for (const auto& s : series) names.push_back(s.name);
  legend(out, names);
  out << "</svg>\n";
  return out.str();
}

std::string histogram_svg(const std::string& title, const std::vector<HistogramSeries>& series,
                          std::size_t bins) {
  bins = std::max<std::size_t>(1, bins);
  double lo = std::numeric_limits<double>::infinity(), hi = -lo;
  for (const auto& s : series) {
    for (double v : s.samples) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
  if (!(hi > lo)) hi = lo + 1.0;
  const double width = (hi - lo) / static_cast<double>(bins);
  std::vector<std::vector<double>> density(series.size(), std::vector<double>(bins, 0.0));
  double top = 0.0;
  for (std::size_t k = 0; k < series.size(); ++k) {
    for (double v : series[k].samples) {
      const auto b = std::min(bins - 1, static_cast<std::size_t>((v - lo) / width));
      density[k][b] += 1.0;
    }
    const double norm = static_cast<double>(std::max<std::size_t>(1, series[k].samples.size())) * width;
    for (double& d : density[k]) {
      d /= norm;
      top = std::max(top, d);
    }
  }
  const Axis yaxis = make_axis(0.0, top, kTop, kHeight - kBottom);
  auto map_x = [&](double v) { return kLeft + (v - lo) / (hi - lo) * (kWidth - kLeft - kRight); };
  std::ostringstream out;
  header(out, title);
  y_ticks(out, yaxis);
  for (int t = 0; t <= 4; ++t) {
    const double v = lo + (hi - lo) * t / 4.0;
    out << "<text x=\"" << map_x(v) << "\" y=\"" << kHeight - kBottom + 18
        << "\" text-anchor=\"middle\" font-size=\"11\">" << fmt(v) << "</text>\n";
  }
  for (std::size_t k = 0; k < series.size(); ++k) {
    out << "<polyline fill=\"none\" stroke=\"" << colour(k) << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t b = 0; b < bins; ++b) {
      const double y = yaxis.map(density[k][b]);
      out << map_x(lo + width * static_cast<double>(b)) << ',' << y << ' '
          << map_x(lo + width * static_cast<double>(b + 1)) << ',' << y << ' ';
    }
    out << "\"/>\n";
  }
  std::vector<std::string> names;
  for (const auto& s : series) names.push_back(s.name);
  legend(out, names);
  out << "</svg>\n";
  return out.str();
}

std::string heatmap_svg(const std::string& title, const std::vector<double>& values,
                        std::size_t rows, std::size_t cols) {
  double scale = 0.0;
  for (double v : values) scale = std::max(scale, std::abs(v));
  if (scale == 0.0) scale = 1.0;
  const double cell = std::min((kHeight - kTop - 20.0) / static_cast<double>(std::max<std::size_t>(1, rows)),
                               (kWidth - 40.0) / static_cast<double>(std::max<std::size_t>(1, cols)));
  std::ostringstream out;
  header(out, title);
  const double x0 = (kWidth - cell * static_cast<double>(cols)) / 2;
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const double v = r * cols + c < values.size() ? values[r * cols + c] / scale : 0.0;
      const int shade = static_cast<int>(255.0 * (1.0 - std::abs(v)));
      const int red = v > 0 ? 255 : shade;
      const int blue = v < 0 ? 255 : shade;
      out << "<rect x=\"" << x0 + cell * static_cast<double>(c) << "\" y=\""
          << kTop + cell * static_cast<double>(r) << "\" width=\"" << cell << "\" height=\"" << cell
          << "\" fill=\"rgb(" << red << ',' << shade << ',' << blue << ")\"/>\n";
    }
  }
  out << "</svg>\n";
  return out.str();
}

}  // namespace onshap
