#pragma once

#include <string>
#include <vector>

namespace onshap {

struct BarSeries {
  std::string name;
  std::vector<double> values;
  std::vector<double> errors;  // half-height of the error bar; empty for none
};

/// Grouped vertical bars, one group per category, with error bars.
std::string bar_chart_svg(const std::string& title, const std::vector<std::string>& categories,
                          const std::vector<BarSeries>& series);

struct LineSeries {
  std::string name;
  std::vector<double> x;
  std::vector<double> y;
};

std::string line_chart_svg(const std::string& title, const std::string& x_label,
                           const std::string& y_label, const std::vector<LineSeries>& series);

struct HistogramSeries {
  std::string name;
  std::vector<double> samples;
};

/// Overlaid step histograms normalised to unit area on shared bins.
std::string histogram_svg(const std::string& title, const std::vector<HistogramSeries>& series,
                          std::size_t bins = 40);

/// Grey-scale heat map of a rows x cols grid (row-major), diverging around 0.
std::string heatmap_svg(const std::string& title, const std::vector<double>& values,
                        std::size_t rows, std::size_t cols);

}  // namespace onshap
