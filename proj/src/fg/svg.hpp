#pragma once

#include <string>
#include <vector>

namespace fg {

struct Series {
  std::string label;
  std::vector<double> x, y;
};

struct ChartSpec {
  std::string title, xlabel, ylabel;
  bool log_x = false;    // plot log10(x) positions (bandwidth sweeps)
  bool log10_y = false;  // plot log10(y) positions (wide NLL ranges)
};

// Deterministic standalone SVG line chart; no timestamps, byte-stable.
std::string render_line_chart(const ChartSpec& spec, const std::vector<Series>& series);

} // namespace fg
