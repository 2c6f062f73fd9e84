#include "fg/svg.hpp"

#include <algorithm>
#include <cmath>

#include "fg/common.hpp"

namespace fg {

namespace {

constexpr int kW = 720, kH = 440;
constexpr int kL = 70, kR = 20, kT = 40, kB = 50;

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

std::string esc(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&')
      out += "&amp;";
    else if (c == '<')
      out += "&lt;";
    else if (c == '>')
      out += "&gt;";
    else
      out += c;
  }
  return out;
}

} // namespace

std::string render_line_chart(const ChartSpec& spec, const std::vector<Series>& series) {
  auto tx = [&](double v) { return spec.log_x ? std::log10(v) : v; };
  auto ty = [&](double v) { return spec.log10_y ? std::log10(std::max(v, 1e-300)) : v; };

  double xmin = HUGE_VAL, xmax = -HUGE_VAL, ymin = HUGE_VAL, ymax = -HUGE_VAL;
  for (const auto& s : series) {
    for (size_t i = 0; i < s.x.size(); ++i) {
      double xv = tx(s.x[i]), yv = ty(s.y[i]);
      if (!std::isfinite(xv) || !std::isfinite(yv)) continue;
      xmin = std::min(xmin, xv);
      xmax = std::max(xmax, xv);
      ymin = std::min(ymin, yv);
      ymax = std::max(ymax, yv);
    }
  }
  if (!(xmin <= xmax)) raise(Err::Contract, "chart has no finite points");
  if (xmax - xmin < 1e-12) {
    xmin -= 0.5;
    xmax += 0.5;
  }
  if (ymax - ymin < 1e-12) {
    ymin -= 0.5;
    ymax += 0.5;
  }
  double ypad = 0.05 * (ymax - ymin);
  ymin -= ypad;
  ymax += ypad;

  auto px = [&](double v) { return kL + (v - xmin) / (xmax - xmin) * (kW - kL - kR); };
  auto py = [&](double v) { return kH - kB - (v - ymin) / (ymax - ymin) * (kH - kT - kB); };

  std::string svg = strf(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"%d\" height=\"%d\" viewBox=\"0 0 %d %d\">\n", kW, kH,
      kW, kH);
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += strf("<text x=\"%d\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">%s</text>\n",
              kW / 2, esc(spec.title).c_str());

  // axes
  svg += strf("<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n", kL, kH - kB, kW - kR, kH - kB);
  svg += strf("<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"black\"/>\n", kL, kT, kL, kH - kB);

  for (int t = 0; t <= 5; ++t) {
    double xv = xmin + (xmax - xmin) * t / 5.0;
    double yv = ymin + (ymax - ymin) * t / 5.0;
    double xp = px(xv), yp = py(yv);
    svg += strf("<line x1=\"%.1f\" y1=\"%d\" x2=\"%.1f\" y2=\"%d\" stroke=\"black\"/>\n", xp, kH - kB, xp,
                kH - kB + 5);
    svg += strf("<text x=\"%.1f\" y=\"%d\" font-family=\"sans-serif\" font-size=\"11\" "
                "text-anchor=\"middle\">%s%.4g</text>\n",
                xp, kH - kB + 18, spec.log_x ? "1e" : "", spec.log_x ? xv : xv);
    svg += strf("<line x1=\"%d\" y1=\"%.1f\" x2=\"%d\" y2=\"%.1f\" stroke=\"black\"/>\n", kL - 5, yp, kL, yp);
    svg += strf("<text x=\"%d\" y=\"%.1f\" font-family=\"sans-serif\" font-size=\"11\" "
                "text-anchor=\"end\">%s%.4g</text>\n",
                kL - 8, yp + 4, spec.log10_y ? "1e" : "", spec.log10_y ? yv : yv);
  }
  svg += strf("<text x=\"%d\" y=\"%d\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">%s</text>\n",
              (kL + kW - kR) / 2, kH - 12, esc(spec.xlabel).c_str());
  svg += strf("<text x=\"16\" y=\"%d\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" "
              "transform=\"rotate(-90 16 %d)\">%s</text>\n",
              (kT + kH - kB) / 2, (kT + kH - kB) / 2, esc(spec.ylabel).c_str());

  for (size_t si = 0; si < series.size(); ++si) {
    const auto& s = series[si];
    const char* color = kPalette[si % 6];
    std::string pts;
    for (size_t i = 0; i < s.x.size(); ++i) {
      double xv = tx(s.x[i]), yv = ty(s.y[i]);
      if (!std::isfinite(xv) || !std::isfinite(yv)) continue;
      pts += strf("%.2f,%.2f ", px(xv), py(yv));
    }
    if (!pts.empty()) {
      svg += strf("<polyline fill=\"none\" stroke=\"%s\" stroke-width=\"1.5\" points=\"", color);
      svg += pts;
      svg += "\"/>\n";
    }
    int ly = kT + 16 * static_cast<int>(si);
    svg += strf("<line x1=\"%d\" y1=\"%d\" x2=\"%d\" y2=\"%d\" stroke=\"%s\" stroke-width=\"2\"/>\n", kW - kR - 130,
                ly, kW - kR - 110, ly, color);
    svg += strf("<text x=\"%d\" y=\"%d\" font-family=\"sans-serif\" font-size=\"11\">%s</text>\n", kW - kR - 104,
                ly + 4, esc(s.label).c_str());
  }

  svg += "</svg>\n";
  return svg;
}

} // namespace fg
