#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <ostream>
#include <string>

#include "quantband/io.hpp"

namespace quantband::io {
namespace {

constexpr double kWidth = 640.0;
constexpr double kHeight = 400.0;
constexpr double kMargin = 48.0;

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

}  // namespace

void write_band_svg(std::ostream& out, const QuantileGridFit& fit, const BandLevel& level,
                    std::size_t tau_index) {
  const auto xs = fit.grid.x();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    for (double v : {level.lower_two(j, tau_index), level.upper_two(j, tau_index),
                     fit.theta_hat(j, tau_index)}) {
      if (std::isfinite(v)) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
  }
  if (!(lo < hi)) {
    lo -= 1.0;
    hi += 1.0;
  }
  const double x0 = xs.front();
  const double x1 = xs.back();
  auto px = [&](double x) { return kMargin + (x - x0) / (x1 - x0) * (kWidth - 2 * kMargin); };
  auto py = [&](double y) { return kHeight - kMargin - (y - lo) / (hi - lo) * (kHeight - 2 * kMargin); };

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";

  std::string band;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    const double v = level.upper_two(j, tau_index);
    if (std::isfinite(v)) band += num(px(xs[j])) + ',' + num(py(v)) + ' ';
  }
  for (std::size_t j = xs.size(); j-- > 0;) {
    const double v = level.lower_two(j, tau_index);
    if (std::isfinite(v)) band += num(px(xs[j])) + ',' + num(py(v)) + ' ';
  }
  out << "<polygon fill=\"#9ecae1\" fill-opacity=\"0.6\" stroke=\"none\" points=\"" << band << "\"/>\n";

  std::string curve;
  for (std::size_t j = 0; j < xs.size(); ++j) {
    const double v = fit.theta_hat(j, tau_index);
    if (std::isfinite(v)) curve += num(px(xs[j])) + ',' + num(py(v)) + ' ';
  }
  out << "<polyline fill=\"none\" stroke=\"#08519c\" stroke-width=\"2\" points=\"" << curve << "\"/>\n";

  out << "<line x1=\"" << kMargin << "\" y1=\"" << kHeight - kMargin << "\" x2=\"" << kWidth - kMargin
      << "\" y2=\"" << kHeight - kMargin << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << kMargin << "\" y1=\"" << kMargin << "\" x2=\"" << kMargin << "\" y2=\""
      << kHeight - kMargin << "\" stroke=\"black\"/>\n";
  auto label = [&](double x, double y, const std::string& text, const char* anchor) {
    out << "<text x=\"" << num(x) << "\" y=\"" << num(y) << "\" font-size=\"12\" font-family=\"sans-serif\" "
        << "text-anchor=\"" << anchor << "\">" << text << "</text>\n";
  };
  label(kMargin, kHeight - kMargin + 16, num(x0), "middle");
  label(kWidth - kMargin, kHeight - kMargin + 16, num(x1), "middle");
  label(kMargin - 6, kHeight - kMargin, num(lo), "end");
  label(kMargin - 6, kMargin + 4, num(hi), "end");
  char title[96];
  std::snprintf(title, sizeof title, "tau = %.3f, 1 - alpha = %.3f", fit.grid.tau()[tau_index],
                1.0 - level.alpha);
  label(kWidth / 2, kMargin / 2, title, "middle");
  out << "</svg>\n";
}

}  // namespace quantband::io
