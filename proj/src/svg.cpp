#include "lglab/svg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include "lglab/types.hpp"

namespace lglab {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e",
                          "#9467bd", "#8c564b", "#17becf", "#7f7f7f"};

std::string num(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

// Round-ish tick positions: 5 evenly spaced values across the range.
std::vector<double> ticks(double lo, double hi) {
  std::vector<double> out;
  for (int i = 0; i <= 4; ++i) out.push_back(lo + (hi - lo) * i / 4.0);
  return out;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '&') out += "&amp;";
    else if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else out += c;
  }
  return out;
}

}  // namespace

std::string render_svg(const std::vector<Series>& series,
                       const PlotSpec& spec) {
  if (series.empty()) throw PreconditionError("render_svg: no series");
  double x_lo = std::numeric_limits<double>::infinity(), x_hi = -x_lo;
  double y_lo = x_lo, y_hi = -x_lo;
  for (const Series& s : series) {
    if (s.x.size() != s.y.size() || s.x.empty())
      throw PreconditionError("render_svg: series '" + s.label +
                              "' has mismatched or empty x/y");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      double yv = s.y[i];
      if (spec.log_y) {
        if (yv <= 0.0)
          throw PreconditionError(
              "render_svg: log scale requires positive y values");
        yv = std::log10(yv);
      }
      x_lo = std::min(x_lo, s.x[i]);
      x_hi = std::max(x_hi, s.x[i]);
      y_lo = std::min(y_lo, yv);
      y_hi = std::max(y_hi, yv);
    }
  }
  if (x_hi == x_lo) { x_lo -= 0.5; x_hi += 0.5; }
  if (y_hi == y_lo) { y_lo -= 0.5; y_hi += 0.5; }

  const double ml = 70, mr = 140, mt = 40, mb = 55;
  const double pw = spec.width - ml - mr, ph = spec.height - mt - mb;
  auto px = [&](double x) { return ml + (x - x_lo) / (x_hi - x_lo) * pw; };
  auto py = [&](double y) {
    const double yv = spec.log_y ? std::log10(y) : y;
    return mt + ph - (yv - y_lo) / (y_hi - y_lo) * ph;
  };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width
      << "\" height=\"" << spec.height << "\" font-family=\"sans-serif\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << spec.width / 2 << "\" y=\"24\" font-size=\"15\" "
         "text-anchor=\"middle\">" << escape(spec.title) << "</text>\n";

  // axes
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt + ph << "\" x2=\"" << ml + pw
      << "\" y2=\"" << mt + ph << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << ml << "\" y1=\"" << mt << "\" x2=\"" << ml
      << "\" y2=\"" << mt + ph << "\" stroke=\"black\"/>\n";
  for (double t : ticks(x_lo, x_hi)) {
    const double x = px(t);
    svg << "<line x1=\"" << num(x) << "\" y1=\"" << mt + ph << "\" x2=\""
        << num(x) << "\" y2=\"" << mt + ph + 5 << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << num(x) << "\" y=\"" << mt + ph + 20
        << "\" font-size=\"11\" text-anchor=\"middle\">" << num(t)
        << "</text>\n";
  }
  for (double t : ticks(y_lo, y_hi)) {
    const double y = mt + ph - (t - y_lo) / (y_hi - y_lo) * ph;
    const double shown = spec.log_y ? std::pow(10.0, t) : t;
    svg << "<line x1=\"" << ml - 5 << "\" y1=\"" << num(y) << "\" x2=\"" << ml
        << "\" y2=\"" << num(y) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << ml - 9 << "\" y=\"" << num(y + 4)
        << "\" font-size=\"11\" text-anchor=\"end\">" << num(shown)
        << "</text>\n";
  }
  svg << "<text x=\"" << ml + pw / 2 << "\" y=\"" << spec.height - 12
      << "\" font-size=\"13\" text-anchor=\"middle\">" << escape(spec.x_label)
      << "</text>\n";
  svg << "<text x=\"18\" y=\"" << mt + ph / 2
      << "\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 "
         "18 " << mt + ph / 2 << ")\">"
      << escape(spec.y_label) << (spec.log_y ? " (log)" : "") << "</text>\n";

  for (std::size_t si = 0; si < series.size(); ++si) {
    const Series& s = series[si];
    const char* color = kPalette[si % 8];
    svg << "<polyline fill=\"none\" stroke=\"" << color
        << "\" stroke-width=\"1.6\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      svg << num(px(s.x[i])) << "," << num(py(s.y[i])) << " ";
    svg << "\"/>\n";
    for (std::size_t i = 0; i < s.x.size(); ++i)
      svg << "<circle cx=\"" << num(px(s.x[i])) << "\" cy=\""
          << num(py(s.y[i])) << "\" r=\"2.4\" fill=\"" << color << "\"/>\n";
    const double ly = mt + 14 + 18.0 * si;
    svg << "<line x1=\"" << ml + pw + 12 << "\" y1=\"" << num(ly - 4)
        << "\" x2=\"" << ml + pw + 34 << "\" y2=\"" << num(ly - 4)
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    svg << "<text x=\"" << ml + pw + 40 << "\" y=\"" << num(ly)
        << "\" font-size=\"12\">" << escape(s.label) << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

}  // namespace lglab
