#include "semex/util/svg.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace semex::util {

namespace {

constexpr const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                    "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::string escape(const std::string& s) {
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

// Round tick spacing to 1/2/5 times a power of ten.
double nice_step(double span, int target_ticks) {
  if (span <= 0.0) return 1.0;
  const double raw = span / target_ticks;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag) return m * mag;
  return 10.0 * mag;
}

}  // namespace

std::string render_line_plot(const PlotSpec& spec, const std::vector<Series>& series,
                             const std::vector<Marker>& markers) {
  const double w = spec.width, h = spec.height;
  const double ml = 62, mr = 16, mt = 34, mb = 46;  // plot margins
  const double pw = w - ml - mr, ph = h - mt - mb;

  bool any = false;
  double xlo = 0, xhi = 1, ylo = 0, yhi = 1;
  for (const Series& s : series) {
    if (s.x.size() != s.y.size()) throw std::invalid_argument("series x/y size mismatch");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (!any) {
        xlo = xhi = s.x[i];
        ylo = yhi = s.y[i];
        any = true;
      } else {
        xlo = std::min(xlo, s.x[i]);
        xhi = std::max(xhi, s.x[i]);
        ylo = std::min(ylo, s.y[i]);
        yhi = std::max(yhi, s.y[i]);
      }
    }
  }
  for (const Marker& m : markers) {
    if (!any) {
      xlo = xhi = m.x;
      any = true;
    } else {
      xlo = std::min(xlo, m.x);
      xhi = std::max(xhi, m.x);
    }
  }
  if (xhi <= xlo) xhi = xlo + 1.0;
  if (yhi <= ylo) yhi = ylo + 1.0;
  // Pad the y range a little so lines do not hug the frame.
  const double ypad = 0.05 * (yhi - ylo);
  ylo -= ypad;
  yhi += ypad;

  const auto px = [&](double x) { return ml + (x - xlo) / (xhi - xlo) * pw; };
  const auto py = [&](double y) { return mt + (yhi - y) / (yhi - ylo) * ph; };

  std::ostringstream out;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << spec.width
      << "\" height=\"" << spec.height << "\" viewBox=\"0 0 " << spec.width << ' '
      << spec.height << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << fmt(w / 2) << "\" y=\"20\" text-anchor=\"middle\" "
         "font-family=\"sans-serif\" font-size=\"14\">"
      << escape(spec.title) << "</text>\n";

  // Gridlines and tick labels.
  const double xstep = nice_step(xhi - xlo, 6);
  const double ystep = nice_step(yhi - ylo, 5);
  out << "<g font-family=\"sans-serif\" font-size=\"10\" fill=\"#444444\">\n";
  for (double t = std::ceil(xlo / xstep) * xstep; t <= xhi + 1e-9 * xstep; t += xstep) {
    const double X = px(t);
    out << "<line x1=\"" << fmt(X) << "\" y1=\"" << fmt(mt) << "\" x2=\"" << fmt(X)
        << "\" y2=\"" << fmt(mt + ph) << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << fmt(X) << "\" y=\"" << fmt(mt + ph + 14)
        << "\" text-anchor=\"middle\">" << fmt(t) << "</text>\n";
  }
  for (double t = std::ceil(ylo / ystep) * ystep; t <= yhi + 1e-9 * ystep; t += ystep) {
    const double Y = py(t);
    out << "<line x1=\"" << fmt(ml) << "\" y1=\"" << fmt(Y) << "\" x2=\"" << fmt(ml + pw)
        << "\" y2=\"" << fmt(Y) << "\" stroke=\"#dddddd\"/>\n";
    out << "<text x=\"" << fmt(ml - 6) << "\" y=\"" << fmt(Y + 3)
        << "\" text-anchor=\"end\">" << fmt(t) << "</text>\n";
  }
  out << "</g>\n";

  // Frame and axis labels.
  out << "<rect x=\"" << fmt(ml) << "\" y=\"" << fmt(mt) << "\" width=\"" << fmt(pw)
      << "\" height=\"" << fmt(ph) << "\" fill=\"none\" stroke=\"#333333\"/>\n";
  out << "<text x=\"" << fmt(ml + pw / 2) << "\" y=\"" << fmt(h - 10)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
      << escape(spec.xlabel) << "</text>\n";
  out << "<text x=\"14\" y=\"" << fmt(mt + ph / 2)
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" "
         "transform=\"rotate(-90 14 "
      << fmt(mt + ph / 2) << ")\">" << escape(spec.ylabel) << "</text>\n";

  // Event markers under the data lines.
  for (const Marker& m : markers) {
    const double X = px(m.x);
    out << "<line x1=\"" << fmt(X) << "\" y1=\"" << fmt(mt) << "\" x2=\"" << fmt(X)
        << "\" y2=\"" << fmt(mt + ph) << "\" stroke=\"" << m.color
        << "\" stroke-dasharray=\"4 3\"/>\n";
    if (!m.label.empty())
      out << "<text x=\"" << fmt(X + 3) << "\" y=\"" << fmt(mt + 12)
          << "\" font-family=\"sans-serif\" font-size=\"10\" fill=\"" << m.color << "\">"
          << escape(m.label) << "</text>\n";
  }

  for (std::size_t si = 0; si < series.size(); ++si) {
    const Series& s = series[si];
    const std::string color =
        s.color.empty() ? kPalette[si % (sizeof(kPalette) / sizeof(kPalette[0]))] : s.color;
    out << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\" points=\"";
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (!std::isfinite(s.x[i]) || !std::isfinite(s.y[i])) continue;
      if (i) out << ' ';
      out << fmt(px(s.x[i])) << ',' << fmt(py(s.y[i]));
    }
    out << "\"/>\n";
    // Legend entry.
    const double ly = mt + 14 + 14 * static_cast<double>(si);
    out << "<line x1=\"" << fmt(ml + pw - 120) << "\" y1=\"" << fmt(ly - 4) << "\" x2=\""
        << fmt(ml + pw - 100) << "\" y2=\"" << fmt(ly - 4) << "\" stroke=\"" << color
        << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << fmt(ml + pw - 96) << "\" y=\"" << fmt(ly)
        << "\" font-family=\"sans-serif\" font-size=\"10\">" << escape(s.label)
        << "</text>\n";
  }
  out << "</svg>\n";
  return out.str();
}

void write_line_plot(const std::string& path, const PlotSpec& spec,
                     const std::vector<Series>& series, const std::vector<Marker>& markers) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << render_line_plot(spec, series, markers);
  if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace semex::util
