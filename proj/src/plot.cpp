#include "ctr/plot.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "ctr/errors.hpp"

namespace ctr::plot {

namespace {

const char* kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"};

std::string ramp(double t) {
  t = std::clamp(t, 0.0, 1.0);
  const int r = static_cast<int>(255 * t);
  const int g = static_cast<int>(255 * (1.0 - std::abs(2.0 * t - 1.0)) * 0.8);
  const int b = static_cast<int>(255 * (1.0 - t));
  std::ostringstream os;
  os << "#" << std::hex << std::setfill('0') << std::setw(2) << r << std::setw(2) << g << std::setw(2) << b;
  return os.str();
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out += c;
    }
  }
  return out;
}

struct Range {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  void add(double v) {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  void pad() {
    if (!std::isfinite(lo)) lo = 0.0, hi = 1.0;
    if (hi - lo < 1e-12) lo -= 0.5, hi += 0.5;
    const double m = 0.05 * (hi - lo);
    lo -= m;
    hi += m;
  }
};

}  // namespace

void write_svg(const Figure& fig, std::ostream& out) {
  const double left = 70, right = 20, top = 40, bottom = 50;
  const double w = fig.width - left - right, h = fig.height - top - bottom;
  Range xr, yr, cr;
  for (const auto& s : fig.series) {
    for (double v : s.x) xr.add(v);
    for (double v : s.y) yr.add(v);
    for (double v : s.color) cr.add(v);
  }
  xr.pad();
  yr.pad();
  auto px = [&](double x) { return left + (x - xr.lo) / (xr.hi - xr.lo) * w; };
  auto py = [&](double y) { return top + h - (y - yr.lo) / (yr.hi - yr.lo) * h; };

  out << std::setprecision(6);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << fig.width << "\" height=\"" << fig.height
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << fig.width / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">" << escape(fig.title)
      << "</text>\n";
  out << "<rect x=\"" << left << "\" y=\"" << top << "\" width=\"" << w << "\" height=\"" << h
      << "\" fill=\"none\" stroke=\"black\"/>\n";
  for (int k = 0; k <= 5; ++k) {
    const double xv = xr.lo + (xr.hi - xr.lo) * k / 5.0;
    const double yv = yr.lo + (yr.hi - yr.lo) * k / 5.0;
    out << "<text x=\"" << px(xv) << "\" y=\"" << top + h + 16 << "\" text-anchor=\"middle\">" << xv << "</text>\n";
    out << "<text x=\"" << left - 6 << "\" y=\"" << py(yv) + 4 << "\" text-anchor=\"end\">" << yv << "</text>\n";
  }
  out << "<text x=\"" << left + w / 2 << "\" y=\"" << fig.height - 10 << "\" text-anchor=\"middle\">"
      << escape(fig.xlabel) << "</text>\n";
  out << "<text x=\"16\" y=\"" << top + h / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << top + h / 2
      << ")\">" << escape(fig.ylabel) << "</text>\n";

  for (std::size_t si = 0; si < fig.series.size(); ++si) {
    const auto& s = fig.series[si];
    const std::string base = kPalette[si % 6];
    if (s.line) {
      out << "<polyline fill=\"none\" stroke=\"" << base << "\" stroke-width=\"1.5\" points=\"";
      for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) out << px(s.x[i]) << "," << py(s.y[i]) << " ";
      out << "\"/>\n";
    } else {
      for (std::size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
        std::string fill = base;
        if (i < s.color.size() && cr.hi > cr.lo) fill = ramp((s.color[i] - cr.lo) / (cr.hi - cr.lo));
        out << "<circle cx=\"" << px(s.x[i]) << "\" cy=\"" << py(s.y[i]) << "\" r=\"2\" fill=\"" << fill << "\"/>\n";
      }
    }
    if (!s.label.empty()) {
      const double ly = top + 14 + 16 * static_cast<double>(si);
      out << "<rect x=\"" << left + w - 110 << "\" y=\"" << ly - 9 << "\" width=\"10\" height=\"10\" fill=\"" << base
          << "\"/>\n";
      out << "<text x=\"" << left + w - 95 << "\" y=\"" << ly << "\">" << escape(s.label) << "</text>\n";
    }
  }
  out << "</svg>\n";
}

void write_polar_svg(const std::string& title, const std::vector<double>& angle_deg, const std::vector<double>& radius,
                     std::ostream& out, int size) {
  const double c = size / 2.0, R = size / 2.0 - 40;
  double rmax = 0.0;
  for (double r : radius) {
    if (std::isfinite(r)) rmax = std::max(rmax, r);
  }
  if (rmax <= 0.0) rmax = 1.0;
  out << std::setprecision(6);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size << "\" height=\"" << size
      << "\" font-family=\"sans-serif\" font-size=\"11\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << c << "\" y=\"18\" text-anchor=\"middle\" font-size=\"14\">" << escape(title) << "</text>\n";
  for (int k = 1; k <= 4; ++k) {
    out << "<circle cx=\"" << c << "\" cy=\"" << c << "\" r=\"" << R * k / 4 << "\" fill=\"none\" stroke=\"#ccc\"/>\n";
    out << "<text x=\"" << c + 3 << "\" y=\"" << c - R * k / 4 - 2 << "\">" << rmax * k / 4 << "</text>\n";
  }
  for (int deg = 0; deg < 360; deg += 45) {
    const double t = deg * std::numbers::pi / 180.0;
    out << "<line x1=\"" << c << "\" y1=\"" << c << "\" x2=\"" << c + R * std::cos(t) << "\" y2=\""
        << c - R * std::sin(t) << "\" stroke=\"#ddd\"/>\n";
    out << "<text x=\"" << c + (R + 16) * std::cos(t) << "\" y=\"" << c - (R + 16) * std::sin(t) + 4
        << "\" text-anchor=\"middle\">" << (deg > 180 ? deg - 360 : deg) << "</text>\n";
  }
  for (std::size_t i = 0; i < angle_deg.size() && i < radius.size(); ++i) {
    const double t = angle_deg[i] * std::numbers::pi / 180.0;
    const double r = R * radius[i] / rmax;
    out << "<circle cx=\"" << c + r * std::cos(t) << "\" cy=\"" << c - r * std::sin(t) << "\" r=\"2\" fill=\""
        << ramp(radius[i] / rmax) << "\"/>\n";
  }
  out << "</svg>\n";
}

int Table::index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return static_cast<int>(i);
  }
  throw InvalidSpec("column '" + name + "' not found");
}

std::vector<double> Table::column(const std::string& name) const {
  const int i = index(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.at(static_cast<std::size_t>(i)));
  return out;
}

Table read_csv(std::istream& in) {
  Table t;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string cell;
    if (t.columns.empty()) {
      while (std::getline(ls, cell, ',')) t.columns.push_back(cell);
      continue;
    }
    std::vector<double> row;
    while (std::getline(ls, cell, ',')) row.push_back(std::stod(cell));
    if (row.size() != t.columns.size()) throw InvalidSpec("ragged CSV row");
    t.rows.push_back(std::move(row));
  }
  return t;
}

}  // namespace ctr::plot
