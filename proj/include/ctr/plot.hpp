#pragma once

// Minimal SVG rendering for evaluation and tracking data.

#include <iosfwd>
#include <string>
#include <vector>

namespace ctr::plot {

struct Series {
  std::string label;
  std::vector<double> x, y;
  std::vector<double> color;  // optional per-point value mapped to a colour ramp
  bool line = false;
};

struct Figure {
  std::string title, xlabel, ylabel;
  std::vector<Series> series;
  int width = 640, height = 480;
};

void write_svg(const Figure& fig, std::ostream& out);

// Polar scatter of (angle in degrees, radius).
void write_polar_svg(const std::string& title, const std::vector<double>& angle_deg, const std::vector<double>& radius,
                     std::ostream& out, int size = 480);

// Numeric CSV with a header row; lines starting with '#' are skipped.
struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;

  int index(const std::string& name) const;  // throws InvalidSpec when missing
  std::vector<double> column(const std::string& name) const;
};

Table read_csv(std::istream& in);

}  // namespace ctr::plot
