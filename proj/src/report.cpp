// SPDX-License-Identifier: Apache-2.0

#include "rankdist/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include "rankdist/error.hpp"

namespace rankdist {

std::string csv_field(std::string_view value) {
  if (value.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(value);
  std::string out = "\"";
  for (char c : value) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

std::string format_number(double value) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

CsvWriter::CsvWriter(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary | std::ios::trunc) {
  if (!out_) throw Error(ErrorCode::IoError, "cannot write " + path.string());
}

void CsvWriter::row(const std::vector<std::string>& fields) {
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out_ << ',';
    out_ << csv_field(fields[i]);
  }
  out_ << "\r\n";
}

void CsvWriter::close() {
  out_.close();
  if (!out_) throw Error(ErrorCode::IoError, "write failed for " + path_.string());
}

namespace {

std::string escape_xml(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

std::string fixed(double v, int digits = 2) {
  std::ostringstream s;
  s.setf(std::ios::fixed);
  s.precision(digits);
  s << v;
  return s.str();
}

}  // namespace

std::string scatter_svg(const std::vector<ScatterPoint>& points, const ScatterOptions& options) {
  constexpr double W = 480, H = 400, left = 60, right = 20, top = 40, bottom = 50;
  double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
  if (!points.empty()) {
    xmin = xmax = points.front().x;
    ymin = ymax = points.front().y;
    for (const auto& p : points) {
      xmin = std::min(xmin, p.x);
      xmax = std::max(xmax, p.x);
      ymin = std::min(ymin, p.y);
      ymax = std::max(ymax, p.y);
    }
  }
  if (options.unit_diagonal) {
    xmin = ymin = std::min(xmin, ymin);
    xmax = ymax = std::max(xmax, ymax);
  }
  auto pad = [](double& lo, double& hi) {
    const double span = hi - lo;
    const double m = span > 0 ? 0.08 * span : 0.5;
    lo -= m;
    hi += m;
  };
  pad(xmin, xmax);
  pad(ymin, ymax);
  auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * (W - left - right); };
  auto sy = [&](double y) { return H - bottom - (y - ymin) / (ymax - ymin) * (H - top - bottom); };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
      << "\" viewBox=\"0 0 " << W << ' ' << H << "\">\n";
  svg << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" "
         "font-size=\"14\">"
      << escape_xml(options.title) << "</text>\n";
  // axes
  svg << "<line x1=\"" << left << "\" y1=\"" << H - bottom << "\" x2=\"" << W - right << "\" y2=\""
      << H - bottom << "\" stroke=\"black\"/>\n";
  svg << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << H - bottom
      << "\" stroke=\"black\"/>\n";
  for (int t = 0; t <= 4; ++t) {
    const double xv = xmin + (xmax - xmin) * t / 4.0;
    const double yv = ymin + (ymax - ymin) * t / 4.0;
    svg << "<text x=\"" << fixed(sx(xv), 1) << "\" y=\"" << H - bottom + 16
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << fixed(xv)
        << "</text>\n";
    svg << "<text x=\"" << left - 6 << "\" y=\"" << fixed(sy(yv) + 3, 1)
        << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << fixed(yv)
        << "</text>\n";
  }
  svg << "<text x=\"" << (left + W - right) / 2 << "\" y=\"" << H - 12
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">"
      << escape_xml(options.x_label) << "</text>\n";
  svg << "<text x=\"16\" y=\"" << (top + H - bottom) / 2
      << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\" transform=\"rotate(-90 16 "
      << (top + H - bottom) / 2 << ")\">" << escape_xml(options.y_label) << "</text>\n";
  if (options.unit_diagonal) {
    const double lo = std::max(xmin, ymin);
    const double hi = std::min(xmax, ymax);
    svg << "<line x1=\"" << fixed(sx(lo), 1) << "\" y1=\"" << fixed(sy(lo), 1) << "\" x2=\""
        << fixed(sx(hi), 1) << "\" y2=\"" << fixed(sy(hi), 1)
        << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  }
  for (const auto& p : points) {
    svg << "<circle cx=\"" << fixed(sx(p.x), 1) << "\" cy=\"" << fixed(sy(p.y), 1)
        << "\" r=\"4\" fill=\"steelblue\">";
    if (!p.label.empty()) svg << "<title>" << escape_xml(p.label) << "</title>";
    svg << "</circle>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void write_scatter_svg(const std::vector<ScatterPoint>& points, const ScatterOptions& options,
                       const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
  out << scatter_svg(points, options);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

}  // namespace rankdist
