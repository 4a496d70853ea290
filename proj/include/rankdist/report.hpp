// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <fstream>
#include <initializer_list>
#include <string>
#include <string_view>
#include <vector>

namespace rankdist {

/// RFC 4180 field quoting.
std::string csv_field(std::string_view value);

/// Shortest round-trip decimal form of a double.
std::string format_number(double value);

class CsvWriter {
 public:
  explicit CsvWriter(const std::filesystem::path& path);

  void row(const std::vector<std::string>& fields);
  void close();

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

struct ScatterPoint {
  double x = 0.0;
  double y = 0.0;
  std::string label;
};

struct ScatterOptions {
  std::string title;
  std::string x_label;
  std::string y_label;
  bool unit_diagonal = false;
};

/// Minimal SVG scatter plot with axes, tick labels and an optional y = x line.
std::string scatter_svg(const std::vector<ScatterPoint>& points, const ScatterOptions& options);
void write_scatter_svg(const std::vector<ScatterPoint>& points, const ScatterOptions& options,
                       const std::filesystem::path& path);

}  // namespace rankdist
