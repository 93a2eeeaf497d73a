#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace tsdr {

/// Tukey box: quartiles by linear interpolation, whiskers at the most
/// extreme values within 1.5 IQR of the box.
struct BoxStats {
  double q1 = 0.0;
  double median = 0.0;
  double q3 = 0.0;
  double whisker_lo = 0.0;
  double whisker_hi = 0.0;
  std::vector<double> outliers;
  std::size_t n = 0;
};

/// Throws InvalidInput on an empty sample. NaNs are ignored.
BoxStats box_stats(std::vector<double> values);

struct BoxSeries {
  std::string group;  // boxes of one group sit next to each other
  std::string label;
  std::vector<double> values;
};

struct BoxGeometry {
  struct Box {
    std::string group;
    std::string label;
    double x = 0.0;  // centre, in pixels
    double half_width = 0.0;
    BoxStats stats;
    double y_q1 = 0.0, y_median = 0.0, y_q3 = 0.0, y_lo = 0.0, y_hi = 0.0;  // pixels
    std::vector<double> y_outliers;
  };
  struct Group {
    std::string name;
    double x = 0.0;
  };
  double width = 0.0;
  double height = 0.0;
  double value_min = 0.0;
  double value_max = 0.0;
  std::vector<Box> boxes;
  std::vector<Group> groups;

  /// Pixel row of a data value.
  double y_of(double v) const;
};

/// Lays series out left to right in input order, one slot per box and one
/// gap between groups. Throws InvalidInput when there is nothing to draw.
BoxGeometry box_geometry(const std::vector<BoxSeries>& series, double width = 800,
                         double height = 480);

/// FNV-1a over the geometry rounded to 1e-6 pixels.
std::uint64_t geometry_hash(const BoxGeometry& geometry);

std::string render_box_svg(const BoxGeometry& geometry, const std::string& title,
                           const std::string& y_label);

/// Computes the geometry first, so nothing is written when it fails.
void write_box_plot(const std::vector<BoxSeries>& series, const std::filesystem::path& path,
                    const std::string& title, const std::string& y_label);

struct LineSeries {
  std::string label;
  std::vector<double> xs;
  std::vector<double> ys;
};

void write_line_plot(const std::vector<LineSeries>& series, const std::filesystem::path& path,
                     const std::string& title, const std::string& x_label,
                     const std::string& y_label);

void write_scatter_plot(const std::vector<double>& xs, const std::vector<double>& ys,
                        const std::filesystem::path& path, const std::string& title,
                        const std::string& x_label, const std::string& y_label);

/// Box series from per-cell study CSVs: one box per file holding the
/// `value_column` of its successful replicates, grouped and labelled by
/// metadata keys (e.g. group "T", label "H").
std::vector<BoxSeries> box_series_from_cells(const std::vector<std::filesystem::path>& files,
                                             const std::string& value_column,
                                             const std::string& group_key,
                                             const std::string& label_key);

/// One line per distinct `series_key` value: median of `value_column`
/// against the numeric metadata `x_key` (e.g. RMSE against the weight a).
std::vector<LineSeries> line_series_from_cells(const std::vector<std::filesystem::path>& files,
                                               const std::string& value_column,
                                               const std::string& x_key,
                                               const std::string& series_key);

}  // namespace tsdr
