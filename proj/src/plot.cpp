#include "tsdr/plot.hpp"

#include "tsdr/csv.hpp"
#include "tsdr/error.hpp"
#include "tsdr/series.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>

namespace tsdr {

namespace {

constexpr double kLeft = 70.0;
constexpr double kRight = 20.0;
constexpr double kTop = 40.0;
constexpr double kBottom = 70.0;

const char* const kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd",
                                "#ff7f0e", "#8c564b", "#e377c2", "#17becf"};

std::string escape(const std::string& text) {
  std::string out;
  for (char c : text) {
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

std::string svg_open(double width, double height, const std::string& title) {
  return fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{0:.0f}\" height=\"{1:.0f}\" "
      "viewBox=\"0 0 {0:.0f} {1:.0f}\" font-family=\"sans-serif\" font-size=\"11\">\n"
      "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
      "<text x=\"{2:.1f}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{3}</text>\n",
      width, height, width / 2, escape(title));
}

struct Range {
  double lo = 0.0;
  double hi = 1.0;
};

Range padded(double lo, double hi) {
  if (!(hi > lo)) return {lo - 0.5, hi + 0.5};
  const double pad = 0.05 * (hi - lo);
  return {lo - pad, hi + pad};
}

// Frame, horizontal ticks and axis labels for a plot area with the given
// value range on the vertical axis.
std::string value_axis(double width, double height, Range range, const std::string& y_label) {
  const double plot_h = height - kTop - kBottom;
  std::string out = fmt::format(
      "<rect x=\"{:.1f}\" y=\"{:.1f}\" width=\"{:.1f}\" height=\"{:.1f}\" fill=\"none\" "
      "stroke=\"black\"/>\n",
      kLeft, kTop, width - kLeft - kRight, plot_h);
  for (int k = 0; k <= 4; ++k) {
    const double v = range.lo + (range.hi - range.lo) * k / 4.0;
    const double y = kTop + plot_h * (1.0 - k / 4.0);
    out += fmt::format(
        "<line x1=\"{0:.1f}\" y1=\"{1:.3f}\" x2=\"{2:.1f}\" y2=\"{1:.3f}\" stroke=\"#dddddd\"/>\n"
        "<text x=\"{3:.1f}\" y=\"{4:.3f}\" text-anchor=\"end\">{5:.3g}</text>\n",
        kLeft, y, width - kRight, kLeft - 5, y + 4, v);
  }
  out += fmt::format(
      "<text x=\"16\" y=\"{0:.1f}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {0:.1f})\">"
      "{1}</text>\n",
      kTop + plot_h / 2, escape(y_label));
  return out;
}

void hash_bytes(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
}

void hash_value(std::uint64_t& h, double v) {
  const auto q = static_cast<long long>(std::llround(v * 1e6));
  hash_bytes(h, &q, sizeof q);
}

void hash_text(std::uint64_t& h, const std::string& s) {
  hash_bytes(h, s.data(), s.size());
  hash_bytes(h, "\0", 1);
}

std::vector<double> ok_values(const CsvTable& table, const std::string& column) {
  const auto col = table.column(column);
  const auto status = table.column("status");
  std::vector<double> out;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    if (table.rows[r][status] != "ok") continue;
    const double v = table.number(r, col);
    if (std::isfinite(v)) out.push_back(v);
  }
  return out;
}

const std::string& meta_of(const CsvTable& table, const std::filesystem::path& file,
                           const std::string& key) {
  const auto it = table.metadata.find(key);
  if (it == table.metadata.end()) {
    throw Error(ErrorCode::Parse, fmt::format("{}: metadata '{}' missing", file.string(), key));
  }
  return it->second;
}

}  // namespace

BoxStats box_stats(std::vector<double> values) {
  std::erase_if(values, [](double v) { return std::isnan(v); });
  if (values.empty()) throw Error(ErrorCode::InvalidInput, "box plot of an empty sample");
  std::sort(values.begin(), values.end());
  BoxStats s;
  s.n = values.size();
  s.q1 = quantile(values, 0.25);
  s.median = quantile(values, 0.5);
  s.q3 = quantile(values, 0.75);
  const double fence = 1.5 * (s.q3 - s.q1);
  s.whisker_lo = s.q1;
  s.whisker_hi = s.q3;
  for (double v : values) {
    if (v < s.q1 - fence || v > s.q3 + fence) {
      s.outliers.push_back(v);
    } else {
      s.whisker_lo = std::min(s.whisker_lo, v);
      s.whisker_hi = std::max(s.whisker_hi, v);
    }
  }
  return s;
}

double BoxGeometry::y_of(double v) const {
  const double plot_h = height - kTop - kBottom;
  return kTop + (value_max - v) / (value_max - value_min) * plot_h;
}

BoxGeometry box_geometry(const std::vector<BoxSeries>& series, double width, double height) {
  if (series.empty()) throw Error(ErrorCode::InvalidInput, "nothing to plot");
  BoxGeometry g;
  g.width = width;
  g.height = height;

  std::vector<BoxStats> stats;
  double lo = INFINITY;
  double hi = -INFINITY;
  for (const auto& s : series) {
    auto st = box_stats(s.values);
    lo = std::min(lo, st.whisker_lo);
    hi = std::max(hi, st.whisker_hi);
    for (double o : st.outliers) {
      lo = std::min(lo, o);
      hi = std::max(hi, o);
    }
    stats.push_back(std::move(st));
  }
  const Range range = padded(lo, hi);
  g.value_min = range.lo;
  g.value_max = range.hi;

  int gaps = 0;
  for (std::size_t i = 1; i < series.size(); ++i) gaps += series[i].group != series[i - 1].group;
  const double slot = (width - kLeft - kRight) / static_cast<double>(series.size() + gaps);
  double x = kLeft + slot / 2;
  std::size_t group_start = 0;
  for (std::size_t i = 0; i < series.size(); ++i) {
    if (i > 0 && series[i].group != series[i - 1].group) {
      g.groups.push_back({series[i - 1].group, (g.boxes[group_start].x + g.boxes[i - 1].x) / 2});
      group_start = i;
      x += slot;
    }
    BoxGeometry::Box b;
    b.group = series[i].group;
    b.label = series[i].label;
    b.x = x;
    b.half_width = 0.35 * slot;
    b.stats = stats[i];
    b.y_q1 = g.y_of(b.stats.q1);
    b.y_median = g.y_of(b.stats.median);
    b.y_q3 = g.y_of(b.stats.q3);
    b.y_lo = g.y_of(b.stats.whisker_lo);
    b.y_hi = g.y_of(b.stats.whisker_hi);
    for (double o : b.stats.outliers) b.y_outliers.push_back(g.y_of(o));
    g.boxes.push_back(std::move(b));
    x += slot;
  }
  g.groups.push_back({series.back().group, (g.boxes[group_start].x + g.boxes.back().x) / 2});
  return g;
}

std::uint64_t geometry_hash(const BoxGeometry& g) {
  std::uint64_t h = 14695981039346656037ULL;
  hash_value(h, g.width);
  hash_value(h, g.height);
  hash_value(h, g.value_min);
  hash_value(h, g.value_max);
  for (const auto& b : g.boxes) {
    hash_text(h, b.group);
    hash_text(h, b.label);
    for (double v : {b.x, b.half_width, b.y_q1, b.y_median, b.y_q3, b.y_lo, b.y_hi}) {
      hash_value(h, v);
    }
    for (double v : b.y_outliers) hash_value(h, v);
  }
  return h;
}

std::string render_box_svg(const BoxGeometry& g, const std::string& title,
                           const std::string& y_label) {
  std::string out = svg_open(g.width, g.height, title);
  out += value_axis(g.width, g.height, {g.value_min, g.value_max}, y_label);
  const double base = g.height - kBottom;
  for (const auto& b : g.boxes) {
    const double l = b.x - b.half_width;
    out += fmt::format(
        "<line x1=\"{0:.3f}\" y1=\"{1:.3f}\" x2=\"{0:.3f}\" y2=\"{2:.3f}\" stroke=\"black\"/>\n"
        "<line x1=\"{0:.3f}\" y1=\"{3:.3f}\" x2=\"{0:.3f}\" y2=\"{4:.3f}\" stroke=\"black\"/>\n"
        "<rect x=\"{5:.3f}\" y=\"{2:.3f}\" width=\"{6:.3f}\" height=\"{7:.3f}\" "
        "fill=\"#9ecae1\" stroke=\"black\"/>\n"
        "<line x1=\"{5:.3f}\" y1=\"{8:.3f}\" x2=\"{9:.3f}\" y2=\"{8:.3f}\" stroke=\"black\" "
        "stroke-width=\"2\"/>\n",
        b.x, b.y_hi, b.y_q3, b.y_q1, b.y_lo, l, 2 * b.half_width, b.y_q1 - b.y_q3, b.y_median,
        b.x + b.half_width);
    for (double y : b.y_outliers) {
      out += fmt::format("<circle cx=\"{:.3f}\" cy=\"{:.3f}\" r=\"2\" fill=\"none\" "
                         "stroke=\"black\"/>\n",
                         b.x, y);
    }
    out += fmt::format("<text x=\"{:.3f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n", b.x,
                       base + 16, escape(b.label));
  }
  for (const auto& grp : g.groups) {
    out += fmt::format(
        "<text x=\"{:.3f}\" y=\"{:.1f}\" text-anchor=\"middle\" font-weight=\"bold\">{}</text>\n",
        grp.x, base + 36, escape(grp.name));
  }
  out += "</svg>\n";
  return out;
}

void write_box_plot(const std::vector<BoxSeries>& series, const std::filesystem::path& path,
                    const std::string& title, const std::string& y_label) {
  const BoxGeometry g = box_geometry(series);
  write_text_file(path, render_box_svg(g, title, y_label));
}

void write_line_plot(const std::vector<LineSeries>& series, const std::filesystem::path& path,
                     const std::string& title, const std::string& x_label,
                     const std::string& y_label) {
  double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
  for (const auto& s : series) {
    if (s.xs.size() != s.ys.size()) {
      throw Error(ErrorCode::InvalidInput, fmt::format("series '{}' has unequal x and y", s.label));
    }
    for (std::size_t i = 0; i < s.xs.size(); ++i) {
      if (!std::isfinite(s.ys[i])) continue;
      xlo = std::min(xlo, s.xs[i]);
      xhi = std::max(xhi, s.xs[i]);
      ylo = std::min(ylo, s.ys[i]);
      yhi = std::max(yhi, s.ys[i]);
    }
  }
  if (!std::isfinite(xlo)) throw Error(ErrorCode::InvalidInput, "nothing to plot");
  const double width = 800, height = 480;
  const Range xr = padded(xlo, xhi);
  const Range yr = padded(ylo, yhi);
  const double plot_w = width - kLeft - kRight;
  const double plot_h = height - kTop - kBottom;
  auto px = [&](double v) { return kLeft + (v - xr.lo) / (xr.hi - xr.lo) * plot_w; };
  auto py = [&](double v) { return kTop + (yr.hi - v) / (yr.hi - yr.lo) * plot_h; };

  std::string out = svg_open(width, height, title);
  out += value_axis(width, height, yr, y_label);
  for (int k = 0; k <= 4; ++k) {
    const double v = xr.lo + (xr.hi - xr.lo) * k / 4.0;
    out += fmt::format("<text x=\"{:.3f}\" y=\"{:.1f}\" text-anchor=\"middle\">{:.3g}</text>\n",
                       px(v), height - kBottom + 16, v);
  }
  out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n",
                     kLeft + plot_w / 2, height - kBottom + 36, escape(x_label));
  for (std::size_t k = 0; k < series.size(); ++k) {
    const auto* colour = kPalette[k % std::size(kPalette)];
    std::string points;
    for (std::size_t i = 0; i < series[k].xs.size(); ++i) {
      if (!std::isfinite(series[k].ys[i])) continue;
      points += fmt::format("{:.3f},{:.3f} ", px(series[k].xs[i]), py(series[k].ys[i]));
      out += fmt::format("<circle cx=\"{:.3f}\" cy=\"{:.3f}\" r=\"3\" fill=\"{}\"/>\n",
                         px(series[k].xs[i]), py(series[k].ys[i]), colour);
    }
    out += fmt::format("<polyline points=\"{}\" fill=\"none\" stroke=\"{}\"/>\n", points, colour);
    out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" fill=\"{}\">{}</text>\n",
                       kLeft + 10, kTop + 16 + 14.0 * static_cast<double>(k), colour,
                       escape(series[k].label));
  }
  out += "</svg>\n";
  write_text_file(path, out);
}

void write_scatter_plot(const std::vector<double>& xs, const std::vector<double>& ys,
                        const std::filesystem::path& path, const std::string& title,
                        const std::string& x_label, const std::string& y_label) {
  if (xs.size() != ys.size() || xs.empty()) {
    throw Error(ErrorCode::InvalidInput, "scatter plot needs equal, non-empty x and y");
  }
  double xlo = INFINITY, xhi = -INFINITY, ylo = INFINITY, yhi = -INFINITY;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) continue;
    xlo = std::min(xlo, xs[i]);
    xhi = std::max(xhi, xs[i]);
    ylo = std::min(ylo, ys[i]);
    yhi = std::max(yhi, ys[i]);
  }
  if (!std::isfinite(xlo)) throw Error(ErrorCode::InvalidInput, "nothing to plot");
  const double width = 480, height = 480;
  const Range xr = padded(xlo, xhi);
  const Range yr = padded(ylo, yhi);
  const double plot_w = width - kLeft - kRight;
  const double plot_h = height - kTop - kBottom;
  std::string out = svg_open(width, height, title);
  out += value_axis(width, height, yr, y_label);
  for (int k = 0; k <= 4; ++k) {
    const double v = xr.lo + (xr.hi - xr.lo) * k / 4.0;
    out += fmt::format("<text x=\"{:.3f}\" y=\"{:.1f}\" text-anchor=\"middle\">{:.3g}</text>\n",
                       kLeft + plot_w * k / 4.0, height - kBottom + 16, v);
  }
  out += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\" text-anchor=\"middle\">{}</text>\n",
                     kLeft + plot_w / 2, height - kBottom + 36, escape(x_label));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    if (!std::isfinite(xs[i]) || !std::isfinite(ys[i])) continue;
    out += fmt::format("<circle cx=\"{:.2f}\" cy=\"{:.2f}\" r=\"1.2\" fill=\"#1f77b4\" "
                       "fill-opacity=\"0.5\"/>\n",
                       kLeft + (xs[i] - xr.lo) / (xr.hi - xr.lo) * plot_w,
                       kTop + (yr.hi - ys[i]) / (yr.hi - yr.lo) * plot_h);
  }
  out += "</svg>\n";
  write_text_file(path, out);
}

std::vector<BoxSeries> box_series_from_cells(const std::vector<std::filesystem::path>& files,
                                             const std::string& value_column,
                                             const std::string& group_key,
                                             const std::string& label_key) {
  std::vector<BoxSeries> out;
  for (const auto& file : files) {
    const CsvTable table = read_csv(file);
    BoxSeries s;
    s.group = group_key.empty() ? "" : fmt::format("{}={}", group_key, meta_of(table, file, group_key));
    s.label = meta_of(table, file, label_key);
    s.values = ok_values(table, value_column);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<LineSeries> line_series_from_cells(const std::vector<std::filesystem::path>& files,
                                               const std::string& value_column,
                                               const std::string& x_key,
                                               const std::string& series_key) {
  std::map<std::string, std::vector<std::pair<double, double>>> points;
  for (const auto& file : files) {
    const CsvTable table = read_csv(file);
    const std::string& xs = meta_of(table, file, x_key);
    double x = 0.0;
    try {
      x = std::stod(xs);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::Parse,
                  fmt::format("{}: metadata '{}' = '{}' is not numeric", file.string(), x_key, xs));
    }
    auto values = ok_values(table, value_column);
    const double y = values.empty() ? kUnavailable : quantile(values, 0.5);
    points[fmt::format("{}={}", series_key, meta_of(table, file, series_key))].emplace_back(x, y);
  }
  std::vector<LineSeries> out;
  for (auto& [label, pts] : points) {
    std::sort(pts.begin(), pts.end());
    LineSeries s{label, {}, {}};
    for (auto [x, y] : pts) {
      s.xs.push_back(x);
      s.ys.push_back(y);
    }
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace tsdr
