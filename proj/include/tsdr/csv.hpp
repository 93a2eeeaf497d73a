#pragma once

#include "tsdr/estimators.hpp"
#include "tsdr/series.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace tsdr {

/// 17 significant digits; NaN is written as an empty field.
std::string format_number(double v);

/// Comma-separated table with optional `#key=value` metadata lines before
/// the header. Fields are not quoted.
struct CsvTable {
  std::map<std::string, std::string> metadata;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<int> line_numbers;  // 1-based source line of each row

  /// Column index of `name`; throws Parse when absent.
  std::size_t column(const std::string& name) const;
  /// Parses a numeric field; empty fields give NaN. Errors name the line.
  double number(std::size_t row, std::size_t col) const;
};

CsvTable parse_csv(std::istream& in, const std::string& source_name);
CsvTable read_csv(const std::filesystem::path& path);

/// Writes `t,x1..xp,y` rows.
void write_dataset(std::ostream& out, const TimeSeriesMatrix& x, const Series& y);
void write_dataset(const std::filesystem::path& path, const TimeSeriesMatrix& x, const Series& y);

struct DatasetFile {
  TimeSeriesMatrix x;
  Series y;
};

DatasetFile read_dataset(const std::filesystem::path& path);

/// Metadata block (method, slices, lags, center, gamma) followed by one
/// `source,lag,lambda,l` row per entry of the L matrix.
void write_fit(std::ostream& out, const FitResult& fit);
void write_fit(const std::filesystem::path& path, const FitResult& fit);

/// Restores the fields written by write_fit (the basis W is not stored).
FitResult read_fit(const std::filesystem::path& path);

/// Creates parent directories and replaces `path` atomically.
void write_text_file(const std::filesystem::path& path, const std::string& contents);

}  // namespace tsdr
