#include "tsdr/csv.hpp"

#include "tsdr/error.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <sstream>

namespace tsdr {

namespace {

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

std::string join_numbers(const auto& values) {
  std::string out;
  for (Index i = 0; i < static_cast<Index>(values.size()); ++i) {
    if (i > 0) out += ';';
    out += format_number(values[i]);
  }
  return out;
}

std::vector<double> parse_numbers(const std::string& text, const std::string& what) {
  std::vector<double> out;
  if (text.empty()) return out;
  for (const auto& field : split(text, ';')) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
    if (ec != std::errc() || ptr != field.data() + field.size()) {
      throw Error(ErrorCode::Parse, fmt::format("{}: bad number '{}'", what, field));
    }
    out.push_back(v);
  }
  return out;
}

const std::string& meta(const CsvTable& table, const std::string& key) {
  const auto it = table.metadata.find(key);
  if (it == table.metadata.end()) {
    throw Error(ErrorCode::Parse, fmt::format("missing metadata '{}'", key));
  }
  return it->second;
}

}  // namespace

std::string format_number(double v) {
  if (!available(v)) return {};
  return fmt::format("{:.17g}", v);
}

std::size_t CsvTable::column(const std::string& name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw Error(ErrorCode::Parse, fmt::format("missing column '{}'", name));
}

double CsvTable::number(std::size_t row, std::size_t col) const {
  const std::string& field = rows.at(row).at(col);
  if (field.empty()) return kUnavailable;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw Error(ErrorCode::Parse, fmt::format("line {}: column '{}' holds '{}', not a number",
                                              line_numbers.at(row), header.at(col), field));
  }
  return v;
}

CsvTable parse_csv(std::istream& in, const std::string& source_name) {
  CsvTable table;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (!have_header && line.front() == '#') {
      const auto eq = line.find('=');
      if (eq == std::string::npos) {
        throw Error(ErrorCode::Parse,
                    fmt::format("{}: line {}: metadata without '='", source_name, line_no));
      }
      table.metadata[line.substr(1, eq - 1)] = line.substr(eq + 1);
      continue;
    }
    auto fields = split(line, ',');
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw Error(ErrorCode::Parse,
                  fmt::format("{}: line {}: {} fields, header has {}", source_name, line_no,
                              fields.size(), table.header.size()));
    }
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(line_no);
  }
  if (!have_header) throw Error(ErrorCode::Parse, fmt::format("{}: no header", source_name));
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Parse, fmt::format("cannot open {}", path.string()));
  return parse_csv(in, path.string());
}

void write_dataset(std::ostream& out, const TimeSeriesMatrix& x, const Series& y) {
  if (static_cast<Index>(y.size()) != x.length()) {
    throw Error(ErrorCode::InvalidInput, "response and predictors have different lengths");
  }
  out << 't';
  for (Index i = 0; i < x.width(); ++i) out << ",x" << i + 1;
  out << ",y\n";
  for (Index t = 0; t < x.length(); ++t) {
    out << t;
    for (Index i = 0; i < x.width(); ++i) out << ',' << format_number(x(t, i));
    out << ',' << format_number(y[t]) << '\n';
  }
}

void write_dataset(const std::filesystem::path& path, const TimeSeriesMatrix& x,
                   const Series& y) {
  std::ostringstream out;
  write_dataset(out, x, y);
  write_text_file(path, out.str());
}

DatasetFile read_dataset(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  const auto& h = table.header;
  if (h.size() < 3 || h.front() != "t" || h.back() != "y") {
    throw Error(ErrorCode::Parse,
                fmt::format("{}: line 1: expected header t,x1..xp,y", path.string()));
  }
  const auto p = static_cast<Index>(h.size() - 2);
  for (Index i = 0; i < p; ++i) {
    if (h[i + 1] != fmt::format("x{}", i + 1)) {
      throw Error(ErrorCode::Parse,
                  fmt::format("{}: line 1: column {} should be x{}", path.string(), i + 2, i + 1));
    }
  }
  const auto n = static_cast<Index>(table.rows.size());
  if (n == 0) throw Error(ErrorCode::Parse, fmt::format("{}: no data rows", path.string()));
  Matrix x(n, p);
  Series y(n);
  for (Index r = 0; r < n; ++r) {
    for (Index i = 0; i < p; ++i) {
      x(r, i) = table.number(r, i + 1);
      if (!std::isfinite(x(r, i))) {
        throw Error(ErrorCode::Parse, fmt::format("{}: line {}: missing predictor value",
                                                  path.string(), table.line_numbers[r]));
      }
    }
    y[r] = table.number(r, p + 1);
  }
  return {TimeSeriesMatrix(std::move(x)), std::move(y)};
}

void write_fit(std::ostream& out, const FitResult& fit) {
  const auto p = fit.gamma.rows();
  out << "#method=" << to_string(fit.method) << '\n';
  out << "#sir_slices=" << fit.sir_slices << '\n';
  out << "#save_slices=" << fit.save_slices << '\n';
  out << "#weight=" << format_number(fit.weight) << '\n';
  out << "#objective=" << format_number(fit.objective) << '\n';
  out << "#p=" << p << '\n';
  std::vector<double> lags(fit.lags.begin(), fit.lags.end());
  out << "#lags=" << join_numbers(lags) << '\n';
  out << "#center=" << join_numbers(fit.center) << '\n';
  const Matrix gamma = fit.gamma;
  out << "#gamma=" << join_numbers(std::vector<double>(gamma.data(), gamma.data() + gamma.size()))
      << '\n';
  out << "source,lag,lambda,l\n";
  for (Index i = 0; i < fit.lambda.rows(); ++i) {
    for (Index j = 0; j < fit.lambda.cols(); ++j) {
      out << i + 1 << ',' << fit.lags[j] << ',' << format_number(fit.lambda(i, j)) << ','
          << format_number(fit.l_matrix(i, j)) << '\n';
    }
  }
}

void write_fit(const std::filesystem::path& path, const FitResult& fit) {
  std::ostringstream out;
  write_fit(out, fit);
  write_text_file(path, out.str());
}

FitResult read_fit(const std::filesystem::path& path) {
  const CsvTable table = read_csv(path);
  FitResult fit;
  try {
    fit.method = parse_method(meta(table, "method"));
    fit.sir_slices = std::stoi(meta(table, "sir_slices"));
    fit.save_slices = std::stoi(meta(table, "save_slices"));
    fit.weight = std::stod(meta(table, "weight"));
    fit.objective = std::stod(meta(table, "objective"));
  } catch (const std::logic_error& e) {
    throw Error(ErrorCode::Parse, fmt::format("{}: bad metadata ({})", path.string(), e.what()));
  }
  const int p = std::stoi(meta(table, "p"));
  for (double v : parse_numbers(meta(table, "lags"), "lags")) fit.lags.push_back(static_cast<int>(v));
  const auto center = parse_numbers(meta(table, "center"), "center");
  const auto gamma = parse_numbers(meta(table, "gamma"), "gamma");
  if (p < 1 || static_cast<int>(center.size()) != p || static_cast<int>(gamma.size()) != p * p) {
    throw Error(ErrorCode::Parse, fmt::format("{}: center/gamma sizes disagree with p", path.string()));
  }
  fit.center = Eigen::Map<const Vector>(center.data(), p);
  fit.gamma = Eigen::Map<const Matrix>(gamma.data(), p, p);
  const auto m = static_cast<Index>(fit.lags.size());
  fit.lambda = Matrix::Zero(p, m);
  fit.l_matrix = Matrix::Zero(p, m);
  const auto cs = table.column("source");
  const auto cl = table.column("lag");
  const auto cv = table.column("lambda");
  const auto cL = table.column("l");
  if (static_cast<Index>(table.rows.size()) != p * m) {
    throw Error(ErrorCode::Parse, fmt::format("{}: expected {} rows, found {}", path.string(),
                                              p * m, table.rows.size()));
  }
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const int source = static_cast<int>(table.number(r, cs));
    const int lag = static_cast<int>(table.number(r, cl));
    const auto it = std::find(fit.lags.begin(), fit.lags.end(), lag);
    if (source < 1 || source > p || it == fit.lags.end()) {
      throw Error(ErrorCode::Parse, fmt::format("{}: line {}: unknown source {} or lag {}",
                                                path.string(), table.line_numbers[r], source, lag));
    }
    const auto j = it - fit.lags.begin();
    fit.lambda(source - 1, j) = table.number(r, cv);
    fit.l_matrix(source - 1, j) = table.number(r, cL);
  }
  return fit;
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::InvalidInput, fmt::format("cannot write {}", tmp.string()));
    out << contents;
    if (!out) throw Error(ErrorCode::InvalidInput, fmt::format("write to {} failed", tmp.string()));
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace tsdr
