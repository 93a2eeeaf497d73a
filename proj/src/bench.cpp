#include "tsdr/bench.hpp"

#include "tsdr/csv.hpp"
#include "tsdr/error.hpp"
#include "tsdr/estimators.hpp"
#include "tsdr/plot.hpp"

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <chrono>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace tsdr {

namespace {

const std::vector<std::string> kMethods = {"TSAVE", "TSIR", "TSSH", "SAVE", "SIR", "ORACLE"};

const std::vector<std::string> kCellColumns = {"replicate", "seed",     "status",  "rmse",
                                               "baseline_rmse", "relative", "k_hat", "s_hat",
                                               "mass",      "success",  "chosen",  "message"};

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

std::string upper(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

template <typename T>
T parse_scalar(const std::string& key, const std::string& text) {
  std::istringstream in(text);
  T v{};
  in >> v;
  if (in.fail() || !in.eof()) {
    throw Error(ErrorCode::InvalidSpec, fmt::format("'{}': cannot read '{}'", key, text));
  }
  return v;
}

template <typename T>
std::vector<T> parse_list(const std::string& key, const std::string& text) {
  std::vector<T> out;
  for (const auto& item : split_list(text)) out.push_back(parse_scalar<T>(key, item));
  return out;
}

bool parse_bool(const std::string& key, const std::string& text) {
  const std::string v = upper(trim(text));
  if (v == "TRUE" || v == "1" || v == "YES") return true;
  if (v == "FALSE" || v == "0" || v == "NO") return false;
  throw Error(ErrorCode::InvalidSpec, fmt::format("'{}': expected true or false, got '{}'", key, text));
}

bool is_tsdr(const std::string& method) {
  return method == "TSAVE" || method == "TSIR" || method == "TSSH";
}

bool is_vectorized(const std::string& method) { return method == "SAVE" || method == "SIR"; }

int default_slices(const std::string& method) {
  if (method == "TSAVE") return 2;
  if (method == "SAVE") return 5;
  return 10;
}

Basis resolve_basis(const std::string& name, ModelId model) {
  if (upper(name) == "AUTO") {
    return model == ModelId::E || model == ModelId::Big ? Basis::CubicSpline
                                                        : Basis::QuadraticSpline;
  }
  return parse_basis(name);
}

std::string opt_text(const std::optional<int>& v) { return v ? std::to_string(*v) : "-"; }
std::string opt_text(const std::optional<double>& v) {
  return v ? fmt::format("{:g}", *v) : "-";
}
std::string opt_text(const std::optional<Strategy>& v) {
  return v ? std::string(to_string(*v)) : "-";
}

std::string sanitize(std::string s) {
  for (auto& c : s) {
    if (c == ',') c = ';';
    if (c == '\n' || c == '\r') c = ' ';
  }
  return s;
}

std::string field(double v) { return format_number(v); }
std::string field(int v) { return v < 0 ? std::string() : std::to_string(v); }

std::vector<std::pair<std::string, std::string>> cell_metadata(const Cell& cell,
                                                               const ExperimentConfig& cfg) {
  return {
      {"study", cfg.study},
      {"cell", cell.id()},
      {"model", std::string(to_string(cell.model))},
      {"recipe", std::string(to_string(cell.recipe))},
      {"T", std::to_string(cell.length)},
      {"method", cell.method},
      {"H", opt_text(cell.slices)},
      {"a", opt_text(cell.weight)},
      {"P", opt_text(cell.threshold)},
      {"strategy", opt_text(cell.strategy)},
      {"basis", std::string(to_string(cell.basis))},
      {"replicates", std::to_string(cfg.replicates)},
      {"seed", std::to_string(cfg.seed)},
      {"baseline", std::string(to_string(cfg.baseline))},
      {"test_size", std::to_string(cfg.test_size)},
      {"interior_knots", std::to_string(cfg.interior_knots)},
      {"max_lag", std::to_string(cfg.max_lag)},
      {"tssh_slices", fmt::format("{}/{}", cfg.tssh_sir_slices, cfg.tssh_save_slices)},
      {"refit_reduction", cfg.refit_reduction ? "true" : "false"},
  };
}

void write_cell(const std::filesystem::path& path, const CellReport& report,
                const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& [k, v] : cell_metadata(report.cell, cfg)) out += fmt::format("#{}={}\n", k, v);
  out += fmt::format("#succeeded={}\n#status={}\n", report.succeeded,
                     report.failed ? "failed" : "ok");
  for (std::size_t i = 0; i < kCellColumns.size(); ++i) {
    out += (i ? "," : "") + kCellColumns[i];
  }
  out += '\n';
  for (const auto& r : report.records) {
    out += fmt::format("{},{},{},{},{},{},{},{},{},{},{},{}\n", r.replicate, r.seed,
                       r.ok ? "ok" : r.code, field(r.rmse), field(r.baseline_rmse),
                       field(r.relative), field(r.k_hat), field(r.s_hat), field(r.mass),
                       field(r.success), r.chosen, sanitize(r.message));
  }
  write_text_file(path, out);
}

// Records of a previously written cell, or nothing when the file does not
// describe this cell under this config.
std::optional<std::vector<ReplicateRecord>> load_cell(const std::filesystem::path& path,
                                                      const Cell& cell,
                                                      const ExperimentConfig& cfg) {
  if (!std::filesystem::exists(path)) return std::nullopt;
  try {
    const CsvTable table = read_csv(path);
    for (const auto& [k, v] : cell_metadata(cell, cfg)) {
      const auto it = table.metadata.find(k);
      if (it == table.metadata.end() || it->second != v) {
        spdlog::info("{}: metadata '{}' differs, recomputing", path.string(), k);
        return std::nullopt;
      }
    }
    if (table.header != kCellColumns ||
        static_cast<int>(table.rows.size()) != cfg.replicates) {
      spdlog::info("{}: incomplete, recomputing", path.string());
      return std::nullopt;
    }
    std::vector<ReplicateRecord> records;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
      const auto& row = table.rows[i];
      ReplicateRecord r;
      r.replicate = static_cast<int>(table.number(i, 0));
      r.seed = std::stoull(row[1]);
      r.ok = row[2] == "ok";
      if (!r.ok) r.code = row[2];
      r.rmse = table.number(i, 3);
      r.baseline_rmse = table.number(i, 4);
      r.relative = table.number(i, 5);
      auto int_field = [&](std::size_t c) {
        const double v = table.number(i, c);
        return available(v) ? static_cast<int>(v) : -1;
      };
      r.k_hat = int_field(6);
      r.s_hat = int_field(7);
      r.mass = table.number(i, 8);
      r.success = int_field(9);
      r.chosen = row[10];
      r.message = row[11];
      if (r.replicate != static_cast<int>(i)) return std::nullopt;
      records.push_back(std::move(r));
    }
    return records;
  } catch (const std::exception& e) {
    spdlog::info("{}: unreadable ({}), recomputing", path.string(), e.what());
    return std::nullopt;
  }
}

Reduction make_reduction(const Cell& cell, const ExperimentConfig& cfg) {
  if (is_vectorized(cell.method)) {
    VectorizedReduction v;
    v.method = cell.method == "SIR" ? VectorizedMethod::SIR : VectorizedMethod::SAVE;
    v.max_lag = cfg.max_lag;
    v.slices = *cell.slices;
    v.threshold = *cell.threshold;
    return v;
  }
  TsdrReduction t;
  t.fit.method = parse_method(cell.method);
  t.fit.lags = lag_range(cfg.max_lag);
  if (t.fit.method == Method::TSSH) {
    t.fit.sir_slices = cfg.tssh_sir_slices;
    t.fit.save_slices = cfg.tssh_save_slices;
    t.fit.weight = *cell.weight;
  } else {
    t.fit.with_slices(*cell.slices);
  }
  t.strategy = *cell.strategy;
  t.threshold = *cell.threshold;
  return t;
}

void finish_cell(CellReport& report) {
  std::vector<double> rmse, rel, success;
  report.succeeded = 0;
  for (const auto& r : report.records) {
    if (!r.ok) continue;
    ++report.succeeded;
    rmse.push_back(r.rmse);
    if (available(r.relative)) rel.push_back(r.relative);
    if (r.success >= 0) success.push_back(r.success);
  }
  report.failed = 10 * report.succeeded < 9 * static_cast<int>(report.records.size());
  report.rmse = summarize(rmse);
  report.relative = summarize(rel);
  report.success_rate = success.empty() ? kUnavailable : mean(success);
}

// Relative RMSE against the H = 10 cell of the same block, paired by replicate.
void apply_h10_baseline(std::vector<CellReport*>& block) {
  for (auto* report : block) {
    if (!report->cell.slices) continue;
    Cell ref = report->cell;
    ref.slices = 10;
    const auto it = std::find_if(block.begin(), block.end(),
                                 [&](const CellReport* c) { return c->cell == ref; });
    for (std::size_t r = 0; r < report->records.size(); ++r) {
      auto& rec = report->records[r];
      rec.baseline_rmse = kUnavailable;
      rec.relative = kUnavailable;
      if (it == block.end()) continue;
      const auto& base = (*it)->records[r];
      if (rec.ok && base.ok) {
        rec.baseline_rmse = base.rmse;
        rec.relative = rec.rmse / base.rmse;
      }
    }
  }
}

std::string value_label(const Cell& c) {
  std::string s = c.method;
  if (c.slices) s += fmt::format(" H{}", *c.slices);
  if (c.weight) s += fmt::format(" a{:g}", *c.weight);
  return s;
}

void write_study_plots(const StudyReport& report, const ExperimentConfig& cfg) {
  const bool relative = cfg.baseline != Baseline::None;
  std::map<std::pair<ModelId, Recipe>, std::vector<const CellReport*>> panels;
  for (const auto& c : report.cells) panels[{c.cell.model, c.cell.recipe}].push_back(&c);
  for (const auto& [key, cells] : panels) {
    std::vector<BoxSeries> series;
    for (const auto* c : cells) {
      BoxSeries s{fmt::format("T={}", c->cell.length), value_label(c->cell), {}};
      for (const auto& r : c->records) {
        const double v = relative ? r.relative : r.rmse;
        if (r.ok && available(v)) s.values.push_back(v);
      }
      if (s.values.empty()) {
        spdlog::info("plot: {} has no values, left out", c->cell.id());
        continue;
      }
      series.push_back(std::move(s));
    }
    if (series.empty()) continue;
    std::stable_sort(series.begin(), series.end(),
                     [](const BoxSeries& a, const BoxSeries& b) { return a.group < b.group; });
    const auto name = fmt::format("{}_{}", to_string(key.first), to_string(key.second));
    write_box_plot(series, report.directory / "plots" / (name + ".svg"),
                   fmt::format("{}: model {}, {}", cfg.study, to_string(key.first),
                               to_string(key.second)),
                   relative ? fmt::format("RMSE relative to {}", to_string(cfg.baseline))
                            : "RMSE");

    std::map<std::string, LineSeries> by_weight_rmse, by_weight_success;
    for (const auto* c : cells) {
      if (!c->cell.weight) continue;
      const auto label = fmt::format("T={} P={}", c->cell.length, opt_text(c->cell.threshold));
      auto& lr = by_weight_rmse[label];
      lr.label = label;
      lr.xs.push_back(*c->cell.weight);
      lr.ys.push_back(c->rmse.median);
      auto& ls = by_weight_success[label];
      ls.label = label;
      ls.xs.push_back(*c->cell.weight);
      ls.ys.push_back(c->success_rate);
    }
    auto lines = [](std::map<std::string, LineSeries>& m) {
      std::vector<LineSeries> out;
      for (auto& [k, v] : m) {
        if (v.xs.size() > 1) out.push_back(std::move(v));
      }
      return out;
    };
    if (auto l = lines(by_weight_rmse); !l.empty()) {
      write_line_plot(l, report.directory / "plots" / (name + "_rmse_vs_a.svg"),
                      fmt::format("median RMSE, model {}", to_string(key.first)), "a",
                      "median RMSE");
    }
    if (auto l = lines(by_weight_success); !l.empty()) {
      write_line_plot(l, report.directory / "plots" / (name + "_success_vs_a.svg"),
                      fmt::format("selection success, model {}", to_string(key.first)), "a",
                      "success rate");
    }
  }
}

std::string table1_csv(const Matrix& l) {
  std::string out = "lag";
  for (Index i = 0; i < l.rows(); ++i) out += fmt::format(",w{}", i + 1);
  out += ",sum\n";
  for (Index j = 0; j < l.cols(); ++j) {
    out += fmt::format("t-{}", j + 1);
    for (Index i = 0; i < l.rows(); ++i) out += "," + format_number(l(i, j));
    out += "," + format_number(l.col(j).sum()) + "\n";
  }
  out += "sum";
  for (Index i = 0; i < l.rows(); ++i) out += "," + format_number(l.row(i).sum());
  out += "," + format_number(l.sum()) + "\n";
  return out;
}

}  // namespace

std::string_view to_string(Baseline baseline) {
  switch (baseline) {
    case Baseline::None: return "none";
    case Baseline::Oracle: return "oracle";
    case Baseline::H10: return "h10";
  }
  return "?";
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorCode::InvalidSpec, msg); };
  if (study.empty() || study.find_first_of("/\\") != std::string::npos) {
    fail(fmt::format("study id '{}' must be a plain name", study));
  }
  if (models.empty() || recipes.empty() || lengths.empty() || methods.empty() ||
      weights.empty() || thresholds.empty() || strategies.empty() || bases.empty()) {
    fail("every factor list needs at least one value");
  }
  if (replicates < 1) fail("replicates must be at least 1");
  if (workers < 1) fail("workers must be at least 1");
  if (test_size < 1) fail("test_size must be at least 1");
  if (interior_knots < 0) fail("interior_knots must be non-negative");
  if (max_lag < 1) fail("max_lag must be at least 1");
  if (tssh_sir_slices < 1 || tssh_save_slices < 1) fail("TSSH slice counts must be positive");
  for (const auto& m : methods) {
    if (std::find(kMethods.begin(), kMethods.end(), m) == kMethods.end()) {
      fail(fmt::format("unknown method '{}'", m));
    }
  }
  for (int h : slices) {
    if (h < 1) fail(fmt::format("slice count {} must be positive", h));
  }
  for (double a : weights) {
    if (!(a >= 0.0 && a <= 1.0)) fail(fmt::format("weight {} is outside [0, 1]", a));
  }
  for (double p : thresholds) {
    if (!(p > 0.0 && p < 1.0)) fail(fmt::format("threshold {} is outside (0, 1)", p));
  }
  for (const auto& b : bases) {
    if (upper(b) != "AUTO") parse_basis(b);
  }
  for (auto model : models) {
    const int lag = std::max(max_lag, tsdr::max_lag(model));
    for (Index t : lengths) {
      if (t <= 200 + lag) fail(fmt::format("length {} must exceed 200 + {}", t, lag));
      if (t <= test_size + lag) fail(fmt::format("length {} leaves no training window", t));
    }
    for (auto recipe : recipes) make_simulation(model, recipe).validate();
  }
}

ExperimentConfig parse_config(std::istream& in, const std::string& source_name) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    pt::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw Error(ErrorCode::Parse, fmt::format("{}: line {}: {}", source_name, e.line(), e.message()));
  }
  const auto section = tree.get_child_optional("study");
  if (!section) throw Error(ErrorCode::InvalidSpec, fmt::format("{}: no [study] section", source_name));

  ExperimentConfig cfg;
  for (const auto& [key, node] : *section) {
    const std::string v = trim(node.data());
    if (key == "id") {
      cfg.study = v;
    } else if (key == "models") {
      cfg.models.clear();
      for (const auto& m : split_list(v)) cfg.models.push_back(parse_model(m));
    } else if (key == "recipes") {
      cfg.recipes.clear();
      for (const auto& r : split_list(v)) cfg.recipes.push_back(parse_recipe(r));
    } else if (key == "lengths") {
      cfg.lengths = parse_list<Index>(key, v);
    } else if (key == "methods") {
      cfg.methods.clear();
      for (const auto& m : split_list(v)) cfg.methods.push_back(upper(m));
    } else if (key == "slices") {
      cfg.slices = parse_list<int>(key, v);
    } else if (key == "weights") {
      cfg.weights = parse_list<double>(key, v);
    } else if (key == "thresholds") {
      cfg.thresholds = parse_list<double>(key, v);
    } else if (key == "strategies") {
      cfg.strategies.clear();
      for (const auto& s : split_list(v)) cfg.strategies.push_back(parse_strategy(s));
    } else if (key == "bases") {
      cfg.bases = split_list(v);
    } else if (key == "interior_knots") {
      cfg.interior_knots = parse_scalar<int>(key, v);
    } else if (key == "test_size") {
      cfg.test_size = parse_scalar<int>(key, v);
    } else if (key == "max_lag") {
      cfg.max_lag = parse_scalar<int>(key, v);
    } else if (key == "tssh_sir_slices") {
      cfg.tssh_sir_slices = parse_scalar<int>(key, v);
    } else if (key == "tssh_save_slices") {
      cfg.tssh_save_slices = parse_scalar<int>(key, v);
    } else if (key == "replicates") {
      cfg.replicates = parse_scalar<int>(key, v);
    } else if (key == "seed") {
      cfg.seed = parse_scalar<std::uint64_t>(key, v);
    } else if (key == "baseline") {
      const auto b = upper(v);
      if (b == "NONE") cfg.baseline = Baseline::None;
      else if (b == "ORACLE") cfg.baseline = Baseline::Oracle;
      else if (b == "H10") cfg.baseline = Baseline::H10;
      else throw Error(ErrorCode::InvalidSpec, fmt::format("unknown baseline '{}'", v));
    } else if (key == "workers") {
      cfg.workers = parse_scalar<int>(key, v);
    } else if (key == "output") {
      cfg.output = v;
    } else if (key == "refit_reduction") {
      cfg.refit_reduction = parse_bool(key, v);
    } else if (key == "plots") {
      cfg.plots = parse_bool(key, v);
    } else {
      throw Error(ErrorCode::InvalidSpec, fmt::format("{}: unknown key '{}'", source_name, key));
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Parse, fmt::format("cannot open {}", path.string()));
  return parse_config(in, path.string());
}

std::string Cell::id() const {
  std::string s = fmt::format("{}_{}_T{}_{}", to_string(model), to_string(recipe), length, method);
  if (slices) s += fmt::format("_H{}", *slices);
  if (weight) s += fmt::format("_a{:g}", *weight);
  if (threshold) s += fmt::format("_P{:g}", *threshold);
  if (strategy) s += fmt::format("_{}", to_string(*strategy));
  if (method != "ORACLE") s += fmt::format("_{}", to_string(basis));
  return s;
}

std::vector<Cell> expand_cells(const ExperimentConfig& cfg) {
  std::vector<Cell> out;
  std::set<Cell> seen;
  for (auto model : cfg.models)
    for (auto recipe : cfg.recipes)
      for (Index length : cfg.lengths)
        for (const auto& method : cfg.methods)
          for (const auto& basis : cfg.bases) {
            std::vector<int> hs = cfg.slices;
            if (hs.empty()) hs = {default_slices(method)};
            for (int h : hs)
              for (double a : cfg.weights)
                for (double p : cfg.thresholds)
                  for (auto strategy : cfg.strategies) {
                    Cell c;
                    c.model = model;
                    c.recipe = recipe;
                    c.length = length;
                    c.method = method;
                    if (method != "ORACLE") {
                      c.basis = resolve_basis(basis, model);
                      c.threshold = p;
                    }
                    if (method == "TSAVE" || method == "TSIR" || is_vectorized(method)) {
                      c.slices = h;
                    }
                    if (method == "TSSH") c.weight = a;
                    if (is_tsdr(method)) c.strategy = strategy;
                    if (seen.insert(c).second) out.push_back(c);
                  }
          }
  return out;
}

Quartiles summarize(std::vector<double> values) {
  Quartiles q;
  std::erase_if(values, [](double v) { return !std::isfinite(v); });
  if (values.empty()) return q;
  q.mean = mean(values);
  q.q1 = quantile(values, 0.25);
  q.median = quantile(values, 0.5);
  q.q3 = quantile(values, 0.75);
  return q;
}

std::vector<ReplicateRecord> run_replicate(const std::vector<Cell>& cells,
                                           const ExperimentConfig& cfg, int replicate) {
  std::vector<ReplicateRecord> out;
  if (cells.empty()) return out;
  const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(replicate);
  const Cell& first = cells.front();
  const Dataset data = simulate(make_simulation(first.model, first.recipe), first.length, seed);

  PredictorConfig window;
  window.interior_knots = cfg.interior_knots;
  window.test_size = cfg.test_size;
  window.refit_reduction = cfg.refit_reduction;

  std::optional<double> oracle_rmse;
  auto oracle = [&]() {
    if (!oracle_rmse) {
      try {
        oracle_rmse = oracle_forecast(data.z, data.y, first.model, window).rmse;
      } catch (const Error& e) {
        spdlog::debug("oracle failed for seed {}: {}", seed, e.what());
        oracle_rmse = kUnavailable;
      }
    }
    return *oracle_rmse;
  };

  for (const auto& cell : cells) {
    ReplicateRecord r;
    r.replicate = replicate;
    r.seed = seed;
    try {
      if (cell.method == "ORACLE") {
        r.rmse = oracle();
        if (!available(r.rmse)) {
          oracle_rmse.reset();
          r.rmse = oracle_forecast(data.z, data.y, cell.model, window).rmse;
        }
      } else {
        PredictorConfig pc = window;
        pc.basis = cell.basis;
        const auto result = rolling_forecast(data.x, data.y, make_reduction(cell, cfg), pc);
        r.rmse = result.report.rmse;
        r.k_hat = result.predictors.k_hat;
        if (const auto& sel = result.predictors.selection) {
          r.s_hat = sel->s_hat;
          r.mass = sel->covered_mass;
          r.success = expected_structure_check(*sel, true_structure(cell.model)) ? 1 : 0;
        }
        for (const auto& reg : result.predictors.regressors) {
          r.chosen += (r.chosen.empty() ? "" : " ") + reg.label;
        }
      }
      r.ok = true;
    } catch (const Error& e) {
      r.code = std::string(to_string(e.code()));
      r.message = e.what();
    } catch (const std::exception& e) {
      r.code = "Internal";
      r.message = e.what();
    }
    if (r.ok && cfg.baseline == Baseline::Oracle) {
      r.baseline_rmse = oracle();
      r.relative = r.rmse / r.baseline_rmse;
    }
    out.push_back(std::move(r));
  }
  return out;
}

void parallel_for(int count, int workers, const std::function<void(int)>& job) {
  if (workers <= 1 || count <= 1) {
    for (int i = 0; i < count; ++i) job(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> threads;
  for (int w = 0; w < std::min(workers, count); ++w) {
    threads.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          job(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& t : threads) t.join();
  if (error) std::rethrow_exception(error);
}

StudyReport run_study(const ExperimentConfig& cfg) {
  cfg.validate();
  StudyReport report;
  report.study = cfg.study;
  report.directory = cfg.output / cfg.study;
  std::filesystem::create_directories(report.directory);

  const auto cells = expand_cells(cfg);
  report.cells.resize(cells.size());

  // Cells sharing (model, recipe, length) share the simulated data.
  std::vector<std::vector<std::size_t>> blocks;
  std::map<std::tuple<ModelId, Recipe, Index>, std::size_t> block_of;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const auto key = std::make_tuple(cells[i].model, cells[i].recipe, cells[i].length);
    const auto [it, fresh] = block_of.emplace(key, blocks.size());
    if (fresh) blocks.emplace_back();
    blocks[it->second].push_back(i);
  }

  std::vector<std::vector<std::size_t>> pending(blocks.size());
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    for (std::size_t i : blocks[b]) {
      auto& rep = report.cells[i];
      rep.cell = cells[i];
      if (auto records = load_cell(report.directory / (cells[i].id() + ".csv"), cells[i], cfg)) {
        rep.records = std::move(*records);
        rep.resumed = true;
      } else {
        rep.records.resize(cfg.replicates);
        pending[b].push_back(i);
      }
    }
  }

  auto finalize_block = [&](std::size_t b) {
    std::vector<CellReport*> members;
    for (std::size_t i : blocks[b]) members.push_back(&report.cells[i]);
    if (cfg.baseline == Baseline::H10) apply_h10_baseline(members);
    for (auto* m : members) {
      finish_cell(*m);
      if (m->resumed) continue;
      write_cell(report.directory / (m->cell.id() + ".csv"), *m, cfg);
      spdlog::info("{}: {}/{} replicates ok, median rmse {:.4f}, {:.1f}s", m->cell.id(),
                   m->succeeded, cfg.replicates, m->rmse.median, m->runtime_seconds);
      if (m->failed) spdlog::warn("{}: cell failed", m->cell.id());
    }
  };

  struct Job {
    std::size_t block;
    int replicate;
  };
  std::vector<Job> jobs;
  std::vector<std::atomic<int>> remaining(blocks.size());
  std::vector<std::vector<double>> seconds(cells.size(), std::vector<double>(cfg.replicates));
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    remaining[b] = pending[b].empty() ? 0 : cfg.replicates;
    if (pending[b].empty()) continue;
    for (int r = 0; r < cfg.replicates; ++r) jobs.push_back({b, r});
  }
  spdlog::info("study {}: {} cells ({} resumed), {} replicate jobs", cfg.study, cells.size(),
               std::count_if(report.cells.begin(), report.cells.end(),
                             [](const CellReport& c) { return c.resumed; }),
               jobs.size());

  parallel_for(static_cast<int>(jobs.size()), cfg.workers, [&](int j) {
    const auto [b, r] = jobs[j];
    std::vector<Cell> todo;
    for (std::size_t i : pending[b]) todo.push_back(cells[i]);
    const auto start = std::chrono::steady_clock::now();
    auto records = run_replicate(todo, cfg, r);
    const double elapsed =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    for (std::size_t k = 0; k < todo.size(); ++k) {
      report.cells[pending[b][k]].records[r] = std::move(records[k]);
      seconds[pending[b][k]][r] = elapsed / static_cast<double>(todo.size());
    }
    if (--remaining[b] == 0) {
      for (std::size_t i : pending[b]) {
        for (double s : seconds[i]) report.cells[i].runtime_seconds += s;
      }
      finalize_block(b);
    }
  });
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (pending[b].empty()) finalize_block(b);
  }

  std::string summary =
      "cell,model,recipe,T,method,H,a,P,strategy,basis,replicates,succeeded,status,"
      "rmse_mean,rmse_q1,rmse_median,rmse_q3,rel_mean,rel_q1,rel_median,rel_q3,success_rate\n";
  std::string errors = "cell,replicate,seed,code,message\n";
  for (const auto& c : report.cells) {
    const auto& cell = c.cell;
    summary += fmt::format(
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n", cell.id(),
        to_string(cell.model), to_string(cell.recipe), cell.length, cell.method,
        opt_text(cell.slices), opt_text(cell.weight), opt_text(cell.threshold),
        opt_text(cell.strategy), to_string(cell.basis), c.records.size(), c.succeeded,
        c.failed ? "failed" : "ok", field(c.rmse.mean), field(c.rmse.q1), field(c.rmse.median),
        field(c.rmse.q3), field(c.relative.mean), field(c.relative.q1), field(c.relative.median),
        field(c.relative.q3), field(c.success_rate));
    for (const auto& r : c.records) {
      if (r.ok) continue;
      errors += fmt::format("{},{},{},{},{}\n", cell.id(), r.replicate, r.seed, r.code,
                            sanitize(r.message));
    }
  }
  write_text_file(report.directory / "summary.csv", summary);
  write_text_file(report.directory / "errors.csv", errors);
  if (cfg.plots) write_study_plots(report, cfg);
  return report;
}

Table1Result run_table1(const std::filesystem::path& out_dir, int replicates, std::uint64_t seed,
                        int workers, Index length) {
  if (replicates < 1) throw Error(ErrorCode::InvalidInput, "replicates must be at least 1");
  const auto sim = make_simulation(ModelId::B, Recipe::Table1);
  std::vector<Matrix> save_l(replicates), sir_l(replicates);
  parallel_for(replicates, workers, [&](int r) {
    const Dataset d = simulate(sim, length, seed + static_cast<std::uint64_t>(r));
    FitOptions opts;
    opts.lags = lag_range(12);
    opts.with_slices(5);
    opts.method = Method::TSAVE;
    save_l[r] = tsdr_fit(d.x, d.y, opts).l_matrix;
    opts.method = Method::TSIR;
    sir_l[r] = tsdr_fit(d.x, d.y, opts).l_matrix;
  });
  Table1Result out;
  out.replicates = replicates;
  out.tsave = Matrix::Zero(save_l[0].rows(), save_l[0].cols());
  out.tsir = out.tsave;
  for (int r = 0; r < replicates; ++r) {
    out.tsave += save_l[r];
    out.tsir += sir_l[r];
  }
  out.tsave /= replicates;
  out.tsir /= replicates;
  write_text_file(out_dir / "table1_tsave.csv", table1_csv(out.tsave));
  write_text_file(out_dir / "table1_tsir.csv", table1_csv(out.tsir));
  return out;
}

std::vector<std::filesystem::path> visualize_model(ModelId model,
                                                   const std::filesystem::path& out_dir,
                                                   std::uint64_t seed, Index length) {
  if (model != ModelId::M1 && model != ModelId::M2) {
    throw Error(ErrorCode::UnknownModel, "visualization covers the single-source models M1 and M2");
  }
  const Dataset d = simulate(make_simulation(model, Recipe::Single), length, seed);
  FitOptions opts;
  opts.with_slices(5);
  const FitResult fit = tsdr_fit(d.x, d.y, opts);
  const Series z = fit.sources(d.x).column(0);
  std::vector<std::filesystem::path> written;
  for (const auto& truth : true_structure(model)) {
    std::vector<double> xs, ys;
    for (Index t = truth.lag; t < length; ++t) {
      if (!available(d.y[t])) continue;
      xs.push_back(z[t - truth.lag]);
      ys.push_back(d.y[t]);
    }
    const auto path = out_dir / fmt::format("{}_lag{}.svg", to_string(model), truth.lag);
    write_scatter_plot(xs, ys, path, fmt::format("model {}: y_t against z_t-{}", to_string(model), truth.lag),
                       fmt::format("estimated z[t-{}]", truth.lag), "y[t]");
    written.push_back(path);
  }
  return written;
}

}  // namespace tsdr
