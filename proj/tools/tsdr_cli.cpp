// Command-line front end: simulation, fitting, selection, forecasting and
// the config-driven studies.

#include "tsdr/bench.hpp"
#include "tsdr/csv.hpp"
#include "tsdr/error.hpp"
#include "tsdr/estimators.hpp"
#include "tsdr/plot.hpp"
#include "tsdr/predict.hpp"
#include "tsdr/selection.hpp"
#include "tsdr/tsgen.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include <iostream>

using namespace tsdr;

namespace {

void print_l(const FitResult& fit) {
  fmt::print("{:>6}", "");
  for (Index i = 0; i < fit.l_matrix.rows(); ++i) fmt::print(" {:>7}", fmt::format("w{}", i + 1));
  fmt::print(" {:>7}\n", "sum");
  for (Index j = 0; j < fit.l_matrix.cols(); ++j) {
    fmt::print("{:>6}", fmt::format("t-{}", fit.lags[j]));
    for (Index i = 0; i < fit.l_matrix.rows(); ++i) fmt::print(" {:7.3f}", fit.l_matrix(i, j));
    fmt::print(" {:7.3f}\n", fit.l_matrix.col(j).sum());
  }
  fmt::print("{:>6}", "sum");
  for (Index i = 0; i < fit.l_matrix.rows(); ++i) fmt::print(" {:7.3f}", fit.l_matrix.row(i).sum());
  fmt::print(" {:7.3f}\n", fit.l_matrix.sum());
}

void print_table(const std::string& title, const Matrix& l) {
  FitResult view;
  view.l_matrix = l;
  view.lags = lag_range(static_cast<int>(l.cols()));
  fmt::print("{}\n", title);
  print_l(view);
}

struct FitArgs {
  std::string method = "TSAVE";
  int slices = 0;  // 0: method default
  int sir_slices = 10;
  int save_slices = 2;
  double weight = 0.5;
  int max_lag = 12;

  FitOptions options() const {
    FitOptions o;
    o.method = parse_method(method);
    o.lags = lag_range(max_lag);
    o.sir_slices = sir_slices;
    o.save_slices = save_slices;
    o.weight = weight;
    if (slices > 0) {
      o.with_slices(slices);
    } else if (o.method == Method::TSIR) {
      o.with_slices(sir_slices);
    } else if (o.method == Method::TSAVE) {
      o.with_slices(save_slices);
    }
    return o;
  }

  void add(CLI::App* app) {
    app->add_option("--method", method, "TSIR, TSAVE or TSSH")->capture_default_str();
    app->add_option("--slices", slices, "slice count for TSIR/TSAVE (default 10 / 2)");
    app->add_option("--sir-slices", sir_slices, "TSSH: slices of the TSIR part")
        ->capture_default_str();
    app->add_option("--save-slices", save_slices, "TSSH: slices of the TSAVE part")
        ->capture_default_str();
    app->add_option("--weight", weight, "TSSH weight a on the TSAVE part")->capture_default_str();
    app->add_option("--max-lag", max_lag, "lags 1..max-lag")->capture_default_str();
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Supervised dimension reduction for time series"};
  app.require_subcommand(1);
  std::string log_level = "info";
  app.add_option("--log-level", log_level, "trace, debug, info, warn, error")
      ->capture_default_str();

  // simulate
  auto* sim = app.add_subcommand("simulate", "write a simulated dataset CSV");
  std::string model_name = "A", recipe_name = "low";
  Index length = 3000;
  std::uint64_t seed = 1;
  std::string out_path;
  std::string sources_path;
  sim->add_option("--model", model_name, "A, B, C, D, E, M1, M2, BIG, NULL")->capture_default_str();
  sim->add_option("--recipe", recipe_name, "source recipe")->capture_default_str();
  sim->add_option("--length", length, "series length T")->capture_default_str();
  sim->add_option("--seed", seed)->capture_default_str();
  sim->add_option("--out", out_path, "dataset CSV")->required();
  sim->add_option("--sources", sources_path, "also write the latent sources here");

  // fit
  auto* fit_cmd = app.add_subcommand("fit", "fit TSIR/TSAVE/TSSH to a dataset CSV");
  std::string data_path;
  FitArgs fit_args;
  fit_cmd->add_option("--data", data_path, "dataset CSV")->required();
  fit_args.add(fit_cmd);
  fit_cmd->add_option("--out", out_path, "FitResult CSV");

  // select
  auto* sel_cmd = app.add_subcommand("select", "choose sources and lags from a FitResult CSV");
  std::string fit_path;
  std::string strategy_name = "BIGGEST_VALUES";
  double threshold = 0.8;
  sel_cmd->add_option("--fit", fit_path, "FitResult CSV")->required();
  sel_cmd->add_option("--strategy", strategy_name)->capture_default_str();
  sel_cmd->add_option("--threshold", threshold, "mass threshold P")->capture_default_str();

  // forecast
  auto* fc_cmd = app.add_subcommand("forecast", "rolling one-step forecast of a dataset CSV");
  std::string basis_name = "quadratic";
  PredictorConfig pred;
  std::string vec_method;
  fc_cmd->add_option("--data", data_path, "dataset CSV")->required();
  fit_args.add(fc_cmd);
  fc_cmd->add_option("--vectorized", vec_method, "SIR or SAVE on stacked lags instead");
  fc_cmd->add_option("--strategy", strategy_name)->capture_default_str();
  fc_cmd->add_option("--threshold", threshold, "mass threshold P")->capture_default_str();
  fc_cmd->add_option("--basis", basis_name, "linear, quadratic or cubic")->capture_default_str();
  fc_cmd->add_option("--knots", pred.interior_knots, "interior knots")->capture_default_str();
  fc_cmd->add_option("--test-size", pred.test_size)->capture_default_str();
  fc_cmd->add_flag("--refit", pred.refit_reduction, "refit the reduction at every step");

  // study
  auto* study_cmd = app.add_subcommand("study", "run a config-driven simulation study");
  std::string config_path, out_dir;
  std::optional<int> workers, replicates;
  std::optional<std::uint64_t> seed_override;
  study_cmd->add_option("--config", config_path, "INI file")->required();
  study_cmd->add_option("--out", out_dir, "output directory (overrides the config)");
  study_cmd->add_option("--workers", workers);
  study_cmd->add_option("--replicates", replicates);
  study_cmd->add_option("--seed", seed_override);

  // table1
  auto* t1_cmd = app.add_subcommand("table1", "averaged L matrices of the model B benchmark (T=10^4, H=5)");
  int t1_reps = 100;
  int t1_workers = 1;
  std::string t1_out = "results/table1";
  t1_cmd->add_option("--out", t1_out)->capture_default_str();
  t1_cmd->add_option("--replicates", t1_reps)->capture_default_str();
  t1_cmd->add_option("--seed", seed)->capture_default_str();
  t1_cmd->add_option("--workers", t1_workers)->capture_default_str();

  // plot
  auto* plot_cmd = app.add_subcommand("plot", "SVG plots from study cell CSVs");
  std::string kind = "box";
  std::vector<std::string> cell_files;
  std::string value_col = "relative", group_key = "T", label_key = "H", x_key = "a",
              series_key = "T", title;
  plot_cmd->add_option("--kind", kind, "box, line or scatter")->capture_default_str();
  plot_cmd->add_option("--cells", cell_files, "cell CSVs");
  plot_cmd->add_option("--value", value_col, "column to plot")->capture_default_str();
  plot_cmd->add_option("--group", group_key, "box: metadata key grouping boxes")
      ->capture_default_str();
  plot_cmd->add_option("--label", label_key, "box: metadata key labelling boxes")
      ->capture_default_str();
  plot_cmd->add_option("--x", x_key, "line: numeric metadata key")->capture_default_str();
  plot_cmd->add_option("--series", series_key, "line: metadata key per line")
      ->capture_default_str();
  plot_cmd->add_option("--model", model_name, "scatter: M1 or M2");
  plot_cmd->add_option("--seed", seed)->capture_default_str();
  plot_cmd->add_option("--title", title);
  plot_cmd->add_option("--out", out_path, "output SVG (scatter: directory)")->required();

  CLI11_PARSE(app, argc, argv);
  spdlog::set_level(spdlog::level::from_str(log_level));

  try {
    if (*sim) {
      const auto model = parse_model(model_name);
      const Dataset d = simulate(make_simulation(model, parse_recipe(recipe_name)), length, seed);
      write_dataset(out_path, d.x, d.y);
      if (!sources_path.empty()) write_dataset(sources_path, d.z, d.y);
    } else if (*fit_cmd) {
      const auto data = read_dataset(data_path);
      const FitResult fit = tsdr_fit(data.x, data.y, fit_args.options());
      print_l(fit);
      if (!out_path.empty()) write_fit(out_path, fit);
    } else if (*sel_cmd) {
      const FitResult fit = read_fit(fit_path);
      const auto sel = select(fit.l_matrix, fit.lags, parse_strategy(strategy_name), threshold);
      fmt::print("strategy {} P={} k_hat={} s_hat={} mass={:.4f}\n", to_string(sel.strategy),
                 sel.threshold, sel.k_hat, sel.s_hat, sel.covered_mass);
      for (const auto& c : sel.chosen) {
        fmt::print("source {} lag {}\n", c.source + 1, c.lag);
      }
    } else if (*fc_cmd) {
      const auto data = read_dataset(data_path);
      pred.basis = parse_basis(basis_name);
      Reduction reduction;
      if (!vec_method.empty()) {
        VectorizedReduction v;
        v.method = vec_method == "SIR" ? VectorizedMethod::SIR : VectorizedMethod::SAVE;
        if (vec_method != "SIR" && vec_method != "SAVE") {
          throw Error(ErrorCode::InvalidInput, fmt::format("unknown vectorized method '{}'", vec_method));
        }
        v.max_lag = fit_args.max_lag;
        v.slices = fit_args.slices > 0 ? fit_args.slices : (v.method == VectorizedMethod::SIR ? 10 : 5);
        v.threshold = threshold;
        reduction = v;
      } else {
        reduction = TsdrReduction{fit_args.options(), parse_strategy(strategy_name), threshold};
      }
      const auto out = rolling_forecast(data.x, data.y, reduction, pred);
      fmt::print("method {} rmse {:.6f} over {} test points\n", out.report.method,
                 out.report.rmse, out.report.errors.size());
      fmt::print("regressors:");
      for (const auto& r : out.predictors.regressors) fmt::print(" {}", r.label);
      fmt::print("\n");
    } else if (*study_cmd) {
      auto cfg = load_config(config_path);
      if (!out_dir.empty()) cfg.output = out_dir;
      if (workers) cfg.workers = *workers;
      if (replicates) cfg.replicates = *replicates;
      if (seed_override) cfg.seed = *seed_override;
      const auto report = run_study(cfg);
      fmt::print("{:<60} {:>5} {:>9} {:>9} {:>8}\n", "cell", "ok", "rmse", "relative", "success");
      for (const auto& c : report.cells) {
        fmt::print("{:<60} {:>5} {:9.4f} {:9.4f} {:8.3f}{}\n", c.cell.id(), c.succeeded,
                   c.rmse.median, c.relative.median, c.success_rate, c.failed ? "  FAILED" : "");
      }
      fmt::print("results in {}\n", report.directory.string());
    } else if (*t1_cmd) {
      const auto res = run_table1(t1_out, t1_reps, seed, t1_workers);
      print_table("TSAVE", res.tsave);
      print_table("TSIR", res.tsir);
    } else if (*plot_cmd) {
      if (kind == "scatter") {
        for (const auto& p : visualize_model(parse_model(model_name), out_path, seed)) {
          fmt::print("{}\n", p.string());
        }
      } else {
        std::vector<std::filesystem::path> files(cell_files.begin(), cell_files.end());
        if (files.empty()) throw Error(ErrorCode::InvalidInput, "no --cells given");
        if (kind == "box") {
          write_box_plot(box_series_from_cells(files, value_col, group_key, label_key), out_path,
                         title, value_col);
        } else if (kind == "line") {
          write_line_plot(line_series_from_cells(files, value_col, x_key, series_key), out_path,
                          title, x_key, fmt::format("median {}", value_col));
        } else {
          throw Error(ErrorCode::InvalidInput, fmt::format("unknown plot kind '{}'", kind));
        }
      }
    }
  } catch (const Error& e) {
    spdlog::error("{} ({})", e.what(), to_string(e.code()));
    return 2;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return 1;
  }
  return 0;
}
