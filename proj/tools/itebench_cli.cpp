// itebench command-line driver.
//
//   itebench generate   --out PREFIX [--config FILE | --preset NAME] [--seed N] [--knob-value V]
//   itebench fit        --data PREFIX.csv --learner S|T|X|DR|TARNET|CFRNET --out MODEL.json
//   itebench attribute  --model MODEL.json --data PREFIX.csv --out ATTR.csv
//   itebench evaluate   --model MODEL.json --data PREFIX --attributions ATTR.csv
//   itebench experiment --config FILE | --preset NAME [--seeds N] [--out-dir DIR]
//   itebench plot       --results RESULTS.csv --metric attr_pred|attr_prog|pehe --out PLOT.svg
//
// Exit status: 0 success, 1 configuration/usage error, 2 runtime error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "itebench/attribution.hpp"
#include "itebench/dgp.hpp"
#include "itebench/errors.hpp"
#include "itebench/harness.hpp"
#include "itebench/learners.hpp"
#include "itebench/metrics.hpp"

namespace fs = std::filesystem;
using namespace itebench;

namespace {

struct CommonOptions {
  std::string config;
  std::string preset;
};

void add_config_options(CLI::App* cmd, CommonOptions& o) {
  cmd->add_option("--config", o.config, "Experiment config (JSON)");
  cmd->add_option("--preset", o.preset, "Built-in config: exp1, exp2, exp3");
}

ExperimentConfig resolve_config(const CommonOptions& o, bool required) {
  if (!o.config.empty()) {
    if (!fs::exists(o.config)) throw InvalidConfig("config file not found: " + o.config);
    return load_config(o.config);
  }
  if (!o.preset.empty()) return experiment_preset(o.preset);
  if (required) throw InvalidConfig("need --config or --preset");
  return experiment_preset("exp1");
}

fs::path strip_csv(const fs::path& p) {
  return p.extension() == ".csv" ? fs::path(p.parent_path() / p.stem()) : p;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Benchmark CATE estimators on how well their attributions find predictive covariates"};
  app.require_subcommand(1);

  // generate
  CommonOptions gen_opts;
  std::uint64_t gen_seed = 0;
  std::optional<double> gen_knob;
  std::string gen_out;
  auto* gen = app.add_subcommand("generate", "Generate one semi-synthetic dataset");
  add_config_options(gen, gen_opts);
  gen->add_option("--seed", gen_seed, "Seed");
  gen->add_option("--knob-value", gen_knob, "Knob value (default: first grid value)");
  gen->add_option("--out", gen_out, "Output prefix")->required();

  // fit
  CommonOptions fit_opts;
  std::string fit_data, fit_strategy, fit_out;
  double fit_gamma = 0.0;
  std::uint64_t fit_seed = 0;
  auto* fit = app.add_subcommand("fit", "Fit a CATE estimator on an exported dataset");
  add_config_options(fit, fit_opts);
  fit->add_option("--data", fit_data, "Dataset CSV (unit_id,w,y,x_0..)")->required();
  fit->add_option("--learner", fit_strategy, "S, T, X, DR, TARNET or CFRNET")->required();
  fit->add_option("--gamma", fit_gamma, "CFRNET balancing weight");
  fit->add_option("--seed", fit_seed, "Seed");
  fit->add_option("--out", fit_out, "Model manifest (JSON)")->required();

  // attribute
  CommonOptions attr_opts;
  std::string attr_model, attr_data, attr_out, attr_method;
  std::uint64_t attr_seed = 0;
  std::optional<Index> attr_cap, attr_steps;
  auto* attr = app.add_subcommand("attribute", "Attribute a fitted estimator's CATE");
  add_config_options(attr, attr_opts);
  attr->add_option("--model", attr_model, "Model manifest")->required();
  attr->add_option("--data", attr_data, "Dataset CSV to attribute")->required();
  attr->add_option("--method", attr_method, "Attribution method");
  attr->add_option("--seed", attr_seed, "Seed");
  attr->add_option("--cap", attr_cap, "Maximum rows");
  attr->add_option("--steps", attr_steps, "Integrated-gradient steps");
  attr->add_option("--out", attr_out, "Attribution CSV")->required();

  // evaluate
  CommonOptions eval_opts;
  std::string eval_model, eval_data, eval_attr, eval_out;
  auto* eval = app.add_subcommand("evaluate", "Score attributions and CATE predictions");
  add_config_options(eval, eval_opts);
  eval->add_option("--model", eval_model, "Model manifest")->required();
  eval->add_option("--data", eval_data, "Dataset prefix (with _truth files)")->required();
  eval->add_option("--attributions", eval_attr, "Attribution CSV")->required();
  eval->add_option("--out", eval_out, "Write metrics JSON here instead of stdout");

  // experiment
  CommonOptions exp_opts;
  std::optional<std::size_t> exp_seeds, exp_workers;
  std::string exp_dir = ".";
  bool exp_timing = false;
  auto* exp = app.add_subcommand("experiment", "Run a full sweep and write CSV + SVG");
  add_config_options(exp, exp_opts);
  exp->add_option("--seeds", exp_seeds, "Number of seeds");
  exp->add_option("--workers", exp_workers, "Worker threads (default: ITEBENCH_WORKERS or cores)");
  exp->add_option("--out-dir", exp_dir, "Output directory");
  exp->add_flag("--timing", exp_timing, "Record wall time per learner");

  // plot
  CommonOptions plot_opts;
  std::string plot_results, plot_metric = "attr_pred", plot_out, plot_title;
  auto* plot = app.add_subcommand("plot", "Plot a results CSV");
  add_config_options(plot, plot_opts);
  plot->add_option("--results", plot_results, "Results CSV")->required();
  plot->add_option("--metric", plot_metric, "attr_pred, attr_prog or pehe");
  plot->add_option("--out", plot_out, "SVG path")->required();
  plot->add_option("--title", plot_title, "Plot title");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      const ExperimentConfig c = resolve_config(gen_opts, false);
      const PreparedExperiment prepared(c);
      const double v = gen_knob.value_or(c.grid.front());
      const SemiSyntheticDataset ds = generate_cell_dataset(prepared, v, gen_seed);
      export_dataset(ds, strip_csv(gen_out));
      std::cout << "wrote " << strip_csv(gen_out).string() << ".csv (" << ds.units() << " units)\n";
    } else if (*fit) {
      const ExperimentConfig c = resolve_config(fit_opts, false);
      const ObservedData data = read_observed_csv(fit_data);
      const Strategy s = strategy_from_string(fit_strategy);
      const CateEstimator est = fit_learner(s, data, c.learner, Seed(fit_seed), fit_gamma);
      save_estimator(est, fit_out);
      std::cout << "wrote " << fit_out << '\n';
    } else if (*attr) {
      const ExperimentConfig c = resolve_config(attr_opts, false);
      const CateEstimator est = load_estimator(attr_model);
      const ObservedData data = read_observed_csv(attr_data);
      AttributionSettings settings = c.attribution_settings;
      settings.seed = Seed(attr_seed);
      if (attr_cap) settings.row_cap = *attr_cap;
      if (attr_steps) settings.ig_steps = *attr_steps;
      const AttributionMethod m =
          attr_method.empty() ? c.attribution : attribution_method_from_string(attr_method);
      export_attributions_csv(attribute_batch(m, est, data.x, settings), attr_out);
      std::cout << "wrote " << attr_out << '\n';
    } else if (*eval) {
      const CateEstimator est = load_estimator(eval_model);
      const SemiSyntheticDataset ds = import_dataset(strip_csv(eval_data));
      const AttributionMatrix a = read_attributions_csv(eval_attr);
      nlohmann::json out;
      out["pehe"] = pehe(est.predict(ds.observed().x), ds.truth().tau);
      out["n_eval"] = nonzero_rows(a.scores);
      try {
        out["attr_pred"] = attr_pred(a, ds.truth().sets.pred());
        out["attr_prog"] = attr_prog(a, ds.truth().sets.prog);
      } catch (const UndefinedMetric&) {
        out["attr_pred"] = nullptr;
        out["attr_prog"] = nullptr;
      }
      if (eval_out.empty()) {
        std::cout << out.dump(2) << '\n';
      } else {
        std::ofstream f(eval_out);
        if (!f) throw IoError("cannot write " + eval_out);
        f << out.dump(2) << '\n';
      }
    } else if (*exp) {
      ExperimentConfig c = resolve_config(exp_opts, true);
      if (exp_seeds) c.seeds = *exp_seeds;
      if (exp_timing) c.record_wall_time = true;
      c.validate();
      fs::create_directories(exp_dir);
      const auto table = run_experiment(c, exp_workers.value_or(default_workers()));
      const fs::path base = fs::path(exp_dir) / c.name;
      emit_csv(table, base.string() + ".csv");
      const auto points = aggregate(table);
      emit_aggregate_csv(points, base.string() + "_aggregate.csv");
      for (PlotMetric m : {PlotMetric::attr_pred, PlotMetric::attr_prog, PlotMetric::pehe}) {
        try {
          emit_plot_svg(points, m, base.string() + "_" + std::string(to_string(m)) + ".svg", c.name);
        } catch (const InvalidConfig& e) {
          std::cerr << "skipping " << to_string(m) << " plot: " << e.what() << '\n';
        }
      }
      std::cout << "wrote " << base.string() << ".csv (" << table.size() << " records)\n";
    } else if (*plot) {
      const auto table = read_results_csv(plot_results);
      emit_plot_svg(aggregate(table), plot_metric_from_string(plot_metric), plot_out, plot_title);
      std::cout << "wrote " << plot_out << '\n';
    }
  } catch (const InvalidConfig& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}
