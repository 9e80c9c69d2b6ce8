#pragma once

// Experiment sweeps: one cell is (knob value, seed); every cell generates a
// dataset, fits each configured learner on the same split, attributes the
// CATE on the test rows and scores the result.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "itebench/attribution.hpp"
#include "itebench/dgp.hpp"
#include "itebench/learners.hpp"

namespace itebench {

enum class Knob { predictive_scale, nonlinearity_scale, propensity_scale };

std::string_view to_string(Knob k);
Knob knob_from_string(std::string_view s);

struct CovariateSource {
  enum class Kind { synthetic, csv } kind = Kind::synthetic;
  // synthetic
  Index n = 5000;
  Index d = 30;
  double correlation = 0.0;
  // csv
  std::filesystem::path path;
  Normalization normalize = Normalization::zscore;
};

struct LearnerSpec {
  Strategy strategy;
  double gamma = 0.0;

  /// "S", "TARNET", "CFRNET_g10", ...
  std::string label() const;
};

struct ExperimentConfig {
  std::string name = "experiment";
  CovariateSource covariates;
  std::optional<Index> set_size;  // default floor(0.2 d)
  Knob knob = Knob::predictive_scale;
  std::vector<double> grid = {1e-3, 1e-2, 1e-1, 0.5, 1.0};
  double omega_pred = 1.0;
  double omega_nl = 0.0;
  double sigma = 0.1;
  PropensitySpec propensity;
  std::vector<Strategy> learners = {Strategy::S, Strategy::T, Strategy::X, Strategy::DR,
                                    Strategy::TARNET};
  std::vector<double> gammas = {0.0, 0.1, 1.0, 10.0};  // one CFRNET fit per entry
  AttributionMethod attribution = AttributionMethod::integrated_gradients;
  AttributionSettings attribution_settings;
  std::size_t seeds = 30;
  std::uint64_t first_seed = 0;
  std::uint64_t base_seed = 0;
  double test_fraction = 0.2;
  LearnerConfig learner;
  bool record_wall_time = false;  // off keeps result files byte-reproducible

  void validate() const;
  std::vector<LearnerSpec> learner_specs() const;
  std::vector<std::uint64_t> seed_list() const;
  std::string dataset_tag() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& c);
ExperimentConfig load_config(const std::filesystem::path& path);

/// Desk-scale presets: "exp1" (predictive scale), "exp2" (nonlinearity),
/// "exp3" (predictive confounding with CFRNet).
ExperimentConfig experiment_preset(std::string_view name);

struct ResultRecord {
  std::string dataset;
  std::string learner;
  std::string attr_method;
  std::string knob;
  double knob_value = 0.0;
  std::uint64_t seed = 0;
  double attr_pred = 0.0;  // NaN when undefined or the learner failed
  double attr_prog = 0.0;
  double pehe = 0.0;
  double wall_ms = 0.0;
};

/// Covariates are loaded once and shared between cells.
class PreparedExperiment {
 public:
  explicit PreparedExperiment(ExperimentConfig config);

  const ExperimentConfig& config() const { return config_; }
  /// CSV covariates, or the seed-specific synthetic sample.
  CovariateMatrix covariates(std::uint64_t seed) const;

 private:
  ExperimentConfig config_;
  std::shared_ptr<const CovariateMatrix> csv_covariates_;
};

/// Structure of a seed's DGP: same covariates, index sets and weights for
/// every knob value of that seed. Treatment, noise, split, fits and
/// attribution use streams keyed by (seed, knob value).
SemiSyntheticDataset generate_cell_dataset(const PreparedExperiment& exp, double knob_value,
                                           std::uint64_t seed);

std::vector<ResultRecord> run_cell(const PreparedExperiment& exp, double knob_value,
                                   std::uint64_t seed);
std::vector<ResultRecord> run_cell(const ExperimentConfig& config, double knob_value,
                                   std::uint64_t seed);

/// Worker count from ITEBENCH_WORKERS, else the hardware concurrency.
std::size_t default_workers();

/// grid x seeds, rows ordered by knob value, then seed, then learner.
std::vector<ResultRecord> run_experiment(const ExperimentConfig& config,
                                         std::size_t workers = default_workers());

struct MetricSummary {
  double mean = 0.0;
  double std_error = 0.0;
  std::size_t count = 0;  // finite values only
};

struct AggregatePoint {
  std::string learner;
  std::string knob;
  double knob_value = 0.0;
  MetricSummary attr_pred;
  MetricSummary attr_prog;
  MetricSummary pehe;
};

/// Per (learner, knob value) mean and standard error (sample sd / sqrt(n)).
std::vector<AggregatePoint> aggregate(const std::vector<ResultRecord>& table);

/// Exact lookup; nullptr when absent.
const AggregatePoint* find_point(const std::vector<AggregatePoint>& points, std::string_view learner,
                                 double knob_value);

void emit_csv(const std::vector<ResultRecord>& table, const std::filesystem::path& path);
std::vector<ResultRecord> read_results_csv(const std::filesystem::path& path);
void emit_aggregate_csv(const std::vector<AggregatePoint>& points, const std::filesystem::path& path);

enum class PlotMetric { attr_pred, attr_prog, pehe };
PlotMetric plot_metric_from_string(std::string_view s);
std::string_view to_string(PlotMetric m);

/// Self-contained SVG: one line per learner with a one-standard-error band.
std::string render_plot_svg(const std::vector<AggregatePoint>& points, PlotMetric metric,
                            const std::string& title = "");
void emit_plot_svg(const std::vector<AggregatePoint>& points, PlotMetric metric,
                   const std::filesystem::path& path, const std::string& title = "");

/// Log-scaled x axis when every value is positive and they span >= 2 decades.
bool use_log_axis(const std::vector<double>& xs);

}  // namespace itebench
