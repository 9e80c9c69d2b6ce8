#include "itebench/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <limits>
#include <map>
#include <thread>

#include "itebench/csv.hpp"
#include "itebench/errors.hpp"
#include "itebench/metrics.hpp"

namespace itebench {

using nlohmann::json;

std::string_view to_string(Knob k) {
  switch (k) {
    case Knob::predictive_scale: return "predictive_scale";
    case Knob::nonlinearity_scale: return "nonlinearity_scale";
    case Knob::propensity_scale: return "propensity_scale";
  }
  return "?";
}

Knob knob_from_string(std::string_view s) {
  if (s == "predictive_scale") return Knob::predictive_scale;
  if (s == "nonlinearity_scale") return Knob::nonlinearity_scale;
  if (s == "propensity_scale") return Knob::propensity_scale;
  throw InvalidConfig("unknown knob '" + std::string(s) + "'");
}

std::string LearnerSpec::label() const {
  if (strategy != Strategy::CFRNET) return std::string(to_string(strategy));
  std::string g = csv::format_real(gamma);
  return "CFRNET_g" + g;
}

// ---------------------------------------------------------------- config

void ExperimentConfig::validate() const {
  if (grid.empty()) throw InvalidConfig("knob grid is empty");
  if (seeds < 1) throw InvalidConfig("need at least one seed");
  if (learners.empty()) throw InvalidConfig("no learners configured");
  for (double v : grid) {
    if (!std::isfinite(v) || v < 0.0) throw InvalidConfig("grid values must be finite and >= 0");
    if (knob == Knob::nonlinearity_scale && v > 1.0) {
      throw InvalidConfig("nonlinearity grid values must lie in [0, 1]");
    }
  }
  if (!(omega_nl >= 0.0 && omega_nl <= 1.0)) throw InvalidConfig("omega_nl must lie in [0, 1]");
  if (!(omega_pred >= 0.0)) throw InvalidConfig("omega_pred must be >= 0");
  if (!(sigma >= 0.0)) throw InvalidConfig("sigma must be >= 0");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw InvalidConfig("test fraction must lie in (0, 1)");
  if (attribution_settings.row_cap < 1) throw InvalidConfig("attribution cap must be >= 1");
  if (attribution_settings.ig_steps < 1) throw InvalidConfig("integrated-gradient steps must be >= 1");
  if (learner.hidden_units < 1) throw InvalidConfig("hidden units must be >= 1");
  if (!(learner.clip > 0.0 && learner.clip < 0.5)) throw InvalidConfig("clip must lie in (0, 0.5)");
  learner.train.validate();
  if (std::find(learners.begin(), learners.end(), Strategy::CFRNET) != learners.end()) {
    if (gammas.empty()) throw InvalidConfig("CFRNET configured without gamma values");
    for (double g : gammas) {
      if (!(g >= 0.0) || !std::isfinite(g)) throw InvalidConfig("gamma values must be finite and >= 0");
    }
  }
  if (covariates.kind == CovariateSource::Kind::synthetic) {
    if (covariates.d < 4) throw InvalidConfig("synthetic covariates need d >= 4");
    if (covariates.n < 2) throw InvalidConfig("synthetic covariates need n >= 2");
    if (!(covariates.correlation >= 0.0 && covariates.correlation < 1.0)) {
      throw InvalidConfig("covariate correlation must lie in [0, 1)");
    }
  } else if (covariates.path.empty()) {
    throw InvalidConfig("CSV covariate source needs a path");
  }
  if (set_size && *set_size < 1) throw InvalidConfig("set size must be >= 1");
}

std::vector<LearnerSpec> ExperimentConfig::learner_specs() const {
  std::vector<LearnerSpec> specs;
  for (Strategy s : learners) {
    if (s == Strategy::CFRNET) {
      for (double g : gammas) specs.push_back({s, g});
    } else {
      specs.push_back({s, 0.0});
    }
  }
  return specs;
}

std::vector<std::uint64_t> ExperimentConfig::seed_list() const {
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < seeds; ++i) out.push_back(first_seed + i);
  return out;
}

std::string ExperimentConfig::dataset_tag() const {
  if (covariates.kind == CovariateSource::Kind::csv) return covariates.path.stem().string();
  return "synthetic_d" + std::to_string(covariates.d);
}

namespace {

template <typename T>
void read_opt(const json& j, const char* key, T& out) {
  if (j.contains(key) && !j.at(key).is_null()) out = j.at(key).get<T>();
}

}  // namespace

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  try {
    read_opt(j, "name", c.name);
    if (j.contains("covariates")) {
      const json& cj = j.at("covariates");
      const std::string source = cj.value("source", std::string("synthetic"));
      if (source == "synthetic") {
        c.covariates.kind = CovariateSource::Kind::synthetic;
        read_opt(cj, "n", c.covariates.n);
        read_opt(cj, "d", c.covariates.d);
        read_opt(cj, "correlation", c.covariates.correlation);
      } else if (source == "csv") {
        c.covariates.kind = CovariateSource::Kind::csv;
        c.covariates.path = cj.at("path").get<std::string>();
        c.covariates.normalize = normalization_from_string(cj.value("normalize", std::string("zscore")));
      } else {
        throw InvalidConfig("unknown covariate source '" + source + "'");
      }
    }
    if (j.contains("set_size") && !j.at("set_size").is_null()) c.set_size = j.at("set_size").get<Index>();
    if (j.contains("knob")) c.knob = knob_from_string(j.at("knob").get<std::string>());
    read_opt(j, "grid", c.grid);
    read_opt(j, "omega_pred", c.omega_pred);
    read_opt(j, "omega_nl", c.omega_nl);
    read_opt(j, "sigma", c.sigma);
    if (j.contains("propensity")) {
      const json& pj = j.at("propensity");
      c.propensity.kind = propensity_kind_from_string(pj.value("kind", std::string("uniform")));
      read_opt(pj, "omega_pi", c.propensity.omega_pi);
    }
    if (j.contains("learners")) {
      c.learners.clear();
      for (const auto& s : j.at("learners")) c.learners.push_back(strategy_from_string(s.get<std::string>()));
    }
    read_opt(j, "gammas", c.gammas);
    if (j.contains("attribution")) {
      c.attribution = attribution_method_from_string(j.at("attribution").get<std::string>());
    }
    if (j.contains("attribution_settings")) {
      const json& aj = j.at("attribution_settings");
      read_opt(aj, "row_cap", c.attribution_settings.row_cap);
      read_opt(aj, "ig_steps", c.attribution_settings.ig_steps);
      read_opt(aj, "n_permutations", c.attribution_settings.n_permutations);
      if (aj.contains("baseline") && !aj.at("baseline").is_null()) {
        const auto b = aj.at("baseline").get<std::vector<double>>();
        c.attribution_settings.baseline = Eigen::Map<const RealVector>(b.data(), static_cast<Index>(b.size()));
      }
    }
    read_opt(j, "seeds", c.seeds);
    read_opt(j, "first_seed", c.first_seed);
    read_opt(j, "base_seed", c.base_seed);
    read_opt(j, "test_fraction", c.test_fraction);
    if (j.contains("train")) {
      const json& tj = j.at("train");
      read_opt(tj, "learning_rate", c.learner.train.learning_rate);
      read_opt(tj, "batch_size", c.learner.train.batch_size);
      read_opt(tj, "validation_fraction", c.learner.train.validation_fraction);
      read_opt(tj, "max_epochs", c.learner.train.max_epochs);
      read_opt(tj, "patience", c.learner.train.patience);
    }
    read_opt(j, "hidden_units", c.learner.hidden_units);
    read_opt(j, "clip", c.learner.clip);
    read_opt(j, "record_wall_time", c.record_wall_time);
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json j;
  j["name"] = c.name;
  if (c.covariates.kind == CovariateSource::Kind::synthetic) {
    j["covariates"] = {{"source", "synthetic"},
                       {"n", c.covariates.n},
                       {"d", c.covariates.d},
                       {"correlation", c.covariates.correlation}};
  } else {
    const char* norm = c.covariates.normalize == Normalization::none     ? "none"
                       : c.covariates.normalize == Normalization::minmax ? "minmax"
                                                                          : "zscore";
    j["covariates"] = {{"source", "csv"}, {"path", c.covariates.path.string()}, {"normalize", norm}};
  }
  j["set_size"] = c.set_size ? json(*c.set_size) : json(nullptr);
  j["knob"] = std::string(to_string(c.knob));
  j["grid"] = c.grid;
  j["omega_pred"] = c.omega_pred;
  j["omega_nl"] = c.omega_nl;
  j["sigma"] = c.sigma;
  j["propensity"] = {{"kind", std::string(to_string(c.propensity.kind))}, {"omega_pi", c.propensity.omega_pi}};
  j["learners"] = json::array();
  for (Strategy s : c.learners) j["learners"].push_back(std::string(to_string(s)));
  j["gammas"] = c.gammas;
  j["attribution"] = std::string(to_string(c.attribution));
  j["attribution_settings"] = {{"row_cap", c.attribution_settings.row_cap},
                               {"ig_steps", c.attribution_settings.ig_steps},
                               {"n_permutations", c.attribution_settings.n_permutations}};
  j["seeds"] = c.seeds;
  j["first_seed"] = c.first_seed;
  j["base_seed"] = c.base_seed;
  j["test_fraction"] = c.test_fraction;
  j["train"] = {{"learning_rate", c.learner.train.learning_rate},
                {"batch_size", c.learner.train.batch_size},
                {"validation_fraction", c.learner.train.validation_fraction},
                {"max_epochs", c.learner.train.max_epochs},
                {"patience", c.learner.train.patience}};
  j["hidden_units"] = c.learner.hidden_units;
  j["clip"] = c.learner.clip;
  j["record_wall_time"] = c.record_wall_time;
  return j;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidConfig("config " + path.string() + ": " + e.what());
  }
  ExperimentConfig c = config_from_json(j);
  if (c.covariates.kind == CovariateSource::Kind::csv && c.covariates.path.is_relative()) {
    c.covariates.path = path.parent_path() / c.covariates.path;
  }
  return c;
}

ExperimentConfig experiment_preset(std::string_view name) {
  ExperimentConfig c;
  c.covariates = CovariateSource{};
  c.covariates.n = 5000;
  c.covariates.d = 30;
  c.seeds = 5;
  c.sigma = 0.1;
  // Desk-scale optimizer settings; see README.
  c.learner.train.learning_rate = 1e-3;
  c.learner.train.batch_size = 256;
  c.learner.train.max_epochs = 300;
  c.learner.train.patience = 10;
  if (name == "exp1") {
    c.name = "exp1_predictive_scale";
    c.knob = Knob::predictive_scale;
    c.grid = {1e-3, 1e-2, 1e-1, 0.5, 1.0};
    c.omega_nl = 0.0;
    c.learners = {Strategy::S, Strategy::T, Strategy::X, Strategy::DR, Strategy::TARNET};
  } else if (name == "exp2") {
    c.name = "exp2_nonlinearity_scale";
    c.knob = Knob::nonlinearity_scale;
    c.grid = {0.0, 0.5, 1.0};
    c.omega_pred = 1.0;
    c.learners = {Strategy::S, Strategy::T, Strategy::X, Strategy::DR, Strategy::TARNET};
  } else if (name == "exp3") {
    c.name = "exp3_predictive_confounding";
    c.knob = Knob::propensity_scale;
    c.grid = {0.0, 2.0};
    c.omega_pred = 1.0;
    c.omega_nl = 0.0;
    c.propensity.kind = PropensityKind::predictive_confounding;
    c.learners = {Strategy::S, Strategy::T, Strategy::X, Strategy::DR, Strategy::TARNET,
                  Strategy::CFRNET};
    c.gammas = {10.0};
  } else {
    throw InvalidConfig("unknown preset '" + std::string(name) + "'");
  }
  c.validate();
  return c;
}

// ---------------------------------------------------------------- cells

PreparedExperiment::PreparedExperiment(ExperimentConfig config) : config_(std::move(config)) {
  config_.validate();
  if (config_.covariates.kind == CovariateSource::Kind::csv) {
    csv_covariates_ = std::make_shared<const CovariateMatrix>(
        load_covariates_csv(config_.covariates.path, config_.covariates.normalize));
  }
}

CovariateMatrix PreparedExperiment::covariates(std::uint64_t seed) const {
  if (csv_covariates_) return *csv_covariates_;
  Rng rng = Seed(config_.base_seed).child(seed).child("structure").child("covariates").engine();
  return synth_covariates(config_.covariates.n, config_.covariates.d, config_.covariates.correlation, rng);
}

namespace {

Seed cell_seed(const ExperimentConfig& c, double knob_value, std::uint64_t seed) {
  return Seed(c.base_seed).child(seed).child("cell").child_real(knob_value);
}

}  // namespace

SemiSyntheticDataset generate_cell_dataset(const PreparedExperiment& exp, double knob_value,
                                           std::uint64_t seed) {
  const ExperimentConfig& c = exp.config();
  const CovariateMatrix cov = exp.covariates(seed);
  const Index d = cov.features();
  const Index n_i = c.set_size ? *c.set_size : default_set_size(d);
  const Seed structure = Seed(c.base_seed).child(seed).child("structure");
  Rng sets_rng = structure.child("sets").engine();
  const FeatureIndexSets sets = sample_feature_sets(d, n_i, sets_rng);
  Rng model_rng = structure.child("model").engine();
  OutcomeModel model = sample_outcome_model(n_i, c.omega_nl, c.omega_pred, model_rng);
  PropensitySpec spec = c.propensity;
  switch (c.knob) {
    case Knob::predictive_scale: model.omega_pred = knob_value; break;
    case Knob::nonlinearity_scale: model.omega_nl = knob_value; break;
    case Knob::propensity_scale: spec.omega_pi = knob_value; break;
  }
  return generate_dataset(cov, sets, model, spec, c.sigma, cell_seed(c, knob_value, seed).child("dgp"));
}

std::vector<ResultRecord> run_cell(const PreparedExperiment& exp, double knob_value,
                                   std::uint64_t seed) {
  using clock = std::chrono::steady_clock;
  const ExperimentConfig& c = exp.config();
  const Seed cs = cell_seed(c, knob_value, seed);
  const auto specs = c.learner_specs();
  const std::string attr_name(to_string(c.attribution));
  const std::string knob_name(to_string(c.knob));
  const double nan = std::numeric_limits<double>::quiet_NaN();

  std::vector<ResultRecord> records;
  for (const LearnerSpec& s : specs) {
    records.push_back({c.dataset_tag(), s.label(), attr_name, knob_name, knob_value, seed, nan, nan, nan, 0.0});
  }

  std::optional<std::pair<SemiSyntheticDataset, SemiSyntheticDataset>> parts;
  try {
    const SemiSyntheticDataset ds = generate_cell_dataset(exp, knob_value, seed);
    Rng split_rng = cs.child("split").engine();
    parts = train_test_split(ds, c.test_fraction, split_rng);
  } catch (const Error& e) {
    std::cerr << "cell (" << knob_name << "=" << knob_value << ", seed " << seed
              << ") dataset failed: " << e.what() << '\n';
    return records;
  }
  const ObservedData& train = parts->first.observed();
  const SemiSyntheticDataset& test = parts->second;
  const GroundTruth& truth = test.truth();
  const Seed fit_seed = cs.child("learners");

  // T, DR and X share one set of first-stage fits.
  std::optional<NuisanceSet> nuisances;
  double nuisance_ms = 0.0;
  std::string nuisance_error;
  auto need_nuisances = [&]() -> const NuisanceSet& {
    if (!nuisances && nuisance_error.empty()) {
      const auto t0 = clock::now();
      try {
        nuisances = fit_nuisances(train, c.learner, fit_seed);
      } catch (const Error& e) {
        nuisance_error = e.what();
      }
      nuisance_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count();
    }
    if (!nuisances) throw NumericError("first-stage fits failed: " + nuisance_error);
    return *nuisances;
  };

  for (std::size_t k = 0; k < specs.size(); ++k) {
    const LearnerSpec& s = specs[k];
    ResultRecord& rec = records[k];
    const auto t0 = clock::now();
    double extra_ms = 0.0;
    try {
      std::optional<CateEstimator> est;
      switch (s.strategy) {
        case Strategy::S: est = fit_s_learner(train, c.learner, fit_seed); break;
        case Strategy::T: est = t_learner_from(need_nuisances()); extra_ms = nuisance_ms; break;
        case Strategy::DR:
          est = fit_dr_learner(train, need_nuisances(), c.learner, fit_seed);
          extra_ms = nuisance_ms;
          break;
        case Strategy::X:
          est = fit_x_learner(train, need_nuisances(), c.learner, fit_seed);
          extra_ms = nuisance_ms;
          break;
        case Strategy::TARNET: est = fit_tarnet(train, 0.0, c.learner, fit_seed); break;
        case Strategy::CFRNET: est = fit_tarnet(train, s.gamma, c.learner, fit_seed); break;
      }
      rec.pehe = pehe(est->predict(test.observed().x), truth.tau);
      AttributionSettings settings = c.attribution_settings;
      settings.seed = cs.child("attribution");
      const AttributionMatrix attr = attribute_batch(c.attribution, *est, test.observed().x, settings);
      try {
        rec.attr_pred = attr_pred(attr, truth.sets.pred());
        rec.attr_prog = attr_prog(attr, truth.sets.prog);
      } catch (const UndefinedMetric&) {
        // leave NaN
      }
    } catch (const Error& e) {
      std::cerr << "cell (" << knob_name << "=" << knob_value << ", seed " << seed << ") learner "
                << rec.learner << " failed: " << e.what() << '\n';
    }
    if (c.record_wall_time) {
      rec.wall_ms = std::chrono::duration<double, std::milli>(clock::now() - t0).count() + extra_ms;
    }
  }
  return records;
}

std::vector<ResultRecord> run_cell(const ExperimentConfig& config, double knob_value,
                                   std::uint64_t seed) {
  return run_cell(PreparedExperiment(config), knob_value, seed);
}

std::size_t default_workers() {
  if (const char* env = std::getenv("ITEBENCH_WORKERS")) {
    const long v = std::strtol(env, nullptr, 10);
    if (v > 0) return static_cast<std::size_t>(v);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<ResultRecord> run_experiment(const ExperimentConfig& config, std::size_t workers) {
  const PreparedExperiment exp(config);
  const auto seeds = config.seed_list();
  struct Cell {
    double value;
    std::uint64_t seed;
  };
  std::vector<Cell> cells;
  for (double v : config.grid) {
    for (std::uint64_t s : seeds) cells.push_back({v, s});
  }
  std::vector<std::vector<ResultRecord>> out(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      out[i] = run_cell(exp, cells[i].value, cells[i].seed);
    }
  };
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(cells.size(), 1));
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  std::vector<ResultRecord> table;
  for (auto& rows : out) table.insert(table.end(), rows.begin(), rows.end());
  return table;
}

// ---------------------------------------------------------------- aggregation

namespace {

MetricSummary summarize(const std::vector<double>& values) {
  MetricSummary s;
  std::vector<double> finite;
  for (double v : values) {
    if (std::isfinite(v)) finite.push_back(v);
  }
  s.count = finite.size();
  if (finite.empty()) {
    s.mean = std::numeric_limits<double>::quiet_NaN();
    s.std_error = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  double sum = 0.0;
  for (double v : finite) sum += v;
  s.mean = sum / static_cast<double>(finite.size());
  if (finite.size() > 1) {
    double ss = 0.0;
    for (double v : finite) ss += (v - s.mean) * (v - s.mean);
    const double sd = std::sqrt(ss / static_cast<double>(finite.size() - 1));
    s.std_error = sd / std::sqrt(static_cast<double>(finite.size()));
  }
  return s;
}

}  // namespace

std::vector<AggregatePoint> aggregate(const std::vector<ResultRecord>& table) {
  struct Bucket {
    std::string knob;
    std::vector<double> pred, prog, pehe;
  };
  // Keep learners in first-seen order, knob values ascending.
  std::vector<std::string> learner_order;
  std::map<std::pair<std::string, double>, Bucket> buckets;
  for (const ResultRecord& r : table) {
    if (std::find(learner_order.begin(), learner_order.end(), r.learner) == learner_order.end()) {
      learner_order.push_back(r.learner);
    }
    Bucket& b = buckets[{r.learner, r.knob_value}];
    b.knob = r.knob;
    b.pred.push_back(r.attr_pred);
    b.prog.push_back(r.attr_prog);
    b.pehe.push_back(r.pehe);
  }
  std::vector<AggregatePoint> points;
  for (const std::string& l : learner_order) {
    for (const auto& [key, b] : buckets) {
      if (key.first != l) continue;
      points.push_back({l, b.knob, key.second, summarize(b.pred), summarize(b.prog), summarize(b.pehe)});
    }
  }
  return points;
}

const AggregatePoint* find_point(const std::vector<AggregatePoint>& points, std::string_view learner,
                                 double knob_value) {
  for (const auto& p : points) {
    if (p.learner == learner && p.knob_value == knob_value) return &p;
  }
  return nullptr;
}

// ---------------------------------------------------------------- files

void emit_csv(const std::vector<ResultRecord>& table, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  csv::write_row(out, {"dataset", "learner", "attr_method", "knob", "knob_value", "seed", "attr_pred",
                       "attr_prog", "pehe", "wall_ms"});
  for (const ResultRecord& r : table) {
    csv::write_row(out, {r.dataset, r.learner, r.attr_method, r.knob, csv::format_real(r.knob_value),
                         std::to_string(r.seed), csv::format_real(r.attr_pred),
                         csv::format_real(r.attr_prog), csv::format_real(r.pehe),
                         csv::format_real(r.wall_ms)});
  }
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<ResultRecord> read_results_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read_file(path);
  const std::size_t c_ds = t.column("dataset"), c_l = t.column("learner"), c_m = t.column("attr_method"),
                    c_k = t.column("knob"), c_v = t.column("knob_value"), c_s = t.column("seed"),
                    c_p = t.column("attr_pred"), c_g = t.column("attr_prog"), c_e = t.column("pehe"),
                    c_w = t.column("wall_ms");
  auto real = [](const std::string& cell, std::size_t r, std::size_t c) {
    if (cell == "nan") return std::numeric_limits<double>::quiet_NaN();
    return csv::parse_real(cell, r, c);
  };
  std::vector<ResultRecord> table;
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto& row = t.rows[r];
    ResultRecord rec;
    rec.dataset = row[c_ds];
    rec.learner = row[c_l];
    rec.attr_method = row[c_m];
    rec.knob = row[c_k];
    rec.knob_value = real(row[c_v], r + 1, c_v);
    rec.seed = std::stoull(row[c_s]);
    rec.attr_pred = real(row[c_p], r + 1, c_p);
    rec.attr_prog = real(row[c_g], r + 1, c_g);
    rec.pehe = real(row[c_e], r + 1, c_e);
    rec.wall_ms = real(row[c_w], r + 1, c_w);
    table.push_back(std::move(rec));
  }
  return table;
}

void emit_aggregate_csv(const std::vector<AggregatePoint>& points, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  csv::write_row(out, {"learner", "knob", "knob_value", "n", "attr_pred_mean", "attr_pred_se",
                       "attr_prog_mean", "attr_prog_se", "pehe_mean", "pehe_se"});
  for (const auto& p : points) {
    csv::write_row(out, {p.learner, p.knob, csv::format_real(p.knob_value), std::to_string(p.pehe.count),
                         csv::format_real(p.attr_pred.mean), csv::format_real(p.attr_pred.std_error),
                         csv::format_real(p.attr_prog.mean), csv::format_real(p.attr_prog.std_error),
                         csv::format_real(p.pehe.mean), csv::format_real(p.pehe.std_error)});
  }
}

}  // namespace itebench
