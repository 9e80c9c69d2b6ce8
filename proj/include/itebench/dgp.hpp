#pragma once

// Semi-synthetic data generation: covariates from CSV or a Gaussian
// generator, disjoint prognostic/predictive index sets, sampled outcome
// functions, propensity families and the observed dataset with its
// ground truth kept behind a separate accessor.

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "itebench/seed.hpp"
#include "itebench/types.hpp"

namespace itebench {

struct CovariateMatrix {
  RealMatrix x;  // N units x d features
  std::vector<std::string> names;

  Index units() const { return x.rows(); }
  Index features() const { return x.cols(); }
};

enum class Normalization { none, minmax, zscore };

Normalization normalization_from_string(std::string_view s);

CovariateMatrix load_covariates_csv(const std::filesystem::path& path, Normalization normalize);

/// Rows ~ N(0, Sigma) with unit variances and constant off-diagonal
/// correlation rho in [0, 1).
CovariateMatrix synth_covariates(Index n, Index d, double rho, Rng& rng);

struct FeatureIndexSets {
  IndexSet prog;
  IndexSet pred0;
  IndexSet pred1;

  /// pred0 followed by pred1.
  IndexSet pred() const;
};

FeatureIndexSets sample_feature_sets(Index d, Index n_i, Rng& rng);

/// floor(0.2 * d)
Index default_set_size(Index d);

// ---------------------------------------------------------------- nonlinearities

enum class Nonlinearity {
  abs,
  gaussian,      // exp(-x^2)
  cauchy,        // 1 / (1 + x^2)
  cos,
  sin,
  arctan,
  tanh,
  log1p_square,  // log(1 + x^2)
  sqrt1p_square, // sqrt(1 + x^2)
  cosh,
};

inline constexpr std::array<Nonlinearity, 10> kNonlinearities = {
    Nonlinearity::abs,    Nonlinearity::gaussian,     Nonlinearity::cauchy,
    Nonlinearity::cos,    Nonlinearity::sin,          Nonlinearity::arctan,
    Nonlinearity::tanh,   Nonlinearity::log1p_square, Nonlinearity::sqrt1p_square,
    Nonlinearity::cosh};

double apply(Nonlinearity chi, double v);
double derivative(Nonlinearity chi, double v);
std::string_view to_string(Nonlinearity chi);
Nonlinearity nonlinearity_from_string(std::string_view s);

// ---------------------------------------------------------------- outcome model

struct OutcomeModel {
  RealVector alpha_prog;
  RealVector alpha0;
  RealVector alpha1;
  Nonlinearity chi = Nonlinearity::abs;
  double omega_nl = 0.0;
  double omega_pred = 1.0;
};

OutcomeModel sample_outcome_model(Index n_i, double omega_nl, double omega_pred, Rng& rng);

struct Components {
  double mu_prog = 0;
  double f0 = 0;
  double f1 = 0;
};

/// (1 - w_nl) * a'x_S + w_nl * chi(a'x_S) for each of the three index sets.
Components eval_components(const OutcomeModel& model, const FeatureIndexSets& sets,
                           const Eigen::Ref<const RealVector>& x);

struct ComponentColumns {
  RealVector mu_prog;
  RealVector f0;
  RealVector f1;
};

ComponentColumns eval_components(const OutcomeModel& model, const FeatureIndexSets& sets,
                                 const RealMatrix& x);

/// True CATE, w_pred * (f1 - f0), and its input gradient.
RealVector true_cate(const OutcomeModel& model, const FeatureIndexSets& sets, const RealMatrix& x);
RealMatrix true_cate_gradient(const OutcomeModel& model, const FeatureIndexSets& sets,
                              const RealMatrix& x);

// ---------------------------------------------------------------- propensity

enum class PropensityKind { uniform, predictive_confounding, prognostic_confounding, nonconfounded };

PropensityKind propensity_kind_from_string(std::string_view s);
std::string_view to_string(PropensityKind k);

struct PropensitySpec {
  PropensityKind kind = PropensityKind::uniform;
  double omega_pi = 0.0;
  std::optional<Index> irrelevant_index;
};

struct ZScoreStats {
  double mean = 0.0;
  double std = 1.0;  // population standard deviation
};

struct PropensityScores {
  RealVector pi;
  std::optional<ZScoreStats> stats;  // absent for the uniform kind
};

PropensityScores propensity_scores(const PropensitySpec& spec, const OutcomeModel& model,
                                   const FeatureIndexSets& sets, const RealMatrix& x_train,
                                   const RealMatrix& x_query);

// ---------------------------------------------------------------- datasets

/// What a learner may see.
struct ObservedData {
  RealMatrix x;
  RealVector w;  // 0/1
  RealVector y;

  Index units() const { return x.rows(); }
  Index features() const { return x.cols(); }
};

struct GroundTruth {
  RealVector y0;  // noiseless potential outcomes
  RealVector y1;
  RealVector tau;
  RealVector pi;
  FeatureIndexSets sets;
  OutcomeModel model;
  PropensitySpec spec;
  double sigma = 0.0;
};

class SemiSyntheticDataset {
 public:
  SemiSyntheticDataset(ObservedData observed, std::vector<std::string> names, GroundTruth truth);

  const ObservedData& observed() const { return observed_; }
  const std::vector<std::string>& feature_names() const { return names_; }
  /// Ground truth for scoring only; never hand this to a learner.
  const GroundTruth& truth() const { return truth_; }

  Index units() const { return observed_.units(); }

  /// Rows in the given order, ground truth carried along.
  SemiSyntheticDataset subset(const IndexSet& rows) const;

 private:
  ObservedData observed_;
  std::vector<std::string> names_;
  GroundTruth truth_;
};

/// W_i ~ Bernoulli(pi_i), one uniform draw per unit in order.
RealVector sample_treatments(const RealVector& pi, Rng& rng);

/// Streams used by generate_dataset: "irrelevant", "treatment", "noise".
SemiSyntheticDataset generate_dataset(const CovariateMatrix& x, const FeatureIndexSets& sets,
                                      const OutcomeModel& model, PropensitySpec spec, double sigma,
                                      Seed seed);

std::pair<SemiSyntheticDataset, SemiSyntheticDataset> train_test_split(
    const SemiSyntheticDataset& ds, double test_fraction, Rng& rng);

// ---------------------------------------------------------------- files

/// Writes <prefix>.csv (unit_id,w,y,x_0..), <prefix>_truth.csv
/// (unit_id,y0,y1,tau,pi) and <prefix>_truth.json.
void export_dataset(const SemiSyntheticDataset& ds, const std::filesystem::path& prefix);

/// Reads the learner-visible part of an exported dataset.
ObservedData read_observed_csv(const std::filesystem::path& path);

/// Reads an exported dataset back together with its ground truth.
SemiSyntheticDataset import_dataset(const std::filesystem::path& prefix);

}  // namespace itebench
