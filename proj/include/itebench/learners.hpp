#pragma once

// Neural CATE estimators built on the dense-network core: S-, T-, DR- and
// X-learners plus TARNet and its balanced variant CFRNet.
//
// Every fitted scalar function gets the same budget of two hidden rectifier
// layers. For TARNet/CFRNet that budget is split into one shared
// representation layer and one hidden layer per outcome head.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "itebench/core/mlp.hpp"
#include "itebench/core/train.hpp"
#include "itebench/dgp.hpp"
#include "itebench/seed.hpp"
#include "itebench/types.hpp"

namespace itebench {

using Net = core::MlpParams<double>;

enum class Strategy { S, T, TARNET, CFRNET, DR, X };

std::string_view to_string(Strategy s);
Strategy strategy_from_string(std::string_view s);

struct LearnerConfig {
  core::TrainConfig train;
  Index hidden_units = 100;
  double clip = 0.01;  // propensity clipping for DR/X pseudo-outcomes
};

struct NuisanceSet {
  Net mu0;  // fitted on controls
  Net mu1;  // fitted on treated
  Net pi;   // sigmoid output, fitted on everyone
};

/// A fitted estimator. Network layout by strategy:
///   S      {mu(x, w)}                       input d + 1
///   T      {mu0, mu1}
///   TARNET {trunk, head0, head1}            trunk has a rectifier output
///   CFRNET same as TARNET
///   DR     {tau}
///   X      {tau0, tau1, g}                  g has a sigmoid output
class CateEstimator {
 public:
  CateEstimator(Strategy strategy, std::vector<Net> networks, double gamma = 0.0,
                double clip = 0.01);

  Strategy strategy() const { return strategy_; }
  double gamma() const { return gamma_; }
  double clip() const { return clip_; }
  const std::vector<Net>& networks() const { return networks_; }
  Index input_dim() const { return input_dim_; }

  std::optional<std::uint64_t> seed;  // fit seed, recorded in the manifest

  /// tau_hat for every row of x.
  RealVector predict(const RealMatrix& x) const;
  /// Row r holds the gradient of tau_hat at x.row(r).
  RealMatrix gradients(const RealMatrix& x) const;

 private:
  void check(const RealMatrix& x) const;

  Strategy strategy_;
  std::vector<Net> networks_;
  double gamma_;
  double clip_;
  Index input_dim_ = 0;
};

RealVector predict_cate(const CateEstimator& est, const RealMatrix& x);
RealVector cate_input_gradient(const CateEstimator& est, const RealVector& x);

// ---------------------------------------------------------------- fitting

/// Regression network [d, h, h, 1] with identity output.
Net make_regression_net(Index input_dim, Index hidden, Rng& rng);

/// mu0 on controls, mu1 on treated (squared error), pi on all units
/// (cross-entropy). Streams: "mu0", "mu1", "pi".
NuisanceSet fit_nuisances(const ObservedData& train, const LearnerConfig& config, Seed seed);

CateEstimator fit_s_learner(const ObservedData& train, const LearnerConfig& config, Seed seed);

/// Uses the same streams as fit_nuisances, so the heads equal its mu0/mu1.
CateEstimator fit_t_learner(const ObservedData& train, const LearnerConfig& config, Seed seed);
CateEstimator t_learner_from(const NuisanceSet& nuisances);

/// gamma = 0 gives TARNet, gamma > 0 CFRNet with a linear-MMD penalty on the
/// representation of each minibatch.
CateEstimator fit_tarnet(const ObservedData& train, double gamma, const LearnerConfig& config,
                         Seed seed);

double dr_pseudo_outcome(double y, double w, double pi_hat, double mu0_hat, double mu1_hat,
                         double clip);
RealVector dr_pseudo_outcomes(const RealVector& y, const RealVector& w, const RealVector& pi_hat,
                              const RealVector& mu0_hat, const RealVector& mu1_hat, double clip);

CateEstimator fit_dr_learner(const ObservedData& train, const LearnerConfig& config, Seed seed);
CateEstimator fit_dr_learner(const ObservedData& train, const NuisanceSet& nuisances,
                             const LearnerConfig& config, Seed seed);

/// Second stage on precomputed pseudo-outcomes (stream "dr").
CateEstimator fit_dr_stage2(const RealMatrix& x, const RealVector& pseudo,
                            const LearnerConfig& config, Seed seed);

CateEstimator fit_x_learner(const ObservedData& train, const LearnerConfig& config, Seed seed);
CateEstimator fit_x_learner(const ObservedData& train, const NuisanceSet& nuisances,
                            const LearnerConfig& config, Seed seed);

/// Dispatch by strategy; gamma is used by CFRNET only.
CateEstimator fit_learner(Strategy strategy, const ObservedData& train, const LearnerConfig& config,
                          Seed seed, double gamma = 0.0);

// ---------------------------------------------------------------- persistence

/// JSON manifest at `manifest`, raw little-endian doubles at
/// `manifest` + ".weights.bin". Round-trips bit-exactly.
void save_estimator(const CateEstimator& est, const std::filesystem::path& manifest);
CateEstimator load_estimator(const std::filesystem::path& manifest);

}  // namespace itebench
