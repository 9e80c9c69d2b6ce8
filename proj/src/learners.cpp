#include "itebench/learners.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "itebench/errors.hpp"

namespace itebench {

using core::Activation;
using core::Loss;
using nlohmann::json;

std::string_view to_string(Strategy s) {
  switch (s) {
    case Strategy::S: return "S";
    case Strategy::T: return "T";
    case Strategy::TARNET: return "TARNET";
    case Strategy::CFRNET: return "CFRNET";
    case Strategy::DR: return "DR";
    case Strategy::X: return "X";
  }
  return "?";
}

Strategy strategy_from_string(std::string_view s) {
  std::string u(s);
  std::transform(u.begin(), u.end(), u.begin(), [](unsigned char c) { return std::toupper(c); });
  if (u == "S" || u == "S_LEARNER") return Strategy::S;
  if (u == "T" || u == "T_LEARNER") return Strategy::T;
  if (u == "TARNET") return Strategy::TARNET;
  if (u == "CFRNET" || u == "CFR") return Strategy::CFRNET;
  if (u == "DR" || u == "DR_LEARNER") return Strategy::DR;
  if (u == "X" || u == "X_LEARNER") return Strategy::X;
  throw InvalidConfig("unknown learner '" + std::string(s) + "'");
}

// ---------------------------------------------------------------- estimator

namespace {

std::size_t expected_networks(Strategy s) {
  switch (s) {
    case Strategy::S: return 1;
    case Strategy::T: return 2;
    case Strategy::TARNET:
    case Strategy::CFRNET: return 3;
    case Strategy::DR: return 1;
    case Strategy::X: return 3;
  }
  return 0;
}

void require_scalar(const Net& n, const char* what) {
  if (n.output_dim() != 1) throw ShapeError(std::string(what) + " must have one output");
}

RealMatrix with_treatment_column(const RealMatrix& x, double w) {
  RealMatrix out(x.rows(), x.cols() + 1);
  out.leftCols(x.cols()) = x;
  out.col(x.cols()).setConstant(w);
  return out;
}

}  // namespace

CateEstimator::CateEstimator(Strategy strategy, std::vector<Net> networks, double gamma, double clip)
    : strategy_(strategy), networks_(std::move(networks)), gamma_(gamma), clip_(clip) {
  if (networks_.size() != expected_networks(strategy_)) {
    throw InvalidConfig(std::string(to_string(strategy_)) + " estimator needs " +
                        std::to_string(expected_networks(strategy_)) + " networks");
  }
  if (!(gamma_ >= 0.0)) throw InvalidConfig("gamma must be >= 0");
  if (!(clip_ > 0.0 && clip_ < 0.5)) throw InvalidConfig("clip must lie in (0, 0.5)");
  for (const Net& n : networks_) {
    if (n.layers.empty()) throw InvalidConfig("estimator network has no layers");
  }
  switch (strategy_) {
    case Strategy::S:
      require_scalar(networks_[0], "S network");
      input_dim_ = networks_[0].input_dim() - 1;
      break;
    case Strategy::T:
      require_scalar(networks_[0], "mu0");
      require_scalar(networks_[1], "mu1");
      if (networks_[0].input_dim() != networks_[1].input_dim()) {
        throw ShapeError("T heads disagree on input width");
      }
      input_dim_ = networks_[0].input_dim();
      break;
    case Strategy::TARNET:
    case Strategy::CFRNET:
      require_scalar(networks_[1], "head0");
      require_scalar(networks_[2], "head1");
      if (networks_[1].input_dim() != networks_[0].output_dim() ||
          networks_[2].input_dim() != networks_[0].output_dim()) {
        throw ShapeError("outcome heads do not match the representation width");
      }
      input_dim_ = networks_[0].input_dim();
      break;
    case Strategy::DR:
      require_scalar(networks_[0], "DR network");
      input_dim_ = networks_[0].input_dim();
      break;
    case Strategy::X:
      for (const Net& n : networks_) require_scalar(n, "X-learner network");
      if (networks_[1].input_dim() != networks_[0].input_dim() ||
          networks_[2].input_dim() != networks_[0].input_dim()) {
        throw ShapeError("X-learner networks disagree on input width");
      }
      input_dim_ = networks_[0].input_dim();
      break;
  }
  if (input_dim_ < 1) throw ShapeError("estimator input width must be >= 1");
}

void CateEstimator::check(const RealMatrix& x) const {
  if (x.cols() != input_dim_) {
    throw ShapeError("query has " + std::to_string(x.cols()) + " columns, estimator expects " +
                     std::to_string(input_dim_));
  }
}

RealVector CateEstimator::predict(const RealMatrix& x) const {
  check(x);
  switch (strategy_) {
    case Strategy::S: {
      const Net& mu = networks_[0];
      return core::mlp_forward(mu, with_treatment_column(x, 1.0)).col(0) -
             core::mlp_forward(mu, with_treatment_column(x, 0.0)).col(0);
    }
    case Strategy::T:
      return core::mlp_forward(networks_[1], x).col(0) - core::mlp_forward(networks_[0], x).col(0);
    case Strategy::TARNET:
    case Strategy::CFRNET: {
      const RealMatrix phi = core::mlp_forward(networks_[0], x);
      return core::mlp_forward(networks_[2], phi).col(0) -
             core::mlp_forward(networks_[1], phi).col(0);
    }
    case Strategy::DR: return core::mlp_forward(networks_[0], x).col(0);
    case Strategy::X: {
      const RealVector t0 = core::mlp_forward(networks_[0], x).col(0);
      const RealVector t1 = core::mlp_forward(networks_[1], x).col(0);
      const RealVector g = core::mlp_forward(networks_[2], x).col(0);
      return g.cwiseProduct(t1) + (RealVector::Ones(g.size()) - g).cwiseProduct(t0);
    }
  }
  return {};
}

RealMatrix CateEstimator::gradients(const RealMatrix& x) const {
  check(x);
  switch (strategy_) {
    case Strategy::S: {
      const Net& mu = networks_[0];
      const RealMatrix g1 = core::mlp_input_gradients(mu, with_treatment_column(x, 1.0));
      const RealMatrix g0 = core::mlp_input_gradients(mu, with_treatment_column(x, 0.0));
      return (g1 - g0).leftCols(x.cols());
    }
    case Strategy::T:
      return core::mlp_input_gradients(networks_[1], x) - core::mlp_input_gradients(networks_[0], x);
    case Strategy::TARNET:
    case Strategy::CFRNET: {
      const auto trunk = core::mlp_forward_trace(networks_[0], x);
      const RealMatrix& phi = trunk.output();
      const RealMatrix dphi =
          core::mlp_input_gradients(networks_[2], phi) - core::mlp_input_gradients(networks_[1], phi);
      return core::mlp_backward_trace(networks_[0], trunk, dphi, core::GradientAt::output,
                                      {.params = false, .input = true})
          .input;
    }
    case Strategy::DR: return core::mlp_input_gradients(networks_[0], x);
    case Strategy::X: {
      const RealVector t0 = core::mlp_forward(networks_[0], x).col(0);
      const RealVector t1 = core::mlp_forward(networks_[1], x).col(0);
      const RealVector g = core::mlp_forward(networks_[2], x).col(0);
      const RealMatrix dt0 = core::mlp_input_gradients(networks_[0], x);
      const RealMatrix dt1 = core::mlp_input_gradients(networks_[1], x);
      const RealMatrix dg = core::mlp_input_gradients(networks_[2], x);
      // d[g t1 + (1 - g) t0] = g dt1 + (1 - g) dt0 + (t1 - t0) dg
      return g.asDiagonal() * dt1 + (RealVector::Ones(g.size()) - g).asDiagonal() * dt0 +
             (t1 - t0).asDiagonal() * dg;
    }
  }
  return {};
}

RealVector predict_cate(const CateEstimator& est, const RealMatrix& x) { return est.predict(x); }

RealVector cate_input_gradient(const CateEstimator& est, const RealVector& x) {
  return est.gradients(x.transpose()).row(0).transpose();
}

// ---------------------------------------------------------------- fitting helpers

namespace {

struct Arms {
  IndexSet control;
  IndexSet treated;
};

Arms split_arms(const ObservedData& d) {
  if (d.w.size() != d.units() || d.y.size() != d.units()) {
    throw ShapeError("observed data: w/y lengths differ from unit count");
  }
  Arms a;
  for (Index i = 0; i < d.units(); ++i) {
    (d.w(i) > 0.5 ? a.treated : a.control).push_back(i);
  }
  if (a.control.empty()) throw EmptyGroupError("no control units in training data");
  if (a.treated.empty()) throw EmptyGroupError("no treated units in training data");
  return a;
}

const core::Penalty<double> kNoPenalty{};

Net fit_regression(const RealMatrix& x, const RealVector& target, const LearnerConfig& config,
                   Seed seed) {
  Rng rng = seed.engine();
  Net net = make_regression_net(x.cols(), config.hidden_units, rng);
  core::TrainData<double> data{x, target, {}};
  return core::train_early_stop(std::move(net), data, Loss::squared_error, kNoPenalty, config.train,
                                rng)
      .params;
}

Net fit_mu(const ObservedData& train, const IndexSet& rows, const LearnerConfig& config, Seed seed) {
  return fit_regression(train.x(rows, Eigen::all), train.y(rows), config, seed);
}

Net fit_propensity(const ObservedData& train, const LearnerConfig& config, Seed seed) {
  Rng rng = seed.engine();
  const Index h = config.hidden_units;
  Net net = core::mlp_init<double>({train.features(), h, h, Index{1}}, Activation::sigmoid, rng);
  core::TrainData<double> data{train.x, train.w, {}};
  return core::train_early_stop(std::move(net), data, Loss::binary_cross_entropy, kNoPenalty,
                                config.train, rng)
      .params;
}

}  // namespace

Net make_regression_net(Index input_dim, Index hidden, Rng& rng) {
  return core::mlp_init<double>({input_dim, hidden, hidden, Index{1}}, Activation::identity, rng);
}

NuisanceSet fit_nuisances(const ObservedData& train, const LearnerConfig& config, Seed seed) {
  const Arms arms = split_arms(train);
  return {fit_mu(train, arms.control, config, seed.child("mu0")),
          fit_mu(train, arms.treated, config, seed.child("mu1")),
          fit_propensity(train, config, seed.child("pi"))};
}

CateEstimator fit_s_learner(const ObservedData& train, const LearnerConfig& config, Seed seed) {
  split_arms(train);
  RealMatrix xw(train.units(), train.features() + 1);
  xw.leftCols(train.features()) = train.x;
  xw.col(train.features()) = train.w;
  CateEstimator est(Strategy::S, {fit_regression(xw, train.y, config, seed.child("s"))}, 0.0,
                    config.clip);
  est.seed = seed.value();
  return est;
}

CateEstimator fit_t_learner(const ObservedData& train, const LearnerConfig& config, Seed seed) {
  const Arms arms = split_arms(train);
  CateEstimator est(Strategy::T,
                    {fit_mu(train, arms.control, config, seed.child("mu0")),
                     fit_mu(train, arms.treated, config, seed.child("mu1"))},
                    0.0, config.clip);
  est.seed = seed.value();
  return est;
}

CateEstimator t_learner_from(const NuisanceSet& nuisances) {
  return CateEstimator(Strategy::T, {nuisances.mu0, nuisances.mu1});
}

// ---------------------------------------------------------------- TARNet / CFRNet

namespace {

struct TarParams {
  Net trunk;
  Net head0;
  Net head1;
};

}  // namespace

CateEstimator fit_tarnet(const ObservedData& train, double gamma, const LearnerConfig& config,
                         Seed seed) {
  if (!(gamma >= 0.0) || !std::isfinite(gamma)) throw InvalidConfig("gamma must be finite and >= 0");
  config.train.validate();
  split_arms(train);
  Rng rng = seed.child("tarnet").engine();
  const Index h = config.hidden_units;
  TarParams init{core::mlp_init<double>({train.features(), h}, Activation::relu, rng),
                 core::mlp_init<double>({h, h, Index{1}}, Activation::identity, rng),
                 core::mlp_init<double>({h, h, Index{1}}, Activation::identity, rng)};

  const core::HoldoutSplit split = core::holdout_split(train.units(), config.train.validation_fraction, rng);
  const RealMatrix x_tr = train.x(split.train, Eigen::all);
  const RealVector y_tr = train.y(split.train);
  const RealVector w_tr = train.w(split.train);
  const RealMatrix x_val = train.x(split.validation, Eigen::all);
  const RealVector y_val = train.y(split.validation);
  const RealVector w_val = train.w(split.validation);

  const auto lr = config.train.learning_rate;
  core::AdamState<double> adam_trunk = core::adam_init(init.trunk, lr);
  core::AdamState<double> adam_h0 = core::adam_init(init.head0, lr);
  core::AdamState<double> adam_h1 = core::adam_init(init.head1, lr);

  auto step = [&](TarParams& p, std::span<const Index> batch) {
    const IndexSet rows(batch.begin(), batch.end());
    const RealMatrix bx = x_tr(rows, Eigen::all);
    const auto trunk = core::mlp_forward_trace(p.trunk, bx);
    const RealMatrix& phi = trunk.output();
    const auto n = static_cast<double>(rows.size());

    IndexSet arm[2];
    for (std::size_t k = 0; k < rows.size(); ++k) {
      arm[w_tr(rows[k]) > 0.5 ? 1 : 0].push_back(static_cast<Index>(k));
    }
    RealMatrix dphi = RealMatrix::Zero(phi.rows(), phi.cols());
    Net grad_head[2] = {p.head0.zeros_like(), p.head1.zeros_like()};
    const Net* head[2] = {&p.head0, &p.head1};
    RealMatrix phi_arm[2];
    for (int a = 0; a < 2; ++a) {
      if (arm[a].empty()) continue;
      phi_arm[a] = phi(arm[a], Eigen::all);
      const auto ht = core::mlp_forward_trace(*head[a], phi_arm[a]);
      IndexSet src;
      for (Index k : arm[a]) src.push_back(rows[static_cast<std::size_t>(k)]);
      // Mean over the whole batch of the factual squared error.
      const RealMatrix upstream = (2.0 / n) * (ht.output().col(0) - y_tr(src));
      auto g = core::mlp_backward_trace(*head[a], ht, upstream);
      grad_head[a] = std::move(g.params);
      dphi(arm[a], Eigen::all) += g.input;
    }
    if (gamma > 0.0 && !arm[0].empty() && !arm[1].empty()) {
      const auto mg = core::mmd2_linear_gradient(phi_arm[0], phi_arm[1]);
      dphi(arm[0], Eigen::all) += gamma * mg.wrt_rep0;
      dphi(arm[1], Eigen::all) += gamma * mg.wrt_rep1;
    }
    auto gt = core::mlp_backward_trace(p.trunk, trunk, dphi, core::GradientAt::output,
                                       {.params = true, .input = false});
    core::adam_update(adam_trunk, p.trunk, gt.params);
    core::adam_update(adam_h0, p.head0, grad_head[0]);
    core::adam_update(adam_h1, p.head1, grad_head[1]);
  };

  auto validation_loss = [&](const TarParams& p) {
    const RealMatrix phi = core::mlp_forward(p.trunk, x_val);
    const RealVector h0 = core::mlp_forward(p.head0, phi).col(0);
    const RealVector h1 = core::mlp_forward(p.head1, phi).col(0);
    const RealVector pred = w_val.cwiseProduct(h1) + (RealVector::Ones(w_val.size()) - w_val).cwiseProduct(h0);
    return (pred - y_val).squaredNorm() / static_cast<double>(y_val.size());
  };

  auto fitted = core::run_early_stopping<double>(std::move(init), static_cast<Index>(split.train.size()),
                                                 config.train, rng, step, validation_loss);
  CateEstimator est(gamma > 0.0 ? Strategy::CFRNET : Strategy::TARNET,
                    {std::move(fitted.params.trunk), std::move(fitted.params.head0),
                     std::move(fitted.params.head1)},
                    gamma, config.clip);
  est.seed = seed.value();
  return est;
}

// ---------------------------------------------------------------- DR

double dr_pseudo_outcome(double y, double w, double pi_hat, double mu0_hat, double mu1_hat,
                         double clip) {
  const double p = std::clamp(pi_hat, clip, 1.0 - clip);
  const double a1 = w / p;
  const double a0 = (1.0 - w) / (1.0 - p);
  return (a1 - a0) * y + ((1.0 - a1) * mu1_hat - (1.0 - a0) * mu0_hat);
}

RealVector dr_pseudo_outcomes(const RealVector& y, const RealVector& w, const RealVector& pi_hat,
                              const RealVector& mu0_hat, const RealVector& mu1_hat, double clip) {
  const Index n = y.size();
  if (w.size() != n || pi_hat.size() != n || mu0_hat.size() != n || mu1_hat.size() != n) {
    throw ShapeError("dr_pseudo_outcomes: length mismatch");
  }
  RealVector out(n);
  for (Index i = 0; i < n; ++i) {
    out(i) = dr_pseudo_outcome(y(i), w(i), pi_hat(i), mu0_hat(i), mu1_hat(i), clip);
  }
  return out;
}

CateEstimator fit_dr_stage2(const RealMatrix& x, const RealVector& pseudo, const LearnerConfig& config,
                            Seed seed) {
  CateEstimator est(Strategy::DR, {fit_regression(x, pseudo, config, seed.child("dr"))}, 0.0,
                    config.clip);
  est.seed = seed.value();
  return est;
}

CateEstimator fit_dr_learner(const ObservedData& train, const NuisanceSet& nuisances,
                             const LearnerConfig& config, Seed seed) {
  split_arms(train);
  const RealVector pseudo = dr_pseudo_outcomes(
      train.y, train.w, core::mlp_forward(nuisances.pi, train.x).col(0),
      core::mlp_forward(nuisances.mu0, train.x).col(0),
      core::mlp_forward(nuisances.mu1, train.x).col(0), config.clip);
  return fit_dr_stage2(train.x, pseudo, config, seed);
}

CateEstimator fit_dr_learner(const ObservedData& train, const LearnerConfig& config, Seed seed) {
  return fit_dr_learner(train, fit_nuisances(train, config, seed), config, seed);
}

// ---------------------------------------------------------------- X

CateEstimator fit_x_learner(const ObservedData& train, const NuisanceSet& nuisances,
                            const LearnerConfig& config, Seed seed) {
  const Arms arms = split_arms(train);
  const RealMatrix x0 = train.x(arms.control, Eigen::all);
  const RealMatrix x1 = train.x(arms.treated, Eigen::all);
  // Treated: Y - mu0(X). Controls: mu1(X) - Y.
  const RealVector target1 = train.y(arms.treated) - core::mlp_forward(nuisances.mu0, x1).col(0);
  const RealVector target0 = core::mlp_forward(nuisances.mu1, x0).col(0) - train.y(arms.control);
  CateEstimator est(Strategy::X,
                    {fit_regression(x0, target0, config, seed.child("tau0")),
                     fit_regression(x1, target1, config, seed.child("tau1")), nuisances.pi},
                    0.0, config.clip);
  est.seed = seed.value();
  return est;
}

CateEstimator fit_x_learner(const ObservedData& train, const LearnerConfig& config, Seed seed) {
  return fit_x_learner(train, fit_nuisances(train, config, seed), config, seed);
}

CateEstimator fit_learner(Strategy strategy, const ObservedData& train, const LearnerConfig& config,
                          Seed seed, double gamma) {
  switch (strategy) {
    case Strategy::S: return fit_s_learner(train, config, seed);
    case Strategy::T: return fit_t_learner(train, config, seed);
    case Strategy::TARNET: return fit_tarnet(train, 0.0, config, seed);
    case Strategy::CFRNET: return fit_tarnet(train, gamma, config, seed);
    case Strategy::DR: return fit_dr_learner(train, config, seed);
    case Strategy::X: return fit_x_learner(train, config, seed);
  }
  throw InvalidConfig("unknown strategy");
}

// ---------------------------------------------------------------- persistence

namespace {

static_assert(std::endian::native == std::endian::little, "weight files are little-endian");

void write_block(std::ofstream& out, const double* data, Index n) {
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
}

void read_block(std::ifstream& in, double* data, Index n) {
  in.read(reinterpret_cast<char*>(data), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw ParseError("weight file truncated");
}

std::filesystem::path weights_path(const std::filesystem::path& manifest) {
  return manifest.string() + ".weights.bin";
}

}  // namespace

void save_estimator(const CateEstimator& est, const std::filesystem::path& manifest) {
  json j;
  j["strategy"] = std::string(to_string(est.strategy()));
  j["gamma"] = est.gamma();
  j["clip"] = est.clip();
  j["seed"] = est.seed ? json(*est.seed) : json(nullptr);
  j["weights_file"] = weights_path(manifest).filename().string();
  j["networks"] = json::array();
  std::ofstream bin(weights_path(manifest), std::ios::binary);
  if (!bin) throw IoError("cannot write " + weights_path(manifest).string());
  for (const Net& n : est.networks()) {
    j["networks"].push_back(
        {{"output", core::to_string(n.output)}, {"layer_sizes", n.layer_sizes()}});
    for (const auto& layer : n.layers) {
      write_block(bin, layer.weight.data(), layer.weight.size());
      write_block(bin, layer.bias.data(), layer.bias.size());
    }
  }
  std::ofstream out(manifest, std::ios::binary);
  if (!out) throw IoError("cannot write " + manifest.string());
  out << j.dump(2) << '\n';
}

CateEstimator load_estimator(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw IoError("cannot open " + manifest.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ParseError(std::string("estimator manifest: ") + e.what());
  }
  std::ifstream bin(manifest.parent_path() / j.at("weights_file").get<std::string>(), std::ios::binary);
  if (!bin) throw IoError("cannot open weights for " + manifest.string());
  std::vector<Net> nets;
  for (const json& jn : j.at("networks")) {
    const auto sizes = jn.at("layer_sizes").get<std::vector<Index>>();
    if (sizes.size() < 2) throw ParseError("network with fewer than two layer sizes");
    Net n;
    n.output = core::activation_from_string(jn.at("output").get<std::string>());
    for (std::size_t i = 0; i + 1 < sizes.size(); ++i) {
      core::Layer<double> layer{RealMatrix(sizes[i], sizes[i + 1]), Eigen::RowVectorXd(sizes[i + 1])};
      read_block(bin, layer.weight.data(), layer.weight.size());
      read_block(bin, layer.bias.data(), layer.bias.size());
      n.layers.push_back(std::move(layer));
    }
    nets.push_back(std::move(n));
  }
  CateEstimator est(strategy_from_string(j.at("strategy").get<std::string>()), std::move(nets),
                    j.at("gamma").get<double>(), j.at("clip").get<double>());
  if (!j.at("seed").is_null()) est.seed = j.at("seed").get<std::uint64_t>();
  return est;
}

}  // namespace itebench
