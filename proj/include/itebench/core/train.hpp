#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "itebench/core/mlp.hpp"

namespace itebench::core {

struct TrainConfig {
  double learning_rate = 1e-4;
  std::size_t batch_size = 1024;
  double validation_fraction = 0.30;
  std::size_t max_epochs = 1000;
  std::size_t patience = 10;

  void validate() const {
    if (!(validation_fraction > 0.0 && validation_fraction < 1.0)) {
      throw InvalidConfig("validation fraction must lie in (0, 1)");
    }
    if (batch_size < 1) throw InvalidConfig("batch size must be >= 1");
    if (patience < 1) throw InvalidConfig("patience must be >= 1");
    if (max_epochs < 1) throw InvalidConfig("max epochs must be >= 1");
    if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) {
      throw InvalidConfig("learning rate must be finite and non-negative");
    }
  }
};

// ---------------------------------------------------------------- Adam

template <typename Scalar>
struct AdamState {
  MlpParams<Scalar> first_moment;
  MlpParams<Scalar> second_moment;
  long step = 0;
  Scalar learning_rate = Scalar(1e-4);
  Scalar beta1 = Scalar(0.9);
  Scalar beta2 = Scalar(0.999);
  Scalar epsilon = Scalar(1e-8);
};

template <typename Scalar>
AdamState<Scalar> adam_init(const MlpParams<Scalar>& params, Scalar learning_rate) {
  AdamState<Scalar> s;
  s.first_moment = params.zeros_like();
  s.second_moment = params.zeros_like();
  s.learning_rate = learning_rate;
  return s;
}

/// In-place Adam update with bias correction.
template <typename Scalar>
void adam_update(AdamState<Scalar>& state, MlpParams<Scalar>& params,
                 const MlpParams<Scalar>& grads) {
  if (!params.same_shape(grads) || !params.same_shape(state.first_moment) ||
      !params.same_shape(state.second_moment)) {
    throw ShapeError("adam: gradient/moment shapes do not match parameters");
  }
  if (state.step < 0) throw InvalidConfig("adam: negative step counter");
  if (!grads.all_finite()) throw NumericError("adam: non-finite gradient entry");

  state.step += 1;
  const Scalar b1 = state.beta1;
  const Scalar b2 = state.beta2;
  const Scalar c1 = Scalar(1) - std::pow(b1, static_cast<Scalar>(state.step));
  const Scalar c2 = Scalar(1) - std::pow(b2, static_cast<Scalar>(state.step));
  const Scalar lr = state.learning_rate;
  const Scalar eps = state.epsilon;

  auto update = [&](auto& p, auto& m, auto& v, const auto& g) {
    m = b1 * m + (Scalar(1) - b1) * g;
    v = b2 * v + (Scalar(1) - b2) * g.cwiseAbs2();
    p.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    update(params.layers[i].weight, state.first_moment.layers[i].weight,
           state.second_moment.layers[i].weight, grads.layers[i].weight);
    update(params.layers[i].bias, state.first_moment.layers[i].bias,
           state.second_moment.layers[i].bias, grads.layers[i].bias);
  }
}

template <typename Scalar>
std::pair<AdamState<Scalar>, MlpParams<Scalar>> adam_step(AdamState<Scalar> state,
                                                          MlpParams<Scalar> params,
                                                          const MlpParams<Scalar>& grads) {
  adam_update(state, params, grads);
  return {std::move(state), std::move(params)};
}

// ---------------------------------------------------------------- losses

enum class Loss { squared_error, binary_cross_entropy };

template <typename Scalar>
struct LossValue {
  Scalar value = 0;
  Matrix<Scalar> gradient;  // at the output (squared error) or the logits (cross-entropy)
  GradientAt at = GradientAt::output;
};

namespace detail {

template <typename Scalar>
Scalar softplus(Scalar z) {
  return z > Scalar(0) ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
}

}  // namespace detail

/// Mean per-sample loss over the rows of a batch. weights may be empty.
template <typename Scalar>
LossValue<Scalar> evaluate_loss(Loss loss, const ForwardTrace<Scalar>& trace,
                                const Matrix<Scalar>& target, const Vector<Scalar>& weights) {
  const Matrix<Scalar>& out = trace.output();
  const Index n = out.rows();
  if (target.rows() != n || target.cols() != out.cols()) {
    throw ShapeError("loss: target shape does not match network output");
  }
  const bool weighted = weights.size() > 0;
  LossValue<Scalar> r;
  const Scalar inv_n = Scalar(1) / static_cast<Scalar>(std::max<Index>(n, 1));
  if (loss == Loss::squared_error) {
    Matrix<Scalar> resid = out - target;
    if (weighted) {
      r.value = (resid.cwiseAbs2().rowwise().sum().cwiseProduct(weights)).sum() * inv_n;
      r.gradient = (Scalar(2) * inv_n) * (weights.asDiagonal() * resid);
    } else {
      r.value = resid.squaredNorm() * inv_n;
      r.gradient = (Scalar(2) * inv_n) * resid;
    }
    r.at = GradientAt::output;
  } else {
    const Matrix<Scalar>& z = trace.logits;
    Scalar total = 0;
    for (Index i = 0; i < n; ++i) {
      Scalar row = 0;
      for (Index k = 0; k < z.cols(); ++k) {
        row += detail::softplus(z(i, k)) - target(i, k) * z(i, k);
      }
      total += weighted ? weights(i) * row : row;
    }
    r.value = total * inv_n;
    Matrix<Scalar> resid = out - target;
    r.gradient = weighted ? Matrix<Scalar>(inv_n * (weights.asDiagonal() * resid))
                          : Matrix<Scalar>(inv_n * resid);
    r.at = GradientAt::logits;
  }
  return r;
}

// ---------------------------------------------------------------- early stopping

template <typename Params, typename Scalar>
struct EarlyStopResult {
  Params params;
  std::vector<Scalar> validation_losses;  // one per completed epoch
  std::size_t best_epoch = 0;             // 1-based
};

/// Shuffled minibatch loop with best-snapshot early stopping.
/// step(params, batch_rows) performs one optimizer update; validation_loss(params)
/// scores a snapshot. Returns the snapshot with the lowest validation loss.
template <typename Scalar, typename Params, typename Step, typename ValidationLoss>
EarlyStopResult<Params, Scalar> run_early_stopping(Params params, Index n_train,
                                                   const TrainConfig& config, Rng& rng, Step&& step,
                                                   ValidationLoss&& validation_loss) {
  config.validate();
  if (n_train < 1) throw InvalidConfig("early stopping: empty training split");
  std::vector<Index> order(static_cast<std::size_t>(n_train));
  std::iota(order.begin(), order.end(), Index{0});

  EarlyStopResult<Params, Scalar> result;
  Scalar best = std::numeric_limits<Scalar>::infinity();
  std::optional<Params> best_params;
  std::size_t since_improvement = 0;
  const std::size_t batch = config.batch_size;

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t len = std::min(batch, order.size() - start);
      step(params, std::span<const Index>(order.data() + start, len));
    }
    const Scalar vl = validation_loss(static_cast<const Params&>(params));
    result.validation_losses.push_back(vl);
    if (std::isfinite(static_cast<double>(vl)) && vl < best) {
      best = vl;
      best_params = params;
      result.best_epoch = epoch;
      since_improvement = 0;
    } else if (++since_improvement >= config.patience) {
      break;
    }
  }
  if (!best_params) throw NumericError("early stopping: validation loss never finite");
  result.params = std::move(*best_params);
  return result;
}

/// Random train/validation partition of n rows.
struct HoldoutSplit {
  std::vector<Index> train;
  std::vector<Index> validation;
};

inline HoldoutSplit holdout_split(Index n, double validation_fraction, Rng& rng) {
  std::vector<Index> idx(static_cast<std::size_t>(std::max<Index>(n, 0)));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  const auto n_val = static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(n)));
  if (n_val < 1 || n_val >= idx.size()) {
    throw InvalidConfig("degenerate train/validation split for " + std::to_string(n) + " samples");
  }
  HoldoutSplit s;
  s.validation.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_val));
  s.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_val), idx.end());
  return s;
}

template <typename Scalar>
struct TrainData {
  Matrix<Scalar> x;
  Matrix<Scalar> target;
  Vector<Scalar> weight;  // optional per-sample weight; empty means 1
};

template <typename Scalar>
struct PenaltyTerm {
  Scalar value = 0;
  MlpParams<Scalar> gradient;  // empty layers means no contribution
};

/// Extra training-objective term evaluated per minibatch. rows index into the
/// training data passed to train_early_stop.
template <typename Scalar>
using Penalty = std::function<PenaltyTerm<Scalar>(const MlpParams<Scalar>&, const Matrix<Scalar>&,
                                                  std::span<const Index>)>;

template <typename Scalar>
EarlyStopResult<MlpParams<Scalar>, Scalar> train_early_stop(MlpParams<Scalar> net,
                                                            const TrainData<Scalar>& data, Loss loss,
                                                            const Penalty<Scalar>& penalty,
                                                            const TrainConfig& config, Rng& rng) {
  config.validate();
  const Index n = data.x.rows();
  if (data.target.rows() != n) throw ShapeError("train: x and target row counts differ");
  if (data.weight.size() != 0 && data.weight.size() != n) {
    throw ShapeError("train: weight length does not match sample count");
  }
  if (!data.target.allFinite()) throw NumericError("train: non-finite target");
  if (loss == Loss::binary_cross_entropy && net.output != Activation::sigmoid) {
    throw InvalidConfig("binary cross-entropy requires a sigmoid output");
  }
  detail::check_input(net, data.x.cols());

  const HoldoutSplit split = holdout_split(n, config.validation_fraction, rng);
  const bool weighted = data.weight.size() > 0;
  const Matrix<Scalar> x_train = data.x(split.train, Eigen::all);
  const Matrix<Scalar> y_train = data.target(split.train, Eigen::all);
  const Vector<Scalar> w_train = weighted ? Vector<Scalar>(data.weight(split.train)) : Vector<Scalar>();
  const Matrix<Scalar> x_val = data.x(split.validation, Eigen::all);
  const Matrix<Scalar> y_val = data.target(split.validation, Eigen::all);
  const Vector<Scalar> w_val =
      weighted ? Vector<Scalar>(data.weight(split.validation)) : Vector<Scalar>();

  AdamState<Scalar> adam = adam_init(net, static_cast<Scalar>(config.learning_rate));
  std::vector<Index> original_rows;

  auto step = [&](MlpParams<Scalar>& params, std::span<const Index> batch) {
    const std::vector<Index> rows(batch.begin(), batch.end());
    const Matrix<Scalar> bx = x_train(rows, Eigen::all);
    const Matrix<Scalar> by = y_train(rows, Eigen::all);
    const Vector<Scalar> bw = weighted ? Vector<Scalar>(w_train(rows)) : Vector<Scalar>();
    const auto trace = mlp_forward_trace(params, bx);
    const auto lv = evaluate_loss(loss, trace, by, bw);
    auto g = mlp_backward_trace(params, trace, lv.gradient, lv.at, {.params = true, .input = false});
    if (penalty) {
      original_rows.clear();
      for (Index r : rows) original_rows.push_back(split.train[static_cast<std::size_t>(r)]);
      const PenaltyTerm<Scalar> extra = penalty(params, bx, original_rows);
      if (!extra.gradient.layers.empty()) {
        if (!extra.gradient.same_shape(params)) throw ShapeError("penalty gradient shape mismatch");
        g.params += extra.gradient;
      }
    }
    adam_update(adam, params, g.params);
  };
  auto validation_loss = [&](const MlpParams<Scalar>& params) {
    const auto trace = mlp_forward_trace(params, x_val);
    return evaluate_loss(loss, trace, y_val, w_val).value;
  };
  return run_early_stopping<Scalar>(std::move(net), static_cast<Index>(split.train.size()), config,
                                    rng, step, validation_loss);
}

}  // namespace itebench::core
