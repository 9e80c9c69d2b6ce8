#pragma once

// Dense rectifier networks: initialization, forward/backward passes and the
// linear-kernel MMD penalty. Everything is templated on the scalar type; the
// rest of the library instantiates it with double.

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "itebench/errors.hpp"
#include "itebench/seed.hpp"

namespace itebench::core {

using Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic>;

/// Output nonlinearity. Hidden layers are always rectifiers.
enum class Activation { identity, sigmoid, relu };

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::sigmoid: return "sigmoid";
    case Activation::relu: return "relu";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "relu") return Activation::relu;
  throw ParseError("unknown activation '" + s + "'");
}

template <typename Scalar>
struct Layer {
  Matrix<Scalar> weight;  // fan_in x fan_out
  RowVector<Scalar> bias;
};

template <typename Scalar>
struct MlpParams {
  std::vector<Layer<Scalar>> layers;
  Activation output = Activation::identity;

  Index input_dim() const { return layers.empty() ? 0 : layers.front().weight.rows(); }
  Index output_dim() const { return layers.empty() ? 0 : layers.back().weight.cols(); }

  std::vector<Index> layer_sizes() const {
    std::vector<Index> sizes;
    if (layers.empty()) return sizes;
    sizes.push_back(input_dim());
    for (const auto& l : layers) sizes.push_back(l.weight.cols());
    return sizes;
  }

  /// Same shapes, all entries zero. Used as a gradient accumulator.
  MlpParams zeros_like() const {
    MlpParams z;
    z.output = output;
    z.layers.reserve(layers.size());
    for (const auto& l : layers) {
      z.layers.push_back({Matrix<Scalar>::Zero(l.weight.rows(), l.weight.cols()),
                          RowVector<Scalar>::Zero(l.bias.size())});
    }
    return z;
  }

  bool all_finite() const {
    for (const auto& l : layers) {
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    }
    return true;
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  bool same_shape(const MlpParams& other) const {
    if (layers.size() != other.layers.size()) return false;
    for (std::size_t i = 0; i < layers.size(); ++i) {
      if (layers[i].weight.rows() != other.layers[i].weight.rows() ||
          layers[i].weight.cols() != other.layers[i].weight.cols() ||
          layers[i].bias.size() != other.layers[i].bias.size()) {
        return false;
      }
    }
    return true;
  }

  MlpParams& operator+=(const MlpParams& other) {
    for (std::size_t i = 0; i < layers.size(); ++i) {
      layers[i].weight += other.layers[i].weight;
      layers[i].bias += other.layers[i].bias;
    }
    return *this;
  }

  friend bool operator==(const MlpParams& a, const MlpParams& b) {
    if (a.output != b.output || !a.same_shape(b)) return false;
    for (std::size_t i = 0; i < a.layers.size(); ++i) {
      if (a.layers[i].weight != b.layers[i].weight || a.layers[i].bias != b.layers[i].bias) {
        return false;
      }
    }
    return true;
  }
};

/// Glorot-uniform weights, zero biases.
template <typename Scalar>
MlpParams<Scalar> mlp_init(std::span<const Index> layer_sizes, Activation output, Rng& rng) {
  if (layer_sizes.size() < 2) throw InvalidConfig("mlp_init: need at least input and output sizes");
  for (Index s : layer_sizes) {
    if (s <= 0) throw InvalidConfig("mlp_init: layer sizes must be positive");
  }
  MlpParams<Scalar> p;
  p.output = output;
  for (std::size_t i = 0; i + 1 < layer_sizes.size(); ++i) {
    const Index fan_in = layer_sizes[i];
    const Index fan_out = layer_sizes[i + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    Layer<Scalar> layer{Matrix<Scalar>(fan_in, fan_out), RowVector<Scalar>::Zero(fan_out)};
    // Column-major fill order is part of the determinism contract.
    for (Index c = 0; c < fan_out; ++c) {
      for (Index r = 0; r < fan_in; ++r) layer.weight(r, c) = static_cast<Scalar>(u(rng));
    }
    p.layers.push_back(std::move(layer));
  }
  return p;
}

template <typename Scalar>
MlpParams<Scalar> mlp_init(std::initializer_list<Index> layer_sizes, Activation output, Rng& rng) {
  return mlp_init<Scalar>(std::span<const Index>(layer_sizes.begin(), layer_sizes.size()), output,
                          rng);
}

namespace detail {

template <typename Derived>
auto sigmoid(const Eigen::MatrixBase<Derived>& z) {
  using S = typename Derived::Scalar;
  return z.unaryExpr([](S v) {
    // Split by sign so exp never overflows.
    if (v >= S(0)) return S(1) / (S(1) + std::exp(-v));
    const S e = std::exp(v);
    return e / (S(1) + e);
  });
}

template <typename Scalar>
void apply_output(Matrix<Scalar>& z, Activation a) {
  switch (a) {
    case Activation::identity: break;
    case Activation::sigmoid: z = sigmoid(z).eval(); break;
    case Activation::relu: z = z.cwiseMax(Scalar(0)); break;
  }
}

template <typename Scalar>
void check_input(const MlpParams<Scalar>& params, Index cols) {
  if (params.layers.empty()) throw ShapeError("network has no layers");
  if (cols != params.input_dim()) {
    throw ShapeError("input has " + std::to_string(cols) + " columns, network expects " +
                     std::to_string(params.input_dim()));
  }
}

}  // namespace detail

/// Activations of every layer from one forward pass. activations[0] is the
/// input, activations.back() the network output; logits holds the final
/// pre-activation.
template <typename Scalar>
struct ForwardTrace {
  std::vector<Matrix<Scalar>> activations;
  Matrix<Scalar> logits;

  const Matrix<Scalar>& output() const { return activations.back(); }
};

template <typename Scalar, typename Derived>
ForwardTrace<Scalar> mlp_forward_trace(const MlpParams<Scalar>& params,
                                       const Eigen::MatrixBase<Derived>& x) {
  detail::check_input(params, x.cols());
  ForwardTrace<Scalar> t;
  t.activations.reserve(params.layers.size() + 1);
  t.activations.emplace_back(x);
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& layer = params.layers[i];
    Matrix<Scalar> z = t.activations.back() * layer.weight;
    z.rowwise() += layer.bias;
    if (i + 1 < params.layers.size()) {
      t.activations.push_back(z.cwiseMax(Scalar(0)));
    } else {
      t.logits = z;
      detail::apply_output(z, params.output);
      t.activations.push_back(std::move(z));
    }
  }
  return t;
}

template <typename Scalar, typename Derived>
Matrix<Scalar> mlp_forward(const MlpParams<Scalar>& params, const Eigen::MatrixBase<Derived>& x) {
  detail::check_input(params, x.cols());
  Matrix<Scalar> a = x;
  for (std::size_t i = 0; i < params.layers.size(); ++i) {
    const auto& layer = params.layers[i];
    Matrix<Scalar> z = a * layer.weight;
    z.rowwise() += layer.bias;
    if (i + 1 < params.layers.size()) {
      a = z.cwiseMax(Scalar(0));
    } else {
      detail::apply_output(z, params.output);
      a = std::move(z);
    }
  }
  return a;
}

/// Where an upstream gradient is taken: at the network output (after the
/// output activation) or at the final pre-activation.
enum class GradientAt { output, logits };

template <typename Scalar>
struct Gradients {
  MlpParams<Scalar> params;  // empty layers when not requested
  Matrix<Scalar> input;      // empty when not requested
};

struct BackwardOptions {
  bool params = true;
  bool input = true;
};

template <typename Scalar>
Gradients<Scalar> mlp_backward_trace(const MlpParams<Scalar>& params,
                                     const ForwardTrace<Scalar>& trace,
                                     const Matrix<Scalar>& upstream,
                                     GradientAt at = GradientAt::output,
                                     BackwardOptions opts = {}) {
  const Index n = trace.activations.front().rows();
  if (upstream.rows() != n || upstream.cols() != params.output_dim()) {
    throw ShapeError("upstream gradient shape does not match network output");
  }
  Matrix<Scalar> delta = upstream;
  if (at == GradientAt::output) {
    const Matrix<Scalar>& out = trace.output();
    switch (params.output) {
      case Activation::identity: break;
      case Activation::sigmoid:
        delta = delta.cwiseProduct(out.cwiseProduct((Scalar(1) - out.array()).matrix()));
        break;
      case Activation::relu:
        delta = (out.array() > Scalar(0)).select(delta, Scalar(0));
        break;
    }
  }

  Gradients<Scalar> g;
  if (opts.params) g.params = params.zeros_like();
  for (std::size_t li = params.layers.size(); li-- > 0;) {
    const Matrix<Scalar>& a_in = trace.activations[li];
    if (opts.params) {
      g.params.layers[li].weight.noalias() = a_in.transpose() * delta;
      g.params.layers[li].bias = delta.colwise().sum();
    }
    if (li == 0 && !opts.input) break;
    Matrix<Scalar> back = delta * params.layers[li].weight.transpose();
    if (li > 0) {
      // Rectifier subgradient at 0 is 0: a_in > 0 iff its pre-activation > 0.
      delta = (a_in.array() > Scalar(0)).select(back, Scalar(0));
    } else {
      g.input = std::move(back);
    }
  }
  return g;
}

/// Exact reverse-mode gradients of a scalar loss, given dLoss/dOutput.
template <typename Scalar>
Gradients<Scalar> mlp_backward(const MlpParams<Scalar>& params, const Matrix<Scalar>& batch_x,
                               const Matrix<Scalar>& loss_grad_at_output) {
  const auto trace = mlp_forward_trace(params, batch_x);
  return mlp_backward_trace(params, trace, loss_grad_at_output, GradientAt::output);
}

/// Per-row input gradients of a single-output network, one row per input row.
template <typename Scalar>
Matrix<Scalar> mlp_input_gradients(const MlpParams<Scalar>& params, const Matrix<Scalar>& x) {
  if (params.output_dim() != 1) throw ShapeError("input gradients need a scalar-output network");
  const auto trace = mlp_forward_trace(params, x);
  return mlp_backward_trace(params, trace, Matrix<Scalar>(Matrix<Scalar>::Ones(x.rows(), 1)),
                            GradientAt::output,
                            {.params = false, .input = true})
      .input;
}

/// Linear-kernel MMD^2: squared distance between the two group means.
template <typename Scalar>
Scalar mmd2_linear(const Matrix<Scalar>& rep0, const Matrix<Scalar>& rep1) {
  if (rep0.rows() == 0 || rep1.rows() == 0) throw EmptyGroupError("mmd2_linear: empty group");
  if (rep0.cols() != rep1.cols()) throw ShapeError("mmd2_linear: column mismatch");
  const RowVector<Scalar> diff = rep0.colwise().mean() - rep1.colwise().mean();
  return diff.squaredNorm();
}

template <typename Scalar>
struct Mmd2Gradient {
  Matrix<Scalar> wrt_rep0;
  Matrix<Scalar> wrt_rep1;
};

template <typename Scalar>
Mmd2Gradient<Scalar> mmd2_linear_gradient(const Matrix<Scalar>& rep0, const Matrix<Scalar>& rep1) {
  if (rep0.rows() == 0 || rep1.rows() == 0) throw EmptyGroupError("mmd2_linear: empty group");
  if (rep0.cols() != rep1.cols()) throw ShapeError("mmd2_linear: column mismatch");
  const RowVector<Scalar> diff = rep0.colwise().mean() - rep1.colwise().mean();
  Mmd2Gradient<Scalar> g;
  g.wrt_rep0 = (Scalar(2) / Scalar(rep0.rows()) * diff).replicate(rep0.rows(), 1);
  g.wrt_rep1 = (Scalar(-2) / Scalar(rep1.rows()) * diff).replicate(rep1.rows(), 1);
  return g;
}

}  // namespace itebench::core
