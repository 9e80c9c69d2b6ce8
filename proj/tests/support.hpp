#pragma once

// Helpers shared by the unit tests and the acceptance runner.

#include <cmath>
#include <vector>

#include "itebench/attribution.hpp"
#include "itebench/core/mlp.hpp"
#include "itebench/seed.hpp"

namespace itebench::testing {

using core::Activation;
using core::Matrix;
using core::MlpParams;

/// Random MLP with 1..max_hidden_layers hidden layers of 1..max_units units.
inline MlpParams<double> random_mlp(Rng& rng, Index in, Index out, int max_hidden_layers = 2,
                                    Index max_units = 10,
                                    Activation output = Activation::identity) {
  std::uniform_int_distribution<int> layers(1, max_hidden_layers);
  std::uniform_int_distribution<Index> units(1, max_units);
  std::vector<Index> sizes{in};
  const int h = layers(rng);
  for (int i = 0; i < h; ++i) sizes.push_back(units(rng));
  sizes.push_back(out);
  auto net = core::mlp_init<double>(std::span<const Index>(sizes), output, rng);
  // Nonzero biases so rectifier kinks are not hit at x = 0.
  std::normal_distribution<double> n01(0.0, 0.3);
  for (auto& l : net.layers) {
    for (Index j = 0; j < l.bias.size(); ++j) l.bias(j) = n01(rng);
  }
  return net;
}

inline RealMatrix gaussian_matrix(Rng& rng, Index rows, Index cols, double sd = 1.0) {
  std::normal_distribution<double> n01(0.0, sd);
  RealMatrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = n01(rng);
  return m;
}

inline double relative_error(double a, double b, double floor = 1e-6) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Scalar function backed by a one-output network.
inline ScalarFunction mlp_function(const MlpParams<double>& net) {
  ScalarFunction f;
  f.dim = net.input_dim();
  f.value = [net](const RealMatrix& x) -> RealVector { return core::mlp_forward(net, x).col(0); };
  f.gradient = [net](const RealMatrix& x) -> RealMatrix { return core::mlp_input_gradients(net, x); };
  return f;
}

inline ScalarFunction linear_function(const RealVector& beta, double intercept = 0.0) {
  ScalarFunction f;
  f.dim = beta.size();
  f.value = [beta, intercept](const RealMatrix& x) -> RealVector {
    return (x * beta).array() + intercept;
  };
  f.gradient = [beta](const RealMatrix& x) -> RealMatrix {
    return beta.transpose().replicate(x.rows(), 1);
  };
  return f;
}

/// Sum of two functions, with summed gradients.
inline ScalarFunction add_functions(const ScalarFunction& a, const ScalarFunction& b, double ka = 1.0,
                                    double kb = 1.0) {
  ScalarFunction f;
  f.dim = a.dim;
  f.value = [=](const RealMatrix& x) -> RealVector { return ka * a.value(x) + kb * b.value(x); };
  f.gradient = [=](const RealMatrix& x) -> RealMatrix {
    return ka * a.gradient(x) + kb * b.gradient(x);
  };
  return f;
}

/// Wraps f so that it ignores the coordinates in `unused` (they are zeroed
/// before evaluation).
inline ScalarFunction ignoring(const ScalarFunction& f, const IndexSet& unused) {
  ScalarFunction g;
  g.dim = f.dim;
  g.value = [=](const RealMatrix& x) -> RealVector {
    RealMatrix z = x;
    for (Index j : unused) z.col(j).setZero();
    return f.value(z);
  };
  g.gradient = [=](const RealMatrix& x) -> RealMatrix {
    RealMatrix z = x;
    for (Index j : unused) z.col(j).setZero();
    RealMatrix gr = f.gradient(z);
    for (Index j : unused) gr.col(j).setZero();
    return gr;
  };
  return g;
}

/// Smallest |pre-activation| over the hidden layers; central differences
/// are only meaningful away from rectifier kinks.
inline double min_hidden_preactivation(const MlpParams<double>& net, const RealMatrix& x) {
  double m = INFINITY;
  RealMatrix a = x;
  for (std::size_t i = 0; i + 1 < net.layers.size(); ++i) {
    RealMatrix z = (a * net.layers[i].weight).rowwise() + net.layers[i].bias;
    m = std::min(m, z.cwiseAbs().minCoeff());
    a = z.cwiseMax(0.0);
  }
  return m;
}

/// Worst relative error between backprop and central differences for the
/// objective sum(output .* upstream), over every parameter and input entry.
inline double gradient_check(const MlpParams<double>& net, const RealMatrix& x, const RealMatrix& upstream,
                             double eps = 1e-6, double floor = 1e-3) {
  auto objective = [&](const MlpParams<double>& p, const RealMatrix& in) {
    return core::mlp_forward(p, in).cwiseProduct(upstream).sum();
  };
  const auto trace = core::mlp_forward_trace(net, x);
  const auto g = core::mlp_backward_trace(net, trace, upstream);
  double worst = 0.0;
  auto params = net;
  for (std::size_t li = 0; li < net.layers.size(); ++li) {
    auto probe = [&](double& slot, double analytic) {
      const double keep = slot;
      slot = keep + eps;
      const double up = objective(params, x);
      slot = keep - eps;
      const double down = objective(params, x);
      slot = keep;
      worst = std::max(worst, relative_error(analytic, (up - down) / (2 * eps), floor));
    };
    auto& w = params.layers[li].weight;
    for (Index c = 0; c < w.cols(); ++c)
      for (Index r = 0; r < w.rows(); ++r) probe(w(r, c), g.params.layers[li].weight(r, c));
    auto& b = params.layers[li].bias;
    for (Index j = 0; j < b.size(); ++j) probe(b(j), g.params.layers[li].bias(j));
  }
  RealMatrix xin = x;
  for (Index c = 0; c < x.cols(); ++c) {
    for (Index r = 0; r < x.rows(); ++r) {
      const double keep = xin(r, c);
      xin(r, c) = keep + eps;
      const double up = objective(net, xin);
      xin(r, c) = keep - eps;
      const double down = objective(net, xin);
      xin(r, c) = keep;
      worst = std::max(worst, relative_error(g.input(r, c), (up - down) / (2 * eps), floor));
    }
  }
  return worst;
}

/// Inputs for a gradient check, redrawn until no hidden unit sits within
/// `margin` of its kink.
inline RealMatrix kink_free_inputs(const MlpParams<double>& net, Rng& rng, Index rows,
                                   double margin = 1e-3) {
  for (;;) {
    RealMatrix x = gaussian_matrix(rng, rows, net.input_dim());
    if (min_hidden_preactivation(net, x) > margin) return x;
  }
}

}  // namespace itebench::testing
