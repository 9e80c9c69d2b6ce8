#include <doctest.h>

#include "itebench/core/mlp.hpp"
#include "itebench/core/train.hpp"
#include "itebench/errors.hpp"
#include "support.hpp"

using namespace itebench;
using namespace itebench::core;
using itebench::testing::gaussian_matrix;

TEST_SUITE("core") {

TEST_CASE("backprop matches central differences") {
  Rng rng(11);
  for (Activation out : {Activation::identity, Activation::sigmoid, Activation::relu}) {
    for (int trial = 0; trial < 10; ++trial) {
      auto net = testing::random_mlp(rng, 4, 2, 3, 8, out);
      if (out == Activation::relu) {
        // keep the output units off their kink too
        for (Index j = 0; j < net.layers.back().bias.size(); ++j) net.layers.back().bias(j) += 3.0;
      }
      const RealMatrix x = testing::kink_free_inputs(net, rng, 3);
      const RealMatrix up = gaussian_matrix(rng, 3, 2);
      CHECK(testing::gradient_check(net, x, up) < 1e-4);
    }
  }
}

TEST_CASE("glorot init stays inside its bound") {
  Rng rng(3);
  auto net = mlp_init<double>({20, 30, 1}, Activation::identity, rng);
  const double bound = std::sqrt(6.0 / 50.0);
  CHECK(net.layers[0].weight.cwiseAbs().maxCoeff() <= bound);
  CHECK(net.layers[0].bias.isZero());
  CHECK(net.layer_sizes() == std::vector<Index>{20, 30, 1});
  CHECK(net.parameter_count() == 20 * 30 + 30 + 30 + 1);
}

TEST_CASE("initialization is a function of the generator state") {
  Rng a(5), b(5);
  CHECK(mlp_init<double>({3, 4, 1}, Activation::identity, a) ==
        mlp_init<double>({3, 4, 1}, Activation::identity, b));
}

TEST_CASE("shape errors") {
  Rng rng(1);
  auto net = mlp_init<double>({3, 4, 1}, Activation::identity, rng);
  CHECK_THROWS_AS(mlp_forward(net, RealMatrix::Zero(2, 4)), ShapeError);
  CHECK_THROWS_AS(mlp_init<double>({3}, Activation::identity, rng), InvalidConfig);
}

TEST_CASE("input gradients of a scalar network") {
  Rng rng(8);
  auto net = testing::random_mlp(rng, 5, 1, 2, 6);
  const RealMatrix x = testing::kink_free_inputs(net, rng, 4);
  const RealMatrix g = mlp_input_gradients(net, x);
  REQUIRE(g.rows() == 4);
  REQUIRE(g.cols() == 5);
  const double eps = 1e-6;
  for (Index r = 0; r < 4; ++r) {
    for (Index c = 0; c < 5; ++c) {
      RealMatrix hi = x.row(r), lo = x.row(r);
      hi(0, c) += eps;
      lo(0, c) -= eps;
      const double fd = (mlp_forward(net, hi)(0, 0) - mlp_forward(net, lo)(0, 0)) / (2 * eps);
      CHECK(g(r, c) == doctest::Approx(fd).epsilon(1e-6));
    }
  }
}

TEST_CASE("linear mmd and its gradient") {
  Matrix<double> r0(2, 2), r1(1, 2);
  r0 << 1, 0, 3, 2;
  r1 << 0, 0;
  CHECK(mmd2_linear(r0, r1) == doctest::Approx(5.0));  // mean diff (2, 1)
  const auto g = mmd2_linear_gradient(r0, r1);
  CHECK(g.wrt_rep0(0, 0) == doctest::Approx(2.0));
  CHECK(g.wrt_rep0(1, 1) == doctest::Approx(1.0));
  CHECK(g.wrt_rep1(0, 0) == doctest::Approx(-4.0));

  Rng rng(2);
  Matrix<double> a = gaussian_matrix(rng, 5, 3), b = gaussian_matrix(rng, 4, 3);
  const auto ga = mmd2_linear_gradient(a, b);
  const double eps = 1e-6;
  Matrix<double> ap = a, am = a;
  ap(2, 1) += eps;
  am(2, 1) -= eps;
  CHECK(ga.wrt_rep0(2, 1) == doctest::Approx((mmd2_linear(ap, b) - mmd2_linear(am, b)) / (2 * eps)));
  CHECK(mmd2_linear(a, a) == doctest::Approx(0.0));
  CHECK_THROWS_AS(mmd2_linear(a, Matrix<double>(0, 3)), EmptyGroupError);
}

TEST_CASE("adam first step moves each weight by about the learning rate") {
  Rng rng(4);
  auto net = mlp_init<double>({2, 3, 1}, Activation::identity, rng);
  auto grads = net.zeros_like();
  grads.layers[0].weight.setConstant(0.5);
  grads.layers[1].bias.setConstant(-2.0);
  auto state = adam_init(net, 1e-2);
  const auto before = net;
  adam_update(state, net, grads);
  CHECK(state.step == 1);
  CHECK(net.layers[0].weight(0, 0) == doctest::Approx(before.layers[0].weight(0, 0) - 1e-2).epsilon(1e-6));
  CHECK(net.layers[1].bias(0) == doctest::Approx(before.layers[1].bias(0) + 1e-2).epsilon(1e-6));
  CHECK(net.layers[0].bias == before.layers[0].bias);  // zero gradient stays put

  auto [s2, p2] = adam_step(adam_init(before, 1e-2), before, grads);
  CHECK(p2 == net);
  CHECK(s2.step == 1);

  grads.layers[0].weight(0, 0) = NAN;
  CHECK_THROWS_AS(adam_update(state, net, grads), NumericError);
}

TEST_CASE("cross-entropy gradient at the logits") {
  Rng rng(9);
  auto net = mlp_init<double>({3, 4, 1}, Activation::sigmoid, rng);
  const RealMatrix x = gaussian_matrix(rng, 6, 3);
  Matrix<double> y(6, 1);
  y << 0, 1, 1, 0, 1, 0;
  const auto trace = mlp_forward_trace(net, x);
  const auto l = evaluate_loss(Loss::binary_cross_entropy, trace, y, Vector<double>());
  CHECK(l.at == GradientAt::logits);
  const double eps = 1e-6;
  Matrix<double> p = trace.logits;
  for (Index i = 0; i < 6; ++i) {
    auto bce = [&](double z) { return (std::log1p(std::exp(z)) - y(i, 0) * z) / 6.0; };
    const double fd = (bce(p(i, 0) + eps) - bce(p(i, 0) - eps)) / (2 * eps);
    CHECK(l.gradient(i, 0) == doctest::Approx(fd).epsilon(1e-6));
  }
}

TEST_CASE("early stopping returns the best snapshot") {
  TrainConfig cfg;
  cfg.max_epochs = 50;
  cfg.patience = 3;
  cfg.batch_size = 4;
  Rng rng(0);
  // scalar "parameter" walks 0,1,2,...; validation loss is minimal at 4
  auto res = run_early_stopping<double>(
      0, 8, cfg, rng, [](int& p, std::span<const Index>) { p += 0; },
      [epoch = 0](const int&) mutable {
        ++epoch;
        return std::abs(epoch - 4.0);
      });
  CHECK(res.best_epoch == 4);
  CHECK(res.validation_losses.size() == 7);
}

TEST_CASE("early stopping rejects a never-finite validation loss") {
  TrainConfig cfg;
  cfg.max_epochs = 5;
  cfg.patience = 2;
  Rng rng(0);
  CHECK_THROWS_AS(run_early_stopping<double>(
                      0, 4, cfg, rng, [](int&, std::span<const Index>) {},
                      [](const int&) { return NAN; }),
                  NumericError);
}

TEST_CASE("training fits a linear target") {
  Rng rng(21);
  TrainData<double> data;
  data.x = gaussian_matrix(rng, 600, 3);
  Vector<double> beta(3);
  beta << 1.0, -2.0, 0.5;
  data.target = data.x * beta;
  TrainConfig cfg;
  cfg.learning_rate = 1e-2;
  cfg.batch_size = 64;
  cfg.max_epochs = 200;
  auto net = mlp_init<double>({3, 16, 1}, Activation::identity, rng);
  auto res = train_early_stop(net, data, Loss::squared_error, Penalty<double>{}, cfg, rng);
  CHECK(res.validation_losses[res.best_epoch - 1] < 1e-2);
}

TEST_CASE("training is deterministic given the generator") {
  auto run = [] {
    Rng rng(77);
    TrainData<double> data;
    data.x = gaussian_matrix(rng, 100, 2);
    data.target = data.x.col(0).cwiseAbs();
    TrainConfig cfg;
    cfg.learning_rate = 1e-2;
    cfg.batch_size = 16;
    cfg.max_epochs = 5;
    auto net = mlp_init<double>({2, 8, 1}, Activation::identity, rng);
    return train_early_stop(net, data, Loss::squared_error, Penalty<double>{}, cfg, rng).params;
  };
  CHECK(run() == run());
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  cfg.learning_rate = -1;
  CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
  Rng rng(0);
  CHECK_THROWS_AS(holdout_split(1, 0.3, rng), InvalidConfig);
  auto s = holdout_split(10, 0.3, rng);
  CHECK(s.validation.size() == 3);
  CHECK(s.train.size() == 7);
}

}
