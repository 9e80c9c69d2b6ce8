#include <doctest.h>

#include <filesystem>

#include "itebench/errors.hpp"
#include "itebench/learners.hpp"
#include "itebench/metrics.hpp"
#include "support.hpp"

using namespace itebench;
using itebench::testing::gaussian_matrix;

namespace {

Net linear_net(const RealVector& w, double b = 0.0, core::Activation out = core::Activation::identity) {
  Net n;
  n.output = out;
  n.layers.push_back({w, core::RowVector<double>::Constant(1, b)});
  return n;
}

LearnerConfig quick_config() {
  LearnerConfig c;
  c.train.learning_rate = 1e-3;
  c.train.batch_size = 128;
  c.train.max_epochs = 150;
  c.train.patience = 10;
  c.hidden_units = 32;
  return c;
}

struct Sim {
  ObservedData train, test;
  RealVector tau_test;
};

/// y_w = x0 + w * effect(x), randomized treatment, no noise.
template <typename Effect>
Sim simulate(Index n, Index d, std::uint64_t seed, Effect effect) {
  Rng rng(seed);
  Sim s;
  auto fill = [&](ObservedData& o, RealVector* tau, Index m) {
    o.x = gaussian_matrix(rng, m, d);
    o.w.resize(m);
    o.y.resize(m);
    if (tau) tau->resize(m);
    std::bernoulli_distribution coin(0.5);
    for (Index i = 0; i < m; ++i) {
      o.w(i) = coin(rng) ? 1.0 : 0.0;
      const double t = effect(o.x.row(i));
      o.y(i) = o.x(i, 0) + o.w(i) * t;
      if (tau) (*tau)(i) = t;
    }
  };
  fill(s.train, nullptr, n);
  fill(s.test, &s.tau_test, 1000);
  return s;
}

}  // namespace

TEST_SUITE("learners") {

TEST_CASE("strategy names") {
  for (Strategy s : {Strategy::S, Strategy::T, Strategy::TARNET, Strategy::CFRNET, Strategy::DR, Strategy::X}) {
    CHECK(strategy_from_string(to_string(s)) == s);
  }
  CHECK(strategy_from_string("tarnet") == Strategy::TARNET);
  CHECK_THROWS_AS(strategy_from_string("Q"), InvalidConfig);
}

TEST_CASE("frozen T estimator is the difference of its heads") {
  RealVector w1(3), w0(3);
  w1 << 2, 0, 0;
  w0 << 1, 0, 0;
  const CateEstimator est(Strategy::T, {linear_net(w0), linear_net(w1)});
  Rng rng(1);
  const RealMatrix x = gaussian_matrix(rng, 5, 3);
  CHECK((est.predict(x) - x.col(0)).cwiseAbs().maxCoeff() < 1e-12);
  const RealMatrix g = est.gradients(x);
  CHECK(g(2, 0) == doctest::Approx(1.0));
  CHECK(g(2, 1) == 0.0);
  CHECK_THROWS_AS(est.predict(RealMatrix::Zero(2, 4)), ShapeError);
}

TEST_CASE("S estimator with a treatment-blind network predicts zero") {
  RealVector w(4);
  w << 1, -2, 3, 0;  // last input is the treatment indicator
  const CateEstimator est(Strategy::S, {linear_net(w, 0.5)});
  Rng rng(2);
  const RealMatrix x = gaussian_matrix(rng, 6, 3);
  CHECK(est.predict(x).isZero());
  CHECK(est.gradients(x).isZero());
  CHECK(est.input_dim() == 3);
}

TEST_CASE("frozen X estimator combines its arms convexly") {
  RealVector z = RealVector::Zero(2);
  SUBCASE("equal arms give that constant") {
    const CateEstimator est(Strategy::X, {linear_net(z, 1.5), linear_net(z, 1.5),
                                          linear_net(RealVector::Ones(2), 0.0, core::Activation::sigmoid)});
    Rng rng(3);
    CHECK((est.predict(gaussian_matrix(rng, 4, 2)).array() - 1.5).abs().maxCoeff() < 1e-12);
  }
  SUBCASE("g = 0.5, tau1 = 2, tau0 = 0") {
    const CateEstimator est(Strategy::X, {linear_net(z, 0.0), linear_net(z, 2.0),
                                          linear_net(z, 0.0, core::Activation::sigmoid)});
    CHECK(est.predict(RealMatrix::Ones(3, 2))(1) == doctest::Approx(1.0));
  }
}

TEST_CASE("estimator gradients match finite differences") {
  Rng rng(4);
  const Index d = 3;
  auto rand_net = [&](Index in, core::Activation out = core::Activation::identity) {
    return testing::random_mlp(rng, in, 1, 2, 6, out);
  };
  std::vector<CateEstimator> ests;
  ests.emplace_back(Strategy::S, std::vector<Net>{rand_net(d + 1)});
  ests.emplace_back(Strategy::T, std::vector<Net>{rand_net(d), rand_net(d)});
  ests.emplace_back(Strategy::DR, std::vector<Net>{rand_net(d)});
  ests.emplace_back(Strategy::X,
                    std::vector<Net>{rand_net(d), rand_net(d), rand_net(d, core::Activation::sigmoid)});
  {
    auto trunk = testing::random_mlp(rng, d, 5, 1, 6, core::Activation::relu);
    for (Index j = 0; j < 5; ++j) trunk.layers.back().bias(j) += 3.0;
    ests.emplace_back(Strategy::TARNET, std::vector<Net>{trunk, rand_net(5), rand_net(5)});
  }
  for (const auto& est : ests) {
    CAPTURE(to_string(est.strategy()));
    const RealMatrix x = gaussian_matrix(rng, 3, d, 0.5);
    const RealMatrix g = est.gradients(x);
    const double eps = 1e-6;
    for (Index r = 0; r < 3; ++r) {
      for (Index c = 0; c < d; ++c) {
        RealMatrix hi = x.row(r), lo = x.row(r);
        hi(0, c) += eps;
        lo(0, c) -= eps;
        const double fd = (est.predict(hi)(0) - est.predict(lo)(0)) / (2 * eps);
        CHECK(testing::relative_error(g(r, c), fd, 1e-3) < 1e-4);
      }
    }
    const RealVector one = cate_input_gradient(est, x.row(1).transpose());
    CHECK((one.transpose() - g.row(1)).cwiseAbs().maxCoeff() < 1e-12);
    // row order does not matter
    RealMatrix flipped = x.colwise().reverse();
    CHECK(est.predict(flipped)(0) == est.predict(x)(2));
  }
}

TEST_CASE("dr pseudo-outcome") {
  CHECK(dr_pseudo_outcome(3, 1, 0.5, 1, 2, 0.01) == doctest::Approx(3.0));
  CHECK(dr_pseudo_outcome(1, 0, 0.5, 1, 2, 0.01) == doctest::Approx(1.0));
  // clipping: pi_hat = 0 behaves like 0.01
  CHECK(dr_pseudo_outcome(1, 1, 0.0, 0, 0, 0.01) == doctest::Approx(100.0));
  RealVector y(2), w(2), p(2), m0(2), m1(2);
  y << 3, 1;
  w << 1, 0;
  p << 0.5, 0.5;
  m0 << 1, 1;
  m1 << 2, 2;
  const RealVector v = dr_pseudo_outcomes(y, w, p, m0, m1, 0.01);
  CHECK(v(0) == doctest::Approx(3.0));
  CHECK(v(1) == doctest::Approx(1.0));
}

TEST_CASE("dr pseudo-outcomes are unbiased with the true propensity and wrong outcome models") {
  Rng rng(5);
  const Index n = 10000;
  std::normal_distribution<double> n01;
  std::bernoulli_distribution coin(0.5);
  RealVector y(n), w(n), p = RealVector::Constant(n, 0.5), m0(n), m1(n);
  double ate = 0;
  for (Index i = 0; i < n; ++i) {
    const double x = n01(rng);
    const double tau = 1.0 + x;
    w(i) = coin(rng);
    y(i) = x + w(i) * tau + 0.1 * n01(rng);
    m0(i) = 0.3 * x - 1.0;  // deliberately wrong
    m1(i) = 2.0;
    ate += tau / n;
  }
  const RealVector v = dr_pseudo_outcomes(y, w, p, m0, m1, 0.01);
  const double mean = v.mean();
  const double se = std::sqrt((v.array() - mean).square().sum() / (n - 1) / n);
  CHECK(std::abs(mean - ate) < 3 * se);
}

TEST_CASE("nuisance fits converge") {
  const auto sim = simulate(4000, 3, 6, [](const auto&) { return 1.0; });
  const auto nu = fit_nuisances(sim.train, quick_config(), Seed(1));
  const RealVector mu0 = core::mlp_forward(nu.mu0, sim.test.x).col(0);
  const RealVector mu1 = core::mlp_forward(nu.mu1, sim.test.x).col(0);
  const RealVector pi = core::mlp_forward(nu.pi, sim.test.x).col(0);
  CHECK(pehe(mu0, sim.test.x.col(0)) < 0.1);
  CHECK(pehe(mu1, sim.test.x.col(0).array() + 1.0) < 0.1);
  const double inside = ((pi.array() > 0.4) && (pi.array() < 0.6)).cast<double>().mean();
  CHECK(inside >= 0.95);
  CHECK(pi.minCoeff() > 0.3);
  CHECK(pi.maxCoeff() < 0.7);
}

TEST_CASE("an empty treatment group is rejected") {
  ObservedData o;
  o.x = RealMatrix::Ones(10, 2);
  o.w = RealVector::Zero(10);
  o.y = RealVector::Zero(10);
  CHECK_THROWS_AS(fit_nuisances(o, quick_config(), Seed(0)), EmptyGroupError);
  CHECK_THROWS_AS(fit_s_learner(o, quick_config(), Seed(0)), EmptyGroupError);
  CHECK_THROWS_AS(fit_tarnet(o, 0.0, quick_config(), Seed(0)), EmptyGroupError);
}

TEST_CASE("learners recover an additive effect") {
  const auto sim = simulate(4000, 3, 7, [](const auto& x) { return x(1); });
  const auto cfg = quick_config();
  SUBCASE("S") { CHECK(pehe(fit_s_learner(sim.train, cfg, Seed(2)).predict(sim.test.x), sim.tau_test) < 0.15); }
  SUBCASE("TARNET") {
    CHECK(pehe(fit_tarnet(sim.train, 0.0, cfg, Seed(2)).predict(sim.test.x), sim.tau_test) < 0.15);
  }
  SUBCASE("X") { CHECK(pehe(fit_x_learner(sim.train, cfg, Seed(2)).predict(sim.test.x), sim.tau_test) < 0.2); }
}

TEST_CASE("dr learner with oracle nuisances") {
  const auto sim = simulate(4000, 3, 8, [](const auto& x) { return 0.5 * x(1) - x(2); });
  NuisanceSet oracle;
  RealVector e0 = RealVector::Unit(3, 0);
  oracle.mu0 = linear_net(e0);
  RealVector w1(3);
  w1 << 1, 0.5, -1;
  oracle.mu1 = linear_net(w1);
  oracle.pi = linear_net(RealVector::Zero(3), 0.0, core::Activation::sigmoid);
  const auto est = fit_dr_learner(sim.train, oracle, quick_config(), Seed(3));
  CHECK(est.strategy() == Strategy::DR);
  CHECK(pehe(est.predict(sim.test.x), sim.tau_test) < 0.1);
}

TEST_CASE("fits are deterministic and tarnet equals cfrnet at gamma zero") {
  const auto sim = simulate(300, 3, 9, [](const auto& x) { return x(1); });
  auto cfg = quick_config();
  cfg.train.max_epochs = 5;
  const auto a = fit_tarnet(sim.train, 0.0, cfg, Seed(4));
  const auto b = fit_learner(Strategy::CFRNET, sim.train, cfg, Seed(4), 0.0);
  CHECK(a.predict(sim.test.x) == b.predict(sim.test.x));
  const auto c = fit_learner(Strategy::CFRNET, sim.train, cfg, Seed(4), 10.0);
  CHECK(c.strategy() == Strategy::CFRNET);
  CHECK(c.predict(sim.test.x) != a.predict(sim.test.x));
  CHECK(fit_dr_learner(sim.train, cfg, Seed(5)).predict(sim.test.x) ==
        fit_dr_learner(sim.train, cfg, Seed(5)).predict(sim.test.x));
}

TEST_CASE("network capacity") {
  const auto sim = simulate(200, 4, 10, [](const auto&) { return 0.0; });
  auto cfg = quick_config();
  cfg.hidden_units = 100;
  cfg.train.max_epochs = 1;
  CHECK(fit_s_learner(sim.train, cfg, Seed(0)).networks()[0].layer_sizes() == std::vector<Index>{5, 100, 100, 1});
  const auto t = fit_tarnet(sim.train, 0.0, cfg, Seed(0));
  CHECK(t.networks()[0].layer_sizes() == std::vector<Index>{4, 100});
  CHECK(t.networks()[1].layer_sizes() == std::vector<Index>{100, 100, 1});
  const auto x = fit_x_learner(sim.train, cfg, Seed(0));
  for (const auto& n : x.networks()) CHECK(n.layer_sizes() == std::vector<Index>{4, 100, 100, 1});
}

TEST_CASE("estimators persist bit-exactly") {
  Rng rng(11);
  const CateEstimator est(Strategy::X, {testing::random_mlp(rng, 3, 1), testing::random_mlp(rng, 3, 1),
                                        testing::random_mlp(rng, 3, 1, 2, 10, core::Activation::sigmoid)},
                          0.0, 0.05);
  const auto path = std::filesystem::temp_directory_path() / "itebench_model.json";
  save_estimator(est, path);
  const auto back = load_estimator(path);
  CHECK(back.strategy() == Strategy::X);
  CHECK(back.clip() == 0.05);
  for (std::size_t i = 0; i < 3; ++i) CHECK(back.networks()[i] == est.networks()[i]);
  CHECK_THROWS_AS(load_estimator(path.string() + ".missing"), IoError);
}

}
