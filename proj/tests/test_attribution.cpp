#include <doctest.h>

#include <filesystem>

#include "itebench/attribution.hpp"
#include "itebench/errors.hpp"
#include "support.hpp"

using namespace itebench;
using itebench::testing::gaussian_matrix;
using itebench::testing::mlp_function;

namespace {

ScalarFunction product01() {
  ScalarFunction f;
  f.dim = 2;
  f.value = [](const RealMatrix& x) -> RealVector { return x.col(0).cwiseProduct(x.col(1)); };
  f.gradient = [](const RealMatrix& x) -> RealMatrix {
    RealMatrix g(x.rows(), 2);
    g.col(0) = x.col(1);
    g.col(1) = x.col(0);
    return g;
  };
  return f;
}

RealVector vec(std::initializer_list<double> v) {
  RealVector r(static_cast<Index>(v.size()));
  Index i = 0;
  for (double e : v) r(i++) = e;
  return r;
}

}  // namespace

TEST_SUITE("attribution") {

TEST_CASE("method names") {
  for (auto m : {AttributionMethod::saliency, AttributionMethod::integrated_gradients,
                 AttributionMethod::feature_ablation, AttributionMethod::feature_permutation,
                 AttributionMethod::shapley_mc, AttributionMethod::shapley_exact}) {
    CHECK(attribution_method_from_string(to_string(m)) == m);
  }
  CHECK(attribution_method_from_string("ig") == AttributionMethod::integrated_gradients);
  CHECK_THROWS_AS(attribution_method_from_string("lime"), InvalidConfig);
}

TEST_CASE("saliency") {
  const auto f = testing::linear_function(vec({3, 0, 0}));
  CHECK(saliency(f, vec({1, 2, 3})) == vec({3, 0, 0}));
  Rng rng(1);
  const auto net = testing::random_mlp(rng, 4, 1);
  const auto g = mlp_function(net);
  const RealMatrix x = testing::kink_free_inputs(net, rng, 1);
  const RealVector s = saliency(g, x.row(0).transpose());
  for (Index c = 0; c < 4; ++c) {
    RealMatrix hi = x, lo = x;
    hi(0, c) += 1e-6;
    lo(0, c) -= 1e-6;
    CHECK(testing::relative_error(s(c), (g.value(hi)(0) - g.value(lo)(0)) / 2e-6, 1e-3) < 1e-4);
  }
}

TEST_CASE("integrated gradients") {
  SUBCASE("exact on linear maps") {
    const auto f = testing::linear_function(vec({2, -3}));
    for (Index steps : {1, 7, 50}) {
      const RealVector a = integrated_gradients(f, vec({1, 1}), RealVector::Zero(2), steps);
      CHECK(a(0) == doctest::Approx(2.0));
      CHECK(a(1) == doctest::Approx(-3.0));
    }
  }
  SUBCASE("zero at the baseline") {
    const auto f = product01();
    CHECK(integrated_gradients(f, vec({0.3, 0.4}), vec({0.3, 0.4})).isZero());
  }
  SUBCASE("completeness on freshly initialized networks") {
    Rng rng(2);
    for (int t = 0; t < 20; ++t) {
      const auto net = core::mlp_init<double>({5, 10, 10, 1}, core::Activation::identity, rng);
      const auto f = mlp_function(net);
      const RealVector x = gaussian_matrix(rng, 1, 5).row(0).transpose();
      const RealVector a = integrated_gradients(f, x, RealVector::Zero(5), 50);
      const double shift = f.value(x.transpose())(0) - f.value(RealMatrix::Zero(1, 5))(0);
      CHECK(std::abs(a.sum() - shift) <= 1e-9 * (1 + std::abs(shift)));
    }
  }
  SUBCASE("completeness error shrinks with steps on biased networks") {
    Rng rng(2);
    for (int t = 0; t < 20; ++t) {
      const auto f = mlp_function(testing::random_mlp(rng, 5, 1));
      const RealVector x = gaussian_matrix(rng, 1, 5).row(0).transpose();
      const double shift = f.value(x.transpose())(0) - f.value(RealMatrix::Zero(1, 5))(0);
      auto err = [&](int steps) {
        return std::abs(integrated_gradients(f, x, RealVector::Zero(5), steps).sum() - shift) / (1 + std::abs(shift));
      };
      CHECK(err(5000) <= 1e-3);
      CHECK(err(5000) <= err(50) + 1e-12);
    }
  }
  SUBCASE("batched rows equal single rows") {
    Rng rng(3);
    const auto f = mlp_function(testing::random_mlp(rng, 3, 1));
    const RealMatrix x = gaussian_matrix(rng, 4, 3);
    const RealMatrix all = integrated_gradients(f, x, RealVector::Zero(3), 20);
    for (Index r = 0; r < 4; ++r) {
      const RealVector one = integrated_gradients(f, RealVector(x.row(r).transpose()), RealVector::Zero(3), 20);
      CHECK((all.row(r).transpose() - one).cwiseAbs().maxCoeff() < 1e-12);
    }
  }
}

TEST_CASE("feature ablation") {
  const auto lin = testing::linear_function(vec({1, -2, 4}));
  const RealVector a = feature_ablation(lin, vec({2, 1, 0}), RealVector::Zero(3));
  CHECK(a == vec({2, -2, 0}));
  const RealVector p = feature_ablation(product01(), vec({1, 2}), RealVector::Zero(2));
  CHECK(p(0) == doctest::Approx(2.0));
  CHECK(p(1) == doctest::Approx(2.0));
}

TEST_CASE("shapley values of a product") {
  const auto f = product01();
  const RealVector exact = shapley_exact(f, vec({1, 2}), RealVector::Zero(2));
  CHECK(exact(0) == doctest::Approx(1.0));
  CHECK(exact(1) == doctest::Approx(1.0));
  Rng rng(4);
  const RealVector mc = shapley_mc(f, vec({1, 2}), RealVector::Zero(2), 10000, rng);
  CHECK(std::abs(mc(0) - 1.0) < 0.1);
  CHECK(std::abs(mc(1) - 1.0) < 0.1);
}

TEST_CASE("shapley efficiency, additivity and symmetry") {
  Rng rng(5);
  const auto net = mlp_function(testing::random_mlp(rng, 4, 1));
  const RealVector x = gaussian_matrix(rng, 1, 4).row(0).transpose();
  const double shift = net.value(x.transpose())(0) - net.value(RealMatrix::Zero(1, 4))(0);
  CHECK(shapley_exact(net, x, RealVector::Zero(4)).sum() == doctest::Approx(shift));
  for (Index n : {1, 3, 17}) {
    CHECK(shapley_mc(net, x, RealVector::Zero(4), n, rng).sum() == doctest::Approx(shift));
  }
  const auto lin = testing::linear_function(vec({1, 2, 3}));
  const RealVector xl = vec({-1, 0.5, 2});
  const RealVector s = shapley_exact(lin, xl, RealVector::Zero(3));
  CHECK((s - vec({-1, 1, 6})).cwiseAbs().maxCoeff() < 1e-12);
  const RealVector m = shapley_mc(lin, xl, RealVector::Zero(3), 5, rng);
  CHECK((m - vec({-1, 1, 6})).cwiseAbs().maxCoeff() < 1e-12);

  ScalarFunction sym;
  sym.dim = 3;
  sym.value = [](const RealMatrix& x) -> RealVector {
    return (x.col(0).array() * x.col(1).array()).exp() + x.col(2).array();
  };
  const RealVector ss = shapley_exact(sym, vec({0.7, 0.7, 1}), RealVector::Zero(3));
  CHECK(ss(0) == doctest::Approx(ss(1)));
}

TEST_CASE("exact shapley capacity") {
  const auto f = testing::linear_function(RealVector::Ones(16));
  CHECK_THROWS_AS(shapley_exact(f, RealVector::Ones(16), RealVector::Zero(16)), CapacityError);
}

TEST_CASE("sensitivity: unused coordinates get zero") {
  Rng rng(6);
  const IndexSet unused{1, 3};
  const auto f = testing::ignoring(mlp_function(testing::random_mlp(rng, 5, 1)), unused);
  const RealVector x = gaussian_matrix(rng, 1, 5).row(0).transpose();
  const RealVector z = RealVector::Zero(5);
  for (const RealVector& a : {saliency(f, x), integrated_gradients(f, x, z), feature_ablation(f, x, z),
                              shapley_exact(f, x, z)}) {
    CHECK(a(1) == 0.0);
    CHECK(a(3) == 0.0);
  }
  const RealMatrix p = feature_permutation(f, gaussian_matrix(rng, 10, 5), rng);
  CHECK(p.col(1).isZero());
  CHECK(p.col(3).isZero());
}

TEST_CASE("feature permutation") {
  Rng rng(7);
  const auto c = testing::linear_function(RealVector::Zero(3), 2.0);
  CHECK(feature_permutation(c, gaussian_matrix(rng, 6, 3), rng).isZero());
  RealMatrix same = RealMatrix::Ones(5, 3);
  same.col(0) = gaussian_matrix(rng, 5, 1);
  const auto lin = testing::linear_function(vec({1, 1, 1}));
  const RealMatrix p = feature_permutation(lin, same, rng);
  CHECK(p.col(1).isZero());  // constant column: every permutation is the identity
  CHECK_THROWS_AS(feature_permutation(lin, RealMatrix::Ones(1, 3), rng), InvalidConfig);
}

TEST_CASE("linearity in the function") {
  Rng rng(8);
  const auto f = mlp_function(testing::random_mlp(rng, 4, 1));
  const auto g = mlp_function(testing::random_mlp(rng, 4, 1));
  const auto h = testing::add_functions(f, g, 0.7, -1.3);
  const RealVector x = gaussian_matrix(rng, 1, 4).row(0).transpose();
  const RealVector z = RealVector::Zero(4);
  CHECK((saliency(h, x) - (0.7 * saliency(f, x) - 1.3 * saliency(g, x))).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((integrated_gradients(h, x, z) - (0.7 * integrated_gradients(f, x, z) - 1.3 * integrated_gradients(g, x, z)))
            .cwiseAbs()
            .maxCoeff() < 1e-8);
  CHECK((shapley_exact(h, x, z) - (0.7 * shapley_exact(f, x, z) - 1.3 * shapley_exact(g, x, z)))
            .cwiseAbs()
            .maxCoeff() < 1e-8);
}

TEST_CASE("batch attribution caps rows deterministically") {
  const auto f = testing::linear_function(vec({1, -1, 0.5}));
  Rng rng(9);
  const RealMatrix x = gaussian_matrix(rng, 5000, 3);
  AttributionSettings s;
  s.seed = Seed(3);
  const auto a = attribute_batch(AttributionMethod::saliency, f, x, s);
  CHECK(a.scores.rows() == 1000);
  CHECK(a.rows.size() == 1000);
  CHECK((a.scores.rowwise() - vec({1, -1, 0.5}).transpose()).isZero());
  CHECK(a.rows == attribute_batch(AttributionMethod::saliency, f, x, s).rows);
  CHECK(select_query_rows(10, 1000, Seed(0)) == IndexSet{0, 1, 2, 3, 4, 5, 6, 7, 8, 9});

  s.ig_steps = 50;
  const auto ig = attribute_batch(AttributionMethod::integrated_gradients, f, x.topRows(20), s);
  for (Index r = 0; r < 20; ++r) {
    const RealVector row = x.row(r).transpose();
    CHECK((ig.scores.row(r).transpose() - integrated_gradients(f, row, RealVector::Zero(3))).isZero(1e-12));
  }
}

TEST_CASE("attributions csv round-trip") {
  const auto f = testing::linear_function(vec({1, 2}));
  AttributionSettings s;
  const auto a = attribute_batch(AttributionMethod::integrated_gradients, f, RealMatrix::Ones(4, 2), s);
  const auto p = std::filesystem::temp_directory_path() / "itebench_attr.csv";
  export_attributions_csv(a, p);
  const auto back = read_attributions_csv(p);
  CHECK(back.scores == a.scores);
  CHECK(back.rows == a.rows);
  CHECK(back.method == a.method);
}

}
