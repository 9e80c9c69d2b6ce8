#pragma once

// Post-hoc feature attribution applied directly to a CATE function.

#include <filesystem>
#include <functional>
#include <optional>
#include <string_view>

#include "itebench/dgp.hpp"
#include "itebench/learners.hpp"
#include "itebench/seed.hpp"
#include "itebench/types.hpp"

namespace itebench {

/// Scalar function on R^d evaluated row by row. gradient returns one row
/// per input row and may be empty for black-box functions.
struct ScalarFunction {
  Index dim = 0;
  std::function<RealVector(const RealMatrix&)> value;
  std::function<RealMatrix(const RealMatrix&)> gradient;
};

/// Wraps a fitted estimator (copied, so the function owns its networks).
ScalarFunction as_function(const CateEstimator& est);

/// The true CATE of a generated dataset, with its analytic gradient.
ScalarFunction oracle_cate_function(const OutcomeModel& model, const FeatureIndexSets& sets, Index d);

enum class AttributionMethod {
  saliency,
  integrated_gradients,
  feature_ablation,
  feature_permutation,
  shapley_mc,
  shapley_exact,
};

std::string_view to_string(AttributionMethod m);
AttributionMethod attribution_method_from_string(std::string_view s);

RealVector saliency(const ScalarFunction& f, const RealVector& x);

/// Midpoint Riemann sum of the path integral from baseline to x.
RealVector integrated_gradients(const ScalarFunction& f, const RealVector& x,
                                const RealVector& baseline, Index steps = 50);

/// Row-wise integrated gradients for a batch, sharing gradient calls.
RealMatrix integrated_gradients(const ScalarFunction& f, const RealMatrix& x,
                                const RealVector& baseline, Index steps = 50);

/// a_i = f(x) - f(x with x_i set to baseline_i)
RealVector feature_ablation(const ScalarFunction& f, const RealVector& x, const RealVector& baseline);

/// One shared random permutation per feature across the rows of the batch.
RealMatrix feature_permutation(const ScalarFunction& f, const RealMatrix& x_query, Rng& rng);

/// Average marginal contribution over uniformly sampled feature orderings;
/// features outside the coalition sit at the baseline.
RealVector shapley_mc(const ScalarFunction& f, const RealVector& x, const RealVector& baseline,
                      Index n_permutations, Rng& rng);

inline constexpr Index kMaxExactShapleyFeatures = 15;

/// Exact Shapley values by enumerating all 2^d coalitions.
RealVector shapley_exact(const ScalarFunction& f, const RealVector& x, const RealVector& baseline);

struct AttributionSettings {
  Index row_cap = 1000;
  Index ig_steps = 50;
  std::optional<RealVector> baseline;  // zero vector when unset
  Index n_permutations = 0;            // Monte-Carlo Shapley; 0 means 100 * d
  Seed seed{0};
};

struct AttributionMatrix {
  RealMatrix scores;  // rows x d
  AttributionMethod method = AttributionMethod::integrated_gradients;
  RealVector baseline;
  IndexSet rows;  // positions in the original query matrix
};

/// All rows in order when m <= cap, otherwise the first `cap` entries of a
/// seeded shuffle.
IndexSet select_query_rows(Index m, Index cap, Seed seed);

AttributionMatrix attribute_batch(AttributionMethod method, const ScalarFunction& f,
                                  const RealMatrix& x_query, const AttributionSettings& settings);
AttributionMatrix attribute_batch(AttributionMethod method, const CateEstimator& est,
                                  const RealMatrix& x_query, const AttributionSettings& settings);

/// CSV with columns unit_id, method, a_0..a_{d-1}.
void export_attributions_csv(const AttributionMatrix& attr, const std::filesystem::path& path);
AttributionMatrix read_attributions_csv(const std::filesystem::path& path);

}  // namespace itebench
