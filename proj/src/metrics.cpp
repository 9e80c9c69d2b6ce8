#include "itebench/metrics.hpp"

#include <cmath>

#include "itebench/errors.hpp"

namespace itebench {

Index nonzero_rows(const RealMatrix& scores) {
  Index n = 0;
  for (Index r = 0; r < scores.rows(); ++r) {
    if (scores.row(r).cwiseAbs().sum() > 0.0) ++n;
  }
  return n;
}

double attribution_share(const RealMatrix& scores, const IndexSet& features) {
  for (Index i : features) {
    if (i < 0 || i >= scores.cols()) throw ShapeError("feature index out of range for attribution matrix");
  }
  double total = 0.0;
  Index used = 0;
  for (Index r = 0; r < scores.rows(); ++r) {
    const double mass = scores.row(r).cwiseAbs().sum();
    if (!(mass > 0.0)) continue;
    double in_set = 0.0;
    for (Index i : features) in_set += std::abs(scores(r, i));
    total += in_set / mass;
    ++used;
  }
  if (used == 0) throw UndefinedMetric("every attribution row is zero");
  return total / static_cast<double>(used);
}

double attr_pred(const AttributionMatrix& scores, const IndexSet& i_pred) {
  return attribution_share(scores.scores, i_pred);
}

double attr_prog(const AttributionMatrix& scores, const IndexSet& i_prog) {
  return attribution_share(scores.scores, i_prog);
}

double pehe(const RealVector& tau_hat, const RealVector& tau_true) {
  if (tau_hat.size() != tau_true.size()) throw ShapeError("pehe: length mismatch");
  if (tau_hat.size() < 1) throw ShapeError("pehe: empty input");
  return std::sqrt((tau_hat - tau_true).squaredNorm() / static_cast<double>(tau_hat.size()));
}

}  // namespace itebench
