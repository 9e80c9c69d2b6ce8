#pragma once

#include "itebench/attribution.hpp"
#include "itebench/types.hpp"

namespace itebench {

struct MetricsRecord {
  double attr_pred = 0.0;
  double attr_prog = 0.0;
  double pehe = 0.0;
  Index n_eval = 0;  // attribution rows that entered the average
};

/// Mean over rows of sum_{i in set} |a_i| / sum_i |a_i|. All-zero rows are
/// skipped; if every row is zero the metric is undefined.
double attribution_share(const RealMatrix& scores, const IndexSet& features);

double attr_pred(const AttributionMatrix& scores, const IndexSet& i_pred);
double attr_prog(const AttributionMatrix& scores, const IndexSet& i_prog);

/// Number of rows with nonzero attribution mass.
Index nonzero_rows(const RealMatrix& scores);

/// Root mean squared CATE error.
double pehe(const RealVector& tau_hat, const RealVector& tau_true);

}  // namespace itebench
