#include "itebench/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <memory>
#include <numeric>

#include "itebench/csv.hpp"
#include "itebench/errors.hpp"

namespace itebench {

ScalarFunction as_function(const CateEstimator& est) {
  auto shared = std::make_shared<const CateEstimator>(est);
  return {est.input_dim(), [shared](const RealMatrix& x) { return shared->predict(x); },
          [shared](const RealMatrix& x) { return shared->gradients(x); }};
}

ScalarFunction oracle_cate_function(const OutcomeModel& model, const FeatureIndexSets& sets, Index d) {
  return {d, [model, sets](const RealMatrix& x) { return true_cate(model, sets, x); },
          [model, sets](const RealMatrix& x) { return true_cate_gradient(model, sets, x); }};
}

std::string_view to_string(AttributionMethod m) {
  switch (m) {
    case AttributionMethod::saliency: return "saliency";
    case AttributionMethod::integrated_gradients: return "integrated_gradients";
    case AttributionMethod::feature_ablation: return "feature_ablation";
    case AttributionMethod::feature_permutation: return "feature_permutation";
    case AttributionMethod::shapley_mc: return "shapley_mc";
    case AttributionMethod::shapley_exact: return "shapley_exact";
  }
  return "?";
}

AttributionMethod attribution_method_from_string(std::string_view s) {
  if (s == "saliency") return AttributionMethod::saliency;
  if (s == "integrated_gradients" || s == "ig") return AttributionMethod::integrated_gradients;
  if (s == "feature_ablation" || s == "ablation") return AttributionMethod::feature_ablation;
  if (s == "feature_permutation" || s == "permutation") return AttributionMethod::feature_permutation;
  if (s == "shapley_mc" || s == "shap") return AttributionMethod::shapley_mc;
  if (s == "shapley_exact") return AttributionMethod::shapley_exact;
  throw InvalidConfig("unknown attribution method '" + std::string(s) + "'");
}

namespace {

void check_point(const ScalarFunction& f, const RealVector& x) {
  if (x.size() != f.dim) {
    throw ShapeError("point has length " + std::to_string(x.size()) + ", function expects " +
                     std::to_string(f.dim));
  }
}

void check_baseline(const ScalarFunction& f, const RealVector& baseline) {
  if (baseline.size() != f.dim) throw ShapeError("baseline length does not match function input");
}

void require_gradient(const ScalarFunction& f) {
  if (!f.gradient) throw InvalidConfig("method needs a differentiable function");
}

}  // namespace

RealVector saliency(const ScalarFunction& f, const RealVector& x) {
  check_point(f, x);
  require_gradient(f);
  return f.gradient(x.transpose()).row(0).transpose();
}

RealMatrix integrated_gradients(const ScalarFunction& f, const RealMatrix& x,
                                const RealVector& baseline, Index steps) {
  require_gradient(f);
  check_baseline(f, baseline);
  if (x.cols() != f.dim) throw ShapeError("query width does not match function input");
  if (steps < 1) throw InvalidConfig("integrated gradients: steps must be >= 1");
  const Index d = f.dim;
  // Bound the size of one gradient call.
  const Index chunk = std::max<Index>(1, 20000 / steps);
  RealMatrix out(x.rows(), d);
  for (Index start = 0; start < x.rows(); start += chunk) {
    const Index len = std::min(chunk, x.rows() - start);
    RealMatrix path(len * steps, d);
    for (Index r = 0; r < len; ++r) {
      const Eigen::RowVectorXd delta = x.row(start + r) - baseline.transpose();
      for (Index k = 0; k < steps; ++k) {
        const double t = (static_cast<double>(k) + 0.5) / static_cast<double>(steps);
        path.row(r * steps + k) = baseline.transpose() + t * delta;
      }
    }
    const RealMatrix g = f.gradient(path);
    for (Index r = 0; r < len; ++r) {
      const Eigen::RowVectorXd mean_grad = g.middleRows(r * steps, steps).colwise().mean();
      out.row(start + r) = (x.row(start + r) - baseline.transpose()).cwiseProduct(mean_grad);
    }
  }
  return out;
}

RealVector integrated_gradients(const ScalarFunction& f, const RealVector& x,
                                const RealVector& baseline, Index steps) {
  check_point(f, x);
  return integrated_gradients(f, RealMatrix(x.transpose()), baseline, steps).row(0).transpose();
}

RealVector feature_ablation(const ScalarFunction& f, const RealVector& x, const RealVector& baseline) {
  check_point(f, x);
  check_baseline(f, baseline);
  const Index d = f.dim;
  RealMatrix pts = x.transpose().replicate(d + 1, 1);
  for (Index i = 0; i < d; ++i) pts(i + 1, i) = baseline(i);
  const RealVector v = f.value(pts);
  return v(0) - v.tail(d).array();
}

RealMatrix feature_permutation(const ScalarFunction& f, const RealMatrix& x_query, Rng& rng) {
  if (x_query.cols() != f.dim) throw ShapeError("query width does not match function input");
  const Index m = x_query.rows();
  if (m < 2) throw InvalidConfig("feature permutation needs at least 2 query rows");
  const RealVector base = f.value(x_query);
  RealMatrix scores(m, f.dim);
  IndexSet perm(static_cast<std::size_t>(m));
  for (Index i = 0; i < f.dim; ++i) {
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    RealMatrix permuted = x_query;
    permuted.col(i) = x_query(perm, i);
    scores.col(i) = base - f.value(permuted);
  }
  return scores;
}

RealVector shapley_mc(const ScalarFunction& f, const RealVector& x, const RealVector& baseline,
                      Index n_permutations, Rng& rng) {
  check_point(f, x);
  check_baseline(f, baseline);
  if (n_permutations < 1) throw InvalidConfig("shapley_mc: need at least one permutation");
  const Index d = f.dim;
  RealVector phi = RealVector::Zero(d);
  IndexSet order(static_cast<std::size_t>(d));
  const Index per_call = std::max<Index>(1, 20000 / (d + 1));
  for (Index done = 0; done < n_permutations; done += per_call) {
    const Index batch = std::min(per_call, n_permutations - done);
    RealMatrix pts(batch * (d + 1), d);
    std::vector<IndexSet> orders;
    orders.reserve(static_cast<std::size_t>(batch));
    for (Index p = 0; p < batch; ++p) {
      std::iota(order.begin(), order.end(), Index{0});
      std::shuffle(order.begin(), order.end(), rng);
      Eigen::RowVectorXd cur = baseline.transpose();
      pts.row(p * (d + 1)) = cur;
      for (Index k = 0; k < d; ++k) {
        const Index feat = order[static_cast<std::size_t>(k)];
        cur(feat) = x(feat);
        pts.row(p * (d + 1) + k + 1) = cur;
      }
      orders.push_back(order);
    }
    const RealVector v = f.value(pts);
    for (Index p = 0; p < batch; ++p) {
      const IndexSet& o = orders[static_cast<std::size_t>(p)];
      for (Index k = 0; k < d; ++k) {
        phi(o[static_cast<std::size_t>(k)]) += v(p * (d + 1) + k + 1) - v(p * (d + 1) + k);
      }
    }
  }
  return phi / static_cast<double>(n_permutations);
}

RealVector shapley_exact(const ScalarFunction& f, const RealVector& x, const RealVector& baseline) {
  check_point(f, x);
  check_baseline(f, baseline);
  const Index d = f.dim;
  if (d > kMaxExactShapleyFeatures) {
    throw CapacityError("shapley_exact: " + std::to_string(d) + " features exceed the limit of " +
                        std::to_string(kMaxExactShapleyFeatures));
  }
  const Index n_coalitions = Index{1} << d;
  RealMatrix pts(n_coalitions, d);
  for (Index mask = 0; mask < n_coalitions; ++mask) {
    for (Index i = 0; i < d; ++i) pts(mask, i) = (mask >> i) & 1 ? x(i) : baseline(i);
  }
  const RealVector v = f.value(pts);
  // weight[s] = s! (d - s - 1)! / d!
  std::vector<double> weight(static_cast<std::size_t>(d));
  for (Index s = 0; s < d; ++s) {
    weight[static_cast<std::size_t>(s)] =
        std::exp(std::lgamma(s + 1.0) + std::lgamma(static_cast<double>(d - s)) - std::lgamma(d + 1.0));
  }
  RealVector phi = RealVector::Zero(d);
  for (Index mask = 0; mask < n_coalitions; ++mask) {
    const auto size = static_cast<std::size_t>(std::popcount(static_cast<std::uint64_t>(mask)));
    for (Index i = 0; i < d; ++i) {
      if ((mask >> i) & 1) continue;
      phi(i) += weight[size] * (v(mask | (Index{1} << i)) - v(mask));
    }
  }
  return phi;
}

IndexSet select_query_rows(Index m, Index cap, Seed seed) {
  if (cap < 1) throw InvalidConfig("attribution row cap must be >= 1");
  IndexSet rows(static_cast<std::size_t>(m));
  std::iota(rows.begin(), rows.end(), Index{0});
  if (m <= cap) return rows;
  Rng rng = seed.child("rows").engine();
  std::shuffle(rows.begin(), rows.end(), rng);
  rows.resize(static_cast<std::size_t>(cap));
  return rows;
}

AttributionMatrix attribute_batch(AttributionMethod method, const ScalarFunction& f,
                                  const RealMatrix& x_query, const AttributionSettings& settings) {
  if (x_query.cols() != f.dim) throw ShapeError("query width does not match function input");
  AttributionMatrix out;
  out.method = method;
  out.baseline = settings.baseline ? *settings.baseline : RealVector::Zero(f.dim);
  check_baseline(f, out.baseline);
  out.rows = select_query_rows(x_query.rows(), settings.row_cap, settings.seed);
  const RealMatrix x = x_query(out.rows, Eigen::all);
  const Index m = x.rows();

  switch (method) {
    case AttributionMethod::saliency:
      require_gradient(f);
      out.scores = f.gradient(x);
      break;
    case AttributionMethod::integrated_gradients:
      out.scores = integrated_gradients(f, x, out.baseline, settings.ig_steps);
      break;
    case AttributionMethod::feature_ablation:
      out.scores.resize(m, f.dim);
      for (Index r = 0; r < m; ++r) {
        out.scores.row(r) = feature_ablation(f, x.row(r).transpose(), out.baseline).transpose();
      }
      break;
    case AttributionMethod::feature_permutation: {
      Rng rng = settings.seed.child("permutation").engine();
      out.scores = feature_permutation(f, x, rng);
      break;
    }
    case AttributionMethod::shapley_mc: {
      const Index n_perm = settings.n_permutations > 0 ? settings.n_permutations : 100 * f.dim;
      out.scores.resize(m, f.dim);
      for (Index r = 0; r < m; ++r) {
        Rng rng = settings.seed.child("shapley").child(r).engine();
        out.scores.row(r) = shapley_mc(f, x.row(r).transpose(), out.baseline, n_perm, rng).transpose();
      }
      break;
    }
    case AttributionMethod::shapley_exact:
      out.scores.resize(m, f.dim);
      for (Index r = 0; r < m; ++r) {
        out.scores.row(r) = shapley_exact(f, x.row(r).transpose(), out.baseline).transpose();
      }
      break;
  }
  if (!out.scores.allFinite()) throw NumericError("attribution produced non-finite scores");
  return out;
}

AttributionMatrix attribute_batch(AttributionMethod method, const CateEstimator& est,
                                  const RealMatrix& x_query, const AttributionSettings& settings) {
  return attribute_batch(method, as_function(est), x_query, settings);
}

void export_attributions_csv(const AttributionMatrix& attr, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  std::vector<std::string> header = {"unit_id", "method"};
  for (Index j = 0; j < attr.scores.cols(); ++j) header.push_back("a_" + std::to_string(j));
  csv::write_row(out, header);
  const std::string method(to_string(attr.method));
  for (Index r = 0; r < attr.scores.rows(); ++r) {
    const Index unit = r < static_cast<Index>(attr.rows.size()) ? attr.rows[static_cast<std::size_t>(r)] : r;
    std::vector<std::string> row = {std::to_string(unit), method};
    for (Index j = 0; j < attr.scores.cols(); ++j) row.push_back(csv::format_real(attr.scores(r, j)));
    csv::write_row(out, row);
  }
}

AttributionMatrix read_attributions_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read_file(path);
  const std::size_t cu = t.column("unit_id");
  const std::size_t cm = t.column("method");
  std::vector<std::size_t> ca;
  for (std::size_t j = 0;; ++j) {
    const auto it = std::find(t.header.begin(), t.header.end(), "a_" + std::to_string(j));
    if (it == t.header.end()) break;
    ca.push_back(static_cast<std::size_t>(it - t.header.begin()));
  }
  AttributionMatrix a;
  a.scores.resize(static_cast<Index>(t.rows.size()), static_cast<Index>(ca.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    a.rows.push_back(static_cast<Index>(csv::parse_real(t.rows[r][cu], r + 1, cu)));
    if (r == 0) a.method = attribution_method_from_string(t.rows[r][cm]);
    for (std::size_t j = 0; j < ca.size(); ++j) {
      a.scores(static_cast<Index>(r), static_cast<Index>(j)) = csv::parse_real(t.rows[r][ca[j]], r + 1, ca[j]);
    }
  }
  a.baseline = RealVector::Zero(static_cast<Index>(ca.size()));
  return a;
}

}  // namespace itebench
