#include "itebench/dgp.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <set>

#include <json.hpp>

#include "itebench/csv.hpp"
#include "itebench/errors.hpp"

namespace itebench {

using nlohmann::json;

Normalization normalization_from_string(std::string_view s) {
  if (s == "none") return Normalization::none;
  if (s == "minmax") return Normalization::minmax;
  if (s == "zscore") return Normalization::zscore;
  throw InvalidConfig("unknown normalization '" + std::string(s) + "'");
}

CovariateMatrix load_covariates_csv(const std::filesystem::path& path, Normalization normalize) {
  const csv::Table t = csv::read_file(path);
  if (t.header.empty()) throw ParseError(path.string() + ": empty header");
  // A header made only of numbers means the header row is missing.
  bool numeric_header = true;
  for (std::size_t c = 0; c < t.header.size(); ++c) {
    try {
      csv::parse_real(t.header[c], 0, c);
    } catch (const ParseError&) {
      numeric_header = false;
      break;
    }
  }
  if (numeric_header) throw ParseError(path.string() + ": missing header row");
  if (t.rows.empty()) throw ParseError(path.string() + ": no data rows");

  CovariateMatrix cov;
  cov.names = t.header;
  cov.x.resize(static_cast<Index>(t.rows.size()), static_cast<Index>(t.header.size()));
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      const double v = csv::parse_real(t.rows[r][c], r + 1, c);
      if (!std::isfinite(v)) {
        throw ParseError("non-finite cell at row " + std::to_string(r + 1) + ", column " +
                         std::to_string(c));
      }
      cov.x(static_cast<Index>(r), static_cast<Index>(c)) = v;
    }
  }

  for (Index c = 0; c < cov.x.cols(); ++c) {
    auto col = cov.x.col(c);
    if (normalize == Normalization::minmax) {
      const double lo = col.minCoeff();
      const double range = col.maxCoeff() - lo;
      if (range > 0) {
        col = (col.array() - lo) / range;
      } else {
        col.setZero();
      }
    } else if (normalize == Normalization::zscore) {
      const double mean = col.mean();
      const double sd = std::sqrt((col.array() - mean).square().mean());
      if (!(sd > 0)) {
        throw NormalizationError("column '" + cov.names[static_cast<std::size_t>(c)] +
                                 "' is constant; cannot z-score");
      }
      col = (col.array() - mean) / sd;
    }
  }
  return cov;
}

CovariateMatrix synth_covariates(Index n, Index d, double rho, Rng& rng) {
  if (d < 4) throw InvalidConfig("synth_covariates: need d >= 4");
  if (n < 1) throw InvalidConfig("synth_covariates: need n >= 1");
  if (!(rho >= 0.0 && rho < 1.0)) throw InvalidConfig("synth_covariates: rho must lie in [0, 1)");
  // One-factor construction: x_j = sqrt(rho) z_0 + sqrt(1 - rho) z_j.
  std::normal_distribution<double> normal(0.0, 1.0);
  const double shared = std::sqrt(rho);
  const double own = std::sqrt(1.0 - rho);
  CovariateMatrix cov;
  cov.x.resize(n, d);
  for (Index i = 0; i < n; ++i) {
    const double z0 = normal(rng);
    for (Index j = 0; j < d; ++j) cov.x(i, j) = shared * z0 + own * normal(rng);
  }
  cov.names.reserve(static_cast<std::size_t>(d));
  for (Index j = 0; j < d; ++j) cov.names.push_back("x_" + std::to_string(j));
  return cov;
}

IndexSet FeatureIndexSets::pred() const {
  IndexSet out = pred0;
  out.insert(out.end(), pred1.begin(), pred1.end());
  return out;
}

Index default_set_size(Index d) { return static_cast<Index>(std::floor(0.2 * static_cast<double>(d))); }

FeatureIndexSets sample_feature_sets(Index d, Index n_i, Rng& rng) {
  if (n_i < 1) throw InvalidConfig("sample_feature_sets: set size must be >= 1");
  if (d <= 3 * n_i) {
    throw InvalidConfig("sample_feature_sets: need d > 3 * n_I (d=" + std::to_string(d) +
                        ", n_I=" + std::to_string(n_i) + ")");
  }
  IndexSet all(static_cast<std::size_t>(d));
  std::iota(all.begin(), all.end(), Index{0});
  std::shuffle(all.begin(), all.end(), rng);
  auto take = [&](std::size_t block) {
    IndexSet s(all.begin() + static_cast<std::ptrdiff_t>(block * n_i),
               all.begin() + static_cast<std::ptrdiff_t>((block + 1) * n_i));
    std::sort(s.begin(), s.end());
    return s;
  };
  return {take(0), take(1), take(2)};
}

// ---------------------------------------------------------------- nonlinearities

double apply(Nonlinearity chi, double v) {
  switch (chi) {
    case Nonlinearity::abs: return std::abs(v);
    case Nonlinearity::gaussian: return std::exp(-v * v);
    case Nonlinearity::cauchy: return 1.0 / (1.0 + v * v);
    case Nonlinearity::cos: return std::cos(v);
    case Nonlinearity::sin: return std::sin(v);
    case Nonlinearity::arctan: return std::atan(v);
    case Nonlinearity::tanh: return std::tanh(v);
    case Nonlinearity::log1p_square: return std::log1p(v * v);
    case Nonlinearity::sqrt1p_square: return std::sqrt(1.0 + v * v);
    case Nonlinearity::cosh: return std::cosh(v);
  }
  return 0.0;
}

double derivative(Nonlinearity chi, double v) {
  switch (chi) {
    case Nonlinearity::abs: return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0);
    case Nonlinearity::gaussian: return -2.0 * v * std::exp(-v * v);
    case Nonlinearity::cauchy: {
      const double q = 1.0 + v * v;
      return -2.0 * v / (q * q);
    }
    case Nonlinearity::cos: return -std::sin(v);
    case Nonlinearity::sin: return std::cos(v);
    case Nonlinearity::arctan: return 1.0 / (1.0 + v * v);
    case Nonlinearity::tanh: {
      const double t = std::tanh(v);
      return 1.0 - t * t;
    }
    case Nonlinearity::log1p_square: return 2.0 * v / (1.0 + v * v);
    case Nonlinearity::sqrt1p_square: return v / std::sqrt(1.0 + v * v);
    case Nonlinearity::cosh: return std::sinh(v);
  }
  return 0.0;
}

std::string_view to_string(Nonlinearity chi) {
  switch (chi) {
    case Nonlinearity::abs: return "abs";
    case Nonlinearity::gaussian: return "exp_neg_square";
    case Nonlinearity::cauchy: return "inv_1p_square";
    case Nonlinearity::cos: return "cos";
    case Nonlinearity::sin: return "sin";
    case Nonlinearity::arctan: return "arctan";
    case Nonlinearity::tanh: return "tanh";
    case Nonlinearity::log1p_square: return "log_1p_square";
    case Nonlinearity::sqrt1p_square: return "sqrt_1p_square";
    case Nonlinearity::cosh: return "cosh";
  }
  return "?";
}

Nonlinearity nonlinearity_from_string(std::string_view s) {
  for (Nonlinearity chi : kNonlinearities) {
    if (to_string(chi) == s) return chi;
  }
  throw ParseError("unknown nonlinearity '" + std::string(s) + "'");
}

// ---------------------------------------------------------------- outcome model

OutcomeModel sample_outcome_model(Index n_i, double omega_nl, double omega_pred, Rng& rng) {
  if (n_i < 1) throw InvalidConfig("sample_outcome_model: set size must be >= 1");
  if (!(omega_nl >= 0.0 && omega_nl <= 1.0)) throw InvalidConfig("omega_nl must lie in [0, 1]");
  if (!(omega_pred >= 0.0) || !std::isfinite(omega_pred)) {
    throw InvalidConfig("omega_pred must be finite and >= 0");
  }
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  auto draw = [&] {
    RealVector a(n_i);
    for (Index i = 0; i < n_i; ++i) a(i) = u(rng);
    return a;
  };
  OutcomeModel m;
  m.alpha_prog = draw();
  m.alpha0 = draw();
  m.alpha1 = draw();
  std::uniform_int_distribution<std::size_t> pick(0, kNonlinearities.size() - 1);
  m.chi = kNonlinearities[pick(rng)];
  m.omega_nl = omega_nl;
  m.omega_pred = omega_pred;
  return m;
}

namespace {

void check_sets(const OutcomeModel& model, const FeatureIndexSets& sets, Index d) {
  auto check = [&](const IndexSet& s, const RealVector& alpha, const char* name) {
    if (static_cast<Index>(s.size()) != alpha.size()) {
      throw ShapeError(std::string(name) + ": index set and weight vector lengths differ");
    }
    for (Index i : s) {
      if (i < 0 || i >= d) throw ShapeError(std::string(name) + ": feature index out of range");
    }
  };
  check(sets.prog, model.alpha_prog, "prognostic set");
  check(sets.pred0, model.alpha0, "predictive set 0");
  check(sets.pred1, model.alpha1, "predictive set 1");
}

double blend(const OutcomeModel& m, double linear) {
  return (1.0 - m.omega_nl) * linear + m.omega_nl * apply(m.chi, linear);
}

double blend_slope(const OutcomeModel& m, double linear) {
  return (1.0 - m.omega_nl) + m.omega_nl * derivative(m.chi, linear);
}

RealVector projection(const RealMatrix& x, const IndexSet& s, const RealVector& alpha) {
  return x(Eigen::all, s) * alpha;
}

}  // namespace

Components eval_components(const OutcomeModel& model, const FeatureIndexSets& sets,
                           const Eigen::Ref<const RealVector>& x) {
  check_sets(model, sets, x.size());
  auto dot = [&](const IndexSet& s, const RealVector& a) {
    double acc = 0.0;
    for (std::size_t k = 0; k < s.size(); ++k) acc += a(static_cast<Index>(k)) * x(s[k]);
    return acc;
  };
  return {blend(model, dot(sets.prog, model.alpha_prog)), blend(model, dot(sets.pred0, model.alpha0)),
          blend(model, dot(sets.pred1, model.alpha1))};
}

ComponentColumns eval_components(const OutcomeModel& model, const FeatureIndexSets& sets,
                                 const RealMatrix& x) {
  check_sets(model, sets, x.cols());
  auto column = [&](const IndexSet& s, const RealVector& a) {
    RealVector lin = projection(x, s, a);
    return RealVector(lin.unaryExpr([&](double v) { return blend(model, v); }));
  };
  return {column(sets.prog, model.alpha_prog), column(sets.pred0, model.alpha0),
          column(sets.pred1, model.alpha1)};
}

RealVector true_cate(const OutcomeModel& model, const FeatureIndexSets& sets, const RealMatrix& x) {
  const ComponentColumns c = eval_components(model, sets, x);
  return model.omega_pred * (c.f1 - c.f0);
}

RealMatrix true_cate_gradient(const OutcomeModel& model, const FeatureIndexSets& sets,
                              const RealMatrix& x) {
  check_sets(model, sets, x.cols());
  RealMatrix g = RealMatrix::Zero(x.rows(), x.cols());
  auto add = [&](const IndexSet& s, const RealVector& a, double sign) {
    const RealVector lin = projection(x, s, a);
    for (Index r = 0; r < x.rows(); ++r) {
      const double slope = sign * model.omega_pred * blend_slope(model, lin(r));
      for (std::size_t k = 0; k < s.size(); ++k) g(r, s[k]) += slope * a(static_cast<Index>(k));
    }
  };
  add(sets.pred1, model.alpha1, 1.0);
  add(sets.pred0, model.alpha0, -1.0);
  return g;
}

// ---------------------------------------------------------------- propensity

PropensityKind propensity_kind_from_string(std::string_view s) {
  if (s == "uniform") return PropensityKind::uniform;
  if (s == "predictive" || s == "predictive_confounding") return PropensityKind::predictive_confounding;
  if (s == "prognostic" || s == "prognostic_confounding") return PropensityKind::prognostic_confounding;
  if (s == "nonconfounded") return PropensityKind::nonconfounded;
  throw InvalidConfig("unknown propensity kind '" + std::string(s) + "'");
}

std::string_view to_string(PropensityKind k) {
  switch (k) {
    case PropensityKind::uniform: return "uniform";
    case PropensityKind::predictive_confounding: return "predictive_confounding";
    case PropensityKind::prognostic_confounding: return "prognostic_confounding";
    case PropensityKind::nonconfounded: return "nonconfounded";
  }
  return "?";
}

namespace {

RealVector confounding_signal(const PropensitySpec& spec, const OutcomeModel& model,
                              const FeatureIndexSets& sets, const RealMatrix& x) {
  switch (spec.kind) {
    case PropensityKind::predictive_confounding: {
      const ComponentColumns c = eval_components(model, sets, x);
      return c.f1 - c.f0;
    }
    case PropensityKind::prognostic_confounding:
      return eval_components(model, sets, x).mu_prog;
    case PropensityKind::nonconfounded: {
      const Index j = *spec.irrelevant_index;
      if (j < 0 || j >= x.cols()) throw ShapeError("irrelevant index out of range");
      return x.col(j);
    }
    case PropensityKind::uniform: break;
  }
  return RealVector::Zero(x.rows());
}

}  // namespace

PropensityScores propensity_scores(const PropensitySpec& spec, const OutcomeModel& model,
                                   const FeatureIndexSets& sets, const RealMatrix& x_train,
                                   const RealMatrix& x_query) {
  if (x_train.cols() != x_query.cols()) throw ShapeError("propensity: train/query width differs");
  PropensityScores out;
  if (spec.kind == PropensityKind::uniform) {
    out.pi = RealVector::Constant(x_query.rows(), 0.5);
    return out;
  }
  if (!(spec.omega_pi >= 0.0) || !std::isfinite(spec.omega_pi)) {
    throw InvalidConfig("omega_pi must be finite and >= 0");
  }
  if (spec.kind == PropensityKind::nonconfounded) {
    if (!spec.irrelevant_index) throw InvalidConfig("nonconfounded propensity needs an irrelevant index");
    const IndexSet relevant = [&] {
      IndexSet s = sets.prog;
      s.insert(s.end(), sets.pred0.begin(), sets.pred0.end());
      s.insert(s.end(), sets.pred1.begin(), sets.pred1.end());
      return s;
    }();
    if (std::find(relevant.begin(), relevant.end(), *spec.irrelevant_index) != relevant.end()) {
      throw InvalidConfig("irrelevant index must lie outside the prognostic and predictive sets");
    }
  }
  if (x_train.rows() < 1) throw InvalidConfig("propensity: empty training covariates");

  const RealVector psi_train = confounding_signal(spec, model, sets, x_train);
  ZScoreStats stats;
  stats.mean = psi_train.mean();
  stats.std = std::sqrt((psi_train.array() - stats.mean).square().mean());
  if (!(stats.std > 1e-12 * std::max(1.0, std::abs(stats.mean)))) {
    throw NormalizationError("propensity: confounding signal is constant over training units");
  }
  const RealVector psi = confounding_signal(spec, model, sets, x_query);
  out.pi = psi.unaryExpr([&](double v) {
    const double z = spec.omega_pi * (v - stats.mean) / stats.std;
    return z >= 0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
  });
  out.stats = stats;
  return out;
}

// ---------------------------------------------------------------- datasets

SemiSyntheticDataset::SemiSyntheticDataset(ObservedData observed, std::vector<std::string> names,
                                           GroundTruth truth)
    : observed_(std::move(observed)), names_(std::move(names)), truth_(std::move(truth)) {}

SemiSyntheticDataset SemiSyntheticDataset::subset(const IndexSet& rows) const {
  ObservedData o{observed_.x(rows, Eigen::all), observed_.w(rows), observed_.y(rows)};
  GroundTruth t = truth_;
  t.y0 = truth_.y0(rows);
  t.y1 = truth_.y1(rows);
  t.tau = truth_.tau(rows);
  t.pi = truth_.pi(rows);
  return SemiSyntheticDataset(std::move(o), names_, std::move(t));
}

RealVector sample_treatments(const RealVector& pi, Rng& rng) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  RealVector w(pi.size());
  for (Index i = 0; i < pi.size(); ++i) w(i) = unit(rng) < pi(i) ? 1.0 : 0.0;
  return w;
}

SemiSyntheticDataset generate_dataset(const CovariateMatrix& x, const FeatureIndexSets& sets,
                                      const OutcomeModel& model, PropensitySpec spec, double sigma,
                                      Seed seed) {
  if (!(sigma >= 0.0) || !std::isfinite(sigma)) throw InvalidConfig("sigma must be finite and >= 0");
  const Index n = x.units();
  const Index d = x.features();
  check_sets(model, sets, d);

  if (spec.kind == PropensityKind::nonconfounded && !spec.irrelevant_index) {
    std::vector<bool> used(static_cast<std::size_t>(d), false);
    for (const IndexSet* s : {&sets.prog, &sets.pred0, &sets.pred1}) {
      for (Index i : *s) used[static_cast<std::size_t>(i)] = true;
    }
    IndexSet candidates;
    for (Index i = 0; i < d; ++i) {
      if (!used[static_cast<std::size_t>(i)]) candidates.push_back(i);
    }
    if (candidates.empty()) throw InvalidConfig("no irrelevant feature left for nonconfounded propensity");
    Rng rng = seed.child("irrelevant").engine();
    std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
    spec.irrelevant_index = candidates[pick(rng)];
  }

  const ComponentColumns c = eval_components(model, sets, x.x);
  GroundTruth truth;
  truth.y0 = c.mu_prog + model.omega_pred * c.f0;
  truth.y1 = c.mu_prog + model.omega_pred * c.f1;
  truth.tau = model.omega_pred * (c.f1 - c.f0);
  truth.pi = propensity_scores(spec, model, sets, x.x, x.x).pi;
  truth.sets = sets;
  truth.model = model;
  truth.spec = spec;
  truth.sigma = sigma;

  Rng treat_rng = seed.child("treatment").engine();
  Rng noise_rng = seed.child("noise").engine();
  ObservedData o;
  o.x = x.x;
  o.y.resize(n);
  o.w = sample_treatments(truth.pi, treat_rng);
  std::normal_distribution<double> noise(0.0, sigma > 0 ? sigma : 1.0);
  for (Index i = 0; i < n; ++i) {
    const double eps = sigma > 0 ? noise(noise_rng) : 0.0;
    o.y(i) = o.w(i) * truth.y1(i) + (1.0 - o.w(i)) * truth.y0(i) + eps;
  }
  return SemiSyntheticDataset(std::move(o), x.names, std::move(truth));
}

std::pair<SemiSyntheticDataset, SemiSyntheticDataset> train_test_split(
    const SemiSyntheticDataset& ds, double test_fraction, Rng& rng) {
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
    throw InvalidConfig("test fraction must lie in (0, 1)");
  }
  const Index n = ds.units();
  const auto n_test = static_cast<Index>(std::llround(test_fraction * static_cast<double>(n)));
  if (n_test < 1 || n_test >= n) throw InvalidConfig("degenerate train/test partition");
  IndexSet idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Index{0});
  std::shuffle(idx.begin(), idx.end(), rng);
  IndexSet test(idx.begin(), idx.begin() + n_test);
  IndexSet train(idx.begin() + n_test, idx.end());
  std::sort(test.begin(), test.end());
  std::sort(train.begin(), train.end());
  return {ds.subset(train), ds.subset(test)};
}

// ---------------------------------------------------------------- files

namespace {

json sets_to_json(const FeatureIndexSets& s) {
  return {{"prog", s.prog}, {"pred0", s.pred0}, {"pred1", s.pred1}};
}

std::vector<double> to_std(const RealVector& v) { return {v.data(), v.data() + v.size()}; }

RealVector from_std(const std::vector<double>& v) {
  return Eigen::Map<const RealVector>(v.data(), static_cast<Index>(v.size()));
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw IoError("cannot write " + p.string());
  return out;
}

std::filesystem::path with_suffix(const std::filesystem::path& prefix, const std::string& suffix) {
  return prefix.string() + suffix;
}

}  // namespace

void export_dataset(const SemiSyntheticDataset& ds, const std::filesystem::path& prefix) {
  const ObservedData& o = ds.observed();
  const GroundTruth& t = ds.truth();
  {
    std::ofstream out = open_out(with_suffix(prefix, ".csv"));
    std::vector<std::string> header = {"unit_id", "w", "y"};
    for (Index j = 0; j < o.features(); ++j) header.push_back("x_" + std::to_string(j));
    csv::write_row(out, header);
    for (Index i = 0; i < o.units(); ++i) {
      std::vector<std::string> row = {std::to_string(i), o.w(i) > 0.5 ? "1" : "0",
                                      csv::format_real(o.y(i))};
      for (Index j = 0; j < o.features(); ++j) row.push_back(csv::format_real(o.x(i, j)));
      csv::write_row(out, row);
    }
  }
  {
    std::ofstream out = open_out(with_suffix(prefix, "_truth.csv"));
    csv::write_row(out, {"unit_id", "y0", "y1", "tau", "pi"});
    for (Index i = 0; i < o.units(); ++i) {
      csv::write_row(out, {std::to_string(i), csv::format_real(t.y0(i)), csv::format_real(t.y1(i)),
                           csv::format_real(t.tau(i)), csv::format_real(t.pi(i))});
    }
  }
  json side;
  side["feature_names"] = ds.feature_names();
  side["sets"] = sets_to_json(t.sets);
  side["model"] = {{"alpha_prog", to_std(t.model.alpha_prog)},
                   {"alpha0", to_std(t.model.alpha0)},
                   {"alpha1", to_std(t.model.alpha1)},
                   {"chi", std::string(to_string(t.model.chi))},
                   {"omega_nl", t.model.omega_nl},
                   {"omega_pred", t.model.omega_pred}};
  side["sigma"] = t.sigma;
  side["propensity"] = {{"kind", std::string(to_string(t.spec.kind))}, {"omega_pi", t.spec.omega_pi}};
  if (t.spec.irrelevant_index) side["propensity"]["irrelevant_index"] = *t.spec.irrelevant_index;
  std::ofstream out = open_out(with_suffix(prefix, "_truth.json"));
  out << side.dump(2) << '\n';
}

ObservedData read_observed_csv(const std::filesystem::path& path) {
  const csv::Table t = csv::read_file(path);
  const std::size_t cw = t.column("w");
  const std::size_t cy = t.column("y");
  std::vector<std::size_t> cx;
  for (std::size_t j = 0;; ++j) {
    const std::string name = "x_" + std::to_string(j);
    const auto it = std::find(t.header.begin(), t.header.end(), name);
    if (it == t.header.end()) break;
    cx.push_back(static_cast<std::size_t>(it - t.header.begin()));
  }
  if (cx.empty()) throw ParseError(path.string() + ": no x_0.. columns");
  ObservedData o;
  const auto n = static_cast<Index>(t.rows.size());
  o.x.resize(n, static_cast<Index>(cx.size()));
  o.w.resize(n);
  o.y.resize(n);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const auto i = static_cast<Index>(r);
    o.w(i) = csv::parse_real(t.rows[r][cw], r + 1, cw);
    o.y(i) = csv::parse_real(t.rows[r][cy], r + 1, cy);
    for (std::size_t j = 0; j < cx.size(); ++j) {
      o.x(i, static_cast<Index>(j)) = csv::parse_real(t.rows[r][cx[j]], r + 1, cx[j]);
    }
  }
  return o;
}

SemiSyntheticDataset import_dataset(const std::filesystem::path& prefix) {
  ObservedData o = read_observed_csv(with_suffix(prefix, ".csv"));
  const csv::Table tt = csv::read_file(with_suffix(prefix, "_truth.csv"));
  std::ifstream js(with_suffix(prefix, "_truth.json"));
  if (!js) throw IoError("cannot open " + with_suffix(prefix, "_truth.json").string());
  json side;
  try {
    side = json::parse(js);
  } catch (const json::exception& e) {
    throw ParseError(std::string("truth sidecar: ") + e.what());
  }
  GroundTruth t;
  const auto n = static_cast<Index>(tt.rows.size());
  if (n != o.units()) throw ParseError("truth file row count differs from dataset");
  t.y0.resize(n);
  t.y1.resize(n);
  t.tau.resize(n);
  t.pi.resize(n);
  const std::size_t c0 = tt.column("y0"), c1 = tt.column("y1"), ct = tt.column("tau"),
                    cp = tt.column("pi");
  for (std::size_t r = 0; r < tt.rows.size(); ++r) {
    const auto i = static_cast<Index>(r);
    t.y0(i) = csv::parse_real(tt.rows[r][c0], r + 1, c0);
    t.y1(i) = csv::parse_real(tt.rows[r][c1], r + 1, c1);
    t.tau(i) = csv::parse_real(tt.rows[r][ct], r + 1, ct);
    t.pi(i) = csv::parse_real(tt.rows[r][cp], r + 1, cp);
  }
  try {
    t.sets.prog = side.at("sets").at("prog").get<IndexSet>();
    t.sets.pred0 = side.at("sets").at("pred0").get<IndexSet>();
    t.sets.pred1 = side.at("sets").at("pred1").get<IndexSet>();
    const json& m = side.at("model");
    t.model.alpha_prog = from_std(m.at("alpha_prog").get<std::vector<double>>());
    t.model.alpha0 = from_std(m.at("alpha0").get<std::vector<double>>());
    t.model.alpha1 = from_std(m.at("alpha1").get<std::vector<double>>());
    t.model.chi = nonlinearity_from_string(m.at("chi").get<std::string>());
    t.model.omega_nl = m.at("omega_nl").get<double>();
    t.model.omega_pred = m.at("omega_pred").get<double>();
    t.sigma = side.at("sigma").get<double>();
    const json& p = side.at("propensity");
    t.spec.kind = propensity_kind_from_string(p.at("kind").get<std::string>());
    t.spec.omega_pi = p.at("omega_pi").get<double>();
    if (p.contains("irrelevant_index")) t.spec.irrelevant_index = p.at("irrelevant_index").get<Index>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("truth sidecar: ") + e.what());
  }
  auto names = side.value("feature_names", std::vector<std::string>{});
  return SemiSyntheticDataset(std::move(o), std::move(names), std::move(t));
}

}  // namespace itebench
