#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "itebench/errors.hpp"
#include "itebench/harness.hpp"

namespace itebench {

PlotMetric plot_metric_from_string(std::string_view s) {
  if (s == "attr_pred") return PlotMetric::attr_pred;
  if (s == "attr_prog") return PlotMetric::attr_prog;
  if (s == "pehe") return PlotMetric::pehe;
  throw InvalidConfig("unknown plot metric '" + std::string(s) + "'");
}

std::string_view to_string(PlotMetric m) {
  switch (m) {
    case PlotMetric::attr_pred: return "attr_pred";
    case PlotMetric::attr_prog: return "attr_prog";
    case PlotMetric::pehe: return "pehe";
  }
  return "?";
}

bool use_log_axis(const std::vector<double>& xs) {
  if (xs.empty()) return false;
  const auto [lo, hi] = std::minmax_element(xs.begin(), xs.end());
  return *lo > 0.0 && *hi / *lo >= 100.0;
}

namespace {

constexpr double kWidth = 640, kHeight = 420;
constexpr double kLeft = 70, kRight = 150, kTop = 40, kBottom = 55;
constexpr const char* kPalette[] = {"#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
                                    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf"};

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

std::string label(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

const MetricSummary& pick(const AggregatePoint& p, PlotMetric m) {
  switch (m) {
    case PlotMetric::attr_pred: return p.attr_pred;
    case PlotMetric::attr_prog: return p.attr_prog;
    case PlotMetric::pehe: return p.pehe;
  }
  return p.attr_pred;
}

}  // namespace

std::string render_plot_svg(const std::vector<AggregatePoint>& points, PlotMetric metric,
                            const std::string& title) {
  std::vector<const AggregatePoint*> usable;
  for (const auto& p : points) {
    if (std::isfinite(pick(p, metric).mean)) usable.push_back(&p);
  }
  if (usable.empty()) throw InvalidConfig("plot: no aggregated points with a finite value");

  std::vector<double> xs;
  std::vector<std::string> learners;
  double y_lo = INFINITY, y_hi = -INFINITY;
  for (const AggregatePoint* p : usable) {
    xs.push_back(p->knob_value);
    if (std::find(learners.begin(), learners.end(), p->learner) == learners.end()) {
      learners.push_back(p->learner);
    }
    const MetricSummary& s = pick(*p, metric);
    const double se = std::isfinite(s.std_error) ? s.std_error : 0.0;
    y_lo = std::min(y_lo, s.mean - se);
    y_hi = std::max(y_hi, s.mean + se);
  }
  std::sort(xs.begin(), xs.end());
  xs.erase(std::unique(xs.begin(), xs.end()), xs.end());
  const bool log_x = use_log_axis(xs);
  auto tx = [&](double v) { return log_x ? std::log10(v) : v; };
  double x_lo = tx(xs.front()), x_hi = tx(xs.back());
  if (x_hi - x_lo <= 0) {
    x_lo -= 0.5;
    x_hi += 0.5;
  }
  if (y_hi - y_lo <= 0) {
    y_lo -= 0.5;
    y_hi += 0.5;
  }
  const double pad = 0.05 * (y_hi - y_lo);
  y_lo -= pad;
  y_hi += pad;

  const double plot_w = kWidth - kLeft - kRight;
  const double plot_h = kHeight - kTop - kBottom;
  auto px = [&](double v) { return kLeft + (tx(v) - x_lo) / (x_hi - x_lo) * plot_w; };
  auto py = [&](double v) { return kTop + (1.0 - (v - y_lo) / (y_hi - y_lo)) * plot_h; };

  std::ostringstream svg;
  svg << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kWidth << "\" height=\"" << kHeight
      << "\" viewBox=\"0 0 " << kWidth << ' ' << kHeight << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  svg << "<rect x=\"0\" y=\"0\" width=\"" << kWidth << "\" height=\"" << kHeight << "\" fill=\"white\"/>\n";
  if (!title.empty()) {
    svg << "<text x=\"" << num(kWidth / 2) << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">"
        << escape(title) << "</text>\n";
  }
  // axes
  svg << "<g stroke=\"black\" stroke-width=\"1\">\n";
  svg << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop + plot_h) << "\" x2=\"" << num(kLeft + plot_w)
      << "\" y2=\"" << num(kTop + plot_h) << "\"/>\n";
  svg << "<line x1=\"" << num(kLeft) << "\" y1=\"" << num(kTop) << "\" x2=\"" << num(kLeft) << "\" y2=\""
      << num(kTop + plot_h) << "\"/>\n";
  svg << "</g>\n";
  for (double v : xs) {
    svg << "<line x1=\"" << num(px(v)) << "\" y1=\"" << num(kTop + plot_h) << "\" x2=\"" << num(px(v))
        << "\" y2=\"" << num(kTop + plot_h + 5) << "\" stroke=\"black\"/>\n";
    svg << "<text x=\"" << num(px(v)) << "\" y=\"" << num(kTop + plot_h + 18)
        << "\" text-anchor=\"middle\">" << label(v) << "</text>\n";
  }
  for (int k = 0; k <= 4; ++k) {
    const double v = y_lo + (y_hi - y_lo) * k / 4.0;
    svg << "<line x1=\"" << num(kLeft - 5) << "\" y1=\"" << num(py(v)) << "\" x2=\"" << num(kLeft)
        << "\" y2=\"" << num(py(v)) << "\" stroke=\"black\"/>\n";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3g", v);
    svg << "<text x=\"" << num(kLeft - 8) << "\" y=\"" << num(py(v) + 4) << "\" text-anchor=\"end\">" << buf
        << "</text>\n";
  }
  const std::string knob = usable.front()->knob;
  svg << "<text x=\"" << num(kLeft + plot_w / 2) << "\" y=\"" << num(kHeight - 12)
      << "\" text-anchor=\"middle\">" << escape(knob) << (log_x ? " (log scale)" : "") << "</text>\n";
  svg << "<text transform=\"translate(16," << num(kTop + plot_h / 2)
      << ") rotate(-90)\" text-anchor=\"middle\">" << to_string(metric) << "</text>\n";

  for (std::size_t li = 0; li < learners.size(); ++li) {
    const char* color = kPalette[li % std::size(kPalette)];
    std::vector<const AggregatePoint*> series;
    for (const AggregatePoint* p : usable) {
      if (p->learner == learners[li]) series.push_back(p);
    }
    std::sort(series.begin(), series.end(),
              [](const AggregatePoint* a, const AggregatePoint* b) { return a->knob_value < b->knob_value; });
    svg << "<g class=\"series\" data-learner=\"" << escape(learners[li]) << "\">\n";
    if (series.size() > 1) {
      std::string band, line;
      for (const AggregatePoint* p : series) {
        const MetricSummary& s = pick(*p, metric);
        const double se = std::isfinite(s.std_error) ? s.std_error : 0.0;
        band += num(px(p->knob_value)) + "," + num(py(s.mean + se)) + " ";
        line += num(px(p->knob_value)) + "," + num(py(s.mean)) + " ";
      }
      for (auto it = series.rbegin(); it != series.rend(); ++it) {
        const MetricSummary& s = pick(**it, metric);
        const double se = std::isfinite(s.std_error) ? s.std_error : 0.0;
        band += num(px((*it)->knob_value)) + "," + num(py(s.mean - se)) + " ";
      }
      band.pop_back();
      line.pop_back();
      svg << "<polygon points=\"" << band << "\" fill=\"" << color << "\" fill-opacity=\"0.2\" stroke=\"none\"/>\n";
      svg << "<polyline points=\"" << line << "\" fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    } else {
      const MetricSummary& s = pick(*series.front(), metric);
      const double se = std::isfinite(s.std_error) ? s.std_error : 0.0;
      const double x = px(series.front()->knob_value);
      svg << "<line x1=\"" << num(x) << "\" y1=\"" << num(py(s.mean - se)) << "\" x2=\"" << num(x) << "\" y2=\""
          << num(py(s.mean + se)) << "\" stroke=\"" << color << "\" stroke-opacity=\"0.4\" stroke-width=\"6\"/>\n";
    }
    for (const AggregatePoint* p : series) {
      svg << "<circle cx=\"" << num(px(p->knob_value)) << "\" cy=\"" << num(py(pick(*p, metric).mean))
          << "\" r=\"3.5\" fill=\"" << color << "\"/>\n";
    }
    svg << "</g>\n";
    const double ly = kTop + 10 + 20.0 * static_cast<double>(li);
    svg << "<rect x=\"" << num(kLeft + plot_w + 15) << "\" y=\"" << num(ly - 6) << "\" width=\"14\" height=\"4\" fill=\""
        << color << "\"/>\n";
    svg << "<text x=\"" << num(kLeft + plot_w + 35) << "\" y=\"" << num(ly) << "\">" << escape(learners[li])
        << "</text>\n";
  }
  svg << "</svg>\n";
  return svg.str();
}

void emit_plot_svg(const std::vector<AggregatePoint>& points, PlotMetric metric,
                   const std::filesystem::path& path, const std::string& title) {
  const std::string body = render_plot_svg(points, metric, title);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << body;
}

}  // namespace itebench
