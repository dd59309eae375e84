#include "qbias/compare.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "qbias/error.hpp"
#include "qbias/special.hpp"

namespace qbias {

namespace {

std::string g17(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
};

Moments moments(std::span<const double> s) {
  Moments m;
  const double n = static_cast<double>(s.size());
  m.mean = std::accumulate(s.begin(), s.end(), 0.0) / n;
  double sq = 0.0;
  for (double v : s) sq += (v - m.mean) * (v - m.mean);
  m.variance = sq / (n - 1.0);
  return m;
}

}  // namespace

RunMatrix::RunMatrix(std::string source_label, std::size_t runs, std::size_t epochs, std::vector<double> values)
    : label_(std::move(source_label)), runs_(runs), epochs_(epochs), values_(std::move(values)) {
  if (runs_ < 2) fail(ErrorKind::Shape, "run matrix needs at least two runs");
  if (epochs_ < 1) fail(ErrorKind::Shape, "run matrix needs at least one epoch");
  if (values_.size() != runs_ * epochs_) fail(ErrorKind::Shape, "run matrix is not rectangular");
}

std::vector<double> RunMatrix::epoch_column(std::size_t epoch) const {
  std::vector<double> col(runs_);
  for (std::size_t r = 0; r < runs_; ++r) col[r] = (*this)(r, epoch);
  return col;
}

std::vector<double> RunMatrix::epoch_means() const {
  std::vector<double> means(epochs_, 0.0);
  for (std::size_t r = 0; r < runs_; ++r) {
    for (std::size_t e = 0; e < epochs_; ++e) means[e] += (*this)(r, e);
  }
  for (double& m : means) m /= static_cast<double>(runs_);
  return means;
}

void RunMatrix::write_csv(std::ostream& out) const {
  out << "run";
  for (std::size_t e = 0; e < epochs_; ++e) out << ",epoch_" << (e + 1);
  out << '\n';
  for (std::size_t r = 0; r < runs_; ++r) {
    out << (r + 1);
    for (std::size_t e = 0; e < epochs_; ++e) out << ',' << g17((*this)(r, e));
    out << '\n';
  }
}

RunMatrix RunMatrix::read_csv(std::istream& in, std::string source_label) {
  std::string line;
  if (!std::getline(in, line)) fail(ErrorKind::Parse, "run matrix CSV is empty");
  const auto epochs = static_cast<std::size_t>(std::count(line.begin(), line.end(), ','));
  std::vector<double> values;
  std::size_t runs = 0;
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    std::istringstream row(line);
    std::string cell;
    std::getline(row, cell, ',');  // run index
    std::size_t cols = 0;
    while (std::getline(row, cell, ',')) {
      try {
        values.push_back(std::stod(cell));
      } catch (const std::exception&) {
        fail(ErrorKind::Parse, "run matrix CSV: bad number '" + cell + "'");
      }
      ++cols;
    }
    if (cols != epochs) fail(ErrorKind::Shape, "run matrix CSV: ragged row " + std::to_string(runs + 1));
    ++runs;
  }
  return RunMatrix(std::move(source_label), runs, epochs, std::move(values));
}

WelchResult welch_t_test(std::span<const double> x, std::span<const double> y) {
  if (x.size() < 2 || y.size() < 2) fail(ErrorKind::Domain, "Welch's t-test needs at least two values per sample");
  const Moments mx = moments(x);
  const Moments my = moments(y);
  const double vx = mx.variance / static_cast<double>(x.size());
  const double vy = my.variance / static_cast<double>(y.size());
  const double se2 = vx + vy;

  WelchResult r;
  if (!(se2 > 0.0)) {
    // both samples constant
    r.t = 0.0;
    r.dof = static_cast<double>(x.size() + y.size() - 2);
    r.p_value = mx.mean == my.mean ? 1.0 : 0.0;
    return r;
  }
  r.t = (mx.mean - my.mean) / std::sqrt(se2);
  r.dof = se2 * se2 /
          (vx * vx / static_cast<double>(x.size() - 1) + vy * vy / static_cast<double>(y.size() - 1));
  r.p_value = special::student_t_two_tailed(r.t, r.dof);
  return r;
}

std::vector<double> holm_bonferroni(std::span<const double> p_values) {
  for (double p : p_values) {
    if (!(p >= 0.0 && p <= 1.0)) fail(ErrorKind::Domain, "p-values must lie in [0, 1]");
  }
  const std::size_t m = p_values.size();
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return p_values[a] < p_values[b]; });
  std::vector<double> adjusted(m);
  double running = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double scaled = static_cast<double>(m - i) * p_values[order[i]];
    running = std::max(running, std::min(1.0, scaled));
    adjusted[order[i]] = running;
  }
  return adjusted;
}

double pearson_epoch_correlation(const RunMatrix& x, const RunMatrix& y) {
  if (x.epochs() != y.epochs()) fail(ErrorKind::Shape, "Pearson correlation needs equal epoch counts");
  auto centered = [](std::vector<double> v) {
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    for (double& e : v) e -= mean;
    return v;
  };
  const auto xc = centered(x.epoch_means());
  const auto yc = centered(y.epoch_means());
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xc.size(); ++i) {
    sxy += xc[i] * yc[i];
    sxx += xc[i] * xc[i];
    syy += yc[i] * yc[i];
  }
  if (!(sxx > 0.0) || !(syy > 0.0)) {
    fail(ErrorKind::Degenerate, "Pearson correlation undefined for a constant epoch-mean curve");
  }
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

ComparisonReport pairwise_epoch_comparison(const RunMatrix& x, const RunMatrix& y, double alpha) {
  if (x.epochs() != y.epochs()) {
    fail(ErrorKind::Shape, "cannot compare " + std::to_string(x.epochs()) + " epochs with " +
                               std::to_string(y.epochs()));
  }
  ComparisonReport report;
  report.x_label = x.source_label();
  report.y_label = y.source_label();
  report.alpha = alpha;
  report.raw_p.reserve(x.epochs());
  for (std::size_t e = 0; e < x.epochs(); ++e) {
    report.raw_p.push_back(welch_t_test(x.epoch_column(e), y.epoch_column(e)).p_value);
  }
  report.adjusted_p = holm_bonferroni(report.raw_p);
  report.min_adjusted_p = *std::min_element(report.adjusted_p.begin(), report.adjusted_p.end());
  report.no_significant_difference = report.min_adjusted_p > alpha;
  report.pearson_rho = pearson_epoch_correlation(x, y);
  return report;
}

ComparisonSummary compare_all(std::span<const RunMatrix> matrices, double alpha) {
  std::vector<const RunMatrix*> sorted;
  for (const auto& m : matrices) sorted.push_back(&m);
  std::stable_sort(sorted.begin(), sorted.end(),
                   [](const RunMatrix* a, const RunMatrix* b) { return a->source_label() < b->source_label(); });
  ComparisonSummary summary;
  summary.alpha = alpha;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    for (std::size_t j = i + 1; j < sorted.size(); ++j) {
      summary.pairs.push_back(pairwise_epoch_comparison(*sorted[i], *sorted[j], alpha));
      summary.min_adjusted_p = std::min(summary.min_adjusted_p, summary.pairs.back().min_adjusted_p);
    }
  }
  summary.no_significant_difference = summary.min_adjusted_p > alpha;
  return summary;
}

void write_comparison_csv(std::ostream& out, const ComparisonSummary& summary) {
  out << "x,y,min_adjusted_p,rho\n";
  for (const auto& p : summary.pairs) {
    out << p.x_label << ',' << p.y_label << ',' << g17(p.min_adjusted_p) << ',' << g17(p.pearson_rho) << '\n';
  }
}

nlohmann::json to_json(const ComparisonReport& report) {
  return {{"x", report.x_label},
          {"y", report.y_label},
          {"raw_p", report.raw_p},
          {"adjusted_p", report.adjusted_p},
          {"min_adjusted_p", report.min_adjusted_p},
          {"rho", report.pearson_rho},
          {"alpha", report.alpha},
          {"no_significant_difference", report.no_significant_difference}};
}

nlohmann::json to_json(const ComparisonSummary& summary) {
  nlohmann::json pairs = nlohmann::json::array();
  for (const auto& p : summary.pairs) pairs.push_back(to_json(p));
  return {{"pairs", std::move(pairs)},
          {"min_adjusted_p", summary.min_adjusted_p},
          {"alpha", summary.alpha},
          {"no_significant_difference", summary.no_significant_difference}};
}

}  // namespace qbias
