#pragma once

// Comparison of runs x epochs result matrices from different RNG sources:
// per-epoch Welch t-tests, Holm-Bonferroni adjustment across epochs, the
// minimum-adjusted-p criterion, and Pearson correlation of epoch means.

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

namespace qbias {

/// Row-major runs x epochs matrix of a per-epoch metric.
class RunMatrix {
 public:
  /// Throws Shape unless runs >= 2, epochs >= 1 and values.size() == runs * epochs.
  RunMatrix(std::string source_label, std::size_t runs, std::size_t epochs, std::vector<double> values);

  const std::string& source_label() const noexcept { return label_; }
  std::size_t runs() const noexcept { return runs_; }
  std::size_t epochs() const noexcept { return epochs_; }
  double operator()(std::size_t run, std::size_t epoch) const noexcept { return values_[run * epochs_ + epoch]; }
  std::span<const double> row(std::size_t run) const noexcept {
    return std::span(values_).subspan(run * epochs_, epochs_);
  }
  std::span<const double> values() const noexcept { return values_; }

  std::vector<double> epoch_column(std::size_t epoch) const;
  /// Mean over runs for each epoch.
  std::vector<double> epoch_means() const;

  /// CSV, one row per run, one column per epoch, header `run,epoch_1,...`.
  void write_csv(std::ostream& out) const;
  static RunMatrix read_csv(std::istream& in, std::string source_label);

  bool operator==(const RunMatrix&) const = default;

 private:
  std::string label_;
  std::size_t runs_;
  std::size_t epochs_;
  std::vector<double> values_;
};

struct WelchResult {
  double t = 0.0;
  double dof = 0.0;
  double p_value = 1.0;  // two tailed
};

/// Welch's unequal-variance t-test. Both samples constant: p = 1 if the
/// means agree, else 0. Throws Domain if a sample has fewer than two values.
WelchResult welch_t_test(std::span<const double> x, std::span<const double> y);

/// Holm step-down adjustment; output in input order, capped at 1. Throws Domain
/// for inputs outside [0, 1].
std::vector<double> holm_bonferroni(std::span<const double> p_values);

struct ComparisonReport {
  std::string x_label;
  std::string y_label;
  std::vector<double> raw_p;
  std::vector<double> adjusted_p;
  double min_adjusted_p = 1.0;
  double pearson_rho = 1.0;
  double alpha = 0.05;
  bool no_significant_difference = true;  // min_adjusted_p > alpha
};

/// Throws Shape when epoch counts differ.
ComparisonReport pairwise_epoch_comparison(const RunMatrix& x, const RunMatrix& y, double alpha = 0.05);

/// Pearson correlation of the mean-over-runs curves (centered). Throws
/// Degenerate when either curve is constant, Shape on epoch mismatch.
double pearson_epoch_correlation(const RunMatrix& x, const RunMatrix& y);

struct ComparisonSummary {
  std::vector<ComparisonReport> pairs;  // lexicographic by (x_label, y_label)
  double min_adjusted_p = 1.0;          // over all pairs
  double alpha = 0.05;
  bool no_significant_difference = true;
};

/// All unordered pairs of distinct matrices; labels sorted, x < y.
ComparisonSummary compare_all(std::span<const RunMatrix> matrices, double alpha = 0.05);

/// `x,y,min_adjusted_p,rho`
void write_comparison_csv(std::ostream& out, const ComparisonSummary& summary);
nlohmann::json to_json(const ComparisonReport& report);
nlohmann::json to_json(const ComparisonSummary& summary);

}  // namespace qbias
