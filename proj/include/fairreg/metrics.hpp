#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "fairreg/dataset.hpp"

namespace fairreg {

/// Half-open range [lo, hi) split into `count` equal-width bins. The value hi
/// itself is clamped into the last bin.
struct BinSpec {
  int count = 4;
  double lo = 0.0;
  double hi = 1.0;
};

int bin_of(double v, const BinSpec& bins);
std::vector<int> bin_assign(std::span<const double> values, const BinSpec& bins);

enum class PriorKind { Uniform, Background, Subgroup, Explicit };

/// Weighting of the per-bin gaps in the conditional metrics.
///   uniform    - every surviving bin weighted equally
///   background - empirical bin frequency among out-group negatives
///   subgroup   - empirical bin frequency among in-group negatives
///   explicit   - caller-supplied weights, one per bin
struct Prior {
  PriorKind kind = PriorKind::Uniform;
  std::vector<double> weights;  // explicit only

  static Prior uniform() { return {PriorKind::Uniform, {}}; }
  static Prior background() { return {PriorKind::Background, {}}; }
  static Prior subgroup() { return {PriorKind::Subgroup, {}}; }
  static Prior explicit_weights(std::vector<double> w) {
    return {PriorKind::Explicit, std::move(w)};
  }
};

std::string prior_name(const Prior& prior);
Prior prior_from_name(const std::string& name);

/// One reported number plus the evidence behind it. A cell with no eligible
/// examples stays undefined instead of silently reading 0. `value` may be
/// +inf for the documented infinite-ratio sentinel.
struct MetricCell {
  double value = std::numeric_limits<double>::quiet_NaN();
  bool defined = false;
  std::int64_t count = 0;
  double se = std::numeric_limits<double>::quiet_NaN();  // multi-run standard error
  bool has_se = false;

  static MetricCell of(double v, std::int64_t n) { return {v, true, n, 0.0, false}; }
  static MetricCell undefined(std::int64_t n = 0) { return {std::numeric_limits<double>::quiet_NaN(), false, n, 0.0, false}; }
};

/// Fraction of negatives (y < tau) predicted positive (yhat >= tau).
/// Throws UndefinedMetricError when there is no negative example.
double fpr(std::span<const double> preds, std::span<const double> labels, double tau);

/// Mirror over y >= tau, counting predictions < tau.
double fnr(std::span<const double> preds, std::span<const double> labels, double tau);

/// FPR over group members divided by FPR over non-members. A zero
/// denominator yields the +inf sentinel with counts attached; a side without
/// negatives throws UndefinedMetricError.
MetricCell fpr_ratio(std::span<const double> preds, const Dataset& ds,
                     const std::string& group, double tau);

/// P(yhat >= tau | s=1) - P(yhat >= tau | s=0), signed.
double demographic_parity_gap(std::span<const double> preds, const Dataset& ds,
                              const std::string& group, double tau);

/// FPR(s=1) - FPR(s=0), signed.
double eo_gap(std::span<const double> preds, const Dataset& ds,
              const std::string& group, double tau);

/// Per-bin mean-label difference between groups, binned by prediction.
/// Predictions are clamped into the bin range before binning.
struct CalibrationRow {
  int bin = 0;
  double lo = 0.0, hi = 0.0;
  std::int64_t n_in = 0, n_out = 0;
  double mean_in = 0.0, mean_out = 0.0;  // NaN when the side is empty
  MetricCell gap;
};

std::vector<CalibrationRow> calibration_gap(std::span<const double> preds,
                                            std::span<const double> labels,
                                            const Dataset& ds, const std::string& group,
                                            const BinSpec& bins);

/// Per-bin FPR table behind the conditional metrics. Bins that fail the
/// min-cell-count filter on either side are kept in the table but carry
/// used = false and weight 0.
struct CondBinRow {
  int bin = 0;
  double lo = 0.0, hi = 0.0;
  std::int64_t n_in = 0, n_out = 0;  // negatives per side
  double fpr_in = 0.0, fpr_out = 0.0;  // NaN when the side is empty
  bool used = false;
  double weight = 0.0;  // renormalized prior weight
};

struct CondResult {
  MetricCell value;
  std::vector<CondBinRow> bins;
};

/// EOGap = sum_a p_a [FPR(s=1, bin a) - FPR(s=0, bin a)] over negatives,
/// conditioning on the aggregated rating binned by `bins`. Bins with fewer
/// than min_cell_count negatives in either group are dropped and the prior
/// renormalized; all bins dropped throws UndefinedMetricError.
CondResult conditional_eo_gap(std::span<const double> preds, const Dataset& ds,
                              const std::string& group, double tau, const BinSpec& bins,
                              const Prior& prior, int min_cell_count = 20);

/// (sum_a p_a FPR(s=1, a)) / (sum_a p_a FPR(s=0, a)); zero denominator yields
/// the +inf sentinel.
CondResult conditional_fpr_ratio(std::span<const double> preds, const Dataset& ds,
                                 const std::string& group, double tau, const BinSpec& bins,
                                 const Prior& prior, int min_cell_count = 20);

/// One row of a per-bin table inside a report; every side is a cell so that
/// multi-run aggregation can attach standard errors uniformly.
struct ReportBinRow {
  int bin = 0;
  double lo = 0.0, hi = 0.0;
  MetricCell in_cell, out_cell, gap;
};

/// Everything reported for one group.
struct GroupReport {
  MetricCell fpr_in, fpr_out, fnr_in, fnr_out;
  MetricCell fpr_ratio;
  MetricCell dp_gap;
  MetricCell eo_gap;
  std::map<std::string, MetricCell> cond_eo_gap;     // keyed by prior name
  std::map<std::string, MetricCell> cond_fpr_ratio;  // keyed by prior name
  std::vector<ReportBinRow> fpr_bins;                // FPR per rating bin
  std::vector<ReportBinRow> calibration_bins;        // mean label per prediction bin
};

/// Full evaluation of one prediction vector against one dataset, or the
/// cell-wise aggregate of several runs.
struct MetricsReport {
  double tau = 0.5;
  BinSpec rating_bins;       // conditioning bins over [0, tau)
  BinSpec calibration_bins;  // prediction bins over [0, 1]
  int min_cell_count = 20;
  std::vector<std::string> priors;
  int runs = 1;
  MetricCell mse;
  std::map<std::string, GroupReport> groups;
};

/// Cell-wise mean and standard error (stddev / sqrt(n), sample stddev) over
/// structurally identical reports. A cell undefined in any run stays
/// undefined. Throws Error on a structural mismatch or fewer than 2 reports.
MetricsReport aggregate_runs(const std::vector<MetricsReport>& reports);

}  // namespace fairreg
