#include "fairreg/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "fairreg/common.hpp"

namespace fairreg {

namespace {

constexpr double kNan = std::numeric_limits<double>::quiet_NaN();
constexpr double kInf = std::numeric_limits<double>::infinity();

void check_bins(const BinSpec& bins) {
  if (bins.count < 1) throw ConfigError("bin count must be >= 1");
  if (!(bins.lo < bins.hi)) throw ConfigError("bin range must have lo < hi");
}

void check_lengths(std::span<const double> preds, std::span<const double> labels) {
  if (preds.size() != labels.size()) {
    throw ConfigError("prediction and label lengths differ: " + std::to_string(preds.size()) +
                      " vs " + std::to_string(labels.size()));
  }
}

// FPR over a list of dataset indices; n_neg receives the negative count.
double fpr_over(std::span<const double> preds, const Dataset& ds,
                const std::vector<std::size_t>& idx, double tau, std::int64_t* n_neg) {
  std::int64_t neg = 0;
  std::int64_t fp = 0;
  for (std::size_t i : idx) {
    if (ds.examples[i].label < tau) {
      ++neg;
      if (preds[i] >= tau) ++fp;
    }
  }
  *n_neg = neg;
  if (neg == 0) return kNan;
  return static_cast<double>(fp) / static_cast<double>(neg);
}

struct CondTable {
  std::vector<CondBinRow> rows;
  std::vector<int> survivors;  // indices into rows
  std::int64_t eligible = 0;   // negatives in surviving bins, both sides
};

// Shared scaffolding of the conditional metrics: bin the negatives of each
// side by label, apply the min-cell filter, attach renormalized prior
// weights. The conditioning feature is the aggregated rating itself.
CondTable cond_bin_table(std::span<const double> preds, const Dataset& ds,
                         const std::string& group, double tau, const BinSpec& bins,
                         const Prior& prior, int min_cell_count) {
  check_bins(bins);
  if (preds.size() != ds.size()) {
    throw ConfigError("prediction vector length does not match dataset size");
  }
  const GroupPartition part = partition_by_group(ds, group);

  CondTable table;
  const double width = (bins.hi - bins.lo) / bins.count;
  table.rows.resize(bins.count);
  for (int b = 0; b < bins.count; ++b) {
    table.rows[b].bin = b;
    table.rows[b].lo = bins.lo + b * width;
    table.rows[b].hi = bins.lo + (b + 1) * width;
    table.rows[b].fpr_in = kNan;
    table.rows[b].fpr_out = kNan;
  }

  std::vector<std::int64_t> fp_in(bins.count, 0), fp_out(bins.count, 0);
  auto tally = [&](const std::vector<std::size_t>& idx, bool in_group) {
    for (std::size_t i : idx) {
      const double y = ds.examples[i].label;
      if (y >= tau) continue;
      const int b = bin_of(y, bins);
      auto& row = table.rows[b];
      if (in_group) {
        ++row.n_in;
        if (preds[i] >= tau) ++fp_in[b];
      } else {
        ++row.n_out;
        if (preds[i] >= tau) ++fp_out[b];
      }
    }
  };
  tally(part.members, true);
  tally(part.others, false);

  // A side with zero negatives has no FPR, so the filter floor is 1 even
  // when min_cell_count is 0.
  const std::int64_t cell_floor = std::max<std::int64_t>(min_cell_count, 1);
  for (int b = 0; b < bins.count; ++b) {
    auto& row = table.rows[b];
    if (row.n_in > 0) row.fpr_in = static_cast<double>(fp_in[b]) / static_cast<double>(row.n_in);
    if (row.n_out > 0) row.fpr_out = static_cast<double>(fp_out[b]) / static_cast<double>(row.n_out);
    if (row.n_in >= cell_floor && row.n_out >= cell_floor) {
      row.used = true;
      table.survivors.push_back(b);
      table.eligible += row.n_in + row.n_out;
    }
  }
  if (table.survivors.empty()) {
    std::string counts;
    for (const auto& row : table.rows) {
      counts += " bin" + std::to_string(row.bin) + "=(" + std::to_string(row.n_in) + "," +
                std::to_string(row.n_out) + ")";
    }
    throw UndefinedMetricError("all bins dropped by min_cell_count=" +
                               std::to_string(min_cell_count) + "; (in,out) negatives per bin:" +
                               counts);
  }

  // Prior weights over the surviving bins, renormalized to sum to 1.
  switch (prior.kind) {
    case PriorKind::Uniform: {
      const double w = 1.0 / static_cast<double>(table.survivors.size());
      for (int b : table.survivors) table.rows[b].weight = w;
      break;
    }
    case PriorKind::Background:
    case PriorKind::Subgroup: {
      double total = 0.0;
      for (int b : table.survivors) {
        total += static_cast<double>(prior.kind == PriorKind::Background ? table.rows[b].n_out
                                                                         : table.rows[b].n_in);
      }
      for (int b : table.survivors) {
        const auto n = prior.kind == PriorKind::Background ? table.rows[b].n_out
                                                           : table.rows[b].n_in;
        table.rows[b].weight = static_cast<double>(n) / total;
      }
      break;
    }
    case PriorKind::Explicit: {
      if (static_cast<int>(prior.weights.size()) != bins.count) {
        throw ConfigError("explicit prior needs " + std::to_string(bins.count) +
                          " weights, got " + std::to_string(prior.weights.size()));
      }
      double sum = 0.0;
      for (double w : prior.weights) {
        if (w < 0.0) throw ConfigError("explicit prior weights must be nonnegative");
        sum += w;
      }
      if (std::abs(sum - 1.0) > 1e-12) {
        throw ConfigError("explicit prior weights must sum to 1");
      }
      double surviving = 0.0;
      for (int b : table.survivors) surviving += prior.weights[b];
      if (surviving <= 0.0) {
        throw UndefinedMetricError("explicit prior puts zero weight on every surviving bin");
      }
      for (int b : table.survivors) table.rows[b].weight = prior.weights[b] / surviving;
      break;
    }
  }
  return table;
}

}  // namespace

int bin_of(double v, const BinSpec& bins) {
  check_bins(bins);
  if (!(v >= bins.lo && v <= bins.hi)) {
    throw ConfigError("value " + std::to_string(v) + " outside bin range [" +
                      std::to_string(bins.lo) + ", " + std::to_string(bins.hi) + "]");
  }
  const int b = static_cast<int>(std::floor(bins.count * (v - bins.lo) / (bins.hi - bins.lo)));
  return std::min(b, bins.count - 1);
}

std::vector<int> bin_assign(std::span<const double> values, const BinSpec& bins) {
  std::vector<int> out;
  out.reserve(values.size());
  for (double v : values) out.push_back(bin_of(v, bins));
  return out;
}

std::string prior_name(const Prior& prior) {
  switch (prior.kind) {
    case PriorKind::Uniform: return "uniform";
    case PriorKind::Background: return "background";
    case PriorKind::Subgroup: return "subgroup";
    case PriorKind::Explicit: return "explicit";
  }
  return "unknown";
}

Prior prior_from_name(const std::string& name) {
  if (name == "uniform") return Prior::uniform();
  if (name == "background") return Prior::background();
  if (name == "subgroup") return Prior::subgroup();
  throw ConfigError("unknown prior '" + name + "' (uniform, background, subgroup)");
}

double fpr(std::span<const double> preds, std::span<const double> labels, double tau) {
  check_lengths(preds, labels);
  std::int64_t neg = 0;
  std::int64_t fp = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < tau) {
      ++neg;
      if (preds[i] >= tau) ++fp;
    }
  }
  if (neg == 0) {
    throw UndefinedMetricError("FPR undefined: no negative (y < tau) example among " +
                               std::to_string(labels.size()));
  }
  return static_cast<double>(fp) / static_cast<double>(neg);
}

double fnr(std::span<const double> preds, std::span<const double> labels, double tau) {
  check_lengths(preds, labels);
  std::int64_t pos = 0;
  std::int64_t fn = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= tau) {
      ++pos;
      if (preds[i] < tau) ++fn;
    }
  }
  if (pos == 0) {
    throw UndefinedMetricError("FNR undefined: no positive (y >= tau) example among " +
                               std::to_string(labels.size()));
  }
  return static_cast<double>(fn) / static_cast<double>(pos);
}

MetricCell fpr_ratio(std::span<const double> preds, const Dataset& ds,
                     const std::string& group, double tau) {
  if (preds.size() != ds.size()) {
    throw ConfigError("prediction vector length does not match dataset size");
  }
  const GroupPartition part = partition_by_group(ds, group);
  std::int64_t n_in = 0, n_out = 0;
  const double in = fpr_over(preds, ds, part.members, tau, &n_in);
  const double out = fpr_over(preds, ds, part.others, tau, &n_out);
  if (n_in == 0 || n_out == 0) {
    throw UndefinedMetricError("FPR ratio undefined for '" + group + "': " +
                               std::to_string(n_in) + " in-group and " + std::to_string(n_out) +
                               " out-group negatives");
  }
  MetricCell cell = MetricCell::of(out == 0.0 ? kInf : in / out, n_in + n_out);
  return cell;
}

double demographic_parity_gap(std::span<const double> preds, const Dataset& ds,
                              const std::string& group, double tau) {
  if (preds.size() != ds.size()) {
    throw ConfigError("prediction vector length does not match dataset size");
  }
  const GroupPartition part = partition_by_group(ds, group);
  if (part.members.empty() || part.others.empty()) {
    throw UndefinedMetricError("demographic parity gap undefined for '" + group + "': " +
                               std::to_string(part.members.size()) + " members, " +
                               std::to_string(part.others.size()) + " others");
  }
  auto rate = [&](const std::vector<std::size_t>& idx) {
    std::int64_t pos = 0;
    for (std::size_t i : idx) {
      if (preds[i] >= tau) ++pos;
    }
    return static_cast<double>(pos) / static_cast<double>(idx.size());
  };
  return rate(part.members) - rate(part.others);
}

double eo_gap(std::span<const double> preds, const Dataset& ds, const std::string& group,
              double tau) {
  if (preds.size() != ds.size()) {
    throw ConfigError("prediction vector length does not match dataset size");
  }
  const GroupPartition part = partition_by_group(ds, group);
  std::int64_t n_in = 0, n_out = 0;
  const double in = fpr_over(preds, ds, part.members, tau, &n_in);
  const double out = fpr_over(preds, ds, part.others, tau, &n_out);
  if (n_in == 0 || n_out == 0) {
    throw UndefinedMetricError("EO gap undefined for '" + group + "': " + std::to_string(n_in) +
                               " in-group and " + std::to_string(n_out) + " out-group negatives");
  }
  return in - out;
}

std::vector<CalibrationRow> calibration_gap(std::span<const double> preds,
                                            std::span<const double> labels, const Dataset& ds,
                                            const std::string& group, const BinSpec& bins) {
  check_bins(bins);
  check_lengths(preds, labels);
  if (preds.size() != ds.size()) {
    throw ConfigError("prediction vector length does not match dataset size");
  }
  const GroupPartition part = partition_by_group(ds, group);

  const double width = (bins.hi - bins.lo) / bins.count;
  std::vector<CalibrationRow> rows(bins.count);
  std::vector<double> sum_in(bins.count, 0.0), sum_out(bins.count, 0.0);
  for (int b = 0; b < bins.count; ++b) {
    rows[b].bin = b;
    rows[b].lo = bins.lo + b * width;
    rows[b].hi = bins.lo + (b + 1) * width;
  }
  auto tally = [&](const std::vector<std::size_t>& idx, bool in_group) {
    for (std::size_t i : idx) {
      const double p = std::clamp(preds[i], bins.lo, bins.hi);
      const int b = bin_of(p, bins);
      if (in_group) {
        ++rows[b].n_in;
        sum_in[b] += labels[i];
      } else {
        ++rows[b].n_out;
        sum_out[b] += labels[i];
      }
    }
  };
  tally(part.members, true);
  tally(part.others, false);
  for (int b = 0; b < bins.count; ++b) {
    auto& row = rows[b];
    row.mean_in = row.n_in > 0 ? sum_in[b] / static_cast<double>(row.n_in) : kNan;
    row.mean_out = row.n_out > 0 ? sum_out[b] / static_cast<double>(row.n_out) : kNan;
    if (row.n_in > 0 && row.n_out > 0) {
      row.gap = MetricCell::of(row.mean_in - row.mean_out, row.n_in + row.n_out);
    } else {
      row.gap = MetricCell::undefined(row.n_in + row.n_out);
    }
  }
  return rows;
}

CondResult conditional_eo_gap(std::span<const double> preds, const Dataset& ds,
                              const std::string& group, double tau, const BinSpec& bins,
                              const Prior& prior, int min_cell_count) {
  CondTable table = cond_bin_table(preds, ds, group, tau, bins, prior, min_cell_count);
  double gap = 0.0;
  if (prior.kind == PriorKind::Uniform) {
    // Computed as the plain mean so the uniform identity is exact.
    for (int b : table.survivors) gap += table.rows[b].fpr_in - table.rows[b].fpr_out;
    gap /= static_cast<double>(table.survivors.size());
  } else {
    for (int b : table.survivors) {
      gap += table.rows[b].weight * (table.rows[b].fpr_in - table.rows[b].fpr_out);
    }
  }
  return {MetricCell::of(gap, table.eligible), std::move(table.rows)};
}

CondResult conditional_fpr_ratio(std::span<const double> preds, const Dataset& ds,
                                 const std::string& group, double tau, const BinSpec& bins,
                                 const Prior& prior, int min_cell_count) {
  CondTable table = cond_bin_table(preds, ds, group, tau, bins, prior, min_cell_count);
  double num = 0.0, den = 0.0;
  if (prior.kind == PriorKind::Uniform) {
    for (int b : table.survivors) {
      num += table.rows[b].fpr_in;
      den += table.rows[b].fpr_out;
    }
    num /= static_cast<double>(table.survivors.size());
    den /= static_cast<double>(table.survivors.size());
  } else {
    for (int b : table.survivors) {
      num += table.rows[b].weight * table.rows[b].fpr_in;
      den += table.rows[b].weight * table.rows[b].fpr_out;
    }
  }
  return {MetricCell::of(den == 0.0 ? kInf : num / den, table.eligible),
          std::move(table.rows)};
}

namespace {

MetricCell agg_cells(const std::vector<const MetricCell*>& cells) {
  MetricCell out;
  std::int64_t count_sum = 0;
  bool any_undefined = false;
  bool any_inf = false;
  double sum = 0.0;
  for (const MetricCell* c : cells) {
    count_sum += c->count;
    if (!c->defined) {
      any_undefined = true;
    } else if (!std::isfinite(c->value)) {
      any_inf = true;
    } else {
      sum += c->value;
    }
  }
  const auto n = static_cast<double>(cells.size());
  out.count = static_cast<std::int64_t>(std::llround(static_cast<double>(count_sum) / n));
  if (any_undefined) return out;
  out.defined = true;
  if (any_inf) {
    out.value = kInf;
    return out;
  }
  out.value = sum / n;
  double sq = 0.0;
  for (const MetricCell* c : cells) sq += (c->value - out.value) * (c->value - out.value);
  out.se = std::sqrt(sq / (n - 1.0)) / std::sqrt(n);
  out.has_se = true;
  return out;
}

void check_same_structure(const MetricsReport& a, const MetricsReport& b) {
  const bool same =
      a.tau == b.tau && a.rating_bins.count == b.rating_bins.count &&
      a.rating_bins.lo == b.rating_bins.lo && a.rating_bins.hi == b.rating_bins.hi &&
      a.min_cell_count == b.min_cell_count && a.priors == b.priors &&
      a.groups.size() == b.groups.size();
  if (!same) throw Error("reports are structurally different");
  for (const auto& [name, g] : a.groups) {
    auto it = b.groups.find(name);
    if (it == b.groups.end()) throw Error("reports are structurally different: group " + name);
    if (g.fpr_bins.size() != it->second.fpr_bins.size() ||
        g.calibration_bins.size() != it->second.calibration_bins.size() ||
        g.cond_eo_gap.size() != it->second.cond_eo_gap.size() ||
        g.cond_fpr_ratio.size() != it->second.cond_fpr_ratio.size()) {
      throw Error("reports are structurally different: group " + name);
    }
  }
}

}  // namespace

MetricsReport aggregate_runs(const std::vector<MetricsReport>& reports) {
  if (reports.size() < 2) throw Error("aggregate_runs needs at least 2 reports");
  for (std::size_t i = 1; i < reports.size(); ++i) check_same_structure(reports[0], reports[i]);

  MetricsReport out = reports[0];
  out.runs = 0;
  for (const auto& r : reports) out.runs += r.runs;

  auto gather = [&](auto member_ptr) {
    std::vector<const MetricCell*> cells;
    cells.reserve(reports.size());
    for (const auto& r : reports) cells.push_back(member_ptr(r));
    return agg_cells(cells);
  };

  out.mse = gather([](const MetricsReport& r) { return &r.mse; });

  for (auto& [name, group] : out.groups) {
    auto cell = [&, gname = name](auto select) {
      std::vector<const MetricCell*> cells;
      cells.reserve(reports.size());
      for (const auto& r : reports) cells.push_back(select(r.groups.at(gname)));
      return agg_cells(cells);
    };
    group.fpr_in = cell([](const GroupReport& g) { return &g.fpr_in; });
    group.fpr_out = cell([](const GroupReport& g) { return &g.fpr_out; });
    group.fnr_in = cell([](const GroupReport& g) { return &g.fnr_in; });
    group.fnr_out = cell([](const GroupReport& g) { return &g.fnr_out; });
    group.fpr_ratio = cell([](const GroupReport& g) { return &g.fpr_ratio; });
    group.dp_gap = cell([](const GroupReport& g) { return &g.dp_gap; });
    group.eo_gap = cell([](const GroupReport& g) { return &g.eo_gap; });
    for (auto& [prior, c] : group.cond_eo_gap) {
      c = cell([p = prior](const GroupReport& g) { return &g.cond_eo_gap.at(p); });
    }
    for (auto& [prior, c] : group.cond_fpr_ratio) {
      c = cell([p = prior](const GroupReport& g) { return &g.cond_fpr_ratio.at(p); });
    }
    for (std::size_t b = 0; b < group.fpr_bins.size(); ++b) {
      group.fpr_bins[b].in_cell =
          cell([b](const GroupReport& g) { return &g.fpr_bins[b].in_cell; });
      group.fpr_bins[b].out_cell =
          cell([b](const GroupReport& g) { return &g.fpr_bins[b].out_cell; });
      group.fpr_bins[b].gap = cell([b](const GroupReport& g) { return &g.fpr_bins[b].gap; });
    }
    for (std::size_t b = 0; b < group.calibration_bins.size(); ++b) {
      group.calibration_bins[b].in_cell =
          cell([b](const GroupReport& g) { return &g.calibration_bins[b].in_cell; });
      group.calibration_bins[b].out_cell =
          cell([b](const GroupReport& g) { return &g.calibration_bins[b].out_cell; });
      group.calibration_bins[b].gap =
          cell([b](const GroupReport& g) { return &g.calibration_bins[b].gap; });
    }
  }
  return out;
}

}  // namespace fairreg
