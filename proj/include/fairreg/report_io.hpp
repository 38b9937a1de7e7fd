#pragma once

#include <string>

#include "fairreg/metrics.hpp"
#include "fairreg/trainer.hpp"

namespace fairreg {

/// Lossless JSON for a report. Undefined cells carry a null value, infinite
/// ratios the strings "inf"/"-inf"; standard errors appear only where a cell
/// has one. Deterministic output: no timestamps, stable key order.
std::string report_to_json(const MetricsReport& report);
MetricsReport report_from_json(const std::string& text);

void save_report(const MetricsReport& report, const std::string& path);
MetricsReport load_report(const std::string& path);

/// Flat table, one row per cell: metric,group,bin,prior,value,count,stderr.
/// Undefined values and absent standard errors are empty fields.
std::string report_to_csv(const MetricsReport& report);

/// Per-rating-bin false-positive-rate series, the plot behind the
/// conditional metrics: group,bin,lo,hi,n_in,n_out,fpr_in,fpr_out,gap plus
/// standard-error columns.
std::string fpr_bins_to_csv(const MetricsReport& report);

/// Terminal rendering. Cells print three decimals, multi-run cells append
/// a +/- standard error, and undefined cells print "n/a (count=N)".
std::string render_report(const MetricsReport& report);

/// Study comparison: one row per configuration. The CSV is the flat report
/// schema with a leading config column, scalar and prior-conditioned cells
/// only (per-bin tables are per-report artifacts).
std::string study_to_csv(const StudyResult& result);
std::string study_to_json(const StudyResult& result);
/// Aggregate reports only; per-run artifacts do not survive the round-trip.
StudyResult study_from_json(const std::string& text);
std::string render_study(const StudyResult& result);

}  // namespace fairreg
