#pragma once

#include <cstddef>
#include <map>
#include <string>
#include <vector>

namespace fairreg {

/// One labeled example. The label is the arithmetic mean of the rater scores
/// whenever raters are present; a group missing from `groups` is unknown for
/// this example (demographics not shared).
struct Example {
  std::vector<double> features;
  std::vector<double> rater_scores;  // empty when the label was given directly
  double label = 0.0;                // in [0, 1]
  std::map<std::string, int> groups; // group name -> membership flag in {0, 1}
};

enum class FileFormat { Csv, Json };

/// Immutable after load; iteration order is file order and stable across
/// loads of the same file. `group_names` is kept sorted.
struct Dataset {
  std::vector<Example> examples;
  std::size_t dim = 0;
  std::vector<std::string> group_names;
  std::size_t rater_count = 0;  // K; 0 when labels are given directly

  std::size_t size() const { return examples.size(); }
  bool has_group(const std::string& name) const;

  /// Checks every invariant (shapes, value ranges, label = rater mean,
  /// flags in {0,1}, known group names). Throws Error on violation.
  void validate() const;
};

/// Mean of K rater scores. Throws Error on an empty list or a score outside
/// [0, 1].
double aggregate_ratings(const std::vector<double>& scores);

/// CSV schema: header `f0..f{d-1}, r0..r{K-1} | label, group.<name>...`;
/// group cells in {0, 1, ""} where "" means unknown. JSON mirror: array of
/// objects with `features`, `raters` or `label`, and a `groups` map.
/// When both raters and an explicit label are present the rater mean wins;
/// a mismatch above 1e-9 is a load error.
Dataset load_dataset(const std::string& path, FileFormat format);
void save_dataset(const Dataset& ds, const std::string& path, FileFormat format);

/// The indices with y < tau (strict), ascending.
struct NegativeSlice {
  const Dataset* parent = nullptr;
  std::vector<std::size_t> indices;
  double tau = 0.0;
};

NegativeSlice negatives(const Dataset& ds, double tau);

/// Disjoint index lists covering the dataset: flag == 1, flag == 0, and
/// examples without that group attribute.
struct GroupPartition {
  std::vector<std::size_t> members;
  std::vector<std::size_t> others;
  std::vector<std::size_t> unknown;
};

GroupPartition partition_by_group(const Dataset& ds, const std::string& group);

}  // namespace fairreg
