#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fairreg/dataset.hpp"
#include "fairreg/metrics.hpp"

namespace fairreg {

/// Beta(a, b) rescaled onto a label interval.
struct BumpShape {
  double a = 1.2;
  double b = 4.0;
};

/// One sensitive group. Membership flags are sampled independently per
/// example with probability pi; a member's label comes from this group's
/// bumps (first flagged group in config order wins), its nuisance features
/// shift by rho, and its categorical draw tilts by cat_tilt.
struct GroupGen {
  std::string name;
  double pi = 0.1;
  BumpShape neg{4.0, 1.8};  // mass piled toward tau
  BumpShape pos{1.5, 3.0};
  double pos_rate = 0.1;
  double rho = 0.0;
  double cat_tilt = 0.0;
};

struct GenConfig {
  std::size_t n = 20000;
  std::size_t d_signal = 3;       // noisy monotone transforms of the latent score
  std::size_t d_nuisance = 2;     // pure group proxies, independent of the score
  std::size_t d_categorical = 8;  // one-hot block; 0 disables
  double tau = 0.5;
  std::size_t raters = 3;
  double rater_noise = 0.05;
  double signal_noise = 0.3;
  BumpShape background_neg{1.2, 4.0};  // mass piled toward 0
  BumpShape background_pos{1.5, 3.0};
  double background_pos_rate = 0.1;
  std::vector<GroupGen> groups;
  double unknown_rate = 0.0;  // fraction of examples with hidden demographics
  std::uint64_t seed = 1;

  std::size_t dim() const { return d_signal + d_nuisance + d_categorical; }

  /// Throws ConfigError on any out-of-range field.
  void validate() const;
};

/// The two-group arrangement the bundled experiment configs use: a rare
/// group whose elevated positive rate and strong proxy features teach an
/// unconstrained model to inflate its scores, and a milder second group
/// whose negatives sit closer to tau. The background skews toward harmless
/// labels.
GenConfig default_gen_config();

/// Samples a dataset. Per example, in order: group flags, a hidden-demographics
/// draw, positive/negative side, the latent score from the source group's bump,
/// rater scores (label = rater mean), then signal, nuisance, and categorical
/// features. Deterministic per seed. Throws Error when a configured group ends
/// up with no negative members (infeasible at this n).
Dataset generate(const GenConfig& cfg);

/// Distribution tables per group: negative-label histogram and, for every
/// binary feature column, the share of ones — members versus non-members.
struct GroupSummaryRow {
  std::string group;
  std::int64_t members = 0;
  std::int64_t members_negatives = 0;
  std::int64_t others_negatives = 0;
  std::vector<std::int64_t> label_counts_members;  // negatives per label bin
  std::vector<std::int64_t> label_counts_others;
  std::vector<double> cat_share_members;  // per binary column, mean over members
  std::vector<double> cat_share_others;
};

struct DatasetSummary {
  double tau = 0.5;
  BinSpec bins;
  std::vector<std::size_t> binary_columns;  // feature columns whose values are all 0/1
  std::vector<GroupSummaryRow> rows;        // one per group name
};

/// Labels outside the bin range are clamped into the edge bins so the
/// histogram always accounts for every negative.
DatasetSummary describe(const Dataset& ds, double tau, const BinSpec& bins);

/// Terminal rendering of a summary: per group, the negative-label histogram
/// and binary-column shares, members versus everyone else.
std::string render_summary(const DatasetSummary& summary);

}  // namespace fairreg
