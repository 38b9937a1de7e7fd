#include "fairreg/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <set>
#include <sstream>

#include "fairreg/common.hpp"
#include "fairreg/rng.hpp"

namespace fairreg {

namespace {

void check_bump(const BumpShape& bump, const std::string& where) {
  if (!(bump.a > 0.0) || !(bump.b > 0.0) || !std::isfinite(bump.a) || !std::isfinite(bump.b)) {
    throw ConfigError(where + ": bump parameters must be positive and finite, got a=" +
                      std::to_string(bump.a) + " b=" + std::to_string(bump.b));
  }
}

void check_rate(double v, const std::string& where) {
  if (!(v >= 0.0 && v <= 1.0)) {
    throw ConfigError(where + " must lie in [0, 1], got " + std::to_string(v));
  }
}

// Latent score: negatives from a bump over [0, tau), positives over [tau, 1].
double draw_latent(RandomEngine& rng, bool positive, double tau, const BumpShape& neg,
                   const BumpShape& pos) {
  if (positive) return std::clamp(tau + (1.0 - tau) * rng.beta(pos.a, pos.b), 0.0, 1.0);
  return std::clamp(tau * rng.beta(neg.a, neg.b), 0.0, 1.0);
}

// Category weights tilt exponentially across the block; tilt 0 is uniform.
std::size_t draw_category(RandomEngine& rng, std::size_t count, double tilt) {
  std::vector<double> w(count);
  double total = 0.0;
  for (std::size_t c = 0; c < count; ++c) {
    w[c] = std::exp(tilt * static_cast<double>(c) / static_cast<double>(count - 1));
    total += w[c];
  }
  const double u = rng.uniform() * total;
  double cum = 0.0;
  for (std::size_t c = 0; c < count; ++c) {
    cum += w[c];
    if (u < cum) return c;
  }
  return count - 1;
}

}  // namespace

void GenConfig::validate() const {
  if (n == 0) throw ConfigError("n must be >= 1");
  if (d_signal == 0) throw ConfigError("d_signal must be >= 1");
  if (d_categorical == 1) {
    throw ConfigError("d_categorical must be 0 or >= 2 (a one-hot block needs two columns)");
  }
  if (!(tau > 0.0 && tau < 1.0)) {
    throw ConfigError("tau must lie in (0, 1), got " + std::to_string(tau));
  }
  if (!(rater_noise >= 0.0) || !std::isfinite(rater_noise)) {
    throw ConfigError("rater_noise must be >= 0 and finite");
  }
  if (!(signal_noise >= 0.0) || !std::isfinite(signal_noise)) {
    throw ConfigError("signal_noise must be >= 0 and finite");
  }
  check_bump(background_neg, "background_neg");
  check_bump(background_pos, "background_pos");
  check_rate(background_pos_rate, "background_pos_rate");
  if (!(unknown_rate >= 0.0 && unknown_rate < 1.0)) {
    throw ConfigError("unknown_rate must lie in [0, 1), got " + std::to_string(unknown_rate));
  }
  std::set<std::string> seen;
  for (const auto& g : groups) {
    if (g.name.empty()) throw ConfigError("group without a name");
    if (!seen.insert(g.name).second) throw ConfigError("duplicate group name '" + g.name + "'");
    if (!(g.pi > 0.0 && g.pi < 1.0)) {
      throw ConfigError("group '" + g.name + "': pi must lie in (0, 1), got " +
                        std::to_string(g.pi));
    }
    check_bump(g.neg, "group '" + g.name + "' neg");
    check_bump(g.pos, "group '" + g.name + "' pos");
    check_rate(g.pos_rate, "group '" + g.name + "' pos_rate");
    if (!std::isfinite(g.rho)) throw ConfigError("group '" + g.name + "': rho must be finite");
    if (!std::isfinite(g.cat_tilt)) {
      throw ConfigError("group '" + g.name + "': cat_tilt must be finite");
    }
    if (g.cat_tilt != 0.0 && d_categorical == 0) {
      throw ConfigError("group '" + g.name + "' sets cat_tilt but there is no categorical block");
    }
  }
}

GenConfig default_gen_config() {
  GenConfig cfg;
  cfg.groups = {
      GroupGen{"g1", 0.10, BumpShape{2.6, 2.6}, BumpShape{1.5, 3.0}, 0.22, 1.4, 2.0},
      GroupGen{"g2", 0.15, BumpShape{3.2, 2.1}, BumpShape{1.5, 3.0}, 0.13, 0.75, 1.2},
  };
  return cfg;
}

Dataset generate(const GenConfig& cfg) {
  cfg.validate();
  RandomEngine rng(cfg.seed);

  Dataset ds;
  ds.dim = cfg.dim();
  ds.rater_count = cfg.raters;
  for (const auto& g : cfg.groups) ds.group_names.push_back(g.name);
  std::sort(ds.group_names.begin(), ds.group_names.end());

  ds.examples.reserve(cfg.n);
  std::vector<int> flags(cfg.groups.size());
  for (std::size_t i = 0; i < cfg.n; ++i) {
    Example ex;
    for (std::size_t g = 0; g < cfg.groups.size(); ++g) {
      flags[g] = rng.uniform() < cfg.groups[g].pi ? 1 : 0;
    }
    const bool hidden = rng.uniform() < cfg.unknown_rate;

    // the first flagged group supplies the label distribution
    const GroupGen* source = nullptr;
    for (std::size_t g = 0; g < cfg.groups.size(); ++g) {
      if (flags[g] == 1) {
        source = &cfg.groups[g];
        break;
      }
    }
    const BumpShape& neg = source ? source->neg : cfg.background_neg;
    const BumpShape& pos = source ? source->pos : cfg.background_pos;
    const double pos_rate = source ? source->pos_rate : cfg.background_pos_rate;

    const bool positive = rng.uniform() < pos_rate;
    const double latent = draw_latent(rng, positive, cfg.tau, neg, pos);

    if (cfg.raters > 0) {
      ex.rater_scores.resize(cfg.raters);
      for (std::size_t k = 0; k < cfg.raters; ++k) {
        ex.rater_scores[k] =
            std::clamp(latent + cfg.rater_noise * rng.normal(), 0.0, 1.0);
      }
      // exact with noiseless raters; otherwise the rater mean defines the label
      ex.label = cfg.rater_noise == 0.0 ? latent : aggregate_ratings(ex.rater_scores);
    } else {
      ex.label = latent;
    }

    ex.features.reserve(ds.dim);
    for (std::size_t j = 0; j < cfg.d_signal; ++j) {
      double t = latent;
      if (j % 3 == 1) t = latent * latent;
      if (j % 3 == 2) t = std::sqrt(latent);
      ex.features.push_back(t + cfg.signal_noise * rng.normal());
    }
    double shift = 0.0;
    for (std::size_t g = 0; g < cfg.groups.size(); ++g) {
      if (flags[g] == 1) shift += cfg.groups[g].rho;
    }
    for (std::size_t j = 0; j < cfg.d_nuisance; ++j) {
      ex.features.push_back(rng.normal() + shift);
    }
    if (cfg.d_categorical > 0) {
      double tilt = 0.0;
      for (std::size_t g = 0; g < cfg.groups.size(); ++g) {
        if (flags[g] == 1) tilt += cfg.groups[g].cat_tilt;
      }
      const std::size_t cat = draw_category(rng, cfg.d_categorical, tilt);
      for (std::size_t c = 0; c < cfg.d_categorical; ++c) {
        ex.features.push_back(c == cat ? 1.0 : 0.0);
      }
    }

    if (!hidden) {
      for (std::size_t g = 0; g < cfg.groups.size(); ++g) {
        ex.groups[cfg.groups[g].name] = flags[g];
      }
    }
    ds.examples.push_back(std::move(ex));
  }
  ds.validate();

  // feasibility: every configured group must contribute negative members,
  // otherwise no group metric or penalty pool can exist downstream
  for (const auto& g : cfg.groups) {
    std::int64_t neg_members = 0;
    for (const auto& ex : ds.examples) {
      const auto it = ex.groups.find(g.name);
      if (it != ex.groups.end() && it->second == 1 && ex.label < cfg.tau) ++neg_members;
    }
    if (neg_members == 0) {
      throw Error("group '" + g.name + "' produced no negative members at n=" +
                  std::to_string(cfg.n) + "; raise n or pi");
    }
  }
  return ds;
}

DatasetSummary describe(const Dataset& ds, double tau, const BinSpec& bins) {
  if (bins.count < 1) throw ConfigError("bin count must be >= 1");
  if (!(bins.lo < bins.hi)) throw ConfigError("bin range must have lo < hi");

  DatasetSummary out;
  out.tau = tau;
  out.bins = bins;

  if (!ds.examples.empty()) {
    for (std::size_t j = 0; j < ds.dim; ++j) {
      bool binary = true;
      for (const auto& ex : ds.examples) {
        if (ex.features[j] != 0.0 && ex.features[j] != 1.0) {
          binary = false;
          break;
        }
      }
      if (binary) out.binary_columns.push_back(j);
    }
  }

  const double width = (bins.hi - bins.lo) / bins.count;
  const auto clamped_bin = [&](double y) {
    const int b = static_cast<int>(std::floor((y - bins.lo) / width));
    return std::clamp(b, 0, bins.count - 1);
  };

  for (const auto& gname : ds.group_names) {
    GroupSummaryRow row;
    row.group = gname;
    row.label_counts_members.assign(bins.count, 0);
    row.label_counts_others.assign(bins.count, 0);
    row.cat_share_members.assign(out.binary_columns.size(), 0.0);
    row.cat_share_others.assign(out.binary_columns.size(), 0.0);

    const GroupPartition part = partition_by_group(ds, gname);
    row.members = static_cast<std::int64_t>(part.members.size());
    const auto tally = [&](const std::vector<std::size_t>& idx, std::vector<std::int64_t>& hist,
                           std::int64_t& negs, std::vector<double>& shares) {
      for (std::size_t i : idx) {
        const Example& ex = ds.examples[i];
        if (ex.label < tau) {
          ++negs;
          ++hist[clamped_bin(ex.label)];
        }
        for (std::size_t c = 0; c < out.binary_columns.size(); ++c) {
          shares[c] += ex.features[out.binary_columns[c]];
        }
      }
      if (!idx.empty()) {
        for (auto& s : shares) s /= static_cast<double>(idx.size());
      }
    };
    tally(part.members, row.label_counts_members, row.members_negatives, row.cat_share_members);
    tally(part.others, row.label_counts_others, row.others_negatives, row.cat_share_others);
    out.rows.push_back(std::move(row));
  }
  return out;
}

std::string render_summary(const DatasetSummary& summary) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3);
  os << "threshold tau " << summary.tau << ", " << summary.bins.count
     << " label bins over [" << summary.bins.lo << ", " << summary.bins.hi << ")\n";
  if (summary.rows.empty()) os << "no demographic groups\n";
  for (const GroupSummaryRow& row : summary.rows) {
    os << "group " << row.group << ": " << row.members << " members, "
       << row.members_negatives << " member negatives, " << row.others_negatives
       << " other negatives\n";
    const auto hist = [&](const char* side, const std::vector<std::int64_t>& counts,
                          std::int64_t total) {
      os << "  negatives by label bin (" << side << "):";
      for (std::int64_t c : counts) {
        os << ' ' << (total > 0 ? static_cast<double>(c) / static_cast<double>(total) : 0.0);
      }
      os << "\n";
    };
    hist("members", row.label_counts_members, row.members_negatives);
    hist("others", row.label_counts_others, row.others_negatives);
    if (!summary.binary_columns.empty()) {
      os << "  binary-column shares, members vs others:\n";
      for (std::size_t c = 0; c < summary.binary_columns.size(); ++c) {
        os << "    f" << summary.binary_columns[c] << "  " << row.cat_share_members[c] << "  "
           << row.cat_share_others[c] << "\n";
      }
    }
  }
  return os.str();
}

}  // namespace fairreg
