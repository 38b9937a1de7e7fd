#pragma once

#include <map>
#include <string>
#include <vector>

#include "fairreg/dataset.hpp"

namespace testutil {

// Dataset with a single zero feature per example, labels as given, no raters.
inline fairreg::Dataset label_dataset(
    const std::vector<double>& labels,
    const std::vector<std::map<std::string, int>>& groups,
    const std::vector<std::string>& group_names) {
  fairreg::Dataset ds;
  ds.dim = 1;
  ds.group_names = group_names;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    fairreg::Example ex;
    ex.features = {0.0};
    ex.label = labels[i];
    if (i < groups.size()) ex.groups = groups[i];
    ds.examples.push_back(std::move(ex));
  }
  ds.validate();
  return ds;
}

// Shorthand: one group "g" per example with the given flag; -1 means unknown.
inline fairreg::Dataset flagged(const std::vector<double>& labels,
                                const std::vector<int>& flags) {
  std::vector<std::map<std::string, int>> gs;
  gs.reserve(flags.size());
  for (int f : flags) {
    std::map<std::string, int> m;
    if (f >= 0) m["g"] = f;
    gs.push_back(std::move(m));
  }
  return label_dataset(labels, gs, {"g"});
}

}  // namespace testutil
