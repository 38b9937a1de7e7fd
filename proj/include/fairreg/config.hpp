#pragma once

#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fairreg/synthgen.hpp"
#include "fairreg/trainer.hpp"

namespace fairreg {

/// Flat `key = value` text, file order preserved. Lines that are empty or
/// start with # are skipped; duplicate keys are an error.
struct ConfigMap {
  std::vector<std::pair<std::string, std::string>> entries;

  bool has(const std::string& key) const;
  std::optional<std::string> find(const std::string& key) const;
};

ConfigMap parse_config_text(const std::string& text);
ConfigMap load_config(const std::string& path);

/// Typed access tracking which keys were consumed, so a finished reader can
/// name any key the schema does not know.
class ConfigReader {
 public:
  explicit ConfigReader(ConfigMap map) : map_(std::move(map)) {}

  bool has(const std::string& key);
  std::string str(const std::string& key, const std::string& fallback);
  std::string require_str(const std::string& key);
  double num(const std::string& key, double fallback);
  double require_num(const std::string& key);
  long long integer(const std::string& key, long long fallback);
  std::uint64_t uint(const std::string& key, std::uint64_t fallback);
  /// Comma-separated names, whitespace-trimmed; an absent key yields the
  /// fallback, an empty value an empty list.
  std::vector<std::string> list(const std::string& key, std::vector<std::string> fallback);
  std::vector<double> numbers(const std::string& key);  // required, comma-separated

  /// Throws ConfigError naming the first key never consumed.
  void finish(const std::string& what);

 private:
  std::optional<std::string> take(const std::string& key);

  ConfigMap map_;
  std::set<std::string> used_;
};

/// Generator settings from config keys (n, d_signal, d_nuisance,
/// d_categorical, tau, raters, rater_noise, signal_noise, background.*,
/// unknown_rate, seed, groups plus per-group <name>.pi/.neg/.pos/.pos_rate/
/// .rho/.cat_tilt). Unknown keys are rejected.
GenConfig parse_gen_config(const ConfigMap& map);

/// Trainer settings (arch, input_dim, hidden, tau, epochs, learning_rate,
/// batch, seed, runs, eval_bins, calibration_bins, min_cell, priors,
/// penalties plus penalty.<group>.lambda/.batch, adversary.group/.alpha/
/// .head_lr/.batch). input_dim may be left 0 for the caller to fill from the
/// dataset before validating.
TrainConfig parse_train_config(const ConfigMap& map);

/// Study protocol: `configs = name, ...` declares the rows; every other key
/// is either a base trainer key shared by all rows or `<name>.<trainer key>`
/// overriding one row. Config names must not collide with the trainer
/// schema's own prefixes.
std::vector<StudyEntry> parse_protocol(const ConfigMap& map);

}  // namespace fairreg
