#include "fairreg/config.hpp"

#include <algorithm>
#include <cctype>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "fairreg/common.hpp"

namespace fairreg {

namespace {

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

bool valid_key(const std::string& key) {
  if (key.empty()) return false;
  for (char c : key) {
    const bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '.' || c == '-';
    if (!ok) return false;
  }
  return true;
}

double parse_double(const std::string& key, const std::string& value) {
  const char* begin = value.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0') {
    throw ConfigError("key '" + key + "': expected a number, got '" + value + "'");
  }
  return v;
}

long long parse_ll(const std::string& key, const std::string& value) {
  const char* begin = value.c_str();
  char* end = nullptr;
  const long long v = std::strtoll(begin, &end, 10);
  if (end == begin || *end != '\0') {
    throw ConfigError("key '" + key + "': expected an integer, got '" + value + "'");
  }
  return v;
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  if (!value.empty() && value[0] == '-') {
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + value + "'");
  }
  const char* begin = value.c_str();
  char* end = nullptr;
  const unsigned long long v = std::strtoull(begin, &end, 10);
  if (end == begin || *end != '\0') {
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + value + "'");
  }
  return v;
}

std::vector<std::string> split_list(const std::string& key, const std::string& value) {
  std::vector<std::string> out;
  if (trim(value).empty()) return out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) throw ConfigError("key '" + key + "': empty item in list");
    out.push_back(item);
  }
  return out;
}

std::string first_segment(const std::string& key) {
  const std::size_t dot = key.find('.');
  return dot == std::string::npos ? key : key.substr(0, dot);
}

void read_bump(ConfigReader& r, const std::string& key, BumpShape* bump) {
  if (!r.has(key)) return;
  const std::vector<double> v = r.numbers(key);
  if (v.size() != 2) {
    throw ConfigError("key '" + key + "': expected two numbers (a, b), got " +
                      std::to_string(v.size()));
  }
  bump->a = v[0];
  bump->b = v[1];
}

int checked_int(const std::string& key, long long v) {
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) {
    throw ConfigError("key '" + key + "': value out of range");
  }
  return static_cast<int>(v);
}

}  // namespace

bool ConfigMap::has(const std::string& key) const { return find(key).has_value(); }

std::optional<std::string> ConfigMap::find(const std::string& key) const {
  for (const auto& [k, v] : entries) {
    if (k == key) return v;
  }
  return std::nullopt;
}

ConfigMap parse_config_text(const std::string& text) {
  ConfigMap map;
  std::stringstream ss(text);
  std::string line;
  int lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const std::string stripped = trim(line);
    if (stripped.empty() || stripped[0] == '#') continue;
    const std::size_t eq = stripped.find('=');
    if (eq == std::string::npos) {
      throw ParseError("line " + std::to_string(lineno) + ": expected 'key = value', got '" +
                       stripped + "'");
    }
    const std::string key = trim(stripped.substr(0, eq));
    const std::string value = trim(stripped.substr(eq + 1));
    if (!valid_key(key)) {
      throw ParseError("line " + std::to_string(lineno) + ": bad key '" + key + "'");
    }
    if (value.empty()) {
      throw ParseError("line " + std::to_string(lineno) + ": key '" + key + "' has no value");
    }
    if (map.has(key)) {
      throw ParseError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    }
    map.entries.emplace_back(key, value);
  }
  return map;
}

ConfigMap load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open config file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_config_text(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

bool ConfigReader::has(const std::string& key) { return map_.has(key); }

std::optional<std::string> ConfigReader::take(const std::string& key) {
  const auto v = map_.find(key);
  if (v) used_.insert(key);
  return v;
}

std::string ConfigReader::str(const std::string& key, const std::string& fallback) {
  return take(key).value_or(fallback);
}

std::string ConfigReader::require_str(const std::string& key) {
  const auto v = take(key);
  if (!v) throw ConfigError("missing required key '" + key + "'");
  return *v;
}

double ConfigReader::num(const std::string& key, double fallback) {
  const auto v = take(key);
  return v ? parse_double(key, *v) : fallback;
}

double ConfigReader::require_num(const std::string& key) {
  return parse_double(key, require_str(key));
}

long long ConfigReader::integer(const std::string& key, long long fallback) {
  const auto v = take(key);
  return v ? parse_ll(key, *v) : fallback;
}

std::uint64_t ConfigReader::uint(const std::string& key, std::uint64_t fallback) {
  const auto v = take(key);
  return v ? parse_u64(key, *v) : fallback;
}

std::vector<std::string> ConfigReader::list(const std::string& key,
                                            std::vector<std::string> fallback) {
  const auto v = take(key);
  return v ? split_list(key, *v) : std::move(fallback);
}

std::vector<double> ConfigReader::numbers(const std::string& key) {
  const std::string raw = require_str(key);
  std::vector<double> out;
  for (const auto& item : split_list(key, raw)) out.push_back(parse_double(key, item));
  return out;
}

void ConfigReader::finish(const std::string& what) {
  for (const auto& [k, v] : map_.entries) {
    if (!used_.count(k)) {
      throw ConfigError(what + ": unknown key '" + k + "'");
    }
  }
}

GenConfig parse_gen_config(const ConfigMap& map) {
  ConfigReader r(map);
  GenConfig cfg;
  cfg.n = r.uint("n", cfg.n);
  cfg.d_signal = r.uint("d_signal", cfg.d_signal);
  cfg.d_nuisance = r.uint("d_nuisance", cfg.d_nuisance);
  cfg.d_categorical = r.uint("d_categorical", cfg.d_categorical);
  cfg.tau = r.num("tau", cfg.tau);
  cfg.raters = r.uint("raters", cfg.raters);
  cfg.rater_noise = r.num("rater_noise", cfg.rater_noise);
  cfg.signal_noise = r.num("signal_noise", cfg.signal_noise);
  read_bump(r, "background.neg", &cfg.background_neg);
  read_bump(r, "background.pos", &cfg.background_pos);
  cfg.background_pos_rate = r.num("background.pos_rate", cfg.background_pos_rate);
  cfg.unknown_rate = r.num("unknown_rate", cfg.unknown_rate);
  cfg.seed = r.uint("seed", cfg.seed);

  for (const auto& name : r.list("groups", {})) {
    GroupGen g;
    g.name = name;
    g.pi = r.num(name + ".pi", g.pi);
    read_bump(r, name + ".neg", &g.neg);
    read_bump(r, name + ".pos", &g.pos);
    g.pos_rate = r.num(name + ".pos_rate", g.pos_rate);
    g.rho = r.num(name + ".rho", g.rho);
    g.cat_tilt = r.num(name + ".cat_tilt", g.cat_tilt);
    cfg.groups.push_back(std::move(g));
  }
  r.finish("generator config");
  cfg.validate();
  return cfg;
}

TrainConfig parse_train_config(const ConfigMap& map) {
  ConfigReader r(map);
  TrainConfig cfg;
  cfg.arch.kind = model_kind_from_name(r.str("arch", "mlp1"));
  cfg.arch.input_dim = r.uint("input_dim", 0);
  cfg.arch.hidden_width = r.uint("hidden", cfg.arch.kind == ModelKind::Mlp1 ? 64 : 0);
  cfg.tau = r.num("tau", cfg.tau);
  cfg.epochs = checked_int("epochs", r.integer("epochs", cfg.epochs));
  cfg.learning_rate = r.num("learning_rate", cfg.learning_rate);
  cfg.batch_size = r.uint("batch", cfg.batch_size);
  cfg.seed = r.uint("seed", cfg.seed);
  cfg.runs = checked_int("runs", r.integer("runs", cfg.runs));
  cfg.eval_bins = checked_int("eval_bins", r.integer("eval_bins", cfg.eval_bins));
  cfg.calibration_bins =
      checked_int("calibration_bins", r.integer("calibration_bins", cfg.calibration_bins));
  cfg.min_cell = checked_int("min_cell", r.integer("min_cell", cfg.min_cell));
  cfg.priors = r.list("priors", cfg.priors);

  for (const auto& name : r.list("penalties", {})) {
    PenaltySpec p;
    p.group = name;
    p.lambda = r.require_num("penalty." + name + ".lambda");
    p.batch_size = r.uint("penalty." + name + ".batch", p.batch_size);
    cfg.penalties.push_back(std::move(p));
  }
  if (r.has("adversary.group")) {
    AdversarySpec a;
    a.group = r.require_str("adversary.group");
    a.alpha = r.num("adversary.alpha", a.alpha);
    a.head_lr = r.num("adversary.head_lr", a.head_lr);
    a.batch_size = r.uint("adversary.batch", a.batch_size);
    cfg.adversary = std::move(a);
  }
  r.finish("trainer config");

  // Validate everything that does not depend on the input dimension, which
  // the caller may still have to fill in from the dataset.
  TrainConfig probe = cfg;
  if (probe.arch.input_dim == 0) probe.arch.input_dim = 1;
  probe.validate();
  return cfg;
}

std::vector<StudyEntry> parse_protocol(const ConfigMap& map) {
  const auto configs = map.find("configs");
  if (!configs) throw ConfigError("protocol needs a 'configs' list naming its rows");
  const std::vector<std::string> names = split_list("configs", *configs);
  if (names.empty()) throw ConfigError("protocol 'configs' list is empty");

  const std::set<std::string> reserved = {"penalty", "adversary", "background", "configs"};
  std::set<std::string> name_set;
  for (const auto& name : names) {
    if (reserved.count(name)) {
      throw ConfigError("config name '" + name + "' collides with a schema prefix");
    }
    if (!name_set.insert(name).second) {
      throw ConfigError("duplicate config name '" + name + "'");
    }
  }

  // base keys shared by every row
  ConfigMap base;
  for (const auto& [k, v] : map.entries) {
    if (k == "configs") continue;
    if (name_set.count(first_segment(k))) continue;
    base.entries.emplace_back(k, v);
  }

  std::vector<StudyEntry> protocol;
  for (const auto& name : names) {
    ConfigMap merged = base;
    for (const auto& [k, v] : map.entries) {
      if (first_segment(k) != name) continue;
      const std::string stripped = k.substr(name.size() + 1);
      if (stripped.empty()) throw ConfigError("bad override key '" + k + "'");
      bool replaced = false;
      for (auto& [mk, mv] : merged.entries) {
        if (mk == stripped) {
          mv = v;
          replaced = true;
          break;
        }
      }
      if (!replaced) merged.entries.emplace_back(stripped, v);
    }
    try {
      protocol.push_back({name, parse_train_config(merged)});
    } catch (const ConfigError& e) {
      throw ConfigError("config '" + name + "': " + e.what());
    }
  }
  return protocol;
}

}  // namespace fairreg
