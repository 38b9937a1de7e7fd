#include "fairreg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fairreg/common.hpp"

namespace fairreg {

namespace {

constexpr double kLabelMismatchTol = 1e-9;

std::string full_precision(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      cells.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  cells.push_back(cur);
  return cells;
}

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t");
  return s.substr(a, b - a + 1);
}

double parse_real(const std::string& cell, std::size_t line_no, const std::string& col) {
  const std::string t = trim(cell);
  if (t.empty()) {
    throw ParseError("line " + std::to_string(line_no) + ": empty value in column " + col);
  }
  char* end = nullptr;
  const double v = std::strtod(t.c_str(), &end);
  if (end != t.c_str() + t.size()) {
    throw ParseError("line " + std::to_string(line_no) + ": cannot parse '" + t +
                     "' in column " + col);
  }
  if (!std::isfinite(v)) {
    throw ParseError("line " + std::to_string(line_no) + ": non-finite value '" + t +
                     "' in column " + col);
  }
  return v;
}

struct CsvHeader {
  std::size_t dim = 0;
  std::size_t raters = 0;
  bool has_label = false;
  // column index -> role
  std::vector<int> feature_col;           // position of f{i}
  std::vector<int> rater_col;             // position of r{k}
  int label_col = -1;
  std::vector<std::pair<std::string, int>> group_cols;  // name, position
};

CsvHeader parse_header(const std::vector<std::string>& cells) {
  CsvHeader h;
  std::map<std::size_t, int> features;
  std::map<std::size_t, int> raters;
  for (std::size_t i = 0; i < cells.size(); ++i) {
    const std::string name = trim(cells[i]);
    if (name.rfind("f", 0) == 0 && name.size() > 1 &&
        name.find_first_not_of("0123456789", 1) == std::string::npos) {
      features[std::stoul(name.substr(1))] = static_cast<int>(i);
    } else if (name.rfind("r", 0) == 0 && name.size() > 1 &&
               name.find_first_not_of("0123456789", 1) == std::string::npos) {
      raters[std::stoul(name.substr(1))] = static_cast<int>(i);
    } else if (name == "label") {
      h.label_col = static_cast<int>(i);
      h.has_label = true;
    } else if (name.rfind("group.", 0) == 0 && name.size() > 6) {
      h.group_cols.emplace_back(name.substr(6), static_cast<int>(i));
    } else {
      throw ParseError("line 1: unrecognized header column '" + name + "'");
    }
  }
  for (std::size_t i = 0; i < features.size(); ++i) {
    auto it = features.find(i);
    if (it == features.end()) {
      throw ParseError("line 1: feature columns are not contiguous (missing f" +
                       std::to_string(i) + ")");
    }
    h.feature_col.push_back(it->second);
  }
  for (std::size_t k = 0; k < raters.size(); ++k) {
    auto it = raters.find(k);
    if (it == raters.end()) {
      throw ParseError("line 1: rater columns are not contiguous (missing r" +
                       std::to_string(k) + ")");
    }
    h.rater_col.push_back(it->second);
  }
  h.dim = h.feature_col.size();
  h.raters = h.rater_col.size();
  if (h.dim == 0) throw ParseError("line 1: no feature columns (f0..)");
  if (h.raters == 0 && !h.has_label) {
    throw ParseError("line 1: need rater columns (r0..) or a label column");
  }
  return h;
}

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  const CsvHeader header = parse_header(split_csv_line(line));

  Dataset ds;
  ds.dim = header.dim;
  ds.rater_count = header.raters;
  for (const auto& [name, col] : header.group_cols) ds.group_names.push_back(name);
  std::sort(ds.group_names.begin(), ds.group_names.end());

  std::size_t line_no = 1;
  const std::size_t expected = header.dim + header.raters + (header.has_label ? 1 : 0) +
                               header.group_cols.size();
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != expected) {
      throw ParseError("line " + std::to_string(line_no) + ": expected " +
                       std::to_string(expected) + " cells, got " + std::to_string(cells.size()));
    }
    Example ex;
    ex.features.reserve(header.dim);
    for (std::size_t i = 0; i < header.dim; ++i) {
      ex.features.push_back(
          parse_real(cells[header.feature_col[i]], line_no, "f" + std::to_string(i)));
    }
    for (std::size_t k = 0; k < header.raters; ++k) {
      const double r =
          parse_real(cells[header.rater_col[k]], line_no, "r" + std::to_string(k));
      if (r < 0.0 || r > 1.0) {
        throw ParseError("line " + std::to_string(line_no) + ": rating out of range in r" +
                         std::to_string(k));
      }
      ex.rater_scores.push_back(r);
    }
    if (!ex.rater_scores.empty()) {
      ex.label = aggregate_ratings(ex.rater_scores);
      if (header.has_label) {
        const double given = parse_real(cells[header.label_col], line_no, "label");
        if (std::abs(given - ex.label) > kLabelMismatchTol) {
          throw ParseError("line " + std::to_string(line_no) + ": label " +
                           full_precision(given) + " disagrees with rater mean " +
                           full_precision(ex.label));
        }
      }
    } else {
      ex.label = parse_real(cells[header.label_col], line_no, "label");
      if (ex.label < 0.0 || ex.label > 1.0) {
        throw ParseError("line " + std::to_string(line_no) + ": label out of [0,1]");
      }
    }
    for (const auto& [name, col] : header.group_cols) {
      const std::string cell = trim(cells[col]);
      if (cell.empty()) continue;  // unknown
      if (cell == "0") {
        ex.groups[name] = 0;
      } else if (cell == "1") {
        ex.groups[name] = 1;
      } else {
        throw ParseError("line " + std::to_string(line_no) + ": group cell must be 0, 1 or empty, got '" +
                         cell + "'");
      }
    }
    ds.examples.push_back(std::move(ex));
  }
  ds.validate();
  return ds;
}

Dataset load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(path + ": " + e.what());
  }
  if (!doc.is_array()) throw ParseError(path + ": expected a top-level array of examples");

  Dataset ds;
  std::set<std::string> names;
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const auto& obj = doc[i];
    const std::string where = "example " + std::to_string(i);
    if (!obj.is_object() || !obj.contains("features")) {
      throw ParseError(where + ": expected an object with a features array");
    }
    Example ex;
    for (const auto& v : obj.at("features")) {
      const double x = v.get<double>();
      if (!std::isfinite(x)) throw ParseError(where + ": non-finite feature");
      ex.features.push_back(x);
    }
    if (obj.contains("raters")) {
      for (const auto& v : obj.at("raters")) {
        const double r = v.get<double>();
        if (r < 0.0 || r > 1.0) throw ParseError(where + ": rating out of range");
        ex.rater_scores.push_back(r);
      }
      if (ex.rater_scores.empty()) throw ParseError(where + ": empty raters array");
      ex.label = aggregate_ratings(ex.rater_scores);
      if (obj.contains("label")) {
        const double given = obj.at("label").get<double>();
        if (std::abs(given - ex.label) > kLabelMismatchTol) {
          throw ParseError(where + ": label disagrees with rater mean");
        }
      }
    } else if (obj.contains("label")) {
      ex.label = obj.at("label").get<double>();
      if (ex.label < 0.0 || ex.label > 1.0) throw ParseError(where + ": label out of [0,1]");
    } else {
      throw ParseError(where + ": need raters or label");
    }
    if (obj.contains("groups")) {
      for (const auto& [name, flag] : obj.at("groups").items()) {
        const int f = flag.get<int>();
        if (f != 0 && f != 1) throw ParseError(where + ": group flag must be 0 or 1");
        ex.groups[name] = f;
        names.insert(name);
      }
    }
    if (i == 0) {
      ds.dim = ex.features.size();
      ds.rater_count = ex.rater_scores.size();
    } else {
      if (ex.features.size() != ds.dim) {
        throw ParseError(where + ": feature count " + std::to_string(ex.features.size()) +
                         " differs from dim " + std::to_string(ds.dim));
      }
      if (ex.rater_scores.size() != ds.rater_count) {
        throw ParseError(where + ": rater count differs from the rest of the file");
      }
    }
    ds.examples.push_back(std::move(ex));
  }
  ds.group_names.assign(names.begin(), names.end());
  ds.validate();
  return ds;
}

void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (std::size_t i = 0; i < ds.dim; ++i) out << (i ? "," : "") << "f" << i;
  if (ds.rater_count > 0) {
    for (std::size_t k = 0; k < ds.rater_count; ++k) out << ",r" << k;
  } else {
    out << ",label";
  }
  for (const auto& name : ds.group_names) out << ",group." << name;
  out << "\n";
  for (const auto& ex : ds.examples) {
    for (std::size_t i = 0; i < ds.dim; ++i) {
      out << (i ? "," : "") << full_precision(ex.features[i]);
    }
    if (ds.rater_count > 0) {
      for (double r : ex.rater_scores) out << "," << full_precision(r);
    } else {
      out << "," << full_precision(ex.label);
    }
    for (const auto& name : ds.group_names) {
      auto it = ex.groups.find(name);
      out << ",";
      if (it != ex.groups.end()) out << it->second;
    }
    out << "\n";
  }
}

void save_json(const Dataset& ds, const std::string& path) {
  nlohmann::json doc = nlohmann::json::array();
  for (const auto& ex : ds.examples) {
    nlohmann::json obj;
    obj["features"] = ex.features;
    if (!ex.rater_scores.empty()) {
      obj["raters"] = ex.rater_scores;
    } else {
      obj["label"] = ex.label;
    }
    if (!ex.groups.empty()) obj["groups"] = ex.groups;
    doc.push_back(std::move(obj));
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << doc.dump(1) << "\n";
}

}  // namespace

bool Dataset::has_group(const std::string& name) const {
  return std::find(group_names.begin(), group_names.end(), name) != group_names.end();
}

void Dataset::validate() const {
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const Example& ex = examples[i];
    const std::string where = "example " + std::to_string(i);
    if (ex.features.size() != dim) {
      throw Error(where + ": has " + std::to_string(ex.features.size()) +
                  " features, dataset dim is " + std::to_string(dim));
    }
    for (double x : ex.features) {
      if (!std::isfinite(x)) throw Error(where + ": non-finite feature");
    }
    if (ex.rater_scores.size() != rater_count) {
      throw Error(where + ": rater count mismatch");
    }
    for (double r : ex.rater_scores) {
      if (r < 0.0 || r > 1.0) throw Error(where + ": rating out of range");
    }
    if (ex.label < 0.0 || ex.label > 1.0) throw Error(where + ": label out of [0,1]");
    if (!ex.rater_scores.empty() &&
        std::abs(ex.label - aggregate_ratings(ex.rater_scores)) > 1e-12) {
      throw Error(where + ": label is not the rater mean");
    }
    for (const auto& [name, flag] : ex.groups) {
      if (flag != 0 && flag != 1) throw Error(where + ": group flag must be 0 or 1");
      if (std::find(group_names.begin(), group_names.end(), name) == group_names.end()) {
        throw Error(where + ": unknown group '" + name + "'");
      }
    }
  }
}

double aggregate_ratings(const std::vector<double>& scores) {
  if (scores.empty()) throw Error("no ratings");
  double sum = 0.0;
  for (double s : scores) {
    if (!(s >= 0.0 && s <= 1.0)) throw Error("rating out of range: " + full_precision(s));
    sum += s;
  }
  return sum / static_cast<double>(scores.size());
}

Dataset load_dataset(const std::string& path, FileFormat format) {
  return format == FileFormat::Csv ? load_csv(path) : load_json(path);
}

void save_dataset(const Dataset& ds, const std::string& path, FileFormat format) {
  if (format == FileFormat::Csv) {
    save_csv(ds, path);
  } else {
    save_json(ds, path);
  }
}

NegativeSlice negatives(const Dataset& ds, double tau) {
  if (!(tau > 0.0 && tau < 1.0)) {
    throw ConfigError("tau must lie in (0,1), got " + full_precision(tau));
  }
  NegativeSlice slice;
  slice.parent = &ds;
  slice.tau = tau;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.examples[i].label < tau) slice.indices.push_back(i);
  }
  return slice;
}

GroupPartition partition_by_group(const Dataset& ds, const std::string& group) {
  if (!ds.has_group(group)) {
    std::string known;
    for (const auto& name : ds.group_names) {
      if (!known.empty()) known += ", ";
      known += name;
    }
    throw ConfigError("unknown group '" + group + "' (available: " +
                      (known.empty() ? "none" : known) + ")");
  }
  GroupPartition part;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto it = ds.examples[i].groups.find(group);
    if (it == ds.examples[i].groups.end()) {
      part.unknown.push_back(i);
    } else if (it->second == 1) {
      part.members.push_back(i);
    } else {
      part.others.push_back(i);
    }
  }
  return part;
}

}  // namespace fairreg
