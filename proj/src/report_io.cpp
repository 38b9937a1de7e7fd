#include "fairreg/report_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include <json.hpp>

#include "fairreg/common.hpp"

namespace fairreg {

namespace {

using nlohmann::json;

constexpr const char* kReportFormat = "fairreg-report-v1";
constexpr const char* kStudyFormat = "fairreg-study-v1";

// shortest round-trip decimal form
std::string num(double v) {
  std::array<char, 32> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

std::string fixed3(double v) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(3) << v;
  return os.str();
}

json cell_to_json(const MetricCell& c) {
  json j;
  if (!c.defined) {
    j["value"] = nullptr;
  } else if (std::isinf(c.value)) {
    j["value"] = c.value > 0 ? "inf" : "-inf";
  } else {
    j["value"] = c.value;
  }
  j["count"] = c.count;
  if (c.has_se) j["se"] = c.se;
  return j;
}

MetricCell cell_from_json(const json& j) {
  const std::int64_t count = j.at("count").get<std::int64_t>();
  MetricCell c;
  const json& v = j.at("value");
  if (v.is_null()) {
    c = MetricCell::undefined(count);
  } else if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s != "inf" && s != "-inf") throw ParseError("bad cell value '" + s + "'");
    c = MetricCell::of(s == "inf" ? std::numeric_limits<double>::infinity()
                                  : -std::numeric_limits<double>::infinity(),
                       count);
  } else {
    c = MetricCell::of(v.get<double>(), count);
  }
  if (j.contains("se")) {
    c.se = j.at("se").get<double>();
    c.has_se = true;
  }
  return c;
}

json bin_spec_to_json(const BinSpec& b) {
  return {{"count", b.count}, {"lo", b.lo}, {"hi", b.hi}};
}

BinSpec bin_spec_from_json(const json& j) {
  return {j.at("count").get<int>(), j.at("lo").get<double>(), j.at("hi").get<double>()};
}

json bin_row_to_json(const ReportBinRow& r) {
  return {{"bin", r.bin},
          {"lo", r.lo},
          {"hi", r.hi},
          {"in", cell_to_json(r.in_cell)},
          {"out", cell_to_json(r.out_cell)},
          {"gap", cell_to_json(r.gap)}};
}

ReportBinRow bin_row_from_json(const json& j) {
  ReportBinRow r;
  r.bin = j.at("bin").get<int>();
  r.lo = j.at("lo").get<double>();
  r.hi = j.at("hi").get<double>();
  r.in_cell = cell_from_json(j.at("in"));
  r.out_cell = cell_from_json(j.at("out"));
  r.gap = cell_from_json(j.at("gap"));
  return r;
}

json cell_map_to_json(const std::map<std::string, MetricCell>& cells) {
  json j = json::object();
  for (const auto& [k, c] : cells) j[k] = cell_to_json(c);
  return j;
}

std::map<std::string, MetricCell> cell_map_from_json(const json& j) {
  std::map<std::string, MetricCell> out;
  for (const auto& [k, v] : j.items()) out[k] = cell_from_json(v);
  return out;
}

json report_to_json_doc(const MetricsReport& report) {
  json doc;
  doc["format"] = kReportFormat;
  doc["tau"] = report.tau;
  doc["rating_bins"] = bin_spec_to_json(report.rating_bins);
  doc["calibration_bins"] = bin_spec_to_json(report.calibration_bins);
  doc["min_cell_count"] = report.min_cell_count;
  doc["priors"] = report.priors;
  doc["runs"] = report.runs;
  doc["mse"] = cell_to_json(report.mse);
  json groups = json::object();
  for (const auto& [name, g] : report.groups) {
    json jg;
    jg["fpr_in"] = cell_to_json(g.fpr_in);
    jg["fpr_out"] = cell_to_json(g.fpr_out);
    jg["fnr_in"] = cell_to_json(g.fnr_in);
    jg["fnr_out"] = cell_to_json(g.fnr_out);
    jg["fpr_ratio"] = cell_to_json(g.fpr_ratio);
    jg["dp_gap"] = cell_to_json(g.dp_gap);
    jg["eo_gap"] = cell_to_json(g.eo_gap);
    jg["cond_eo_gap"] = cell_map_to_json(g.cond_eo_gap);
    jg["cond_fpr_ratio"] = cell_map_to_json(g.cond_fpr_ratio);
    jg["fpr_bins"] = json::array();
    for (const auto& r : g.fpr_bins) jg["fpr_bins"].push_back(bin_row_to_json(r));
    jg["calibration_bins"] = json::array();
    for (const auto& r : g.calibration_bins) jg["calibration_bins"].push_back(bin_row_to_json(r));
    groups[name] = std::move(jg);
  }
  doc["groups"] = std::move(groups);
  return doc;
}

MetricsReport report_from_json_doc(const json& doc) {
  if (doc.at("format").get<std::string>() != kReportFormat) {
    throw ParseError("unsupported report format '" + doc.at("format").get<std::string>() + "'");
  }
  MetricsReport report;
  report.tau = doc.at("tau").get<double>();
  report.rating_bins = bin_spec_from_json(doc.at("rating_bins"));
  report.calibration_bins = bin_spec_from_json(doc.at("calibration_bins"));
  report.min_cell_count = doc.at("min_cell_count").get<int>();
  report.priors = doc.at("priors").get<std::vector<std::string>>();
  report.runs = doc.at("runs").get<int>();
  report.mse = cell_from_json(doc.at("mse"));
  for (const auto& [name, jg] : doc.at("groups").items()) {
    GroupReport g;
    g.fpr_in = cell_from_json(jg.at("fpr_in"));
    g.fpr_out = cell_from_json(jg.at("fpr_out"));
    g.fnr_in = cell_from_json(jg.at("fnr_in"));
    g.fnr_out = cell_from_json(jg.at("fnr_out"));
    g.fpr_ratio = cell_from_json(jg.at("fpr_ratio"));
    g.dp_gap = cell_from_json(jg.at("dp_gap"));
    g.eo_gap = cell_from_json(jg.at("eo_gap"));
    g.cond_eo_gap = cell_map_from_json(jg.at("cond_eo_gap"));
    g.cond_fpr_ratio = cell_map_from_json(jg.at("cond_fpr_ratio"));
    for (const auto& r : jg.at("fpr_bins")) g.fpr_bins.push_back(bin_row_from_json(r));
    for (const auto& r : jg.at("calibration_bins")) {
      g.calibration_bins.push_back(bin_row_from_json(r));
    }
    report.groups[name] = std::move(g);
  }
  return report;
}

// one flat row; empty fields for undefined values and absent errors
void csv_row(std::ostream& os, const std::string& metric, const std::string& group,
             const std::string& bin, const std::string& prior, const MetricCell& c) {
  os << metric << ',' << group << ',' << bin << ',' << prior << ',';
  if (c.defined) os << num(c.value);
  os << ',' << c.count << ',';
  if (c.has_se) os << num(c.se);
  os << '\n';
}

void scalar_csv_rows(std::ostream& os, const MetricsReport& report) {
  csv_row(os, "mse", "", "", "", report.mse);
  for (const auto& [name, g] : report.groups) {
    csv_row(os, "fpr_in", name, "", "", g.fpr_in);
    csv_row(os, "fpr_out", name, "", "", g.fpr_out);
    csv_row(os, "fnr_in", name, "", "", g.fnr_in);
    csv_row(os, "fnr_out", name, "", "", g.fnr_out);
    csv_row(os, "fpr_ratio", name, "", "", g.fpr_ratio);
    csv_row(os, "dp_gap", name, "", "", g.dp_gap);
    csv_row(os, "eo_gap", name, "", "", g.eo_gap);
    for (const auto& [prior, c] : g.cond_eo_gap) csv_row(os, "cond_eo_gap", name, "", prior, c);
    for (const auto& [prior, c] : g.cond_fpr_ratio) {
      csv_row(os, "cond_fpr_ratio", name, "", prior, c);
    }
  }
}

std::string cell_h(const MetricCell& c) {
  if (!c.defined) return "n/a (count=" + std::to_string(c.count) + ")";
  std::string s = std::isinf(c.value) ? (c.value > 0 ? "inf" : "-inf") : fixed3(c.value);
  if (c.has_se) s += " ±" + fixed3(c.se);
  return s;
}

std::string range_h(double lo, double hi) {
  return "[" + fixed3(lo) + ", " + fixed3(hi) + ")";
}

void render_bin_table(std::ostream& os, const std::vector<ReportBinRow>& rows,
                      const char* in_name, const char* out_name) {
  for (const auto& r : rows) {
    os << "    " << std::left << std::setw(16) << range_h(r.lo, r.hi) << ' ' << in_name << ' '
       << std::setw(14) << cell_h(r.in_cell) << ' ' << out_name << ' ' << std::setw(14)
       << cell_h(r.out_cell) << " gap " << std::setw(14) << cell_h(r.gap) << " (n="
       << r.gap.count << ")\n";
  }
}

void render_group(std::ostream& os, const std::string& name, const GroupReport& g,
                  const std::vector<std::string>& priors) {
  os << "group " << name << "\n";
  os << "  fpr            in " << std::left << std::setw(16) << cell_h(g.fpr_in) << " out "
     << cell_h(g.fpr_out) << "\n";
  os << "  fnr            in " << std::left << std::setw(16) << cell_h(g.fnr_in) << " out "
     << cell_h(g.fnr_out) << "\n";
  os << "  fpr ratio      " << cell_h(g.fpr_ratio) << " (n=" << g.fpr_ratio.count << ")\n";
  os << "  eo gap         " << cell_h(g.eo_gap) << " (n=" << g.eo_gap.count << ")\n";
  os << "  dp gap         " << cell_h(g.dp_gap) << " (n=" << g.dp_gap.count << ")\n";
  for (const auto& prior : priors) {
    const auto it = g.cond_eo_gap.find(prior);
    if (it == g.cond_eo_gap.end()) continue;
    os << "  cond eo gap    [" << prior << "] " << cell_h(it->second) << "\n";
  }
  for (const auto& prior : priors) {
    const auto it = g.cond_fpr_ratio.find(prior);
    if (it == g.cond_fpr_ratio.end()) continue;
    os << "  cond fpr ratio [" << prior << "] " << cell_h(it->second) << "\n";
  }
  if (!g.fpr_bins.empty()) {
    os << "  fpr by rating bin (counts are negatives)\n";
    render_bin_table(os, g.fpr_bins, "in", "out");
  }
  if (!g.calibration_bins.empty()) {
    os << "  mean label by prediction bin\n";
    render_bin_table(os, g.calibration_bins, "in", "out");
  }
}

}  // namespace

std::string report_to_json(const MetricsReport& report) {
  return report_to_json_doc(report).dump(1) + "\n";
}

MetricsReport report_from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
    return report_from_json_doc(doc);
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad report: ") + e.what());
  }
}

void save_report(const MetricsReport& report, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << report_to_json(report);
}

MetricsReport load_report(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return report_from_json(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(path + ": " + e.what());
  }
}

std::string report_to_csv(const MetricsReport& report) {
  std::ostringstream os;
  os << "metric,group,bin,prior,value,count,stderr\n";
  scalar_csv_rows(os, report);
  for (const auto& [name, g] : report.groups) {
    for (const auto& r : g.fpr_bins) {
      const std::string bin = std::to_string(r.bin);
      csv_row(os, "fpr_bin_in", name, bin, "", r.in_cell);
      csv_row(os, "fpr_bin_out", name, bin, "", r.out_cell);
      csv_row(os, "fpr_bin_gap", name, bin, "", r.gap);
    }
    for (const auto& r : g.calibration_bins) {
      const std::string bin = std::to_string(r.bin);
      csv_row(os, "calibration_in", name, bin, "", r.in_cell);
      csv_row(os, "calibration_out", name, bin, "", r.out_cell);
      csv_row(os, "calibration_gap", name, bin, "", r.gap);
    }
  }
  return os.str();
}

std::string fpr_bins_to_csv(const MetricsReport& report) {
  std::ostringstream os;
  os << "group,bin,lo,hi,n_in,n_out,fpr_in,fpr_out,gap,fpr_in_se,fpr_out_se,gap_se\n";
  for (const auto& [name, g] : report.groups) {
    for (const auto& r : g.fpr_bins) {
      os << name << ',' << r.bin << ',' << num(r.lo) << ',' << num(r.hi) << ','
         << r.in_cell.count << ',' << r.out_cell.count << ',';
      if (r.in_cell.defined) os << num(r.in_cell.value);
      os << ',';
      if (r.out_cell.defined) os << num(r.out_cell.value);
      os << ',';
      if (r.gap.defined) os << num(r.gap.value);
      os << ',';
      if (r.in_cell.has_se) os << num(r.in_cell.se);
      os << ',';
      if (r.out_cell.has_se) os << num(r.out_cell.se);
      os << ',';
      if (r.gap.has_se) os << num(r.gap.se);
      os << '\n';
    }
  }
  return os.str();
}

std::string render_report(const MetricsReport& report) {
  std::ostringstream os;
  os << "threshold tau  " << fixed3(report.tau) << "\n";
  os << "runs           " << report.runs << "\n";
  os << "mse            " << cell_h(report.mse) << "\n";
  for (const auto& [name, g] : report.groups) render_group(os, name, g, report.priors);
  return os.str();
}

std::string study_to_csv(const StudyResult& result) {
  std::ostringstream os;
  os << "config,metric,group,bin,prior,value,count,stderr\n";
  for (const auto& row : result.rows) {
    std::ostringstream body;
    scalar_csv_rows(body, row.result.aggregate);
    std::istringstream lines(body.str());
    std::string line;
    while (std::getline(lines, line)) os << row.name << ',' << line << '\n';
  }
  return os.str();
}

std::string study_to_json(const StudyResult& result) {
  json doc;
  doc["format"] = kStudyFormat;
  doc["configs"] = json::array();
  for (const auto& row : result.rows) {
    doc["configs"].push_back(
        {{"name", row.name}, {"report", report_to_json_doc(row.result.aggregate)}});
  }
  return doc.dump(1) + "\n";
}

StudyResult study_from_json(const std::string& text) {
  StudyResult result;
  try {
    const json doc = json::parse(text);
    if (doc.at("format").get<std::string>() != kStudyFormat) {
      throw ParseError("unsupported study format '" + doc.at("format").get<std::string>() + "'");
    }
    for (const auto& entry : doc.at("configs")) {
      StudyRow row;
      row.name = entry.at("name").get<std::string>();
      row.result.aggregate = report_from_json_doc(entry.at("report"));
      result.rows.push_back(std::move(row));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("bad study: ") + e.what());
  }
  return result;
}

std::string render_study(const StudyResult& result) {
  std::ostringstream os;
  if (result.rows.empty()) return "empty study\n";
  const MetricsReport& first = result.rows.front().result.aggregate;

  std::size_t name_w = 6;
  for (const auto& row : result.rows) name_w = std::max(name_w, row.name.size());

  os << "study of " << result.rows.size() << " configurations, tau " << fixed3(first.tau)
     << ", " << first.runs << " run(s) each\n\n";
  os << "mse\n";
  for (const auto& row : result.rows) {
    os << "  " << std::left << std::setw(static_cast<int>(name_w) + 2) << row.name
       << cell_h(row.result.aggregate.mse) << "\n";
  }

  // groups present in any row, in sorted order
  std::set<std::string> group_names;
  for (const auto& row : result.rows) {
    for (const auto& [g, _] : row.result.aggregate.groups) group_names.insert(g);
  }
  const int col = 18;
  for (const auto& gname : group_names) {
    os << "\ngroup " << gname << "\n";
    os << "  " << std::left << std::setw(static_cast<int>(name_w) + 2) << "config";
    os << std::setw(col) << "fpr_ratio" << std::setw(col) << "eo_gap" << std::setw(col)
       << "dp_gap";
    for (const auto& prior : first.priors) os << std::setw(col) << ("cond_eo[" + prior + "]");
    for (const auto& prior : first.priors) os << std::setw(col) << ("cond_ratio[" + prior + "]");
    os << "\n";
    for (const auto& row : result.rows) {
      os << "  " << std::left << std::setw(static_cast<int>(name_w) + 2) << row.name;
      const auto it = row.result.aggregate.groups.find(gname);
      if (it == row.result.aggregate.groups.end()) {
        os << "(group absent)\n";
        continue;
      }
      const GroupReport& g = it->second;
      os << std::setw(col) << cell_h(g.fpr_ratio) << std::setw(col) << cell_h(g.eo_gap)
         << std::setw(col) << cell_h(g.dp_gap);
      for (const auto& prior : first.priors) {
        const auto c = g.cond_eo_gap.find(prior);
        os << std::setw(col) << (c == g.cond_eo_gap.end() ? "-" : cell_h(c->second));
      }
      for (const auto& prior : first.priors) {
        const auto c = g.cond_fpr_ratio.find(prior);
        os << std::setw(col) << (c == g.cond_fpr_ratio.end() ? "-" : cell_h(c->second));
      }
      os << "\n";
    }
  }
  return os.str();
}

}  // namespace fairreg
