#include "fairreg/report_io.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "fairreg/common.hpp"

using namespace fairreg;

namespace {

bool same_cell(const MetricCell& a, const MetricCell& b) {
  if (a.defined != b.defined || a.count != b.count || a.has_se != b.has_se) return false;
  if (a.defined && a.value != b.value) return false;
  if (a.has_se && a.se != b.se) return false;
  return true;
}

bool same_rows(const std::vector<ReportBinRow>& a, const std::vector<ReportBinRow>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i].bin != b[i].bin || a[i].lo != b[i].lo || a[i].hi != b[i].hi) return false;
    if (!same_cell(a[i].in_cell, b[i].in_cell) || !same_cell(a[i].out_cell, b[i].out_cell) ||
        !same_cell(a[i].gap, b[i].gap)) {
      return false;
    }
  }
  return true;
}

bool same_report(const MetricsReport& a, const MetricsReport& b) {
  if (a.tau != b.tau || a.min_cell_count != b.min_cell_count || a.runs != b.runs ||
      a.priors != b.priors) {
    return false;
  }
  if (a.rating_bins.count != b.rating_bins.count || a.rating_bins.lo != b.rating_bins.lo ||
      a.rating_bins.hi != b.rating_bins.hi) {
    return false;
  }
  if (!same_cell(a.mse, b.mse)) return false;
  if (a.groups.size() != b.groups.size()) return false;
  for (const auto& [name, ga] : a.groups) {
    const auto it = b.groups.find(name);
    if (it == b.groups.end()) return false;
    const GroupReport& gb = it->second;
    if (!same_cell(ga.fpr_in, gb.fpr_in) || !same_cell(ga.fpr_out, gb.fpr_out) ||
        !same_cell(ga.fnr_in, gb.fnr_in) || !same_cell(ga.fnr_out, gb.fnr_out) ||
        !same_cell(ga.fpr_ratio, gb.fpr_ratio) || !same_cell(ga.dp_gap, gb.dp_gap) ||
        !same_cell(ga.eo_gap, gb.eo_gap)) {
      return false;
    }
    if (ga.cond_eo_gap.size() != gb.cond_eo_gap.size()) return false;
    for (const auto& [prior, cell] : ga.cond_eo_gap) {
      const auto c = gb.cond_eo_gap.find(prior);
      if (c == gb.cond_eo_gap.end() || !same_cell(cell, c->second)) return false;
    }
    for (const auto& [prior, cell] : ga.cond_fpr_ratio) {
      const auto c = gb.cond_fpr_ratio.find(prior);
      if (c == gb.cond_fpr_ratio.end() || !same_cell(cell, c->second)) return false;
    }
    if (!same_rows(ga.fpr_bins, gb.fpr_bins) ||
        !same_rows(ga.calibration_bins, gb.calibration_bins)) {
      return false;
    }
  }
  return true;
}

// a report exercising every cell shape: plain, with-se, undefined, infinite
MetricsReport sample_report() {
  MetricsReport r;
  r.tau = 0.45;
  r.rating_bins = {4, 0.0, 0.45};
  r.calibration_bins = {2, 0.0, 1.0};
  r.min_cell_count = 5;
  r.priors = {"uniform", "subgroup"};
  r.runs = 3;
  r.mse = MetricCell::of(0.0123456789012345, 600);
  r.mse.se = 0.0004;
  r.mse.has_se = true;

  GroupReport g;
  g.fpr_in = MetricCell::of(0.25, 40);
  g.fpr_out = MetricCell::of(0.125, 360);
  g.fnr_in = MetricCell::undefined(0);
  g.fnr_out = MetricCell::of(0.5, 30);
  g.fpr_ratio = MetricCell::of(std::numeric_limits<double>::infinity(), 400);
  g.dp_gap = MetricCell::of(0.07, 600);
  g.dp_gap.se = 0.002;
  g.dp_gap.has_se = true;
  g.eo_gap = MetricCell::of(0.125, 400);
  g.cond_eo_gap["uniform"] = MetricCell::of(0.1, 380);
  g.cond_eo_gap["subgroup"] = MetricCell::undefined(0);
  g.cond_fpr_ratio["uniform"] = MetricCell::of(1.8, 380);
  g.cond_fpr_ratio["subgroup"] = MetricCell::of(2.0, 380);
  for (int b = 0; b < 2; ++b) {
    ReportBinRow row;
    row.bin = b;
    row.lo = 0.225 * b;
    row.hi = 0.225 * (b + 1);
    row.in_cell = MetricCell::of(0.2 + 0.1 * b, 20);
    row.out_cell = b == 0 ? MetricCell::undefined(0) : MetricCell::of(0.1, 180);
    row.gap = b == 0 ? MetricCell::undefined(20) : MetricCell::of(0.2, 200);
    g.fpr_bins.push_back(row);
  }
  ReportBinRow cal;
  cal.bin = 0;
  cal.lo = 0.0;
  cal.hi = 0.5;
  cal.in_cell = MetricCell::of(0.3, 50);
  cal.out_cell = MetricCell::of(0.28, 500);
  cal.gap = MetricCell::of(0.02, 550);
  g.calibration_bins.push_back(cal);
  r.groups["g1"] = g;

  GroupReport h;
  h.fpr_in = MetricCell::of(0.5, 10);
  h.fpr_out = MetricCell::of(0.25, 390);
  h.fnr_in = MetricCell::of(0.1, 30);
  h.fnr_out = MetricCell::of(0.2, 170);
  h.fpr_ratio = MetricCell::of(2.0, 400);
  h.dp_gap = MetricCell::of(-0.01, 600);
  h.eo_gap = MetricCell::of(0.25, 400);
  r.groups["g2"] = h;
  return r;
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) out.push_back(line);
  return out;
}

}  // namespace

TEST_SUITE("report_io") {

TEST_CASE("json round-trip preserves every cell") {
  const MetricsReport r = sample_report();
  const std::string text = report_to_json(r);
  const MetricsReport back = report_from_json(text);
  CHECK(same_report(r, back));
  // deterministic serialization
  CHECK(report_to_json(back) == text);
  // no wall-clock leakage
  CHECK(text.find("time") == std::string::npos);
  CHECK(text.find("date") == std::string::npos);
}

TEST_CASE("report files round-trip and name the path on failure") {
  const std::string dir = "report_io_tmp";
  std::filesystem::create_directories(dir);
  const MetricsReport r = sample_report();
  save_report(r, dir + "/r.json");
  CHECK(same_report(load_report(dir + "/r.json"), r));

  CHECK_THROWS_WITH_AS(load_report(dir + "/missing.json"), doctest::Contains("missing.json"),
                       ParseError);
  {
    std::ofstream out(dir + "/garbage.json");
    out << "not json";
  }
  CHECK_THROWS_WITH_AS(load_report(dir + "/garbage.json"), doctest::Contains("garbage.json"),
                       ParseError);
  {
    std::ofstream out(dir + "/wrong.json");
    out << "{\"format\": \"fairreg-params-v1\"}";
  }
  CHECK_THROWS_WITH_AS(load_report(dir + "/wrong.json"), doctest::Contains("unsupported"),
                       ParseError);
}

TEST_CASE("flat csv carries one row per cell") {
  const MetricsReport r = sample_report();
  const std::vector<std::string> lines = lines_of(report_to_csv(r));
  REQUIRE(!lines.empty());
  CHECK(lines[0] == "metric,group,bin,prior,value,count,stderr");

  // 1 mse + per group 7 scalars + conditioned cells + 3 per bin row
  const std::size_t expected = 1 + 1 +
                               (7 + 2 + 2 + 3 * 2 + 3 * 1) +  // g1
                               (7 + 0 + 0);                   // g2
  CHECK(lines.size() == expected);

  CHECK(lines[1] == "mse,,,,0.0123456789012345,600,4e-04");
  bool saw_inf = false;
  bool saw_undefined = false;
  bool saw_prior = false;
  for (const auto& line : lines) {
    if (line == "fpr_ratio,g1,,,inf,400,") saw_inf = true;
    if (line == "fnr_in,g1,,,,0,") saw_undefined = true;
    if (line == "cond_fpr_ratio,g1,,subgroup,2,380,") saw_prior = true;
  }
  CHECK(saw_inf);
  CHECK(saw_undefined);
  CHECK(saw_prior);
}

TEST_CASE("fpr bin series lists each rating bin once") {
  const MetricsReport r = sample_report();
  const std::vector<std::string> lines = lines_of(fpr_bins_to_csv(r));
  REQUIRE(lines.size() == 3);  // header + two g1 bins; g2 has no bin table
  CHECK(lines[0] == "group,bin,lo,hi,n_in,n_out,fpr_in,fpr_out,gap,fpr_in_se,fpr_out_se,gap_se");
  CHECK(lines[1] == "g1,0,0,0.225,20,0,0.2,,,,,");
  CHECK(lines[2] == "g1,1,0.225,0.45,20,180,0.30000000000000004,0.1,0.2,,,");
}

TEST_CASE("rendering spells out undefined cells and standard errors") {
  const std::string text = render_report(sample_report());
  CHECK(text.find("threshold tau  0.450") != std::string::npos);
  CHECK(text.find("n/a (count=0)") != std::string::npos);
  CHECK(text.find("0.012 ±0.000") != std::string::npos);  // tiny mse error still shown
  CHECK(text.find("±0.002") != std::string::npos);         // dp gap standard error
  CHECK(text.find("group g1") != std::string::npos);
  CHECK(text.find("group g2") != std::string::npos);
  CHECK(text.find("inf") != std::string::npos);
  CHECK(text.find("fpr by rating bin") != std::string::npos);
  CHECK(text.find("cond eo gap    [uniform] 0.100") != std::string::npos);
  // g2 has no bin tables, so exactly one of each table header
  CHECK(text.find("fpr by rating bin") == text.rfind("fpr by rating bin"));
}

TEST_CASE("study tables prefix every row with its config") {
  StudyResult study;
  StudyRow a;
  a.name = "plain";
  a.result.aggregate = sample_report();
  StudyRow b;
  b.name = "reg";
  b.result.aggregate = sample_report();
  b.result.aggregate.mse = MetricCell::of(0.02, 600);
  study.rows = {a, b};

  const std::vector<std::string> lines = lines_of(study_to_csv(study));
  CHECK(lines[0] == "config,metric,group,bin,prior,value,count,stderr");
  CHECK(lines[1] == "plain,mse,,,,0.0123456789012345,600,4e-04");
  std::size_t plain_rows = 0;
  std::size_t reg_rows = 0;
  for (const auto& line : lines) {
    if (line.rfind("plain,", 0) == 0) ++plain_rows;
    if (line.rfind("reg,", 0) == 0) ++reg_rows;
  }
  CHECK(plain_rows == reg_rows);
  CHECK(lines.size() == 1 + plain_rows + reg_rows);
  // no per-bin rows in the comparison table
  CHECK(study_to_csv(study).find("fpr_bin") == std::string::npos);

  const std::string json_text = study_to_json(study);
  CHECK(json_text.find("fairreg-study-v1") != std::string::npos);
  CHECK(json_text.find("\"plain\"") != std::string::npos);
  CHECK(json_text.find("\"reg\"") != std::string::npos);

  const std::string table = render_study(study);
  CHECK(table.find("study of 2 configurations") != std::string::npos);
  CHECK(table.find("plain") != std::string::npos);
  CHECK(table.find("cond_eo[uniform]") != std::string::npos);
  CHECK(table.find("0.020") != std::string::npos);
}

}  // TEST_SUITE
