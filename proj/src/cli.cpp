#include "fairreg/cli.hpp"

#include <array>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "fairreg/common.hpp"
#include "fairreg/config.hpp"
#include "fairreg/report_io.hpp"
#include "fairreg/synthgen.hpp"
#include "fairreg/trainer.hpp"

namespace fairreg {

namespace {

namespace fs = std::filesystem;

std::string trim(const std::string& s) {
  std::size_t a = 0;
  std::size_t b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

std::string num(double v) {
  std::array<char, 32> buf;
  const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

FileFormat format_of(const std::string& path) {
  return path.ends_with(".json") ? FileFormat::Json : FileFormat::Csv;
}

void apply_overrides(ConfigMap* map, const std::vector<std::string>& sets) {
  for (const std::string& s : sets) {
    const std::size_t eq = s.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("--set expects key=value, got '" + s + "'");
    }
    const std::string key = trim(s.substr(0, eq));
    const std::string value = trim(s.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError("--set expects key=value, got '" + s + "'");
    }
    bool replaced = false;
    for (auto& [k, v] : map->entries) {
      if (k == key) {
        v = value;
        replaced = true;
        break;
      }
    }
    if (!replaced) map->entries.emplace_back(key, value);
  }
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::string history_csv(const TrainConfig& cfg, const ExperimentResult& res) {
  std::ostringstream os;
  os << "run_seed,epoch,mse";
  for (const PenaltySpec& p : cfg.penalties) os << ",penalty." << p.group;
  if (cfg.adversary) os << ",adversary_loss";
  os << "\n";
  for (std::size_t k = 0; k < res.runs.size(); ++k) {
    const RunResult& run = res.runs[k];
    for (std::size_t e = 0; e < run.mse_history.size(); ++e) {
      os << cfg.seed + k << ',' << e << ',' << num(run.mse_history[e]);
      for (std::size_t j = 0; j < cfg.penalties.size(); ++j) {
        os << ',' << num(run.penalty_history[e][j]);
      }
      if (cfg.adversary) os << ',' << num(run.adversary_loss_history[e]);
      os << "\n";
    }
  }
  return os.str();
}

void cmd_generate(const std::string& config_path, const std::string& out_dir,
                  const std::vector<std::string>& sets) {
  ConfigMap map = load_config(config_path);
  apply_overrides(&map, sets);
  const GenConfig cfg = parse_gen_config(map);
  const Dataset ds = generate(cfg);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  save_dataset(ds, (dir / "dataset.csv").string(), FileFormat::Csv);
  const DatasetSummary summary = describe(ds, cfg.tau, BinSpec{4, 0.0, cfg.tau});
  write_text(dir / "summary.txt", render_summary(summary));
  std::cout << "wrote " << (dir / "dataset.csv").string() << " (" << ds.size() << " examples, dim "
            << ds.dim << ")\n"
            << render_summary(summary);
}

void cmd_train(const std::string& config_path, const std::string& train_path,
               const std::string& eval_path, const std::string& out_dir,
               const std::vector<std::string>& sets) {
  ConfigMap map = load_config(config_path);
  apply_overrides(&map, sets);
  TrainConfig cfg = parse_train_config(map);
  const Dataset train_ds = load_dataset(train_path, format_of(train_path));
  const Dataset eval_ds = load_dataset(eval_path, format_of(eval_path));
  if (cfg.arch.input_dim == 0) cfg.arch.input_dim = train_ds.dim;
  cfg.validate();
  const ExperimentResult res = run_experiment(cfg, train_ds, eval_ds);
  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  save_report(res.aggregate, (dir / "report.json").string());
  write_text(dir / "report.csv", report_to_csv(res.aggregate));
  write_text(dir / "fpr_bins.csv", fpr_bins_to_csv(res.aggregate));
  write_text(dir / "report.txt", render_report(res.aggregate));
  write_text(dir / "history.csv", history_csv(cfg, res));
  save_params(res.runs.front().params, (dir / "params.json").string());
  std::cout << render_report(res.aggregate);
}

void cmd_evaluate(const std::string& params_path, const std::string& eval_path,
                  const std::string& out_file, const std::vector<std::string>& sets) {
  // evaluation settings ride the trainer schema; only --set overrides apply
  ConfigMap map;
  apply_overrides(&map, sets);
  const TrainConfig cfg = parse_train_config(map);
  const ModelParams params = load_params(params_path);
  const Dataset eval_ds = load_dataset(eval_path, format_of(eval_path));
  const MetricsReport report =
      evaluate(params, eval_ds, cfg.tau, cfg.rating_bin_spec(), cfg.calibration_bin_spec(),
               cfg.priors, cfg.min_cell);
  const fs::path out(out_file);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  save_report(report, out_file);
  std::cout << render_report(report);
}

void cmd_study(const std::string& protocol_path, const std::string& out_dir,
               const std::vector<std::string>& sets) {
  ConfigMap map = load_config(protocol_path);
  apply_overrides(&map, sets);

  // dataset paths live beside the trainer keys; relative ones resolve
  // against the protocol file
  std::string train_path;
  std::string eval_path;
  ConfigMap rest;
  for (const auto& [k, v] : map.entries) {
    if (k == "train") {
      train_path = v;
    } else if (k == "eval") {
      eval_path = v;
    } else {
      rest.entries.emplace_back(k, v);
    }
  }
  if (train_path.empty() || eval_path.empty()) {
    throw ConfigError("protocol needs 'train' and 'eval' dataset paths");
  }
  const fs::path base = fs::path(protocol_path).parent_path();
  const auto resolve = [&](const std::string& p) {
    return fs::path(p).is_absolute() ? p : (base / p).string();
  };
  const Dataset train_ds = load_dataset(resolve(train_path), format_of(train_path));
  const Dataset eval_ds = load_dataset(resolve(eval_path), format_of(eval_path));

  std::vector<StudyEntry> protocol = parse_protocol(rest);
  for (StudyEntry& entry : protocol) {
    if (entry.config.arch.input_dim == 0) entry.config.arch.input_dim = train_ds.dim;
  }
  const StudyResult result = study(protocol, train_ds, eval_ds);

  fs::create_directories(out_dir);
  const fs::path dir(out_dir);
  write_text(dir / "study.csv", study_to_csv(result));
  write_text(dir / "study.json", study_to_json(result));
  write_text(dir / "study.txt", render_study(result));
  for (const StudyRow& row : result.rows) {
    write_text(dir / (row.name + "_fpr_bins.csv"), fpr_bins_to_csv(row.result.aggregate));
    save_report(row.result.aggregate, (dir / (row.name + "_report.json")).string());
  }
  std::cout << render_study(result);
}

void cmd_report(const std::vector<std::string>& files) {
  for (const std::string& path : files) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path);
    std::stringstream buf;
    buf << in.rdbuf();
    const std::string text = buf.str();
    std::string rendered;
    try {
      rendered = render_report(report_from_json(text));
    } catch (const ParseError& report_err) {
      try {
        rendered = render_study(study_from_json(text));
      } catch (const ParseError&) {
        throw ParseError(path + ": " + report_err.what());
      }
    }
    if (files.size() > 1) std::cout << "== " << path << " ==\n";
    std::cout << rendered;
  }
}

}  // namespace

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"group fairness measurement and training-time mitigation"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out;
  std::string train_path;
  std::string eval_path;
  std::string params_path;
  std::string protocol_path;
  std::vector<std::string> sets;
  std::vector<std::string> files;

  CLI::App* gen = app.add_subcommand("generate", "sample a synthetic dataset");
  gen->add_option("--config", config_path, "generator config file")->required();
  gen->add_option("--out", out, "output directory")->required();
  gen->add_option("--set", sets, "override key=value");

  CLI::App* train = app.add_subcommand("train", "train and evaluate a model");
  train->add_option("--config", config_path, "trainer config file")->required();
  train->add_option("--train", train_path, "training dataset")->required();
  train->add_option("--eval", eval_path, "evaluation dataset")->required();
  train->add_option("--out", out, "output directory")->required();
  train->add_option("--set", sets, "override key=value");

  CLI::App* eval = app.add_subcommand("evaluate", "evaluate saved model parameters");
  eval->add_option("--params", params_path, "model parameter file")->required();
  eval->add_option("--eval", eval_path, "evaluation dataset")->required();
  eval->add_option("--out", out, "report file to write")->required();
  eval->add_option("--set", sets, "evaluation setting key=value");

  CLI::App* study_cmd = app.add_subcommand("study", "compare several trainer configs");
  study_cmd->add_option("--protocol", protocol_path, "study protocol file")->required();
  study_cmd->add_option("--out", out, "output directory")->required();
  study_cmd->add_option("--set", sets, "override key=value");

  CLI::App* report = app.add_subcommand("report", "render saved report or study files");
  report->add_option("files", files, "report/study JSON files")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (gen->parsed()) {
      cmd_generate(config_path, out, sets);
    } else if (train->parsed()) {
      cmd_train(config_path, train_path, eval_path, out, sets);
    } else if (eval->parsed()) {
      cmd_evaluate(params_path, eval_path, out, sets);
    } else if (study_cmd->parsed()) {
      cmd_study(protocol_path, out, sets);
    } else if (report->parsed()) {
      cmd_report(files);
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace fairreg
