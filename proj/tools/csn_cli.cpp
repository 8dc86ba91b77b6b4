// Copyright 2026 The CSN Authors.
// SPDX-License-Identifier: Apache-2.0

// csn: experiment runner. Each subcommand executes one task from a JSON
// config; command-line flags override the matching config keys.
//
//   csn fit --config configs/treenet2_main_cont.json --seed 1 --seed 2 --out runs/a
//   csn simulate --scenario 2way_pure --response binary --seed 7 --out data/
//   csn reproduce --table 4-2 --seed 1 --seed 2 --seed 3 --jobs 4 --out runs/t42

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "csn/experiment.hpp"

namespace {

struct Flags {
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::string out;
  unsigned jobs = 0;
  std::string scenario;
  std::string response;
  std::string data;
  std::string source;
  std::string model;
  std::string table;
  long trials = 0;
};

std::string absolute(const std::string& path) {
  return path.empty() ? path : std::filesystem::absolute(path).lexically_normal().string();
}

/// Config JSON with the flags applied. Paths given on the command line are
/// relative to the working directory, not the config file.
csn::Json patched_config(const std::string& task, const Flags& f) {
  csn::Json j = csn::Json::object();
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) throw csn::ConfigError("cannot open config '" + f.config + "'");
    try {
      j = csn::Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
      throw csn::ConfigError("config '" + f.config + "' is not valid JSON: " + e.what());
    }
    if (!j.is_object()) throw csn::ConfigError("config '" + f.config + "' must hold a JSON object");
  }
  j["task"] = task;
  if (!f.seeds.empty()) j["seeds"] = f.seeds;
  if (!f.out.empty()) j["output"] = absolute(f.out);
  if (f.jobs > 0) j["jobs"] = f.jobs;
  if (!f.scenario.empty()) j["data"]["scenario"] = f.scenario;
  if (!f.response.empty()) j["data"]["response"] = f.response;
  if (!f.source.empty()) j["data"]["source"] = f.source;
  if (!f.data.empty()) {
    j["data"]["path"] = absolute(f.data);
    if (!j["data"].contains("source")) j["data"]["source"] = "csv";
  }
  if (!f.model.empty()) j["model_path"] = absolute(f.model);
  if (!f.table.empty()) j["reproduce"]["table"] = f.table;
  if (f.trials > 0) {
    j["trials"] = f.trials;
    if (task == "reproduce") j["reproduce"]["budget"] = f.trials;
  }
  if (!j.contains("output")) j["output"] = absolute("csn_" + task);
  return j;
}

void print_summary(const csn::RunReport& report, const std::string& out) {
  using csn::Split;
  for (const auto& r : report.seeds) {
    std::cout << "seed " << r.seed << ": test mse " << csn::detail::num(r.test.mse);
    if (std::isfinite(r.test.auc)) std::cout << ", test auc " << csn::detail::num(r.test.auc);
    if (r.best_epoch > 0) std::cout << ", best epoch " << r.best_epoch;
    if (r.failure) std::cout << " (failed: " << *r.failure << ")";
    std::cout << '\n';
  }
  for (const char* metric : {"mse", "auc"}) {
    const auto s = csn::summarize(report.seeds, metric, Split::kTest);
    if (s.best_seed && report.seeds.size() > 1) {
      std::cout << "test " << metric << ": mean " << csn::detail::num(s.mean) << ", best " << csn::detail::num(s.best)
                << " (seed " << *s.best_seed << ")\n";
    }
  }
  if (report.extra.contains("comparison")) {
    for (const auto& row : report.extra["comparison"]) {
      std::cout << row["row"].get<std::string>() << ' ' << row["algorithm"].get<std::string>() << ' '
                << row["metric"].get<std::string>() << ": best " << csn::detail::num(row["best"].is_number()
                                                                                          ? row["best"].get<double>()
                                                                                          : std::nan(""))
                << " vs " << row["paper"].get<double>() << ' ' << row["status"].get<std::string>() << '\n';
    }
  }
  std::cout << "config " << report.config_hash << ", outputs in " << out << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross spline network experiments"};
  app.set_version_flag("--version", std::string("csn ") + csn::kToolVersion);
  app.require_subcommand(1);

  Flags flags;
  struct Command {
    const char* name;
    const char* help;
  };
  const Command commands[] = {
      {"simulate", "Generate simulated datasets as CSV"},
      {"fit", "Fit a model for each seed and report metrics"},
      {"evaluate", "Score a saved model on a dataset"},
      {"search", "Random hyperparameter search for each seed"},
      {"diagnose", "Importance, PDP, ICE and H-statistics of a fitted model"},
      {"reproduce", "Rerun a published results table and compare"},
  };
  for (const auto& c : commands) {
    CLI::App* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", flags.config, "Experiment config (JSON)")->check(CLI::ExistingFile);
    sub->add_option("--seed", flags.seeds, "Seed; repeat for several runs");
    sub->add_option("--out", flags.out, "Output directory");
    sub->add_option("--jobs", flags.jobs, "Parallel workers")->check(CLI::PositiveNumber);
    sub->add_option("--scenario", flags.scenario, "Simulation scenario");
    sub->add_option("--response", flags.response, "continuous or binary");
    sub->add_option("--data", flags.data, "Dataset file (CSV, or hour.csv with --source bike_sharing)");
    sub->add_option("--source", flags.source, "simulation, bike_sharing or csv");
    sub->add_option("--model", flags.model, "Saved model file");
    sub->add_option("--table", flags.table, "Table to reproduce: 4-2, 4-3, 4-4 or 5-2");
    sub->add_option("--trials", flags.trials, "Search trials (reproduce: tuning budget)")->check(CLI::PositiveNumber);
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? csn::kExitOk : csn::kExitConfig;
  }
  const std::string task = app.get_subcommands().front()->get_name();

  csn::ExperimentConfig cfg;
  try {
    const csn::Json j = patched_config(task, flags);
    const std::filesystem::path base =
        flags.config.empty() ? std::filesystem::path{} : std::filesystem::path(flags.config).parent_path();
    cfg = csn::parse_experiment(j, base);
  } catch (const csn::ConfigError& e) {
    std::cerr << "csn: " << e.what() << '\n';
    return csn::kExitConfig;
  }

  try {
    const csn::RunReport report = csn::run_experiment(cfg);
    print_summary(report, cfg.output);
    if (!report.ok()) {
      for (const auto& f : report.failures) std::cerr << "csn: " << f << '\n';
      return csn::kExitRuntime;
    }
  } catch (const csn::ConfigError& e) {
    std::cerr << "csn: " << e.what() << '\n';
    return csn::kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "csn: " << e.what() << '\n';
    return csn::kExitRuntime;
  }
  return csn::kExitOk;
}
