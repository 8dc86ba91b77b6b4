// Copyright 2026 The CSN Authors.
// SPDX-License-Identifier: Apache-2.0

#include "csn/experiment.hpp"

#include <gtest/gtest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

namespace csn {
namespace {

namespace fs = std::filesystem;

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("csn_experiment_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines_with(const std::string& text, const std::string& needle) {
  int n = 0;
  std::istringstream is(text);
  for (std::string line; std::getline(is, line);) n += line.find(needle) != std::string::npos;
  return n;
}

/// A small, fast fit: 400 simulated rows, short training.
Json small_fit(const fs::path& out) {
  return Json{{"task", "fit"},
              {"data", {{"scenario", "main_cont"}, {"n", 400}, {"n_test", 300}, {"seed", 11}}},
              {"model", {{"m", 3}, {"d", 6}, {"k", 1}, {"max_epochs", 15}, {"patience", 5}, {"batch_fraction", 0.1}}},
              {"seeds", {1, 2, 3}},
              {"output", out.string()}};
}

struct CommandResult {
  int exit_code = -1;
  std::string output;
};

CommandResult run_cli(const std::string& args) {
  const std::string cmd = std::string(CSN_CLI_PATH) + " " + args + " 2>&1";
  CommandResult r;
  std::unique_ptr<FILE, int (*)(FILE*)> pipe(popen(cmd.c_str(), "r"), pclose);
  if (!pipe) return r;
  std::array<char, 512> buf{};
  while (fgets(buf.data(), buf.size(), pipe.get())) r.output += buf.data();
  const int status = pclose(pipe.release());
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

TEST(ConfigHashTest, FnvMatchesReferenceVectors) {
  // Published FNV-1a 64-bit test vectors.
  EXPECT_EQ(fnv1a_hex(""), "cbf29ce484222325");
  EXPECT_EQ(fnv1a_hex("a"), "af63dc4c8601ec8c");
  EXPECT_EQ(fnv1a_hex("foobar"), "85944171f73967e8");
}

TEST(ConfigParseTest, DefaultsAndEcho) {
  const ExperimentConfig c = parse_experiment(Json{{"task", "fit"}});
  EXPECT_EQ(c.task, Task::kFit);
  EXPECT_EQ(c.data.scenario, "main_cont");
  EXPECT_EQ(c.model.preset, "treenet2");
  ASSERT_EQ(c.seeds.size(), 1u);
  EXPECT_EQ(c.echo["data"]["n"], 10000);
  EXPECT_EQ(c.echo["model"]["family"], "csn");
}

TEST(ConfigParseTest, UnknownScenarioListsAllValidNames) {
  try {
    parse_experiment(Json{{"data", {{"scenario", "main_quad"}}}});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    for (auto s : kAllScenarios) EXPECT_NE(msg.find(std::string(to_string(s))), std::string::npos) << to_string(s);
  }
}

TEST(ConfigParseTest, EveryProblemIsReported) {
  const Json bad{{"task", "fit"},
                 {"seeds", Json::array()},
                 {"data", {{"response", "ordinal"}, {"colour", 1}}},
                 {"model", {{"m", 0}}},
                 {"trials", 0},
                 {"mystery", true}};
  try {
    parse_experiment(bad);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    for (const char* needle : {"seeds must not be empty", "ordinal", "data.colour", "m (bases per feature)",
                               "trials must be", "'mystery'"}) {
      EXPECT_NE(msg.find(needle), std::string::npos) << needle << " missing from:\n" << msg;
    }
  }
}

TEST(ConfigParseTest, ReferencedFilesMustExist) {
  const Json j{{"task", "evaluate"},
               {"data", {{"source", "csv"}, {"path", "no_such.csv"}}},
               {"model_path", "no_such_model.json"}};
  try {
    parse_experiment(j, "/nonexistent_dir");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("/nonexistent_dir/no_such.csv"), std::string::npos) << msg;
    EXPECT_NE(msg.find("/nonexistent_dir/no_such_model.json"), std::string::npos) << msg;
  }
}

TEST(ConfigParseTest, ReproduceNeedsBikeFileForItsTable) {
  EXPECT_THROW(parse_experiment(Json{{"task", "reproduce"}, {"reproduce", {{"table", "5-2"}}}}), ConfigError);
  EXPECT_THROW(parse_experiment(Json{{"task", "reproduce"}, {"reproduce", {{"table", "4-9"}}}}), ConfigError);
  EXPECT_NO_THROW(parse_experiment(Json{{"task", "reproduce"}, {"reproduce", {{"table", "4-3"}}}}));
}

TEST(ConfigParseTest, ShippedConfigsAreValid) {
  int seen = 0;
  for (const auto& entry : fs::directory_iterator(CSN_CONFIG_DIR)) {
    if (entry.path().extension() != ".json") continue;
    ++seen;
    try {
      load_experiment(entry.path().string());
    } catch (const ConfigError& e) {
      // The bike-sharing file is downloaded separately; nothing else may fail.
      const std::string msg = e.what();
      EXPECT_NE(msg.find("hour.csv' does not exist"), std::string::npos) << entry.path() << ": " << msg;
      EXPECT_EQ(count_lines_with(msg, "  - "), 1) << entry.path() << ": " << msg;
    }
  }
  EXPECT_GE(seen, 8);
}

TEST(ConfigParseTest, HashIgnoresOutputAndJobs) {
  Json a = small_fit("/tmp/a");
  Json b = small_fit("/tmp/b");
  b["jobs"] = 4;
  EXPECT_EQ(config_hash(parse_experiment(a)), config_hash(parse_experiment(b)));
  b["seeds"] = {1, 2};
  EXPECT_NE(config_hash(parse_experiment(a)), config_hash(parse_experiment(b)));
}

TEST(RunExperimentTest, ThreeSeedsGiveThreeTestEntriesAndTheirMean) {
  const fs::path out = scratch("three_seeds");
  const RunReport report = run_experiment(parse_experiment(small_fit(out)));
  ASSERT_TRUE(report.ok());
  ASSERT_EQ(report.seeds.size(), 3u);
  double total = 0.0;
  for (const auto& r : report.seeds) {
    EXPECT_EQ(r.test.rows, 300);
    EXPECT_TRUE(std::isfinite(r.test.mse));
    total += r.test.mse;
  }
  const SeedSummary s = summarize(report.seeds, "mse", Split::kTest);
  EXPECT_NEAR(s.mean, total / 3.0, 1e-12);

  const std::string metrics = slurp(out / "metrics.csv");
  EXPECT_EQ(count_lines_with(metrics, ",test,"), 3);
  EXPECT_EQ(metrics.rfind(provenance_line(report.config_hash) + "\n", 0), 0u);
  for (int seed : {1, 2, 3}) EXPECT_TRUE(fs::exists(out / ("model_seed" + std::to_string(seed) + ".json")));

  std::ifstream in(out / "report.json");
  const Json j = Json::parse(in);
  EXPECT_EQ(j["seeds"].size(), 3u);
  EXPECT_EQ(j["config_hash"], report.config_hash);
  EXPECT_EQ(j["version"], kToolVersion);
  EXPECT_NEAR(j["summary"]["test"]["mse"]["mean"].get<double>(), total / 3.0, 1e-12);
  EXPECT_FALSE(fs::exists(out / "FAILED"));
}

TEST(RunExperimentTest, RerunIsByteIdenticalAndParallelMatchesSerial) {
  const fs::path a = scratch("rerun_a");
  const fs::path b = scratch("rerun_b");
  Json ja = small_fit(a);
  Json jb = small_fit(b);
  jb["jobs"] = 3;
  run_experiment(parse_experiment(ja));
  run_experiment(parse_experiment(jb));
  for (const char* name : {"metrics.csv", "summary.csv", "history_seed2.csv", "model_seed3.json"}) {
    EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
  }
}

TEST(RunExperimentTest, SavedModelEvaluatesToTheSameMetrics) {
  const fs::path fit_dir = scratch("eval_fit");
  Json j = small_fit(fit_dir);
  j["seeds"] = {4};
  const RunReport fitted = run_experiment(parse_experiment(j));
  const fs::path eval_dir = scratch("eval_eval");
  Json e = small_fit(eval_dir);
  e["task"] = "evaluate";
  e["model_path"] = (fit_dir / "model_seed4.json").string();
  const RunReport evaluated = run_experiment(parse_experiment(e));
  ASSERT_EQ(evaluated.seeds.size(), 1u);
  EXPECT_EQ(evaluated.seeds[0].test.mse, fitted.seeds[0].test.mse);
  EXPECT_TRUE(fs::exists(eval_dir / "predictions.csv"));
}

TEST(RunExperimentTest, RuntimeFailureKeepsArtifactsAndMarksFailure) {
  const fs::path dir = scratch("failure");
  Dataset d = gen_dataset("main_cont", ResponseKind::kContinuous, 3, SimulationSizes{200, 50});
  d.y *= 1e200;
  write_dataset_csv(d, (dir / "huge.csv").string());
  Json j = small_fit(dir / "out");
  j["data"] = {{"source", "csv"}, {"path", "huge.csv"}};
  j["seeds"] = {1};
  const RunReport report = run_experiment(parse_experiment(j, dir));
  EXPECT_FALSE(report.ok());
  EXPECT_TRUE(fs::exists(dir / "out" / "FAILED"));
  EXPECT_TRUE(fs::exists(dir / "out" / "report.json"));
  EXPECT_NE(slurp(dir / "out" / "metrics.csv").find("failed"), std::string::npos);
}

TEST(RunExperimentTest, SearchWritesTrialLogAndBestConfig) {
  const fs::path out = scratch("search");
  Json j = small_fit(out);
  j["task"] = "search";
  j["trials"] = 3;
  j["seeds"] = {2};
  const RunReport report = run_experiment(parse_experiment(j));
  ASSERT_TRUE(report.ok());
  const std::string log = slurp(out / "search_log_seed2.csv");
  EXPECT_EQ(count_lines_with(log, "lr="), 3);
  std::ifstream in(out / "best_config_seed2.json");
  const Json best = Json::parse(in);
  for (const char* key : {"lr", "batch_fraction", "k", "m", "d"}) EXPECT_TRUE(best["best"].contains(key)) << key;
}

TEST(RunExperimentTest, DiagnoseWritesEveryArtifact) {
  const fs::path out = scratch("diagnose");
  Json j = small_fit(out);
  j["task"] = "diagnose";
  j["seeds"] = {1};
  j["diagnostics"] = {{"features", {0, 1, 2}}, {"grid", 5}, {"pd_subsample", 20}, {"h_subsample", 10},
                      {"importance_repeats", 1}};
  const RunReport report = run_experiment(parse_experiment(j));
  ASSERT_TRUE(report.ok());
  for (const char* name : {"importance.csv", "pdp_x1.csv", "ice_x3.csv", "hstat.csv", "diagnostics.json"}) {
    EXPECT_TRUE(fs::exists(out / name)) << name;
  }
  EXPECT_EQ(count_lines_with(slurp(out / "hstat.csv"), ",10"), 3);
  EXPECT_EQ(count_lines_with(slurp(out / "importance.csv"), ",mse,"), 30);
}

TEST(ReproduceTest, PublishedReferenceValues) {
  EXPECT_EQ(published::kSimulationMse[0].name, "main_cont");
  EXPECT_DOUBLE_EQ(published::kSimulationMse[0].test[*published::algorithm_column("treenet2")], 1.072);
  EXPECT_EQ(published::kSimulationAuc[7].name, "3way_pure");
  EXPECT_DOUBLE_EQ(published::kSimulationAuc[7].test[*published::algorithm_column("treenet")], 0.723);
  EXPECT_DOUBLE_EQ(published::kBikeSharingMse.test[*published::algorithm_column("treenet")], 0.106);
}

TEST(ReproduceTest, ToleranceBands) {
  EXPECT_EQ(reproduction_status("4-2", "treenet2", false, 1.22, 1.072), "pass");
  EXPECT_EQ(reproduction_status("4-2", "treenet2", false, 1.23, 1.072), "fail");
  EXPECT_EQ(reproduction_status("4-2", "treenet2", false, 0.96, 1.072), "fail");  // below the noise floor
  EXPECT_EQ(reproduction_status("4-2", "fcnn", false, 1.70, 1.438), "pass");
  EXPECT_EQ(reproduction_status("4-3", "treenet2", true, 0.786, 0.805), "pass");
  EXPECT_EQ(reproduction_status("4-3", "treenet2", true, 0.784, 0.805), "fail");
  EXPECT_EQ(reproduction_status("5-2", "treenet2", false, 0.125, 0.108), "pass");
  EXPECT_EQ(reproduction_status("5-2", "fcnn", false, 0.151, 0.120), "fail");
  EXPECT_EQ(reproduction_status("4-2", "treenet", false, std::nan(""), 1.0), "fail");
}

TEST(ReproduceTest, ComparisonTableMarksExternalColumns) {
  const fs::path out = scratch("reproduce");
  const Json j{{"task", "reproduce"},
               {"data", {{"n", 300}, {"n_test", 200}}},
               {"reproduce", {{"table", "4-3"}, {"rows", {"2way_pure"}}, {"algorithms", {"treenet2"}}}},
               {"seeds", {1}},
               {"output", out.string()}};
  const RunReport report = run_experiment(parse_experiment(j));
  ASSERT_TRUE(report.ok());
  const std::string cmp = slurp(out / "comparison.csv");
  EXPECT_EQ(count_lines_with(cmp, "external (not run)"), 4);  // two columns, train and test
  EXPECT_EQ(count_lines_with(cmp, "not requested"), 4);
  EXPECT_EQ(count_lines_with(cmp, "4-3,2way_pure,treenet2,auc,test,"), 1);
  EXPECT_NE(cmp.find(",0.682,"), std::string::npos);  // paper TreeNet2 test AUC
}

TEST(CliTest, UnknownScenarioExitsWithConfigCode) {
  const CommandResult r = run_cli("fit --scenario main_quad --out " + scratch("cli_bad").string());
  EXPECT_EQ(r.exit_code, kExitConfig);
  for (auto s : kAllScenarios) EXPECT_NE(r.output.find(std::string(to_string(s))), std::string::npos) << r.output;
}

TEST(CliTest, MissingConfigFileIsAConfigError) {
  EXPECT_EQ(run_cli("fit --config /no/such/config.json").exit_code, kExitConfig);
  EXPECT_EQ(run_cli("frobnicate").exit_code, kExitConfig);
}

TEST(CliTest, FlagsOverrideConfigAndRerunsAreByteIdentical) {
  const fs::path dir = scratch("cli_fit");
  {
    std::ofstream cfg(dir / "fit.json");
    cfg << small_fit("ignored").dump(2);
  }
  const std::string base = "fit --config " + (dir / "fit.json").string() + " --seed 7 --seed 8 --out ";
  const CommandResult a = run_cli(base + (dir / "a").string());
  const CommandResult b = run_cli(base + (dir / "b").string() + " --jobs 2");
  ASSERT_EQ(a.exit_code, kExitOk) << a.output;
  ASSERT_EQ(b.exit_code, kExitOk) << b.output;
  EXPECT_FALSE(fs::exists(dir / "ignored"));
  EXPECT_TRUE(fs::exists(dir / "a" / "model_seed8.json"));
  EXPECT_EQ(slurp(dir / "a" / "metrics.csv"), slurp(dir / "b" / "metrics.csv"));
  EXPECT_EQ(count_lines_with(slurp(dir / "a" / "metrics.csv"), ",test,"), 2);
}

TEST(CliTest, RuntimeFailureExitsWithRuntimeCode) {
  const fs::path dir = scratch("cli_fail");
  Dataset d = gen_dataset("main_cont", ResponseKind::kContinuous, 3, SimulationSizes{200, 50});
  d.y *= 1e200;
  write_dataset_csv(d, (dir / "huge.csv").string());
  const CommandResult r = run_cli("fit --data " + (dir / "huge.csv").string() + " --out " + (dir / "out").string());
  EXPECT_EQ(r.exit_code, kExitRuntime) << r.output;
  EXPECT_TRUE(fs::exists(dir / "out" / "FAILED"));
}

}  // namespace
}  // namespace csn
