// Copyright 2026 The CSN Authors.
// SPDX-License-Identifier: Apache-2.0

#include "csn/simgen.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

namespace csn {
namespace {

namespace fs = std::filesystem;

const std::string kData = CSN_TEST_DATA_DIR;

Vector probe_point() {
  Vector x = Vector::Zero(kSimulationFeatures);
  x.head(6) << 0.3, -0.6, 0.55, 0.7, -0.8, -0.65;
  return x;
}

TEST(ScenarioTest, ValuesAtTheOrigin) {
  const Vector zero = Vector::Zero(kSimulationFeatures);
  EXPECT_DOUBLE_EQ(scenario_value(Scenario::kMainCont, zero), 3.0);
  EXPECT_DOUBLE_EQ(scenario_value(Scenario::kMainJump, zero), 2.0);
  EXPECT_DOUBLE_EQ(scenario_value(Scenario::k2WayPure, zero), 0.0);
  EXPECT_DOUBLE_EQ(scenario_value(Scenario::k3WayPure, zero), 0.0);
}

// Reference values computed independently at 30-digit precision.
TEST(ScenarioTest, ValuesAtAProbePoint) {
  const Vector x = probe_point();
  const std::pair<const char*, double> expected[] = {
      {"main_cont", 6.2076913475820454},  {"main_jump", 4.7345890545258758}, {"2way_cont", 5.4734777852089504},
      {"2way_jump", 6.7345890545258758},  {"2way_pure", -0.35430156183585323}, {"3way_cont", 8.5503234182664269},
      {"3way_jump", 9.7345890545258758},  {"3way_pure", 0.83046211499733958}};
  for (const auto& [name, value] : expected) EXPECT_NEAR(scenario_value(name, x), value, 1e-13) << name;
}

TEST(ScenarioTest, NoiseFeaturesDoNotMatter) {
  Vector x = probe_point();
  std::vector<double> before;
  for (auto s : kAllScenarios) before.push_back(scenario_value(s, x));
  x.tail(kSimulationFeatures - 6).setConstant(0.93);
  for (std::size_t i = 0; i < kAllScenarios.size(); ++i) {
    EXPECT_EQ(scenario_value(kAllScenarios[i], x), before[i]);
  }
}

TEST(ScenarioTest, NamesRoundTripAndUnknownNamesAreListed) {
  for (auto s : kAllScenarios) EXPECT_EQ(parse_scenario(to_string(s)), s);
  try {
    parse_scenario("4way_cont");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("3way_pure"), std::string::npos);
  }
}

TEST(ScenarioTest, PureInteractionsHaveNoMarginalSlope) {
  const Matrix X = gen_design(100000, 6, 123);
  for (Scenario s : {Scenario::k2WayPure, Scenario::k3WayPure}) {
    const Vector f = scenario_values(s, X);
    for (Index j = 0; j < 6; ++j) {
      const Vector xc = X.col(j).array() - X.col(j).mean();
      const double slope = xc.dot(f) / xc.squaredNorm();
      EXPECT_LT(std::abs(slope), 0.02) << to_string(s) << " x" << j + 1;
    }
  }
  // Sanity: the main-effect scenario does have a marginal slope in x1.
  const Vector f = scenario_values(Scenario::kMainCont, X);
  const Vector xc = X.col(0).array() - X.col(0).mean();
  EXPECT_NEAR(xc.dot(f) / xc.squaredNorm(), 1.0, 0.05);
}

TEST(DesignTest, UniformMoments) {
  const Matrix X = gen_design(20000, 30, 7);
  EXPECT_GE(X.minCoeff(), -1.0);
  EXPECT_LT(X.maxCoeff(), 1.0);
  for (Index j = 0; j < X.cols(); ++j) {
    EXPECT_NEAR(X.col(j).mean(), 0.0, 0.02);
    EXPECT_NEAR(X.col(j).squaredNorm() / 20000.0, 1.0 / 3.0, 0.02);
  }
  EXPECT_EQ(gen_design(10, 3, 7), gen_design(10, 3, 7));
  EXPECT_NE(gen_design(10, 3, 7), gen_design(10, 3, 8));
  EXPECT_THROW(gen_design(0, 3, 1), ConfigError);
}

TEST(DatasetTest, SplitSizesAndShapes) {
  const Dataset d = gen_dataset(Scenario::kMainCont, ResponseKind::kContinuous, 1);
  EXPECT_EQ(d.rows(), 60000);
  EXPECT_EQ(d.features(), 30);
  EXPECT_EQ(d.count(Split::kTrain), 7000);
  EXPECT_EQ(d.count(Split::kValidation), 3000);
  EXPECT_EQ(d.count(Split::kTest), 50000);
  EXPECT_EQ(d.feature_names.front(), "x1");
  EXPECT_EQ(d.feature_names.back(), "x30");
  EXPECT_EQ(d.scenario, "main_cont");
}

TEST(DatasetTest, ContinuousNoiseHasUnitVariance) {
  const Dataset d = gen_dataset(Scenario::k3WayCont, ResponseKind::kContinuous, 2);
  const Vector resid = d.y - scenario_values(Scenario::k3WayCont, d.X);
  EXPECT_NEAR(resid.mean(), 0.0, 0.02);
  EXPECT_NEAR(resid.squaredNorm() / static_cast<double>(resid.size()), 1.0, 0.03);
}

TEST(DatasetTest, SeedsAreReproducibleAndIndependent) {
  const SimulationSizes small{200, 100};
  const Dataset a = gen_dataset(Scenario::k2WayJump, ResponseKind::kContinuous, 5, small);
  const Dataset b = gen_dataset(Scenario::k2WayJump, ResponseKind::kContinuous, 5, small);
  const Dataset c = gen_dataset(Scenario::k2WayJump, ResponseKind::kContinuous, 6, small);
  EXPECT_EQ(a.X, b.X);
  EXPECT_EQ(a.y, b.y);
  EXPECT_NE(a.X, c.X);
  // The test block does not reuse the training design.
  EXPECT_NE(Matrix(a.X.topRows(100)), Matrix(a.X.bottomRows(100)));
}

TEST(CalibrationTest, BisectionAgreesWithGridSearch) {
  const Matrix X = gen_design(100000, 6, 99);
  for (Scenario s : {Scenario::k2WayPure, Scenario::k3WayJump}) {
    const Vector f = scenario_values(s, X);
    const double b = calibrate_beta0(f);
    auto gap = [&](double beta) {
      double t = 0.0;
      for (Index i = 0; i < f.size(); ++i) t += 1.0 / (1.0 + std::exp(-(beta + f[i])));
      return std::abs(t / static_cast<double>(f.size()) - 0.5);
    };
    // Coarse scan, then a fine scan around the coarse minimum.
    auto scan = [&](double lo, double hi, double step) {
      double best = lo, best_gap = gap(lo);
      for (double beta = lo + step; beta <= hi; beta += step) {
        const double g = gap(beta);
        if (g < best_gap) {
          best_gap = g;
          best = beta;
        }
      }
      return best;
    };
    const double coarse = scan(-8.0, 8.0, 1e-2);
    const double fine = scan(coarse - 1e-2, coarse + 1e-2, 1e-5);
    EXPECT_NEAR(b, fine, 1e-4) << to_string(s);
    EXPECT_LT(gap(b), 1e-10);
  }
}

TEST(CalibrationTest, BinaryClassesAreBalanced) {
  for (Scenario s : {Scenario::kMainJump, Scenario::k2WayPure}) {
    const Dataset d = gen_dataset(s, ResponseKind::kBinary, 3);
    d.validate();
    EXPECT_NEAR(d.y.mean(), 0.5, 0.01) << to_string(s);
  }
}

TEST(CsvTest, DatasetRoundTrip) {
  const Dataset d = gen_dataset(Scenario::kMainJump, ResponseKind::kBinary, 4, {30, 10});
  const fs::path path = fs::temp_directory_path() / "csn_simgen_roundtrip.csv";
  write_dataset_csv(d, path.string());
  const Dataset back = read_dataset_csv(path.string(), ResponseKind::kBinary);
  EXPECT_EQ(back.X, d.X);
  EXPECT_EQ(back.y, d.y);
  EXPECT_EQ(back.split, d.split);
  EXPECT_EQ(back.feature_names, d.feature_names);
}

TEST(CsvTest, BadCellNamesTheLocation) {
  const fs::path path = fs::temp_directory_path() / "csn_simgen_bad.csv";
  std::ofstream(path) << "a,b,target,split\n1,2,3,train\n1,oops,3,train\n";
  try {
    read_dataset_csv(path.string(), ResponseKind::kContinuous);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find(":3"), std::string::npos) << e.what();
  }
}

TEST(BikeSharingTest, LoadsTheHourlySchema) {
  const Dataset d = load_bike_sharing(kData + "/hour_sample.csv", 1);
  EXPECT_EQ(d.rows(), 20);
  EXPECT_EQ(d.features(), 11);
  EXPECT_EQ(d.feature_names, bike_sharing_predictors());
  EXPECT_EQ(d.count(Split::kTrain), 10);
  EXPECT_EQ(d.count(Split::kValidation), 5);
  EXPECT_EQ(d.count(Split::kTest), 5);
  // First row: cnt = 159, hr = 0, temp = 0.20.
  EXPECT_DOUBLE_EQ(d.y[0], std::log(159.0));
  EXPECT_EQ(d.X(0, 3), 0.0);
  EXPECT_DOUBLE_EQ(d.X(0, 8), 0.20);
  EXPECT_EQ(load_bike_sharing(kData + "/hour_sample.csv", 1).split, d.split);
}

TEST(BikeSharingTest, MissingColumnsAreNamed) {
  const fs::path path = fs::temp_directory_path() / "csn_bike_missing.csv";
  std::ofstream(path) << "season,yr,cnt\n1,0,5\n";
  try {
    load_bike_sharing(path.string(), 1);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("windspeed"), std::string::npos) << e.what();
  }
  EXPECT_THROW(load_bike_sharing("/nonexistent/hour.csv", 1), DataError);
}

}  // namespace
}  // namespace csn
