// Copyright 2026 The CSN Authors.
// SPDX-License-Identifier: Apache-2.0

#include "csn/search.hpp"

#include <gtest/gtest.h>

#include <random>
#include <set>

#include "gradcheck.hpp"

namespace csn {
namespace {

using testing::random_matrix;

Dataset quadratic_data(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  Dataset d;
  d.X = random_matrix(240, 2, rng);
  d.y = (d.X.col(0).array() * d.X.col(1).array() + 0.5 * d.X.col(0).array()).matrix();
  for (Index i = 0; i < 240; ++i) d.split.push_back(i < 160 ? Split::kTrain : Split::kValidation);
  d.feature_names = {"a", "b"};
  return d;
}

ModelBuilder small_builder(const Dataset& d) {
  const auto stats = compute_training_stats(d.features_of(Split::kTrain));
  return [stats](const Assignment& a, std::uint64_t seed) {
    CsnConfig c;
    c.m = 2;
    c.d = 3;
    c.train.max_epochs = 6;
    c.train.seed = seed;
    return build_csn(apply_assignment(c, a), stats);
  };
}

SearchSpace small_space() {
  SearchSpace s;
  s.axes = {{"lr", {0.005, 0.02, 0.05}}, {"k", {0.0, 1.0, 2.0}}, {"batch_fraction", {0.1, 0.25}}};
  return s;
}

TEST(SearchSpaceTest, GridSizes) {
  EXPECT_EQ(treenet_search_space().combinations(), 2u * 2u * 4u * 3u * 4u);
  EXPECT_EQ(fcnn_search_space().combinations(), 10u * 9u * 3u);
}

TEST(SearchSpaceTest, SamplesComeFromTheAxes) {
  const SearchSpace s = treenet_search_space();
  Rng rng(1);
  std::set<double> seen_k;
  for (int i = 0; i < 200; ++i) {
    const Assignment a = s.sample(rng);
    ASSERT_EQ(a.size(), s.axes.size());
    for (const auto& [name, values] : s.axes) {
      EXPECT_NE(std::find(values.begin(), values.end(), a.at(name)), values.end()) << name;
    }
    seen_k.insert(as_real(a, "k"));
  }
  EXPECT_EQ(seen_k.size(), 4u);
}

TEST(SearchSpaceTest, EmptyAxisIsRejected) {
  SearchSpace s;
  s.axes = {{"lr", {}}};
  EXPECT_THROW(s.validate(), ConfigError);
  EXPECT_THROW(SearchSpace{}.validate(), ConfigError);
}

TEST(ApplyAssignmentTest, OverridesNamedFields) {
  const CsnConfig c = apply_assignment(treenet2_config(), {{"k", 3.0}, {"d", 40.0}, {"lr", 0.01}});
  EXPECT_EQ(c.k, 3);
  EXPECT_EQ(c.d, 40);
  EXPECT_EQ(c.train.lr, 0.01);
  EXPECT_EQ(c.m, 5);
  EXPECT_THROW(apply_assignment(treenet2_config(), {{"depth", 2.0}}), ConfigError);

  const FcnnConfig f = apply_assignment(FcnnConfig{}, {{"layers", std::vector<Index>{4, 2}}, {"lr", 0.001}});
  EXPECT_EQ(f.hidden, (std::vector<Index>{4, 2}));
  EXPECT_THROW(apply_assignment(FcnnConfig{}, {{"layers", 3.0}}), ConfigError);
}

TEST(RandomSearchTest, PicksLowestValidationLoss) {
  const Dataset d = quadratic_data(2);
  const SearchResult r = random_search(small_space(), 5, d, small_builder(d), 17);
  ASSERT_EQ(r.log.size(), 5u);
  for (const auto& t : r.log) {
    EXPECT_TRUE(t.error.empty()) << t.error;
    EXPECT_GE(t.val_loss, r.log[r.best_index].val_loss);
  }
  for (std::size_t t = 0; t < r.best_index; ++t) EXPECT_GT(r.log[t].val_loss, r.log[r.best_index].val_loss);
  EXPECT_EQ(r.best, r.log[r.best_index].assignment);
  EXPECT_DOUBLE_EQ(evaluate_split(r.best_fit.model, d, Split::kValidation).loss, r.log[r.best_index].val_loss);
}

TEST(RandomSearchTest, ThreadsDoNotChangeTheOutcome) {
  const Dataset d = quadratic_data(3);
  const SearchResult serial = random_search(small_space(), 6, d, small_builder(d), 5, 1);
  const SearchResult parallel = random_search(small_space(), 6, d, small_builder(d), 5, 4);
  EXPECT_EQ(serial.best_index, parallel.best_index);
  for (std::size_t t = 0; t < 6; ++t) {
    EXPECT_EQ(serial.log[t].assignment, parallel.log[t].assignment);
    EXPECT_EQ(serial.log[t].seed, parallel.log[t].seed);
    EXPECT_EQ(serial.log[t].val_loss, parallel.log[t].val_loss);
  }
  EXPECT_EQ(pack_parameters(serial.best_fit.model), pack_parameters(parallel.best_fit.model));
}

TEST(RandomSearchTest, SeedControlsTheDraws) {
  const Dataset d = quadratic_data(4);
  auto draws = [&](std::uint64_t seed) {
    std::vector<Assignment> out;
    for (const auto& t : random_search(small_space(), 4, d, small_builder(d), seed).log) out.push_back(t.assignment);
    return out;
  };
  EXPECT_EQ(draws(9), draws(9));
  EXPECT_NE(draws(9), draws(10));
}

TEST(RandomSearchTest, FailedTrialsAreSkipped) {
  const Dataset d = quadratic_data(5);
  const auto inner = small_builder(d);
  int calls = 0;
  ModelBuilder flaky = [&](const Assignment& a, std::uint64_t seed) {
    if (calls++ % 2 == 0) throw ConfigError("refused");
    return inner(a, seed);
  };
  const SearchResult r = random_search(small_space(), 4, d, flaky, 1);
  EXPECT_EQ(r.log[0].error, "refused");
  EXPECT_TRUE(r.log[1].error.empty());
  EXPECT_EQ(r.best_index % 2, 1u);
}

TEST(RandomSearchTest, AllFailuresAreReportedTogether) {
  const Dataset d = quadratic_data(6);
  ModelBuilder broken = [](const Assignment&, std::uint64_t) -> Model { throw ConfigError("no model today"); };
  try {
    random_search(small_space(), 3, d, broken, 1);
    FAIL() << "expected an error";
  } catch (const Error& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("all 3 trials failed"), std::string::npos) << msg;
    EXPECT_NE(msg.find("trial 2: no model today"), std::string::npos) << msg;
  }
}

TEST(RandomSearchTest, ZeroTrialsIsConfigError) {
  const Dataset d = quadratic_data(7);
  EXPECT_THROW(random_search(small_space(), 0, d, small_builder(d), 1), ConfigError);
}

}  // namespace
}  // namespace csn
