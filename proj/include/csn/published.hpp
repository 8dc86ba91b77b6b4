// Copyright 2026 The CSN Authors.
// SPDX-License-Identifier: Apache-2.0

/// \file
/// Published reference results for the simulation and bike-sharing
/// benchmarks, used by `csn reproduce` to print our numbers next to the
/// reference ones. Columns follow the order of kReferenceAlgorithms.

#pragma once

#include <array>
#include <optional>
#include <string_view>

namespace csn::published {

inline constexpr std::array<std::string_view, 5> kReferenceAlgorithms = {"treenet", "fcnn", "xgboost", "treenet2",
                                                                         "xgboost3"};

/// Index of an algorithm in the reference columns, if it has one.
inline std::optional<std::size_t> algorithm_column(std::string_view name) {
  for (std::size_t i = 0; i < kReferenceAlgorithms.size(); ++i) {
    if (kReferenceAlgorithms[i] == name) return i;
  }
  return std::nullopt;
}

/// Only the tree-ensemble columns are produced by external software.
inline bool is_external(std::string_view name) { return name == "xgboost" || name == "xgboost3"; }

struct Row {
  std::string_view name;  // scenario, or "bike_sharing"
  std::array<double, 5> train;
  std::array<double, 5> test;
};

/// Continuous response, 10K simulation: train and test MSE.
inline constexpr std::array<Row, 8> kSimulationMse = {{
    {"main_cont", {0.997, 1.069, 0.938, 0.954, 0.790}, {1.021, 1.438, 1.035, 1.072, 1.054}},
    {"main_jump", {1.012, 1.085, 0.953, 1.028, 0.869}, {1.036, 1.289, 1.017, 1.083, 1.038}},
    {"2way_cont", {0.975, 0.972, 0.389, 1.050, 1.189}, {1.101, 1.415, 1.325, 1.264, 1.715}},
    {"2way_jump", {1.004, 1.204, 0.811, 1.088, 0.881}, {1.143, 1.647, 1.126, 1.262, 1.140}},
    {"2way_pure", {0.926, 0.924, 0.233, 1.023, 0.952}, {1.100, 1.315, 1.254, 1.143, 1.503}},
    {"3way_cont", {1.060, 1.131, 0.137, 0.952, 2.529}, {1.440, 2.058, 2.854, 1.464, 3.554}},
    {"3way_jump", {1.130, 1.612, 0.650, 1.390, 0.991}, {1.438, 1.921, 1.209, 1.547, 1.298}},
    {"3way_pure", {1.008, 0.882, 0.174, 1.041, 1.817}, {1.254, 1.589, 1.761, 1.270, 2.459}},
}};

/// Binary response, 10K simulation: train and test AUC.
inline constexpr std::array<Row, 8> kSimulationAuc = {{
    {"main_cont", {0.822, 0.801, 0.832, 0.827, 0.867}, {0.809, 0.750, 0.805, 0.805, 0.803}},
    {"main_jump", {0.824, 0.826, 0.832, 0.821, 0.856}, {0.805, 0.766, 0.809, 0.803, 0.806}},
    {"2way_cont", {0.900, 0.866, 0.991, 0.901, 0.898}, {0.861, 0.812, 0.857, 0.854, 0.835}},
    {"2way_jump", {0.906, 0.892, 0.917, 0.902, 0.916}, {0.879, 0.854, 0.893, 0.877, 0.891}},
    {"2way_pure", {0.813, 0.714, 0.982, 0.762, 0.689}, {0.690, 0.627, 0.673, 0.682, 0.630}},
    {"3way_cont", {0.928, 0.914, 0.999, 0.914, 0.916}, {0.904, 0.866, 0.900, 0.897, 0.892}},
    {"3way_jump", {0.904, 0.908, 0.930, 0.914, 0.918}, {0.883, 0.854, 0.898, 0.883, 0.895}},
    {"3way_pure", {0.786, 0.775, 0.983, 0.774, 0.699}, {0.723, 0.601, 0.656, 0.689, 0.609}},
}};

/// 50K simulation, three-way scenarios.
inline constexpr std::array<Row, 3> kLargeSampleMse = {{
    {"3way_cont", {1.017, 0.994, 0.497, 0.985, 2.321}, {1.108, 1.222, 1.966, 1.116, 2.887}},
    {"3way_jump", {1.077, 1.056, 0.833, 1.027, 1.070}, {1.137, 1.151, 1.087, 1.199, 1.187}},
    {"3way_pure", {0.994, 1.018, 0.388, 1.019, 1.418}, {1.082, 1.094, 1.306, 1.088, 1.858}},
}};

inline constexpr std::array<Row, 3> kLargeSampleAuc = {{
    {"3way_cont", {0.946, 0.940, 0.965, 0.945, 0.923}, {0.940, 0.926, 0.919, 0.937, 0.907}},
    {"3way_jump", {0.907, 0.899, 0.919, 0.903, 0.913}, {0.898, 0.879, 0.905, 0.896, 0.904}},
    {"3way_pure", {0.795, 0.796, 0.851, 0.800, 0.726}, {0.778, 0.767, 0.738, 0.772, 0.670}},
}};

/// Bike-sharing hourly demand, log(count) target: train and test MSE.
inline constexpr Row kBikeSharingMse = {"bike_sharing", {0.099, 0.073, 0.049, 0.094, 0.083},
                                        {0.106, 0.120, 0.097, 0.108, 0.100}};

}  // namespace csn::published
