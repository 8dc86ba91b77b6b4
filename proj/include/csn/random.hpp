// Copyright 2026 The CSN Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>

namespace csn {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to derive independent sub-seeds from a parent
/// seed and a stream label so that every random consumer owns its own stream.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return mix64(mix64(seed) ^ mix64(stream + 0x632be59bd9b4e019ULL));
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t sub) {
  return derive_seed(derive_seed(seed, stream), sub);
}

/// Named stream labels. Values are part of the reproducibility contract.
namespace stream {
inline constexpr std::uint64_t kDesign = 1;
inline constexpr std::uint64_t kNoise = 2;
inline constexpr std::uint64_t kTestDesign = 3;
inline constexpr std::uint64_t kTestNoise = 4;
inline constexpr std::uint64_t kCalibration = 5;
inline constexpr std::uint64_t kSplit = 6;
inline constexpr std::uint64_t kInit = 7;
inline constexpr std::uint64_t kShuffle = 8;
inline constexpr std::uint64_t kSearch = 9;
inline constexpr std::uint64_t kTrial = 10;
inline constexpr std::uint64_t kSubsample = 11;
inline constexpr std::uint64_t kPermute = 12;
inline constexpr std::uint64_t kAnchor = 13;
}  // namespace stream

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream_id) { return Rng(derive_seed(seed, stream_id)); }

}  // namespace csn
