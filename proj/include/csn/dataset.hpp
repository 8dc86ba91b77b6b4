// Copyright 2026 The CSN Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "csn/error.hpp"
#include "csn/linalg.hpp"

namespace csn {

enum class Split : std::uint8_t { kTrain, kValidation, kTest };
enum class ResponseKind { kContinuous, kBinary };

inline std::string_view to_string(Split s) {
  switch (s) {
    case Split::kTrain: return "train";
    case Split::kValidation: return "val";
    case Split::kTest: return "test";
  }
  return "?";
}

inline Split parse_split(std::string_view s) {
  if (s == "train") return Split::kTrain;
  if (s == "val" || s == "validation") return Split::kValidation;
  if (s == "test") return Split::kTest;
  throw DataError("unknown split label '" + std::string(s) + "'");
}

inline std::string_view to_string(ResponseKind k) { return k == ResponseKind::kBinary ? "binary" : "continuous"; }

inline ResponseKind parse_response(std::string_view s) {
  if (s == "continuous") return ResponseKind::kContinuous;
  if (s == "binary") return ResponseKind::kBinary;
  throw ConfigError("unknown response kind '" + std::string(s) + "' (expected continuous or binary)");
}

/// Feature matrix and response with a per-row split assignment.
struct Dataset {
  Matrix X;
  Vector y;
  ResponseKind kind = ResponseKind::kContinuous;
  std::vector<Split> split;
  std::vector<std::string> feature_names;
  std::uint64_t seed = 0;
  std::string scenario;  // empty for loaded data

  Index rows() const { return X.rows(); }
  Index features() const { return X.cols(); }

  std::vector<Index> indices(Split s) const {
    std::vector<Index> out;
    for (std::size_t i = 0; i < split.size(); ++i) {
      if (split[i] == s) out.push_back(static_cast<Index>(i));
    }
    return out;
  }

  Index count(Split s) const { return static_cast<Index>(indices(s).size()); }
  bool has(Split s) const { return count(s) > 0; }

  Matrix features_of(Split s) const { return X(indices(s), Eigen::all); }
  Vector response_of(Split s) const { return y(indices(s)); }

  void validate() const {
    if (y.size() != X.rows()) throw DataError("dataset: " + std::to_string(X.rows()) + " rows but " +
                                              std::to_string(y.size()) + " responses");
    if (split.size() != static_cast<std::size_t>(X.rows())) throw DataError("dataset: split labels do not cover rows");
    if (!feature_names.empty() && static_cast<Index>(feature_names.size()) != X.cols()) {
      throw DataError("dataset: feature name count does not match columns");
    }
    if (kind == ResponseKind::kBinary) {
      for (Index i = 0; i < y.size(); ++i) {
        if (y[i] != 0.0 && y[i] != 1.0) throw DataError("dataset: binary response must be 0/1 (row " + std::to_string(i) + ")");
      }
    }
  }
};

/// Shortest text that parses back to exactly `v`.
inline std::string format_real(double v) {
  std::array<char, 32> buf{};
  const auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

/// Canonical CSV: one column per feature, then `target`, then `split`.
/// A non-empty `comment` is written first as a '#' line.
inline void write_dataset_csv(const Dataset& data, const std::string& path, const std::string& comment = {}) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path + "' for writing");
  if (!comment.empty()) out << "# " << comment << '\n';
  for (const auto& name : data.feature_names) out << name << ',';
  out << "target,split\n";
  for (Index i = 0; i < data.rows(); ++i) {
    for (Index j = 0; j < data.features(); ++j) out << format_real(data.X(i, j)) << ',';
    out << format_real(data.y[i]) << ',' << to_string(data.split[static_cast<std::size_t>(i)]) << '\n';
  }
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream is(line);
  while (std::getline(is, field, ',')) {
    if (!field.empty() && field.back() == '\r') field.pop_back();
    if (field.size() >= 2 && field.front() == '"' && field.back() == '"') field = field.substr(1, field.size() - 2);
    out.push_back(field);
  }
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

inline double parse_real(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(where + ": cannot parse '" + s + "' as a number");
  }
}

/// Reads the canonical CSV written by write_dataset_csv. Leading lines that
/// start with '#' are provenance comments and are skipped.
inline Dataset read_dataset_csv(const std::string& path, ResponseKind kind) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open dataset '" + path + "'");
  std::string line;
  std::size_t lineno = 0;
  do {
    if (!std::getline(in, line)) throw DataError(path + ": empty file");
    ++lineno;
  } while (!line.empty() && line.front() == '#');
  auto header = split_csv_line(line);
  if (header.size() < 3 || header[header.size() - 2] != "target" || header.back() != "split") {
    throw DataError(path + ": header must end with target,split");
  }
  Dataset d;
  d.kind = kind;
  d.feature_names.assign(header.begin(), header.end() - 2);
  const std::size_t p = d.feature_names.size();
  std::vector<double> values;
  std::vector<double> targets;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    auto fields = split_csv_line(line);
    const std::string where = path + ":" + std::to_string(lineno);
    if (fields.size() != p + 2) throw DataError(where + ": expected " + std::to_string(p + 2) + " fields");
    for (std::size_t j = 0; j < p; ++j) values.push_back(parse_real(fields[j], where));
    targets.push_back(parse_real(fields[p], where));
    d.split.push_back(parse_split(fields[p + 1]));
  }
  const auto n = static_cast<Index>(targets.size());
  d.X = Eigen::Map<Matrix>(values.data(), n, static_cast<Index>(p));
  d.y = Eigen::Map<Vector>(targets.data(), n);
  d.validate();
  return d;
}

}  // namespace csn
