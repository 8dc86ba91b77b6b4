// Copyright 2026 The CSN Authors.
// SPDX-License-Identifier: Apache-2.0

/// \file
/// JSON model files. A file records the format version, the network family,
/// the cross-layer variant, configs, input standardization and every
/// parameter block. Doubles are written in shortest round-trip form, so a
/// save/load cycle reproduces predictions bit for bit.

#pragma once

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "csn/error.hpp"
#include "csn/linalg.hpp"
#include "csn/model.hpp"
#include <nlohmann/json.hpp>

namespace csn {

using Json = nlohmann::json;

inline constexpr int kModelFormatVersion = 1;
inline constexpr const char* kModelFormatName = "csn-model";
inline constexpr const char* kCrossVariant = "x0*(W*xl+b)+xl";

inline Json basis_to_json(const BasisKind& b) {
  Json j{{"kind", std::string(basis_name(b.type))}};
  if (b.type == BasisKind::Type::kSigmoidFixed) j["slope"] = b.slope;
  if (b.type == BasisKind::Type::kObliqueSigmoid) j["q"] = b.projections;
  return j;
}

inline BasisKind basis_from_json(const Json& j) {
  BasisKind b;
  if (j.is_string()) {
    b.type = parse_basis_type(j.get<std::string>());
  } else {
    b.type = parse_basis_type(j.at("kind").get<std::string>());
    if (j.contains("slope")) b.slope = j.at("slope").get<double>();
    if (j.contains("q")) b.projections = j.at("q").get<int>();
  }
  b.validate();
  return b;
}

inline Json training_to_json(const TrainingOptions& t) {
  return Json{{"lr", t.lr},
              {"batch_fraction", t.batch_fraction},
              {"decay", t.decay},
              {"patience", t.patience},
              {"max_epochs", t.max_epochs},
              {"seed", t.seed}};
}

/// Missing keys keep the values already in `t`.
inline TrainingOptions training_from_json(const Json& j, TrainingOptions t = {}) {
  if (j.contains("lr")) t.lr = j.at("lr").get<double>();
  if (j.contains("batch_fraction")) t.batch_fraction = j.at("batch_fraction").get<double>();
  if (j.contains("decay")) t.decay = j.at("decay").get<double>();
  if (j.contains("patience")) t.patience = j.at("patience").get<int>();
  if (j.contains("max_epochs")) t.max_epochs = j.at("max_epochs").get<int>();
  if (j.contains("seed")) t.seed = j.at("seed").get<std::uint64_t>();
  return t;
}

inline Json csn_config_to_json(const CsnConfig& c) {
  Json j = training_to_json(c.train);
  j["basis"] = basis_to_json(c.basis);
  j["m"] = c.m;
  j["d"] = c.d;
  j["k"] = c.k;
  j["head"] = std::string(to_string(c.head));
  return j;
}

inline CsnConfig csn_config_from_json(const Json& j, CsnConfig c = {}) {
  if (j.contains("basis")) c.basis = basis_from_json(j.at("basis"));
  if (j.contains("m")) c.m = j.at("m").get<Index>();
  if (j.contains("d")) c.d = j.at("d").get<Index>();
  if (j.contains("k")) c.k = j.at("k").get<Index>();
  if (j.contains("head")) c.head = parse_head(j.at("head").get<std::string>());
  c.train = training_from_json(j, c.train);
  return c;
}

inline Json fcnn_config_to_json(const FcnnConfig& c) {
  Json j = training_to_json(c.train);
  j["hidden"] = c.hidden;
  j["head"] = std::string(to_string(c.head));
  return j;
}

inline FcnnConfig fcnn_config_from_json(const Json& j, FcnnConfig c = {}) {
  if (j.contains("hidden")) c.hidden = j.at("hidden").get<std::vector<Index>>();
  if (j.contains("head")) c.head = parse_head(j.at("head").get<std::string>());
  c.train = training_from_json(j, c.train);
  return c;
}

namespace detail {

template <class Derived>
Json dense_to_json(const Eigen::MatrixBase<Derived>& m) {
  std::vector<double> values(static_cast<std::size_t>(m.size()));
  Index pos = 0;
  for (Index r = 0; r < m.rows(); ++r) {
    for (Index c = 0; c < m.cols(); ++c) values[static_cast<std::size_t>(pos++)] = m(r, c);
  }
  return Json{{"rows", m.rows()}, {"cols", m.cols()}, {"values", values}};
}

inline Matrix matrix_from_json(const Json& j) {
  const auto rows = j.at("rows").get<Index>();
  const auto cols = j.at("cols").get<Index>();
  const auto values = j.at("values").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<Index>(values.size()) != rows * cols) {
    throw FormatError("parameter block declares " + shape_string(rows, cols) + " but holds " +
                      std::to_string(values.size()) + " values");
  }
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = values[static_cast<std::size_t>(i)];
  return m;
}

inline Vector vector_from_json(const Json& j) {
  const Matrix m = matrix_from_json(j);
  if (m.cols() != 1 && m.rows() != 0) throw FormatError("expected a column vector block");
  return m.col(0);
}

inline Json affine_to_json(const AffineParams& a) { return Json{{"W", dense_to_json(a.W)}, {"b", dense_to_json(a.b)}}; }

inline AffineParams affine_from_json(const Json& j) {
  AffineParams a;
  a.W = matrix_from_json(j.at("W"));
  a.b = vector_from_json(j.at("b"));
  if (a.b.size() != a.W.rows()) throw FormatError("affine block has mismatched bias length");
  return a;
}

}  // namespace detail

inline Json model_to_json(const Model& model) {
  using namespace detail;
  Json j;
  j["format"] = kModelFormatName;
  j["version"] = kModelFormatVersion;
  j["head"] = std::string(to_string(model.head));
  j["feature_names"] = model.feature_names;
  j["standardizer"] = Json{{"mean", dense_to_json(model.input.mean)}, {"scale", dense_to_json(model.input.scale)}};
  if (model.is_csn()) {
    const CsnNet& n = model.csn();
    j["family"] = "csn";
    j["cross_variant"] = kCrossVariant;
    j["config"] = csn_config_to_json(n.config);
    Json cross = Json::array();
    for (const auto& c : n.cross) cross.push_back(Json{{"W", dense_to_json(c.W)}, {"b", dense_to_json(c.b)}});
    j["layers"] = Json{{"spline",
                        {{"alpha", dense_to_json(n.spline.alpha)},
                         {"beta", dense_to_json(n.spline.beta)},
                         {"projection", dense_to_json(n.spline.projection)}}},
                       {"projection", affine_to_json(n.projection)},
                       {"cross", cross},
                       {"head", affine_to_json(n.head)}};
  } else {
    const FcnnNet& n = model.fcnn();
    j["family"] = "fcnn";
    j["config"] = fcnn_config_to_json(n.config);
    Json hidden = Json::array();
    for (const auto& a : n.hidden) hidden.push_back(affine_to_json(a));
    j["layers"] = Json{{"hidden", hidden}, {"head", affine_to_json(n.head)}};
  }
  return j;
}

inline Model model_from_json(const Json& j) {
  using namespace detail;
  try {
    if (!j.contains("format") || j.at("format") != kModelFormatName) throw FormatError("not a CSN model file");
    const int version = j.at("version").get<int>();
    if (version != kModelFormatVersion) {
      throw FormatError("unsupported model format version " + std::to_string(version) + " (this build reads version " +
                        std::to_string(kModelFormatVersion) + ")");
    }
    Model m;
    m.head = parse_head(j.at("head").get<std::string>());
    m.feature_names = j.at("feature_names").get<std::vector<std::string>>();
    m.input.mean = vector_from_json(j.at("standardizer").at("mean"));
    m.input.scale = vector_from_json(j.at("standardizer").at("scale"));
    const auto family = j.at("family").get<std::string>();
    const Json& layers = j.at("layers");
    if (family == "csn") {
      if (j.at("cross_variant").get<std::string>() != kCrossVariant) {
        throw FormatError("unsupported cross-layer variant '" + j.at("cross_variant").get<std::string>() + "'");
      }
      CsnNet n;
      n.config = csn_config_from_json(j.at("config"));
      n.spline.alpha = matrix_from_json(layers.at("spline").at("alpha"));
      n.spline.beta = matrix_from_json(layers.at("spline").at("beta"));
      n.spline.projection = matrix_from_json(layers.at("spline").at("projection"));
      n.projection = affine_from_json(layers.at("projection"));
      for (const auto& c : layers.at("cross")) {
        CrossParams cp;
        cp.W = matrix_from_json(c.at("W"));
        cp.b = vector_from_json(c.at("b"));
        n.cross.push_back(std::move(cp));
      }
      n.head = affine_from_json(layers.at("head"));
      m.net = std::move(n);
    } else if (family == "fcnn") {
      FcnnNet n;
      n.config = fcnn_config_from_json(j.at("config"));
      for (const auto& a : layers.at("hidden")) n.hidden.push_back(affine_from_json(a));
      n.head = affine_from_json(layers.at("head"));
      m.net = std::move(n);
    } else {
      throw FormatError("unknown model family '" + family + "'");
    }
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed model file: ") + e.what());
  } catch (const ConfigError& e) {
    throw FormatError(std::string("malformed model file: ") + e.what());
  }
}

inline void save_model(const Model& model, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot open '" + path + "' for writing");
  out << model_to_json(model).dump(1) << '\n';
  if (!out) throw FormatError("failed writing model to '" + path + "'");
}

inline Model load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open model file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  Json j;
  try {
    j = Json::parse(ss.str());
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("model file '" + path + "' is truncated or not valid JSON: " + e.what());
  }
  return model_from_json(j);
}

}  // namespace csn
