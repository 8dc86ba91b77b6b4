// Copyright 2026 The CSN Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace csn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Inconsistent shapes or hyperparameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or non-finite input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite loss or gradient during optimization.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Metric is undefined for the given inputs (e.g. AUC on a single class).
class MetricError : public Error {
 public:
  using Error::Error;
};

/// Model file with an unsupported version or broken structure.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace csn
