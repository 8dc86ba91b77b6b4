// Copyright 2026 The CSN Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>
#include <vector>

namespace csn {

using WarningSink = std::function<void(const std::string&)>;

namespace detail {
inline WarningSink& warning_sink() {
  static WarningSink sink = [](const std::string& msg) { std::cerr << "warning: " << msg << '\n'; };
  return sink;
}
inline std::mutex& warning_mutex() {
  static std::mutex m;
  return m;
}
}  // namespace detail

/// Replaces the process-wide warning sink; returns the previous one.
inline WarningSink set_warning_sink(WarningSink sink) {
  std::lock_guard<std::mutex> lock(detail::warning_mutex());
  auto old = std::move(detail::warning_sink());
  detail::warning_sink() = std::move(sink);
  return old;
}

inline void warn(const std::string& msg) {
  std::lock_guard<std::mutex> lock(detail::warning_mutex());
  if (detail::warning_sink()) detail::warning_sink()(msg);
}

/// Captures warnings for the lifetime of the object.
class ScopedWarningCapture {
 public:
  ScopedWarningCapture()
      : previous_(set_warning_sink([this](const std::string& m) { messages_.push_back(m); })) {}
  ~ScopedWarningCapture() { set_warning_sink(std::move(previous_)); }
  ScopedWarningCapture(const ScopedWarningCapture&) = delete;
  ScopedWarningCapture& operator=(const ScopedWarningCapture&) = delete;

  const std::vector<std::string>& messages() const { return messages_; }

 private:
  std::vector<std::string> messages_;
  WarningSink previous_;
};

}  // namespace csn
