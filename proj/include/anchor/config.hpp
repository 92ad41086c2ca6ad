// SPDX-License-Identifier: Apache-2.0
/**
 * Copyright (C) 2026 The anchor-asr Authors
 *
 * @file   config.hpp
 * @brief  Flat `key = value` configuration text.
 *
 * Lines are `key = value`; `#` starts a comment; blank lines are ignored.
 * Keys are namespaced by a dotted prefix (`corpus.`, `model.`, `train.`,
 * `augment.`, `experiment.`) so one file can configure a whole run.
 */
#pragma once

#include <charconv>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <utility>

#include "anchor/numerics/tensor.hpp"

namespace anchor {

class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Inclusive integer range [lo, hi].
struct Range {
  std::size_t lo = 0;
  std::size_t hi = 0;

  bool contains(std::size_t v) const { return v >= lo && v <= hi; }
  friend bool operator==(const Range &, const Range &) = default;
};

inline std::string to_string(const Range &r) {
  return std::to_string(r.lo) + "," + std::to_string(r.hi);
}

namespace detail {
inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}
}  // namespace detail

class KeyValues {
 public:
  KeyValues() = default;

  static KeyValues parse(std::string_view text) {
    KeyValues kv;
    std::size_t line_no = 0;
    while (!text.empty()) {
      const auto nl = text.find('\n');
      std::string_view line = text.substr(0, nl);
      text = nl == std::string_view::npos ? std::string_view{}
                                          : text.substr(nl + 1);
      ++line_no;
      if (const auto hash = line.find('#'); hash != std::string_view::npos)
        line = line.substr(0, hash);
      if (detail::trim(line).empty()) continue;
      const auto eq = line.find('=');
      if (eq == std::string_view::npos)
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": expected 'key = value'");
      std::string key = detail::trim(line.substr(0, eq));
      if (key.empty())
        throw ConfigError("config line " + std::to_string(line_no) +
                          ": empty key");
      kv.set(key, detail::trim(line.substr(eq + 1)));
    }
    return kv;
  }

  void set(const std::string &key, std::string value) {
    values_[key] = std::move(value);
  }
  bool has(const std::string &key) const { return values_.count(key) != 0; }

  std::optional<std::string> get(const std::string &key) const {
    auto it = values_.find(key);
    if (it == values_.end()) return std::nullopt;
    return it->second;
  }

  /// Entries whose key starts with `prefix`, with the prefix removed.
  KeyValues section(const std::string &prefix) const {
    KeyValues out;
    for (const auto &[k, v] : values_)
      if (k.rfind(prefix, 0) == 0) out.values_[k.substr(prefix.size())] = v;
    return out;
  }

  void check_known(const std::set<std::string> &known,
                   const std::string &context) const {
    for (const auto &[k, v] : values_)
      if (!known.count(k))
        throw ConfigError("unknown " + context + " key '" + k + "'");
  }

  std::string get_string(const std::string &key, std::string fallback) const {
    return get(key).value_or(std::move(fallback));
  }

  double get_double(const std::string &key, double fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    try {
      std::size_t used = 0;
      const double d = std::stod(*v, &used);
      if (used != v->size()) throw std::invalid_argument(*v);
      return d;
    } catch (const std::exception &) {
      throw ConfigError("key '" + key + "': '" + *v + "' is not a number");
    }
  }

  std::uint64_t get_u64(const std::string &key, std::uint64_t fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    return parse_u64(key, *v);
  }

  std::size_t get_size(const std::string &key, std::size_t fallback) const {
    return static_cast<std::size_t>(get_u64(key, fallback));
  }

  bool get_bool(const std::string &key, bool fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    if (*v == "true" || *v == "1") return true;
    if (*v == "false" || *v == "0") return false;
    throw ConfigError("key '" + key + "': '" + *v + "' is not a boolean");
  }

  /// `lo,hi` inclusive range.
  Range get_range(const std::string &key, Range fallback) const {
    auto v = get(key);
    if (!v) return fallback;
    const auto comma = v->find(',');
    if (comma == std::string::npos)
      throw ConfigError("key '" + key + "': expected 'lo,hi'");
    return {static_cast<std::size_t>(
                parse_u64(key, detail::trim(v->substr(0, comma)))),
            static_cast<std::size_t>(
                parse_u64(key, detail::trim(v->substr(comma + 1))))};
  }

  /// Sorted `key = value` lines; equal configs give equal text.
  std::string canonical() const {
    std::string out;
    for (const auto &[k, v] : values_) out += k + " = " + v + "\n";
    return out;
  }

  const std::map<std::string, std::string> &entries() const { return values_; }

 private:
  static std::uint64_t parse_u64(const std::string &key, const std::string &s) {
    std::uint64_t out = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    if (ec != std::errc() || p != s.data() + s.size())
      throw ConfigError("key '" + key + "': '" + s +
                        "' is not a non-negative integer");
    return out;
  }

  std::map<std::string, std::string> values_;
};

}  // namespace anchor
