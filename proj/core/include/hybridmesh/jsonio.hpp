// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
//
// Thin helpers around nlohmann::json: canonical serialization (sorted keys,
// no whitespace) and a strict reader that rejects unknown fields so that
// malformed documents fail loudly instead of being half-parsed.
#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "hybridmesh/errors.hpp"
#include "nlohmann/json.hpp"

namespace hybridmesh {

using Json = nlohmann::json;

// Canonical form used for digests: keys sorted (nlohmann objects are
// std::map-backed, so iteration order is already sorted), no whitespace.
std::string canonical(const Json& j);

// Reads fields out of a JSON object while tracking which keys were consumed.
// Call finish() after the last read; it throws MalformedSpec when unknown
// keys remain.
class FieldReader {
 public:
  FieldReader(const Json& j, std::string context);

  bool has(const std::string& key) const;

  std::string get_string(const std::string& key);
  std::string get_string_or(const std::string& key, std::string fallback);
  std::int64_t get_int(const std::string& key);
  std::int64_t get_int_or(const std::string& key, std::int64_t fallback);
  double get_double(const std::string& key);
  double get_double_or(const std::string& key, double fallback);
  bool get_bool_or(const std::string& key, bool fallback);
  Json get_array_or_empty(const std::string& key);
  Json get_object_or_empty(const std::string& key);

  // Marks a key handled without interpreting it.
  const Json* get_raw(const std::string& key);

  void finish();

 private:
  const Json& j_;
  std::string context_;
  std::set<std::string> seen_;

  const Json& require(const std::string& key, const char* type_name);
};

}  // namespace hybridmesh
