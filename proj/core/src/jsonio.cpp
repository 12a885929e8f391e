// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
#include "hybridmesh/jsonio.hpp"

namespace hybridmesh {

std::string canonical(const Json& j) { return j.dump(); }

FieldReader::FieldReader(const Json& j, std::string context)
    : j_(j), context_(std::move(context)) {
  if (!j_.is_object()) {
    throw MalformedSpec(context_ + ": expected a JSON object");
  }
}

bool FieldReader::has(const std::string& key) const { return j_.contains(key); }

const Json& FieldReader::require(const std::string& key,
                                 const char* type_name) {
  auto it = j_.find(key);
  if (it == j_.end()) {
    throw MalformedSpec(context_ + ": missing required field '" + key + "'");
  }
  seen_.insert(key);
  (void)type_name;
  return *it;
}

std::string FieldReader::get_string(const std::string& key) {
  const Json& v = require(key, "string");
  if (!v.is_string()) {
    throw MalformedSpec(context_ + ": field '" + key + "' must be a string");
  }
  return v.get<std::string>();
}

std::string FieldReader::get_string_or(const std::string& key,
                                       std::string fallback) {
  if (!j_.contains(key)) return fallback;
  return get_string(key);
}

std::int64_t FieldReader::get_int(const std::string& key) {
  const Json& v = require(key, "integer");
  if (!v.is_number_integer()) {
    throw MalformedSpec(context_ + ": field '" + key + "' must be an integer");
  }
  return v.get<std::int64_t>();
}

std::int64_t FieldReader::get_int_or(const std::string& key,
                                     std::int64_t fallback) {
  if (!j_.contains(key)) return fallback;
  return get_int(key);
}

double FieldReader::get_double(const std::string& key) {
  const Json& v = require(key, "number");
  if (!v.is_number()) {
    throw MalformedSpec(context_ + ": field '" + key + "' must be a number");
  }
  return v.get<double>();
}

double FieldReader::get_double_or(const std::string& key, double fallback) {
  if (!j_.contains(key)) return fallback;
  return get_double(key);
}

bool FieldReader::get_bool_or(const std::string& key, bool fallback) {
  if (!j_.contains(key)) return fallback;
  const Json& v = require(key, "bool");
  if (!v.is_boolean()) {
    throw MalformedSpec(context_ + ": field '" + key + "' must be a boolean");
  }
  return v.get<bool>();
}

Json FieldReader::get_array_or_empty(const std::string& key) {
  if (!j_.contains(key)) return Json::array();
  const Json& v = require(key, "array");
  if (!v.is_array()) {
    throw MalformedSpec(context_ + ": field '" + key + "' must be an array");
  }
  return v;
}

Json FieldReader::get_object_or_empty(const std::string& key) {
  if (!j_.contains(key)) return Json::object();
  const Json& v = require(key, "object");
  if (!v.is_object()) {
    throw MalformedSpec(context_ + ": field '" + key + "' must be an object");
  }
  return v;
}

const Json* FieldReader::get_raw(const std::string& key) {
  auto it = j_.find(key);
  if (it == j_.end()) return nullptr;
  seen_.insert(key);
  return &*it;
}

void FieldReader::finish() {
  for (auto it = j_.begin(); it != j_.end(); ++it) {
    if (!seen_.count(it.key())) {
      throw MalformedSpec(context_ + ": unknown field '" + it.key() + "'");
    }
  }
}

}  // namespace hybridmesh
