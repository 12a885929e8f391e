// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
//
// Minimal TOML reader covering the scenario schema: tables, arrays of
// tables (including nested ones like [[backends.partitions]]), bare and
// quoted keys, strings, integers, floats (with inf), booleans, and arrays
// that may span lines. Dates and inline tables are rejected. Everything
// lands in a nlohmann::json document, so downstream code has one config
// representation regardless of the input format.
#pragma once

#include <string>

#include "hybridmesh/jsonio.hpp"

namespace hybridmesh::toml {

// Throws ParseError (with a 1-based line) on malformed input.
Json parse(const std::string& text);

// Reads the whole file; throws ConfigError if unreadable.
Json parse_file(const std::string& path);

}  // namespace hybridmesh::toml
