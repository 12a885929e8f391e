// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <stdexcept>
#include <string>

namespace hybridmesh {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Task lifecycle / validation.
class IllegalTransition : public Error {
 public:
  using Error::Error;
};
class UnknownSite : public Error {
 public:
  using Error::Error;
};
class DuplicateTaskId : public Error {
 public:
  using Error::Error;
};
class MalformedSpec : public Error {
 public:
  using Error::Error;
};

// Simulation engine.
class PastEvent : public Error {
 public:
  using Error::Error;
};
class NonTermination : public Error {
 public:
  using Error::Error;
};

// Storage.
class SiteDown : public Error {
 public:
  using Error::Error;
};
class ObjectNotFound : public Error {
 public:
  using Error::Error;
};
class NoReachableReplica : public Error {
 public:
  using Error::Error;
};

// Executors.
class NoEligiblePartition : public Error {
 public:
  using Error::Error;
};

// TES layer.
class UnknownTask : public Error {
 public:
  using Error::Error;
};
class NoHealthyNode : public Error {
 public:
  using Error::Error;
};
class UnknownNode : public Error {
 public:
  using Error::Error;
};
class NodeUnreachable : public Error {
 public:
  using Error::Error;
};

// Configuration, logs, wire mode.
class ConfigError : public Error {
 public:
  using Error::Error;
};
class CorruptLog : public Error {
 public:
  using Error::Error;
};
class BindError : public Error {
 public:
  using Error::Error;
};

/// Raised by the scenario reader; carries the 1-based source line.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, int line)
      : Error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace hybridmesh
