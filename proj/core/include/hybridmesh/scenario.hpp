// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
//
// Declarative experiment input. A scenario names the sites, the link
// matrix, the backends, the workflow shape, the failure schedule, and the
// tuning knobs for one run. Hand-written scenarios are TOML; the effective
// config (defaults filled in) echoes back as canonical JSON, and reloading
// that echo reproduces the identical run.
#pragma once

#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "hybridmesh/executors.hpp"
#include "hybridmesh/jsonio.hpp"
#include "hybridmesh/sites.hpp"
#include "hybridmesh/workflow.hpp"

namespace hybridmesh {

struct LinkSpec {
  SiteId from;
  SiteId to;
  double bandwidth_gbps = 0.0;
  double latency_s = 0.0;
  bool symmetric = true;  // also install the reverse direction
};

struct FailureSpec {
  SiteId site;
  double down_at = 0.0;
  double up_at = std::numeric_limits<double>::infinity();  // inf = stays down
};

struct PreemptionSpec {
  SiteId site;
  double at = 0.0;
};

// One executor backend. `kind` selects which of the remaining fields apply:
//   local            site
//   batch_cluster    partitions
//   overflow_router  primary_site, secondary_site, offload_cap
// When the list is empty the runner derives mode-appropriate defaults.
struct BackendDescriptor {
  std::string kind;
  std::string name;  // optional; defaulted from kind and site
  SiteId site;
  std::vector<PartitionSpec> partitions;
  SiteId primary_site;
  SiteId secondary_site;
  std::int64_t offload_cap = 0;  // 0 = unlimited concurrent offloads
};

struct TuningConfig {
  bool gather = true;              // consolidate outputs at common_site
  std::string cost_model = "bytes";  // gateway routing: bytes | time
  double lease_s = 0.0;            // 0 = derive from durations and links
  std::int64_t max_retries = 2;    // lease re-claim budget per batch
  double poll_interval_s = 1.0;
  double heartbeat_interval_s = 5.0;
  double heartbeat_timeout_s = 0.0;  // 0 = 3x heartbeat interval
  double duration_jitter = 0.0;      // +-fraction of nominal task duration
  std::int64_t max_events = 10'000'000;
  double default_bandwidth_gbps = 0.0;  // 0 = require a complete link matrix
  double default_latency_s = 0.0;
  SiteId controller_site;  // federated-controller; empty = first site
};

struct ScenarioConfig {
  std::uint64_t seed = 0;
  RunMode mode = RunMode::MANUAL;
  SiteId common_site;  // empty = first site (by id)
  std::vector<SiteDescriptor> sites;
  std::vector<LinkSpec> links;
  std::vector<FailureSpec> failures;
  std::vector<PreemptionSpec> preemptions;
  std::vector<BackendDescriptor> backends;
  WorkflowSpec workflow;
  TuningConfig tuning;

  // Effective-config echo: every field explicit, canonical key order.
  Json to_json() const;
  static ScenarioConfig from_json(const Json& j);

  // Full structural and cross-reference validation; throws ConfigError
  // naming the offending reference. Called by from_json.
  void validate() const;
};

// The backend's display name: the explicit name when set, otherwise a
// stable default derived from kind and site.
std::string backend_name(const BackendDescriptor& b);

// Loads TOML (default) or JSON (".json" suffix). Throws ParseError or
// ConfigError.
ScenarioConfig load_scenario(const std::string& path);

// Parses scenario text in the named format ("toml" or "json").
ScenarioConfig parse_scenario(const std::string& text,
                              const std::string& format);

}  // namespace hybridmesh
