// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
//
// Builds a simulated world from a scenario, drives the selected workflow
// mode through it, and emits the run artifacts: metrics.json, events.ndjson,
// manifest.json, and timeline.csv. All outputs are byte-deterministic for a
// fixed (scenario, seed).
#pragma once

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "hybridmesh/engine.hpp"
#include "hybridmesh/executors.hpp"
#include "hybridmesh/metadata_repo.hpp"
#include "hybridmesh/scenario.hpp"
#include "hybridmesh/sites.hpp"
#include "hybridmesh/store.hpp"
#include "hybridmesh/tes.hpp"
#include "hybridmesh/workflow.hpp"

namespace hybridmesh {

// Backends the runner derives when the scenario's list is empty: local
// executors per site for manual/federated/gateway, one partition-per-site
// cluster for overlay, and a primary/secondary pair plus router for
// overflow. Echoed into the effective config so reloads are explicit.
std::vector<BackendDescriptor> effective_backends(const ScenarioConfig& c);

class Runner {
 public:
  explicit Runner(ScenarioConfig config);

  // Emits the run_header record, runs the workflow, emits run_footer.
  RunReport execute();

  // MetricsDoc: the report plus config digest, event-log digest, and tool
  // version. Valid after execute().
  Json metrics_doc() const;

  // Writes metrics.json, events.ndjson, manifest.json, timeline.csv.
  void write_outputs(const std::string& out_dir) const;

  // CSV of per-site running-task counts over time, derived from the log.
  std::string timeline_csv() const;

  const ScenarioConfig& config() const { return config_; }
  std::string config_digest() const;
  Engine& engine() { return *engine_; }
  const Engine& engine() const { return *engine_; }
  ObjectStore& store() { return *store_; }
  SiteRegistry& sites() { return *sites_; }
  const RunReport& report() const { return report_; }

 private:
  ScenarioConfig config_;
  std::unique_ptr<Engine> engine_;
  std::unique_ptr<SiteRegistry> sites_;
  std::unique_ptr<ObjectStore> store_;
  std::vector<std::unique_ptr<LocalExecutor>> locals_;
  std::unique_ptr<BatchCluster> cluster_;
  std::unique_ptr<OverflowRouter> router_;
  std::unique_ptr<SimRepo> repo_;
  std::unique_ptr<TesGateway> gateway_;
  std::vector<std::unique_ptr<TesNode>> nodes_;
  RunContext ctx_;
  RunReport report_;
  bool executed_ = false;

  void build();
  Json header_fields() const;
};

// Convenience wrapper for the CLI and tests: load, run, write artifacts.
// Returns the report.
RunReport run_scenario_file(const std::string& scenario_path,
                            const std::string& out_dir);

}  // namespace hybridmesh
