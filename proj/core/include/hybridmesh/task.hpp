// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
//
// Shared domain types: sites, data references, task specs, and the task
// lifecycle state machine. All types here are immutable values; the state
// machine is a pure function over (state, event).
#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "hybridmesh/errors.hpp"
#include "hybridmesh/jsonio.hpp"

namespace hybridmesh {

// Short stable site token. Lexicographic order on SiteId is the global
// tie-breaker for every deterministic choice in the system.
using SiteId = std::string;

struct ResourceRequest {
  std::int64_t cpu_cores = 1;
  double ram_gb = 0.0;
  double disk_gb = 0.0;

  Json to_json() const;
  static ResourceRequest from_json(const Json& j);
  bool operator==(const ResourceRequest&) const = default;
};

// Content-addressed input reference. size_bytes is the accounting size used
// by the transfer cost model; home_site is where the bytes initially live.
struct DataRef {
  std::string object_id;
  std::int64_t size_bytes = 0;
  SiteId home_site;

  Json to_json() const;
  static DataRef from_json(const Json& j);
  bool operator==(const DataRef&) const = default;
};

// Abstract work descriptor: a logical duration plus declared outputs. Each
// name in TaskSpec.outputs is stored as a content-addressed object whose
// content is the name itself and whose accounting size is
// output_size_bytes. poison marks the command as deterministically failing
// (nonzero exit) once its duration elapses.
struct TaskCommand {
  double duration_s = 0.0;
  std::int64_t output_size_bytes = 0;
  bool poison = false;

  Json to_json() const;
  static TaskCommand from_json(const Json& j);
  bool operator==(const TaskCommand&) const = default;
};

struct TaskSpec {
  std::string id;
  TaskCommand command;
  std::vector<DataRef> inputs;
  std::vector<std::string> outputs;
  ResourceRequest resources;
  std::int64_t node_count = 1;
  std::int64_t executor_count = 1;

  Json to_json() const;
  static TaskSpec from_json(const Json& j);
  bool operator==(const TaskSpec&) const = default;
};

enum class TaskState {
  QUEUED,
  INITIALIZING,
  RUNNING,
  COMPLETE,
  EXECUTOR_ERROR,
  SYSTEM_ERROR,
  CANCELED,
};

enum class LifecycleEvent {
  start_init,
  start_run,
  finish_ok,
  finish_executor_err,
  finish_system_err,
  cancel,
};

const char* to_string(TaskState s);
const char* to_string(LifecycleEvent e);
TaskState task_state_from_string(const std::string& s);
LifecycleEvent lifecycle_event_from_string(const std::string& s);

bool is_terminal(TaskState s);

// Returns the unique successor state, or throws IllegalTransition when the
// (state, event) pair is not in the table. Terminal states are absorbing.
TaskState advance_state(TaskState current, LifecycleEvent event);

// A TaskSpec that passed structural validation against a known site set.
struct ValidatedTask {
  TaskSpec spec;
};

// Tracks ids seen so far so duplicate submissions are rejected.
class TaskValidator {
 public:
  explicit TaskValidator(std::set<SiteId> known_sites);

  ValidatedTask validate(const TaskSpec& spec);

 private:
  std::set<SiteId> known_sites_;
  std::set<std::string> seen_ids_;
};

}  // namespace hybridmesh
