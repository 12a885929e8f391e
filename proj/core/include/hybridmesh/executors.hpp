// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
//
// Execution backends. All backends share one contract: submit a validated
// task with a state callback, and the backend walks the task through the
// lifecycle on the simulated clock (staging inputs, running for the logical
// duration, writing declared outputs). Three kinds exist:
//
//   LocalExecutor   slot-limited FIFO executor on one site
//   BatchCluster    multi-partition cluster; jobs land on the most-free
//                   feasible partition, or are pinned by hint
//   OverflowRouter  primary backend plus a batch-like secondary; eligible
//                   single-node single-container tasks spill over when the
//                   primary is at capacity, paying remote-mount traffic
#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hybridmesh/engine.hpp"
#include "hybridmesh/sites.hpp"
#include "hybridmesh/store.hpp"
#include "hybridmesh/task.hpp"

namespace hybridmesh {

using StateFn =
    std::function<void(const std::string& task_id, TaskState state)>;

struct SubmitOptions {
  std::string partition_hint;  // batch_cluster only; empty = unpinned
  // When set, inputs and outputs traverse the link between this site and
  // the executing site as mount traffic, and the output object lands at
  // mount_peer instead of the executing site.
  SiteId mount_peer;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual const std::string& name() const = 0;
  virtual void submit(const ValidatedTask& task, const SubmitOptions& opts,
                      StateFn on_state) = 0;
  // True when the task was still cancelable (QUEUED/INITIALIZING/RUNNING).
  virtual bool cancel(const std::string& task_id) = 0;
  virtual TaskState state_of(const std::string& task_id) const = 0;
  virtual SiteId site_of(const std::string& task_id) const = 0;
  virtual std::int64_t free_slots() const = 0;
  // Task ids still QUEUED (used for starvation reporting).
  virtual std::vector<std::string> queued_tasks() const = 0;
};

// Shared lifecycle plumbing for slot-holding backends.
class SlottedBackend : public Backend {
 public:
  SlottedBackend(Engine& engine, SiteRegistry& sites, ObjectStore& store,
                 std::string name);

  const std::string& name() const override { return name_; }
  bool cancel(const std::string& task_id) override;
  TaskState state_of(const std::string& task_id) const override;
  SiteId site_of(const std::string& task_id) const override;
  std::vector<std::string> queued_tasks() const override;

  // Relative duration jitter amplitude (0 = exact durations). Draws come
  // from the engine RNG in event order, preserving determinism.
  void set_duration_jitter(double amplitude) { duration_jitter_ = amplitude; }

 protected:
  struct Active {
    ValidatedTask task;
    SubmitOptions opts;
    StateFn on_state;
    TaskState state = TaskState::QUEUED;
    SiteId site;
    std::string partition;
    EventId timer = 0;
    bool timer_pending = false;
  };

  Engine& engine_;
  SiteRegistry& sites_;
  ObjectStore& store_;
  std::string name_;
  std::map<std::string, Active> tasks_;
  std::deque<std::string> queue_;

  double duration_jitter_ = 0.0;

  void enqueue(const ValidatedTask& task, const SubmitOptions& opts,
               StateFn on_state);
  // Dispatches a queued task onto (site, partition): INITIALIZING, staging,
  // run, outputs, terminal transition.
  void dispatch(Active& a, const SiteId& site, const std::string& partition);
  void transition(Active& a, LifecycleEvent ev);
  // Releases the slot if held, applies the terminal transition, re-pumps.
  void finish_terminal(Active& a, LifecycleEvent ev);
  // Kills INITIALIZING/RUNNING tasks at `site`.
  void kill_active_at(const SiteId& site);

  virtual void pump() = 0;
  virtual void release_slot(Active& a) = 0;

 private:
  void begin_run(Active& a);
  void finish_run(Active& a);
};

class LocalExecutor : public SlottedBackend {
 public:
  LocalExecutor(Engine& engine, SiteRegistry& sites, ObjectStore& store,
                std::string name, SiteId site, std::int64_t slots);

  void submit(const ValidatedTask& task, const SubmitOptions& opts,
              StateFn on_state) override;
  std::int64_t free_slots() const override;
  const SiteId& site() const { return site_; }

 protected:
  void pump() override;
  void release_slot(Active& a) override;

 private:
  SiteId site_;
  std::int64_t slots_;
  std::int64_t busy_ = 0;
};

struct PartitionSpec {
  std::string name;
  SiteId site;
  std::int64_t slots = 1;
  std::int64_t max_cores = 0;   // 0 = unlimited
  double max_ram_gb = 0.0;      // 0 = unlimited
};

class BatchCluster : public SlottedBackend {
 public:
  BatchCluster(Engine& engine, SiteRegistry& sites, ObjectStore& store,
               std::string name, std::vector<PartitionSpec> partitions);

  void submit(const ValidatedTask& task, const SubmitOptions& opts,
              StateFn on_state) override;
  std::int64_t free_slots() const override;

  static bool statically_feasible(const ValidatedTask& task,
                                  const PartitionSpec& p);
  // Partition the task would start on right now; hint wins when it is
  // statically feasible, otherwise the most-free feasible partition, ties
  // by partition name. Throws NoEligiblePartition when nothing can take
  // the task at this instant.
  std::string select_partition(const ValidatedTask& task,
                               const std::string& hint) const;
  std::int64_t free_in(const std::string& partition) const;
  const std::vector<PartitionSpec>& partitions() const { return partitions_; }

 protected:
  void pump() override;
  void release_slot(Active& a) override;

 private:
  std::vector<PartitionSpec> partitions_;
  std::map<std::string, std::int64_t> busy_;

  const PartitionSpec* find_partition(const std::string& name) const;
  std::optional<std::string> pick_now(const ValidatedTask& task,
                                      const std::string& hint) const;
};

enum class Placement { PRIMARY, OFFLOADED, QUEUED_PRIMARY };
const char* to_string(Placement p);

// Capacity-overflow router between an orchestrator-like primary and a
// batch-like secondary. Only single-node, single-container tasks may
// spill; everything else waits for the primary.
class OverflowRouter : public Backend {
 public:
  OverflowRouter(Engine& engine, std::string name, LocalExecutor& primary,
                 Backend& secondary, std::int64_t offload_cap = 0);

  Placement admit_or_offload(const ValidatedTask& task) const;

  const std::string& name() const override { return name_; }
  void submit(const ValidatedTask& task, const SubmitOptions& opts,
              StateFn on_state) override;
  bool cancel(const std::string& task_id) override;
  TaskState state_of(const std::string& task_id) const override;
  SiteId site_of(const std::string& task_id) const override;
  std::int64_t free_slots() const override;
  std::vector<std::string> queued_tasks() const override;

  std::int64_t offloads_in_flight() const { return offloads_in_flight_; }

 private:
  Engine& engine_;
  std::string name_;
  LocalExecutor& primary_;
  Backend& secondary_;
  std::int64_t offload_cap_;
  std::int64_t offloads_in_flight_ = 0;
  std::map<std::string, Backend*> placed_;
};

}  // namespace hybridmesh
