// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
#include "hybridmesh/executors.hpp"

#include <algorithm>

namespace hybridmesh {

SlottedBackend::SlottedBackend(Engine& engine, SiteRegistry& sites,
                               ObjectStore& store, std::string name)
    : engine_(engine), sites_(sites), store_(store), name_(std::move(name)) {
  sites_.on_site_down([this](const SiteId& s) { kill_active_at(s); });
  sites_.on_preempt([this](const SiteId& s) { kill_active_at(s); });
  sites_.on_site_up([this](const SiteId&) { pump(); });
}

void SlottedBackend::enqueue(const ValidatedTask& task,
                             const SubmitOptions& opts, StateFn on_state) {
  const std::string& id = task.spec.id;
  if (tasks_.count(id)) {
    throw DuplicateTaskId("task '" + id + "' already submitted to " + name_);
  }
  Active a;
  a.task = task;
  a.opts = opts;
  a.on_state = std::move(on_state);
  tasks_.emplace(id, std::move(a));
  queue_.push_back(id);
  Json rec{{"task_id", id},
           {"backend", name_},
           {"node_count", task.spec.node_count},
           {"executor_count", task.spec.executor_count},
           {"duration_s", task.spec.command.duration_s}};
  if (!opts.partition_hint.empty()) rec["partition_hint"] = opts.partition_hint;
  engine_.note("submit", std::move(rec));
}

void SlottedBackend::transition(Active& a, LifecycleEvent ev) {
  a.state = advance_state(a.state, ev);
  Json rec{{"task_id", a.task.spec.id},
           {"backend", name_},
           {"event", to_string(ev)},
           {"state", to_string(a.state)}};
  if (!a.site.empty()) rec["site"] = a.site;
  if (!a.partition.empty()) rec["partition"] = a.partition;
  engine_.note("task_state", std::move(rec));
  if (a.on_state) a.on_state(a.task.spec.id, a.state);
}

void SlottedBackend::finish_terminal(Active& a, LifecycleEvent ev) {
  if (!a.site.empty()) release_slot(a);
  transition(a, ev);
  pump();
}

void SlottedBackend::dispatch(Active& a, const SiteId& site,
                              const std::string& partition) {
  a.site = site;
  a.partition = partition;
  transition(a, LifecycleEvent::start_init);
  double ready = engine_.now();
  const std::string& id = a.task.spec.id;
  try {
    if (!a.opts.mount_peer.empty()) {
      std::int64_t total_in = 0;
      for (const DataRef& d : a.task.spec.inputs) total_in += d.size_bytes;
      ready = store_.charge(total_in, a.opts.mount_peer, site,
                            "mount:in:" + id, id);
    } else {
      for (const DataRef& d : a.task.spec.inputs) {
        ready = std::max(ready, store_.fetch(d.object_id, site, id));
      }
    }
  } catch (const NoReachableReplica&) {
    finish_terminal(a, LifecycleEvent::finish_system_err);
    return;
  } catch (const SiteDown&) {
    finish_terminal(a, LifecycleEvent::finish_system_err);
    return;
  }
  a.timer = engine_.schedule_internal(ready, [this, id] {
    Active& t = tasks_.at(id);
    t.timer_pending = false;
    begin_run(t);
  });
  a.timer_pending = true;
}

void SlottedBackend::begin_run(Active& a) {
  if (!sites_.is_up(a.site)) {
    finish_terminal(a, LifecycleEvent::finish_system_err);
    return;
  }
  transition(a, LifecycleEvent::start_run);
  double duration = a.task.spec.command.duration_s;
  if (duration_jitter_ > 0.0) {
    duration *= 1.0 + duration_jitter_ * (2.0 * engine_.rng().unit() - 1.0);
    if (duration < 0.0) duration = 0.0;
  }
  const std::string& id = a.task.spec.id;
  a.timer = engine_.schedule(
      engine_.now() + duration, ScheduledKind::task_done,
      Json{{"task_id", id}, {"backend", name_}, {"site", a.site}},
      [this, id] {
        Active& t = tasks_.at(id);
        t.timer_pending = false;
        finish_run(t);
      });
  a.timer_pending = true;
}

void SlottedBackend::finish_run(Active& a) {
  if (a.task.spec.command.poison) {
    finish_terminal(a, LifecycleEvent::finish_executor_err);
    return;
  }
  const std::string& id = a.task.spec.id;
  if (!a.opts.mount_peer.empty()) {
    std::int64_t total_out =
        a.task.spec.command.output_size_bytes *
        static_cast<std::int64_t>(a.task.spec.outputs.size());
    double landed =
        store_.charge(total_out, a.site, a.opts.mount_peer, "mount:out:" + id, id);
    a.timer = engine_.schedule_internal(landed, [this, id] {
      Active& t = tasks_.at(id);
      t.timer_pending = false;
      if (!sites_.is_up(t.opts.mount_peer)) {
        finish_terminal(t, LifecycleEvent::finish_system_err);
        return;
      }
      for (const std::string& out : t.task.spec.outputs) {
        store_.put(t.opts.mount_peer, out, t.task.spec.command.output_size_bytes);
      }
      finish_terminal(t, LifecycleEvent::finish_ok);
    });
    a.timer_pending = true;
    return;
  }
  for (const std::string& out : a.task.spec.outputs) {
    store_.put(a.site, out, a.task.spec.command.output_size_bytes);
  }
  finish_terminal(a, LifecycleEvent::finish_ok);
}

bool SlottedBackend::cancel(const std::string& task_id) {
  auto it = tasks_.find(task_id);
  if (it == tasks_.end()) {
    throw UnknownTask("unknown task '" + task_id + "' on " + name_);
  }
  Active& a = it->second;
  if (is_terminal(a.state)) return false;
  if (a.state == TaskState::QUEUED) {
    queue_.erase(std::find(queue_.begin(), queue_.end(), task_id));
    transition(a, LifecycleEvent::cancel);
    return true;
  }
  if (a.timer_pending) {
    engine_.cancel(a.timer);
    a.timer_pending = false;
  }
  finish_terminal(a, LifecycleEvent::cancel);
  return true;
}

TaskState SlottedBackend::state_of(const std::string& task_id) const {
  auto it = tasks_.find(task_id);
  if (it == tasks_.end()) {
    throw UnknownTask("unknown task '" + task_id + "' on " + name_);
  }
  return it->second.state;
}

SiteId SlottedBackend::site_of(const std::string& task_id) const {
  auto it = tasks_.find(task_id);
  if (it == tasks_.end()) {
    throw UnknownTask("unknown task '" + task_id + "' on " + name_);
  }
  return it->second.site;
}

std::vector<std::string> SlottedBackend::queued_tasks() const {
  return {queue_.begin(), queue_.end()};
}

void SlottedBackend::kill_active_at(const SiteId& site) {
  for (auto& [id, a] : tasks_) {
    if (a.site != site || a.state == TaskState::QUEUED || is_terminal(a.state)) {
      continue;
    }
    if (a.timer_pending) {
      engine_.cancel(a.timer);
      a.timer_pending = false;
    }
    finish_terminal(a, LifecycleEvent::finish_system_err);
  }
}

LocalExecutor::LocalExecutor(Engine& engine, SiteRegistry& sites,
                             ObjectStore& store, std::string name, SiteId site,
                             std::int64_t slots)
    : SlottedBackend(engine, sites, store, std::move(name)),
      site_(std::move(site)),
      slots_(slots) {
  if (slots_ < 1) throw ConfigError("backend '" + name_ + "': slots must be >= 1");
  sites.site(site_);  // existence check
}

void LocalExecutor::submit(const ValidatedTask& task, const SubmitOptions& opts,
                           StateFn on_state) {
  if (!opts.partition_hint.empty()) {
    throw NoEligiblePartition("backend '" + name_ + "' has no partitions");
  }
  enqueue(task, opts, std::move(on_state));
  pump();
}

std::int64_t LocalExecutor::free_slots() const { return slots_ - busy_; }

void LocalExecutor::pump() {
  if (!sites_.is_up(site_)) return;
  while (busy_ < slots_ && !queue_.empty()) {
    std::string id = queue_.front();
    queue_.pop_front();
    busy_ += 1;
    dispatch(tasks_.at(id), site_, "");
  }
}

void LocalExecutor::release_slot(Active&) { busy_ -= 1; }

BatchCluster::BatchCluster(Engine& engine, SiteRegistry& sites,
                           ObjectStore& store, std::string name,
                           std::vector<PartitionSpec> partitions)
    : SlottedBackend(engine, sites, store, std::move(name)),
      partitions_(std::move(partitions)) {
  if (partitions_.empty()) {
    throw ConfigError("backend '" + name_ + "': needs at least one partition");
  }
  for (const PartitionSpec& p : partitions_) {
    if (p.name.empty()) throw ConfigError("partition name must be nonempty");
    if (p.slots < 1) {
      throw ConfigError("partition '" + p.name + "': slots must be >= 1");
    }
    sites.site(p.site);  // existence check
    if (busy_.count(p.name)) {
      throw ConfigError("duplicate partition '" + p.name + "'");
    }
    busy_[p.name] = 0;
  }
}

bool BatchCluster::statically_feasible(const ValidatedTask& task,
                                       const PartitionSpec& p) {
  if (p.max_cores > 0 && task.spec.resources.cpu_cores > p.max_cores) {
    return false;
  }
  if (p.max_ram_gb > 0.0 && task.spec.resources.ram_gb > p.max_ram_gb) {
    return false;
  }
  return true;
}

const PartitionSpec* BatchCluster::find_partition(const std::string& name) const {
  for (const PartitionSpec& p : partitions_) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

std::int64_t BatchCluster::free_in(const std::string& partition) const {
  const PartitionSpec* p = find_partition(partition);
  if (!p) throw ConfigError("unknown partition '" + partition + "'");
  return p->slots - busy_.at(partition);
}

std::optional<std::string> BatchCluster::pick_now(
    const ValidatedTask& task, const std::string& hint) const {
  if (!hint.empty()) {
    const PartitionSpec* p = find_partition(hint);
    if (!p || !statically_feasible(task, *p)) return std::nullopt;
    if (sites_.is_up(p->site) && free_in(hint) > 0) return hint;
    return std::nullopt;  // pinned: wait for the hinted partition
  }
  const PartitionSpec* best = nullptr;
  std::int64_t best_free = 0;
  for (const PartitionSpec& p : partitions_) {
    if (!statically_feasible(task, p)) continue;
    if (!sites_.is_up(p.site)) continue;
    std::int64_t free = p.slots - busy_.at(p.name);
    if (free <= 0) continue;
    if (!best || free > best_free || (free == best_free && p.name < best->name)) {
      best = &p;
      best_free = free;
    }
  }
  if (!best) return std::nullopt;
  return best->name;
}

std::string BatchCluster::select_partition(const ValidatedTask& task,
                                           const std::string& hint) const {
  auto pick = pick_now(task, hint);
  if (!pick) {
    throw NoEligiblePartition("no partition can take task '" + task.spec.id +
                              "' on " + name_);
  }
  return *pick;
}

void BatchCluster::submit(const ValidatedTask& task, const SubmitOptions& opts,
                          StateFn on_state) {
  // Static feasibility is a permanent property; reject up front.
  if (!opts.partition_hint.empty()) {
    const PartitionSpec* p = find_partition(opts.partition_hint);
    if (!p) {
      throw NoEligiblePartition("unknown partition '" + opts.partition_hint +
                                "' on " + name_);
    }
    if (!statically_feasible(task, *p)) {
      throw NoEligiblePartition("task '" + task.spec.id +
                                "' does not fit pinned partition '" +
                                opts.partition_hint + "'");
    }
  } else {
    bool any = false;
    for (const PartitionSpec& p : partitions_) {
      if (statically_feasible(task, p)) {
        any = true;
        break;
      }
    }
    if (!any) {
      throw NoEligiblePartition("task '" + task.spec.id +
                                "' fits no partition on " + name_);
    }
  }
  enqueue(task, opts, std::move(on_state));
  pump();
}

std::int64_t BatchCluster::free_slots() const {
  std::int64_t total = 0;
  for (const PartitionSpec& p : partitions_) total += p.slots - busy_.at(p.name);
  return total;
}

void BatchCluster::pump() {
  // FIFO with skip: the oldest job that can start anywhere starts; jobs
  // whose only eligible partitions are busy do not block later jobs bound
  // for other partitions.
  bool progress = true;
  while (progress) {
    progress = false;
    for (auto it = queue_.begin(); it != queue_.end(); ++it) {
      Active& a = tasks_.at(*it);
      auto pick = pick_now(a.task, a.opts.partition_hint);
      if (!pick) continue;
      std::string id = *it;
      queue_.erase(it);
      busy_[*pick] += 1;
      dispatch(tasks_.at(id), find_partition(*pick)->site, *pick);
      progress = true;
      break;  // dispatch may reenter; restart the scan
    }
  }
}

void BatchCluster::release_slot(Active& a) { busy_[a.partition] -= 1; }

const char* to_string(Placement p) {
  switch (p) {
    case Placement::PRIMARY: return "primary";
    case Placement::OFFLOADED: return "offloaded";
    case Placement::QUEUED_PRIMARY: return "queued_primary";
  }
  return "?";
}

OverflowRouter::OverflowRouter(Engine& engine, std::string name,
                               LocalExecutor& primary, Backend& secondary,
                               std::int64_t offload_cap)
    : engine_(engine),
      name_(std::move(name)),
      primary_(primary),
      secondary_(secondary),
      offload_cap_(offload_cap) {}

Placement OverflowRouter::admit_or_offload(const ValidatedTask& task) const {
  if (primary_.free_slots() > 0) return Placement::PRIMARY;
  bool eligible =
      task.spec.node_count == 1 && task.spec.executor_count == 1;
  if (!eligible) return Placement::QUEUED_PRIMARY;
  if (offload_cap_ > 0 && offloads_in_flight_ >= offload_cap_) {
    return Placement::QUEUED_PRIMARY;
  }
  return Placement::OFFLOADED;
}

void OverflowRouter::submit(const ValidatedTask& task,
                            const SubmitOptions& opts, StateFn on_state) {
  Placement p = admit_or_offload(task);
  engine_.note("placement", Json{{"task_id", task.spec.id},
                                 {"backend", name_},
                                 {"placement", to_string(p)}});
  if (p == Placement::OFFLOADED) {
    offloads_in_flight_ += 1;
    placed_[task.spec.id] = &secondary_;
    SubmitOptions o = opts;
    o.mount_peer = primary_.site();
    StateFn fn = std::move(on_state);
    secondary_.submit(task, o,
                      [this, fn](const std::string& id, TaskState s) {
                        if (is_terminal(s)) offloads_in_flight_ -= 1;
                        if (fn) fn(id, s);
                      });
    return;
  }
  placed_[task.spec.id] = &primary_;
  primary_.submit(task, opts, std::move(on_state));
}

bool OverflowRouter::cancel(const std::string& task_id) {
  auto it = placed_.find(task_id);
  if (it == placed_.end()) {
    throw UnknownTask("unknown task '" + task_id + "' on " + name_);
  }
  return it->second->cancel(task_id);
}

TaskState OverflowRouter::state_of(const std::string& task_id) const {
  auto it = placed_.find(task_id);
  if (it == placed_.end()) {
    throw UnknownTask("unknown task '" + task_id + "' on " + name_);
  }
  return it->second->state_of(task_id);
}

SiteId OverflowRouter::site_of(const std::string& task_id) const {
  auto it = placed_.find(task_id);
  if (it == placed_.end()) {
    throw UnknownTask("unknown task '" + task_id + "' on " + name_);
  }
  return it->second->site_of(task_id);
}

std::int64_t OverflowRouter::free_slots() const { return primary_.free_slots(); }

std::vector<std::string> OverflowRouter::queued_tasks() const {
  std::vector<std::string> out = primary_.queued_tasks();
  std::vector<std::string> sec = secondary_.queued_tasks();
  out.insert(out.end(), sec.begin(), sec.end());
  return out;
}

}  // namespace hybridmesh
