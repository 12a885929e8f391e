// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
#include "hybridmesh/workflow.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

#include "hybridmesh/digest.hpp"

namespace hybridmesh {

namespace {

// Consecutive driver polls with no observable progress and no live work
// before a run is declared stalled. Guards against permanently dead
// controllers or unreachable federations without burning the event budget.
constexpr std::int64_t kStallPolls = 600;

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

std::string node_prefix_of(const std::string& tes_task_id) {
  std::size_t pos = tes_task_id.rfind("-t-");
  return pos == std::string::npos ? tes_task_id : tes_task_id.substr(0, pos);
}

}  // namespace

const char* to_string(RunMode m) {
  switch (m) {
    case RunMode::MANUAL: return "manual";
    case RunMode::FEDERATED: return "federated";
    case RunMode::FEDERATED_CONTROLLER: return "federated-controller";
    case RunMode::OVERLAY: return "overlay";
    case RunMode::OVERFLOW: return "overflow";
    case RunMode::GATEWAY: return "gateway";
  }
  return "?";
}

RunMode run_mode_from_string(const std::string& s) {
  if (s == "manual") return RunMode::MANUAL;
  if (s == "federated") return RunMode::FEDERATED;
  if (s == "federated-controller") return RunMode::FEDERATED_CONTROLLER;
  if (s == "overlay") return RunMode::OVERLAY;
  if (s == "overflow") return RunMode::OVERFLOW;
  if (s == "gateway") return RunMode::GATEWAY;
  throw ConfigError("unknown mode '" + s + "'");
}

Json RunReport::to_json() const {
  Json per_site = Json::object();
  for (const auto& [site, n] : tasks_per_site) per_site[site] = n;
  return Json{{"success", success},
              {"makespan_s", makespan_s},
              {"tasks_per_site", per_site},
              {"bytes_transferred_total", bytes_transferred_total},
              {"retries", retries},
              {"claim_conflicts", claim_conflicts},
              {"starved", starved},
              {"failed_batches", failed_batches},
              {"final_manifest", final_manifest}};
}

std::vector<std::pair<SiteId, std::int64_t>> proportional_split(
    const std::vector<std::pair<SiteId, std::int64_t>>& weights,
    std::int64_t total) {
  if (weights.empty()) throw ConfigError("proportional_split: no weights");
  std::int64_t wsum = 0;
  for (const auto& [_, w] : weights) {
    if (w < 0) throw ConfigError("proportional_split: negative weight");
    wsum += w;
  }
  if (wsum <= 0) throw ConfigError("proportional_split: zero total weight");

  struct Row {
    SiteId id;
    std::int64_t share;
    std::int64_t rem_num;  // remainder numerator of total*w/wsum
    std::size_t pos;
  };
  std::vector<Row> rows;
  std::int64_t assigned = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    std::int64_t num = total * weights[i].second;
    Row r{weights[i].first, num / wsum, num % wsum, i};
    assigned += r.share;
    rows.push_back(std::move(r));
  }
  std::vector<Row*> order;
  for (Row& r : rows) order.push_back(&r);
  std::sort(order.begin(), order.end(), [](const Row* a, const Row* b) {
    if (a->rem_num != b->rem_num) return a->rem_num > b->rem_num;
    return a->id < b->id;
  });
  for (std::int64_t left = total - assigned; left > 0; --left) {
    order[static_cast<std::size_t>(total - assigned - left)]->share += 1;
  }
  std::vector<std::pair<SiteId, std::int64_t>> out;
  for (const Row& r : rows) out.emplace_back(r.id, r.share);
  return out;
}

WorkflowDriver::WorkflowDriver(RunContext ctx, WorkflowSpec spec, RunMode mode)
    : ctx_(std::move(ctx)), spec_(std::move(spec)), mode_(mode) {
  if (!ctx_.engine || !ctx_.sites || !ctx_.store) {
    throw ConfigError("workflow context missing engine/sites/store");
  }
  if (spec_.batch_count < 1) throw ConfigError("batch_count must be >= 1");
  if (spec_.map_duration_s < 0 || spec_.gather_duration_s < 0) {
    throw ConfigError("durations must be >= 0");
  }
  if (spec_.retry_limit < 0) throw ConfigError("retry_limit must be >= 0");
  if (ctx_.common_site.empty()) {
    ctx_.common_site = ctx_.sites->site_ids().front();
  }
  ctx_.sites->site(ctx_.common_site);
}

std::string WorkflowDriver::batch_id(std::int64_t index) {
  char buf[24];
  std::snprintf(buf, sizeof(buf), "b%04lld", static_cast<long long>(index));
  return buf;
}

std::string WorkflowDriver::map_output_name(const std::string& batch_id) {
  return "out:" + batch_id;
}

std::string WorkflowDriver::gather_output_name(const std::string& dataset_id) {
  return "gather:" + dataset_id;
}

std::string WorkflowDriver::gather_batch_id() const {
  return "gather:" + spec_.dataset_id;
}

Json WorkflowDriver::expected_manifest(const WorkflowSpec& spec) {
  std::vector<std::pair<std::string, std::int64_t>> rows;
  for (std::int64_t i = 0; i < spec.batch_count; ++i) {
    rows.emplace_back(object_id_for(map_output_name(batch_id(i))),
                      spec.batch_size_bytes);
  }
  rows.emplace_back(object_id_for(gather_output_name(spec.dataset_id)),
                    spec.batch_count * spec.batch_size_bytes);
  std::sort(rows.begin(), rows.end());
  Json out = Json::array();
  for (const auto& [oid, size] : rows) {
    out.push_back(Json{{"object_id", oid}, {"size_bytes", size}});
  }
  return out;
}

std::vector<DataRef> WorkflowDriver::scatter() {
  batches_.clear();
  batch_order_.clear();
  std::vector<SiteId> site_ids = ctx_.sites->site_ids();
  std::vector<DataRef> refs;
  for (std::int64_t i = 0; i < spec_.batch_count; ++i) {
    std::string b = batch_id(i);
    SiteId home;
    if (auto it = spec_.homes.find(b); it != spec_.homes.end()) {
      home = it->second;
    } else if (!spec_.scatter_home.empty()) {
      home = spec_.scatter_home;
    } else {
      home = site_ids[static_cast<std::size_t>(i) % site_ids.size()];
    }
    // Batch content is digest-derived from (dataset id, index), so the same
    // dataset always scatters to the same object ids.
    std::string content =
        sha256_hex(spec_.dataset_id + ":" + std::to_string(i));
    std::string oid = ctx_.store->put(home, content, spec_.batch_size_bytes);
    DataRef ref{oid, spec_.batch_size_bytes, home};
    refs.push_back(ref);
    BatchState st;
    st.input = ref;
    batches_.emplace(b, std::move(st));
    batch_order_.push_back(b);
  }
  return refs;
}

TaskSpec WorkflowDriver::map_task_spec(const std::string& batch_id,
                                       const std::string& task_id) const {
  TaskSpec t;
  t.id = task_id;
  t.command.duration_s = spec_.map_duration_s;
  t.command.output_size_bytes = spec_.batch_size_bytes;
  t.command.poison = contains(spec_.poisoned, batch_id);
  t.inputs = {batches_.at(batch_id).input};
  t.outputs = {map_output_name(batch_id)};
  t.node_count = contains(spec_.multi_node_batches, batch_id) ? 2 : 1;
  t.executor_count = 1;
  return t;
}

std::vector<DataRef> WorkflowDriver::gather_inputs() const {
  std::vector<DataRef> refs;
  for (const std::string& b : batch_order_) {
    std::string oid = object_id_for(map_output_name(b));
    const StoredObject& obj = ctx_.store->object(oid);
    refs.push_back(DataRef{oid, obj.size_bytes, *obj.replicas.begin()});
  }
  return refs;
}

TaskSpec WorkflowDriver::gather_task_spec(const std::string& task_id) const {
  TaskSpec t;
  t.id = task_id;
  t.command.duration_s = spec_.gather_duration_s;
  t.command.output_size_bytes = spec_.batch_count * spec_.batch_size_bytes;
  t.inputs = gather_inputs();
  t.outputs = {gather_output_name(spec_.dataset_id)};
  return t;
}

double WorkflowDriver::effective_lease_s() const {
  if (ctx_.lease_s > 0.0) return ctx_.lease_s;
  std::int64_t biggest = std::max(spec_.batch_size_bytes,
                                  spec_.batch_count * spec_.batch_size_bytes);
  double worst_hop = 0.0;
  std::vector<SiteId> ids = ctx_.sites->site_ids();
  for (const SiteId& from : ids) {
    for (const SiteId& to : ids) {
      worst_hop =
          std::max(worst_hop, ctx_.sites->transfer_time(biggest, from, to));
    }
  }
  double duration = std::max(spec_.map_duration_s, spec_.gather_duration_s);
  return 3.0 * (duration + worst_hop + ctx_.poll_interval_s + 1.0);
}

Backend* WorkflowDriver::backend_for(const SiteId& site) const {
  auto it = ctx_.site_backends.find(site);
  if (it == ctx_.site_backends.end()) {
    throw ConfigError("no backend for site '" + site + "'");
  }
  return it->second;
}

void WorkflowDriver::setup() {
  validator_ = std::make_unique<TaskValidator>([this] {
    auto ids = ctx_.sites->site_ids();
    return std::set<SiteId>(ids.begin(), ids.end());
  }());
  switch (mode_) {
    case RunMode::MANUAL:
    case RunMode::OVERLAY:
    case RunMode::OVERFLOW:
      setup_static_modes();
      break;
    case RunMode::FEDERATED:
    case RunMode::FEDERATED_CONTROLLER:
      setup_federated();
      break;
    case RunMode::GATEWAY:
      setup_gateway();
      break;
  }
}

void WorkflowDriver::setup_static_modes() {
  scatter();
  if (mode_ == RunMode::MANUAL) {
    if (ctx_.site_backends.empty()) {
      throw ConfigError("manual mode needs per-site backends");
    }
    std::vector<std::pair<SiteId, std::int64_t>> weights;
    for (const auto& [site, _] : ctx_.site_backends) {
      weights.emplace_back(site, ctx_.sites->site(site).slots);
    }
    auto shares = proportional_split(weights, spec_.batch_count);
    std::size_t next = 0;
    for (const auto& [site, n] : shares) {
      for (std::int64_t k = 0; k < n; ++k) {
        submit_map_static(batch_order_[next++], *backend_for(site),
                          SubmitOptions{});
      }
    }
    return;
  }
  if (mode_ == RunMode::OVERLAY) {
    if (!ctx_.cluster) throw ConfigError("overlay mode needs a batch cluster");
    for (const std::string& b : batch_order_) {
      SubmitOptions opts;
      if (auto it = spec_.pins.find(b); it != spec_.pins.end()) {
        opts.partition_hint = it->second;
      }
      submit_map_static(b, *ctx_.cluster, opts);
    }
    return;
  }
  if (!ctx_.router) throw ConfigError("overflow mode needs a router");
  for (const std::string& b : batch_order_) {
    submit_map_static(b, *ctx_.router, SubmitOptions{});
  }
}

void WorkflowDriver::submit_map_static(const std::string& batch_id,
                                       Backend& backend,
                                       const SubmitOptions& opts) {
  BatchState& st = batches_.at(batch_id);
  st.attempts += 1;
  std::string tid = batch_id + "-a" + std::to_string(st.attempts);
  ValidatedTask task = validator_->validate(map_task_spec(batch_id, tid));
  backend.submit(task, opts,
                 [this, batch_id, &backend, opts](const std::string& task_id,
                                                  TaskState s) {
                   if (!is_terminal(s)) return;
                   (void)task_id;
                   on_map_terminal_static(batch_id, backend, opts, s);
                 });
}

void WorkflowDriver::on_map_terminal_static(const std::string& batch_id,
                                            Backend& backend,
                                            const SubmitOptions& opts,
                                            TaskState s) {
  BatchState& st = batches_.at(batch_id);
  if (st.done) return;
  if (s == TaskState::COMPLETE) {
    st.done = true;
    std::string tid = batch_id + "-a" + std::to_string(st.attempts);
    st.ran_at = backend.site_of(tid);
    completed_per_site_[st.ran_at] += 1;
    maybe_finish_map_phase();
    return;
  }
  if (st.attempts < spec_.retry_limit + 1) {
    retries_ += 1;
    submit_map_static(batch_id, backend, opts);
    return;
  }
  st.done = true;
  st.failed = true;
  maybe_finish_map_phase();
}

void WorkflowDriver::maybe_finish_map_phase() {
  if (done_ || gather_submitted_) return;
  for (const auto& [_, st] : batches_) {
    if (!st.done) return;
  }
  if (any_map_failed()) {
    finish(false);
    return;
  }
  gather_submitted_ = true;
  switch (mode_) {
    case RunMode::MANUAL:
    case RunMode::OVERLAY:
    case RunMode::OVERFLOW:
      submit_gather_static();
      break;
    case RunMode::FEDERATED:
    case RunMode::FEDERATED_CONTROLLER: {
      // The gather step becomes one more claimable batch.
      DataRef seed = gather_inputs().front();
      ctx_.repo->register_batch(gather_batch_id(), seed);
      break;
    }
    case RunMode::GATEWAY:
      gateway_submit_gather();
      break;
  }
}

void WorkflowDriver::submit_gather_static() {
  gather_attempts_ += 1;
  std::string tid = "gather-a" + std::to_string(gather_attempts_);
  ValidatedTask task = validator_->validate(gather_task_spec(tid));
  Backend* backend = nullptr;
  SubmitOptions opts;
  if (mode_ == RunMode::MANUAL) {
    backend = backend_for(ctx_.common_site);
  } else if (mode_ == RunMode::OVERLAY) {
    backend = ctx_.cluster;
    for (const PartitionSpec& p : ctx_.cluster->partitions()) {
      if (p.site == ctx_.common_site) {
        opts.partition_hint = p.name;
        break;
      }
    }
  } else {
    backend = ctx_.router;
  }
  backend->submit(task, opts,
                  [this, backend](const std::string& task_id, TaskState s) {
                    if (!is_terminal(s) || gather_done_) return;
                    if (s == TaskState::COMPLETE) {
                      gather_done_ = true;
                      gather_ran_at_ = backend->site_of(task_id);
                      completed_per_site_[gather_ran_at_] += 1;
                      begin_consolidation();
                      return;
                    }
                    if (gather_attempts_ < spec_.retry_limit + 1) {
                      retries_ += 1;
                      submit_gather_static();
                      return;
                    }
                    gather_failed_ = true;
                    finish(false);
                  });
}

// ---------------------------------------------------------------------------
// federated modes

void WorkflowDriver::setup_federated() {
  if (!ctx_.repo) throw ConfigError("federated mode needs a metadata repo");
  if (ctx_.site_backends.empty()) {
    throw ConfigError("federated mode needs per-site backends");
  }
  scatter();
  for (const std::string& b : batch_order_) {
    ctx_.repo->register_batch(b, batches_.at(b).input);
  }
  for (const auto& [site, backend] : ctx_.site_backends) {
    workers_.emplace(site, Worker{site, backend, 0, {}});
  }
  if (mode_ == RunMode::FEDERATED) {
    for (auto& [_, w] : workers_) schedule_worker_poll(w, 0.0);
  } else {
    if (ctx_.controller_site.empty()) {
      ctx_.controller_site = ctx_.sites->site_ids().front();
    }
    ctx_.sites->site(ctx_.controller_site);
    schedule_controller_poll(0.0);
  }
  // Offset the driver's bookkeeping poll so it interleaves between worker
  // rounds instead of racing them at identical timestamps.
  schedule_driver_poll(0.5 * ctx_.poll_interval_s);
}

void WorkflowDriver::schedule_worker_poll(Worker& w, double at) {
  Worker* wp = &w;
  ctx_.engine->schedule_internal(at, [this, wp] { worker_snapshot(*wp); });
}

void WorkflowDriver::worker_snapshot(Worker& w) {
  if (done_) return;
  if (ctx_.sites->is_up(w.site)) {
    std::int64_t free = ctx_.sites->site(w.site).slots - w.active;
    if (free > 0) {
      w.snapshot.clear();
      for (const BatchRecord& rec :
           ctx_.repo->list(BatchTag::UNPROCESSED)) {
        w.snapshot.emplace_back(rec.batch_id, rec.version);
      }
      if (!w.snapshot.empty()) {
        Worker* wp = &w;
        // Claims happen in a second phase at the same timestamp, so
        // same-round snapshots overlap and version conflicts are real.
        ctx_.engine->schedule_internal(ctx_.engine->now(),
                                       [this, wp] { worker_claim(*wp); });
      }
    }
  }
  schedule_worker_poll(w, ctx_.engine->now() + ctx_.poll_interval_s);
}

void WorkflowDriver::worker_claim(Worker& w) {
  if (done_ || !ctx_.sites->is_up(w.site)) return;
  std::int64_t free = ctx_.sites->site(w.site).slots - w.active;
  for (const auto& [id, version] : w.snapshot) {
    if (free <= 0) break;
    RepoResult res = ctx_.repo->claim(id, w.site, version, effective_lease_s());
    if (res.ok()) {
      free -= 1;
      start_claimed_batch(w, res.record);
    } else if (res.status == RepoStatus::CONFLICT) {
      claim_conflicts_ += 1;
    }
  }
  w.snapshot.clear();
}

void WorkflowDriver::start_claimed_batch(Worker& w, const BatchRecord& rec) {
  w.active += 1;
  const std::string b = rec.batch_id;
  ctx_.repo->report(b, w.site, BatchTag::PROCESSING, "");
  std::string tid = b + "-" + w.site + "-a" + std::to_string(rec.attempts);
  bool is_gather = (b == gather_batch_id());
  TaskSpec ts = is_gather ? gather_task_spec(tid) : map_task_spec(b, tid);
  ValidatedTask task = validator_->validate(ts);
  Worker* wp = &w;
  wp->backend->submit(
      task, SubmitOptions{},
      [this, wp, b, is_gather](const std::string&, TaskState s) {
        if (!is_terminal(s)) return;
        wp->active -= 1;
        if (s == TaskState::COMPLETE) {
          if (ctx_.sites->is_up(wp->site)) {
            std::string out =
                is_gather ? object_id_for(gather_output_name(spec_.dataset_id))
                          : object_id_for(map_output_name(b));
            RepoResult rr =
                ctx_.repo->report(b, wp->site, BatchTag::SUCCEEDED, out);
            // Count the execution only when the repo accepts it; a rejected
            // report means the lease moved on and another site's execution
            // is the one that lands in the manifest.
            if (rr.ok()) completed_per_site_[wp->site] += 1;
          }
          return;
        }
        if (s == TaskState::EXECUTOR_ERROR) {
          // The job itself is broken; re-execution cannot help.
          if (ctx_.sites->is_up(wp->site)) {
            ctx_.repo->report(b, wp->site, BatchTag::FAILED, "");
          }
          return;
        }
        // SYSTEM_ERROR / CANCELED: the worker (or its site) is gone; say
        // nothing and let the lease expire so another site retries.
      });
}

void WorkflowDriver::schedule_controller_poll(double at) {
  ctx_.engine->schedule_internal(at, [this] { controller_poll(); });
}

void WorkflowDriver::controller_poll() {
  if (done_) return;
  if (ctx_.sites->is_up(ctx_.controller_site)) {
    for (const BatchRecord& rec : ctx_.repo->list(BatchTag::UNPROCESSED)) {
      // Push each batch to the worker site with the most free capacity,
      // ties by site id.
      Worker* best = nullptr;
      std::int64_t best_free = 0;
      for (auto& [site, w] : workers_) {
        if (!ctx_.sites->is_up(site)) continue;
        std::int64_t free = ctx_.sites->site(site).slots - w.active;
        if (free > 0 && (!best || free > best_free)) {
          best = &w;
          best_free = free;
        }
      }
      if (!best) break;
      RepoResult res = ctx_.repo->claim(rec.batch_id, best->site, rec.version,
                                        effective_lease_s());
      if (res.ok()) {
        start_claimed_batch(*best, res.record);
      } else if (res.status == RepoStatus::CONFLICT) {
        claim_conflicts_ += 1;
      }
    }
  }
  schedule_controller_poll(ctx_.engine->now() + ctx_.poll_interval_s);
}

void WorkflowDriver::schedule_driver_poll(double at) {
  ctx_.engine->schedule_internal(at, [this] { driver_poll(); });
}

std::uint64_t WorkflowDriver::progress_marker() const {
  std::uint64_t active = 0;
  for (const auto& [_, w] : workers_) {
    active += static_cast<std::uint64_t>(w.active);
  }
  return ctx_.repo->repo().mutation_seq() * 1024 + active;
}

void WorkflowDriver::driver_poll() {
  if (done_) return;
  std::vector<BatchRecord> records = ctx_.repo->list(std::nullopt);

  bool maps_all_terminal = true;
  bool any_leased = false;
  for (const BatchRecord& rec : records) {
    bool terminal =
        rec.tag == BatchTag::SUCCEEDED || rec.tag == BatchTag::FAILED;
    if (rec.tag == BatchTag::CLAIMED || rec.tag == BatchTag::PROCESSING) {
      any_leased = true;
    }
    auto it = batches_.find(rec.batch_id);
    if (it != batches_.end()) {
      it->second.done = terminal;
      it->second.failed = rec.tag == BatchTag::FAILED;
      if (!terminal) maps_all_terminal = false;
    }
  }

  if (!gather_submitted_) {
    if (maps_all_terminal) maybe_finish_map_phase();
  } else if (!gather_done_) {
    for (const BatchRecord& rec : records) {
      if (rec.batch_id != gather_batch_id()) continue;
      if (rec.tag == BatchTag::SUCCEEDED) {
        gather_done_ = true;
        begin_consolidation();
      } else if (rec.tag == BatchTag::FAILED) {
        gather_failed_ = true;
        finish(false);
      }
    }
  }

  if (!done_) {
    std::uint64_t marker = progress_marker();
    std::uint64_t active = marker % 1024;
    bool quiescent = active == 0 && !any_leased;
    if (quiescent && marker == last_progress_marker_) {
      if (++stalled_polls_ >= kStallPolls) {
        finish(false);
        return;
      }
    } else {
      stalled_polls_ = 0;
      last_progress_marker_ = marker;
    }
    schedule_driver_poll(ctx_.engine->now() + ctx_.poll_interval_s);
  }
}

// ---------------------------------------------------------------------------
// gateway mode

void WorkflowDriver::setup_gateway() {
  if (!ctx_.gateway) throw ConfigError("gateway mode needs a gateway");
  scatter();
  schedule_heartbeats();
  for (const std::string& b : batch_order_) gateway_submit_map(b);
  schedule_gateway_poll(ctx_.poll_interval_s);
}

void WorkflowDriver::schedule_heartbeats() {
  for (const auto& [node_id, _] : ctx_.nodes) {
    std::string id = node_id;
    ctx_.engine->schedule_internal(ctx_.heartbeat_interval_s,
                                   [this, id] { heartbeat_tick(id); });
  }
}

void WorkflowDriver::heartbeat_tick(const std::string& node_id) {
  if (done_) return;
  TesNode* node = ctx_.nodes.at(node_id);
  if (ctx_.sites->is_up(node->site())) ctx_.gateway->heartbeat(node_id);
  ctx_.engine->schedule_internal(
      ctx_.engine->now() + ctx_.heartbeat_interval_s,
      [this, node_id] { heartbeat_tick(node_id); });
}

void WorkflowDriver::gateway_submit_map(const std::string& batch_id) {
  BatchState& st = batches_.at(batch_id);
  std::string tid = batch_id + "-a" + std::to_string(st.attempts + 1);
  TaskSpec ts = map_task_spec(batch_id, tid);
  try {
    std::string tes_id = ctx_.gateway->create_task(ts);
    st.attempts += 1;
    tes_task_of_batch_[batch_id] = tes_id;
  } catch (const NoHealthyNode&) {
    // No route right now; the poll loop retries while nodes recover.
  }
}

void WorkflowDriver::gateway_submit_gather() {
  std::string tid = "gather-a" + std::to_string(gather_attempts_ + 1);
  TaskSpec ts = gather_task_spec(tid);
  try {
    gather_tes_id_ = ctx_.gateway->create_task(ts);
    gather_attempts_ += 1;
  } catch (const NoHealthyNode&) {
  }
}

void WorkflowDriver::schedule_gateway_poll(double at) {
  ctx_.engine->schedule_internal(at, [this] { gateway_poll(); });
}

void WorkflowDriver::gateway_poll() {
  if (done_) return;
  bool progress = false;
  bool live_work = false;

  for (const std::string& b : batch_order_) {
    BatchState& st = batches_.at(b);
    if (st.done) continue;
    auto it = tes_task_of_batch_.find(b);
    if (it == tes_task_of_batch_.end()) {
      gateway_submit_map(b);
      if (tes_task_of_batch_.count(b)) progress = true;
      continue;
    }
    TesTaskDoc doc = ctx_.gateway->get_task(it->second, true);
    if (doc.state != st.last_seen) {
      st.last_seen = doc.state;
      progress = true;
    }
    if (doc.state == TaskState::COMPLETE) {
      st.done = true;
      st.ran_at = ctx_.nodes.count(node_prefix_of(it->second))
                      ? ctx_.nodes.at(node_prefix_of(it->second))->site()
                      : node_prefix_of(it->second);
      completed_per_site_[st.ran_at] += 1;
      continue;
    }
    if (doc.state == TaskState::EXECUTOR_ERROR) {
      st.done = true;
      st.failed = true;
      continue;
    }
    bool lost = doc.state == TaskState::SYSTEM_ERROR ||
                doc.state == TaskState::CANCELED || doc.stale;
    if (lost) {
      if (st.attempts < spec_.retry_limit + 1) {
        retries_ += 1;
        try {
          ctx_.gateway->cancel_task(it->second);
        } catch (const Error&) {
        }
        tes_task_of_batch_.erase(it);
        gateway_submit_map(b);
        progress = true;
      } else {
        st.done = true;
        st.failed = true;
        progress = true;
      }
      continue;
    }
    live_work = true;  // queued/initializing/running at a reachable node
  }

  maybe_finish_map_phase();

  if (gather_submitted_ && !gather_done_ && !done_) {
    if (gather_tes_id_.empty()) {
      gateway_submit_gather();
      if (!gather_tes_id_.empty()) progress = true;
    } else {
      TesTaskDoc doc = ctx_.gateway->get_task(gather_tes_id_, true);
      if (doc.state == TaskState::COMPLETE) {
        gather_done_ = true;
        gather_ran_at_ = ctx_.nodes.count(node_prefix_of(gather_tes_id_))
                             ? ctx_.nodes.at(node_prefix_of(gather_tes_id_))->site()
                             : node_prefix_of(gather_tes_id_);
        completed_per_site_[gather_ran_at_] += 1;
        begin_consolidation();
      } else if (doc.state == TaskState::EXECUTOR_ERROR) {
        gather_failed_ = true;
        finish(false);
      } else if (doc.state == TaskState::SYSTEM_ERROR ||
                 doc.state == TaskState::CANCELED || doc.stale) {
        if (gather_attempts_ < spec_.retry_limit + 1) {
          retries_ += 1;
          try {
            ctx_.gateway->cancel_task(gather_tes_id_);
          } catch (const Error&) {
          }
          gather_tes_id_.clear();
          gateway_submit_gather();
          progress = true;
        } else {
          gather_failed_ = true;
          finish(false);
        }
      } else {
        live_work = true;
      }
    }
  }

  if (done_) return;
  if (!progress && !live_work) {
    if (++stalled_polls_ >= kStallPolls) {
      finish(false);
      return;
    }
  } else {
    stalled_polls_ = 0;
  }
  schedule_gateway_poll(ctx_.engine->now() + ctx_.poll_interval_s);
}

// ---------------------------------------------------------------------------

bool WorkflowDriver::all_maps_succeeded() const {
  for (const auto& [_, st] : batches_) {
    if (!st.done || st.failed) return false;
  }
  return true;
}

bool WorkflowDriver::any_map_failed() const {
  for (const auto& [_, st] : batches_) {
    if (st.failed) return true;
  }
  return false;
}

std::vector<std::string> WorkflowDriver::final_object_ids() const {
  std::vector<std::string> ids;
  for (const std::string& b : batch_order_) {
    if (batches_.at(b).done && !batches_.at(b).failed) {
      ids.push_back(object_id_for(map_output_name(b)));
    }
  }
  if (gather_done_) {
    ids.push_back(object_id_for(gather_output_name(spec_.dataset_id)));
  }
  return ids;
}

void WorkflowDriver::begin_consolidation() {
  if (done_) return;
  if (!ctx_.consolidate) {
    finish(true);
    return;
  }
  double ready = ctx_.store->gather(final_object_ids(), ctx_.common_site);
  ctx_.engine->schedule_internal(ready, [this] { finish(true); });
}

void WorkflowDriver::finish(bool success) {
  if (done_) return;
  done_ = true;
  failed_ = !success;
  done_at_ = ctx_.engine->now();
  bytes_at_done_ = ctx_.store->ledger().total_bytes();

  // Snapshot failure and starvation details at the moment of completion.
  if (ctx_.repo) {
    for (const BatchRecord& rec : ctx_.repo->list(BatchTag::FAILED)) {
      failed_snapshot_.push_back(rec.batch_id);
    }
  } else {
    for (const auto& [b, st] : batches_) {
      if (st.failed) failed_snapshot_.push_back(b);
    }
    if (gather_failed_) failed_snapshot_.push_back("gather");
  }
  std::vector<Backend*> backends;
  if (ctx_.router) backends.push_back(ctx_.router);
  if (ctx_.cluster) backends.push_back(ctx_.cluster);
  for (const auto& [_, b] : ctx_.site_backends) backends.push_back(b);
  for (Backend* b : backends) {
    for (const std::string& tid : b->queued_tasks()) {
      starved_snapshot_.push_back(tid);
      ctx_.engine->note("starved",
                        Json{{"task_id", tid}, {"backend", b->name()}});
    }
  }
}

RunReport WorkflowDriver::run() {
  setup();
  ctx_.engine->run_until_idle();
  if (!done_) {
    // The engine drained with the workflow incomplete: queued work that can
    // never start (e.g. oversized tasks on a permanently full primary).
    finish(false);
  }
  RunReport r;
  r.success = !failed_;
  r.makespan_s = done_at_;
  r.tasks_per_site = completed_per_site_;
  r.bytes_transferred_total = bytes_at_done_;
  r.retries = retries_;
  r.claim_conflicts = claim_conflicts_;
  r.starved = starved_snapshot_;
  r.failed_batches = failed_snapshot_;
  std::sort(r.failed_batches.begin(), r.failed_batches.end());
  if (ctx_.repo) {
    std::int64_t reclaims = 0;
    for (const BatchRecord& rec : ctx_.repo->list(std::nullopt)) {
      if (rec.attempts > 1) reclaims += rec.attempts - 1;
    }
    r.retries = reclaims;
  }
  r.final_manifest = ctx_.store->manifest(final_object_ids());
  return r;
}

bool compare_runs(const RunReport& a, const RunReport& b) {
  return a.final_manifest == b.final_manifest;
}

}  // namespace hybridmesh
