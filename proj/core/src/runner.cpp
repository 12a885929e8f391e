// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
#include "hybridmesh/runner.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "hybridmesh/digest.hpp"
#include "hybridmesh/version.hpp"

namespace hybridmesh {

namespace {

std::vector<SiteDescriptor> sorted_sites(const ScenarioConfig& c) {
  std::vector<SiteDescriptor> s = c.sites;
  std::sort(s.begin(), s.end(),
            [](const SiteDescriptor& a, const SiteDescriptor& b) {
              return a.id < b.id;
            });
  return s;
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << content;
}

}  // namespace

std::vector<BackendDescriptor> effective_backends(const ScenarioConfig& c) {
  std::vector<BackendDescriptor> out;
  if (!c.backends.empty()) {
    out = c.backends;
    for (BackendDescriptor& b : out) b.name = backend_name(b);
    return out;
  }
  std::vector<SiteDescriptor> sites = sorted_sites(c);
  auto local_at = [](const SiteDescriptor& s) {
    BackendDescriptor b;
    b.kind = "local";
    b.site = s.id;
    b.name = "local:" + s.id;
    return b;
  };
  switch (c.mode) {
    case RunMode::MANUAL:
    case RunMode::FEDERATED:
    case RunMode::FEDERATED_CONTROLLER:
    case RunMode::GATEWAY:
      for (const SiteDescriptor& s : sites) out.push_back(local_at(s));
      break;
    case RunMode::OVERLAY: {
      BackendDescriptor b;
      b.kind = "batch_cluster";
      b.name = "overlay";
      for (const SiteDescriptor& s : sites) {
        PartitionSpec p;
        p.name = s.partition.empty() ? s.id : s.partition;
        p.site = s.id;
        p.slots = s.slots;
        b.partitions.push_back(std::move(p));
      }
      std::set<std::string> names;
      for (const PartitionSpec& p : b.partitions) {
        if (!names.insert(p.name).second) {
          throw ConfigError(
              "scenario: overlay derivation needs distinct partition labels "
              "(duplicate '" + p.name + "')");
        }
      }
      out.push_back(std::move(b));
      break;
    }
    case RunMode::OVERFLOW: {
      SiteId primary =
          c.common_site.empty() ? sites.front().id : c.common_site;
      SiteId secondary;
      for (const SiteDescriptor& s : sites) {
        if (s.id != primary) {
          secondary = s.id;
          break;
        }
      }
      if (secondary.empty()) {
        throw ConfigError("scenario: overflow mode needs at least two sites");
      }
      for (const SiteDescriptor& s : sites) {
        if (s.id == primary || s.id == secondary) out.push_back(local_at(s));
      }
      BackendDescriptor b;
      b.kind = "overflow_router";
      b.name = "router";
      b.primary_site = primary;
      b.secondary_site = secondary;
      out.push_back(std::move(b));
      break;
    }
  }
  return out;
}

Runner::Runner(ScenarioConfig config) : config_(std::move(config)) {
  // Fill every default into the echoed config so the digest pins the
  // complete effective configuration.
  if (config_.common_site.empty()) {
    config_.common_site = sorted_sites(config_).front().id;
  }
  if (config_.tuning.heartbeat_timeout_s <= 0.0) {
    config_.tuning.heartbeat_timeout_s =
        3.0 * config_.tuning.heartbeat_interval_s;
  }
  if ((config_.mode == RunMode::FEDERATED_CONTROLLER) &&
      config_.tuning.controller_site.empty()) {
    config_.tuning.controller_site = sorted_sites(config_).front().id;
  }
  config_.backends = effective_backends(config_);
  config_.validate();
  build();
}

void Runner::build() {
  engine_ = std::make_unique<Engine>(
      config_.seed, static_cast<std::uint64_t>(config_.tuning.max_events));
  sites_ = std::make_unique<SiteRegistry>(*engine_);

  std::map<SiteId, std::vector<OutageWindow>> outages;
  for (const FailureSpec& f : config_.failures) {
    outages[f.site].push_back(OutageWindow{f.down_at, f.up_at});
  }
  for (auto& [_, w] : outages) {
    std::sort(w.begin(), w.end(),
              [](const OutageWindow& a, const OutageWindow& b) {
                return a.down_at < b.down_at;
              });
  }
  for (const SiteDescriptor& s : sorted_sites(config_)) {
    SiteDescriptor d = s;
    if (auto it = outages.find(s.id); it != outages.end()) {
      d.outages = it->second;
    }
    sites_->add_site(std::move(d));
  }
  if (config_.tuning.default_bandwidth_gbps > 0.0) {
    sites_->set_default_link(LinkParams{config_.tuning.default_bandwidth_gbps,
                                        config_.tuning.default_latency_s});
  }
  for (const LinkSpec& l : config_.links) {
    sites_->set_link(l.from, l.to, LinkParams{l.bandwidth_gbps, l.latency_s});
    if (l.symmetric) {
      sites_->set_link(l.to, l.from,
                       LinkParams{l.bandwidth_gbps, l.latency_s});
    }
  }
  for (const PreemptionSpec& p : config_.preemptions) {
    sites_->inject_preemption(p.site, p.at);
  }

  store_ = std::make_unique<ObjectStore>(*engine_, *sites_);

  std::map<SiteId, std::int64_t> slots_of;
  for (const SiteDescriptor& s : config_.sites) slots_of[s.id] = s.slots;

  std::map<SiteId, LocalExecutor*> local_by_site;
  for (const BackendDescriptor& b : config_.backends) {
    if (b.kind == "local") {
      auto be = std::make_unique<LocalExecutor>(
          *engine_, *sites_, *store_, b.name, b.site, slots_of.at(b.site));
      be->set_duration_jitter(config_.tuning.duration_jitter);
      local_by_site[b.site] = be.get();
      locals_.push_back(std::move(be));
    } else if (b.kind == "batch_cluster") {
      cluster_ = std::make_unique<BatchCluster>(*engine_, *sites_, *store_,
                                                b.name, b.partitions);
      cluster_->set_duration_jitter(config_.tuning.duration_jitter);
    }
  }
  for (const BackendDescriptor& b : config_.backends) {
    if (b.kind != "overflow_router") continue;
    router_ = std::make_unique<OverflowRouter>(
        *engine_, b.name, *local_by_site.at(b.primary_site),
        *local_by_site.at(b.secondary_site), b.offload_cap);
  }

  ctx_ = RunContext{};
  ctx_.engine = engine_.get();
  ctx_.sites = sites_.get();
  ctx_.store = store_.get();
  ctx_.common_site = config_.common_site;
  ctx_.consolidate = config_.tuning.gather;
  ctx_.poll_interval_s = config_.tuning.poll_interval_s;
  ctx_.heartbeat_interval_s = config_.tuning.heartbeat_interval_s;
  ctx_.lease_s = config_.tuning.lease_s;
  ctx_.controller_site = config_.tuning.controller_site;

  switch (config_.mode) {
    case RunMode::MANUAL:
      for (const auto& [site, be] : local_by_site) {
        ctx_.site_backends[site] = be;
      }
      break;
    case RunMode::FEDERATED:
    case RunMode::FEDERATED_CONTROLLER:
      for (const auto& [site, be] : local_by_site) {
        ctx_.site_backends[site] = be;
      }
      repo_ = std::make_unique<SimRepo>(*engine_, config_.tuning.max_retries);
      ctx_.repo = repo_.get();
      break;
    case RunMode::OVERLAY:
      ctx_.cluster = cluster_.get();
      break;
    case RunMode::OVERFLOW:
      ctx_.router = router_.get();
      break;
    case RunMode::GATEWAY: {
      RouteCostModel cm = config_.tuning.cost_model == "time"
                              ? RouteCostModel::time
                              : RouteCostModel::bytes;
      Engine* eng = engine_.get();
      gateway_ = std::make_unique<TesGateway>(
          "gateway", [eng] { return eng->now(); },
          config_.tuning.heartbeat_timeout_s, cm, eng, sites_.get());
      for (const auto& [site, be] : local_by_site) {
        ctx_.site_backends[site] = be;
        auto node = std::make_unique<TesNode>(*engine_, *sites_, *be, site,
                                              site);
        gateway_->register_node(site, site, *node);
        ctx_.nodes[site] = node.get();
        nodes_.push_back(std::move(node));
      }
      ctx_.gateway = gateway_.get();
      break;
    }
  }
}

Json Runner::header_fields() const {
  Json sites_j = Json::array();
  for (const SiteDescriptor& s : sorted_sites(config_)) {
    sites_j.push_back(Json{{"id", s.id},
                           {"slots", s.slots},
                           {"partition", s.partition},
                           {"preemptible", s.preemptible}});
  }
  Json backends_j = Json::array();
  std::map<SiteId, std::int64_t> slots_of;
  for (const SiteDescriptor& s : config_.sites) slots_of[s.id] = s.slots;
  for (const BackendDescriptor& b : config_.backends) {
    Json row{{"name", b.name}, {"kind", b.kind}};
    if (b.kind == "local") {
      row["site"] = b.site;
      row["slots"] = slots_of.at(b.site);
    } else if (b.kind == "batch_cluster") {
      Json parts = Json::array();
      for (const PartitionSpec& p : b.partitions) {
        parts.push_back(
            Json{{"name", p.name}, {"site", p.site}, {"slots", p.slots}});
      }
      row["partitions"] = std::move(parts);
    } else {
      row["primary_site"] = b.primary_site;
      row["secondary_site"] = b.secondary_site;
      row["offload_cap"] = b.offload_cap;
    }
    backends_j.push_back(std::move(row));
  }
  return Json{{"tool_version", kVersion},
              {"config_digest", config_digest()},
              {"digest_algorithm", kDigestAlgorithm},
              {"mode", to_string(config_.mode)},
              {"seed", config_.seed},
              {"max_retries", config_.tuning.max_retries},
              {"retry_limit", config_.workflow.retry_limit},
              {"lease_s", config_.tuning.lease_s},
              {"batch_count", config_.workflow.batch_count},
              {"sites", std::move(sites_j)},
              {"backends", std::move(backends_j)}};
}

std::string Runner::config_digest() const {
  return sha256_hex(canonical(config_.to_json()));
}

RunReport Runner::execute() {
  if (executed_) throw Error("runner already executed");
  executed_ = true;
  engine_->note("run_header", header_fields());
  std::string error;
  try {
    WorkflowDriver driver(ctx_, config_.workflow, config_.mode);
    report_ = driver.run();
  } catch (const Error& e) {
    report_ = RunReport{};
    report_.success = false;
    report_.makespan_s = engine_->now();
    error = e.what();
  }
  Json footer{{"records",
               static_cast<std::int64_t>(engine_->log().records().size()) + 1},
              {"bytes_transferred_total", store_->ledger().total_bytes()},
              {"makespan_s", report_.makespan_s},
              {"success", report_.success}};
  if (!error.empty()) footer["error"] = error;
  engine_->note("run_footer", std::move(footer));
  return report_;
}

Json Runner::metrics_doc() const {
  if (!executed_) throw Error("metrics_doc before execute");
  Json doc = report_.to_json();
  doc["config_digest"] = config_digest();
  doc["event_log_digest"] = sha256_hex(engine_->log().to_ndjson());
  doc["tool_version"] = kVersion;
  doc["mode"] = to_string(config_.mode);
  doc["seed"] = config_.seed;
  return doc;
}

std::string Runner::timeline_csv() const {
  std::ostringstream out;
  out << "time,site,running\n";
  std::map<std::string, TaskState> state;
  std::map<SiteId, std::int64_t> running;
  for (const Json& rec : engine_->log().records()) {
    if (rec.value("kind", "") != "task_state") continue;
    std::string task = rec.value("task_id", "");
    std::string site = rec.value("site", "");
    TaskState prev = state.count(task) ? state[task] : TaskState::QUEUED;
    TaskState next = task_state_from_string(rec.value("state", "QUEUED"));
    state[task] = next;
    if (site.empty()) continue;
    bool was = prev == TaskState::RUNNING;
    bool is = next == TaskState::RUNNING;
    if (was == is) continue;
    running[site] += is ? 1 : -1;
    out << rec.value("at", 0.0) << ',' << site << ',' << running[site]
        << '\n';
  }
  return out.str();
}

void Runner::write_outputs(const std::string& out_dir) const {
  if (!executed_) throw Error("write_outputs before execute");
  std::filesystem::create_directories(out_dir);
  std::string ndjson = engine_->log().to_ndjson();
  write_file(out_dir + "/events.ndjson", ndjson);
  write_file(out_dir + "/metrics.json", canonical(metrics_doc()) + "\n");
  Json manifest{{"digest_algorithm", kDigestAlgorithm},
                {"objects", report_.final_manifest}};
  write_file(out_dir + "/manifest.json", canonical(manifest) + "\n");
  write_file(out_dir + "/timeline.csv", timeline_csv());
}

RunReport run_scenario_file(const std::string& scenario_path,
                            const std::string& out_dir) {
  Runner runner(load_scenario(scenario_path));
  RunReport report = runner.execute();
  runner.write_outputs(out_dir);
  return report;
}

}  // namespace hybridmesh
