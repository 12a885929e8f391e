// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
#include "hybridmesh/tes.hpp"

#include <algorithm>
#include <cstdio>
#include <set>

namespace hybridmesh {

Json TesTaskDoc::to_json(bool full) const {
  if (!full) return Json{{"id", id}, {"state", to_string(state)}};
  Json logs_j = Json::array();
  for (const auto& [event, at] : logs) {
    logs_j.push_back(Json{{"event", event}, {"at", at}});
  }
  return Json{{"id", id},
              {"state", to_string(state)},
              {"spec", spec.to_json()},
              {"logs", logs_j},
              {"creation_time", creation_time},
              {"stale", stale}};
}

TesTaskDoc TesTaskDoc::from_json(const Json& j) {
  FieldReader r(j, "TesTaskDoc");
  TesTaskDoc out;
  out.id = r.get_string("id");
  out.state = task_state_from_string(r.get_string("state"));
  if (const Json* spec = r.get_raw("spec")) out.spec = TaskSpec::from_json(*spec);
  for (const Json& entry : r.get_array_or_empty("logs")) {
    FieldReader er(entry, "TesTaskDoc.logs");
    out.logs.emplace_back(er.get_string("event"), er.get_double("at"));
    er.finish();
  }
  out.creation_time = r.get_double_or("creation_time", 0.0);
  out.stale = r.get_bool_or("stale", false);
  r.finish();
  return out;
}

TesNode::TesNode(Engine& engine, SiteRegistry& sites, Backend& backend,
                 SiteId site, std::string node_id)
    : engine_(engine),
      sites_(sites),
      backend_(backend),
      site_(std::move(site)),
      node_id_(std::move(node_id)),
      validator_([&sites] {
        auto ids = sites.site_ids();
        return std::set<SiteId>(ids.begin(), ids.end());
      }()) {
  sites_.site(site_);  // existence check
}

void TesNode::check_reachable() const {
  if (!sites_.is_up(site_)) {
    throw NodeUnreachable("node '" + node_id_ + "' (site '" + site_ +
                          "') is unreachable");
  }
}

std::string TesNode::create_task(const TaskSpec& spec) {
  check_reachable();
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%06llu",
                static_cast<unsigned long long>(next_task_++));
  std::string id = node_id_ + "-t-" + buf;
  TaskSpec assigned = spec;
  assigned.id = id;
  ValidatedTask task = validator_.validate(assigned);

  TesTaskDoc doc;
  doc.id = id;
  doc.state = TaskState::QUEUED;
  doc.spec = assigned;
  doc.creation_time = engine_.now();
  doc.logs.emplace_back("QUEUED", engine_.now());
  docs_.emplace(id, std::move(doc));

  backend_.submit(task, SubmitOptions{},
                  [this](const std::string& task_id, TaskState s) {
                    TesTaskDoc& d = docs_.at(task_id);
                    d.state = s;
                    d.logs.emplace_back(to_string(s), engine_.now());
                  });
  return id;
}

TesTaskDoc TesNode::get_task(const std::string& id, bool full) {
  check_reachable();
  auto it = docs_.find(id);
  if (it == docs_.end()) {
    throw UnknownTask("unknown task '" + id + "' on node '" + node_id_ + "'");
  }
  TesTaskDoc doc = it->second;
  if (!full) {
    TesTaskDoc minimal;
    minimal.id = doc.id;
    minimal.state = doc.state;
    return minimal;
  }
  return doc;
}

std::vector<TesTaskDoc> TesNode::list_tasks(bool full) {
  check_reachable();
  std::vector<TesTaskDoc> out;
  for (const auto& [id, doc] : docs_) out.push_back(get_task(id, full));
  return out;
}

CancelOutcome TesNode::cancel_task(const std::string& id) {
  check_reachable();
  auto it = docs_.find(id);
  if (it == docs_.end()) {
    throw UnknownTask("unknown task '" + id + "' on node '" + node_id_ + "'");
  }
  if (is_terminal(it->second.state)) return CancelOutcome::ALREADY_TERMINAL;
  backend_.cancel(id);
  return CancelOutcome::CANCELED;
}

Json TesNode::service_info() {
  check_reachable();
  return Json{{"name", node_id_}, {"kind", "node"}, {"site", site_}};
}

TesGateway::TesGateway(std::string name, std::function<double()> now_fn,
                       double heartbeat_timeout_s, RouteCostModel cost_model,
                       Engine* engine, const SiteRegistry* sites)
    : name_(std::move(name)),
      now_fn_(std::move(now_fn)),
      heartbeat_timeout_s_(heartbeat_timeout_s),
      cost_model_(cost_model),
      engine_(engine),
      sites_(sites) {
  if (!(heartbeat_timeout_s_ > 0.0)) {
    throw ConfigError("heartbeat timeout must be > 0");
  }
  if (cost_model_ == RouteCostModel::time && sites_ == nullptr) {
    throw ConfigError("time cost model requires a site registry");
  }
}

void TesGateway::note(const std::string& kind, Json fields) {
  if (engine_) engine_->note(kind, std::move(fields));
}

void TesGateway::register_node(std::string node_id, SiteId site,
                               TesService& svc) {
  if (nodes_.count(node_id)) {
    throw ConfigError("node '" + node_id + "' already registered");
  }
  nodes_.emplace(std::move(node_id),
                 NodeEntry{std::move(site), &svc, now_fn_(), true});
}

void TesGateway::heartbeat(const std::string& node_id) {
  auto it = nodes_.find(node_id);
  if (it == nodes_.end()) throw UnknownNode("unknown node '" + node_id + "'");
  it->second.last_heartbeat = now_fn_();
  observe_health(node_id, true);
}

bool TesGateway::healthy(const std::string& node_id) const {
  auto it = nodes_.find(node_id);
  if (it == nodes_.end()) throw UnknownNode("unknown node '" + node_id + "'");
  return now_fn_() - it->second.last_heartbeat <= heartbeat_timeout_s_;
}

std::vector<std::string> TesGateway::node_ids() const {
  std::vector<std::string> out;
  for (const auto& [id, _] : nodes_) out.push_back(id);
  return out;
}

void TesGateway::observe_health(const std::string& node_id, bool up) {
  NodeEntry& n = nodes_.at(node_id);
  if (n.reported_up != up) {
    n.reported_up = up;
    note("node_health", Json{{"node", node_id}, {"healthy", up}});
  }
}

void TesGateway::mark_unreachable(const std::string& node_id) {
  // Force the node out of the healthy set until its next heartbeat.
  NodeEntry& n = nodes_.at(node_id);
  n.last_heartbeat = now_fn_() - 2.0 * heartbeat_timeout_s_;
  observe_health(node_id, false);
}

double TesGateway::node_cost(const TaskSpec& spec, const NodeEntry& n) const {
  double cost = 0.0;
  for (const DataRef& d : spec.inputs) {
    if (cost_model_ == RouteCostModel::bytes) {
      if (d.home_site != n.site) cost += static_cast<double>(d.size_bytes);
    } else {
      cost += sites_->transfer_time(d.size_bytes, d.home_site, n.site);
    }
  }
  return cost;
}

RoutingDecision TesGateway::route(const TaskSpec& spec) const {
  struct Ranked {
    double cost;
    SiteId site;
    std::string node_id;
  };
  std::vector<Ranked> ranked;
  for (const auto& [id, n] : nodes_) {
    if (!healthy(id)) continue;
    ranked.push_back(Ranked{node_cost(spec, n), n.site, id});
  }
  if (ranked.empty()) {
    throw NoHealthyNode("no healthy node available for routing");
  }
  std::sort(ranked.begin(), ranked.end(), [](const Ranked& a, const Ranked& b) {
    if (a.cost != b.cost) return a.cost < b.cost;
    if (a.site != b.site) return a.site < b.site;
    return a.node_id < b.node_id;
  });
  RoutingDecision out;
  out.chosen_node = ranked.front().node_id;
  out.cost = ranked.front().cost;
  for (const Ranked& r : ranked) out.alternatives.emplace_back(r.node_id, r.cost);
  return out;
}

std::string TesGateway::create_task(const TaskSpec& spec) {
  RoutingDecision decision = route(spec);
  for (std::size_t i = 0; i < decision.alternatives.size(); ++i) {
    const std::string& node_id = decision.alternatives[i].first;
    NodeEntry& n = nodes_.at(node_id);
    try {
      std::string id = n.service->create_task(spec);
      owner_[id] = node_id;
      TesTaskDoc seed;
      seed.id = id;
      seed.state = TaskState::QUEUED;
      seed.spec = spec;
      seed.spec.id = id;
      seed.creation_time = now_fn_();
      cache_[id] = std::move(seed);
      Json alts = Json::array();
      for (const auto& [alt_node, alt_cost] : decision.alternatives) {
        alts.push_back(Json{{"node", alt_node}, {"cost", alt_cost}});
      }
      note("route_decision", Json{{"task_id", id},
                                  {"node", node_id},
                                  {"site", n.site},
                                  {"cost", decision.alternatives[i].second},
                                  {"alternatives", alts},
                                  {"failovers", static_cast<std::int64_t>(i)}});
      return id;
    } catch (const NodeUnreachable&) {
      mark_unreachable(node_id);
    }
  }
  throw NoHealthyNode("all candidate nodes unreachable during create");
}

TesTaskDoc TesGateway::get_task(const std::string& id, bool full) {
  auto it = owner_.find(id);
  if (it == owner_.end()) {
    throw UnknownTask("task '" + id + "' was not routed through gateway '" +
                      name_ + "'");
  }
  NodeEntry& n = nodes_.at(it->second);
  try {
    TesTaskDoc doc = n.service->get_task(id, full);
    if (full) cache_[id] = doc;
    doc.logs.emplace_back("gateway_proxy", now_fn_());
    return doc;
  } catch (const NodeUnreachable&) {
    mark_unreachable(it->second);
    TesTaskDoc doc = cache_.at(id);
    doc.stale = true;
    doc.logs.emplace_back("gateway_proxy", now_fn_());
    if (!full) {
      TesTaskDoc minimal;
      minimal.id = doc.id;
      minimal.state = doc.state;
      minimal.stale = true;
      return minimal;
    }
    return doc;
  }
}

std::vector<TesTaskDoc> TesGateway::list_tasks(bool full) {
  std::vector<TesTaskDoc> out;
  for (const auto& [id, _] : owner_) out.push_back(get_task(id, full));
  return out;
}

CancelOutcome TesGateway::cancel_task(const std::string& id) {
  auto it = owner_.find(id);
  if (it == owner_.end()) {
    throw UnknownTask("task '" + id + "' was not routed through gateway '" +
                      name_ + "'");
  }
  return nodes_.at(it->second).service->cancel_task(id);
}

Json TesGateway::service_info() {
  Json nodes = Json::array();
  for (const auto& [id, n] : nodes_) {
    nodes.push_back(Json{{"node", id}, {"site", n.site}, {"healthy", healthy(id)}});
  }
  return Json{{"name", name_}, {"kind", "gateway"}, {"nodes", nodes}};
}

}  // namespace hybridmesh
