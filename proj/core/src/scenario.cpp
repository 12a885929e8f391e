// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
#include "hybridmesh/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "hybridmesh/toml_lite.hpp"

namespace hybridmesh {

namespace {

bool finite_nonneg(double v) { return std::isfinite(v) && v >= 0.0; }

}  // namespace

std::string backend_name(const BackendDescriptor& b) {
  if (!b.name.empty()) return b.name;
  if (b.kind == "local") return "local:" + b.site;
  if (b.kind == "batch_cluster") return "overlay";
  return "router";
}

Json ScenarioConfig::to_json() const {
  Json sites_j = Json::array();
  for (const SiteDescriptor& s : sites) {
    sites_j.push_back(Json{{"id", s.id},
                           {"slots", s.slots},
                           {"partition", s.partition},
                           {"preemptible", s.preemptible}});
  }
  Json links_j = Json::array();
  for (const LinkSpec& l : links) {
    links_j.push_back(Json{{"from", l.from},
                           {"to", l.to},
                           {"bandwidth_gbps", l.bandwidth_gbps},
                           {"latency_s", l.latency_s},
                           {"symmetric", l.symmetric}});
  }
  Json failures_j = Json::array();
  for (const FailureSpec& f : failures) {
    Json row{{"site", f.site}, {"down_at", f.down_at}};
    if (std::isfinite(f.up_at)) row["up_at"] = f.up_at;
    failures_j.push_back(std::move(row));
  }
  Json preemptions_j = Json::array();
  for (const PreemptionSpec& p : preemptions) {
    preemptions_j.push_back(Json{{"site", p.site}, {"at", p.at}});
  }
  Json backends_j = Json::array();
  for (const BackendDescriptor& b : backends) {
    Json row{{"kind", b.kind}, {"name", backend_name(b)}};
    if (b.kind == "local") {
      row["site"] = b.site;
    } else if (b.kind == "batch_cluster") {
      Json parts = Json::array();
      for (const PartitionSpec& p : b.partitions) {
        parts.push_back(Json{{"name", p.name},
                             {"site", p.site},
                             {"slots", p.slots},
                             {"max_cores", p.max_cores},
                             {"max_ram_gb", p.max_ram_gb}});
      }
      row["partitions"] = std::move(parts);
    } else {
      row["primary_site"] = b.primary_site;
      row["secondary_site"] = b.secondary_site;
      row["offload_cap"] = b.offload_cap;
    }
    backends_j.push_back(std::move(row));
  }
  Json homes_j = Json::array();
  for (const auto& [batch, site] : workflow.homes) {
    homes_j.push_back(Json{{"batch", batch}, {"site", site}});
  }
  Json pins_j = Json::array();
  for (const auto& [batch, partition] : workflow.pins) {
    pins_j.push_back(Json{{"batch", batch}, {"partition", partition}});
  }
  Json workflow_j{{"batch_count", workflow.batch_count},
                  {"batch_size_bytes", workflow.batch_size_bytes},
                  {"map_duration_s", workflow.map_duration_s},
                  {"gather_duration_s", workflow.gather_duration_s},
                  {"retry_limit", workflow.retry_limit},
                  {"dataset_id", workflow.dataset_id},
                  {"poisoned", workflow.poisoned},
                  {"multi_node", workflow.multi_node_batches},
                  {"homes", std::move(homes_j)},
                  {"scatter_home", workflow.scatter_home},
                  {"pins", std::move(pins_j)}};
  Json tuning_j{{"gather", tuning.gather},
                {"cost_model", tuning.cost_model},
                {"lease_s", tuning.lease_s},
                {"max_retries", tuning.max_retries},
                {"poll_interval_s", tuning.poll_interval_s},
                {"heartbeat_interval_s", tuning.heartbeat_interval_s},
                {"heartbeat_timeout_s", tuning.heartbeat_timeout_s},
                {"duration_jitter", tuning.duration_jitter},
                {"max_events", tuning.max_events},
                {"default_bandwidth_gbps", tuning.default_bandwidth_gbps},
                {"default_latency_s", tuning.default_latency_s},
                {"controller_site", tuning.controller_site}};
  return Json{{"seed", seed},
              {"mode", to_string(mode)},
              {"common_site", common_site},
              {"sites", std::move(sites_j)},
              {"links", std::move(links_j)},
              {"failures", std::move(failures_j)},
              {"preemptions", std::move(preemptions_j)},
              {"backends", std::move(backends_j)},
              {"workflow", std::move(workflow_j)},
              {"tuning", std::move(tuning_j)}};
}

ScenarioConfig ScenarioConfig::from_json(const Json& j) {
  if (!j.is_object()) throw ConfigError("scenario: document is not a table");
  ScenarioConfig c;
  FieldReader r(j, "scenario");
  if (!r.has("seed")) throw ConfigError("scenario: seed is required");
  c.seed = static_cast<std::uint64_t>(r.get_int("seed"));
  c.mode = run_mode_from_string(r.get_string_or("mode", "manual"));
  c.common_site = r.get_string_or("common_site", "");

  for (const Json& s : r.get_array_or_empty("sites")) {
    FieldReader sr(s, "sites[]");
    SiteDescriptor d;
    d.id = sr.get_string("id");
    d.slots = sr.get_int_or("slots", 1);
    d.partition = sr.get_string_or("partition", "");
    d.preemptible = sr.get_bool_or("preemptible", false);
    sr.finish();
    c.sites.push_back(std::move(d));
  }

  for (const Json& l : r.get_array_or_empty("links")) {
    FieldReader lr(l, "links[]");
    LinkSpec ls;
    ls.from = lr.get_string("from");
    ls.to = lr.get_string("to");
    ls.bandwidth_gbps = lr.get_double("bandwidth_gbps");
    ls.latency_s = lr.get_double_or("latency_s", 0.0);
    ls.symmetric = lr.get_bool_or("symmetric", true);
    lr.finish();
    c.links.push_back(std::move(ls));
  }

  for (const Json& f : r.get_array_or_empty("failures")) {
    FieldReader fr(f, "failures[]");
    FailureSpec fs;
    fs.site = fr.get_string("site");
    fs.down_at = fr.get_double("down_at");
    fs.up_at = fr.get_double_or(
        "up_at", std::numeric_limits<double>::infinity());
    fr.finish();
    c.failures.push_back(std::move(fs));
  }

  for (const Json& p : r.get_array_or_empty("preemptions")) {
    FieldReader pr(p, "preemptions[]");
    PreemptionSpec ps;
    ps.site = pr.get_string("site");
    ps.at = pr.get_double("at");
    pr.finish();
    c.preemptions.push_back(std::move(ps));
  }

  for (const Json& b : r.get_array_or_empty("backends")) {
    FieldReader br(b, "backends[]");
    BackendDescriptor bd;
    bd.kind = br.get_string("kind");
    bd.name = br.get_string_or("name", "");
    if (bd.kind == "local") {
      bd.site = br.get_string("site");
    } else if (bd.kind == "batch_cluster") {
      for (const Json& p : br.get_array_or_empty("partitions")) {
        FieldReader pr(p, "backends[].partitions[]");
        PartitionSpec ps;
        ps.name = pr.get_string("name");
        ps.site = pr.get_string("site");
        ps.slots = pr.get_int_or("slots", 1);
        ps.max_cores = pr.get_int_or("max_cores", 0);
        ps.max_ram_gb = pr.get_double_or("max_ram_gb", 0.0);
        pr.finish();
        bd.partitions.push_back(std::move(ps));
      }
    } else if (bd.kind == "overflow_router") {
      bd.primary_site = br.get_string("primary_site");
      bd.secondary_site = br.get_string("secondary_site");
      bd.offload_cap = br.get_int_or("offload_cap", 0);
    } else {
      throw ConfigError("scenario: unknown backend kind '" + bd.kind + "'");
    }
    br.finish();
    c.backends.push_back(std::move(bd));
  }

  if (const Json* w = r.get_raw("workflow"); w && w->is_object()) {
    FieldReader wr(*w, "workflow");
    c.workflow.batch_count = wr.get_int_or("batch_count", 1);
    c.workflow.batch_size_bytes = wr.get_int_or("batch_size_bytes", 0);
    c.workflow.map_duration_s = wr.get_double_or("map_duration_s", 0.0);
    c.workflow.gather_duration_s = wr.get_double_or("gather_duration_s", 0.0);
    c.workflow.retry_limit = wr.get_int_or("retry_limit", 2);
    c.workflow.dataset_id = wr.get_string_or("dataset_id", "dataset");
    for (const Json& v : wr.get_array_or_empty("poisoned")) {
      if (!v.is_string()) throw ConfigError("workflow.poisoned: strings only");
      c.workflow.poisoned.push_back(v.get<std::string>());
    }
    for (const Json& v : wr.get_array_or_empty("multi_node")) {
      if (!v.is_string()) {
        throw ConfigError("workflow.multi_node: strings only");
      }
      c.workflow.multi_node_batches.push_back(v.get<std::string>());
    }
    for (const Json& h : wr.get_array_or_empty("homes")) {
      FieldReader hr(h, "workflow.homes[]");
      c.workflow.homes[hr.get_string("batch")] = hr.get_string("site");
      hr.finish();
    }
    c.workflow.scatter_home = wr.get_string_or("scatter_home", "");
    for (const Json& p : wr.get_array_or_empty("pins")) {
      FieldReader pr(p, "workflow.pins[]");
      c.workflow.pins[pr.get_string("batch")] = pr.get_string("partition");
      pr.finish();
    }
    wr.finish();
  }

  if (const Json* t = r.get_raw("tuning"); t && t->is_object()) {
    FieldReader tr(*t, "tuning");
    c.tuning.gather = tr.get_bool_or("gather", true);
    c.tuning.cost_model = tr.get_string_or("cost_model", "bytes");
    c.tuning.lease_s = tr.get_double_or("lease_s", 0.0);
    c.tuning.max_retries = tr.get_int_or("max_retries", 2);
    c.tuning.poll_interval_s = tr.get_double_or("poll_interval_s", 1.0);
    c.tuning.heartbeat_interval_s =
        tr.get_double_or("heartbeat_interval_s", 5.0);
    c.tuning.heartbeat_timeout_s =
        tr.get_double_or("heartbeat_timeout_s", 0.0);
    c.tuning.duration_jitter = tr.get_double_or("duration_jitter", 0.0);
    c.tuning.max_events = tr.get_int_or("max_events", 10'000'000);
    c.tuning.default_bandwidth_gbps =
        tr.get_double_or("default_bandwidth_gbps", 0.0);
    c.tuning.default_latency_s = tr.get_double_or("default_latency_s", 0.0);
    c.tuning.controller_site = tr.get_string_or("controller_site", "");
    tr.finish();
  }
  r.finish();

  c.validate();
  return c;
}

void ScenarioConfig::validate() const {
  if (sites.empty()) throw ConfigError("scenario: at least one site required");
  std::set<SiteId> known;
  for (const SiteDescriptor& s : sites) {
    if (s.id.empty()) throw ConfigError("scenario: site with empty id");
    if (!known.insert(s.id).second) {
      throw ConfigError("scenario: duplicate site '" + s.id + "'");
    }
    if (s.slots < 1) {
      throw ConfigError("scenario: site '" + s.id + "' needs slots >= 1");
    }
  }
  auto check_site = [&](const SiteId& id, const std::string& where) {
    if (!known.count(id)) {
      throw ConfigError("scenario: " + where + " references unknown site '" +
                        id + "'");
    }
  };
  if (!common_site.empty()) check_site(common_site, "common_site");

  std::set<std::pair<SiteId, SiteId>> covered;
  for (const LinkSpec& l : links) {
    check_site(l.from, "link");
    check_site(l.to, "link");
    if (l.from == l.to) {
      throw ConfigError("scenario: link from '" + l.from + "' to itself");
    }
    if (!std::isfinite(l.bandwidth_gbps) || l.bandwidth_gbps <= 0.0) {
      throw ConfigError("scenario: link " + l.from + " -> " + l.to +
                        " needs bandwidth_gbps > 0");
    }
    if (!finite_nonneg(l.latency_s)) {
      throw ConfigError("scenario: link " + l.from + " -> " + l.to +
                        " needs latency_s >= 0");
    }
    if (!covered.insert({l.from, l.to}).second) {
      throw ConfigError("scenario: duplicate link " + l.from + " -> " + l.to);
    }
    if (l.symmetric && !covered.insert({l.to, l.from}).second) {
      throw ConfigError("scenario: duplicate link " + l.to + " -> " + l.from);
    }
  }
  if (!std::isfinite(tuning.default_bandwidth_gbps) ||
      tuning.default_bandwidth_gbps < 0.0) {
    throw ConfigError("scenario: default_bandwidth_gbps must be >= 0");
  }
  if (tuning.default_bandwidth_gbps == 0.0 && sites.size() > 1) {
    for (const SiteId& a : known) {
      for (const SiteId& b : known) {
        if (a != b && !covered.count({a, b})) {
          throw ConfigError("scenario: link matrix missing " + a + " -> " + b);
        }
      }
    }
  }

  std::map<SiteId, std::vector<OutageWindow>> windows;
  for (const FailureSpec& f : failures) {
    check_site(f.site, "failure");
    if (!finite_nonneg(f.down_at)) {
      throw ConfigError("scenario: failure down_at must be >= 0");
    }
    if (f.up_at <= f.down_at) {
      throw ConfigError("scenario: failure on '" + f.site +
                        "' needs up_at > down_at");
    }
    windows[f.site].push_back(OutageWindow{f.down_at, f.up_at});
  }
  for (auto& [site, w] : windows) {
    std::sort(w.begin(), w.end(), [](const OutageWindow& a,
                                     const OutageWindow& b) {
      return a.down_at < b.down_at;
    });
    for (std::size_t i = 1; i < w.size(); ++i) {
      if (w[i].down_at < w[i - 1].up_at) {
        throw ConfigError("scenario: overlapping outage windows for site '" +
                          site + "'");
      }
    }
  }
  std::map<SiteId, bool> preemptible;
  for (const SiteDescriptor& s : sites) preemptible[s.id] = s.preemptible;
  for (const PreemptionSpec& p : preemptions) {
    check_site(p.site, "preemption");
    if (!preemptible[p.site]) {
      throw ConfigError("scenario: preemption on non-preemptible site '" +
                        p.site + "'");
    }
    if (!finite_nonneg(p.at)) {
      throw ConfigError("scenario: preemption time must be >= 0");
    }
  }

  if (workflow.batch_count < 1) {
    throw ConfigError("scenario: workflow.batch_count must be >= 1");
  }
  if (workflow.batch_size_bytes < 0) {
    throw ConfigError("scenario: workflow.batch_size_bytes must be >= 0");
  }
  if (!finite_nonneg(workflow.map_duration_s) ||
      !finite_nonneg(workflow.gather_duration_s)) {
    throw ConfigError("scenario: workflow durations must be finite and >= 0");
  }
  if (workflow.retry_limit < 0) {
    throw ConfigError("scenario: workflow.retry_limit must be >= 0");
  }
  if (workflow.dataset_id.empty()) {
    throw ConfigError("scenario: workflow.dataset_id must be nonempty");
  }
  auto check_batch = [&](const std::string& b, const std::string& where) {
    for (std::int64_t i = 0; i < workflow.batch_count; ++i) {
      if (b == WorkflowDriver::batch_id(i)) return;
    }
    throw ConfigError("scenario: " + where + " references unknown batch '" +
                      b + "'");
  };
  for (const std::string& b : workflow.poisoned) check_batch(b, "poisoned");
  for (const std::string& b : workflow.multi_node_batches) {
    check_batch(b, "multi_node");
  }
  for (const auto& [b, site] : workflow.homes) {
    check_batch(b, "homes");
    check_site(site, "homes");
  }
  if (!workflow.scatter_home.empty()) {
    check_site(workflow.scatter_home, "scatter_home");
  }
  for (const auto& [b, _] : workflow.pins) check_batch(b, "pins");

  if (tuning.cost_model != "bytes" && tuning.cost_model != "time") {
    throw ConfigError("scenario: cost_model must be 'bytes' or 'time'");
  }
  if (!finite_nonneg(tuning.lease_s)) {
    throw ConfigError("scenario: lease_s must be >= 0");
  }
  if (tuning.max_retries < 0) {
    throw ConfigError("scenario: max_retries must be >= 0");
  }
  if (!std::isfinite(tuning.poll_interval_s) || tuning.poll_interval_s <= 0) {
    throw ConfigError("scenario: poll_interval_s must be > 0");
  }
  if (!std::isfinite(tuning.heartbeat_interval_s) ||
      tuning.heartbeat_interval_s <= 0) {
    throw ConfigError("scenario: heartbeat_interval_s must be > 0");
  }
  if (!finite_nonneg(tuning.heartbeat_timeout_s)) {
    throw ConfigError("scenario: heartbeat_timeout_s must be >= 0");
  }
  if (!std::isfinite(tuning.duration_jitter) || tuning.duration_jitter < 0 ||
      tuning.duration_jitter >= 1.0) {
    throw ConfigError("scenario: duration_jitter must be in [0, 1)");
  }
  if (tuning.max_events < 1) {
    throw ConfigError("scenario: max_events must be >= 1");
  }
  if (!finite_nonneg(tuning.default_latency_s)) {
    throw ConfigError("scenario: default_latency_s must be >= 0");
  }
  if (!tuning.controller_site.empty()) {
    check_site(tuning.controller_site, "controller_site");
  }

  std::set<std::string> backend_names;
  std::set<SiteId> local_sites;
  std::size_t clusters = 0;
  std::size_t routers = 0;
  for (const BackendDescriptor& b : backends) {
    if (!backend_names.insert(backend_name(b)).second) {
      throw ConfigError("scenario: duplicate backend name '" +
                        backend_name(b) + "'");
    }
    if (b.kind == "local") {
      check_site(b.site, "backend");
      if (!local_sites.insert(b.site).second) {
        throw ConfigError("scenario: two local backends on site '" + b.site +
                          "'");
      }
    } else if (b.kind == "batch_cluster") {
      clusters += 1;
      if (b.partitions.empty()) {
        throw ConfigError("scenario: batch_cluster needs partitions");
      }
      std::set<std::string> part_names;
      for (const PartitionSpec& p : b.partitions) {
        check_site(p.site, "partition");
        if (p.name.empty()) {
          throw ConfigError("scenario: partition with empty name");
        }
        if (!part_names.insert(p.name).second) {
          throw ConfigError("scenario: duplicate partition '" + p.name + "'");
        }
        if (p.slots < 1) {
          throw ConfigError("scenario: partition '" + p.name +
                            "' needs slots >= 1");
        }
        if (p.max_cores < 0 || p.max_ram_gb < 0) {
          throw ConfigError("scenario: partition '" + p.name +
                            "' resource caps must be >= 0");
        }
      }
    } else if (b.kind == "overflow_router") {
      routers += 1;
      check_site(b.primary_site, "router");
      check_site(b.secondary_site, "router");
      if (b.primary_site == b.secondary_site) {
        throw ConfigError("scenario: router primary and secondary must differ");
      }
      if (b.offload_cap < 0) {
        throw ConfigError("scenario: offload_cap must be >= 0");
      }
    } else {
      throw ConfigError("scenario: unknown backend kind '" + b.kind + "'");
    }
  }
  if (!backends.empty()) {
    switch (mode) {
      case RunMode::MANUAL:
      case RunMode::FEDERATED:
      case RunMode::FEDERATED_CONTROLLER:
      case RunMode::GATEWAY:
        if (clusters || routers) {
          throw ConfigError(
              "scenario: this mode uses local backends only");
        }
        break;
      case RunMode::OVERLAY:
        if (clusters != 1 || routers || !local_sites.empty()) {
          throw ConfigError(
              "scenario: overlay mode needs exactly one batch_cluster");
        }
        break;
      case RunMode::OVERFLOW:
        if (routers != 1 || clusters) {
          throw ConfigError(
              "scenario: overflow mode needs exactly one overflow_router");
        }
        for (const BackendDescriptor& b : backends) {
          if (b.kind != "overflow_router") continue;
          if (!local_sites.count(b.primary_site) ||
              !local_sites.count(b.secondary_site)) {
            throw ConfigError(
                "scenario: router needs local backends on its primary and "
                "secondary sites");
          }
        }
        break;
    }
  }
  if (mode == RunMode::OVERFLOW && sites.size() < 2) {
    throw ConfigError("scenario: overflow mode needs at least two sites");
  }
  if (mode == RunMode::OVERLAY && !workflow.pins.empty() && backends.empty()) {
    // Pins must name partitions that will exist after derivation.
    std::set<std::string> derived;
    for (const SiteDescriptor& s : sites) {
      derived.insert(s.partition.empty() ? s.id : s.partition);
    }
    for (const auto& [_, part] : workflow.pins) {
      if (!derived.count(part)) {
        throw ConfigError("scenario: pin references unknown partition '" +
                          part + "'");
      }
    }
  }
}

ScenarioConfig load_scenario(const std::string& path) {
  if (path.size() >= 5 && path.substr(path.size() - 5) == ".json") {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str(), "json");
  }
  return ScenarioConfig::from_json(toml::parse_file(path));
}

ScenarioConfig parse_scenario(const std::string& text,
                              const std::string& format) {
  if (format == "json") {
    Json j = Json::parse(text, nullptr, false);
    if (j.is_discarded()) throw ParseError("invalid JSON scenario", 0);
    return ScenarioConfig::from_json(j);
  }
  if (format == "toml") return ScenarioConfig::from_json(toml::parse(text));
  throw ConfigError("unknown scenario format '" + format + "'");
}

}  // namespace hybridmesh
