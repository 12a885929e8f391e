// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
#include "hybridmesh/sites.hpp"

#include <cmath>

namespace hybridmesh {

SiteRegistry::SiteRegistry(Engine& engine) : engine_(engine) {}

void SiteRegistry::add_site(SiteDescriptor d) {
  if (d.id.empty()) throw ConfigError("site id must be nonempty");
  if (d.slots < 1) throw ConfigError("site '" + d.id + "': slots must be >= 1");
  if (sites_.count(d.id)) throw ConfigError("duplicate site '" + d.id + "'");
  double prev_up = -1.0;
  for (const OutageWindow& w : d.outages) {
    if (!(w.down_at < w.up_at)) {
      throw ConfigError("site '" + d.id + "': outage window must have down_at < up_at");
    }
    if (w.down_at < prev_up) {
      throw ConfigError("site '" + d.id + "': overlapping outage windows");
    }
    prev_up = w.up_at;
  }
  SiteId id = d.id;
  std::vector<OutageWindow> outages = d.outages;
  sites_.emplace(id, SiteState{std::move(d), true});
  for (const OutageWindow& w : outages) {
    inject_failure(id, w.down_at, w.up_at);
  }
}

void SiteRegistry::set_link(const SiteId& from, const SiteId& to, LinkParams p) {
  if (!exists(from)) throw UnknownSite("unknown site '" + from + "'");
  if (!exists(to)) throw UnknownSite("unknown site '" + to + "'");
  if (!(p.bandwidth_gbps > 0.0)) {
    throw ConfigError("link " + from + "->" + to + ": bandwidth must be > 0");
  }
  if (p.latency_s < 0.0) {
    throw ConfigError("link " + from + "->" + to + ": latency must be >= 0");
  }
  links_[{from, to}] = p;
}

void SiteRegistry::set_default_link(LinkParams p) {
  if (!(p.bandwidth_gbps > 0.0) || p.latency_s < 0.0) {
    throw ConfigError("default link parameters out of range");
  }
  default_link_ = p;
}

bool SiteRegistry::exists(const SiteId& id) const { return sites_.count(id) > 0; }

const SiteDescriptor& SiteRegistry::site(const SiteId& id) const {
  auto it = sites_.find(id);
  if (it == sites_.end()) throw UnknownSite("unknown site '" + id + "'");
  return it->second.desc;
}

std::vector<SiteId> SiteRegistry::site_ids() const {
  std::vector<SiteId> out;
  out.reserve(sites_.size());
  for (const auto& [id, _] : sites_) out.push_back(id);
  return out;
}

bool SiteRegistry::is_up(const SiteId& id) const {
  auto it = sites_.find(id);
  if (it == sites_.end()) throw UnknownSite("unknown site '" + id + "'");
  return it->second.up;
}

LinkParams SiteRegistry::link(const SiteId& from, const SiteId& to) const {
  auto it = links_.find({from, to});
  if (it != links_.end()) return it->second;
  return default_link_;
}

double SiteRegistry::transfer_time(std::int64_t size_bytes, const SiteId& from,
                                   const SiteId& to) const {
  if (!exists(from)) throw UnknownSite("unknown site '" + from + "'");
  if (!exists(to)) throw UnknownSite("unknown site '" + to + "'");
  if (from == to) return 0.0;
  LinkParams p = link(from, to);
  double bits_per_s = p.bandwidth_gbps * 1e9;
  return p.latency_s + static_cast<double>(size_bytes) / (bits_per_s / 8.0);
}

void SiteRegistry::inject_failure(const SiteId& id, double down_at, double up_at) {
  if (!exists(id)) throw UnknownSite("unknown site '" + id + "'");
  if (!(down_at < up_at)) throw ConfigError("failure window must have down_at < up_at");
  engine_.schedule(down_at, ScheduledKind::site_down, Json{{"site", id}},
                   [this, id] { fire_down(id); });
  if (std::isfinite(up_at)) {
    engine_.schedule(up_at, ScheduledKind::site_up, Json{{"site", id}},
                     [this, id] { fire_up(id); });
  }
}

void SiteRegistry::inject_preemption(const SiteId& id, double at) {
  const SiteDescriptor& d = site(id);
  if (!d.preemptible) {
    throw ConfigError("site '" + id + "' is not preemptible");
  }
  engine_.schedule(at, ScheduledKind::preempt, Json{{"site", id}},
                   [this, id] { fire_preempt(id); });
}

void SiteRegistry::fire_down(const SiteId& id) {
  sites_.at(id).up = false;
  for (const auto& h : down_handlers_) h(id);
}

void SiteRegistry::fire_up(const SiteId& id) {
  sites_.at(id).up = true;
  for (const auto& h : up_handlers_) h(id);
}

void SiteRegistry::fire_preempt(const SiteId& id) {
  for (const auto& h : preempt_handlers_) h(id);
}

}  // namespace hybridmesh
