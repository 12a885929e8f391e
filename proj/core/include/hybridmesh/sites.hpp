// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
//
// Site topology: descriptors, link parameters, availability windows, and
// the transfer cost model. Failure and preemption injection schedule engine
// events; interested modules subscribe to the resulting notifications.
#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <vector>

#include "hybridmesh/engine.hpp"
#include "hybridmesh/task.hpp"

namespace hybridmesh {

struct OutageWindow {
  double down_at = 0.0;
  double up_at = std::numeric_limits<double>::infinity();
};

struct SiteDescriptor {
  SiteId id;
  std::int64_t slots = 1;
  std::string partition;
  bool preemptible = false;
  std::vector<OutageWindow> outages;
};

struct LinkParams {
  double bandwidth_gbps = 0.0;
  double latency_s = 0.0;
};

class SiteRegistry {
 public:
  explicit SiteRegistry(Engine& engine);

  void add_site(SiteDescriptor d);
  // Directed link override; scenario loading expands symmetric entries.
  void set_link(const SiteId& from, const SiteId& to, LinkParams p);
  void set_default_link(LinkParams p);

  bool exists(const SiteId& id) const;
  const SiteDescriptor& site(const SiteId& id) const;
  // Sorted by SiteId.
  std::vector<SiteId> site_ids() const;
  bool is_up(const SiteId& id) const;
  LinkParams link(const SiteId& from, const SiteId& to) const;

  // latency + size / (bandwidth in bits/s ÷ 8); zero for local access.
  double transfer_time(std::int64_t size_bytes, const SiteId& from,
                       const SiteId& to) const;

  void inject_failure(const SiteId& id, double down_at, double up_at);
  void inject_preemption(const SiteId& id, double at);

  using SiteHandler = std::function<void(const SiteId&)>;
  void on_site_down(SiteHandler h) { down_handlers_.push_back(std::move(h)); }
  void on_site_up(SiteHandler h) { up_handlers_.push_back(std::move(h)); }
  void on_preempt(SiteHandler h) { preempt_handlers_.push_back(std::move(h)); }

 private:
  struct SiteState {
    SiteDescriptor desc;
    bool up = true;
  };

  Engine& engine_;
  std::map<SiteId, SiteState> sites_;
  std::map<std::pair<SiteId, SiteId>, LinkParams> links_;
  LinkParams default_link_{1.0, 0.0};
  std::vector<SiteHandler> down_handlers_;
  std::vector<SiteHandler> up_handlers_;
  std::vector<SiteHandler> preempt_handlers_;

  void fire_down(const SiteId& id);
  void fire_up(const SiteId& id);
  void fire_preempt(const SiteId& id);
};

}  // namespace hybridmesh
