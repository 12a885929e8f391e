// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
#include "hybridmesh/store.hpp"

#include <algorithm>

namespace hybridmesh {

void TransferLedger::append(LedgerEntry e) {
  total_ += e.bytes;
  entries_.push_back(std::move(e));
}

ObjectStore::ObjectStore(Engine& engine, SiteRegistry& sites)
    : engine_(engine), sites_(sites) {
  sites_.on_site_down([this](const SiteId& s) { cancel_inbound(s); });
}

std::string ObjectStore::put(const SiteId& site, const std::string& content,
                             std::int64_t declared_size) {
  if (!sites_.exists(site)) throw UnknownSite("unknown site '" + site + "'");
  if (!sites_.is_up(site)) throw SiteDown("site '" + site + "' is down");
  std::string id = object_id_for(content);
  std::int64_t size = declared_size >= 0
                          ? declared_size
                          : static_cast<std::int64_t>(content.size());
  auto it = objects_.find(id);
  if (it == objects_.end()) {
    objects_.emplace(id, StoredObject{id, size, content, {site}});
  } else {
    if (it->second.size_bytes != size) {
      throw Error("object '" + id + "' re-put with different declared size");
    }
    if (it->second.replicas.count(site)) return id;  // idempotent
    it->second.replicas.insert(site);
  }
  engine_.note("object_stored",
               Json{{"object_id", id}, {"site", site}, {"size_bytes", size}});
  return id;
}

bool ObjectStore::has_object(const std::string& object_id) const {
  return objects_.count(object_id) > 0;
}

const StoredObject& ObjectStore::object(const std::string& object_id) const {
  auto it = objects_.find(object_id);
  if (it == objects_.end()) {
    throw ObjectNotFound("object '" + object_id + "' not stored");
  }
  return it->second;
}

bool ObjectStore::has_replica(const std::string& object_id,
                              const SiteId& site) const {
  auto it = objects_.find(object_id);
  return it != objects_.end() && it->second.replicas.count(site) > 0;
}

double ObjectStore::fetch(const std::string& object_id, const SiteId& to,
                          const std::string& task_id) {
  const StoredObject& obj = object(object_id);
  if (!sites_.exists(to)) throw UnknownSite("unknown site '" + to + "'");
  if (obj.replicas.count(to)) return engine_.now();

  auto key = std::make_pair(object_id, to);
  auto fl = in_flight_.find(key);
  if (fl != in_flight_.end()) return fl->second.done_at;

  // Cheapest live source; replicas is an ordered set, so equal-cost ties
  // resolve to the lexicographically first site.
  const SiteId* best = nullptr;
  double best_time = 0.0;
  for (const SiteId& src : obj.replicas) {
    if (!sites_.is_up(src)) continue;
    double t = sites_.transfer_time(obj.size_bytes, src, to);
    if (best == nullptr || t < best_time) {
      best = &src;
      best_time = t;
    }
  }
  if (best == nullptr) {
    throw NoReachableReplica("no live replica for object '" + object_id + "'");
  }
  SiteId from = *best;
  double done_at = engine_.now() + best_time;
  std::int64_t bytes = obj.size_bytes;
  EventId ev = engine_.schedule(
      done_at, ScheduledKind::transfer_done,
      Json{{"object_id", object_id},
           {"from", from},
           {"to", to},
           {"size_bytes", bytes},
           {"reason", "fetch"},
           {"task_id", task_id}},
      [this, object_id, from, to, bytes, key] {
        in_flight_.erase(key);
        ledger_.append(LedgerEntry{from, to, bytes, engine_.now(), "fetch",
                                   object_id, ""});
        objects_.at(object_id).replicas.insert(to);
        engine_.note("replica_added",
                     Json{{"object_id", object_id}, {"site", to}});
      });
  in_flight_.emplace(key, InFlight{ev, done_at});
  return done_at;
}

double ObjectStore::charge(std::int64_t size_bytes, const SiteId& from,
                           const SiteId& to, const std::string& label,
                           const std::string& task_id) {
  if (from == to) return engine_.now();
  double done_at = engine_.now() + sites_.transfer_time(size_bytes, from, to);
  engine_.schedule(done_at, ScheduledKind::transfer_done,
                   Json{{"object_id", label},
                        {"from", from},
                        {"to", to},
                        {"size_bytes", size_bytes},
                        {"reason", "mount"},
                        {"task_id", task_id}},
                   [this, size_bytes, from, to, label] {
                     ledger_.append(LedgerEntry{from, to, size_bytes,
                                                engine_.now(), "mount", label,
                                                ""});
                   });
  return done_at;
}

double ObjectStore::gather(const std::vector<std::string>& object_ids,
                           const SiteId& common_site) {
  double ready = engine_.now();
  for (const std::string& id : object_ids) {
    ready = std::max(ready, fetch(id, common_site));
  }
  return ready;
}

Json ObjectStore::manifest(std::vector<std::string> object_ids) const {
  std::sort(object_ids.begin(), object_ids.end());
  Json out = Json::array();
  for (const std::string& id : object_ids) {
    const StoredObject& obj = object(id);
    out.push_back(Json{{"object_id", id}, {"size_bytes", obj.size_bytes}});
  }
  return out;
}

void ObjectStore::cancel_inbound(const SiteId& site) {
  for (auto it = in_flight_.begin(); it != in_flight_.end();) {
    if (it->first.second == site) {
      engine_.cancel(it->second.event);
      it = in_flight_.erase(it);
    } else {
      ++it;
    }
  }
}

}  // namespace hybridmesh
