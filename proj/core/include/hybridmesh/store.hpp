// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
//
// Content-addressed object store spanning all sites. Objects are identified
// by a self-describing digest id ("sha256:<hex>"). Replicas track which
// sites hold a copy; fetches pick the cheapest live source and charge the
// transfer ledger when the bytes finish moving. A separate charge() exists
// for bandwidth costs that move bytes without creating a replica (remote
// mounts).
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "hybridmesh/digest.hpp"
#include "hybridmesh/engine.hpp"
#include "hybridmesh/sites.hpp"

namespace hybridmesh {

struct StoredObject {
  std::string object_id;
  std::int64_t size_bytes = 0;
  std::string content;
  std::set<SiteId> replicas;
};

struct LedgerEntry {
  SiteId from;
  SiteId to;
  std::int64_t bytes = 0;
  double at = 0.0;
  std::string reason;  // "fetch" or "mount"
  std::string object_id;
  std::string task_id;
};

class TransferLedger {
 public:
  void append(LedgerEntry e);
  const std::vector<LedgerEntry>& entries() const { return entries_; }
  std::int64_t total_bytes() const { return total_; }

 private:
  std::vector<LedgerEntry> entries_;
  std::int64_t total_ = 0;
};

class ObjectStore {
 public:
  ObjectStore(Engine& engine, SiteRegistry& sites);

  // Stores content with a replica at `site`. Idempotent for identical
  // content. declared_size, when >= 0, is the accounting size used by the
  // transfer model (content itself stays small).
  std::string put(const SiteId& site, const std::string& content,
                  std::int64_t declared_size = -1);

  bool has_object(const std::string& object_id) const;
  const StoredObject& object(const std::string& object_id) const;
  bool has_replica(const std::string& object_id, const SiteId& site) const;

  // Returns the time at which the object is available at `to`. Local
  // replica: now, nothing ledgered. Otherwise schedules (or joins) a
  // transfer from the cheapest live replica; the ledger entry and the
  // replica appear when the transfer completes.
  double fetch(const std::string& object_id, const SiteId& to,
               const std::string& task_id = std::string());

  // Charges bytes across a link without creating a replica. Returns the
  // completion time. Used for remote-mount traffic.
  double charge(std::int64_t size_bytes, const SiteId& from, const SiteId& to,
                const std::string& label, const std::string& task_id);

  // Availability time for all ids at common_site (max over fetches).
  double gather(const std::vector<std::string>& object_ids,
                const SiteId& common_site);

  // Sorted [{object_id, size_bytes}] listing; all ids must exist.
  Json manifest(std::vector<std::string> object_ids) const;

  const TransferLedger& ledger() const { return ledger_; }

 private:
  struct InFlight {
    EventId event = 0;
    double done_at = 0.0;
  };

  Engine& engine_;
  SiteRegistry& sites_;
  std::map<std::string, StoredObject> objects_;
  // (object_id, destination) -> pending transfer, for dedup + cancellation.
  std::map<std::pair<std::string, SiteId>, InFlight> in_flight_;
  TransferLedger ledger_;

  void cancel_inbound(const SiteId& site);
};

}  // namespace hybridmesh
