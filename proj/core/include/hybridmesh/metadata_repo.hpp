// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
//
// Centralized batch metadata: registration, optimistic compare-and-set
// claims with leases, status reporting, and lease expiry. Expected
// distributed outcomes (conflicts, fencing rejections) are status values,
// not exceptions; only programming errors throw.
//
// The repo itself is clock-free: callers pass `now`. In simulation that is
// the engine clock; the wire server passes wall time and sweeps lazily.
#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hybridmesh/engine.hpp"
#include "hybridmesh/task.hpp"

namespace hybridmesh {

enum class BatchTag { UNPROCESSED, CLAIMED, PROCESSING, SUCCEEDED, FAILED };

const char* to_string(BatchTag t);
BatchTag batch_tag_from_string(const std::string& s);

enum class RepoStatus {
  OK,
  CONFLICT,
  NOT_CLAIMANT,
  LEASE_EXPIRED,
  ILLEGAL_TAG,
  UNKNOWN_BATCH,
  DUPLICATE_BATCH,
};

const char* to_string(RepoStatus s);
RepoStatus repo_status_from_string(const std::string& s);

struct BatchRecord {
  std::string batch_id;
  DataRef input;
  BatchTag tag = BatchTag::UNPROCESSED;
  std::int64_t version = 0;
  SiteId claimant;         // empty when no active lease
  double lease_expiry = 0.0;  // meaningful only when claimant nonempty
  std::int64_t attempts = 0;
  std::string output;      // object id, set on SUCCEEDED
  std::uint64_t mutation_seq = 0;  // global seq of this record's last mutation

  Json to_json() const;
  static BatchRecord from_json(const Json& j);
};

struct RepoResult {
  RepoStatus status = RepoStatus::OK;
  BatchRecord record;  // current state; empty for unknown/duplicate ids
  bool ok() const { return status == RepoStatus::OK; }
};

struct ExpirySweep {
  std::vector<std::string> reset;   // back to UNPROCESSED
  std::vector<std::string> failed;  // retry budget exhausted
};

class MetadataRepo {
 public:
  explicit MetadataRepo(std::int64_t max_retries);

  RepoResult register_batch(const std::string& batch_id, const DataRef& input);
  RepoResult claim(const std::string& batch_id, const SiteId& site,
                   std::int64_t expected_version, double lease_s, double now);
  RepoResult report(const std::string& batch_id, const SiteId& site,
                    BatchTag new_tag, const std::string& output, double now);
  ExpirySweep expire_leases(double now);

  std::vector<BatchRecord> list(std::optional<BatchTag> tag) const;
  std::optional<BatchRecord> find(const std::string& batch_id) const;

  std::int64_t max_retries() const { return max_retries_; }
  std::uint64_t mutation_seq() const { return mutation_seq_; }
  std::size_t size() const { return records_.size(); }

 private:
  std::int64_t max_retries_;
  std::uint64_t mutation_seq_ = 0;
  std::map<std::string, BatchRecord> records_;

  void mutate(BatchRecord& r);
};

// Engine-bound wrapper used by simulated drivers: logs every repo
// interaction to the event log and schedules lease-expiry events so that
// crashed workers' batches return to the pool at the right simulated time.
class SimRepo {
 public:
  SimRepo(Engine& engine, std::int64_t max_retries);

  RepoResult register_batch(const std::string& batch_id, const DataRef& input);
  RepoResult claim(const std::string& batch_id, const SiteId& site,
                   std::int64_t expected_version, double lease_s);
  RepoResult report(const std::string& batch_id, const SiteId& site,
                    BatchTag new_tag, const std::string& output);
  std::vector<BatchRecord> list(std::optional<BatchTag> tag) const;

  MetadataRepo& repo() { return repo_; }
  const MetadataRepo& repo() const { return repo_; }

 private:
  Engine& engine_;
  MetadataRepo repo_;

  void on_lease_event(const std::string& batch_id);
};

}  // namespace hybridmesh
