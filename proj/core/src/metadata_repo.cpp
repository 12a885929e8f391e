// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
#include "hybridmesh/metadata_repo.hpp"

namespace hybridmesh {

const char* to_string(BatchTag t) {
  switch (t) {
    case BatchTag::UNPROCESSED: return "UNPROCESSED";
    case BatchTag::CLAIMED: return "CLAIMED";
    case BatchTag::PROCESSING: return "PROCESSING";
    case BatchTag::SUCCEEDED: return "SUCCEEDED";
    case BatchTag::FAILED: return "FAILED";
  }
  return "?";
}

BatchTag batch_tag_from_string(const std::string& s) {
  if (s == "UNPROCESSED") return BatchTag::UNPROCESSED;
  if (s == "CLAIMED") return BatchTag::CLAIMED;
  if (s == "PROCESSING") return BatchTag::PROCESSING;
  if (s == "SUCCEEDED") return BatchTag::SUCCEEDED;
  if (s == "FAILED") return BatchTag::FAILED;
  throw MalformedSpec("unknown batch tag '" + s + "'");
}

const char* to_string(RepoStatus s) {
  switch (s) {
    case RepoStatus::OK: return "OK";
    case RepoStatus::CONFLICT: return "CONFLICT";
    case RepoStatus::NOT_CLAIMANT: return "NOT_CLAIMANT";
    case RepoStatus::LEASE_EXPIRED: return "LEASE_EXPIRED";
    case RepoStatus::ILLEGAL_TAG: return "ILLEGAL_TAG";
    case RepoStatus::UNKNOWN_BATCH: return "UNKNOWN_BATCH";
    case RepoStatus::DUPLICATE_BATCH: return "DUPLICATE_BATCH";
  }
  return "?";
}

RepoStatus repo_status_from_string(const std::string& s) {
  if (s == "OK") return RepoStatus::OK;
  if (s == "CONFLICT") return RepoStatus::CONFLICT;
  if (s == "NOT_CLAIMANT") return RepoStatus::NOT_CLAIMANT;
  if (s == "LEASE_EXPIRED") return RepoStatus::LEASE_EXPIRED;
  if (s == "ILLEGAL_TAG") return RepoStatus::ILLEGAL_TAG;
  if (s == "UNKNOWN_BATCH") return RepoStatus::UNKNOWN_BATCH;
  if (s == "DUPLICATE_BATCH") return RepoStatus::DUPLICATE_BATCH;
  throw MalformedSpec("unknown repo status '" + s + "'");
}

Json BatchRecord::to_json() const {
  Json j{{"batch_id", batch_id},
         {"input", input.to_json()},
         {"tag", to_string(tag)},
         {"version", version},
         {"attempts", attempts},
         {"mutation_seq", mutation_seq}};
  if (!claimant.empty()) {
    j["claimant"] = claimant;
    j["lease_expiry"] = lease_expiry;
  }
  if (!output.empty()) j["output"] = output;
  return j;
}

BatchRecord BatchRecord::from_json(const Json& j) {
  FieldReader r(j, "BatchRecord");
  BatchRecord out;
  out.batch_id = r.get_string("batch_id");
  if (const Json* in = r.get_raw("input")) out.input = DataRef::from_json(*in);
  out.tag = batch_tag_from_string(r.get_string("tag"));
  out.version = r.get_int("version");
  out.attempts = r.get_int("attempts");
  out.mutation_seq = static_cast<std::uint64_t>(r.get_int_or("mutation_seq", 0));
  out.claimant = r.get_string_or("claimant", "");
  out.lease_expiry = r.get_double_or("lease_expiry", 0.0);
  out.output = r.get_string_or("output", "");
  r.finish();
  return out;
}

MetadataRepo::MetadataRepo(std::int64_t max_retries)
    : max_retries_(max_retries) {
  if (max_retries < 0) throw ConfigError("max_retries must be >= 0");
}

void MetadataRepo::mutate(BatchRecord& r) {
  r.version += 1;
  r.mutation_seq = ++mutation_seq_;
}

RepoResult MetadataRepo::register_batch(const std::string& batch_id,
                                        const DataRef& input) {
  if (batch_id.empty()) throw MalformedSpec("batch_id must be nonempty");
  if (records_.count(batch_id)) {
    return RepoResult{RepoStatus::DUPLICATE_BATCH, records_.at(batch_id)};
  }
  BatchRecord r;
  r.batch_id = batch_id;
  r.input = input;
  r.tag = BatchTag::UNPROCESSED;
  r.version = 1;
  r.attempts = 0;
  r.mutation_seq = ++mutation_seq_;
  records_.emplace(batch_id, r);
  return RepoResult{RepoStatus::OK, r};
}

RepoResult MetadataRepo::claim(const std::string& batch_id, const SiteId& site,
                               std::int64_t expected_version, double lease_s,
                               double now) {
  if (!(lease_s > 0.0)) throw ConfigError("lease_s must be > 0");
  auto it = records_.find(batch_id);
  if (it == records_.end()) {
    return RepoResult{RepoStatus::UNKNOWN_BATCH, BatchRecord{}};
  }
  BatchRecord& r = it->second;
  if (r.tag != BatchTag::UNPROCESSED || r.version != expected_version) {
    return RepoResult{RepoStatus::CONFLICT, r};
  }
  r.tag = BatchTag::CLAIMED;
  r.claimant = site;
  r.lease_expiry = now + lease_s;
  r.attempts += 1;
  mutate(r);
  return RepoResult{RepoStatus::OK, r};
}

RepoResult MetadataRepo::report(const std::string& batch_id, const SiteId& site,
                                BatchTag new_tag, const std::string& output,
                                double now) {
  auto it = records_.find(batch_id);
  if (it == records_.end()) {
    return RepoResult{RepoStatus::UNKNOWN_BATCH, BatchRecord{}};
  }
  BatchRecord& r = it->second;
  if (r.claimant.empty() || r.claimant != site) {
    return RepoResult{RepoStatus::NOT_CLAIMANT, r};
  }
  if (r.lease_expiry <= now) {
    return RepoResult{RepoStatus::LEASE_EXPIRED, r};
  }
  bool legal = (r.tag == BatchTag::CLAIMED && new_tag == BatchTag::PROCESSING) ||
               (r.tag == BatchTag::PROCESSING &&
                (new_tag == BatchTag::SUCCEEDED || new_tag == BatchTag::FAILED));
  if (!legal) return RepoResult{RepoStatus::ILLEGAL_TAG, r};
  if (new_tag == BatchTag::SUCCEEDED && output.empty()) {
    return RepoResult{RepoStatus::ILLEGAL_TAG, r};
  }
  r.tag = new_tag;
  if (new_tag == BatchTag::SUCCEEDED) r.output = output;
  if (new_tag == BatchTag::SUCCEEDED || new_tag == BatchTag::FAILED) {
    r.claimant.clear();
    r.lease_expiry = 0.0;
  }
  mutate(r);
  return RepoResult{RepoStatus::OK, r};
}

ExpirySweep MetadataRepo::expire_leases(double now) {
  ExpirySweep sweep;
  for (auto& [id, r] : records_) {
    bool leased = r.tag == BatchTag::CLAIMED || r.tag == BatchTag::PROCESSING;
    if (!leased || r.lease_expiry > now) continue;
    r.claimant.clear();
    r.lease_expiry = 0.0;
    if (r.attempts <= max_retries_) {
      r.tag = BatchTag::UNPROCESSED;
      sweep.reset.push_back(id);
    } else {
      r.tag = BatchTag::FAILED;
      sweep.failed.push_back(id);
    }
    mutate(r);
  }
  return sweep;
}

std::vector<BatchRecord> MetadataRepo::list(std::optional<BatchTag> tag) const {
  std::vector<BatchRecord> out;
  for (const auto& [id, r] : records_) {
    if (!tag || r.tag == *tag) out.push_back(r);
  }
  return out;
}

std::optional<BatchRecord> MetadataRepo::find(const std::string& batch_id) const {
  auto it = records_.find(batch_id);
  if (it == records_.end()) return std::nullopt;
  return it->second;
}

SimRepo::SimRepo(Engine& engine, std::int64_t max_retries)
    : engine_(engine), repo_(max_retries) {}

RepoResult SimRepo::register_batch(const std::string& batch_id,
                                   const DataRef& input) {
  RepoResult res = repo_.register_batch(batch_id, input);
  if (res.ok()) {
    engine_.note("batch_registered",
                 Json{{"batch_id", batch_id},
                      {"object_id", input.object_id},
                      {"home_site", input.home_site}});
  }
  return res;
}

RepoResult SimRepo::claim(const std::string& batch_id, const SiteId& site,
                          std::int64_t expected_version, double lease_s) {
  RepoResult res =
      repo_.claim(batch_id, site, expected_version, lease_s, engine_.now());
  if (res.ok()) {
    engine_.note("claim_granted", Json{{"batch_id", batch_id},
                                       {"site", site},
                                       {"version", res.record.version},
                                       {"attempts", res.record.attempts},
                                       {"lease_expiry", res.record.lease_expiry}});
    // Silent timer; a lease_expired record is emitted only if the lease is
    // still outstanding when it fires.
    std::string id = batch_id;
    engine_.schedule_internal(res.record.lease_expiry,
                              [this, id] { on_lease_event(id); });
  } else {
    engine_.note("claim_conflict",
                 Json{{"batch_id", batch_id},
                      {"site", site},
                      {"expected_version", expected_version},
                      {"status", to_string(res.status)}});
  }
  return res;
}

RepoResult SimRepo::report(const std::string& batch_id, const SiteId& site,
                           BatchTag new_tag, const std::string& output) {
  RepoResult res =
      repo_.report(batch_id, site, new_tag, output, engine_.now());
  if (res.ok()) {
    engine_.note("report_applied", Json{{"batch_id", batch_id},
                                        {"site", site},
                                        {"tag", to_string(new_tag)}});
  } else {
    engine_.note("report_rejected", Json{{"batch_id", batch_id},
                                         {"site", site},
                                         {"tag", to_string(new_tag)},
                                         {"status", to_string(res.status)}});
  }
  return res;
}

std::vector<BatchRecord> SimRepo::list(std::optional<BatchTag> tag) const {
  return repo_.list(tag);
}

void SimRepo::on_lease_event(const std::string& batch_id) {
  // The lease may have been replaced or resolved since this was scheduled;
  // sweep decides from current state.
  std::optional<BatchRecord> before = repo_.find(batch_id);
  if (!before) return;
  bool leased = before->tag == BatchTag::CLAIMED ||
                before->tag == BatchTag::PROCESSING;
  if (!leased || before->lease_expiry > engine_.now()) return;
  engine_.note("lease_expired", Json{{"batch_id", batch_id},
                                     {"site", before->claimant}});
  ExpirySweep sweep = repo_.expire_leases(engine_.now());
  for (const std::string& id : sweep.reset) {
    engine_.note("batch_reset",
                 Json{{"batch_id", id},
                      {"attempts", repo_.find(id)->attempts}});
  }
  for (const std::string& id : sweep.failed) {
    engine_.note("batch_failed",
                 Json{{"batch_id", id},
                      {"attempts", repo_.find(id)->attempts}});
  }
}

}  // namespace hybridmesh
