// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0

#include <map>
#include <set>
#include <string>
#include <vector>

#include "doctest/doctest.h"
#include "hybridmesh/metadata_repo.hpp"
#include "hybridmesh/rng.hpp"

using namespace hybridmesh;

namespace {

DataRef ref(const std::string& oid = "sha256:aa") {
  return DataRef{oid, 1000, "siteA"};
}

// Claims with the freshest observed version, as a well-behaved worker does.
RepoResult claim_fresh(MetadataRepo& repo, const std::string& id,
                       const SiteId& site, double lease_s, double now) {
  auto rec = repo.find(id);
  REQUIRE(rec.has_value());
  return repo.claim(id, site, rec->version, lease_s, now);
}

}  // namespace

TEST_CASE("register assigns version 1 and rejects duplicates") {
  MetadataRepo repo(3);
  RepoResult r = repo.register_batch("b1", ref());
  CHECK(r.ok());
  CHECK(r.record.version == 1);
  CHECK(r.record.attempts == 0);
  CHECK(r.record.tag == BatchTag::UNPROCESSED);
  RepoResult dup = repo.register_batch("b1", ref());
  CHECK(dup.status == RepoStatus::DUPLICATE_BATCH);
  CHECK(repo.size() == 1);
}

TEST_CASE("claim is a compare-and-set on (tag, version)") {
  MetadataRepo repo(3);
  repo.register_batch("b1", ref());

  RepoResult stale = repo.claim("b1", "s1", 0, 30.0, 0.0);
  CHECK(stale.status == RepoStatus::CONFLICT);

  RepoResult won = repo.claim("b1", "s1", 1, 30.0, 0.0);
  CHECK(won.ok());
  CHECK(won.record.tag == BatchTag::CLAIMED);
  CHECK(won.record.claimant == "s1");
  CHECK(won.record.attempts == 1);
  CHECK(won.record.version == 2);
  CHECK(won.record.lease_expiry == 30.0);

  // The loser raced with the same snapshot: version has moved on.
  RepoResult lost = repo.claim("b1", "s2", 1, 30.0, 0.0);
  CHECK(lost.status == RepoStatus::CONFLICT);
  CHECK(lost.record.claimant == "s1");

  CHECK(repo.claim("zzz", "s1", 1, 30.0, 0.0).status ==
        RepoStatus::UNKNOWN_BATCH);
  CHECK_THROWS_AS(repo.claim("b1", "s1", 2, 0.0, 0.0), ConfigError);
}

TEST_CASE("reports walk CLAIMED -> PROCESSING -> SUCCEEDED|FAILED only") {
  MetadataRepo repo(3);
  repo.register_batch("b1", ref());
  repo.claim("b1", "s1", 1, 30.0, 0.0);

  CHECK(repo.report("b1", "s1", BatchTag::SUCCEEDED, "out", 1.0).status ==
        RepoStatus::ILLEGAL_TAG);
  CHECK(repo.report("b1", "s1", BatchTag::UNPROCESSED, "", 1.0).status ==
        RepoStatus::ILLEGAL_TAG);

  CHECK(repo.report("b1", "s1", BatchTag::PROCESSING, "", 1.0).ok());
  CHECK(repo.report("b1", "s1", BatchTag::CLAIMED, "", 1.0).status ==
        RepoStatus::ILLEGAL_TAG);

  // SUCCEEDED needs a nonempty output reference.
  CHECK(repo.report("b1", "s1", BatchTag::SUCCEEDED, "", 2.0).status ==
        RepoStatus::ILLEGAL_TAG);
  RepoResult done = repo.report("b1", "s1", BatchTag::SUCCEEDED, "out", 2.0);
  CHECK(done.ok());
  CHECK(done.record.output == "out");
  CHECK(done.record.claimant.empty());  // lease released on terminal tag
}

TEST_CASE("only the claimant inside its lease may report") {
  MetadataRepo repo(3);
  repo.register_batch("b1", ref());
  repo.claim("b1", "s1", 1, 10.0, 0.0);

  CHECK(repo.report("b1", "s2", BatchTag::PROCESSING, "", 1.0).status ==
        RepoStatus::NOT_CLAIMANT);
  // Past the lease cutoff the original claimant is fenced out too.
  CHECK(repo.report("b1", "s1", BatchTag::PROCESSING, "", 10.0).status ==
        RepoStatus::LEASE_EXPIRED);
  CHECK(repo.report("zzz", "s1", BatchTag::PROCESSING, "", 1.0).status ==
        RepoStatus::UNKNOWN_BATCH);
}

TEST_CASE("expiry sweeps reset batches until the retry budget runs out") {
  MetadataRepo repo(1);  // one retry: attempts may reach 2
  repo.register_batch("b1", ref());

  // Attempt 1 dies silently; the sweep resets the batch.
  claim_fresh(repo, "b1", "s1", 10.0, 0.0);
  ExpirySweep s1 = repo.expire_leases(10.0);
  CHECK(s1.reset == std::vector<std::string>{"b1"});
  CHECK(s1.failed.empty());
  CHECK(repo.find("b1")->tag == BatchTag::UNPROCESSED);
  CHECK(repo.find("b1")->attempts == 1);

  // Attempt 2 dies as well; the budget (max_retries=1) is exhausted.
  claim_fresh(repo, "b1", "s2", 10.0, 20.0);
  ExpirySweep s2 = repo.expire_leases(40.0);
  CHECK(s2.reset.empty());
  CHECK(s2.failed == std::vector<std::string>{"b1"});
  CHECK(repo.find("b1")->tag == BatchTag::FAILED);
  CHECK(repo.find("b1")->attempts == 2);

  // Unexpired leases survive sweeps.
  repo.register_batch("b2", ref());
  claim_fresh(repo, "b2", "s1", 100.0, 50.0);
  ExpirySweep s3 = repo.expire_leases(60.0);
  CHECK(s3.reset.empty());
  CHECK(s3.failed.empty());
  CHECK(repo.find("b2")->tag == BatchTag::CLAIMED);
}

TEST_CASE("a mid-processing crash is recovered by the sweep") {
  MetadataRepo repo(3);
  repo.register_batch("b1", ref());
  claim_fresh(repo, "b1", "s1", 10.0, 0.0);
  repo.report("b1", "s1", BatchTag::PROCESSING, "", 1.0);
  ExpirySweep s = repo.expire_leases(10.0);
  CHECK(s.reset == std::vector<std::string>{"b1"});
  // The fenced worker's late report bounces.
  CHECK(repo.report("b1", "s1", BatchTag::SUCCEEDED, "out", 11.0).status ==
        RepoStatus::NOT_CLAIMANT);
}

TEST_CASE("list filters by tag and find returns copies") {
  MetadataRepo repo(3);
  repo.register_batch("b1", ref());
  repo.register_batch("b2", ref("sha256:bb"));
  repo.claim("b1", "s1", 1, 10.0, 0.0);
  CHECK(repo.list(std::nullopt).size() == 2);
  CHECK(repo.list(BatchTag::CLAIMED).size() == 1);
  CHECK(repo.list(BatchTag::UNPROCESSED).size() == 1);
  CHECK(repo.list(BatchTag::SUCCEEDED).empty());
  CHECK_FALSE(repo.find("zzz").has_value());
}

TEST_CASE("batch records round-trip through json") {
  MetadataRepo repo(3);
  repo.register_batch("b1", ref());
  repo.claim("b1", "s1", 1, 10.0, 0.0);
  BatchRecord r = *repo.find("b1");
  BatchRecord back = BatchRecord::from_json(r.to_json());
  CHECK(back.batch_id == r.batch_id);
  CHECK(back.tag == r.tag);
  CHECK(back.version == r.version);
  CHECK(back.claimant == r.claimant);
  CHECK(back.lease_expiry == r.lease_expiry);
  CHECK(back.attempts == r.attempts);
  CHECK(back.input == r.input);
}

TEST_CASE("repo status strings round-trip") {
  for (RepoStatus s :
       {RepoStatus::OK, RepoStatus::CONFLICT, RepoStatus::NOT_CLAIMANT,
        RepoStatus::LEASE_EXPIRED, RepoStatus::ILLEGAL_TAG,
        RepoStatus::UNKNOWN_BATCH, RepoStatus::DUPLICATE_BATCH}) {
    CHECK(repo_status_from_string(to_string(s)) == s);
  }
  CHECK_THROWS_AS(repo_status_from_string("???"), MalformedSpec);
}

// Sequential linearizability harness: random interleavings of claim,
// report, and sweep against a model that tracks just enough state to
// predict success. The repo itself is the authority on versions; the model
// checks the invariants that matter.
TEST_CASE("randomized histories never violate exclusivity or conservation") {
  Rng rng(77);
  for (int round = 0; round < 50; ++round) {
    const std::int64_t max_retries = 1 + static_cast<std::int64_t>(rng.below(3));
    MetadataRepo repo(max_retries);
    const int n_batches = 2 + static_cast<int>(rng.below(4));
    const std::vector<SiteId> sites = {"s1", "s2", "s3"};
    for (int b = 0; b < n_batches; ++b) {
      repo.register_batch("b" + std::to_string(b), ref());
    }
    double now = 0.0;
    std::uint64_t last_mutation = repo.mutation_seq();
    for (int step = 0; step < 200; ++step) {
      now += rng.unit();
      std::string id = "b" + std::to_string(rng.below(n_batches));
      const SiteId& site = sites[rng.below(sites.size())];
      switch (rng.below(4)) {
        case 0: {
          auto rec = repo.find(id);
          repo.claim(id, site, rec->version, 0.5 + rng.unit(), now);
          break;
        }
        case 1:
          repo.report(id, site, BatchTag::PROCESSING, "", now);
          break;
        case 2:
          repo.report(id, site,
                      rng.below(2) == 0 ? BatchTag::SUCCEEDED : BatchTag::FAILED,
                      "out", now);
          break;
        default:
          repo.expire_leases(now);
          break;
      }
      // Mutation counter moves monotonically.
      CHECK(repo.mutation_seq() >= last_mutation);
      last_mutation = repo.mutation_seq();
      // At most one claimant per batch, and only on leased tags.
      for (const BatchRecord& r : repo.list(std::nullopt)) {
        bool leased =
            r.tag == BatchTag::CLAIMED || r.tag == BatchTag::PROCESSING;
        if (leased) {
          CHECK_FALSE(r.claimant.empty());
        } else {
          CHECK(r.claimant.empty());
        }
        CHECK(r.attempts <= max_retries + 1);
        if (r.tag == BatchTag::SUCCEEDED) CHECK_FALSE(r.output.empty());
      }
    }
    // Conservation: every batch is still in exactly one of the five tags.
    CHECK(repo.list(std::nullopt).size() == static_cast<std::size_t>(n_batches));
  }
}
