// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0

#include <numeric>
#include <string>
#include <vector>

#include "doctest/doctest.h"
#include "hybridmesh/rng.hpp"
#include "hybridmesh/workflow.hpp"

using namespace hybridmesh;

namespace {

using Shares = std::vector<std::pair<SiteId, std::int64_t>>;

struct World {
  Engine engine;
  SiteRegistry sites;
  ObjectStore store;

  explicit World(std::uint64_t seed = 1)
      : engine(seed), sites(engine), store(engine, sites) {
    sites.add_site(SiteDescriptor{"a", 2});
    sites.add_site(SiteDescriptor{"b", 2});
    sites.set_default_link(LinkParams{8.0, 0.0});
  }
};

WorkflowSpec small_spec() {
  WorkflowSpec s;
  s.batch_count = 4;
  s.batch_size_bytes = 1000;
  s.map_duration_s = 10.0;
  s.gather_duration_s = 5.0;
  return s;
}

}  // namespace

TEST_CASE("proportional split follows largest remainders") {
  CHECK(proportional_split({{"A", 1}, {"B", 1}}, 4) ==
        Shares{{"A", 2}, {"B", 2}});
  CHECK(proportional_split({{"A", 2}, {"B", 1}}, 3) ==
        Shares{{"A", 2}, {"B", 1}});
  // Equal remainders: the lexicographically first key takes the extra.
  CHECK(proportional_split({{"A", 1}, {"B", 1}}, 5) ==
        Shares{{"A", 3}, {"B", 2}});
  CHECK(proportional_split({{"B", 1}, {"A", 1}}, 5) ==
        Shares{{"B", 2}, {"A", 3}});  // input order kept, A still favored
  CHECK(proportional_split({{"A", 3}}, 7) == Shares{{"A", 7}});
  CHECK(proportional_split({{"A", 1}, {"B", 9}}, 0) ==
        Shares{{"A", 0}, {"B", 0}});
  CHECK_THROWS_AS(proportional_split({{"A", 0}}, 3), ConfigError);
  CHECK_THROWS_AS(proportional_split({}, 3), ConfigError);
}

TEST_CASE("proportional split is exact and tight on random inputs") {
  Rng rng(11);
  for (int round = 0; round < 200; ++round) {
    Shares weights;
    std::int64_t wsum = 0;
    int n = 1 + static_cast<int>(rng.below(6));
    for (int i = 0; i < n; ++i) {
      std::int64_t w = 1 + static_cast<std::int64_t>(rng.below(9));
      weights.emplace_back("s" + std::to_string(i), w);
      wsum += w;
    }
    std::int64_t total = static_cast<std::int64_t>(rng.below(300));
    Shares out = proportional_split(weights, total);
    REQUIRE(out.size() == weights.size());
    std::int64_t sum = 0;
    for (std::size_t i = 0; i < out.size(); ++i) {
      CHECK(out[i].first == weights[i].first);
      CHECK(out[i].second >= 0);
      // Within one of the exact proportional share.
      double exact = static_cast<double>(total) *
                     static_cast<double>(weights[i].second) /
                     static_cast<double>(wsum);
      CHECK(static_cast<double>(out[i].second) > exact - 1.0);
      CHECK(static_cast<double>(out[i].second) < exact + 1.0);
      sum += out[i].second;
    }
    CHECK(sum == total);
  }
}

TEST_CASE("derived names are stable") {
  CHECK(WorkflowDriver::batch_id(0) == "b0000");
  CHECK(WorkflowDriver::batch_id(123) == "b0123");
  CHECK(WorkflowDriver::map_output_name("b0002") == "out:b0002");
  CHECK(WorkflowDriver::gather_output_name("ds") == "gather:ds");
}

TEST_CASE("the expected manifest is a pure function of the spec") {
  WorkflowSpec s = small_spec();
  Json m = WorkflowDriver::expected_manifest(s);
  REQUIRE(m.size() == 5);  // four map outputs plus the gather
  std::string prev;
  std::int64_t gather_rows = 0;
  for (const Json& row : m) {
    std::string oid = row.at("object_id");
    CHECK(oid > prev);  // strictly sorted
    prev = oid;
    if (row.at("size_bytes") == 4000) ++gather_rows;
  }
  CHECK(gather_rows == 1);
  CHECK(m == WorkflowDriver::expected_manifest(s));
}

TEST_CASE("scatter homes batches round-robin unless pinned") {
  World w;
  WorkflowSpec spec = small_spec();
  spec.homes["b0002"] = "a";

  RunContext ctx;
  ctx.engine = &w.engine;
  ctx.sites = &w.sites;
  ctx.store = &w.store;
  WorkflowDriver driver(ctx, spec, RunMode::MANUAL);
  std::vector<DataRef> refs = driver.scatter();
  REQUIRE(refs.size() == 4);
  CHECK(refs[0].home_site == "a");
  CHECK(refs[1].home_site == "b");
  CHECK(refs[2].home_site == "a");  // pinned; round-robin would say a anyway
  CHECK(refs[3].home_site == "b");
  for (const DataRef& r : refs) {
    CHECK(r.size_bytes == 1000);
    CHECK(w.store.object(r.object_id).replicas.count(r.home_site) == 1);
  }
  // Identical spec scatters to identical object ids in a fresh world.
  World w2;
  RunContext ctx2;
  ctx2.engine = &w2.engine;
  ctx2.sites = &w2.sites;
  ctx2.store = &w2.store;
  WorkflowDriver driver2(ctx2, spec, RunMode::MANUAL);
  std::vector<DataRef> refs2 = driver2.scatter();
  for (std::size_t i = 0; i < refs.size(); ++i) {
    CHECK(refs2[i].object_id == refs[i].object_id);
  }

  WorkflowSpec pinned = small_spec();
  pinned.scatter_home = "b";
  WorkflowDriver driver3(ctx2, pinned, RunMode::MANUAL);
  for (const DataRef& r : driver3.scatter()) CHECK(r.home_site == "b");
}

TEST_CASE("lease derivation covers the slowest task plus transfers") {
  World w;
  RunContext ctx;
  ctx.engine = &w.engine;
  ctx.sites = &w.sites;
  ctx.store = &w.store;
  WorkflowSpec spec = small_spec();  // gather input: 4000 bytes, negligible
  WorkflowDriver driver(ctx, spec, RunMode::FEDERATED);
  // 3 * (10 + hop + poll(1) + 1) with a sub-microsecond hop.
  CHECK(driver.effective_lease_s() == doctest::Approx(36.0).epsilon(0.01));
  ctx.lease_s = 7.5;
  WorkflowDriver fixed(ctx, spec, RunMode::FEDERATED);
  CHECK(fixed.effective_lease_s() == 7.5);
}

TEST_CASE("manual mode splits work by slots and gathers at the common site") {
  World w;
  LocalExecutor ea(w.engine, w.sites, w.store, "ex-a", "a", 2);
  LocalExecutor eb(w.engine, w.sites, w.store, "ex-b", "b", 2);
  RunContext ctx;
  ctx.engine = &w.engine;
  ctx.sites = &w.sites;
  ctx.store = &w.store;
  ctx.site_backends = {{"a", &ea}, {"b", &eb}};
  ctx.common_site = "a";

  WorkflowDriver driver(ctx, small_spec(), RunMode::MANUAL);
  RunReport rep = driver.run();
  CHECK(rep.success);
  CHECK(rep.failed_batches.empty());
  CHECK(rep.retries == 0);
  // Two batches per site, plus the gather on a.
  CHECK(rep.tasks_per_site.at("a") == 3);
  CHECK(rep.tasks_per_site.at("b") == 2);
  CHECK(rep.final_manifest == WorkflowDriver::expected_manifest(small_spec()));
  // Maps overlap (two slots each), gather runs after: 10 + 5 plus transfer.
  CHECK(rep.makespan_s > 15.0);
  CHECK(rep.makespan_s < 16.0);
  // Consolidation leaves every final object at the common site.
  for (const Json& row : rep.final_manifest) {
    CHECK(w.store.object(row.at("object_id")).replicas.count("a") == 1);
  }
}

TEST_CASE("a transient outage costs a retry but not the run") {
  World w;
  // b dies early in the first map wave and comes back.
  w.sites.inject_failure("b", 2.0, 12.0);
  LocalExecutor ea(w.engine, w.sites, w.store, "ex-a", "a", 2);
  LocalExecutor eb(w.engine, w.sites, w.store, "ex-b", "b", 2);
  RunContext ctx;
  ctx.engine = &w.engine;
  ctx.sites = &w.sites;
  ctx.store = &w.store;
  ctx.site_backends = {{"a", &ea}, {"b", &eb}};
  ctx.common_site = "a";

  WorkflowDriver driver(ctx, small_spec(), RunMode::MANUAL);
  RunReport rep = driver.run();
  CHECK(rep.success);
  CHECK(rep.retries == 2);  // both of b's batches resubmitted once
  CHECK(rep.tasks_per_site.at("b") == 2);
  CHECK(rep.final_manifest == WorkflowDriver::expected_manifest(small_spec()));
}

TEST_CASE("a poisoned batch exhausts its retries and fails the run") {
  World w;
  LocalExecutor ea(w.engine, w.sites, w.store, "ex-a", "a", 2);
  LocalExecutor eb(w.engine, w.sites, w.store, "ex-b", "b", 2);
  RunContext ctx;
  ctx.engine = &w.engine;
  ctx.sites = &w.sites;
  ctx.store = &w.store;
  ctx.site_backends = {{"a", &ea}, {"b", &eb}};

  WorkflowSpec spec = small_spec();
  spec.poisoned = {"b0001"};
  spec.retry_limit = 1;
  WorkflowDriver driver(ctx, spec, RunMode::MANUAL);
  RunReport rep = driver.run();
  CHECK_FALSE(rep.success);
  CHECK(rep.failed_batches == std::vector<std::string>{"b0001"});
  CHECK(rep.retries == 1);
  CHECK(rep.final_manifest == Json::array());  // no manifest on failure
}

TEST_CASE("federated workers claim work through the repo") {
  World w;
  LocalExecutor ea(w.engine, w.sites, w.store, "ex-a", "a", 2);
  LocalExecutor eb(w.engine, w.sites, w.store, "ex-b", "b", 2);
  SimRepo repo(w.engine, 2);
  RunContext ctx;
  ctx.engine = &w.engine;
  ctx.sites = &w.sites;
  ctx.store = &w.store;
  ctx.site_backends = {{"a", &ea}, {"b", &eb}};
  ctx.repo = &repo;
  ctx.common_site = "a";

  WorkflowDriver driver(ctx, small_spec(), RunMode::FEDERATED);
  RunReport rep = driver.run();
  CHECK(rep.success);
  CHECK(rep.final_manifest == WorkflowDriver::expected_manifest(small_spec()));
  // Every map batch plus the gather batch ended SUCCEEDED in the repo.
  CHECK(repo.list(BatchTag::SUCCEEDED).size() == 5);
  std::int64_t executed = 0;
  for (const auto& [_, n] : rep.tasks_per_site) executed += n;
  CHECK(executed == 5);
}

TEST_CASE("multi-node batches stay on the overflow primary") {
  World w;
  LocalExecutor prim(w.engine, w.sites, w.store, "prim", "a", 1);
  LocalExecutor sec(w.engine, w.sites, w.store, "sec", "b", 4);
  OverflowRouter router(w.engine, "router", prim, sec);
  RunContext ctx;
  ctx.engine = &w.engine;
  ctx.sites = &w.sites;
  ctx.store = &w.store;
  ctx.router = &router;
  ctx.common_site = "a";

  WorkflowSpec spec = small_spec();
  spec.scatter_home = "a";
  spec.multi_node_batches = {"b0001", "b0002"};
  WorkflowDriver driver(ctx, spec, RunMode::OVERFLOW);
  RunReport rep = driver.run();
  CHECK(rep.success);
  // The two multi-node batches could only run on the primary site.
  CHECK(rep.tasks_per_site.at("a") >= 3);  // two pinned maps plus gather
  CHECK(rep.final_manifest == WorkflowDriver::expected_manifest(spec));
}

TEST_CASE("all modes agree on the final manifest") {
  WorkflowSpec spec = small_spec();
  RunReport reports[2];
  for (int i = 0; i < 2; ++i) {
    World w;
    LocalExecutor ea(w.engine, w.sites, w.store, "ex-a", "a", 2);
    LocalExecutor eb(w.engine, w.sites, w.store, "ex-b", "b", 2);
    SimRepo repo(w.engine, 2);
    RunContext ctx;
    ctx.engine = &w.engine;
    ctx.sites = &w.sites;
    ctx.store = &w.store;
    ctx.site_backends = {{"a", &ea}, {"b", &eb}};
    ctx.repo = &repo;
    ctx.common_site = "a";
    WorkflowDriver driver(ctx, spec,
                          i == 0 ? RunMode::MANUAL : RunMode::FEDERATED);
    reports[i] = driver.run();
    CHECK(reports[i].success);
  }
  CHECK(compare_runs(reports[0], reports[1]));
}
