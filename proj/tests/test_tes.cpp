// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0

#include <string>
#include <vector>

#include "doctest/doctest.h"
#include "hybridmesh/tes.hpp"

using namespace hybridmesh;

namespace {

struct World {
  Engine engine;
  SiteRegistry sites;
  ObjectStore store;

  explicit World(std::uint64_t seed = 1)
      : engine(seed), sites(engine), store(engine, sites) {
    sites.add_site(SiteDescriptor{"a", 4});
    sites.add_site(SiteDescriptor{"b", 4});
    sites.add_site(SiteDescriptor{"c", 4});
    sites.set_default_link(LinkParams{8.0, 0.0});
  }
};

TaskSpec spec_with_inputs(const std::string& id,
                          std::vector<std::pair<SiteId, std::int64_t>> homes,
                          double duration = 1.0) {
  TaskSpec s;
  s.id = id;
  s.command.duration_s = duration;
  int i = 0;
  for (auto& [site, bytes] : homes) {
    s.inputs.push_back(
        DataRef{"sha256:" + id + std::to_string(i++), bytes, site});
  }
  return s;
}

}  // namespace

TEST_CASE("a node walks a task through the lifecycle and logs each step") {
  World w;
  LocalExecutor ex(w.engine, w.sites, w.store, "prim", "a", 2);
  TesNode node(w.engine, w.sites, ex, "a", "n1");

  TaskSpec s;
  s.command.duration_s = 3.0;
  std::string id = node.create_task(s);
  CHECK(id == "n1-t-000001");

  w.engine.run_until_idle();
  TesTaskDoc doc = node.get_task(id, true);
  CHECK(doc.state == TaskState::COMPLETE);
  CHECK_FALSE(doc.stale);
  std::vector<std::string> events;
  for (auto& [ev, at] : doc.logs) events.push_back(ev);
  CHECK(events == std::vector<std::string>{"QUEUED", "INITIALIZING", "RUNNING",
                                           "COMPLETE"});
  CHECK(doc.logs.back().second == doctest::Approx(3.0));

  // Minimal view drops everything but id and state.
  Json minimal = node.get_task(id, false).to_json(false);
  CHECK(minimal.size() == 2);
  CHECK(minimal.at("id") == id);
  CHECK(minimal.at("state") == "COMPLETE");

  Json info = node.service_info();
  CHECK(info.at("kind") == "node");
  CHECK(info.at("site") == "a");

  CHECK_THROWS_AS(node.get_task("n1-t-999999", true), UnknownTask);
}

TEST_CASE("task docs round-trip through json in both views") {
  TesTaskDoc doc;
  doc.id = "t1";
  doc.state = TaskState::RUNNING;
  doc.spec.command.duration_s = 2.0;
  doc.logs = {{"QUEUED", 0.0}, {"RUNNING", 1.5}};
  doc.creation_time = 0.25;
  doc.stale = true;

  TesTaskDoc full = TesTaskDoc::from_json(doc.to_json(true));
  CHECK(full.id == doc.id);
  CHECK(full.state == doc.state);
  CHECK(full.logs == doc.logs);
  CHECK(full.creation_time == doc.creation_time);
  CHECK(full.stale == doc.stale);
  CHECK(full.spec.command.duration_s == 2.0);

  TesTaskDoc min = TesTaskDoc::from_json(doc.to_json(false));
  CHECK(min.id == doc.id);
  CHECK(min.state == doc.state);
  CHECK(min.logs.empty());
  CHECK_FALSE(min.stale);
}

TEST_CASE("node cancel reports whether the task was still live") {
  World w;
  LocalExecutor ex(w.engine, w.sites, w.store, "prim", "a", 1);
  TesNode node(w.engine, w.sites, ex, "a", "n1");
  TaskSpec s;
  s.command.duration_s = 100.0;
  std::string id = node.create_task(s);
  w.engine.schedule_internal(1.0, [&] {
    CHECK(node.cancel_task(id) == CancelOutcome::CANCELED);
    CHECK(node.cancel_task(id) == CancelOutcome::ALREADY_TERMINAL);
  });
  w.engine.run_until_idle();
  CHECK(node.get_task(id, false).state == TaskState::CANCELED);
}

TEST_CASE("a downed node refuses every call") {
  World w;
  w.sites.inject_failure("a", 1.0, 5.0);
  LocalExecutor ex(w.engine, w.sites, w.store, "prim", "a", 1);
  TesNode node(w.engine, w.sites, ex, "a", "n1");
  TaskSpec s;
  s.command.duration_s = 0.5;
  std::string id = node.create_task(s);
  w.engine.schedule_internal(2.0, [&] {
    CHECK_THROWS_AS(node.get_task(id, false), NodeUnreachable);
    CHECK_THROWS_AS(node.create_task(TaskSpec{}), NodeUnreachable);
    CHECK_THROWS_AS(node.list_tasks(false), NodeUnreachable);
    CHECK_THROWS_AS(node.cancel_task(id), NodeUnreachable);
  });
  w.engine.schedule_internal(6.0, [&] {
    CHECK(node.get_task(id, false).state == TaskState::COMPLETE);
  });
  w.engine.run_until_idle();
}

TEST_CASE("gateway routes to the node owning the most input bytes") {
  World w;
  LocalExecutor exa(w.engine, w.sites, w.store, "ex-a", "a", 4);
  LocalExecutor exb(w.engine, w.sites, w.store, "ex-b", "b", 4);
  TesNode na(w.engine, w.sites, exa, "a", "na");
  TesNode nb(w.engine, w.sites, exb, "b", "nb");
  TesGateway gw("gw", [&] { return w.engine.now(); }, 10.0,
                RouteCostModel::bytes, &w.engine, &w.sites);
  gw.register_node("na", "a", na);
  gw.register_node("nb", "b", nb);

  // 700 of 1000 input bytes live on b: nb is the cheaper node.
  RoutingDecision d =
      gw.route(spec_with_inputs("t", {{"a", 300}, {"b", 700}}));
  CHECK(d.chosen_node == "nb");
  CHECK(d.cost == 300.0);
  REQUIRE(d.alternatives.size() == 2);
  CHECK(d.alternatives[0].first == "nb");
  CHECK(d.alternatives[1].first == "na");
  CHECK(d.alternatives[1].second == 700.0);

  // Even split: lexicographic (site, node) order decides.
  RoutingDecision tie =
      gw.route(spec_with_inputs("t2", {{"a", 500}, {"b", 500}}));
  CHECK(tie.chosen_node == "na");

  // No inputs at all: every node costs zero, same tie-break.
  CHECK(gw.route(TaskSpec{}).chosen_node == "na");
}

TEST_CASE("time cost model weighs link speed, not just bytes") {
  World w;
  // a pulls from c over a fast link; b pulls over a slow one.
  w.sites.set_link("c", "a", LinkParams{80.0, 0.0});
  w.sites.set_link("c", "b", LinkParams{1.0, 0.0});
  LocalExecutor exa(w.engine, w.sites, w.store, "ex-a", "a", 4);
  LocalExecutor exb(w.engine, w.sites, w.store, "ex-b", "b", 4);
  TesNode na(w.engine, w.sites, exa, "a", "na");
  TesNode nb(w.engine, w.sites, exb, "b", "nb");
  TesGateway gw("gw", [&] { return w.engine.now(); }, 10.0,
                RouteCostModel::time, &w.engine, &w.sites);
  gw.register_node("na", "a", na);
  gw.register_node("nb", "b", nb);

  RoutingDecision d =
      gw.route(spec_with_inputs("t", {{"c", 1'000'000'000}}));
  CHECK(d.chosen_node == "na");
  CHECK(d.cost == doctest::Approx(0.1));
}

TEST_CASE("gateway fails over when the chosen node is unreachable") {
  World w;
  w.sites.inject_failure("b", 0.0, 100.0);  // b is down from the start
  LocalExecutor exa(w.engine, w.sites, w.store, "ex-a", "a", 4);
  LocalExecutor exb(w.engine, w.sites, w.store, "ex-b", "b", 4);
  TesNode na(w.engine, w.sites, exa, "a", "na");
  TesNode nb(w.engine, w.sites, exb, "b", "nb");
  TesGateway gw("gw", [&] { return w.engine.now(); }, 10.0,
                RouteCostModel::bytes, &w.engine, &w.sites);
  gw.register_node("na", "a", na);
  gw.register_node("nb", "b", nb);

  std::string id;
  w.engine.schedule_internal(0.5, [&] {
    // nb looks healthy (heartbeats have not aged out) but is down; the
    // create fails over to na and the gateway marks nb unreachable.
    id = gw.create_task(spec_with_inputs("t", {{"b", 1000}}));
    CHECK_FALSE(gw.healthy("nb"));
  });
  w.engine.run_until_idle();
  CHECK(gw.get_task(id, false).state == TaskState::COMPLETE);
  // Subsequent routing skips the unreachable node entirely.
  CHECK(gw.route(spec_with_inputs("t2", {{"b", 1000}})).chosen_node == "na");
}

TEST_CASE("no healthy node leaves nothing to route to") {
  World w;
  TesGateway gw("gw", [&] { return w.engine.now(); }, 10.0,
                RouteCostModel::bytes, &w.engine, &w.sites);
  CHECK_THROWS_AS(gw.route(TaskSpec{}), NoHealthyNode);
  LocalExecutor exa(w.engine, w.sites, w.store, "ex-a", "a", 4);
  TesNode na(w.engine, w.sites, exa, "a", "na");
  gw.register_node("na", "a", na);
  w.engine.schedule_internal(20.0, [&] {
    // The single node's heartbeat has aged out.
    CHECK_FALSE(gw.healthy("na"));
    CHECK_THROWS_AS(gw.create_task(TaskSpec{}), NoHealthyNode);
    gw.heartbeat("na");
    CHECK(gw.healthy("na"));
  });
  w.engine.run_until_idle();
}

TEST_CASE("status queries fall back to the cache when the owner is down") {
  World w;
  w.sites.inject_failure("a", 2.0, 100.0);
  LocalExecutor exa(w.engine, w.sites, w.store, "ex-a", "a", 4);
  TesNode na(w.engine, w.sites, exa, "a", "na");
  TesGateway gw("gw", [&] { return w.engine.now(); }, 1000.0,
                RouteCostModel::bytes, &w.engine, &w.sites);
  gw.register_node("na", "a", na);

  std::string id = gw.create_task(spec_with_inputs("t", {{"a", 10}}, 1.0));
  w.engine.schedule_internal(1.5, [&] {
    // Refresh the cache while the node is still up.
    TesTaskDoc live = gw.get_task(id, true);
    CHECK(live.state == TaskState::COMPLETE);
    CHECK_FALSE(live.stale);
  });
  w.engine.schedule_internal(3.0, [&] {
    TesTaskDoc cached = gw.get_task(id, true);
    CHECK(cached.state == TaskState::COMPLETE);
    CHECK(cached.stale);
  });
  w.engine.run_until_idle();
  CHECK_THROWS_AS(gw.get_task("gw-t-nope", false), UnknownTask);
}

TEST_CASE("gateway cancel forwards to the owning node") {
  World w;
  LocalExecutor exa(w.engine, w.sites, w.store, "ex-a", "a", 1);
  TesNode na(w.engine, w.sites, exa, "a", "na");
  TesGateway gw("gw", [&] { return w.engine.now(); }, 10.0,
                RouteCostModel::bytes, &w.engine, &w.sites);
  gw.register_node("na", "a", na);
  std::string id = gw.create_task(spec_with_inputs("t", {{"a", 10}}, 100.0));
  w.engine.schedule_internal(1.0, [&] {
    CHECK(gw.cancel_task(id) == CancelOutcome::CANCELED);
  });
  w.engine.run_until_idle();
  CHECK(gw.get_task(id, false).state == TaskState::CANCELED);
}

TEST_CASE("gateways can front other gateways") {
  World w;
  LocalExecutor exa(w.engine, w.sites, w.store, "ex-a", "a", 4);
  LocalExecutor exb(w.engine, w.sites, w.store, "ex-b", "b", 4);
  TesNode na(w.engine, w.sites, exa, "a", "na");
  TesNode nb(w.engine, w.sites, exb, "b", "nb");
  auto now = [&] { return w.engine.now(); };
  TesGateway inner("inner", now, 10.0, RouteCostModel::bytes, &w.engine,
                   &w.sites);
  inner.register_node("na", "a", na);
  TesGateway outer("outer", now, 10.0, RouteCostModel::bytes, &w.engine,
                   &w.sites);
  // The outer tier sees the inner gateway as one node pinned to site a,
  // plus a direct node on site b.
  outer.register_node("inner", "a", inner);
  outer.register_node("nb", "b", nb);

  std::string id = outer.create_task(spec_with_inputs("t", {{"a", 1000}}));
  w.engine.run_until_idle();
  TesTaskDoc doc = outer.get_task(id, true);
  CHECK(doc.state == TaskState::COMPLETE);
  // The doc crossed two proxies; both left a mark.
  int proxy_marks = 0;
  for (auto& [ev, at] : doc.logs) {
    if (ev == "gateway_proxy") ++proxy_marks;
  }
  CHECK(proxy_marks == 2);

  Json info = outer.service_info();
  CHECK(info.at("kind") == "gateway");
  CHECK(info.at("nodes").size() == 2);
}

TEST_CASE("duplicate node registrations are rejected") {
  World w;
  LocalExecutor exa(w.engine, w.sites, w.store, "ex-a", "a", 4);
  TesNode na(w.engine, w.sites, exa, "a", "na");
  TesGateway gw("gw", [&] { return w.engine.now(); }, 10.0,
                RouteCostModel::bytes, &w.engine, &w.sites);
  gw.register_node("na", "a", na);
  CHECK_THROWS_AS(gw.register_node("na", "a", na), ConfigError);
  CHECK_THROWS_AS(gw.heartbeat("ghost"), UnknownNode);
  CHECK_THROWS_AS(gw.healthy("ghost"), UnknownNode);
}
