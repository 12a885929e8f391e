// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0

#include <string>
#include <vector>

#include "doctest/doctest.h"
#include "hybridmesh/engine.hpp"

using namespace hybridmesh;

TEST_CASE("events fire in (time, scheduling seq) order") {
  Engine e(1);
  std::vector<int> order;
  e.schedule_internal(2.0, [&] { order.push_back(3); });
  e.schedule_internal(1.0, [&] { order.push_back(1); });
  e.schedule_internal(1.0, [&] { order.push_back(2); });  // same time, later seq
  e.schedule_internal(3.0, [&] { order.push_back(4); });
  e.run_until_idle();
  CHECK(order == std::vector<int>{1, 2, 3, 4});
  CHECK(e.now() == 3.0);
}

TEST_CASE("handlers may schedule new events at the current time") {
  Engine e(1);
  std::vector<int> order;
  e.schedule_internal(1.0, [&] {
    order.push_back(1);
    e.schedule_internal(1.0, [&] { order.push_back(2); });
  });
  e.run_until_idle();
  CHECK(order == std::vector<int>{1, 2});
}

TEST_CASE("scheduling in the past is rejected") {
  Engine e(1);
  e.schedule_internal(5.0, [&] {
    CHECK_THROWS_AS(e.schedule_internal(4.0, [] {}), PastEvent);
  });
  e.run_until_idle();
}

TEST_CASE("canceled events do not fire and report not-pending") {
  Engine e(1);
  bool fired = false;
  EventId id = e.schedule_internal(1.0, [&] { fired = true; });
  CHECK(e.pending(id));
  CHECK(e.cancel(id));
  CHECK_FALSE(e.pending(id));
  CHECK_FALSE(e.cancel(id));  // second cancel is a no-op
  e.run_until_idle();
  CHECK_FALSE(fired);
}

TEST_CASE("runaway event loops trip the termination guard") {
  Engine e(1, 100);
  std::function<void()> loop = [&] { e.schedule_internal(e.now() + 1.0, loop); };
  e.schedule_internal(0.0, loop);
  CHECK_THROWS_AS(e.run_until_idle(), NonTermination);
}

TEST_CASE("logged events carry payload plus at, kind, seq") {
  Engine e(7);
  e.schedule(2.5, ScheduledKind::task_done, Json{{"task_id", "t1"}}, [] {});
  e.note("submit", Json{{"task_id", "t1"}});
  e.run_until_idle();
  const auto& recs = e.log().records();
  REQUIRE(recs.size() == 2);
  CHECK(recs[0]["kind"] == "submit");
  CHECK(recs[0]["at"] == 0.0);
  CHECK(recs[0]["seq"] == 0);
  CHECK(recs[1]["kind"] == "task_done");
  CHECK(recs[1]["at"] == 2.5);
  CHECK(recs[1]["seq"] == 1);
  CHECK(recs[1]["task_id"] == "t1");
}

TEST_CASE("internal events leave no log records") {
  Engine e(7);
  e.schedule_internal(1.0, [] {});
  e.run_until_idle();
  CHECK(e.log().records().empty());
}

TEST_CASE("ndjson serialization is one canonical object per line") {
  Engine e(7);
  e.note("b_kind", Json{{"z", 1}, {"a", 2}});
  std::string nd = e.log().to_ndjson();
  CHECK(nd == "{\"a\":2,\"at\":0.0,\"kind\":\"b_kind\",\"seq\":0,\"z\":1}\n");
}

TEST_CASE("identical seeds give identical rng streams") {
  Engine a(1234), b(1234), c(1235);
  bool all_equal = true;
  bool any_diff = false;
  for (int i = 0; i < 100; ++i) {
    std::uint64_t va = a.rng().next_u64();
    if (va != b.rng().next_u64()) all_equal = false;
    if (va != c.rng().next_u64()) any_diff = true;
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("rng below() stays in range and unit() in [0,1)") {
  Rng r(99);
  for (int i = 0; i < 1000; ++i) {
    CHECK(r.below(7) < 7);
    double u = r.unit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}
