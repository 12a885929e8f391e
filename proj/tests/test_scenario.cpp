// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0

#include <string>

#include "doctest/doctest.h"
#include "hybridmesh/scenario.hpp"

using namespace hybridmesh;

namespace {

const char* kBasicToml = R"(
seed = 42
mode = "federated"
common_site = "a"

[[sites]]
id = "a"
slots = 2

[[sites]]
id = "b"

[[links]]
from = "a"
to = "b"
bandwidth_gbps = 8.0
latency_s = 0.01

[[failures]]
site = "b"
down_at = 5.0
up_at = 9.0

[workflow]
batch_count = 6
batch_size_bytes = 1000
map_duration_s = 10.0
gather_duration_s = 5.0

[tuning]
lease_s = 30.0
)";

// A structurally valid single-site scenario, for mutation tests.
ScenarioConfig minimal() {
  ScenarioConfig c;
  c.seed = 1;
  c.sites.push_back(SiteDescriptor{"a"});
  return c;
}

std::string error_of(const ScenarioConfig& c) {
  try {
    c.validate();
  } catch (const ConfigError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("toml scenarios load with defaults filled in") {
  ScenarioConfig c = parse_scenario(kBasicToml, "toml");
  CHECK(c.seed == 42);
  CHECK(c.mode == RunMode::FEDERATED);
  CHECK(c.common_site == "a");
  REQUIRE(c.sites.size() == 2);
  CHECK(c.sites[0].slots == 2);
  CHECK(c.sites[1].slots == 1);  // default
  REQUIRE(c.links.size() == 1);
  CHECK(c.links[0].symmetric);  // default
  REQUIRE(c.failures.size() == 1);
  CHECK(c.failures[0].up_at == 9.0);
  CHECK(c.workflow.batch_count == 6);
  CHECK(c.workflow.retry_limit == 2);     // default
  CHECK(c.tuning.lease_s == 30.0);
  CHECK(c.tuning.max_retries == 2);       // default
  CHECK(c.tuning.cost_model == "bytes");  // default
  CHECK(c.backends.empty());              // derived at run time
}

TEST_CASE("the json echo reloads to the identical config") {
  ScenarioConfig c = parse_scenario(kBasicToml, "toml");
  Json echo = c.to_json();
  ScenarioConfig back = ScenarioConfig::from_json(echo);
  CHECK(back.to_json() == echo);
  CHECK(canonical(back.to_json()) == canonical(echo));
  // And the same document as JSON text parses equivalently.
  ScenarioConfig again = parse_scenario(echo.dump(), "json");
  CHECK(again.to_json() == echo);
}

TEST_CASE("seed is the one required field") {
  CHECK_THROWS_AS(parse_scenario("[[sites]]\nid = \"a\"\n", "toml"),
                  ConfigError);
  ScenarioConfig c = parse_scenario("seed = 7\n[[sites]]\nid = \"a\"\n", "toml");
  CHECK(c.seed == 7);
  CHECK(c.mode == RunMode::MANUAL);
}

TEST_CASE("unknown fields are rejected loudly") {
  CHECK_THROWS_AS(
      parse_scenario("seed = 1\ntypo = true\n[[sites]]\nid = \"a\"\n", "toml"),
      MalformedSpec);
  CHECK_THROWS_AS(
      parse_scenario(
          "seed = 1\n[[sites]]\nid = \"a\"\nbogus = 1\n", "toml"),
      MalformedSpec);
}

TEST_CASE("invalid json text is a parse error, not a config error") {
  CHECK_THROWS_AS(parse_scenario("{not json", "json"), ParseError);
  CHECK_THROWS_AS(parse_scenario("seed = 1", "yaml"), ConfigError);
}

TEST_CASE("cross-reference validation names the offender") {
  ScenarioConfig c = minimal();
  SUBCASE("unknown common site") {
    c.common_site = "ghost";
    CHECK(error_of(c).find("common_site") != std::string::npos);
    CHECK(error_of(c).find("ghost") != std::string::npos);
  }
  SUBCASE("duplicate site") {
    c.sites.push_back(SiteDescriptor{"a"});
    CHECK(error_of(c).find("duplicate site") != std::string::npos);
  }
  SUBCASE("bad slots") {
    c.sites[0].slots = 0;
    CHECK(error_of(c).find("slots") != std::string::npos);
  }
  SUBCASE("link to unknown site") {
    c.links.push_back(LinkSpec{"a", "ghost", 1.0, 0.0, true});
    CHECK(error_of(c).find("unknown site 'ghost'") != std::string::npos);
  }
  SUBCASE("nonpositive bandwidth") {
    c.sites.push_back(SiteDescriptor{"b"});
    c.links.push_back(LinkSpec{"a", "b", 0.0, 0.0, true});
    CHECK(error_of(c).find("bandwidth_gbps") != std::string::npos);
  }
  SUBCASE("self link") {
    c.links.push_back(LinkSpec{"a", "a", 1.0, 0.0, true});
    CHECK(error_of(c).find("itself") != std::string::npos);
  }
  SUBCASE("duplicate link, including via symmetry") {
    c.sites.push_back(SiteDescriptor{"b"});
    c.links.push_back(LinkSpec{"a", "b", 1.0, 0.0, true});
    c.links.push_back(LinkSpec{"b", "a", 1.0, 0.0, false});
    CHECK(error_of(c).find("duplicate link") != std::string::npos);
  }
  SUBCASE("incomplete matrix without a default link") {
    c.sites.push_back(SiteDescriptor{"b"});
    CHECK(error_of(c).find("link matrix missing") != std::string::npos);
    c.tuning.default_bandwidth_gbps = 1.0;
    CHECK(error_of(c).empty());
  }
  SUBCASE("failure window must be ordered") {
    c.failures.push_back(FailureSpec{"a", 5.0, 5.0});
    CHECK(error_of(c).find("up_at > down_at") != std::string::npos);
  }
  SUBCASE("overlapping failure windows") {
    c.failures.push_back(FailureSpec{"a", 1.0, 5.0});
    c.failures.push_back(FailureSpec{"a", 4.0, 6.0});
    CHECK(error_of(c).find("overlapping") != std::string::npos);
    // Touching windows are fine.
    c.failures[1].down_at = 5.0;
    CHECK(error_of(c).empty());
  }
  SUBCASE("preemption needs a preemptible site") {
    c.preemptions.push_back(PreemptionSpec{"a", 1.0});
    CHECK(error_of(c).find("non-preemptible") != std::string::npos);
    c.sites[0].preemptible = true;
    CHECK(error_of(c).empty());
  }
  SUBCASE("workflow references must name real batches") {
    c.workflow.batch_count = 2;
    c.workflow.poisoned = {"b9999"};
    CHECK(error_of(c).find("unknown batch 'b9999'") != std::string::npos);
  }
  SUBCASE("pins must name a partition that will exist") {
    c.mode = RunMode::OVERLAY;
    c.workflow.pins["b0000"] = "nope";
    CHECK(error_of(c).find("unknown partition 'nope'") != std::string::npos);
    c.workflow.pins["b0000"] = "a";  // derived partition name = site id
    CHECK(error_of(c).empty());
  }
  SUBCASE("cost model is closed") {
    c.tuning.cost_model = "carbon";
    CHECK(error_of(c).find("cost_model") != std::string::npos);
  }
  SUBCASE("jitter stays below one") {
    c.tuning.duration_jitter = 1.0;
    CHECK(error_of(c).find("duration_jitter") != std::string::npos);
  }
}

TEST_CASE("explicit backends are checked against the mode") {
  ScenarioConfig c = minimal();
  c.sites.push_back(SiteDescriptor{"b"});
  c.tuning.default_bandwidth_gbps = 1.0;

  SUBCASE("two locals on one site clash") {
    BackendDescriptor l1{"local", "x", "a", {}, "", "", 0};
    BackendDescriptor l2{"local", "y", "a", {}, "", "", 0};
    c.backends = {l1, l2};
    CHECK(error_of(c).find("two local backends") != std::string::npos);
  }
  SUBCASE("manual mode refuses clusters") {
    BackendDescriptor bc{"batch_cluster", "", "", {{"p1", "a", 1}}, "", "", 0};
    c.backends = {bc};
    CHECK(error_of(c).find("local backends only") != std::string::npos);
  }
  SUBCASE("overlay wants exactly one cluster") {
    c.mode = RunMode::OVERLAY;
    CHECK(error_of(c).empty());  // empty backends: derived
    BackendDescriptor bc{"batch_cluster", "", "", {{"p1", "a", 1}}, "", "", 0};
    c.backends = {bc, bc};
    CHECK(error_of(c).find("duplicate backend name") != std::string::npos);
    c.backends = {bc};
    c.backends[0].partitions.push_back({"p1", "b", 1});
    CHECK(error_of(c).find("duplicate partition") != std::string::npos);
  }
  SUBCASE("router endpoints must differ and carry local backends") {
    c.mode = RunMode::OVERFLOW;
    BackendDescriptor rt{"overflow_router", "", "", {}, "a", "a", 0};
    c.backends = {rt};
    CHECK(error_of(c).find("must differ") != std::string::npos);
    c.backends[0].secondary_site = "b";
    CHECK(error_of(c).find("local backends") != std::string::npos);
    c.backends.push_back(BackendDescriptor{"local", "", "a", {}, "", "", 0});
    c.backends.push_back(BackendDescriptor{"local", "", "b", {}, "", "", 0});
    CHECK(error_of(c).empty());
  }
  SUBCASE("overflow mode needs two sites even when derived") {
    c.sites.pop_back();
    c.mode = RunMode::OVERFLOW;
    CHECK(error_of(c).find("two sites") != std::string::npos);
  }
}

TEST_CASE("mode names round-trip") {
  for (RunMode m : {RunMode::MANUAL, RunMode::FEDERATED,
                    RunMode::FEDERATED_CONTROLLER, RunMode::OVERLAY,
                    RunMode::OVERFLOW, RunMode::GATEWAY}) {
    CHECK(run_mode_from_string(to_string(m)) == m);
  }
  CHECK_THROWS_AS(run_mode_from_string("warp"), ConfigError);
  CHECK(backend_name(BackendDescriptor{"local", "", "a", {}, "", "", 0}) ==
        "local:a");
  CHECK(backend_name(BackendDescriptor{"local", "mine", "a", {}, "", "", 0}) ==
        "mine");
}
