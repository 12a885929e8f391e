// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0

#include <vector>

#include "doctest/doctest.h"
#include "hybridmesh/rng.hpp"
#include "hybridmesh/sites.hpp"

using namespace hybridmesh;

namespace {

SiteRegistry two_sites(Engine& e) {
  SiteRegistry sites(e);
  sites.add_site(SiteDescriptor{"a", 2, "", false, {}});
  sites.add_site(SiteDescriptor{"b", 2, "", false, {}});
  sites.set_link("a", "b", LinkParams{8.0, 0.0});
  sites.set_link("b", "a", LinkParams{8.0, 0.0});
  return sites;
}

}  // namespace

TEST_CASE("one gigabyte over an 8 Gbps zero-latency link takes one second") {
  Engine e(1);
  SiteRegistry sites = two_sites(e);
  CHECK(sites.transfer_time(1'000'000'000, "a", "b") == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("zero-size transfers cost exactly the latency") {
  Engine e(1);
  SiteRegistry sites(e);
  sites.add_site(SiteDescriptor{"a"});
  sites.add_site(SiteDescriptor{"b"});
  sites.set_link("a", "b", LinkParams{2.0, 0.125});
  CHECK(sites.transfer_time(0, "a", "b") == 0.125);
}

TEST_CASE("local access is free") {
  Engine e(1);
  SiteRegistry sites = two_sites(e);
  CHECK(sites.transfer_time(1 << 30, "a", "a") == 0.0);
}

TEST_CASE("transfer time is monotone in size") {
  Engine e(1);
  SiteRegistry sites(e);
  sites.add_site(SiteDescriptor{"a"});
  sites.add_site(SiteDescriptor{"b"});
  sites.set_link("a", "b", LinkParams{3.7, 0.04});
  Rng rng(42);
  for (int i = 0; i < 200; ++i) {
    std::int64_t s1 = static_cast<std::int64_t>(rng.below(1'000'000'000));
    std::int64_t s2 = static_cast<std::int64_t>(rng.below(1'000'000'000));
    if (s1 > s2) std::swap(s1, s2);
    CHECK(sites.transfer_time(s1, "a", "b") <= sites.transfer_time(s2, "a", "b"));
  }
}

TEST_CASE("directed links can be asymmetric") {
  Engine e(1);
  SiteRegistry sites(e);
  sites.add_site(SiteDescriptor{"a"});
  sites.add_site(SiteDescriptor{"b"});
  sites.set_link("a", "b", LinkParams{8.0, 0.0});
  sites.set_link("b", "a", LinkParams{4.0, 0.0});
  CHECK(sites.transfer_time(1'000'000'000, "a", "b") == doctest::Approx(1.0));
  CHECK(sites.transfer_time(1'000'000'000, "b", "a") == doctest::Approx(2.0));
}

TEST_CASE("default link covers unlisted pairs") {
  Engine e(1);
  SiteRegistry sites(e);
  sites.add_site(SiteDescriptor{"a"});
  sites.add_site(SiteDescriptor{"b"});
  sites.set_default_link(LinkParams{1.0, 0.5});
  CHECK(sites.transfer_time(125'000'000, "a", "b") == doctest::Approx(1.5));
}

TEST_CASE("unknown sites are rejected") {
  Engine e(1);
  SiteRegistry sites = two_sites(e);
  CHECK_THROWS_AS(sites.transfer_time(1, "a", "zzz"), UnknownSite);
  CHECK_THROWS_AS(sites.site("zzz"), UnknownSite);
}

TEST_CASE("site ids come back sorted") {
  Engine e(1);
  SiteRegistry sites(e);
  sites.add_site(SiteDescriptor{"zeta"});
  sites.add_site(SiteDescriptor{"alpha"});
  sites.add_site(SiteDescriptor{"mid"});
  CHECK(sites.site_ids() == std::vector<SiteId>{"alpha", "mid", "zeta"});
}

TEST_CASE("failure windows toggle availability and notify subscribers") {
  Engine e(1);
  SiteRegistry sites = two_sites(e);
  std::vector<std::string> seen;
  sites.on_site_down([&](const SiteId& s) { seen.push_back("down:" + s); });
  sites.on_site_up([&](const SiteId& s) { seen.push_back("up:" + s); });
  sites.inject_failure("a", 10.0, 20.0);

  e.schedule_internal(5.0, [&] { CHECK(sites.is_up("a")); });
  e.schedule_internal(15.0, [&] { CHECK_FALSE(sites.is_up("a")); });
  e.schedule_internal(25.0, [&] { CHECK(sites.is_up("a")); });
  e.run_until_idle();

  CHECK(seen == std::vector<std::string>{"down:a", "up:a"});
  // The log carries the outage for replay.
  REQUIRE(e.log().records().size() == 2);
  CHECK(e.log().records()[0]["kind"] == "site_down");
  CHECK(e.log().records()[1]["kind"] == "site_up");
}

TEST_CASE("permanent failures never come back up") {
  Engine e(1);
  SiteRegistry sites = two_sites(e);
  sites.inject_failure("b", 3.0,
                       std::numeric_limits<double>::infinity());
  e.run_until_idle();
  CHECK_FALSE(sites.is_up("b"));
  CHECK(e.log().records().size() == 1);
}

TEST_CASE("invalid failure windows are rejected") {
  Engine e(1);
  SiteRegistry sites = two_sites(e);
  CHECK_THROWS_AS(sites.inject_failure("a", 5.0, 5.0), ConfigError);
}

TEST_CASE("preemption fires its subscribers at the injected time") {
  Engine e(1);
  SiteRegistry sites = two_sites(e);
  std::vector<double> at;
  sites.on_preempt([&](const SiteId& s) {
    CHECK(s == "a");
    at.push_back(e.now());
  });
  sites.inject_preemption("a", 7.5);
  e.run_until_idle();
  CHECK(at == std::vector<double>{7.5});
  CHECK(sites.is_up("a"));  // preemption kills tasks, not the site
}
