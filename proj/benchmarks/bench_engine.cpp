// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <cstdint>

#include "hybridmesh/engine.hpp"
#include "hybridmesh/sites.hpp"

namespace {

using hybridmesh::Engine;
using hybridmesh::LinkParams;
using hybridmesh::SiteDescriptor;
using hybridmesh::SiteRegistry;

// Raw event dispatch: schedule a batch of silent timers and drain them.
void BM_EngineDispatch(benchmark::State& state) {
  const std::int64_t batch = state.range(0);
  for (auto _ : state) {
    Engine eng(1);
    double base = eng.now();
    for (std::int64_t i = 0; i < batch; ++i) {
      eng.schedule_internal(base + 0.001 * static_cast<double>(i + 1),
                            [] {});
    }
    eng.run_until_idle();
    benchmark::DoNotOptimize(eng.processed_count());
  }
  state.SetItemsProcessed(state.iterations() * batch);
}
BENCHMARK(BM_EngineDispatch)->Arg(1'000)->Arg(10'000)->Arg(100'000);

// Timer churn: every fired event schedules a successor, single hot chain.
void BM_EngineChain(benchmark::State& state) {
  const std::int64_t depth = state.range(0);
  for (auto _ : state) {
    Engine eng(1);
    std::int64_t left = depth;
    std::function<void()> step = [&] {
      if (--left > 0) eng.schedule_internal(eng.now() + 0.001, step);
    };
    eng.schedule_internal(0.001, step);
    eng.run_until_idle();
    benchmark::DoNotOptimize(eng.now());
  }
  state.SetItemsProcessed(state.iterations() * depth);
}
BENCHMARK(BM_EngineChain)->Arg(1'000)->Arg(10'000);

// Link arithmetic on a registry with a dense directed link table.
void BM_TransferTime(benchmark::State& state) {
  Engine eng(1);
  SiteRegistry reg(eng);
  const char* ids[] = {"a", "b", "c", "d", "e", "f", "g", "h"};
  for (const char* id : ids) {
    SiteDescriptor d;
    d.id = id;
    reg.add_site(std::move(d));
  }
  for (const char* from : ids) {
    for (const char* to : ids) {
      if (from != to) reg.set_link(from, to, LinkParams{4.0, 0.002});
    }
  }
  std::int64_t size = 1;
  std::size_t i = 0;
  for (auto _ : state) {
    const char* from = ids[i % 8];
    const char* to = ids[(i + 3) % 8];
    benchmark::DoNotOptimize(reg.transfer_time(size, from, to));
    size = (size * 31 + 7) % 1'000'000'000;
    ++i;
  }
  state.SetItemsProcessed(state.iterations());
}
BENCHMARK(BM_TransferTime);

}  // namespace
