// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include <cstdint>
#include <string>

#include "hybridmesh/digest.hpp"
#include "hybridmesh/metadata_repo.hpp"
#include "hybridmesh/task.hpp"

namespace {

using hybridmesh::BatchTag;
using hybridmesh::DataRef;
using hybridmesh::MetadataRepo;
using hybridmesh::object_id_for;

// Full batch lifecycle: register, claim, progress report, terminal report.
void BM_RepoLifecycle(benchmark::State& state) {
  const std::int64_t batches = state.range(0);
  DataRef in{object_id_for("bench-input"), 1'000'000, "siteA"};
  const std::string out = object_id_for("bench-output");
  for (auto _ : state) {
    MetadataRepo repo(3);
    for (std::int64_t i = 0; i < batches; ++i) {
      std::string id = "b" + std::to_string(i);
      repo.register_batch(id, in);
      repo.claim(id, "siteA", 1, 600.0, 0.0);
      repo.report(id, "siteA", BatchTag::PROCESSING, "", 1.0);
      repo.report(id, "siteA", BatchTag::SUCCEEDED, out, 2.0);
    }
    benchmark::DoNotOptimize(repo.list(BatchTag::SUCCEEDED).size());
  }
  state.SetItemsProcessed(state.iterations() * batches);
}
BENCHMARK(BM_RepoLifecycle)->Arg(100)->Arg(1'000);

// Contended claim: every iteration races N sites for one batch, exactly one
// wins, the rest are turned away on the version check.
void BM_RepoClaimContention(benchmark::State& state) {
  const std::int64_t sites = state.range(0);
  DataRef in{object_id_for("bench-input"), 1'000'000, "siteA"};
  std::int64_t granted = 0;
  for (auto _ : state) {
    MetadataRepo repo(3);
    repo.register_batch("b0", in);
    for (std::int64_t s = 0; s < sites; ++s) {
      auto r = repo.claim("b0", "site" + std::to_string(s), 1, 600.0, 0.0);
      if (r.ok()) granted += 1;
    }
  }
  benchmark::DoNotOptimize(granted);
  state.SetItemsProcessed(state.iterations() * sites);
}
BENCHMARK(BM_RepoClaimContention)->Arg(4)->Arg(32);

}  // namespace
