// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
//
// Event-log verification. Replays an NDJSON event log and re-checks the
// system's invariants purely from the recorded facts: task lifecycle
// legality, submit/terminal conservation, slot capacity, lease mutual
// exclusion, exactly-once success, transfer-ledger totals, offload
// eligibility, and partition-hint pinning. Structural damage (bad JSON,
// missing header/footer, truncation) raises CorruptLog; semantic breaks
// are collected as violations.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hybridmesh/jsonio.hpp"

namespace hybridmesh {

struct ReplayVerdict {
  bool ok = false;
  std::vector<std::string> violations;
  std::int64_t records = 0;
  std::int64_t tasks = 0;
  std::int64_t batches = 0;
};

// Verifies a parsed record sequence. Throws CorruptLog on structural damage.
ReplayVerdict replay_verify(const std::vector<Json>& records);

// Parses NDJSON text (one JSON object per line) and verifies it.
ReplayVerdict replay_verify_text(const std::string& ndjson);

// Reads and verifies a log file.
ReplayVerdict replay_verify_file(const std::string& path);

}  // namespace hybridmesh
