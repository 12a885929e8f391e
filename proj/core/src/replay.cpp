// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
#include "hybridmesh/replay.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>

#include "hybridmesh/errors.hpp"
#include "hybridmesh/task.hpp"

namespace hybridmesh {

namespace {

struct TaskView {
  TaskState state = TaskState::QUEUED;
  bool submitted = false;
  int terminals = 0;
  std::int64_t node_count = 1;
  std::int64_t executor_count = 1;
  std::string backend;
  std::string partition_hint;
  std::string placement;  // overflow router decision, when routed
};

struct LeaseView {
  bool open = false;
  std::string site;
  double expiry = 0.0;
  std::int64_t last_attempts = 0;
  int succeeded_reports = 0;
  bool registered = false;
};

std::string fmt(double v) {
  std::ostringstream out;
  out << v;
  return out.str();
}

}  // namespace

ReplayVerdict replay_verify(const std::vector<Json>& records) {
  if (records.empty()) throw CorruptLog("empty log");
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Json& r = records[i];
    if (!r.is_object() || !r.contains("at") || !r.contains("kind") ||
        !r.contains("seq") || !r["at"].is_number() ||
        !r["kind"].is_string() || !r["seq"].is_number_integer()) {
      throw CorruptLog("record " + std::to_string(i) +
                       " lacks at/kind/seq structure");
    }
  }
  if (records.front()["kind"] != "run_header") {
    throw CorruptLog("log does not start with run_header");
  }
  if (records.back()["kind"] != "run_footer") {
    throw CorruptLog("log does not end with run_footer (truncated?)");
  }
  const Json& header = records.front();
  const Json& footer = records.back();
  if (footer.value("records", std::int64_t{-1}) !=
      static_cast<std::int64_t>(records.size())) {
    throw CorruptLog("run_footer record count does not match log length");
  }

  ReplayVerdict v;
  v.records = static_cast<std::int64_t>(records.size());
  auto violate = [&](const std::string& msg) { v.violations.push_back(msg); };

  // Capacity table from the header: backend (and backend/partition) slots.
  std::map<std::string, std::int64_t> capacity;
  for (const Json& b : header.value("backends", Json::array())) {
    std::string name = b.value("name", "");
    if (b.contains("slots")) {
      capacity[name] = b["slots"].get<std::int64_t>();
    }
    for (const Json& p : b.value("partitions", Json::array())) {
      capacity[name + "/" + p.value("name", "")] =
          p.value("slots", std::int64_t{1});
    }
  }
  std::int64_t max_retries = header.value("max_retries", std::int64_t{-1});

  std::map<std::string, TaskView> tasks;
  std::map<std::string, LeaseView> leases;
  std::map<std::string, std::int64_t> occupancy;  // backend or backend/part
  std::set<std::string> starved;
  std::int64_t ledger_sum = 0;
  double prev_at = -std::numeric_limits<double>::infinity();
  std::int64_t prev_seq = -1;

  for (std::size_t i = 0; i < records.size(); ++i) {
    const Json& r = records[i];
    double at = r["at"].get<double>();
    std::int64_t seq = r["seq"].get<std::int64_t>();
    const std::string kind = r["kind"].get<std::string>();
    if (at < prev_at) {
      violate("time went backwards at record " + std::to_string(i));
    }
    if (seq <= prev_seq) {
      throw CorruptLog("seq not strictly increasing at record " +
                       std::to_string(i));
    }
    prev_at = at;
    prev_seq = seq;

    if (kind == "submit") {
      std::string id = r.value("task_id", "");
      TaskView& t = tasks[id];
      if (t.submitted) {
        violate("task '" + id + "' submitted twice");
        continue;
      }
      t.submitted = true;
      t.state = TaskState::QUEUED;
      t.backend = r.value("backend", "");
      t.node_count = r.value("node_count", std::int64_t{1});
      t.executor_count = r.value("executor_count", std::int64_t{1});
      t.partition_hint = r.value("partition_hint", "");
    } else if (kind == "task_state") {
      std::string id = r.value("task_id", "");
      auto it = tasks.find(id);
      if (it == tasks.end() || !it->second.submitted) {
        violate("task_state for unsubmitted task '" + id + "'");
        continue;
      }
      TaskView& t = it->second;
      TaskState prev = t.state;
      TaskState next;
      LifecycleEvent ev;
      try {
        ev = lifecycle_event_from_string(r.value("event", ""));
        next = advance_state(prev, ev);
      } catch (const Error& e) {
        violate("task '" + id + "': " + e.what());
        continue;
      }
      TaskState recorded = task_state_from_string(r.value("state", ""));
      if (recorded != next) {
        violate("task '" + id + "' recorded state " +
                std::string(to_string(recorded)) + " but " +
                to_string(prev) + " + " + to_string(ev) + " gives " +
                to_string(next));
        continue;
      }
      t.state = next;

      std::string partition = r.value("partition", "");
      if (!t.partition_hint.empty() && !partition.empty() &&
          partition != t.partition_hint) {
        violate("task '" + id + "' pinned to partition '" + t.partition_hint +
                "' but ran in '" + partition + "'");
      }

      std::string slot_key =
          partition.empty() ? t.backend : t.backend + "/" + partition;
      bool was_holding =
          prev == TaskState::INITIALIZING || prev == TaskState::RUNNING;
      bool now_holding =
          next == TaskState::INITIALIZING || next == TaskState::RUNNING;
      if (!was_holding && now_holding) {
        std::int64_t& occ = occupancy[slot_key];
        occ += 1;
        auto cap = capacity.find(slot_key);
        if (cap != capacity.end() && occ > cap->second) {
          violate("capacity exceeded on '" + slot_key + "' at t=" + fmt(at) +
                  " (" + std::to_string(occ) + " > " +
                  std::to_string(cap->second) + ")");
        }
      } else if (was_holding && !now_holding) {
        occupancy[slot_key] -= 1;
      }
      if (is_terminal(next)) t.terminals += 1;
      if (t.terminals > 1) {
        violate("task '" + id + "' reached two terminal states");
      }
    } else if (kind == "task_done") {
      std::string id = r.value("task_id", "");
      auto it = tasks.find(id);
      if (it == tasks.end() || it->second.state != TaskState::RUNNING) {
        violate("task_done for task '" + id + "' that is not RUNNING");
      }
    } else if (kind == "batch_registered") {
      leases[r.value("batch_id", "")].registered = true;
    } else if (kind == "claim_granted") {
      std::string b = r.value("batch_id", "");
      LeaseView& l = leases[b];
      if (l.open && l.expiry > at) {
        violate("batch '" + b + "': second lease granted at t=" + fmt(at) +
                " while lease by '" + l.site + "' is unexpired (until " +
                fmt(l.expiry) + ")");
      }
      l.open = true;
      l.site = r.value("site", "");
      l.expiry = r.value("lease_expiry", 0.0);
      std::int64_t attempts = r.value("attempts", std::int64_t{0});
      if (attempts != l.last_attempts + 1) {
        violate("batch '" + b + "': attempts jumped from " +
                std::to_string(l.last_attempts) + " to " +
                std::to_string(attempts));
      }
      l.last_attempts = attempts;
      if (max_retries >= 0 && attempts > max_retries + 1) {
        violate("batch '" + b + "': attempts " + std::to_string(attempts) +
                " exceeds max_retries+1");
      }
    } else if (kind == "report_applied") {
      std::string b = r.value("batch_id", "");
      std::string site = r.value("site", "");
      std::string tag = r.value("tag", "");
      LeaseView& l = leases[b];
      if (!l.open) {
        violate("batch '" + b + "': report applied with no open lease");
      } else if (l.site != site) {
        violate("batch '" + b + "': report applied from '" + site +
                "' but lease is held by '" + l.site + "'");
      }
      if (tag == "SUCCEEDED") {
        l.succeeded_reports += 1;
        if (l.succeeded_reports > 1) {
          violate("batch '" + b + "': two applied SUCCEEDED reports");
        }
      }
      if (tag == "SUCCEEDED" || tag == "FAILED") l.open = false;
    } else if (kind == "lease_expired" || kind == "batch_reset" ||
               kind == "batch_failed") {
      std::string b = r.value("batch_id", "");
      LeaseView& l = leases[b];
      if (l.open) {
        if (l.expiry > at) {
          violate("batch '" + b + "': lease released by " + kind +
                  " at t=" + fmt(at) + " before its expiry " + fmt(l.expiry));
        }
        l.open = false;
      }
    } else if (kind == "transfer_done") {
      ledger_sum += r.value("size_bytes", std::int64_t{0});
    } else if (kind == "placement") {
      std::string id = r.value("task_id", "");
      tasks[id].placement = r.value("placement", "");
    } else if (kind == "starved") {
      starved.insert(r.value("task_id", ""));
    }
  }

  // Conservation: every submitted task reaches exactly one terminal state,
  // unless the run ended with it still starving in a queue.
  for (const auto& [id, t] : tasks) {
    if (!t.submitted) {
      if (!t.placement.empty()) {
        violate("placement recorded for task '" + id + "' never submitted");
      }
      continue;
    }
    if (t.terminals == 0 && !starved.count(id)) {
      violate("task '" + id + "' submitted but never reached a terminal "
              "state");
    }
    if (t.placement == "offloaded" &&
        (t.node_count != 1 || t.executor_count != 1)) {
      violate("task '" + id + "' offloaded despite node_count=" +
              std::to_string(t.node_count) + " executor_count=" +
              std::to_string(t.executor_count));
    }
  }

  std::int64_t footer_bytes =
      footer.value("bytes_transferred_total", std::int64_t{0});
  if (footer_bytes != ledger_sum) {
    violate("footer bytes_transferred_total " + std::to_string(footer_bytes) +
            " != sum of transfer_done records " + std::to_string(ledger_sum));
  }

  v.tasks = 0;
  for (const auto& [_, t] : tasks) {
    if (t.submitted) v.tasks += 1;
  }
  v.batches = 0;
  for (const auto& [_, l] : leases) {
    if (l.registered) v.batches += 1;
  }
  v.ok = v.violations.empty();
  return v;
}

ReplayVerdict replay_verify_text(const std::string& ndjson) {
  std::vector<Json> records;
  std::size_t start = 0;
  int line_no = 0;
  while (start < ndjson.size()) {
    std::size_t end = ndjson.find('\n', start);
    if (end == std::string::npos) end = ndjson.size();
    ++line_no;
    std::string line = ndjson.substr(start, end - start);
    start = end + 1;
    if (line.empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (j.is_discarded()) {
      throw CorruptLog("line " + std::to_string(line_no) +
                       " is not valid JSON");
    }
    records.push_back(std::move(j));
  }
  return replay_verify(records);
}

ReplayVerdict replay_verify_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return replay_verify_text(buf.str());
}

}  // namespace hybridmesh
