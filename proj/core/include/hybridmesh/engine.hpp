// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
//
// Single-threaded discrete-event engine. Events are processed in strict
// (time, scheduling-seq) order, which makes every run a total order and
// therefore reproducible for a fixed scenario and seed.
//
// The engine also owns the run's event log: a newline-delimited JSON record
// stream that acts as the provenance record. Scheduled events of externally
// meaningful kinds are logged when they fire; purely internal timers (polls,
// heartbeats) stay silent. Modules append informational notes for
// everything else (task transitions, claims, placements, transfers).
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <queue>
#include <string>
#include <vector>

#include "hybridmesh/errors.hpp"
#include "hybridmesh/jsonio.hpp"
#include "hybridmesh/rng.hpp"

namespace hybridmesh {

inline constexpr std::uint64_t kDefaultMaxEvents = 10'000'000;

// Kinds of scheduled events that appear in the log when they fire.
enum class ScheduledKind {
  transfer_done,
  task_done,
  site_down,
  site_up,
  lease_expired,
  preempt,
  internal,  // silent: polls, heartbeats, bookkeeping timers
};

const char* to_string(ScheduledKind k);

using EventId = std::uint64_t;

// Append-only record stream. Record seq is the emission counter, distinct
// from the engine's scheduling seq.
class EventLog {
 public:
  void append(double at, const std::string& kind, Json fields);

  const std::vector<Json>& records() const { return records_; }
  std::string to_ndjson() const;

 private:
  std::vector<Json> records_;
  std::uint64_t next_seq_ = 0;
};

class Engine {
 public:
  explicit Engine(std::uint64_t seed,
                  std::uint64_t max_events = kDefaultMaxEvents);

  double now() const { return now_; }
  Rng& rng() { return rng_; }
  EventLog& log() { return log_; }
  const EventLog& log() const { return log_; }

  // Schedules a callback at absolute time `at`. Logged kinds get a log
  // record (with `payload` fields) when the event fires. Throws PastEvent
  // when at < now().
  EventId schedule(double at, ScheduledKind kind, Json payload,
                   std::function<void()> fn);
  EventId schedule_internal(double at, std::function<void()> fn);

  // Removes a pending event; returns false when already fired or canceled.
  bool cancel(EventId id);

  bool pending(EventId id) const;

  // Convenience for informational notes stamped with the current time.
  void note(const std::string& kind, Json fields);

  // Drains the queue. Throws NonTermination after max_events processed
  // events (canceled events do not count).
  void run_until_idle();

  std::uint64_t processed_count() const { return processed_; }

 private:
  struct Pending {
    double at;
    ScheduledKind kind;
    Json payload;
    std::function<void()> fn;
  };

  // Min-heap key: (time, scheduling seq).
  struct QueueEntry {
    double at;
    std::uint64_t seq;
    EventId id;
    bool operator>(const QueueEntry& other) const {
      if (at != other.at) return at > other.at;
      return seq > other.seq;
    }
  };

  double now_ = 0.0;
  std::uint64_t next_seq_ = 0;
  std::uint64_t processed_ = 0;
  std::uint64_t max_events_;
  Rng rng_;
  EventLog log_;
  std::map<EventId, Pending> pending_;
  std::priority_queue<QueueEntry, std::vector<QueueEntry>,
                      std::greater<QueueEntry>>
      queue_;
};

}  // namespace hybridmesh
