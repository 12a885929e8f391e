// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
#include "hybridmesh/engine.hpp"

namespace hybridmesh {

const char* to_string(ScheduledKind k) {
  switch (k) {
    case ScheduledKind::transfer_done: return "transfer_done";
    case ScheduledKind::task_done: return "task_done";
    case ScheduledKind::site_down: return "site_down";
    case ScheduledKind::site_up: return "site_up";
    case ScheduledKind::lease_expired: return "lease_expired";
    case ScheduledKind::preempt: return "preempt";
    case ScheduledKind::internal: return "internal";
  }
  return "?";
}

void EventLog::append(double at, const std::string& kind, Json fields) {
  fields["at"] = at;
  fields["kind"] = kind;
  fields["seq"] = next_seq_++;
  records_.push_back(std::move(fields));
}

std::string EventLog::to_ndjson() const {
  std::string out;
  for (const Json& r : records_) {
    out += canonical(r);
    out += '\n';
  }
  return out;
}

Engine::Engine(std::uint64_t seed, std::uint64_t max_events)
    : max_events_(max_events), rng_(seed) {}

EventId Engine::schedule(double at, ScheduledKind kind, Json payload,
                         std::function<void()> fn) {
  if (at < now_) {
    throw PastEvent("cannot schedule at t=" + std::to_string(at) +
                    " before now=" + std::to_string(now_));
  }
  EventId id = next_seq_++;
  pending_.emplace(id, Pending{at, kind, std::move(payload), std::move(fn)});
  queue_.push(QueueEntry{at, id, id});
  return id;
}

EventId Engine::schedule_internal(double at, std::function<void()> fn) {
  return schedule(at, ScheduledKind::internal, Json::object(), std::move(fn));
}

bool Engine::cancel(EventId id) { return pending_.erase(id) > 0; }

bool Engine::pending(EventId id) const { return pending_.count(id) > 0; }

void Engine::note(const std::string& kind, Json fields) {
  log_.append(now_, kind, std::move(fields));
}

void Engine::run_until_idle() {
  while (!queue_.empty()) {
    QueueEntry top = queue_.top();
    queue_.pop();
    auto it = pending_.find(top.id);
    if (it == pending_.end()) continue;  // canceled
    if (++processed_ > max_events_) {
      throw NonTermination("event budget exhausted after " +
                           std::to_string(max_events_) + " events");
    }
    now_ = it->second.at;
    Pending ev = std::move(it->second);
    pending_.erase(it);
    if (ev.kind != ScheduledKind::internal) {
      log_.append(now_, to_string(ev.kind), std::move(ev.payload));
    }
    if (ev.fn) ev.fn();
  }
}

}  // namespace hybridmesh
