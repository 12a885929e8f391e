// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0

#include <map>
#include <set>
#include <vector>

#include "doctest/doctest.h"
#include "hybridmesh/task.hpp"

using namespace hybridmesh;

namespace {

const std::vector<TaskState> kAllStates = {
    TaskState::QUEUED,        TaskState::INITIALIZING,
    TaskState::RUNNING,       TaskState::COMPLETE,
    TaskState::EXECUTOR_ERROR, TaskState::SYSTEM_ERROR,
    TaskState::CANCELED,
};

const std::vector<LifecycleEvent> kAllEvents = {
    LifecycleEvent::start_init,          LifecycleEvent::start_run,
    LifecycleEvent::finish_ok,           LifecycleEvent::finish_executor_err,
    LifecycleEvent::finish_system_err,   LifecycleEvent::cancel,
};

TaskSpec valid_spec() {
  TaskSpec s;
  s.id = "t1";
  s.command.duration_s = 1.0;
  s.inputs.push_back(DataRef{"sha256:aa", 100, "siteA"});
  s.outputs.push_back("o1");
  return s;
}

}  // namespace

TEST_CASE("the full transition table, exhaustively") {
  // (state, event) -> next state; every pair not listed must throw.
  std::map<std::pair<TaskState, LifecycleEvent>, TaskState> legal = {
      {{TaskState::QUEUED, LifecycleEvent::start_init},
       TaskState::INITIALIZING},
      {{TaskState::INITIALIZING, LifecycleEvent::start_run},
       TaskState::RUNNING},
      {{TaskState::INITIALIZING, LifecycleEvent::finish_system_err},
       TaskState::SYSTEM_ERROR},
      {{TaskState::RUNNING, LifecycleEvent::finish_ok}, TaskState::COMPLETE},
      {{TaskState::RUNNING, LifecycleEvent::finish_executor_err},
       TaskState::EXECUTOR_ERROR},
      {{TaskState::RUNNING, LifecycleEvent::finish_system_err},
       TaskState::SYSTEM_ERROR},
      {{TaskState::QUEUED, LifecycleEvent::cancel}, TaskState::CANCELED},
      {{TaskState::INITIALIZING, LifecycleEvent::cancel},
       TaskState::CANCELED},
      {{TaskState::RUNNING, LifecycleEvent::cancel}, TaskState::CANCELED},
  };
  int legal_seen = 0;
  for (TaskState s : kAllStates) {
    for (LifecycleEvent ev : kAllEvents) {
      auto it = legal.find({s, ev});
      if (it != legal.end()) {
        CHECK(advance_state(s, ev) == it->second);
        ++legal_seen;
      } else {
        CHECK_THROWS_AS(advance_state(s, ev), IllegalTransition);
      }
    }
  }
  CHECK(legal_seen == 9);
}

TEST_CASE("terminal states are exactly the four end states") {
  std::set<TaskState> terminal;
  for (TaskState s : kAllStates) {
    if (is_terminal(s)) terminal.insert(s);
  }
  CHECK(terminal == std::set<TaskState>{
                        TaskState::COMPLETE, TaskState::EXECUTOR_ERROR,
                        TaskState::SYSTEM_ERROR, TaskState::CANCELED});
}

TEST_CASE("state and event names round-trip through strings") {
  for (TaskState s : kAllStates) {
    CHECK(task_state_from_string(to_string(s)) == s);
  }
  CHECK_THROWS_AS(task_state_from_string("NOPE"), MalformedSpec);
  for (LifecycleEvent ev : kAllEvents) {
    CHECK(lifecycle_event_from_string(to_string(ev)) == ev);
  }
  CHECK_THROWS_AS(lifecycle_event_from_string("NOPE"), MalformedSpec);
}

TEST_CASE("task spec serialization round-trips") {
  TaskSpec s = valid_spec();
  s.command.output_size_bytes = 4096;
  s.command.poison = true;
  s.resources.cpu_cores = 4;
  s.resources.ram_gb = 8.0;
  s.node_count = 2;
  s.executor_count = 3;
  TaskSpec back = TaskSpec::from_json(s.to_json());
  CHECK(back == s);
}

TEST_CASE("unknown fields in a spec document are rejected") {
  Json j = valid_spec().to_json();
  j["surprise"] = 1;
  CHECK_THROWS_AS(TaskSpec::from_json(j), MalformedSpec);
}

TEST_CASE("validation enforces scalar constraints") {
  TaskValidator v({"siteA"});

  CHECK_NOTHROW(v.validate(valid_spec()));

  TaskSpec no_id = valid_spec();
  no_id.id = "";
  CHECK_THROWS_AS(v.validate(no_id), MalformedSpec);

  TaskSpec bad_nodes = valid_spec();
  bad_nodes.id = "t2";
  bad_nodes.node_count = 0;
  CHECK_THROWS_AS(v.validate(bad_nodes), MalformedSpec);

  TaskSpec bad_dur = valid_spec();
  bad_dur.id = "t3";
  bad_dur.command.duration_s = -1.0;
  CHECK_THROWS_AS(v.validate(bad_dur), MalformedSpec);

  TaskSpec bad_site = valid_spec();
  bad_site.id = "t4";
  bad_site.inputs[0].home_site = "nowhere";
  CHECK_THROWS_AS(v.validate(bad_site), UnknownSite);
}

TEST_CASE("validation rejects duplicate task ids") {
  TaskValidator v({"siteA"});
  v.validate(valid_spec());
  CHECK_THROWS_AS(v.validate(valid_spec()), DuplicateTaskId);
}
