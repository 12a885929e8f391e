// Copyright (c) the hybridmesh authors.
// SPDX-License-Identifier: Apache-2.0
#include "hybridmesh/task.hpp"

#include <cmath>

namespace hybridmesh {

Json ResourceRequest::to_json() const {
  return Json{{"cpu_cores", cpu_cores}, {"ram_gb", ram_gb}, {"disk_gb", disk_gb}};
}

ResourceRequest ResourceRequest::from_json(const Json& j) {
  FieldReader r(j, "ResourceRequest");
  ResourceRequest out;
  out.cpu_cores = r.get_int_or("cpu_cores", 1);
  out.ram_gb = r.get_double_or("ram_gb", 0.0);
  out.disk_gb = r.get_double_or("disk_gb", 0.0);
  r.finish();
  if (out.cpu_cores < 1) {
    throw MalformedSpec("ResourceRequest: cpu_cores must be >= 1");
  }
  if (!(out.ram_gb >= 0.0) || !(out.disk_gb >= 0.0) ||
      !std::isfinite(out.ram_gb) || !std::isfinite(out.disk_gb)) {
    throw MalformedSpec("ResourceRequest: ram_gb/disk_gb must be finite and >= 0");
  }
  return out;
}

Json DataRef::to_json() const {
  return Json{{"object_id", object_id},
              {"size_bytes", size_bytes},
              {"home_site", home_site}};
}

DataRef DataRef::from_json(const Json& j) {
  FieldReader r(j, "DataRef");
  DataRef out;
  out.object_id = r.get_string("object_id");
  out.size_bytes = r.get_int("size_bytes");
  out.home_site = r.get_string("home_site");
  r.finish();
  if (out.size_bytes < 0) {
    throw MalformedSpec("DataRef: size_bytes must be >= 0");
  }
  return out;
}

Json TaskCommand::to_json() const {
  return Json{{"duration_s", duration_s},
              {"output_size_bytes", output_size_bytes},
              {"poison", poison}};
}

TaskCommand TaskCommand::from_json(const Json& j) {
  FieldReader r(j, "TaskCommand");
  TaskCommand out;
  out.duration_s = r.get_double("duration_s");
  out.output_size_bytes = r.get_int_or("output_size_bytes", 0);
  out.poison = r.get_bool_or("poison", false);
  r.finish();
  if (out.output_size_bytes < 0) {
    throw MalformedSpec("TaskCommand: output_size_bytes must be >= 0");
  }
  return out;
}

Json TaskSpec::to_json() const {
  Json in = Json::array();
  for (const auto& d : inputs) in.push_back(d.to_json());
  return Json{{"id", id},
              {"command", command.to_json()},
              {"inputs", in},
              {"outputs", outputs},
              {"resources", resources.to_json()},
              {"node_count", node_count},
              {"executor_count", executor_count}};
}

TaskSpec TaskSpec::from_json(const Json& j) {
  FieldReader r(j, "TaskSpec");
  TaskSpec out;
  out.id = r.get_string("id");
  if (const Json* c = r.get_raw("command")) {
    out.command = TaskCommand::from_json(*c);
  }
  for (const Json& d : r.get_array_or_empty("inputs")) {
    out.inputs.push_back(DataRef::from_json(d));
  }
  for (const Json& o : r.get_array_or_empty("outputs")) {
    if (!o.is_string()) throw MalformedSpec("TaskSpec: outputs must be strings");
    out.outputs.push_back(o.get<std::string>());
  }
  if (const Json* res = r.get_raw("resources")) {
    out.resources = ResourceRequest::from_json(*res);
  }
  out.node_count = r.get_int_or("node_count", 1);
  out.executor_count = r.get_int_or("executor_count", 1);
  r.finish();
  return out;
}

const char* to_string(TaskState s) {
  switch (s) {
    case TaskState::QUEUED: return "QUEUED";
    case TaskState::INITIALIZING: return "INITIALIZING";
    case TaskState::RUNNING: return "RUNNING";
    case TaskState::COMPLETE: return "COMPLETE";
    case TaskState::EXECUTOR_ERROR: return "EXECUTOR_ERROR";
    case TaskState::SYSTEM_ERROR: return "SYSTEM_ERROR";
    case TaskState::CANCELED: return "CANCELED";
  }
  return "?";
}

const char* to_string(LifecycleEvent e) {
  switch (e) {
    case LifecycleEvent::start_init: return "start_init";
    case LifecycleEvent::start_run: return "start_run";
    case LifecycleEvent::finish_ok: return "finish_ok";
    case LifecycleEvent::finish_executor_err: return "finish_executor_err";
    case LifecycleEvent::finish_system_err: return "finish_system_err";
    case LifecycleEvent::cancel: return "cancel";
  }
  return "?";
}

TaskState task_state_from_string(const std::string& s) {
  if (s == "QUEUED") return TaskState::QUEUED;
  if (s == "INITIALIZING") return TaskState::INITIALIZING;
  if (s == "RUNNING") return TaskState::RUNNING;
  if (s == "COMPLETE") return TaskState::COMPLETE;
  if (s == "EXECUTOR_ERROR") return TaskState::EXECUTOR_ERROR;
  if (s == "SYSTEM_ERROR") return TaskState::SYSTEM_ERROR;
  if (s == "CANCELED") return TaskState::CANCELED;
  throw MalformedSpec("unknown task state '" + s + "'");
}

LifecycleEvent lifecycle_event_from_string(const std::string& s) {
  if (s == "start_init") return LifecycleEvent::start_init;
  if (s == "start_run") return LifecycleEvent::start_run;
  if (s == "finish_ok") return LifecycleEvent::finish_ok;
  if (s == "finish_executor_err") return LifecycleEvent::finish_executor_err;
  if (s == "finish_system_err") return LifecycleEvent::finish_system_err;
  if (s == "cancel") return LifecycleEvent::cancel;
  throw MalformedSpec("unknown lifecycle event '" + s + "'");
}

bool is_terminal(TaskState s) {
  switch (s) {
    case TaskState::COMPLETE:
    case TaskState::EXECUTOR_ERROR:
    case TaskState::SYSTEM_ERROR:
    case TaskState::CANCELED:
      return true;
    default:
      return false;
  }
}

TaskState advance_state(TaskState current, LifecycleEvent event) {
  // cancel is legal from any non-terminal state.
  if (event == LifecycleEvent::cancel && !is_terminal(current)) {
    return TaskState::CANCELED;
  }
  switch (current) {
    case TaskState::QUEUED:
      if (event == LifecycleEvent::start_init) return TaskState::INITIALIZING;
      break;
    case TaskState::INITIALIZING:
      if (event == LifecycleEvent::start_run) return TaskState::RUNNING;
      // A site can die while a task is still staging inputs; that surfaces
      // as a system error straight from INITIALIZING.
      if (event == LifecycleEvent::finish_system_err)
        return TaskState::SYSTEM_ERROR;
      break;
    case TaskState::RUNNING:
      if (event == LifecycleEvent::finish_ok) return TaskState::COMPLETE;
      if (event == LifecycleEvent::finish_executor_err)
        return TaskState::EXECUTOR_ERROR;
      if (event == LifecycleEvent::finish_system_err)
        return TaskState::SYSTEM_ERROR;
      break;
    default:
      break;
  }
  throw IllegalTransition(std::string("illegal transition: ") +
                          to_string(current) + " + " + to_string(event));
}

TaskValidator::TaskValidator(std::set<SiteId> known_sites)
    : known_sites_(std::move(known_sites)) {}

ValidatedTask TaskValidator::validate(const TaskSpec& spec) {
  if (spec.id.empty()) throw MalformedSpec("task id must be nonempty");
  if (spec.node_count < 1) throw MalformedSpec("node_count must be >= 1");
  if (spec.executor_count < 1) {
    throw MalformedSpec("executor_count must be >= 1");
  }
  if (!(spec.command.duration_s >= 0.0) ||
      !std::isfinite(spec.command.duration_s)) {
    throw MalformedSpec("task duration must be finite and >= 0");
  }
  if (spec.resources.cpu_cores < 1) {
    throw MalformedSpec("cpu_cores must be >= 1");
  }
  for (const DataRef& d : spec.inputs) {
    if (!known_sites_.count(d.home_site)) {
      throw UnknownSite("task '" + spec.id + "' references unknown site '" +
                        d.home_site + "'");
    }
  }
  if (!seen_ids_.insert(spec.id).second) {
    throw DuplicateTaskId("duplicate task id '" + spec.id + "'");
  }
  return ValidatedTask{spec};
}

}  // namespace hybridmesh
