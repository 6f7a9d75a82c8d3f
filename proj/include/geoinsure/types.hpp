#pragma once

#include <compare>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

namespace geoinsure {

using ClusterId = std::uint32_t;
using JobId = std::uint32_t;
using CopyId = std::uint64_t;

/// Identifies one task: the owning job and the task's index inside it.
struct TaskRef {
  JobId job = 0;
  std::uint32_t index = 0;
  auto operator<=>(const TaskRef&) const = default;
};

/// A task input held at `cluster`, `size` MB of it.
struct InputLocation {
  ClusterId cluster = 0;
  double size = 0;
  bool operator==(const InputLocation&) const = default;
};

/// What the performance model needs to know about a task to price a copy.
struct TaskProfile {
  std::string op;
  double datasize = 0;  // MB still to process by a fresh copy
  std::vector<InputLocation> inputs;
};

/// Ordered cluster list hosting the copies of one task; a cluster may repeat.
using Placement = std::vector<ClusterId>;

/// Expected gate bandwidth (MB/s) a copy holds while it runs: ingress at its
/// own cluster, egress at every remote input source.
struct GateDemand {
  ClusterId destination = 0;
  double ingress = 0;
  std::vector<std::pair<ClusterId, double>> egress;
};

}  // namespace geoinsure
