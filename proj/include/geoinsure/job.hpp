#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "geoinsure/types.hpp"

namespace geoinsure {

/// Static description of one task of a job DAG.
struct TaskSpec {
  std::uint32_t stage = 0;
  std::string op;
  double datasize = 0;                       // MB
  std::vector<InputLocation> inputs;         // raw inputs (source-stage tasks)
  std::vector<std::uint32_t> predecessors;   // task indices inside the job
};

struct Job {
  JobId id = 0;
  double arrival = 0;  // slots
  std::vector<TaskSpec> tasks;

  std::uint32_t stageCount() const;
  double totalDatasize() const;
};

/// Throws std::invalid_argument on a dangling or non-earlier-stage
/// predecessor (which also rules out cycles) or a non-positive datasize.
void validateJob(const Job& job);

}  // namespace geoinsure
