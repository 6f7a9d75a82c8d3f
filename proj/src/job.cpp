#include "geoinsure/job.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace geoinsure {

std::uint32_t Job::stageCount() const {
  std::uint32_t n = 0;
  for (const auto& t : tasks) n = std::max(n, t.stage + 1);
  return n;
}

double Job::totalDatasize() const {
  double sum = 0;
  for (const auto& t : tasks) sum += t.datasize;
  return sum;
}

void validateJob(const Job& job) {
  if (job.tasks.empty()) throw std::invalid_argument("job " + std::to_string(job.id) + " has no tasks");
  if (!(job.arrival >= 0)) throw std::invalid_argument("job arrival must be non-negative");
  for (std::size_t i = 0; i < job.tasks.size(); ++i) {
    const auto& t = job.tasks[i];
    if (!(t.datasize > 0)) throw std::invalid_argument("task datasize must be positive");
    for (auto p : t.predecessors) {
      if (p >= job.tasks.size()) throw std::invalid_argument("dangling predecessor");
      if (job.tasks[p].stage >= t.stage) throw std::invalid_argument("predecessor must sit in an earlier stage");
    }
    for (const auto& in : t.inputs)
      if (!(in.size >= 0)) throw std::invalid_argument("input size must be non-negative");
  }
}

}  // namespace geoinsure
