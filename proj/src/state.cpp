#include "geoinsure/state.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace geoinsure {

std::uint32_t JobRuntime::currentStage() const {
  std::uint32_t stage = std::numeric_limits<std::uint32_t>::max();
  for (std::size_t i = 0; i < tasks.size(); ++i)
    if (tasks[i].state != TaskState::Done) stage = std::min(stage, spec.tasks[i].stage);
  return stage;
}

double JobRuntime::unprocessedCurrentStage() const {
  const auto stage = currentStage();
  double sum = 0;
  for (std::size_t i = 0; i < tasks.size(); ++i)
    if (tasks[i].state != TaskState::Done && spec.tasks[i].stage == stage) sum += spec.tasks[i].datasize;
  return sum;
}

SystemState SystemState::forModel(const PerformanceModel& model) {
  SystemState state;
  std::vector<double> ingress, egress;
  for (const auto& c : model.clusters()) {
    state.clusters.push_back(ClusterRuntime{c.slots, 0, -1});
    ingress.push_back(c.ingressCap);
    egress.push_back(c.egressCap);
  }
  state.ledger = GateLedger(std::move(ingress), std::move(egress));
  return state;
}

JobRuntime& SystemState::admit(const Job& job) {
  validateJob(job);
  if (jobs.contains(job.id)) throw std::invalid_argument("job admitted twice");
  JobRuntime rt;
  rt.spec = job;
  rt.tasks.resize(job.tasks.size());
  for (std::uint32_t i = 0; i < job.tasks.size(); ++i) {
    const auto& spec = job.tasks[i];
    auto& t = rt.tasks[i];
    t.profile.op = spec.op;
    t.profile.datasize = spec.datasize;
    t.profile.inputs = spec.inputs;
    t.pendingPredecessors = static_cast<std::uint32_t>(spec.predecessors.size());
    t.state = spec.predecessors.empty() ? TaskState::Waiting : TaskState::Blocked;
    for (auto p : spec.predecessors) rt.tasks[p].successors.push_back(i);
  }
  return jobs.emplace(job.id, std::move(rt)).first->second;
}

int SystemState::totalSlots() const {
  return std::accumulate(clusters.begin(), clusters.end(), 0,
                         [](int acc, const ClusterRuntime& c) { return acc + c.slots; });
}

int InsurancePlan::copyCount() const {
  int n = 0;
  for (const auto& e : entries) n += e.copies;
  return n;
}

nlohmann::json toJson(const InsurancePlan& plan) {
  nlohmann::json doc;
  doc["slot"] = plan.slot;
  auto& entries = doc["entries"] = nlohmann::json::array();
  for (const auto& e : plan.entries) {
    nlohmann::json entry = {{"job", e.task.job}, {"task", e.task.index}, {"cluster", e.cluster}, {"copies", e.copies}};
    if (e.speculative) entry["speculative"] = true;
    entries.push_back(std::move(entry));
  }
  return doc;
}

InsurancePlan planFromJson(const nlohmann::json& doc) {
  InsurancePlan plan;
  plan.slot = doc.at("slot").get<double>();
  for (const auto& entry : doc.at("entries")) {
    PlanEntry e;
    e.task = {entry.at("job").get<JobId>(), entry.at("task").get<std::uint32_t>()};
    e.cluster = entry.at("cluster").get<ClusterId>();
    e.copies = entry.at("copies").get<int>();
    e.speculative = entry.value("speculative", false);
    if (e.copies < 1) throw std::invalid_argument("plan entry must launch at least one copy");
    plan.entries.push_back(e);
  }
  return plan;
}

Capacity Capacity::of(const SystemState& state) {
  Capacity cap;
  cap.freeSlots.reserve(state.clusters.size());
  for (ClusterId k = 0; k < state.clusters.size(); ++k) cap.freeSlots.push_back(state.freeSlots(k));
  cap.ledger = state.ledger;
  return cap;
}

int Capacity::totalFree() const { return std::accumulate(freeSlots.begin(), freeSlots.end(), 0); }

void Capacity::take(ClusterId k, const GateDemand& demand) {
  if (freeSlots.at(k) <= 0) throw std::logic_error("no free slot to take");
  --freeSlots[k];
  ledger.reserve(nextTentativeId++, demand);
}

std::vector<std::uint32_t> waitingTasks(const JobRuntime& job) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t i = 0; i < job.tasks.size(); ++i)
    if (job.tasks[i].state == TaskState::Waiting) out.push_back(i);
  std::stable_sort(out.begin(), out.end(), [&](std::uint32_t a, std::uint32_t b) {
    const auto& sa = job.spec.tasks[a];
    const auto& sb = job.spec.tasks[b];
    if (sa.stage != sb.stage) return sa.stage < sb.stage;
    if (sa.datasize != sb.datasize) return sa.datasize > sb.datasize;
    return a < b;
  });
  return out;
}

}  // namespace geoinsure
