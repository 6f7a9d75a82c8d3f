#include "geoinsure/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <stdexcept>

namespace geoinsure {

namespace {

using MinHeap = std::priority_queue<double, std::vector<double>, std::greater<>>;

// List scheduler over per-cluster virtual slot-free times (relative to now).
class GreedyPlanner {
 public:
  GreedyPlanner(const SystemState& state, const PerformanceModel& model)
      : state_(state), model_(model), capacity_(Capacity::of(state)), queues_(state.clusters.size()) {
    plan_.slot = state.now;
    for (ClusterId k = 0; k < state.clusters.size(); ++k) {
      if (!state.clusters[k].up(state.now)) continue;
      for (int i = 0; i < capacity_.freeSlots[k]; ++i) queues_[k].push(0.0);
    }
    for (const auto& [id, copy] : state.copies) {
      if (!state.clusters[copy.cluster].up(state.now)) continue;
      const double expected = copy.start + estimate(copy.task, copy.cluster);
      queues_[copy.cluster].push(std::max(0.0, expected - state.now));
    }
  }

  /// Single-copy time estimate, memoised for the duration of one plan.
  double estimate(TaskRef ref, ClusterId k) const {
    auto [it, fresh] = estimates_.try_emplace(ref);
    if (fresh) it->second.assign(queues_.size(), -1.0);
    double& slot = it->second[k];
    if (slot < 0) {
      const ClusterId one[] = {k};
      slot = model_.estExecTime(state_.task(ref).profile, one);
    }
    return slot;
  }

  const GateDemand& demand(TaskRef ref, ClusterId k) const {
    auto [it, fresh] = demands_.try_emplace(ref);
    if (fresh) it->second.resize(queues_.size());
    auto& slot = it->second[k];
    if (!slot) slot = model_.gateDemand(state_.task(ref).profile, k);
    return *slot;
  }

  bool admits(TaskRef ref, ClusterId k) const { return capacity_.ledger.check(demand(ref, k)) == GateCheck::Ok; }

  double bestCase(TaskRef ref) const {
    double best = std::numeric_limits<double>::infinity();
    for (ClusterId k = 0; k < queues_.size(); ++k)
      if (!queues_[k].empty()) best = std::min(best, estimate(ref, k));
    return best;
  }

  /// Queues the task on its earliest-finish cluster; returns that cluster
  /// if the copy launches now.
  std::optional<ClusterId> place(TaskRef ref) {
    std::optional<ClusterId> best;
    double bestFinish = std::numeric_limits<double>::infinity();
    bool bestFree = false;
    for (ClusterId k = 0; k < queues_.size(); ++k) {
      if (queues_[k].empty() || !admits(ref, k)) continue;
      const double finish = queues_[k].top() + estimate(ref, k);
      const bool free = capacity_.freeSlots[k] > 0;
      if (finish < bestFinish || (finish == bestFinish && free && !bestFree)) {
        best = k;
        bestFinish = finish;
        bestFree = free;
      }
    }
    if (!best) return std::nullopt;
    queues_[*best].pop();
    queues_[*best].push(bestFinish);
    if (!bestFree) return std::nullopt;
    launch(ref, *best, false);
    return best;
  }

  void launch(TaskRef ref, ClusterId k, bool speculative) {
    capacity_.take(k, demand(ref, k));
    plan_.entries.push_back(PlanEntry{ref, k, 1, speculative});
  }

  /// Best-rate cluster with a free slot and gate room, skipping `exclude`.
  std::optional<ClusterId> fastestFree(TaskRef ref, const std::vector<ClusterId>& exclude) const {
    std::optional<ClusterId> best;
    double bestTime = std::numeric_limits<double>::infinity();
    for (ClusterId k = 0; k < queues_.size(); ++k) {
      if (capacity_.freeSlots[k] <= 0 || std::find(exclude.begin(), exclude.end(), k) != exclude.end()) continue;
      if (!admits(ref, k)) continue;
      const double t = estimate(ref, k);
      if (t < bestTime) {
        bestTime = t;
        best = k;
      }
    }
    return best;
  }

  /// Jobs in arrival order; each job's waiting tasks longest best case first.
  void scheduleWaiting(const std::function<void(TaskRef, ClusterId)>& onLaunch = {}) {
    std::vector<const JobRuntime*> jobs;
    for (const auto& [id, job] : state_.jobs) jobs.push_back(&job);
    std::stable_sort(jobs.begin(), jobs.end(),
                     [](const JobRuntime* a, const JobRuntime* b) { return a->spec.arrival < b->spec.arrival; });
    for (const JobRuntime* job : jobs) {
      if (capacity_.totalFree() == 0) return;
      std::vector<std::pair<double, std::uint32_t>> order;
      for (std::uint32_t i : waitingTasks(*job)) order.emplace_back(bestCase({job->spec.id, i}), i);
      std::stable_sort(order.begin(), order.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
      for (const auto& [time, index] : order) {
        if (capacity_.totalFree() == 0) return;
        const TaskRef ref{job->spec.id, index};
        if (auto k = place(ref); k && onLaunch) onLaunch(ref, *k);
      }
    }
  }

  const SystemState& state() const { return state_; }
  const Capacity& capacity() const { return capacity_; }
  InsurancePlan take() { return std::move(plan_); }

 private:
  const SystemState& state_;
  const PerformanceModel& model_;
  Capacity capacity_;
  std::vector<MinHeap> queues_;
  InsurancePlan plan_;
  mutable std::map<TaskRef, std::vector<double>> estimates_;
  mutable std::map<TaskRef, std::vector<std::optional<GateDemand>>> demands_;
};

}  // namespace

void BaselineParams::validate() const {
  if (!(monitoringDelay >= 0)) throw std::invalid_argument("monitoring_delay must be non-negative");
  if (!(speculationFactor > 0)) throw std::invalid_argument("speculation_factor must be positive");
  if (!(cloneBudget >= 0 && cloneBudget <= 1)) throw std::invalid_argument("clone_budget must lie in [0,1]");
  if (clones < 1) throw std::invalid_argument("clones must be at least 1");
}

nlohmann::json toJson(const BaselineParams& p) {
  return {{"monitoring_delay", p.monitoringDelay},
          {"speculation_factor", p.speculationFactor},
          {"clone_budget", p.cloneBudget},
          {"small_job_tasks", p.smallJobTasks},
          {"clones", p.clones}};
}

BaselineParams baselineParamsFromJson(const nlohmann::json& doc, BaselineParams p) {
  p.monitoringDelay = doc.value("monitoring_delay", p.monitoringDelay);
  p.speculationFactor = doc.value("speculation_factor", p.speculationFactor);
  p.cloneBudget = doc.value("clone_budget", p.cloneBudget);
  p.smallJobTasks = doc.value("small_job_tasks", p.smallJobTasks);
  p.clones = doc.value("clones", p.clones);
  p.validate();
  return p;
}

InsurancePlan stageGreedyPlan(const SystemState& state, const PerformanceModel& model) {
  GreedyPlanner planner(state, model);
  planner.scheduleWaiting();
  return planner.take();
}

InsurancePlan speculativePlan(const SystemState& state, const PerformanceModel& model, const BaselineParams& params) {
  GreedyPlanner planner(state, model);
  planner.scheduleWaiting();

  std::vector<const JobRuntime*> jobs;
  for (const auto& [id, job] : state.jobs) jobs.push_back(&job);
  std::stable_sort(jobs.begin(), jobs.end(),
                   [](const JobRuntime* a, const JobRuntime* b) { return a->spec.arrival < b->spec.arrival; });
  for (const JobRuntime* job : jobs) {
    for (std::uint32_t i = 0; i < job->tasks.size(); ++i) {
      if (planner.capacity().totalFree() == 0) return planner.take();
      const TaskRuntime& task = job->tasks[i];
      if (task.state != TaskState::Running || task.speculated || task.copies.size() != 1) continue;
      const CopyRuntime& copy = state.copies.at(task.copies.front());
      if (state.now - copy.start < params.monitoringDelay) continue;
      const TaskRef ref{job->spec.id, i};
      const auto k = planner.fastestFree(ref, {});
      if (!k) continue;
      const double remaining = copy.finish - state.now;
      if (params.speculationFactor * planner.estimate(ref, *k) < remaining) planner.launch(ref, *k, true);
    }
  }
  return planner.take();
}

InsurancePlan cloningPlan(const SystemState& state, const PerformanceModel& model, const BaselineParams& params) {
  GreedyPlanner planner(state, model);
  int extras = 0;
  for (const auto& [id, task] : state.jobs)
    for (const auto& t : task.tasks)
      if (t.copies.size() > 1) extras += static_cast<int>(t.copies.size()) - 1;
  const double budget = params.cloneBudget * state.totalSlots();

  planner.scheduleWaiting([&](TaskRef ref, ClusterId first) {
    const JobRuntime& job = state.jobs.at(ref.job);
    if (job.tasks.size() > params.smallJobTasks) return;
    std::vector<ClusterId> used{first};
    for (int c = 1; c < params.clones; ++c) {
      if (extras + 1 > budget + 1e-9) return;
      const auto k = planner.fastestFree(ref, used);
      if (!k) return;
      planner.launch(ref, *k, false);
      used.push_back(*k);
      ++extras;
    }
  });
  return planner.take();
}

}  // namespace geoinsure
