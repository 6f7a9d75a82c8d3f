#pragma once

// Comparison schedulers sharing the insurer's planning contract: a no-copy
// stage-greedy list scheduler, detection-based speculation, and proactive
// cloning of small jobs. None applies the insurer's rate floor.

#include <string>

#include "geoinsure/perfmodel.hpp"
#include "geoinsure/state.hpp"
#include "json.hpp"

namespace geoinsure {

struct BaselineParams {
  double monitoringDelay = 2;     // slots before a copy's progress is visible
  double speculationFactor = 2;   // speculate iff factor * new < remaining
  double cloneBudget = 0.05;      // live extra copies, as a fraction of all slots
  std::uint32_t smallJobTasks = 10;
  int clones = 2;                 // copies per task of a small job

  void validate() const;
};

nlohmann::json toJson(const BaselineParams& params);
BaselineParams baselineParamsFromJson(const nlohmann::json& doc, BaselineParams base = {});

/// One copy per waiting task. Jobs in arrival order; inside a job the task
/// with the largest best-case time goes first, to the cluster with the
/// earliest estimated finish given the copies already queued there. A copy
/// launches only if that cluster has a free slot now.
InsurancePlan stageGreedyPlan(const SystemState& state, const PerformanceModel& model);

/// Stage-greedy for new tasks, then one extra copy for a running single-copy
/// task once its observed remaining time exceeds `speculationFactor` times
/// the best fresh-copy estimate.
InsurancePlan speculativePlan(const SystemState& state, const PerformanceModel& model, const BaselineParams& params);

/// Stage-greedy where each task of a job with at most `smallJobTasks` tasks
/// also gets clones on the next best clusters while the budget allows.
InsurancePlan cloningPlan(const SystemState& state, const PerformanceModel& model, const BaselineParams& params);

class StageGreedyScheduler final : public Scheduler {
 public:
  std::string name() const override { return "stage-greedy"; }
  InsurancePlan plan(const SystemState& state, const PerformanceModel& model) override {
    return stageGreedyPlan(state, model);
  }
};

class SpeculativeScheduler final : public Scheduler {
 public:
  explicit SpeculativeScheduler(BaselineParams params = {}) : params_(params) { params_.validate(); }
  std::string name() const override { return "mantri-like"; }
  InsurancePlan plan(const SystemState& state, const PerformanceModel& model) override {
    return speculativePlan(state, model, params_);
  }

 private:
  BaselineParams params_;
};

class CloningScheduler final : public Scheduler {
 public:
  explicit CloningScheduler(BaselineParams params = {}) : params_(params) { params_.validate(); }
  std::string name() const override { return "dolly-like"; }
  InsurancePlan plan(const SystemState& state, const PerformanceModel& model) override {
    return cloningPlan(state, model, params_);
  }

 private:
  BaselineParams params_;
};

}  // namespace geoinsure
