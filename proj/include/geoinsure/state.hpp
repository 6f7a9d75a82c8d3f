#pragma once

// Live system state seen by schedulers at a slot boundary, and the plan
// they hand back.

#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "geoinsure/job.hpp"
#include "geoinsure/ledger.hpp"
#include "geoinsure/perfmodel.hpp"
#include "geoinsure/types.hpp"
#include "json.hpp"

namespace geoinsure {

enum class TaskState { Blocked, Waiting, Running, Done };

struct CopyRuntime {
  CopyId id = 0;
  TaskRef task;
  ClusterId cluster = 0;
  double start = 0;
  double rate = 0;    // sampled MB/slot, held for the copy's lifetime
  double finish = 0;  // start + datasize / rate
  bool speculative = false;
};

struct TaskRuntime {
  TaskState state = TaskState::Blocked;
  TaskProfile profile;  // inputs resolved to concrete clusters once ready
  std::vector<CopyId> copies;  // live copies
  std::uint32_t pendingPredecessors = 0;
  std::vector<std::uint32_t> successors;
  double start = -1;       // first launch of the current attempt
  double completion = -1;
  ClusterId output = 0;
  bool speculated = false;
};

struct JobRuntime {
  Job spec;
  std::vector<TaskRuntime> tasks;
  int liveCopies = 0;
  std::size_t doneTasks = 0;
  double completion = -1;

  bool done() const { return doneTasks == tasks.size(); }
  /// Lowest stage index that still has unfinished tasks.
  std::uint32_t currentStage() const;
  /// MB left in the current stage (tasks not yet done).
  double unprocessedCurrentStage() const;
};

struct ClusterRuntime {
  int slots = 1;
  int busy = 0;
  double downUntil = -1;

  bool up(double now) const { return now >= downUntil; }
  int free(double now) const { return up(now) ? slots - busy : 0; }
};

struct SystemState {
  double now = 0;
  std::vector<ClusterRuntime> clusters;
  std::map<JobId, JobRuntime> jobs;  // alive (arrived, not finished)
  std::unordered_map<CopyId, CopyRuntime> copies;
  GateLedger ledger;

  /// Empty state matching a model's clusters and gate caps.
  static SystemState forModel(const PerformanceModel& model);

  /// Adds an arrived job: source tasks become waiting, others blocked.
  JobRuntime& admit(const Job& job);
  const TaskRuntime& task(TaskRef ref) const { return jobs.at(ref.job).tasks.at(ref.index); }
  TaskRuntime& task(TaskRef ref) { return jobs.at(ref.job).tasks.at(ref.index); }
  int totalSlots() const;
  int freeSlots(ClusterId k) const { return clusters.at(k).free(now); }
};

struct PlanEntry {
  TaskRef task;
  ClusterId cluster = 0;
  int copies = 1;
  bool speculative = false;
  bool operator==(const PlanEntry&) const = default;
};

struct InsurancePlan {
  double slot = 0;
  std::vector<PlanEntry> entries;

  int copyCount() const;
};

nlohmann::json toJson(const InsurancePlan& plan);
InsurancePlan planFromJson(const nlohmann::json& doc);

/// Working capacity while a plan is being drawn up: free slots per cluster
/// and a private copy of the gate ledger.
struct Capacity {
  std::vector<int> freeSlots;
  GateLedger ledger;
  CopyId nextTentativeId = 1ULL << 62;

  static Capacity of(const SystemState& state);
  int totalFree() const;
  /// Takes one slot and the copy's gate demand.
  void take(ClusterId k, const GateDemand& demand);
};

class Scheduler {
 public:
  virtual ~Scheduler() = default;
  virtual std::string name() const = 0;
  virtual InsurancePlan plan(const SystemState& state, const PerformanceModel& model) = 0;
};

/// Waiting tasks of a job in launch order: stage, then larger datasize first,
/// then index.
std::vector<std::uint32_t> waitingTasks(const JobRuntime& job);

}  // namespace geoinsure
