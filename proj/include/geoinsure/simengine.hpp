#pragma once

// Slot-granular discrete-event execution of insurance plans: copy launch
// with a rate drawn once from the true performance distributions, first
// finisher wins, per-slot Bernoulli cluster failures, DAG precedence, and
// flowtime accounting.

#include <cstdint>
#include <iosfwd>
#include <memory>
#include <optional>
#include <queue>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "geoinsure/job.hpp"
#include "geoinsure/perfmodel.hpp"
#include "geoinsure/state.hpp"

namespace geoinsure {

/// Topology (true performance) plus the jobs to run.
struct Scenario {
  std::vector<ClusterModel> clusters;
  LinkModel links;
  std::vector<Job> jobs;
  ModelConfig model;

  PerformanceModel truth() const { return PerformanceModel(clusters, links, model); }
};

nlohmann::json toJson(const Scenario& scenario);
Scenario scenarioFromJson(const nlohmann::json& doc);
nlohmann::json toJson(const Job& job);
Job jobFromJson(const nlohmann::json& doc);

enum class EventKind { JobArrival = 0, ClusterFailure = 1, CopyComplete = 2, SlotTick = 3 };

enum class CopyEnd { Completed, KilledSibling, KilledFailure, KilledHorizon };
std::string_view toString(CopyEnd end);

struct TraceRecord {
  enum class Kind { JobArrival, CopyLaunch, CopyEnd, TaskDone, JobDone, ClusterFailure, PlanDropped };
  Kind kind = Kind::JobArrival;
  double time = 0;
  JobId job = 0;
  std::uint32_t task = 0;
  CopyId copy = 0;
  ClusterId cluster = 0;
  double rate = 0;      // launch: sampled MB/slot
  double value = 0;     // launch: expected finish; job done: flowtime
  CopyEnd end = CopyEnd::Completed;
  GateDemand reservation;  // launch only
  std::string note;        // plan drops: reason
};

struct SlotSnapshot {
  double time = 0;
  std::vector<int> busy;
  std::vector<double> ingress, egress;
};

struct JobOutcome {
  JobId id = 0;
  double arrival = 0;
  double completion = 0;
  double flowtime() const { return completion - arrival; }
};

struct SimTrace {
  std::vector<TraceRecord> records;
  std::vector<JobOutcome> jobs;  // in completion order
  std::vector<SlotSnapshot> slots;
  std::string scheduler;
  std::uint64_t seed = 0;

  double totalFlowtime() const;
  double meanFlowtime() const;
  void writeJsonLines(std::ostream& out) const;
};

struct EngineConfig {
  double speedFactor = 1.0;
  double horizon = 1e6;          // slots
  double failureDowntime = 1.0;  // slots
  bool learn = true;             // feed completions into the planner's model
  bool recordSlots = true;
};

/// Runs one scenario with one scheduler. The planner's model starts as a
/// copy of the truth and learns from completed copies. Copy speeds and
/// failures are drawn from streams keyed by (seed, task, cluster) and
/// (seed, cluster, slot), so every scheduler sees the same randomness.
class Simulator {
 public:
  Simulator(const Scenario& scenario, Scheduler& scheduler, std::uint64_t seed, EngineConfig config = {});

  SimTrace run();

  /// Lower-level hooks, exposed for tests that drive the engine by hand.
  const SystemState& state() const { return state_; }
  SystemState& mutableState() { return state_; }
  PerformanceModel& plannerModel() { return planner_; }
  std::vector<CopyId> applyPlan(const InsurancePlan& plan);
  void onClusterFailure(ClusterId cluster, double time);
  void onCopyComplete(CopyId copy, double time);
  void admit(const Job& job);
  /// Processes queued events with time <= `until`.
  void drainUntil(double until);
  const SimTrace& trace() const { return trace_; }

 private:
  struct Event {
    double time;
    EventKind kind;
    std::uint64_t seq;
    std::uint64_t payload;
    bool operator>(const Event& o) const {
      if (time != o.time) return time > o.time;
      if (kind != o.kind) return kind > o.kind;
      return seq > o.seq;
    }
  };
  struct Sampled {
    double processing;
    std::vector<TransferObservation> transfers;
    double rate;  // MB/s, speed factor applied
  };

  void push(double time, EventKind kind, std::uint64_t payload);
  void handle(const Event& e);
  void slotTick(double now);
  Sampled sampleRate(TaskRef ref, const TaskProfile& task, ClusterId cluster);
  void endCopy(CopyId id, double time, CopyEnd why);
  void completeTask(TaskRef ref, ClusterId where, double time);
  bool finished() const;

  Scenario scenario_;
  Scheduler& scheduler_;
  std::uint64_t seed_;
  EngineConfig config_;
  PerformanceModel truth_;
  PerformanceModel planner_;
  SystemState state_;
  SimTrace trace_;
  std::priority_queue<Event, std::vector<Event>, std::greater<>> events_;
  std::uint64_t seq_ = 0;
  CopyId nextCopy_ = 1;
  std::size_t arrivalsPending_ = 0;
  std::map<std::pair<TaskRef, ClusterId>, std::uint64_t> launchCount_;
  bool tickScheduled_ = false;
  std::unordered_map<CopyId, Sampled> samples_;
};

/// Convenience: build a simulator and run it.
SimTrace simulate(const Scenario& scenario, Scheduler& scheduler, std::uint64_t seed, EngineConfig config = {});

}  // namespace geoinsure
