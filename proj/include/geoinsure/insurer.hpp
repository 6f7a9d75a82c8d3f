#pragma once

// Per-slot multi-round insurance planning: job prioritisation by smallest
// unprocessed current-stage data, an efficiency-first round that gives each
// waiting task its essential copy, a reliability-aware round that adds one
// extra copy to the least-protected tasks, and resource-saving rounds that
// only add a further copy when it saves both time and slot-time.

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "geoinsure/perfmodel.hpp"
#include "geoinsure/state.hpp"

namespace geoinsure {

enum class Principle { Efficiency, Reliability };
enum class Allocation { EfficientFirst, JobGreedy };

struct InsurancePolicy {
  double epsilon = 0.6;
  Allocation allocation = Allocation::EfficientFirst;
  Principle firstRound = Principle::Efficiency;
  Principle secondRound = Principle::Reliability;

  /// "Eff-Reli", "Reli-Eff", "Eff-Eff", "Reli-Reli", "EFA", "JGA".
  static InsurancePolicy named(std::string_view name, double epsilon);
  std::string label() const;
};

struct JobState {
  JobId id = 0;
  double arrival = 0;
  double unprocessed = 0;  // MB in the current stage
  int running = 0;         // live copies (slots held)
  int promised = 0;        // promissory slots this slot
  std::size_t rank = 0;
};

/// Sorts by unprocessed data (then arrival, then id) and grants
/// ceil(totalSlots / (eps * N)) slots to the first ceil(eps * N) jobs.
std::vector<JobState> prioritize(std::vector<JobState> jobs, double epsilon, int totalSlots);

enum class Admission { Ok, NoSlot, Ingress, Egress, RateFloor };
std::string_view toString(Admission a);

Admission admissible(const PerformanceModel& model, const TaskProfile& task, ClusterId cluster,
                     double epsilon, const Capacity& capacity);

/// One planning pass over a snapshot. The rounds can be driven individually
/// (tests do) or all at once through `run`.
class InsuranceSession {
 public:
  InsuranceSession(const SystemState& state, const PerformanceModel& model, InsurancePolicy policy);

  const std::vector<JobState>& jobs() const { return jobs_; }
  const Capacity& capacity() const { return capacity_; }
  const InsurancePlan& plan() const { return plan_; }

  /// Each returns the number of copies it assigned. `only` restricts the
  /// round to one job (used by job-greedy allocation).
  int efficiencyRound(const JobId* only = nullptr);
  int reliabilityRound(const JobId* only = nullptr);
  int savingPass(const JobId* only = nullptr);
  int savingRounds(const JobId* only = nullptr);

  InsurancePlan run();

 private:
  struct Working {
    TaskRef ref;
    Placement placement;  // clusters of copies (live + planned this slot)
    int plannedNow = 0;
    int roundGained = -1;  // pass index in which the task last gained a copy
  };

  int firstCopyRound(Principle principle, const JobId* only);
  int secondCopyRound(Principle principle, const JobId* only);
  bool budgetLeft(const JobState& j) const { return j.promised - j.running > 0; }
  void assign(JobState& job, Working& w, ClusterId k, int pass);
  Working& working(TaskRef ref);

  const SystemState& state_;
  const PerformanceModel& model_;
  InsurancePolicy policy_;
  std::vector<JobState> jobs_;
  Capacity capacity_;
  InsurancePlan plan_;
  std::vector<Working> working_;
  std::map<TaskRef, std::size_t> workingIndex_;
  int pass_ = 0;  // 0 = first round, 1 = second, 2.. = saving passes
};

InsurancePlan insure(const SystemState& state, const PerformanceModel& model, const InsurancePolicy& policy);

class InsuranceScheduler final : public Scheduler {
 public:
  explicit InsuranceScheduler(InsurancePolicy policy) : policy_(policy) {}
  std::string name() const override { return policy_.label(); }
  InsurancePlan plan(const SystemState& state, const PerformanceModel& model) override {
    return insure(state, model, policy_);
  }
  const InsurancePolicy& policy() const { return policy_; }

 private:
  InsurancePolicy policy_;
};

}  // namespace geoinsure
