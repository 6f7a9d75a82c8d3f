#pragma once

// Verification harness: the r(n)/n monotonicity property of insured copy
// rates, post-hoc constraint audits of simulator traces, exhaustive optimal
// schedules for tiny deterministic instances, and the empirical
// competitive-ratio check built on them.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "geoinsure/dist.hpp"
#include "geoinsure/simengine.hpp"
#include "json.hpp"

namespace geoinsure {

// ---------------------------------------------------------------------------
// r(n)/n monotonicity

struct PerCopyRateReport {
  std::vector<double> r;      // r(n) = E[max of the first n], n = 1..maxN
  std::vector<double> perCopy;  // r(n)/n
  bool pass = true;
  std::optional<int> firstViolation;  // n where r(n)/n rose above r(n-1)/(n-1)
};

/// Throws std::invalid_argument unless the expectations are non-increasing
/// along `dists` and maxN <= dists.size().
PerCopyRateReport checkPerCopyRate(std::span<const EmpiricalDistribution> dists, int maxN,
                                     double tolerance = 1e-9, std::size_t cap = kDefaultBinCap);

// ---------------------------------------------------------------------------
// Trace audit

enum class Constraint {
  EveryTaskCopied,   // each task gets at least one copy and completes
  StartAfterArrival,
  Precedence,        // successors start no earlier than predecessors finish
  SlotCapacity,
  IngressCapacity,
  EgressCapacity,
  JobCompletion,     // a job finishes with its last task
};
std::string_view toString(Constraint c);
/// Stable numeric id for each constraint, used in reports.
int constraintId(Constraint c);

struct Violation {
  Constraint constraint = Constraint::SlotCapacity;
  std::int64_t slot = 0;
  std::optional<ClusterId> cluster;
  std::optional<TaskRef> task;
  double magnitude = 0;  // amount over the limit (time or capacity units)
};

/// Replays the trace in record order. Throws std::invalid_argument on a
/// malformed trace (unknown job, task, copy or cluster; copy ended twice).
std::vector<Violation> auditConstraints(const SimTrace& trace, const Scenario& scenario);

nlohmann::json toJson(const Violation& v);

// ---------------------------------------------------------------------------
// Tiny deterministic instances

struct TinyCluster {
  double rate = 1;  // MB per slot, deterministic
  int slots = 1;
};

struct TinyJob {
  int arrival = 0;
  std::vector<int> datasizes;  // one per task, at most two
  bool chain = false;          // second task depends on the first
};

struct TinyInstance {
  std::vector<TinyCluster> clusters;  // at most three
  std::vector<TinyJob> jobs;          // at most three

  void validate() const;
  /// Point-mass rates, no failures, unconstrained gates and links.
  Scenario toScenario() const;
};

nlohmann::json toJson(const TinyInstance& instance);
TinyInstance tinyInstanceFromJson(const nlohmann::json& doc);

/// Random instance within the limits above, from `seed` alone.
TinyInstance randomTinyInstance(std::uint64_t seed);

struct WitnessCopy {
  TaskRef task;
  ClusterId cluster = 0;
  int start = 0;
  double finish = 0;  // when it completes or is killed by a sibling
};

struct OptimalSchedule {
  double totalFlowtime = 0;
  std::vector<double> flowtime;  // by job index
  std::vector<WitnessCopy> copies;
  int maxCopies = 0;  // the most copies any task received
  std::uint64_t statesExplored = 0;
};

struct BruteForceLimits {
  int copiesPerTask = 2;
  std::uint64_t maxStates = 2'000'000;
};

/// Exhaustive search over copy placements at integer start times up to the
/// horizon sum(ceil(D / slowest rate)) + latest arrival. Among optimal
/// schedules the one with the fewest copies is returned. Throws
/// std::length_error when more than `limits.maxStates` states are visited.
OptimalSchedule bruteForceOptimal(const TinyInstance& instance, BruteForceLimits limits = {});

// ---------------------------------------------------------------------------
// Competitive ratio

struct CompetitiveBound {
  double epsilon = 0;
  double alpha = 1;  // worst assigned rate over optimal rate
  int copies = 1;    // C: most copies of a task in the optimal schedule
  double value = 0;

  /// Nullopt when alpha(1+epsilon) <= 1, where the bound is undefined.
  static std::optional<CompetitiveBound> make(double epsilon, double alpha, int copies);
};

struct CompetitiveEntry {
  std::size_t instance = 0;
  double epsilon = 0;
  double optimal = 0;
  double online = 0;
  double ratio = 0;
  std::optional<CompetitiveBound> bound;
  bool pass = true;
  std::string note;
};

struct CompetitiveReport {
  std::vector<CompetitiveEntry> entries;
  std::size_t checked = 0;
  std::size_t skipped = 0;
  bool pass = true;
};

/// Runs the insurer (Eff-Reli at each epsilon) with speed factor 1+epsilon
/// and compares its total flowtime with the exhaustive optimum.
CompetitiveReport competitiveCheck(std::span<const TinyInstance> instances, std::span<const double> epsilons,
                                   BruteForceLimits limits = {});

nlohmann::json toJson(const CompetitiveReport& report);

// ---------------------------------------------------------------------------
// Suite

struct VerifyConfig {
  std::size_t perCopySequences = 100;
  int perCopyMaxN = 6;
  std::size_t tinyInstances = 50;
  std::vector<double> epsilons = {0.2, 0.5, 0.8};
  std::vector<std::uint64_t> auditSeeds = {1, 2, 3};
  std::size_t auditJobs = 40;  // desk workload trimmed to this many jobs
  std::uint64_t seed = 1;
};

struct VerifyReport {
  bool perCopyPass = true;
  std::size_t perCopyChecked = 0;
  std::size_t auditRuns = 0;
  std::vector<std::pair<std::string, Violation>> violations;  // run label, violation
  CompetitiveReport competitive;

  bool pass() const { return perCopyPass && violations.empty() && competitive.pass; }
  nlohmann::json toJson() const;
  std::string toText() const;
};

/// Random expectation-sorted sequence of `count` distributions with up to
/// `maxSupport` atoms each.
std::vector<EmpiricalDistribution> randomSortedSequence(std::uint64_t seed, std::size_t count, int maxSupport = 5);

VerifyReport runVerifySuite(const VerifyConfig& config);

}  // namespace geoinsure
