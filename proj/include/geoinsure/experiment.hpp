#pragma once

// Experiment driver: scheduler construction by name, seed fan-out over a
// worker pool, and plot-ready CSV emission.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "geoinsure/baselines.hpp"
#include "geoinsure/insurer.hpp"
#include "geoinsure/simengine.hpp"
#include "geoinsure/workload.hpp"
#include "json.hpp"

namespace geoinsure {

struct ExperimentConfig {
  TopologySpec topology = deskTopology();
  WorkloadSpec workload = deskWorkload();
  std::string scheduler = "insure";
  double epsilon = 0.6;
  BaselineParams baseline;
  EngineConfig engine;
  std::vector<std::uint64_t> seeds = {1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  std::string reference = "stage-greedy";
  std::vector<std::string> schedulers = {"insure", "stage-greedy", "mantri-like", "dolly-like"};
  std::vector<std::string> ablations = {"Eff-Reli", "Eff-Eff", "Reli-Eff", "Reli-Reli", "EFA", "JGA"};
  std::vector<double> epsilons = {0.2, 0.4, 0.6, 0.8};
  std::vector<double> lambdas = {0.02, 0.05, 0.07, 0.11, 0.15};
  bool writeTraces = false;
  std::size_t workers = 0;  // 0 = hardware concurrency

  void validate() const;
};

nlohmann::json toJson(const ExperimentConfig& config);
/// Missing keys keep their defaults.
ExperimentConfig experimentConfigFromJson(const nlohmann::json& doc);
/// Applies "a.b.c=value" to a config document; the value is parsed as JSON
/// when possible and taken as a string otherwise.
void applyOverride(nlohmann::json& doc, const std::string& assignment);

bool isInsurancePolicy(const std::string& name);
std::unique_ptr<Scheduler> makeScheduler(const std::string& name, double epsilon, const BaselineParams& baseline);

/// Topology and workload for one seed, at the given arrival rate.
Scenario buildScenario(const ExperimentConfig& config, double lambda, std::uint64_t seed);

struct RunKey {
  std::string scheduler;
  double epsilon = 0.6;
  double lambda = 0.07;
  std::uint64_t seed = 1;
};

struct RunResult {
  RunKey key;
  std::string label;
  std::vector<double> flowtime;  // indexed by job id
  double meanFlowtime = 0;
  std::size_t copies = 0;
  std::size_t tasks = 0;
  std::size_t killedByFailure = 0;
  std::shared_ptr<const SimTrace> trace;  // kept only when requested
};

RunResult runOne(const ExperimentConfig& config, const RunKey& key, bool keepTrace = false);
/// Results come back in the order of `keys` regardless of worker count.
std::vector<RunResult> runAll(const ExperimentConfig& config, const std::vector<RunKey>& keys, bool keepTrace = false);

/// Seed-aggregated statistics for one (scheduler, epsilon, lambda) point.
struct Summary {
  std::string scheduler;
  double epsilon = 0;
  double lambda = 0;
  std::size_t seeds = 0;
  double meanFlowtime = 0;    // mean over seeds of per-seed mean flowtime
  double seedStddev = 0;
  double medianFlowtime = 0;  // over per-job means
  double p90Flowtime = 0;
  double copiesPerTask = 0;    // launched copies over tasks, pooled across seeds
  double killedByFailure = 0;  // per seed
  std::vector<double> perJob;  // per-job mean flowtime across seeds
};

std::vector<Summary> summarize(const std::vector<RunResult>& results);

void writeMetricsCsv(const std::filesystem::path& path, const std::vector<Summary>& summaries);
void writeCdfCsv(const std::filesystem::path& path, const std::vector<Summary>& summaries);
/// Per-job reduction (reference - x) / reference against `reference`, at
/// each (epsilon, lambda) point where the reference ran.
void writeReductionCsv(const std::filesystem::path& path, const std::vector<Summary>& summaries,
                       const std::string& reference);
void writeRunsCsv(const std::filesystem::path& path, const std::vector<RunResult>& results);

/// The experiments behind each subcommand; each writes its CSVs and a
/// report.json into `out` (if non-empty) and returns the summaries.
std::vector<Summary> runSimulate(const ExperimentConfig& config, const std::filesystem::path& out);
std::vector<Summary> runCompare(const ExperimentConfig& config, const std::filesystem::path& out);
std::vector<Summary> runAblation(const ExperimentConfig& config, const std::filesystem::path& out);

struct SweepResult {
  std::vector<Summary> summaries;
  std::vector<double> lambdas;
  std::vector<double> epsilons;
  std::vector<std::vector<double>> mean;  // [lambda][epsilon]
  std::vector<double> argminEpsilon;      // per lambda
};
SweepResult runSweep(const ExperimentConfig& config, const std::filesystem::path& out);

/// Smallest mean wins; ties go to the earlier entry.
std::size_t argmin(const std::vector<double>& values);
std::string formatNumber(double x);

}  // namespace geoinsure
