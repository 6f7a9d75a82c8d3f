#pragma once

// Synthetic geo-distributed topologies and DAG workloads.

#include <cstdint>
#include <string>
#include <vector>

#include "geoinsure/job.hpp"
#include "geoinsure/perfmodel.hpp"
#include "json.hpp"

namespace geoinsure {

/// Closed interval; `lo <= hi`, both positive.
struct Range {
  double lo = 0;
  double hi = 0;
  bool operator==(const Range&) const = default;
};

struct ClusterClass {
  std::string name;
  double fraction = 0;
  Range slots, gateRatio, meanSpeed, speedRsd, wanMean, wanRsd, unreachability;
};

struct TopologySpec {
  std::size_t clusters = 100;
  /// Ordered from best connected to least; classes take clusters in
  /// descending degree order.
  std::vector<ClusterClass> classes = defaultClasses();
  std::size_t attachEdges = 2;      // preferential-attachment edges per new node
  double attachExponent = 1.5;      // > 1 sharpens the degree tail
  std::size_t speedBins = 16;
  double truncation = 0.05;         // support floor, as a fraction of the mean
  double failureScale = 1.0;        // multiplies drawn unreachability
  ModelConfig model;

  static std::vector<ClusterClass> defaultClasses();
  void validate() const;
};

struct Topology {
  std::vector<ClusterModel> clusters;
  LinkModel links;
  std::vector<std::size_t> classOf;  // index into TopologySpec::classes
  std::vector<std::size_t> degree;
};

struct JobSizeClass {
  std::string name;
  double fraction = 0;
  std::uint32_t minTasks = 1;
  std::uint32_t maxTasks = 1;
};

enum class InputScatter { EdgeAndMedium, Uniform };

struct WorkloadSpec {
  std::size_t jobs = 200;
  double lambda = 0.07;  // jobs per slot
  std::vector<JobSizeClass> sizes = defaultSizes();
  std::uint32_t minStages = 4;
  std::uint32_t maxStages = 4;
  std::uint32_t minFanIn = 2;
  std::uint32_t maxFanIn = 4;
  std::uint32_t minInputs = 1;  // distinct input sources per source-stage task
  std::uint32_t maxInputs = 2;
  Range datasize{100, 400};  // MB per task
  InputScatter scatter = InputScatter::EdgeAndMedium;
  std::vector<std::string> stageOps = {"project", "diff", "fit", "add"};

  static std::vector<JobSizeClass> defaultSizes();
  void validate() const;
};

/// Splits `n` items over fractions by largest remainder; ties favour the
/// earlier entry.
std::vector<std::size_t> apportion(std::size_t n, const std::vector<double>& fractions);

/// Preferential-attachment degree sequence over `n` nodes.
std::vector<std::size_t> preferentialDegrees(std::size_t n, std::size_t edgesPerNode, double exponent,
                                             std::uint64_t seed);

/// Normal(mean, rsd * mean) discretized to `bins` equal-width bins over
/// mean +/- 3 sd, truncated below at `floor`.
EmpiricalDistribution discretizedNormal(double mean, double rsd, std::size_t bins, double floor);

Topology genTopology(const TopologySpec& spec, std::uint64_t seed);
std::vector<Job> genWorkload(const WorkloadSpec& spec, const Topology& topology, std::uint64_t seed);

nlohmann::json toJson(const TopologySpec& spec);
TopologySpec topologySpecFromJson(const nlohmann::json& doc);
nlohmann::json toJson(const WorkloadSpec& spec);
WorkloadSpec workloadSpecFromJson(const nlohmann::json& doc);

/// 10 clusters and 200 jobs with slot and task counts scaled so a run takes
/// about a second; `lambda` is the medium load.
TopologySpec deskTopology();
WorkloadSpec deskWorkload();

}  // namespace geoinsure
