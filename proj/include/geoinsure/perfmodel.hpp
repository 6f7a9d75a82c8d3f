#pragma once

// Performance modeler: per-cluster processing-speed distributions, per-link
// transfer-bandwidth distributions, per-slot failure probabilities, and the
// rate / reliability / time estimates the schedulers plan with.

#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "geoinsure/dist.hpp"
#include "geoinsure/types.hpp"
#include "json.hpp"

namespace geoinsure {

struct ClusterModel {
  ClusterId id = 0;
  int slots = 1;
  double ingressCap = 1;   // MB/s
  double egressCap = 1;    // MB/s
  double failureProbability = 0;  // per slot, in [0,1)
  EmpiricalDistribution processing;  // cluster-wide default, MB/s
  std::map<std::string, EmpiricalDistribution> byOperation;
};

void validateCluster(const ClusterModel& cluster);

struct LinkModel {
  std::map<std::pair<ClusterId, ClusterId>, EmpiricalDistribution> links;
  EmpiricalDistribution fallback = EmpiricalDistribution::pointMass(100.0);

  const EmpiricalDistribution& at(ClusterId from, ClusterId to) const;
};

struct TransferObservation {
  ClusterId source = 0;
  ClusterId destination = 0;
  double bandwidth = 0;  // MB/s
};

struct ExecutionRecord {
  ClusterId cluster = 0;
  std::string op;
  double processingSpeed = 0;  // MB/s
  std::vector<TransferObservation> transfers;
  double timestamp = 0;  // slots
};

struct ModelConfig {
  double window = 500;           // slots of history kept
  std::size_t minSamples = 4;    // below this the configured default is used
  double refreshInterval = 0;    // min slots between histogram rebuilds
  double localReadBandwidth = 1000;  // MB/s for co-located inputs
  double slotSeconds = 1;        // converts MB/s into MB/slot
  std::size_t binCap = kDefaultBinCap;  // composed distributions
  std::size_t histogramBins = 16;       // learned distributions
};

/// Not safe for concurrent queries: rate lookups are memoised internally.
/// Give every simulation run its own instance.
class PerformanceModel {
 public:
  PerformanceModel(std::vector<ClusterModel> clusters, LinkModel links, ModelConfig config = {});

  std::size_t clusterCount() const { return clusters_.size(); }
  const ClusterModel& cluster(ClusterId id) const;
  const std::vector<ClusterModel>& clusters() const { return clusters_; }
  const LinkModel& links() const { return links_; }
  const ModelConfig& config() const { return config_; }

  void ingest(const ExecutionRecord& record);
  /// Moves the model clock; windowed histograms are rebuilt lazily on the
  /// next query once `refreshInterval` has elapsed since the last rebuild.
  void advanceTo(double now);
  double now() const { return clock_; }

  const EmpiricalDistribution& processingDist(ClusterId m, const std::string& op) const;
  const EmpiricalDistribution& linkDist(ClusterId from, ClusterId to) const;

  EmpiricalDistribution transferDist(std::span<const InputLocation> inputs, ClusterId m) const;
  const EmpiricalDistribution& copyRateDist(const TaskProfile& task, ClusterId m) const;
  /// Expected single-copy rate in cluster m, MB/s.
  double singleRate(const TaskProfile& task, ClusterId m) const;
  double execRate(const TaskProfile& task, std::span<const ClusterId> placement) const;
  double reliability(const TaskProfile& task, std::span<const ClusterId> placement) const;
  double globalOptimalRate(const TaskProfile& task) const;
  ClusterId globalOptimalCluster(const TaskProfile& task) const;
  /// Slots for `remaining` MB (defaults to the task's datasize).
  double estExecTime(const TaskProfile& task, std::span<const ClusterId> placement,
                     std::optional<double> remaining = std::nullopt) const;
  GateDemand gateDemand(const TaskProfile& task, ClusterId m) const;

  nlohmann::json toJson() const;
  static PerformanceModel fromJson(const nlohmann::json& doc);

 private:
  struct Sample {
    double time;
    double value;
  };
  struct CachedRate {
    EmpiricalDistribution dist;
    double mean = 0;
    ClusterId cluster = 0;
    std::string op;
    std::vector<ClusterId> sources;
    GateDemand demand;
  };

  void ensureFresh() const;
  void rebuild() const;
  std::string rateKey(const TaskProfile& task, ClusterId m) const;
  const CachedRate& rateEntry(const TaskProfile& task, ClusterId m) const;
  const EmpiricalDistribution& cachedTransfer(std::span<const InputLocation> inputs, ClusterId m) const;

  std::vector<ClusterModel> clusters_;
  LinkModel links_;
  ModelConfig config_;
  double clock_ = 0;

  std::map<std::pair<ClusterId, std::string>, std::deque<Sample>> processingWindow_;
  std::map<std::pair<ClusterId, ClusterId>, std::deque<Sample>> linkWindow_;

  // Windows with samples added or expired since the last rebuild.
  mutable std::set<std::pair<ClusterId, std::string>> dirtyProcessing_;
  mutable std::set<std::pair<ClusterId, ClusterId>> dirtyLinks_;
  mutable double lastRebuild_ = -1e300;
  mutable std::map<std::pair<ClusterId, std::string>, EmpiricalDistribution> learnedProcessing_;
  mutable std::map<std::pair<ClusterId, ClusterId>, EmpiricalDistribution> learnedLinks_;
  mutable std::unordered_map<std::string, CachedRate> rateCache_;
  // Transfer-rate distributions keyed by destination and source set; shared
  // across operations.
  mutable std::map<std::vector<ClusterId>, EmpiricalDistribution> transferCache_;
};

nlohmann::json toJson(const EmpiricalDistribution& d);
EmpiricalDistribution distributionFromJson(const nlohmann::json& doc);

}  // namespace geoinsure
