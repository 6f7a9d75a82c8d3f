#include "geoinsure/perfmodel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace geoinsure {

void validateCluster(const ClusterModel& c) {
  if (c.slots < 1) throw std::invalid_argument("cluster needs at least one slot");
  if (!(c.ingressCap > 0) || !(c.egressCap > 0))
    throw std::invalid_argument("gate caps must be positive");
  if (!(c.failureProbability >= 0 && c.failureProbability < 1))
    throw std::invalid_argument("failure probability must lie in [0,1)");
}

const EmpiricalDistribution& LinkModel::at(ClusterId from, ClusterId to) const {
  auto it = links.find({from, to});
  return it == links.end() ? fallback : it->second;
}

PerformanceModel::PerformanceModel(std::vector<ClusterModel> clusters, LinkModel links,
                                   ModelConfig config)
    : clusters_(std::move(clusters)), links_(std::move(links)), config_(config) {
  if (clusters_.empty()) throw std::invalid_argument("model needs at least one cluster");
  for (std::size_t i = 0; i < clusters_.size(); ++i) {
    if (clusters_[i].id != i) throw std::invalid_argument("cluster ids must be dense and ordered");
    validateCluster(clusters_[i]);
  }
  if (!(config_.localReadBandwidth > 0) || !(config_.slotSeconds > 0))
    throw std::invalid_argument("model bandwidth/slot length must be positive");
  if (config_.binCap < 2 || config_.histogramBins < 1) throw std::invalid_argument("bin counts too small");
}

const ClusterModel& PerformanceModel::cluster(ClusterId id) const {
  if (id >= clusters_.size()) throw std::out_of_range("unknown cluster id " + std::to_string(id));
  return clusters_[id];
}

void PerformanceModel::ingest(const ExecutionRecord& record) {
  if (record.cluster >= clusters_.size())
    throw std::out_of_range("unknown cluster id " + std::to_string(record.cluster));
  if (!(record.processingSpeed > 0)) throw std::invalid_argument("observed speed must be positive");
  for (const auto& t : record.transfers) {
    if (t.source >= clusters_.size() || t.destination >= clusters_.size())
      throw std::out_of_range("unknown cluster in transfer observation");
    if (t.source == t.destination) throw std::invalid_argument("transfer source equals destination");
    if (!(t.bandwidth > 0)) throw std::invalid_argument("observed bandwidth must be positive");
  }
  processingWindow_[{record.cluster, record.op}].push_back({record.timestamp, record.processingSpeed});
  dirtyProcessing_.emplace(record.cluster, record.op);
  for (const auto& t : record.transfers) {
    linkWindow_[{t.source, t.destination}].push_back({record.timestamp, t.bandwidth});
    dirtyLinks_.emplace(t.source, t.destination);
  }
  clock_ = std::max(clock_, record.timestamp);
}

void PerformanceModel::advanceTo(double now) {
  clock_ = std::max(clock_, now);
  const double horizon = clock_ - config_.window;
  auto prune = [&](auto& windows, auto& dirty) {
    for (auto& [key, samples] : windows) {
      while (!samples.empty() && samples.front().time < horizon) {
        samples.pop_front();
        dirty.insert(key);
      }
    }
  };
  prune(processingWindow_, dirtyProcessing_);
  prune(linkWindow_, dirtyLinks_);
}

void PerformanceModel::ensureFresh() const {
  if ((!dirtyProcessing_.empty() || !dirtyLinks_.empty()) && clock_ - lastRebuild_ >= config_.refreshInterval)
    rebuild();
}

void PerformanceModel::rebuild() const {
  const double horizon = clock_ - config_.window;
  auto learn = [&](const auto& windows, auto& learned, const auto& dirty) {
    std::vector<double> values;
    for (const auto& key : dirty) {
      learned.erase(key);
      auto it = windows.find(key);
      if (it == windows.end()) continue;
      values.clear();
      for (const auto& s : it->second)
        if (s.time >= horizon) values.push_back(s.value);
      if (!values.empty() && values.size() >= config_.minSamples)
        learned.emplace(key, fromSamples<double>(values, config_.histogramBins));
    }
  };
  learn(processingWindow_, learnedProcessing_, dirtyProcessing_);
  learn(linkWindow_, learnedLinks_, dirtyLinks_);
  std::erase_if(rateCache_, [&](const auto& item) {
    const CachedRate& c = item.second;
    if (dirtyProcessing_.contains({c.cluster, c.op})) return true;
    return std::any_of(c.sources.begin(), c.sources.end(),
                       [&](ClusterId s) { return s != c.cluster && dirtyLinks_.contains({s, c.cluster}); });
  });
  std::erase_if(transferCache_, [&](const auto& item) {
    const auto& key = item.first;  // destination, then sources
    return std::any_of(key.begin() + 1, key.end(),
                       [&](ClusterId s) { return s != key.front() && dirtyLinks_.contains({s, key.front()}); });
  });
  dirtyProcessing_.clear();
  dirtyLinks_.clear();
  lastRebuild_ = clock_;
}

const EmpiricalDistribution& PerformanceModel::processingDist(ClusterId m, const std::string& op) const {
  ensureFresh();
  const auto& c = cluster(m);
  if (auto it = learnedProcessing_.find({m, op}); it != learnedProcessing_.end()) return it->second;
  if (auto it = c.byOperation.find(op); it != c.byOperation.end()) return it->second;
  return c.processing;
}

const EmpiricalDistribution& PerformanceModel::linkDist(ClusterId from, ClusterId to) const {
  ensureFresh();
  if (auto it = learnedLinks_.find({from, to}); it != learnedLinks_.end()) return it->second;
  return links_.at(from, to);
}

namespace {

std::vector<ClusterId> distinctSources(std::span<const InputLocation> inputs) {
  std::vector<ClusterId> sources;
  sources.reserve(inputs.size());
  for (const auto& in : inputs) sources.push_back(in.cluster);
  std::sort(sources.begin(), sources.end());
  sources.erase(std::unique(sources.begin(), sources.end()), sources.end());
  return sources;
}

}  // namespace

EmpiricalDistribution PerformanceModel::transferDist(std::span<const InputLocation> inputs,
                                                     ClusterId m) const {
  if (inputs.empty()) throw std::invalid_argument("no input locations");
  std::vector<EmpiricalDistribution> parts;
  for (ClusterId source : distinctSources(inputs)) {
    if (source == m)
      parts.push_back(EmpiricalDistribution::pointMass(config_.localReadBandwidth));
    else
      parts.push_back(linkDist(source, m));
  }
  return meanCompose<double>(parts, config_.binCap);
}

const EmpiricalDistribution& PerformanceModel::cachedTransfer(std::span<const InputLocation> inputs,
                                                             ClusterId m) const {
  std::vector<ClusterId> key{m};
  for (ClusterId s : distinctSources(inputs)) key.push_back(s);
  if (auto it = transferCache_.find(key); it != transferCache_.end()) return it->second;
  return transferCache_.emplace(std::move(key), transferDist(inputs, m)).first->second;
}

std::string PerformanceModel::rateKey(const TaskProfile& task, ClusterId m) const {
  // Binary key: op, NUL, destination, then the distinct sources ascending.
  auto append = [](std::string& key, ClusterId id) { key.append(reinterpret_cast<const char*>(&id), sizeof id); };
  std::string key;
  key.reserve(task.op.size() + 1 + sizeof(ClusterId) * (1 + task.inputs.size()));
  key += task.op;
  key += '\0';
  append(key, m);
  if (task.inputs.size() == 1) {
    append(key, task.inputs.front().cluster);
  } else if (!task.inputs.empty()) {
    for (ClusterId s : distinctSources(task.inputs)) append(key, s);
  }
  return key;
}

const PerformanceModel::CachedRate& PerformanceModel::rateEntry(const TaskProfile& task, ClusterId m) const {
  ensureFresh();
  std::string key = rateKey(task, m);
  if (auto it = rateCache_.find(key); it != rateCache_.end()) return it->second;
  CachedRate entry;
  entry.dist = task.inputs.empty()
                   ? processingDist(m, task.op)
                   : minCompose(processingDist(m, task.op), cachedTransfer(task.inputs, m), config_.binCap);
  entry.mean = expectation(entry.dist);
  entry.cluster = m;
  entry.op = task.op;
  entry.sources = distinctSources(task.inputs);
  // Clamped to the caps so a lone copy always fits an idle gate.
  entry.demand.destination = m;
  for (ClusterId source : entry.sources) {
    if (source == m) continue;
    const double bw = expectation(linkDist(source, m));
    entry.demand.ingress += bw;
    entry.demand.egress.emplace_back(source, std::min(bw, cluster(source).egressCap));
  }
  entry.demand.ingress = std::min(entry.demand.ingress, cluster(m).ingressCap);
  return rateCache_.emplace(std::move(key), std::move(entry)).first->second;
}

const EmpiricalDistribution& PerformanceModel::copyRateDist(const TaskProfile& task, ClusterId m) const {
  return rateEntry(task, m).dist;
}

double PerformanceModel::singleRate(const TaskProfile& task, ClusterId m) const {
  return rateEntry(task, m).mean;
}

double PerformanceModel::execRate(const TaskProfile& task, std::span<const ClusterId> placement) const {
  if (placement.empty()) throw std::invalid_argument("empty placement");
  if (placement.size() == 1) return singleRate(task, placement.front());
  std::vector<const EmpiricalDistribution*> dists;
  dists.reserve(placement.size());
  for (ClusterId m : placement) dists.push_back(&copyRateDist(task, m));
  return expectedMax<double>(dists);
}

double PerformanceModel::reliability(const TaskProfile& task, std::span<const ClusterId> placement) const {
  const double e = estExecTime(task, placement);
  std::vector<ClusterId> distinct(placement.begin(), placement.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  double trouble = 1;
  for (ClusterId k : distinct) trouble *= cluster(k).failureProbability;
  if (trouble == 0 || e == 0) return 1.0;
  return std::pow(1.0 - trouble, e);
}

ClusterId PerformanceModel::globalOptimalCluster(const TaskProfile& task) const {
  ClusterId best = 0;
  double bestRate = -1;
  for (ClusterId m = 0; m < clusters_.size(); ++m) {
    const double r = singleRate(task, m);
    if (r > bestRate) {
      bestRate = r;
      best = m;
    }
  }
  return best;
}

double PerformanceModel::globalOptimalRate(const TaskProfile& task) const {
  return singleRate(task, globalOptimalCluster(task));
}

double PerformanceModel::estExecTime(const TaskProfile& task, std::span<const ClusterId> placement,
                                     std::optional<double> remaining) const {
  const double d = remaining.value_or(task.datasize);
  if (d <= 0) return 0;
  const double rate = execRate(task, placement);
  if (!(rate > 0)) throw std::domain_error("infeasible placement");
  return d / (rate * config_.slotSeconds);
}

GateDemand PerformanceModel::gateDemand(const TaskProfile& task, ClusterId m) const {
  return rateEntry(task, m).demand;
}

nlohmann::json toJson(const EmpiricalDistribution& d) {
  nlohmann::json doc;
  doc["support"] = std::vector<double>(d.support().data(), d.support().data() + d.size());
  doc["mass"] = std::vector<double>(d.mass().data(), d.mass().data() + d.size());
  return doc;
}

EmpiricalDistribution distributionFromJson(const nlohmann::json& doc) {
  const auto support = doc.at("support").get<std::vector<double>>();
  const auto mass = doc.at("mass").get<std::vector<double>>();
  if (support.size() != mass.size()) throw std::invalid_argument("support/mass length mismatch");
  return EmpiricalDistribution(
      Eigen::Map<const Eigen::ArrayXd>(support.data(), static_cast<Eigen::Index>(support.size())),
      Eigen::Map<const Eigen::ArrayXd>(mass.data(), static_cast<Eigen::Index>(mass.size())));
}

nlohmann::json PerformanceModel::toJson() const {
  nlohmann::json doc;
  doc["config"] = {{"window", config_.window},
                   {"min_samples", config_.minSamples},
                   {"refresh_interval", config_.refreshInterval},
                   {"local_read_bandwidth", config_.localReadBandwidth},
                   {"slot_seconds", config_.slotSeconds},
                   {"bin_cap", config_.binCap},
                   {"histogram_bins", config_.histogramBins}};
  auto& clusters = doc["clusters"] = nlohmann::json::array();
  for (const auto& c : clusters_) {
    nlohmann::json entry = {{"id", c.id},
                            {"slots", c.slots},
                            {"ingress_cap", c.ingressCap},
                            {"egress_cap", c.egressCap},
                            {"failure_probability", c.failureProbability},
                            {"processing", geoinsure::toJson(c.processing)}};
    auto& ops = entry["operations"] = nlohmann::json::object();
    for (const auto& [op, d] : c.byOperation) ops[op] = geoinsure::toJson(d);
    clusters.push_back(std::move(entry));
  }
  auto& links = doc["links"] = nlohmann::json::array();
  for (const auto& [pair, d] : links_.links)
    links.push_back({{"from", pair.first}, {"to", pair.second}, {"bandwidth", geoinsure::toJson(d)}});
  doc["default_link"] = geoinsure::toJson(links_.fallback);
  return doc;
}

PerformanceModel PerformanceModel::fromJson(const nlohmann::json& doc) {
  ModelConfig config;
  if (doc.contains("config")) {
    const auto& c = doc["config"];
    config.window = c.value("window", config.window);
    config.minSamples = c.value("min_samples", config.minSamples);
    config.refreshInterval = c.value("refresh_interval", config.refreshInterval);
    config.localReadBandwidth = c.value("local_read_bandwidth", config.localReadBandwidth);
    config.slotSeconds = c.value("slot_seconds", config.slotSeconds);
    config.binCap = c.value("bin_cap", config.binCap);
    config.histogramBins = c.value("histogram_bins", config.histogramBins);
  }
  std::vector<ClusterModel> clusters;
  for (const auto& entry : doc.at("clusters")) {
    ClusterModel c;
    c.id = entry.at("id").get<ClusterId>();
    c.slots = entry.at("slots").get<int>();
    c.ingressCap = entry.at("ingress_cap").get<double>();
    c.egressCap = entry.at("egress_cap").get<double>();
    c.failureProbability = entry.value("failure_probability", 0.0);
    c.processing = distributionFromJson(entry.at("processing"));
    if (entry.contains("operations"))
      for (const auto& [op, d] : entry["operations"].items()) c.byOperation.emplace(op, distributionFromJson(d));
    clusters.push_back(std::move(c));
  }
  LinkModel links;
  if (doc.contains("default_link")) links.fallback = distributionFromJson(doc["default_link"]);
  if (doc.contains("links"))
    for (const auto& entry : doc["links"])
      links.links.emplace(std::make_pair(entry.at("from").get<ClusterId>(), entry.at("to").get<ClusterId>()),
                          distributionFromJson(entry.at("bandwidth")));
  return PerformanceModel(std::move(clusters), std::move(links), config);
}

}  // namespace geoinsure
