#include "geoinsure/workload.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <stdexcept>

namespace geoinsure {

namespace {

constexpr std::uint64_t kTopologyStream = 0x7090;
constexpr std::uint64_t kDegreeStream = 0xde6;
constexpr std::uint64_t kWorkloadStream = 0x3091;

std::mt19937_64 streamFor(std::uint64_t seed, std::uint64_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag)};
  return std::mt19937_64(seq);
}

double draw(std::mt19937_64& rng, const Range& r) {
  if (r.lo == r.hi) return r.lo;
  return std::uniform_real_distribution<double>(r.lo, r.hi)(rng);
}

void checkRange(const Range& r, const std::string& what) {
  if (!(r.lo > 0 && r.lo <= r.hi)) throw std::invalid_argument("range '" + what + "' must satisfy 0 < lo <= hi");
}

void checkFractions(const std::vector<double>& fractions, const std::string& what) {
  double sum = 0;
  for (double f : fractions) {
    if (!(f >= 0)) throw std::invalid_argument(what + " fractions must be non-negative");
    sum += f;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument(what + " fractions must sum to 1");
}

nlohmann::json rangeJson(const Range& r) { return nlohmann::json::array({r.lo, r.hi}); }

Range rangeFrom(const nlohmann::json& doc) {
  if (doc.is_number()) return {doc.get<double>(), doc.get<double>()};
  if (!doc.is_array() || doc.size() != 2) throw std::invalid_argument("range must be [lo, hi]");
  return {doc[0].get<double>(), doc[1].get<double>()};
}

double standardNormalCdf(double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); }

}  // namespace

std::vector<ClusterClass> TopologySpec::defaultClasses() {
  return {
      {"large", 0.05, {500, 1500}, {0.55, 0.75}, {174, 355}, {0.25, 0.6}, {64, 256}, {0.2, 0.5}, {0.002, 0.011}},
      {"medium", 0.20, {50, 500}, {0.65, 0.85}, {128, 241}, {0.55, 0.85}, {64, 256}, {0.2, 0.5}, {0.02, 0.2}},
      {"small", 0.75, {10, 50}, {0.75, 0.95}, {68, 179}, {0.35, 0.75}, {64, 256}, {0.2, 0.5}, {0.05, 0.5}},
  };
}

void TopologySpec::validate() const {
  if (clusters == 0) throw std::invalid_argument("topology needs at least one cluster");
  if (classes.empty()) throw std::invalid_argument("topology needs at least one cluster class");
  std::vector<double> fractions;
  for (const auto& c : classes) {
    fractions.push_back(c.fraction);
    for (const auto& [r, what] : {std::pair{c.slots, "slots"}, {c.gateRatio, "gate_ratio"}, {c.meanSpeed, "mean_speed"},
                                  {c.speedRsd, "speed_rsd"}, {c.wanMean, "wan_mean"}, {c.wanRsd, "wan_rsd"},
                                  {c.unreachability, "unreachability"}})
      checkRange(r, c.name + "." + what);
    if (c.unreachability.hi >= 1) throw std::invalid_argument("unreachability must stay below 1");
  }
  checkFractions(fractions, "cluster class");
  if (attachEdges == 0) throw std::invalid_argument("attach_edges must be positive");
  if (!(attachExponent > 0)) throw std::invalid_argument("attach_exponent must be positive");
  if (speedBins < 2) throw std::invalid_argument("speed_bins must be at least 2");
  if (!(truncation > 0 && truncation < 1)) throw std::invalid_argument("truncation must lie in (0,1)");
  if (!(failureScale >= 0)) throw std::invalid_argument("failure_scale must be non-negative");
}

std::vector<JobSizeClass> WorkloadSpec::defaultSizes() {
  return {{"small", 0.89, 1, 150}, {"medium", 0.08, 151, 500}, {"large", 0.03, 501, 1000}};
}

void WorkloadSpec::validate() const {
  if (!(lambda > 0)) throw std::invalid_argument("lambda must be positive");
  if (sizes.empty()) throw std::invalid_argument("workload needs at least one size class");
  std::vector<double> fractions;
  for (const auto& s : sizes) {
    fractions.push_back(s.fraction);
    if (s.minTasks < 1 || s.minTasks > s.maxTasks) throw std::invalid_argument("size class '" + s.name + "' has an empty task range");
  }
  checkFractions(fractions, "job size");
  if (minStages < 1 || minStages > maxStages) throw std::invalid_argument("stage range is empty");
  if (minFanIn < 1 || minFanIn > maxFanIn) throw std::invalid_argument("fan-in range is empty");
  if (minInputs < 1 || minInputs > maxInputs) throw std::invalid_argument("input-source range is empty");
  checkRange(datasize, "datasize");
  if (stageOps.empty()) throw std::invalid_argument("stage_ops must not be empty");
}

std::vector<std::size_t> apportion(std::size_t n, const std::vector<double>& fractions) {
  std::vector<std::size_t> out(fractions.size());
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t given = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    const double exact = fractions[i] * static_cast<double>(n);
    out[i] = static_cast<std::size_t>(std::floor(exact + 1e-9));
    given += out[i];
    remainders.emplace_back(exact - static_cast<double>(out[i]), i);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first + 1e-12; });
  for (std::size_t i = 0; given < n && i < remainders.size(); ++i, ++given) ++out[remainders[i].second];
  return out;
}

std::vector<std::size_t> preferentialDegrees(std::size_t n, std::size_t edgesPerNode, double exponent,
                                             std::uint64_t seed) {
  std::vector<std::size_t> degree(n, 0);
  if (n < 2) return degree;
  auto rng = streamFor(seed, kDegreeStream);
  const std::size_t core = std::min(n, edgesPerNode + 1);
  for (std::size_t i = 0; i < core; ++i) degree[i] = core - 1;
  std::vector<double> weight(n);
  for (std::size_t v = core; v < n; ++v) {
    const std::size_t m = std::min(edgesPerNode, v);
    std::vector<bool> taken(v, false);
    for (std::size_t e = 0; e < m; ++e) {
      double total = 0;
      for (std::size_t u = 0; u < v; ++u) total += weight[u] = taken[u] ? 0.0 : std::pow(static_cast<double>(degree[u]), exponent);
      double x = std::uniform_real_distribution<double>(0, total)(rng);
      std::size_t pick = v - 1;
      for (std::size_t u = 0; u < v; ++u) {
        if (taken[u]) continue;
        if (x < weight[u]) {
          pick = u;
          break;
        }
        x -= weight[u];
      }
      while (taken[pick]) --pick;
      taken[pick] = true;
      ++degree[pick];
      ++degree[v];
    }
  }
  return degree;
}

EmpiricalDistribution discretizedNormal(double mean, double rsd, std::size_t bins, double floor) {
  if (!(mean > 0)) throw std::invalid_argument("normal mean must be positive");
  const double sd = rsd * mean;
  const double lo = std::max(floor, mean - 3 * sd);
  const double hi = mean + 3 * sd;
  if (!(sd > 0) || bins < 2 || !(hi > lo)) return EmpiricalDistribution::pointMass(mean);
  const double width = (hi - lo) / static_cast<double>(bins);
  std::vector<EmpiricalDistribution::Atom> atoms;
  for (std::size_t b = 0; b < bins; ++b) {
    const double a = lo + width * static_cast<double>(b);
    const double mass = standardNormalCdf((a + width - mean) / sd) - standardNormalCdf((a - mean) / sd);
    atoms.emplace_back(a + width / 2, mass);
  }
  return EmpiricalDistribution::fromAtoms(std::move(atoms));
}

Topology genTopology(const TopologySpec& spec, std::uint64_t seed) {
  spec.validate();
  const std::size_t n = spec.clusters;
  Topology topo;
  topo.degree = preferentialDegrees(n, spec.attachEdges, spec.attachExponent, seed);

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return topo.degree[a] > topo.degree[b]; });
  std::vector<double> fractions;
  for (const auto& c : spec.classes) fractions.push_back(c.fraction);
  const auto counts = apportion(n, fractions);
  topo.classOf.assign(n, 0);
  for (std::size_t cls = 0, pos = 0; cls < counts.size(); ++cls)
    for (std::size_t i = 0; i < counts[cls]; ++i) topo.classOf[order[pos++]] = cls;

  auto rng = streamFor(seed, kTopologyStream);
  std::vector<double> gateRatio(n);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& cls = spec.classes[topo.classOf[k]];
    ClusterModel c;
    c.id = static_cast<ClusterId>(k);
    c.slots = std::max(1, static_cast<int>(std::lround(draw(rng, cls.slots))));
    gateRatio[k] = draw(rng, cls.gateRatio);
    const double speed = draw(rng, cls.meanSpeed);
    const double rsd = draw(rng, cls.speedRsd);
    c.processing = discretizedNormal(speed, rsd, spec.speedBins, spec.truncation * speed);
    c.failureProbability = std::min(0.99, draw(rng, cls.unreachability) * spec.failureScale);
    topo.clusters.push_back(std::move(c));
  }

  std::vector<double> inSum(n, 0), outSum(n, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const auto& cls = spec.classes[topo.classOf[i]];
      const double mean = draw(rng, cls.wanMean);
      const double rsd = draw(rng, cls.wanRsd);
      auto d = discretizedNormal(mean, rsd, spec.speedBins, spec.truncation * mean);
      outSum[i] += expectation(d);
      inSum[j] += expectation(d);
      topo.links.links.emplace(std::make_pair(static_cast<ClusterId>(i), static_cast<ClusterId>(j)), std::move(d));
    }
  }
  // Gate cap: limit ratio times the summed external bandwidth of the
  // cluster's slots, each slot getting the cluster's average link bandwidth.
  for (std::size_t k = 0; k < n; ++k) {
    const auto& cls = spec.classes[topo.classOf[k]];
    const double fallback = (cls.wanMean.lo + cls.wanMean.hi) / 2;
    const double in = n > 1 ? inSum[k] / static_cast<double>(n - 1) : fallback;
    const double out = n > 1 ? outSum[k] / static_cast<double>(n - 1) : fallback;
    auto& c = topo.clusters[k];
    c.ingressCap = gateRatio[k] * c.slots * in;
    c.egressCap = gateRatio[k] * c.slots * out;
  }
  return topo;
}

std::vector<Job> genWorkload(const WorkloadSpec& spec, const Topology& topology, std::uint64_t seed) {
  spec.validate();
  if (topology.clusters.empty()) throw std::invalid_argument("workload needs a non-empty topology");
  std::vector<ClusterId> scatter;
  for (std::size_t k = 0; k < topology.clusters.size(); ++k)
    if (spec.scatter == InputScatter::Uniform || topology.classOf.at(k) > 0) scatter.push_back(static_cast<ClusterId>(k));
  if (scatter.empty())
    for (std::size_t k = 0; k < topology.clusters.size(); ++k) scatter.push_back(static_cast<ClusterId>(k));

  auto rng = streamFor(seed, kWorkloadStream);
  std::exponential_distribution<double> gap(spec.lambda);
  std::vector<double> fractions;
  for (const auto& s : spec.sizes) fractions.push_back(s.fraction);
  std::discrete_distribution<std::size_t> sizeClass(fractions.begin(), fractions.end());
  auto uniformInt = [&](std::uint32_t lo, std::uint32_t hi) {
    return std::uniform_int_distribution<std::uint32_t>(lo, hi)(rng);
  };

  std::vector<Job> jobs;
  double now = 0;
  for (std::size_t j = 0; j < spec.jobs; ++j) {
    now += gap(rng);
    Job job;
    job.id = static_cast<JobId>(j);
    job.arrival = now;
    const auto& size = spec.sizes[sizeClass(rng)];
    const std::uint32_t n = uniformInt(size.minTasks, size.maxTasks);
    const std::uint32_t stages = std::min(n, uniformInt(spec.minStages, spec.maxStages));

    // Stages narrow towards the sink: weights s, s-1, ..., 1 over the tasks
    // left once every stage has one.
    std::vector<double> weights(stages);
    for (std::uint32_t s = 0; s < stages; ++s) weights[s] = stages - s;
    const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (auto& w : weights) w /= wsum;
    auto perStage = apportion(n - stages, weights);
    for (auto& c : perStage) ++c;

    std::vector<std::uint32_t> previous;
    for (std::uint32_t s = 0; s < stages; ++s) {
      std::vector<std::uint32_t> current;
      for (std::size_t i = 0; i < perStage[s]; ++i) {
        TaskSpec t;
        t.stage = s;
        t.op = spec.stageOps[s % spec.stageOps.size()];
        t.datasize = draw(rng, spec.datasize);
        if (s == 0) {
          const auto k = std::min<std::size_t>(uniformInt(spec.minInputs, spec.maxInputs), scatter.size());
          std::vector<ClusterId> sources;
          std::sample(scatter.begin(), scatter.end(), std::back_inserter(sources), k, rng);
          for (ClusterId src : sources) t.inputs.push_back({src, t.datasize / static_cast<double>(k)});
        } else {
          const auto f = std::min<std::size_t>(uniformInt(spec.minFanIn, spec.maxFanIn), previous.size());
          std::sample(previous.begin(), previous.end(), std::back_inserter(t.predecessors), f, rng);
        }
        current.push_back(static_cast<std::uint32_t>(job.tasks.size()));
        job.tasks.push_back(std::move(t));
      }
      previous = std::move(current);
    }
    validateJob(job);
    jobs.push_back(std::move(job));
  }
  return jobs;
}

nlohmann::json toJson(const TopologySpec& spec) {
  nlohmann::json doc = {{"clusters", spec.clusters},
                        {"attach_edges", spec.attachEdges},
                        {"attach_exponent", spec.attachExponent},
                        {"speed_bins", spec.speedBins},
                        {"truncation", spec.truncation},
                        {"failure_scale", spec.failureScale}};
  auto& classes = doc["classes"] = nlohmann::json::array();
  for (const auto& c : spec.classes)
    classes.push_back({{"name", c.name},
                       {"fraction", c.fraction},
                       {"slots", rangeJson(c.slots)},
                       {"gate_ratio", rangeJson(c.gateRatio)},
                       {"mean_speed", rangeJson(c.meanSpeed)},
                       {"speed_rsd", rangeJson(c.speedRsd)},
                       {"wan_mean", rangeJson(c.wanMean)},
                       {"wan_rsd", rangeJson(c.wanRsd)},
                       {"unreachability", rangeJson(c.unreachability)}});
  doc["model"] = {{"window", spec.model.window},
                  {"min_samples", spec.model.minSamples},
                  {"refresh_interval", spec.model.refreshInterval},
                  {"local_read_bandwidth", spec.model.localReadBandwidth},
                  {"slot_seconds", spec.model.slotSeconds},
                  {"bin_cap", spec.model.binCap},
                  {"histogram_bins", spec.model.histogramBins}};
  return doc;
}

TopologySpec topologySpecFromJson(const nlohmann::json& doc) {
  TopologySpec spec;
  spec.clusters = doc.value("clusters", spec.clusters);
  spec.attachEdges = doc.value("attach_edges", spec.attachEdges);
  spec.attachExponent = doc.value("attach_exponent", spec.attachExponent);
  spec.speedBins = doc.value("speed_bins", spec.speedBins);
  spec.truncation = doc.value("truncation", spec.truncation);
  spec.failureScale = doc.value("failure_scale", spec.failureScale);
  if (doc.contains("classes")) {
    spec.classes.clear();
    for (const auto& c : doc["classes"]) {
      ClusterClass cls;
      cls.name = c.value("name", std::string("class") + std::to_string(spec.classes.size()));
      cls.fraction = c.at("fraction").get<double>();
      cls.slots = rangeFrom(c.at("slots"));
      cls.gateRatio = rangeFrom(c.at("gate_ratio"));
      cls.meanSpeed = rangeFrom(c.at("mean_speed"));
      cls.speedRsd = rangeFrom(c.at("speed_rsd"));
      cls.wanMean = rangeFrom(c.at("wan_mean"));
      cls.wanRsd = rangeFrom(c.at("wan_rsd"));
      cls.unreachability = rangeFrom(c.at("unreachability"));
      spec.classes.push_back(std::move(cls));
    }
  }
  if (doc.contains("model")) {
    const auto& m = doc["model"];
    spec.model.window = m.value("window", spec.model.window);
    spec.model.minSamples = m.value("min_samples", spec.model.minSamples);
    spec.model.refreshInterval = m.value("refresh_interval", spec.model.refreshInterval);
    spec.model.localReadBandwidth = m.value("local_read_bandwidth", spec.model.localReadBandwidth);
    spec.model.slotSeconds = m.value("slot_seconds", spec.model.slotSeconds);
    spec.model.binCap = m.value("bin_cap", spec.model.binCap);
    spec.model.histogramBins = m.value("histogram_bins", spec.model.histogramBins);
  }
  spec.validate();
  return spec;
}

nlohmann::json toJson(const WorkloadSpec& spec) {
  nlohmann::json doc = {{"jobs", spec.jobs},
                        {"lambda", spec.lambda},
                        {"stages", {spec.minStages, spec.maxStages}},
                        {"fan_in", {spec.minFanIn, spec.maxFanIn}},
                        {"inputs", {spec.minInputs, spec.maxInputs}},
                        {"datasize", rangeJson(spec.datasize)},
                        {"scatter", spec.scatter == InputScatter::Uniform ? "uniform" : "edge_and_medium"},
                        {"stage_ops", spec.stageOps}};
  auto& sizes = doc["sizes"] = nlohmann::json::array();
  for (const auto& s : spec.sizes)
    sizes.push_back({{"name", s.name}, {"fraction", s.fraction}, {"tasks", {s.minTasks, s.maxTasks}}});
  return doc;
}

WorkloadSpec workloadSpecFromJson(const nlohmann::json& doc) {
  WorkloadSpec spec;
  auto pairOf = [&](const char* key, std::uint32_t& lo, std::uint32_t& hi) {
    if (!doc.contains(key)) return;
    const auto& v = doc[key];
    if (v.is_number()) {
      lo = hi = v.get<std::uint32_t>();
    } else {
      lo = v.at(0).get<std::uint32_t>();
      hi = v.at(1).get<std::uint32_t>();
    }
  };
  spec.jobs = doc.value("jobs", spec.jobs);
  spec.lambda = doc.value("lambda", spec.lambda);
  pairOf("stages", spec.minStages, spec.maxStages);
  pairOf("fan_in", spec.minFanIn, spec.maxFanIn);
  pairOf("inputs", spec.minInputs, spec.maxInputs);
  if (doc.contains("datasize")) spec.datasize = rangeFrom(doc["datasize"]);
  if (doc.contains("scatter")) {
    const auto s = doc["scatter"].get<std::string>();
    if (s == "uniform")
      spec.scatter = InputScatter::Uniform;
    else if (s == "edge_and_medium")
      spec.scatter = InputScatter::EdgeAndMedium;
    else
      throw std::invalid_argument("unknown scatter policy '" + s + "'");
  }
  spec.stageOps = doc.value("stage_ops", spec.stageOps);
  if (doc.contains("sizes")) {
    spec.sizes.clear();
    for (const auto& s : doc["sizes"])
      spec.sizes.push_back({s.value("name", std::string("size") + std::to_string(spec.sizes.size())),
                            s.at("fraction").get<double>(), s.at("tasks").at(0).get<std::uint32_t>(),
                            s.at("tasks").at(1).get<std::uint32_t>()});
  }
  spec.validate();
  return spec;
}

TopologySpec deskTopology() {
  TopologySpec spec;
  spec.clusters = 10;
  spec.classes[0].slots = {10, 30};
  spec.classes[1].slots = {4, 10};
  spec.classes[2].slots = {1, 4};
  spec.failureScale = 0.1;
  spec.model.refreshInterval = 10;
  return spec;
}

WorkloadSpec deskWorkload() {
  WorkloadSpec spec;
  spec.jobs = 200;
  spec.lambda = 0.07;
  spec.sizes = {{"small", 0.89, 1, 15}, {"medium", 0.08, 16, 50}, {"large", 0.03, 51, 100}};
  spec.datasize = {2000, 6000};
  return spec;
}

}  // namespace geoinsure
