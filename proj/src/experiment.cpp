#include "geoinsure/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <set>
#include <stdexcept>
#include <thread>

namespace geoinsure {

namespace {

const std::set<std::string> kPolicies = {"insure", "Eff-Reli", "Reli-Eff", "Eff-Eff", "Reli-Reli", "EFA", "JGA"};

std::ofstream openOut(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  return out;
}

double quantileOf(std::vector<double> values, double q) {
  if (values.empty()) return 0;
  std::sort(values.begin(), values.end());
  const auto idx = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size()))) - 1;
  return values[std::min(values.size() - 1, std::max<std::size_t>(idx, 0))];
}

std::string fileSafe(std::string s) {
  for (char& c : s)
    if (c == '/' || c == ' ') c = '_';
  return s;
}

nlohmann::json summaryJson(const Summary& s) {
  return {{"scheduler", s.scheduler},        {"epsilon", s.epsilon},
          {"lambda", s.lambda},              {"seeds", s.seeds},
          {"mean_flowtime", s.meanFlowtime}, {"seed_stddev", s.seedStddev},
          {"median_flowtime", s.medianFlowtime}, {"p90_flowtime", s.p90Flowtime},
          {"copies_per_task", s.copiesPerTask},  {"killed_by_failure", s.killedByFailure}};
}

void writeReport(const std::filesystem::path& out, const std::string& command, const ExperimentConfig& config,
                 const std::vector<Summary>& summaries, nlohmann::json extra = nlohmann::json::object()) {
  nlohmann::json doc;
  doc["command"] = command;
  doc["config"] = toJson(config);
  auto& rows = doc["summaries"] = nlohmann::json::array();
  for (const auto& s : summaries) rows.push_back(summaryJson(s));
  for (auto& [k, v] : extra.items()) doc[k] = v;
  openOut(out / "report.json") << doc.dump(2) << '\n';
}

void writeTraces(const std::filesystem::path& out, const std::vector<RunResult>& results) {
  for (const auto& r : results) {
    if (!r.trace) continue;
    const std::string name = "trace-" + fileSafe(r.key.scheduler) + "-e" + formatNumber(r.key.epsilon) + "-l" +
                             formatNumber(r.key.lambda) + "-s" + std::to_string(r.key.seed) + ".jsonl";
    auto file = openOut(out / name);
    r.trace->writeJsonLines(file);
  }
}

std::vector<RunKey> keysFor(const std::vector<std::string>& schedulers, const std::vector<double>& epsilons,
                            const std::vector<double>& lambdas, const std::vector<std::uint64_t>& seeds) {
  std::vector<RunKey> keys;
  for (double lambda : lambdas)
    for (const auto& s : schedulers)
      for (double eps : epsilons)
        for (auto seed : seeds) keys.push_back({s, eps, lambda, seed});
  return keys;
}

std::vector<Summary> emit(const ExperimentConfig& config, const std::filesystem::path& out, const std::string& command,
                          const std::vector<RunResult>& results, nlohmann::json extra = nlohmann::json::object()) {
  auto summaries = summarize(results);
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    writeMetricsCsv(out / "metrics.csv", summaries);
    writeCdfCsv(out / "cdf.csv", summaries);
    writeReductionCsv(out / "reduction.csv", summaries, config.reference);
    writeRunsCsv(out / "runs.csv", results);
    if (config.writeTraces) writeTraces(out, results);
    writeReport(out, command, config, summaries, std::move(extra));
  }
  return summaries;
}

}  // namespace

std::string formatNumber(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

std::size_t argmin(const std::vector<double>& values) {
  if (values.empty()) throw std::invalid_argument("argmin of an empty list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i)
    if (values[i] < values[best]) best = i;
  return best;
}

void ExperimentConfig::validate() const {
  topology.validate();
  workload.validate();
  baseline.validate();
  if (seeds.empty()) throw std::invalid_argument("at least one seed is required");
  if (!(epsilon > 0 && epsilon < 1)) throw std::invalid_argument("epsilon must lie in (0,1)");
  for (double e : epsilons)
    if (!(e > 0 && e < 1)) throw std::invalid_argument("sweep epsilons must lie in (0,1)");
  for (double l : lambdas)
    if (!(l > 0)) throw std::invalid_argument("sweep lambdas must be positive");
  if (!(engine.speedFactor >= 1)) throw std::invalid_argument("speed_factor must be >= 1");
  if (!(engine.horizon > 0)) throw std::invalid_argument("horizon must be positive");
  (void)makeScheduler(scheduler, epsilon, baseline);
  for (const auto& s : schedulers) (void)makeScheduler(s, epsilon, baseline);
  for (const auto& s : ablations)
    if (!isInsurancePolicy(s)) throw std::invalid_argument("ablation entry '" + s + "' is not an insurance policy");
}

nlohmann::json toJson(const ExperimentConfig& c) {
  return {{"topology", toJson(c.topology)},
          {"workload", toJson(c.workload)},
          {"scheduler", c.scheduler},
          {"epsilon", c.epsilon},
          {"baseline", toJson(c.baseline)},
          {"engine",
           {{"speed_factor", c.engine.speedFactor},
            {"horizon", c.engine.horizon},
            {"failure_downtime", c.engine.failureDowntime},
            {"learn", c.engine.learn},
            {"record_slots", c.engine.recordSlots}}},
          {"seeds", c.seeds},
          {"reference", c.reference},
          {"schedulers", c.schedulers},
          {"ablations", c.ablations},
          {"epsilons", c.epsilons},
          {"lambdas", c.lambdas},
          {"write_traces", c.writeTraces},
          {"workers", c.workers}};
}

namespace {

// Objects must only carry keys the defaults carry; arrays are taken as given.
void rejectUnknownKeys(const nlohmann::json& doc, const nlohmann::json& known, const std::string& prefix) {
  for (const auto& [key, value] : doc.items()) {
    if (!known.contains(key)) throw std::invalid_argument("unknown config key '" + prefix + key + "'");
    if (value.is_object() && known[key].is_object()) rejectUnknownKeys(value, known[key], prefix + key + ".");
  }
}

}  // namespace

ExperimentConfig experimentConfigFromJson(const nlohmann::json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("config must be a JSON object");
  nlohmann::json full = toJson(ExperimentConfig{});
  rejectUnknownKeys(doc, full, "");
  full.merge_patch(doc);

  ExperimentConfig c;
  c.topology = topologySpecFromJson(full["topology"]);
  c.workload = workloadSpecFromJson(full["workload"]);
  c.scheduler = full["scheduler"].get<std::string>();
  c.epsilon = full["epsilon"].get<double>();
  c.baseline = baselineParamsFromJson(full["baseline"]);
  const auto& e = full["engine"];
  c.engine.speedFactor = e.value("speed_factor", c.engine.speedFactor);
  c.engine.horizon = e.value("horizon", c.engine.horizon);
  c.engine.failureDowntime = e.value("failure_downtime", c.engine.failureDowntime);
  c.engine.learn = e.value("learn", c.engine.learn);
  c.engine.recordSlots = e.value("record_slots", c.engine.recordSlots);
  c.seeds = full["seeds"].get<std::vector<std::uint64_t>>();
  c.reference = full["reference"].get<std::string>();
  c.schedulers = full["schedulers"].get<std::vector<std::string>>();
  c.ablations = full["ablations"].get<std::vector<std::string>>();
  c.epsilons = full["epsilons"].get<std::vector<double>>();
  c.lambdas = full["lambdas"].get<std::vector<double>>();
  c.writeTraces = full["write_traces"].get<bool>();
  c.workers = full["workers"].get<std::size_t>();
  c.validate();
  return c;
}

void applyOverride(nlohmann::json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw std::invalid_argument("override must look like key=value: " + assignment);
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  nlohmann::json value = nlohmann::json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  std::string pointer;
  for (std::size_t start = 0; start <= path.size();) {
    const auto dot = std::min(path.find('.', start), path.size());
    if (dot == start) throw std::invalid_argument("empty key segment in override: " + assignment);
    pointer += "/" + path.substr(start, dot - start);
    start = dot + 1;
  }
  doc[nlohmann::json::json_pointer(pointer)] = std::move(value);
}

bool isInsurancePolicy(const std::string& name) { return kPolicies.contains(name); }

std::unique_ptr<Scheduler> makeScheduler(const std::string& name, double epsilon, const BaselineParams& baseline) {
  if (isInsurancePolicy(name)) return std::make_unique<InsuranceScheduler>(InsurancePolicy::named(name, epsilon));
  if (name == "stage-greedy") return std::make_unique<StageGreedyScheduler>();
  if (name == "mantri-like") return std::make_unique<SpeculativeScheduler>(baseline);
  if (name == "dolly-like") return std::make_unique<CloningScheduler>(baseline);
  throw std::invalid_argument("unknown scheduler '" + name + "'");
}

Scenario buildScenario(const ExperimentConfig& config, double lambda, std::uint64_t seed) {
  Topology topo = genTopology(config.topology, seed);
  WorkloadSpec workload = config.workload;
  workload.lambda = lambda;
  Scenario s;
  s.jobs = genWorkload(workload, topo, seed);
  s.clusters = std::move(topo.clusters);
  s.links = std::move(topo.links);
  s.model = config.topology.model;
  return s;
}

RunResult runOne(const ExperimentConfig& config, const RunKey& key, bool keepTrace) {
  const Scenario scenario = buildScenario(config, key.lambda, key.seed);
  auto scheduler = makeScheduler(key.scheduler, key.epsilon, config.baseline);
  EngineConfig engine = config.engine;
  engine.recordSlots = engine.recordSlots && keepTrace;
  SimTrace trace = Simulator(scenario, *scheduler, key.seed, engine).run();

  RunResult r;
  r.key = key;
  r.label = scheduler->name();
  r.flowtime.assign(scenario.jobs.size(), 0.0);
  for (const auto& j : trace.jobs) r.flowtime.at(j.id) = j.flowtime();
  r.meanFlowtime = trace.meanFlowtime();
  for (const auto& j : scenario.jobs) r.tasks += j.tasks.size();
  for (const auto& rec : trace.records) {
    if (rec.kind == TraceRecord::Kind::CopyLaunch) ++r.copies;
    if (rec.kind == TraceRecord::Kind::CopyEnd && rec.end == CopyEnd::KilledFailure) ++r.killedByFailure;
  }
  if (keepTrace) r.trace = std::make_shared<const SimTrace>(std::move(trace));
  return r;
}

std::vector<RunResult> runAll(const ExperimentConfig& config, const std::vector<RunKey>& keys, bool keepTrace) {
  std::vector<RunResult> results(keys.size());
  std::size_t workers = config.workers ? config.workers : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, keys.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failureMutex;
  auto work = [&] {
    for (std::size_t i = next++; i < keys.size(); i = next++) {
      try {
        results[i] = runOne(config, keys[i], keepTrace);
      } catch (...) {
        std::lock_guard lock(failureMutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);
  return results;
}

std::vector<Summary> summarize(const std::vector<RunResult>& results) {
  std::vector<Summary> out;
  std::map<std::tuple<std::string, double, double>, std::vector<const RunResult*>> groups;
  std::vector<std::tuple<std::string, double, double>> order;
  for (const auto& r : results) {
    auto key = std::make_tuple(r.key.scheduler, r.key.epsilon, r.key.lambda);
    auto [it, fresh] = groups.try_emplace(key);
    if (fresh) order.push_back(key);
    it->second.push_back(&r);
  }
  for (const auto& key : order) {
    const auto& runs = groups.at(key);
    Summary s;
    std::tie(s.scheduler, s.epsilon, s.lambda) = key;
    s.seeds = runs.size();
    double sum = 0, sumSq = 0, copies = 0, tasks = 0, killed = 0;
    std::size_t jobs = 0;
    for (const auto* r : runs) {
      sum += r->meanFlowtime;
      sumSq += r->meanFlowtime * r->meanFlowtime;
      copies += static_cast<double>(r->copies);
      tasks += static_cast<double>(r->tasks);
      killed += static_cast<double>(r->killedByFailure);
      jobs = std::max(jobs, r->flowtime.size());
    }
    const double n = static_cast<double>(runs.size());
    s.meanFlowtime = sum / n;
    s.seedStddev = runs.size() > 1 ? std::sqrt(std::max(0.0, (sumSq - sum * sum / n) / (n - 1))) : 0.0;
    s.killedByFailure = killed / n;
    s.perJob.assign(jobs, 0.0);
    std::vector<double> counts(jobs, 0.0);
    for (const auto* r : runs) {
      for (std::size_t j = 0; j < r->flowtime.size(); ++j) {
        s.perJob[j] += r->flowtime[j];
        counts[j] += 1;
      }
    }
    for (std::size_t j = 0; j < jobs; ++j) s.perJob[j] /= counts[j];
    s.medianFlowtime = quantileOf(s.perJob, 0.5);
    s.p90Flowtime = quantileOf(s.perJob, 0.9);
    s.copiesPerTask = tasks > 0 ? copies / tasks : 0.0;
    out.push_back(std::move(s));
  }
  return out;
}

void writeMetricsCsv(const std::filesystem::path& path, const std::vector<Summary>& summaries) {
  auto out = openOut(path);
  out << "scheduler,epsilon,lambda,statistic,value\n";
  for (const auto& s : summaries) {
    const std::string prefix = s.scheduler + "," + formatNumber(s.epsilon) + "," + formatNumber(s.lambda) + ",";
    out << prefix << "mean_flowtime," << formatNumber(s.meanFlowtime) << '\n';
    out << prefix << "seed_stddev," << formatNumber(s.seedStddev) << '\n';
    out << prefix << "median_flowtime," << formatNumber(s.medianFlowtime) << '\n';
    out << prefix << "p90_flowtime," << formatNumber(s.p90Flowtime) << '\n';
    out << prefix << "copies_per_task," << formatNumber(s.copiesPerTask) << '\n';
    out << prefix << "killed_by_failure," << formatNumber(s.killedByFailure) << '\n';
    out << prefix << "seeds," << s.seeds << '\n';
  }
}

void writeCdfCsv(const std::filesystem::path& path, const std::vector<Summary>& summaries) {
  auto out = openOut(path);
  out << "scheduler,epsilon,lambda,flowtime,cdf\n";
  for (const auto& s : summaries) {
    std::vector<double> sorted = s.perJob;
    std::sort(sorted.begin(), sorted.end());
    const double n = static_cast<double>(sorted.size());
    for (std::size_t i = 0; i < sorted.size(); ++i) {
      if (i + 1 < sorted.size() && sorted[i + 1] == sorted[i]) continue;
      out << s.scheduler << ',' << formatNumber(s.epsilon) << ',' << formatNumber(s.lambda) << ','
          << formatNumber(sorted[i]) << ',' << formatNumber(static_cast<double>(i + 1) / n) << '\n';
    }
  }
}

void writeReductionCsv(const std::filesystem::path& path, const std::vector<Summary>& summaries,
                       const std::string& reference) {
  auto out = openOut(path);
  out << "scheduler,epsilon,lambda,job,reference_flowtime,flowtime,reduction\n";
  for (const auto& ref : summaries) {
    if (ref.scheduler != reference) continue;
    for (const auto& s : summaries) {
      if (s.scheduler == reference || s.lambda != ref.lambda) continue;
      for (std::size_t j = 0; j < std::min(s.perJob.size(), ref.perJob.size()); ++j) {
        const double base = ref.perJob[j];
        out << s.scheduler << ',' << formatNumber(s.epsilon) << ',' << formatNumber(s.lambda) << ',' << j << ','
            << formatNumber(base) << ',' << formatNumber(s.perJob[j]) << ','
            << formatNumber(base > 0 ? (base - s.perJob[j]) / base : 0.0) << '\n';
      }
    }
  }
}

void writeRunsCsv(const std::filesystem::path& path, const std::vector<RunResult>& results) {
  auto out = openOut(path);
  out << "scheduler,epsilon,lambda,seed,mean_flowtime,copies,tasks,killed_by_failure\n";
  for (const auto& r : results)
    out << r.key.scheduler << ',' << formatNumber(r.key.epsilon) << ',' << formatNumber(r.key.lambda) << ','
        << r.key.seed << ',' << formatNumber(r.meanFlowtime) << ',' << r.copies << ',' << r.tasks << ',' << r.killedByFailure << '\n';
}

std::vector<Summary> runSimulate(const ExperimentConfig& config, const std::filesystem::path& out) {
  const auto keys = keysFor({config.scheduler}, {config.epsilon}, {config.workload.lambda}, config.seeds);
  return emit(config, out, "simulate", runAll(config, keys, config.writeTraces));
}

std::vector<Summary> runCompare(const ExperimentConfig& config, const std::filesystem::path& out) {
  const auto keys = keysFor(config.schedulers, {config.epsilon}, {config.workload.lambda}, config.seeds);
  return emit(config, out, "compare", runAll(config, keys, config.writeTraces));
}

std::vector<Summary> runAblation(const ExperimentConfig& config, const std::filesystem::path& out) {
  const auto keys = keysFor(config.ablations, {config.epsilon}, {config.workload.lambda}, config.seeds);
  return emit(config, out, "ablate", runAll(config, keys, config.writeTraces));
}

SweepResult runSweep(const ExperimentConfig& config, const std::filesystem::path& out) {
  if (!isInsurancePolicy(config.scheduler)) throw std::invalid_argument("sweep needs an insurance policy scheduler");
  const auto keys = keysFor({config.scheduler}, config.epsilons, config.lambdas, config.seeds);
  const auto results = runAll(config, keys, config.writeTraces);
  SweepResult sweep;
  sweep.lambdas = config.lambdas;
  sweep.epsilons = config.epsilons;
  sweep.summaries = summarize(results);
  for (double lambda : config.lambdas) {
    std::vector<double> row;
    for (double eps : config.epsilons)
      for (const auto& s : sweep.summaries)
        if (s.lambda == lambda && s.epsilon == eps) row.push_back(s.meanFlowtime);
    sweep.argminEpsilon.push_back(config.epsilons[argmin(row)]);
    sweep.mean.push_back(std::move(row));
  }
  if (!out.empty()) {
    nlohmann::json extra;
    extra["argmin_epsilon"] = nlohmann::json::array();
    for (std::size_t i = 0; i < sweep.lambdas.size(); ++i)
      extra["argmin_epsilon"].push_back({{"lambda", sweep.lambdas[i]}, {"epsilon", sweep.argminEpsilon[i]}});
    emit(config, out, "sweep", results, extra);
    auto csv = openOut(out / "sweep.csv");
    csv << "lambda";
    for (double eps : sweep.epsilons) csv << ",eps_" << formatNumber(eps);
    csv << ",argmin_epsilon\n";
    for (std::size_t i = 0; i < sweep.lambdas.size(); ++i) {
      csv << formatNumber(sweep.lambdas[i]);
      for (double m : sweep.mean[i]) csv << ',' << formatNumber(m);
      csv << ',' << formatNumber(sweep.argminEpsilon[i]) << '\n';
    }
  }
  return sweep;
}

}  // namespace geoinsure
