#include "geoinsure/simengine.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <stdexcept>

namespace geoinsure {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Counter-based uniform stream: the same key yields the same draws no matter
// which scheduler is running, so policies face common random numbers.
class KeyedStream {
 public:
  explicit KeyedStream(std::initializer_list<std::uint64_t> key) {
    for (auto k : key) state_ = splitmix64(state_ ^ k);
  }
  double uniform() {
    state_ = splitmix64(state_);
    return static_cast<double>(state_ >> 11) * 0x1.0p-53;
  }

 private:
  std::uint64_t state_ = 0x5bd1e995ULL;
};

constexpr std::uint64_t kFailureStream = 0xfa11;
constexpr std::uint64_t kRateStream = 0x4a7e;

}  // namespace

nlohmann::json toJson(const Job& job) {
  nlohmann::json doc = {{"id", job.id}, {"arrival", job.arrival}};
  auto& tasks = doc["tasks"] = nlohmann::json::array();
  for (const auto& t : job.tasks) {
    nlohmann::json entry = {{"stage", t.stage}, {"op", t.op}, {"datasize", t.datasize}, {"predecessors", t.predecessors}};
    auto& inputs = entry["inputs"] = nlohmann::json::array();
    for (const auto& in : t.inputs) inputs.push_back({{"cluster", in.cluster}, {"size", in.size}});
    tasks.push_back(std::move(entry));
  }
  return doc;
}

Job jobFromJson(const nlohmann::json& doc) {
  Job job;
  job.id = doc.at("id").get<JobId>();
  job.arrival = doc.at("arrival").get<double>();
  for (const auto& entry : doc.at("tasks")) {
    TaskSpec t;
    t.stage = entry.value("stage", 0u);
    t.op = entry.value("op", std::string{});
    t.datasize = entry.at("datasize").get<double>();
    t.predecessors = entry.value("predecessors", std::vector<std::uint32_t>{});
    if (entry.contains("inputs"))
      for (const auto& in : entry["inputs"])
        t.inputs.push_back({in.at("cluster").get<ClusterId>(), in.at("size").get<double>()});
    job.tasks.push_back(std::move(t));
  }
  validateJob(job);
  return job;
}

nlohmann::json toJson(const Scenario& scenario) {
  nlohmann::json doc = scenario.truth().toJson();
  auto& jobs = doc["jobs"] = nlohmann::json::array();
  for (const auto& j : scenario.jobs) jobs.push_back(toJson(j));
  return doc;
}

Scenario scenarioFromJson(const nlohmann::json& doc) {
  const PerformanceModel model = PerformanceModel::fromJson(doc);
  Scenario s{model.clusters(), model.links(), {}, model.config()};
  if (doc.contains("jobs"))
    for (const auto& j : doc["jobs"]) s.jobs.push_back(jobFromJson(j));
  return s;
}

std::string_view toString(CopyEnd end) {
  switch (end) {
    case CopyEnd::Completed: return "completed";
    case CopyEnd::KilledSibling: return "killed-sibling";
    case CopyEnd::KilledFailure: return "killed-failure";
    case CopyEnd::KilledHorizon: return "killed-horizon";
  }
  return "?";
}

double SimTrace::totalFlowtime() const {
  double sum = 0;
  for (const auto& j : jobs) sum += j.flowtime();
  return sum;
}

double SimTrace::meanFlowtime() const { return jobs.empty() ? 0.0 : totalFlowtime() / static_cast<double>(jobs.size()); }

void SimTrace::writeJsonLines(std::ostream& out) const {
  for (const auto& r : records) {
    nlohmann::json line;
    line["t"] = r.time;
    switch (r.kind) {
      case TraceRecord::Kind::JobArrival:
        line["event"] = "job_arrival";
        line["job"] = r.job;
        break;
      case TraceRecord::Kind::CopyLaunch: {
        line["event"] = "copy_launch";
        line["job"] = r.job;
        line["task"] = r.task;
        line["copy"] = r.copy;
        line["cluster"] = r.cluster;
        line["rate"] = r.rate;
        line["expected_finish"] = r.value;
        line["ingress"] = r.reservation.ingress;
        auto& eg = line["egress"] = nlohmann::json::array();
        for (const auto& [src, amount] : r.reservation.egress) eg.push_back({src, amount});
        break;
      }
      case TraceRecord::Kind::CopyEnd:
        line["event"] = "copy_end";
        line["job"] = r.job;
        line["task"] = r.task;
        line["copy"] = r.copy;
        line["cluster"] = r.cluster;
        line["reason"] = toString(r.end);
        break;
      case TraceRecord::Kind::TaskDone:
        line["event"] = "task_done";
        line["job"] = r.job;
        line["task"] = r.task;
        line["cluster"] = r.cluster;
        break;
      case TraceRecord::Kind::JobDone:
        line["event"] = "job_done";
        line["job"] = r.job;
        line["flowtime"] = r.value;
        break;
      case TraceRecord::Kind::ClusterFailure:
        line["event"] = "cluster_failure";
        line["cluster"] = r.cluster;
        break;
      case TraceRecord::Kind::PlanDropped:
        line["event"] = "plan_dropped";
        line["job"] = r.job;
        line["task"] = r.task;
        line["cluster"] = r.cluster;
        line["reason"] = r.note;
        break;
    }
    out << line.dump() << '\n';
  }
}

Simulator::Simulator(const Scenario& scenario, Scheduler& scheduler, std::uint64_t seed, EngineConfig config)
    : scenario_(scenario),
      scheduler_(scheduler),
      seed_(seed),
      config_(config),
      truth_(scenario.truth()),
      planner_(scenario.truth()),
      state_(SystemState::forModel(truth_)) {
  if (!(config_.speedFactor >= 1.0)) throw std::invalid_argument("speed factor must be >= 1");
  trace_.scheduler = scheduler.name();
  trace_.seed = seed;
  for (std::size_t i = 0; i < scenario.jobs.size(); ++i) {
    validateJob(scenario.jobs[i]);
    push(scenario.jobs[i].arrival, EventKind::JobArrival, i);
  }
  arrivalsPending_ = scenario.jobs.size();
}

void Simulator::push(double time, EventKind kind, std::uint64_t payload) {
  events_.push(Event{time, kind, seq_++, payload});
}

bool Simulator::finished() const { return arrivalsPending_ == 0 && state_.jobs.empty(); }

SimTrace Simulator::run() {
  while (!events_.empty() && !finished()) {
    const Event e = events_.top();
    if (e.time > config_.horizon) {
      state_.now = config_.horizon;
      std::vector<CopyId> live;
      for (const auto& [id, c] : state_.copies) live.push_back(id);
      std::sort(live.begin(), live.end());
      for (CopyId id : live) endCopy(id, config_.horizon, CopyEnd::KilledHorizon);
      throw std::runtime_error("simulated time exceeded the horizon of " + std::to_string(config_.horizon) +
                               " slots");
    }
    events_.pop();
    state_.now = e.time;
    handle(e);
  }
  return trace_;
}

void Simulator::drainUntil(double until) {
  while (!events_.empty() && events_.top().time <= until) {
    const Event e = events_.top();
    events_.pop();
    state_.now = e.time;
    handle(e);
  }
  state_.now = std::max(state_.now, until);
}

void Simulator::handle(const Event& e) {
  switch (e.kind) {
    case EventKind::JobArrival:
      admit(scenario_.jobs.at(e.payload));
      break;
    case EventKind::ClusterFailure:
      onClusterFailure(static_cast<ClusterId>(e.payload), e.time);
      break;
    case EventKind::CopyComplete:
      onCopyComplete(e.payload, e.time);
      break;
    case EventKind::SlotTick:
      slotTick(e.time);
      break;
  }
}

void Simulator::admit(const Job& job) {
  state_.admit(job);
  --arrivalsPending_;
  TraceRecord r;
  r.kind = TraceRecord::Kind::JobArrival;
  r.time = state_.now;
  r.job = job.id;
  trace_.records.push_back(std::move(r));
  if (!tickScheduled_) {
    push(std::ceil(state_.now), EventKind::SlotTick, 0);
    tickScheduled_ = true;
  }
}

void Simulator::slotTick(double now) {
  tickScheduled_ = false;
  planner_.advanceTo(now);
  const auto slotIndex = static_cast<std::uint64_t>(std::llround(now));
  for (ClusterId k = 0; k < state_.clusters.size(); ++k) {
    const double p = truth_.cluster(k).failureProbability;
    if (p <= 0 || !state_.clusters[k].up(now)) continue;
    KeyedStream draw{seed_, kFailureStream, k, slotIndex};
    if (draw.uniform() < p) push(now + draw.uniform(), EventKind::ClusterFailure, k);
  }
  if (!state_.jobs.empty()) applyPlan(scheduler_.plan(state_, planner_));
  if (config_.recordSlots) {
    SlotSnapshot snap;
    snap.time = now;
    for (ClusterId k = 0; k < state_.clusters.size(); ++k) {
      snap.busy.push_back(state_.clusters[k].busy);
      snap.ingress.push_back(state_.ledger.ingressUsed(k));
      snap.egress.push_back(state_.ledger.egressUsed(k));
    }
    trace_.slots.push_back(std::move(snap));
  }
  if (!state_.jobs.empty()) {
    push(now + 1, EventKind::SlotTick, 0);
    tickScheduled_ = true;
  }
}

Simulator::Sampled Simulator::sampleRate(TaskRef ref, const TaskProfile& task, ClusterId cluster) {
  const std::uint64_t ordinal = launchCount_[{ref, cluster}]++;
  KeyedStream draw{seed_, kRateStream, ref.job, ref.index, cluster, ordinal};
  Sampled s;
  const double p = truth_.processingDist(cluster, task.op).quantile(draw.uniform());
  std::vector<ClusterId> sources;
  for (const auto& in : task.inputs) sources.push_back(in.cluster);
  std::sort(sources.begin(), sources.end());
  sources.erase(std::unique(sources.begin(), sources.end()), sources.end());
  double transfer = 0;
  for (ClusterId src : sources) {
    const double u = draw.uniform();
    if (src == cluster) {
      transfer += truth_.config().localReadBandwidth;
      continue;
    }
    const double bw = truth_.linkDist(src, cluster).quantile(u);
    transfer += bw;
    s.transfers.push_back({src, cluster, bw * config_.speedFactor});
  }
  s.processing = p * config_.speedFactor;
  const double rate = sources.empty() ? p : std::min(p, transfer / static_cast<double>(sources.size()));
  s.rate = rate * config_.speedFactor;
  return s;
}

std::vector<CopyId> Simulator::applyPlan(const InsurancePlan& plan) {
  std::vector<CopyId> launched;
  const double now = state_.now;
  for (const auto& entry : plan.entries) {
    for (int c = 0; c < entry.copies; ++c) {
      auto drop = [&](std::string why) {
        TraceRecord r;
        r.kind = TraceRecord::Kind::PlanDropped;
        r.time = now;
        r.job = entry.task.job;
        r.task = entry.task.index;
        r.cluster = entry.cluster;
        r.note = std::move(why);
        trace_.records.push_back(std::move(r));
      };
      auto jobIt = state_.jobs.find(entry.task.job);
      if (jobIt == state_.jobs.end() || entry.task.index >= jobIt->second.tasks.size()) {
        drop("unknown task");
        continue;
      }
      JobRuntime& job = jobIt->second;
      TaskRuntime& task = job.tasks[entry.task.index];
      if (task.state != TaskState::Waiting && task.state != TaskState::Running) {
        drop("task not ready");
        continue;
      }
      if (entry.cluster >= state_.clusters.size()) {
        drop("unknown cluster");
        continue;
      }
      ClusterRuntime& cluster = state_.clusters[entry.cluster];
      if (!cluster.up(now)) {
        drop("cluster down");
        continue;
      }
      if (cluster.free(now) <= 0) {
        drop("no slot");
        continue;
      }
      const GateDemand demand = planner_.gateDemand(task.profile, entry.cluster);
      if (state_.ledger.check(demand) != GateCheck::Ok) {
        drop("gate");
        continue;
      }

      const CopyId id = nextCopy_++;
      Sampled sample = sampleRate(entry.task, task.profile, entry.cluster);
      const double perSlot = sample.rate * truth_.config().slotSeconds;
      CopyRuntime copy;
      copy.id = id;
      copy.task = entry.task;
      copy.cluster = entry.cluster;
      copy.start = now;
      copy.rate = perSlot;
      copy.finish = now + task.profile.datasize / perSlot;
      copy.speculative = entry.speculative;

      ++cluster.busy;
      state_.ledger.reserve(id, demand);
      task.copies.push_back(id);
      if (task.state == TaskState::Waiting) {
        task.state = TaskState::Running;
        task.start = now;
      }
      if (entry.speculative) task.speculated = true;
      ++job.liveCopies;

      TraceRecord r;
      r.kind = TraceRecord::Kind::CopyLaunch;
      r.time = now;
      r.job = entry.task.job;
      r.task = entry.task.index;
      r.copy = id;
      r.cluster = entry.cluster;
      r.rate = perSlot;
      r.value = copy.finish;
      r.reservation = demand;
      trace_.records.push_back(std::move(r));

      push(copy.finish, EventKind::CopyComplete, id);
      state_.copies.emplace(id, copy);
      samples_.emplace(id, std::move(sample));
      launched.push_back(id);
    }
  }
  return launched;
}

void Simulator::endCopy(CopyId id, double time, CopyEnd why) {
  auto it = state_.copies.find(id);
  if (it == state_.copies.end()) throw std::logic_error("copy already terminated");
  const CopyRuntime copy = it->second;
  state_.copies.erase(it);
  samples_.erase(id);
  --state_.clusters.at(copy.cluster).busy;
  state_.ledger.release(id);
  JobRuntime& job = state_.jobs.at(copy.task.job);
  TaskRuntime& task = job.tasks.at(copy.task.index);
  std::erase(task.copies, id);
  --job.liveCopies;

  TraceRecord r;
  r.kind = TraceRecord::Kind::CopyEnd;
  r.time = time;
  r.job = copy.task.job;
  r.task = copy.task.index;
  r.copy = id;
  r.cluster = copy.cluster;
  r.end = why;
  trace_.records.push_back(std::move(r));
}

void Simulator::onClusterFailure(ClusterId cluster, double time) {
  TraceRecord r;
  r.kind = TraceRecord::Kind::ClusterFailure;
  r.time = time;
  r.cluster = cluster;
  trace_.records.push_back(std::move(r));
  auto& c = state_.clusters.at(cluster);
  c.downUntil = std::max(c.downUntil, time + config_.failureDowntime);

  std::vector<CopyId> victims;
  for (const auto& [id, copy] : state_.copies)
    if (copy.cluster == cluster) victims.push_back(id);
  std::sort(victims.begin(), victims.end());
  for (CopyId id : victims) {
    const TaskRef ref = state_.copies.at(id).task;
    endCopy(id, time, CopyEnd::KilledFailure);
    TaskRuntime& task = state_.task(ref);
    if (task.copies.empty()) {
      task.state = TaskState::Waiting;  // restarts from zero progress
      task.start = -1;
    }
  }
}

void Simulator::onCopyComplete(CopyId id, double time) {
  auto it = state_.copies.find(id);
  if (it == state_.copies.end()) return;  // killed earlier
  const CopyRuntime copy = it->second;
  if (config_.learn) {
    const Sampled& s = samples_.at(id);
    ExecutionRecord record;
    record.cluster = copy.cluster;
    record.op = state_.task(copy.task).profile.op;
    record.processingSpeed = s.processing;
    record.transfers = s.transfers;
    record.timestamp = time;
    planner_.ingest(record);
  }
  endCopy(id, time, CopyEnd::Completed);
  const std::vector<CopyId> siblings = state_.task(copy.task).copies;
  for (CopyId sibling : siblings) endCopy(sibling, time, CopyEnd::KilledSibling);
  completeTask(copy.task, copy.cluster, time);
}

void Simulator::completeTask(TaskRef ref, ClusterId where, double time) {
  JobRuntime& job = state_.jobs.at(ref.job);
  TaskRuntime& task = job.tasks.at(ref.index);
  task.state = TaskState::Done;
  task.completion = time;
  task.output = where;
  ++job.doneTasks;

  TraceRecord r;
  r.kind = TraceRecord::Kind::TaskDone;
  r.time = time;
  r.job = ref.job;
  r.task = ref.index;
  r.cluster = where;
  trace_.records.push_back(std::move(r));

  for (std::uint32_t s : task.successors) {
    TaskRuntime& succ = job.tasks[s];
    const auto& spec = job.spec.tasks[s];
    succ.profile.inputs.push_back({where, spec.datasize / static_cast<double>(spec.predecessors.size())});
    if (--succ.pendingPredecessors == 0) succ.state = TaskState::Waiting;
  }

  if (job.done()) {
    job.completion = time;
    TraceRecord jr;
    jr.kind = TraceRecord::Kind::JobDone;
    jr.time = time;
    jr.job = ref.job;
    jr.value = time - job.spec.arrival;
    trace_.records.push_back(std::move(jr));
    trace_.jobs.push_back(JobOutcome{ref.job, job.spec.arrival, time});
    state_.jobs.erase(ref.job);
  }
}

SimTrace simulate(const Scenario& scenario, Scheduler& scheduler, std::uint64_t seed, EngineConfig config) {
  return Simulator(scenario, scheduler, seed, config).run();
}

}  // namespace geoinsure
