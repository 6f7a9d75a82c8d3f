#include "geoinsure/verify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "geoinsure/experiment.hpp"
#include "geoinsure/insurer.hpp"

namespace geoinsure {

// ---------------------------------------------------------------------------
// r(n)/n monotonicity

PerCopyRateReport checkPerCopyRate(std::span<const EmpiricalDistribution> dists, int maxN, double tolerance,
                                     std::size_t cap) {
  if (maxN < 1 || static_cast<std::size_t>(maxN) > dists.size())
    throw std::invalid_argument("maxN must lie in [1, number of distributions]");
  for (std::size_t i = 1; i < dists.size(); ++i)
    if (expectation(dists[i]) > expectation(dists[i - 1]) + tolerance)
      throw std::invalid_argument("expectations must be non-increasing along the sequence");

  PerCopyRateReport report;
  EmpiricalDistribution running = dists[0];
  for (int n = 1; n <= maxN; ++n) {
    if (n > 1) running = maxCompose(running, dists[static_cast<std::size_t>(n - 1)], cap);
    const double r = expectation(running);
    report.r.push_back(r);
    report.perCopy.push_back(r / n);
    if (n > 1 && report.perCopy.back() > report.perCopy[report.perCopy.size() - 2] + tolerance && report.pass) {
      report.pass = false;
      report.firstViolation = n;
    }
  }
  return report;
}

std::vector<EmpiricalDistribution> randomSortedSequence(std::uint64_t seed, std::size_t count, int maxSupport) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> sizes(1, maxSupport);
  std::uniform_real_distribution<double> values(1.0, 100.0);
  std::uniform_real_distribution<double> weights(0.05, 1.0);
  std::vector<EmpiricalDistribution> out;
  for (std::size_t i = 0; i < count; ++i) {
    std::vector<EmpiricalDistribution::Atom> atoms;
    const int n = sizes(rng);
    for (int k = 0; k < n; ++k) atoms.emplace_back(values(rng), weights(rng));
    out.push_back(EmpiricalDistribution::fromAtoms(std::move(atoms)));
  }
  std::stable_sort(out.begin(), out.end(),
                   [](const auto& a, const auto& b) { return expectation(a) > expectation(b); });
  return out;
}

// ---------------------------------------------------------------------------
// Trace audit

std::string_view toString(Constraint c) {
  switch (c) {
    case Constraint::EveryTaskCopied: return "every-task-copied";
    case Constraint::StartAfterArrival: return "start-after-arrival";
    case Constraint::Precedence: return "precedence";
    case Constraint::SlotCapacity: return "slot-capacity";
    case Constraint::IngressCapacity: return "ingress-capacity";
    case Constraint::EgressCapacity: return "egress-capacity";
    case Constraint::JobCompletion: return "job-completion";
  }
  return "unknown";
}

int constraintId(Constraint c) {
  switch (c) {
    case Constraint::EveryTaskCopied: return 3;
    case Constraint::StartAfterArrival: return 4;
    case Constraint::Precedence: return 8;
    case Constraint::SlotCapacity: return 9;
    case Constraint::IngressCapacity: return 10;
    case Constraint::EgressCapacity: return 11;
    case Constraint::JobCompletion: return 12;
  }
  return 0;
}

nlohmann::json toJson(const Violation& v) {
  nlohmann::json doc{{"constraint", toString(v.constraint)},
                     {"id", constraintId(v.constraint)},
                     {"slot", v.slot},
                     {"magnitude", v.magnitude}};
  if (v.cluster) doc["cluster"] = *v.cluster;
  if (v.task) doc["task"] = {{"job", v.task->job}, {"index", v.task->index}};
  return doc;
}

namespace {

constexpr double kTimeTolerance = 1e-9;

std::int64_t slotOf(double time) { return static_cast<std::int64_t>(std::floor(time + kTimeTolerance)); }

struct LiveCopy {
  TaskRef task;
  ClusterId cluster;
  GateDemand reservation;
};

}  // namespace

std::vector<Violation> auditConstraints(const SimTrace& trace, const Scenario& scenario) {
  const std::size_t clusters = scenario.clusters.size();
  std::map<JobId, const Job*> jobs;
  for (const Job& job : scenario.jobs) jobs.emplace(job.id, &job);

  auto jobAt = [&](JobId id) -> const Job& {
    auto it = jobs.find(id);
    if (it == jobs.end()) throw std::invalid_argument("trace names unknown job " + std::to_string(id));
    return *it->second;
  };
  auto checkTask = [&](JobId job, std::uint32_t task) {
    if (task >= jobAt(job).tasks.size()) throw std::invalid_argument("trace names unknown task");
  };
  auto checkCluster = [&](ClusterId k) {
    if (k >= clusters) throw std::invalid_argument("trace names unknown cluster " + std::to_string(k));
  };

  std::vector<Violation> out;
  std::map<CopyId, LiveCopy> live;
  std::vector<int> busy(clusters, 0);
  std::vector<double> ingress(clusters, 0), egress(clusters, 0);
  std::map<TaskRef, int> launches;
  std::map<TaskRef, double> taskDone;
  std::map<TaskRef, double> completedCopy;  // last completion of a copy of the task
  std::map<JobId, double> jobDone;

  for (const TraceRecord& r : trace.records) {
    switch (r.kind) {
      case TraceRecord::Kind::CopyLaunch: {
        const Job& job = jobAt(r.job);
        checkTask(r.job, r.task);
        checkCluster(r.cluster);
        if (live.contains(r.copy)) throw std::invalid_argument("copy launched twice");
        const TaskRef ref{r.job, r.task};
        const std::int64_t slot = slotOf(r.time);
        ++launches[ref];
        if (r.time < job.arrival - kTimeTolerance)
          out.push_back({Constraint::StartAfterArrival, slot, r.cluster, ref, job.arrival - r.time});
        for (std::uint32_t p : job.tasks[r.task].predecessors) {
          auto it = taskDone.find({r.job, p});
          if (it == taskDone.end())
            out.push_back({Constraint::Precedence, slot, r.cluster, ref, std::numeric_limits<double>::infinity()});
          else if (r.time < it->second - kTimeTolerance)
            out.push_back({Constraint::Precedence, slot, r.cluster, ref, it->second - r.time});
        }
        for (const auto& [source, amount] : r.reservation.egress) checkCluster(source);
        checkCluster(r.reservation.destination);

        live.emplace(r.copy, LiveCopy{ref, r.cluster, r.reservation});
        ++busy[r.cluster];
        ingress[r.reservation.destination] += r.reservation.ingress;
        for (const auto& [source, amount] : r.reservation.egress) egress[source] += amount;

        const int slots = scenario.clusters[r.cluster].slots;
        if (busy[r.cluster] > slots)
          out.push_back({Constraint::SlotCapacity, slot, r.cluster, ref, static_cast<double>(busy[r.cluster] - slots)});
        const ClusterId d = r.reservation.destination;
        if (!withinCap(ingress[d], scenario.clusters[d].ingressCap))
          out.push_back({Constraint::IngressCapacity, slot, d, ref, ingress[d] - scenario.clusters[d].ingressCap});
        for (const auto& [source, amount] : r.reservation.egress)
          if (!withinCap(egress[source], scenario.clusters[source].egressCap))
            out.push_back({Constraint::EgressCapacity, slot, source, ref,
                           egress[source] - scenario.clusters[source].egressCap});
        break;
      }
      case TraceRecord::Kind::CopyEnd: {
        auto it = live.find(r.copy);
        if (it == live.end()) throw std::invalid_argument("copy " + std::to_string(r.copy) + " ended without launch");
        const LiveCopy& c = it->second;
        --busy[c.cluster];
        ingress[c.reservation.destination] -= c.reservation.ingress;
        for (const auto& [source, amount] : c.reservation.egress) egress[source] -= amount;
        if (r.end == CopyEnd::Completed) completedCopy[c.task] = r.time;
        live.erase(it);
        break;
      }
      case TraceRecord::Kind::TaskDone: {
        checkTask(r.job, r.task);
        const TaskRef ref{r.job, r.task};
        if (taskDone.contains(ref)) throw std::invalid_argument("task completed twice");
        taskDone.emplace(ref, r.time);
        auto it = completedCopy.find(ref);
        if (!launches.contains(ref) || it == completedCopy.end() || std::abs(it->second - r.time) > kTimeTolerance)
          out.push_back({Constraint::EveryTaskCopied, slotOf(r.time), std::nullopt, ref, 1});
        break;
      }
      case TraceRecord::Kind::JobDone: {
        jobAt(r.job);
        if (jobDone.contains(r.job)) throw std::invalid_argument("job completed twice");
        jobDone.emplace(r.job, r.time);
        break;
      }
      case TraceRecord::Kind::ClusterFailure:
        checkCluster(r.cluster);
        break;
      case TraceRecord::Kind::JobArrival:
        jobAt(r.job);
        break;
      case TraceRecord::Kind::PlanDropped:
        break;
    }
  }

  for (const Job& job : scenario.jobs) {
    double last = -std::numeric_limits<double>::infinity();
    for (std::uint32_t i = 0; i < job.tasks.size(); ++i) {
      auto it = taskDone.find({job.id, i});
      if (it == taskDone.end()) {
        out.push_back({Constraint::EveryTaskCopied, slotOf(job.arrival), std::nullopt, TaskRef{job.id, i},
                       launches.contains({job.id, i}) ? 0.0 : 1.0});
        continue;
      }
      last = std::max(last, it->second);
    }
    auto done = jobDone.find(job.id);
    if (done == jobDone.end()) {
      out.push_back({Constraint::JobCompletion, slotOf(job.arrival), std::nullopt, std::nullopt,
                     std::numeric_limits<double>::infinity()});
    } else if (std::abs(done->second - last) > kTimeTolerance) {
      out.push_back({Constraint::JobCompletion, slotOf(done->second), std::nullopt, std::nullopt,
                     std::abs(done->second - last)});
    }
  }
  for (const JobOutcome& j : trace.jobs) {
    auto done = jobDone.find(j.id);
    if (done == jobDone.end() || std::abs(done->second - j.completion) > kTimeTolerance ||
        std::abs(j.arrival - jobAt(j.id).arrival) > kTimeTolerance)
      out.push_back({Constraint::JobCompletion, slotOf(j.completion), std::nullopt, std::nullopt,
                     done == jobDone.end() ? std::numeric_limits<double>::infinity()
                                           : std::abs(done->second - j.completion)});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Tiny instances

void TinyInstance::validate() const {
  if (clusters.empty() || clusters.size() > 3) throw std::invalid_argument("tiny instance needs 1 to 3 clusters");
  if (jobs.empty() || jobs.size() > 3) throw std::invalid_argument("tiny instance needs 1 to 3 jobs");
  for (const auto& c : clusters)
    if (!(c.rate > 0) || c.slots < 1) throw std::invalid_argument("tiny cluster needs a positive rate and slots");
  for (const auto& j : jobs) {
    if (j.arrival < 0) throw std::invalid_argument("tiny job arrival must be non-negative");
    if (j.datasizes.empty() || j.datasizes.size() > 2) throw std::invalid_argument("tiny job needs 1 or 2 tasks");
    if (j.chain && j.datasizes.size() != 2) throw std::invalid_argument("a chain needs two tasks");
    for (int d : j.datasizes)
      if (d < 1) throw std::invalid_argument("tiny datasizes must be positive integers");
  }
}

Scenario TinyInstance::toScenario() const {
  validate();
  constexpr double kUnbounded = 1e9;
  Scenario s;
  for (std::size_t k = 0; k < clusters.size(); ++k) {
    ClusterModel c;
    c.id = static_cast<ClusterId>(k);
    c.slots = clusters[k].slots;
    c.ingressCap = kUnbounded;
    c.egressCap = kUnbounded;
    c.processing = EmpiricalDistribution::pointMass(clusters[k].rate);
    s.clusters.push_back(std::move(c));
  }
  s.links.fallback = EmpiricalDistribution::pointMass(kUnbounded);
  s.model.localReadBandwidth = kUnbounded;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    Job job;
    job.id = static_cast<JobId>(i);
    job.arrival = jobs[i].arrival;
    for (std::size_t t = 0; t < jobs[i].datasizes.size(); ++t) {
      TaskSpec task;
      task.op = "task";
      task.datasize = jobs[i].datasizes[t];
      if (jobs[i].chain && t == 1) {
        task.stage = 1;
        task.predecessors = {0};
      }
      job.tasks.push_back(std::move(task));
    }
    s.jobs.push_back(std::move(job));
  }
  return s;
}

nlohmann::json toJson(const TinyInstance& instance) {
  nlohmann::json doc;
  doc["clusters"] = nlohmann::json::array();
  for (const auto& c : instance.clusters) doc["clusters"].push_back({{"rate", c.rate}, {"slots", c.slots}});
  doc["jobs"] = nlohmann::json::array();
  for (const auto& j : instance.jobs)
    doc["jobs"].push_back({{"arrival", j.arrival}, {"datasizes", j.datasizes}, {"chain", j.chain}});
  return doc;
}

TinyInstance tinyInstanceFromJson(const nlohmann::json& doc) {
  TinyInstance instance;
  for (const auto& c : doc.at("clusters")) instance.clusters.push_back({c.at("rate").get<double>(), c.value("slots", 1)});
  for (const auto& j : doc.at("jobs"))
    instance.jobs.push_back({j.value("arrival", 0), j.at("datasizes").get<std::vector<int>>(), j.value("chain", false)});
  instance.validate();
  return instance;
}

TinyInstance randomTinyInstance(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto pick = [&](int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng); };
  TinyInstance instance;
  const int clusters = pick(1, 3);
  for (int k = 0; k < clusters; ++k) instance.clusters.push_back({static_cast<double>(pick(1, 3)), pick(1, 2)});
  const int jobs = pick(1, 3);
  for (int j = 0; j < jobs; ++j) {
    TinyJob job;
    job.arrival = pick(0, 3);
    const int tasks = pick(1, 2);
    for (int t = 0; t < tasks; ++t) job.datasizes.push_back(pick(1, 6));
    job.chain = tasks == 2 && pick(0, 1) == 1;
    instance.jobs.push_back(std::move(job));
  }
  return instance;
}

// ---------------------------------------------------------------------------
// Exhaustive optimum

namespace {

class BruteForce {
 public:
  BruteForce(const TinyInstance& instance, BruteForceLimits limits) : instance_(instance), limits_(limits) {
    instance.validate();
    if (limits.copiesPerTask < 1) throw std::invalid_argument("copies per task must be at least 1");
    double slowest = std::numeric_limits<double>::infinity();
    for (const auto& c : instance.clusters) slowest = std::min(slowest, c.rate);
    int latest = 0;
    for (std::size_t j = 0; j < instance.jobs.size(); ++j) {
      const TinyJob& job = instance.jobs[j];
      latest = std::max(latest, job.arrival);
      for (std::size_t t = 0; t < job.datasizes.size(); ++t) {
        const int pred = job.chain && t == 1 ? static_cast<int>(tasks_.size()) - 1 : -1;
        tasks_.push_back({static_cast<int>(j), static_cast<double>(job.datasizes[t]), pred, static_cast<int>(t)});
        horizon_ += static_cast<int>(std::ceil(job.datasizes[t] / slowest - 1e-12));
      }
    }
    horizon_ += latest;
  }

  OptimalSchedule solve() {
    State root;
    root.done.assign(tasks_.size(), false);
    root.running.assign(tasks_.size(), {});
    const Value best = value(0, root);
    if (!std::isfinite(best.cost)) throw std::logic_error("no feasible schedule within the horizon");

    OptimalSchedule out;
    out.totalFlowtime = best.cost;
    out.statesExplored = memo_.size();
    out.flowtime.assign(instance_.jobs.size(), 0.0);
    replay(root, out);
    return out;
  }

 private:
  struct Task {
    int job;
    double datasize;
    int pred;  // flat index or -1
    int index;
  };
  struct Copy {
    int cluster;
    int start;
    double finish;
    auto operator<=>(const Copy&) const = default;
  };
  struct State {
    std::vector<bool> done;
    std::vector<std::vector<Copy>> running;
  };
  struct Value {
    double cost = 0;
    int copies = 0;
    std::vector<int> choice;  // per task: cluster launched now or -1
  };

  static bool better(double cost, int copies, const Value& than) {
    if (cost < than.cost - 1e-9) return true;
    if (cost > than.cost + 1e-9) return false;
    return copies < than.copies;
  }

  std::string key(int t, const State& s) const {
    std::ostringstream out;
    out.precision(17);
    out << t;
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
      out << '|' << (s.done[i] ? 'd' : 'w');
      for (const Copy& c : s.running[i]) out << ',' << c.cluster << ':' << c.finish;
    }
    return out.str();
  }

  bool ready(int t, const State& s, std::size_t i) const {
    const Task& task = tasks_[i];
    return !s.done[i] && instance_.jobs[static_cast<std::size_t>(task.job)].arrival <= t &&
           (task.pred < 0 || s.done[static_cast<std::size_t>(task.pred)]) &&
           s.running[i].size() < static_cast<std::size_t>(limits_.copiesPerTask);
  }

  static double earliest(const std::vector<Copy>& copies) {
    double f = std::numeric_limits<double>::infinity();
    for (const Copy& c : copies) f = std::min(f, c.finish);
    return f;
  }

  /// Applies `choice` at time t and advances to t+1; returns the flowtime of
  /// jobs finishing in between.
  double step(int t, const State& s, const std::vector<int>& choice, State& next,
              std::vector<WitnessCopy>* witness = nullptr, std::vector<double>* flowtime = nullptr) const {
    next = s;
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
      if (choice[i] < 0) continue;
      const double rate = instance_.clusters[static_cast<std::size_t>(choice[i])].rate;
      next.running[i].push_back({choice[i], t, t + tasks_[i].datasize / rate});
      std::sort(next.running[i].begin(), next.running[i].end());
    }
    double cost = 0;
    std::vector<double> finishedAt(tasks_.size(), -1);
    for (std::size_t i = 0; i < tasks_.size(); ++i) {
      if (next.running[i].empty()) continue;
      const double f = earliest(next.running[i]);
      if (f > t + 1 + 1e-12) continue;
      finishedAt[i] = f;
      if (witness)
        for (const Copy& c : next.running[i])
          witness->push_back({TaskRef{static_cast<JobId>(tasks_[i].job), static_cast<std::uint32_t>(tasks_[i].index)},
                              static_cast<ClusterId>(c.cluster), c.start, std::min(c.finish, f)});
      next.running[i].clear();
      next.done[i] = true;
    }
    for (std::size_t j = 0; j < instance_.jobs.size(); ++j) {
      bool finishedNow = false, complete = true;
      double last = 0;
      for (std::size_t i = 0; i < tasks_.size(); ++i) {
        if (tasks_[i].job != static_cast<int>(j)) continue;
        complete = complete && next.done[i];
        if (finishedAt[i] >= 0) finishedNow = true;
        if (finishedAt[i] >= 0) last = std::max(last, finishedAt[i]);
      }
      if (!complete || !finishedNow) continue;
      const double f = last - instance_.jobs[j].arrival;
      cost += f;
      if (flowtime) (*flowtime)[j] = f;
    }
    return cost;
  }

  template <typename Visit>
  void enumerate(int t, const State& s, Visit&& visit) const {
    std::vector<int> freeSlots;
    for (const auto& c : instance_.clusters) freeSlots.push_back(c.slots);
    for (const auto& copies : s.running)
      for (const Copy& c : copies) --freeSlots[static_cast<std::size_t>(c.cluster)];
    std::vector<int> choice(tasks_.size(), -1);
    std::vector<std::size_t> candidates;
    for (std::size_t i = 0; i < tasks_.size(); ++i)
      if (ready(t, s, i)) candidates.push_back(i);

    auto rec = [&](auto&& self, std::size_t pos) -> void {
      if (pos == candidates.size()) {
        visit(choice);
        return;
      }
      const std::size_t i = candidates[pos];
      self(self, pos + 1);
      const double current = earliest(s.running[i]);
      for (std::size_t k = 0; k < instance_.clusters.size(); ++k) {
        if (freeSlots[k] == 0) continue;
        // A copy that cannot finish first only holds a slot.
        if (t + tasks_[i].datasize / instance_.clusters[k].rate >= current - 1e-12) continue;
        --freeSlots[k];
        choice[i] = static_cast<int>(k);
        self(self, pos + 1);
        choice[i] = -1;
        ++freeSlots[k];
      }
    };
    rec(rec, 0);
  }

  Value value(int t, const State& s) {
    if (std::all_of(s.done.begin(), s.done.end(), [](bool d) { return d; })) return {};
    if (t > horizon_) return {std::numeric_limits<double>::infinity(), 0, {}};
    std::string k = key(t, s);
    if (auto it = memo_.find(k); it != memo_.end()) return it->second;
    if (memo_.size() >= limits_.maxStates)
      throw std::length_error("brute force exceeded " + std::to_string(limits_.maxStates) + " states");

    Value best{std::numeric_limits<double>::infinity(), std::numeric_limits<int>::max(), {}};
    State next;
    enumerate(t, s, [&](const std::vector<int>& choice) {
      const double now = step(t, s, choice, next);
      const Value rest = value(t + 1, next);
      const int launched = static_cast<int>(std::count_if(choice.begin(), choice.end(), [](int c) { return c >= 0; }));
      if (better(now + rest.cost, launched + rest.copies, best)) best = {now + rest.cost, launched + rest.copies, choice};
    });
    return memo_.emplace(std::move(k), std::move(best)).first->second;
  }

  void replay(State s, OptimalSchedule& out) {
    std::vector<WitnessCopy> witness;
    for (int t = 0; !std::all_of(s.done.begin(), s.done.end(), [](bool d) { return d; }); ++t) {
      const Value& v = memo_.at(key(t, s));
      State next;
      step(t, s, v.choice, next, &witness, &out.flowtime);
      s = std::move(next);
    }
    std::map<TaskRef, int> perTask;
    for (const auto& c : witness) out.maxCopies = std::max(out.maxCopies, ++perTask[c.task]);
    std::sort(witness.begin(), witness.end(), [](const WitnessCopy& a, const WitnessCopy& b) {
      return std::tie(a.start, a.task, a.cluster) < std::tie(b.start, b.task, b.cluster);
    });
    out.copies = std::move(witness);
  }

  const TinyInstance& instance_;
  BruteForceLimits limits_;
  std::vector<Task> tasks_;
  int horizon_ = 0;
  std::unordered_map<std::string, Value> memo_;
};

}  // namespace

OptimalSchedule bruteForceOptimal(const TinyInstance& instance, BruteForceLimits limits) {
  return BruteForce(instance, limits).solve();
}

// ---------------------------------------------------------------------------
// Competitive ratio

std::optional<CompetitiveBound> CompetitiveBound::make(double epsilon, double alpha, int copies) {
  if (!(epsilon > 0 && epsilon < 1)) throw std::invalid_argument("epsilon must lie in (0,1)");
  if (copies < 1) throw std::invalid_argument("copy count must be at least 1");
  const double denominator = alpha * epsilon * epsilon + (alpha - 1) * epsilon;
  if (!(denominator > 0)) return std::nullopt;
  return CompetitiveBound{epsilon, alpha, copies, (alpha * (1 + epsilon) + copies) / denominator};
}

CompetitiveReport competitiveCheck(std::span<const TinyInstance> instances, std::span<const double> epsilons,
                                   BruteForceLimits limits) {
  CompetitiveReport report;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    const TinyInstance& instance = instances[i];
    const OptimalSchedule opt = bruteForceOptimal(instance, limits);
    const Scenario scenario = instance.toScenario();
    double fastest = 0;
    for (const auto& c : instance.clusters) fastest = std::max(fastest, c.rate);

    for (double eps : epsilons) {
      CompetitiveEntry e;
      e.instance = i;
      e.epsilon = eps;
      e.optimal = opt.totalFlowtime;
      InsuranceScheduler scheduler(InsurancePolicy::named("Eff-Reli", eps));
      EngineConfig engine;
      engine.speedFactor = 1 + eps;
      engine.learn = false;
      engine.recordSlots = false;
      const SimTrace trace = Simulator(scenario, scheduler, 1, engine).run();
      e.online = trace.totalFlowtime();
      e.ratio = e.optimal > 0 ? e.online / e.optimal : 1.0;

      double alpha = 1;
      for (const auto& r : trace.records)
        if (r.kind == TraceRecord::Kind::CopyLaunch)
          alpha = std::min(alpha, r.rate / (engine.speedFactor * scenario.model.slotSeconds) / fastest);
      e.bound = CompetitiveBound::make(eps, alpha, std::max(1, opt.maxCopies));
      if (!e.bound) {
        e.note = "skipped: alpha(1+epsilon) <= 1 leaves the bound undefined";
        ++report.skipped;
      } else {
        e.pass = e.online <= e.bound->value * e.optimal * (1 + 1e-12) + 1e-9;
        report.pass = report.pass && e.pass;
        ++report.checked;
      }
      report.entries.push_back(std::move(e));
    }
  }
  return report;
}

nlohmann::json toJson(const CompetitiveReport& report) {
  nlohmann::json doc{{"checked", report.checked}, {"skipped", report.skipped}, {"pass", report.pass}};
  doc["note"] =
      "Empirical evidence only: deterministic tiny instances approximate the concave-rate adversary of the analysis.";
  doc["entries"] = nlohmann::json::array();
  for (const auto& e : report.entries) {
    nlohmann::json entry{{"instance", e.instance}, {"epsilon", e.epsilon}, {"optimal", e.optimal},
                         {"online", e.online},     {"ratio", e.ratio},     {"pass", e.pass}};
    if (e.bound) {
      entry["alpha"] = e.bound->alpha;
      entry["copies"] = e.bound->copies;
      entry["bound"] = e.bound->value;
    }
    if (!e.note.empty()) entry["note"] = e.note;
    doc["entries"].push_back(std::move(entry));
  }
  return doc;
}

// ---------------------------------------------------------------------------
// Suite

VerifyReport runVerifySuite(const VerifyConfig& config) {
  VerifyReport report;
  for (std::size_t i = 0; i < config.perCopySequences; ++i) {
    const auto seq = randomSortedSequence(config.seed * 1'000'003 + i, static_cast<std::size_t>(config.perCopyMaxN));
    report.perCopyPass = checkPerCopyRate(seq, config.perCopyMaxN).pass && report.perCopyPass;
    ++report.perCopyChecked;
  }

  ExperimentConfig experiment;
  experiment.workload.jobs = config.auditJobs;
  std::vector<std::string> schedulers = experiment.schedulers;
  for (const auto& a : experiment.ablations)
    if (std::find(schedulers.begin(), schedulers.end(), a) == schedulers.end()) schedulers.push_back(a);
  for (const auto& name : schedulers) {
    for (std::uint64_t seed : config.auditSeeds) {
      const RunKey key{name, experiment.epsilon, experiment.workload.lambda, seed};
      const RunResult run = runOne(experiment, key, true);
      const Scenario scenario = buildScenario(experiment, key.lambda, seed);
      for (const auto& v : auditConstraints(*run.trace, scenario))
        report.violations.emplace_back(run.label + "/seed" + std::to_string(seed), v);
      ++report.auditRuns;
    }
  }

  std::vector<TinyInstance> instances;
  for (std::size_t i = 0; i < config.tinyInstances; ++i) instances.push_back(randomTinyInstance(config.seed * 7919 + i));
  report.competitive = competitiveCheck(instances, config.epsilons);
  return report;
}

nlohmann::json VerifyReport::toJson() const {
  nlohmann::json doc;
  doc["pass"] = pass();
  doc["per_copy_rate"] = {{"sequences", perCopyChecked}, {"pass", perCopyPass}};
  doc["audit"] = {{"runs", auditRuns}, {"violations", nlohmann::json::array()}};
  for (const auto& [run, v] : violations) {
    auto entry = geoinsure::toJson(v);
    entry["run"] = run;
    doc["audit"]["violations"].push_back(std::move(entry));
  }
  doc["competitive"] = geoinsure::toJson(competitive);
  return doc;
}

std::string VerifyReport::toText() const {
  std::ostringstream out;
  out << "r(n)/n monotonicity: " << (perCopyPass ? "PASS" : "FAIL") << " (" << perCopyChecked
      << " sequences)\n";
  out << "constraint audit:    " << (violations.empty() ? "PASS" : "FAIL") << " (" << auditRuns << " runs, "
      << violations.size() << " violations)\n";
  for (const auto& [run, v] : violations)
    out << "  " << run << ": " << toString(v.constraint) << " slot " << v.slot << " magnitude " << v.magnitude << "\n";
  out << "competitive ratio:   " << (competitive.pass ? "PASS" : "FAIL") << " (" << competitive.checked
      << " checked, " << competitive.skipped << " skipped)\n";
  double worst = 0;
  for (const auto& e : competitive.entries)
    if (e.bound) worst = std::max(worst, e.ratio / e.bound->value);
  out << "  worst ratio/bound:  " << worst << "\n";
  return out.str();
}

}  // namespace geoinsure
