#pragma once

// Small hand-built topologies and states shared by the unit tests.

#include <initializer_list>
#include <utility>
#include <vector>

#include "geoinsure/perfmodel.hpp"
#include "geoinsure/simengine.hpp"
#include "geoinsure/state.hpp"

namespace fixture {

using namespace geoinsure;

inline EmpiricalDistribution point(double v) { return EmpiricalDistribution::pointMass(v); }

inline EmpiricalDistribution dist(std::initializer_list<std::pair<double, double>> atoms) {
  return EmpiricalDistribution::fromAtoms(std::vector<EmpiricalDistribution::Atom>(atoms));
}

struct ClusterSpec {
  double rate = 1;
  int slots = 1;
  double failure = 0;
  double gate = 1e9;
};

inline ClusterModel cluster(ClusterId id, const EmpiricalDistribution& processing, int slots = 1,
                            double failure = 0, double gate = 1e9) {
  ClusterModel c;
  c.id = id;
  c.slots = slots;
  c.ingressCap = gate;
  c.egressCap = gate;
  c.failureProbability = failure;
  c.processing = processing;
  return c;
}

/// Deterministic clusters; links and local reads are effectively free.
inline std::vector<ClusterModel> clusters(std::initializer_list<ClusterSpec> specs) {
  std::vector<ClusterModel> out;
  for (const auto& s : specs)
    out.push_back(cluster(static_cast<ClusterId>(out.size()), point(s.rate), s.slots, s.failure, s.gate));
  return out;
}

inline LinkModel freeLinks() {
  LinkModel l;
  l.fallback = point(1e9);
  return l;
}

inline ModelConfig freeReads() {
  ModelConfig c;
  c.localReadBandwidth = 1e9;
  return c;
}

inline PerformanceModel model(std::vector<ClusterModel> cs) {
  return PerformanceModel(std::move(cs), freeLinks(), freeReads());
}

/// Independent single-stage tasks with no remote inputs.
inline Job job(JobId id, double arrival, std::initializer_list<double> datasizes) {
  Job j;
  j.id = id;
  j.arrival = arrival;
  for (double d : datasizes) {
    TaskSpec t;
    t.op = "op";
    t.datasize = d;
    j.tasks.push_back(std::move(t));
  }
  return j;
}

/// Two tasks, the second depending on the first.
inline Job chain(JobId id, double arrival, double first, double second) {
  Job j = job(id, arrival, {first, second});
  j.tasks[1].stage = 1;
  j.tasks[1].predecessors = {0};
  return j;
}

inline Scenario scenario(std::vector<ClusterModel> cs, std::vector<Job> jobs) {
  Scenario s;
  s.clusters = std::move(cs);
  s.links = freeLinks();
  s.model = freeReads();
  s.jobs = std::move(jobs);
  return s;
}

inline TaskProfile profile(double datasize, std::vector<InputLocation> inputs = {}, std::string op = "op") {
  return TaskProfile{std::move(op), datasize, std::move(inputs)};
}

/// Snapshot at time 0 with the given jobs admitted and nothing running.
inline SystemState stateWith(const PerformanceModel& m, std::initializer_list<Job> jobs) {
  SystemState s = SystemState::forModel(m);
  for (const Job& j : jobs) s.admit(j);
  return s;
}

/// Records a live copy of `ref` in cluster k, as the engine would.
inline void occupy(SystemState& s, CopyId id, TaskRef ref, ClusterId k, double start, double finish) {
  CopyRuntime c;
  c.id = id;
  c.task = ref;
  c.cluster = k;
  c.start = start;
  c.finish = finish;
  c.rate = 1;
  s.copies.emplace(id, c);
  ++s.clusters.at(k).busy;
  auto& job = s.jobs.at(ref.job);
  auto& task = job.tasks.at(ref.index);
  task.copies.push_back(id);
  task.state = TaskState::Running;
  task.start = start;
  ++job.liveCopies;
  GateDemand none;
  none.destination = k;
  s.ledger.reserve(id, none);
}

}  // namespace fixture
