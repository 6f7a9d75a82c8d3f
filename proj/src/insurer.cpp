#include "geoinsure/insurer.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>

namespace geoinsure {

namespace {

// ceil() that does not round 6.000000000000001 up to 7.
double robustCeil(double x) { return std::ceil(x - 1e-9 * std::max(1.0, std::abs(x))); }

constexpr double kImprovement = 1e-12;

}  // namespace

InsurancePolicy InsurancePolicy::named(std::string_view name, double epsilon) {
  InsurancePolicy p;
  p.epsilon = epsilon;
  if (name == "Eff-Reli" || name == "EFA" || name == "insure") return p;
  if (name == "JGA") {
    p.allocation = Allocation::JobGreedy;
    return p;
  }
  if (name == "Reli-Eff") {
    p.firstRound = Principle::Reliability;
    p.secondRound = Principle::Efficiency;
    return p;
  }
  if (name == "Eff-Eff") {
    p.secondRound = Principle::Efficiency;
    return p;
  }
  if (name == "Reli-Reli") {
    p.firstRound = Principle::Reliability;
    return p;
  }
  throw std::invalid_argument("unknown insurance policy '" + std::string(name) + "'");
}

std::string InsurancePolicy::label() const {
  auto tag = [](Principle p) { return p == Principle::Efficiency ? "Eff" : "Reli"; };
  std::string out = std::string(tag(firstRound)) + "-" + tag(secondRound);
  if (allocation == Allocation::JobGreedy) out += "/JGA";
  return out;
}

std::vector<JobState> prioritize(std::vector<JobState> jobs, double epsilon, int totalSlots) {
  if (!(epsilon > 0 && epsilon < 1)) throw std::invalid_argument("epsilon must lie in (0,1)");
  if (totalSlots < 1) throw std::invalid_argument("need at least one slot");
  std::sort(jobs.begin(), jobs.end(), [](const JobState& a, const JobState& b) {
    if (a.unprocessed != b.unprocessed) return a.unprocessed < b.unprocessed;
    if (a.arrival != b.arrival) return a.arrival < b.arrival;
    return a.id < b.id;
  });
  if (jobs.empty()) return jobs;
  const double share = epsilon * static_cast<double>(jobs.size());
  const auto favoured = static_cast<std::size_t>(std::max(1.0, robustCeil(share)));
  const int promise = static_cast<int>(robustCeil(static_cast<double>(totalSlots) / share));
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    jobs[i].rank = i;
    jobs[i].promised = i < favoured ? promise : 0;
  }
  return jobs;
}

std::string_view toString(Admission a) {
  switch (a) {
    case Admission::Ok: return "OK";
    case Admission::NoSlot: return "NO_SLOT";
    case Admission::Ingress: return "INGRESS";
    case Admission::Egress: return "EGRESS";
    case Admission::RateFloor: return "RATE_FLOOR";
  }
  return "?";
}

Admission admissible(const PerformanceModel& model, const TaskProfile& task, ClusterId cluster,
                     double epsilon, const Capacity& capacity) {
  if (capacity.freeSlots.at(cluster) <= 0) return Admission::NoSlot;
  switch (capacity.ledger.check(model.gateDemand(task, cluster))) {
    case GateCheck::Ingress: return Admission::Ingress;
    case GateCheck::Egress: return Admission::Egress;
    case GateCheck::Ok: break;
  }
  const double floor = model.globalOptimalRate(task) / (1.0 + epsilon);
  if (model.singleRate(task, cluster) < floor * (1 - kImprovement)) return Admission::RateFloor;
  return Admission::Ok;
}

InsuranceSession::InsuranceSession(const SystemState& state, const PerformanceModel& model,
                                   InsurancePolicy policy)
    : state_(state), model_(model), policy_(policy), capacity_(Capacity::of(state)) {
  plan_.slot = state.now;
  std::vector<JobState> jobs;
  jobs.reserve(state.jobs.size());
  for (const auto& [id, rt] : state.jobs) {
    if (rt.done()) continue;
    jobs.push_back(JobState{id, rt.spec.arrival, rt.unprocessedCurrentStage(), rt.liveCopies, 0, 0});
  }
  if (!jobs.empty()) jobs_ = prioritize(std::move(jobs), policy_.epsilon, std::max(1, state.totalSlots()));
}

InsuranceSession::Working& InsuranceSession::working(TaskRef ref) {
  if (auto it = workingIndex_.find(ref); it != workingIndex_.end()) return working_[it->second];
  workingIndex_.emplace(ref, working_.size());
  Working w;
  w.ref = ref;
  for (CopyId id : state_.task(ref).copies) w.placement.push_back(state_.copies.at(id).cluster);
  working_.push_back(std::move(w));
  return working_.back();
}

void InsuranceSession::assign(JobState& job, Working& w, ClusterId k, int pass) {
  capacity_.take(k, model_.gateDemand(state_.task(w.ref).profile, k));
  w.placement.push_back(k);
  ++w.plannedNow;
  w.roundGained = pass;
  ++job.running;
  plan_.entries.push_back(PlanEntry{w.ref, k, 1, false});
}

int InsuranceSession::efficiencyRound(const JobId* only) { return firstCopyRound(policy_.firstRound, only); }

int InsuranceSession::reliabilityRound(const JobId* only) { return secondCopyRound(policy_.secondRound, only); }

int InsuranceSession::firstCopyRound(Principle principle, const JobId* only) {
  pass_ = 0;
  int assigned = 0;
  const std::size_t clusterCount = model_.clusterCount();
  std::vector<double> rates(clusterCount);
  for (auto& job : jobs_) {
    if (only && job.id != *only) continue;
    if (!budgetLeft(job)) continue;
    const auto& rt = state_.jobs.at(job.id);
    for (std::uint32_t index : waitingTasks(rt)) {
      if (!budgetLeft(job)) break;
      if (capacity_.totalFree() == 0) return assigned;
      const TaskProfile& profile = rt.tasks[index].profile;
      double optimum = 0;
      for (ClusterId k = 0; k < clusterCount; ++k) optimum = std::max(optimum, rates[k] = model_.singleRate(profile, k));
      const double floor = optimum / (1.0 + policy_.epsilon);
      std::optional<ClusterId> best;
      double bestScore = -std::numeric_limits<double>::infinity();
      for (ClusterId k = 0; k < clusterCount; ++k) {
        if (capacity_.freeSlots[k] <= 0 || rates[k] < floor * (1 - kImprovement)) continue;
        if (capacity_.ledger.check(model_.gateDemand(profile, k)) != GateCheck::Ok) continue;
        const double score = principle == Principle::Efficiency
                                 ? rates[k]
                                 : model_.reliability(profile, std::span<const ClusterId>(&k, 1));
        if (score > bestScore) {
          bestScore = score;
          best = k;
        }
      }
      if (best) {
        assign(job, working({job.id, index}), *best, pass_);
        ++assigned;
      }
    }
  }
  return assigned;
}

int InsuranceSession::secondCopyRound(Principle principle, const JobId* only) {
  pass_ = 1;
  int assigned = 0;
  const std::size_t clusterCount = model_.clusterCount();
  for (auto& job : jobs_) {
    if (only && job.id != *only) continue;
    if (!budgetLeft(job)) continue;
    struct Candidate {
      std::size_t slot;
      double pro;
    };
    std::vector<Candidate> order;
    for (std::size_t i = 0; i < working_.size(); ++i) {
      const auto& w = working_[i];
      if (w.ref.job != job.id || w.roundGained != 0 || w.placement.size() != 1) continue;
      order.push_back({i, model_.reliability(state_.task(w.ref).profile, w.placement)});
    }
    std::stable_sort(order.begin(), order.end(),
                     [](const Candidate& a, const Candidate& b) { return a.pro < b.pro; });
    for (const auto& c : order) {
      if (!budgetLeft(job)) break;
      if (capacity_.totalFree() == 0) return assigned;
      Working& w = working_[c.slot];
      const TaskProfile& profile = state_.task(w.ref).profile;
      const double current = principle == Principle::Reliability ? c.pro : model_.execRate(profile, w.placement);
      const double floor = model_.globalOptimalRate(profile) / (1.0 + policy_.epsilon);
      std::optional<ClusterId> best;
      double bestScore = current * (1 + kImprovement);
      Placement candidate = w.placement;
      candidate.push_back(0);
      for (ClusterId k = 0; k < clusterCount; ++k) {
        if (capacity_.freeSlots[k] <= 0 || model_.singleRate(profile, k) < floor * (1 - kImprovement)) continue;
        if (capacity_.ledger.check(model_.gateDemand(profile, k)) != GateCheck::Ok) continue;
        candidate.back() = k;
        const double score = principle == Principle::Reliability ? model_.reliability(profile, candidate)
                                                                 : model_.execRate(profile, candidate);
        if (score > bestScore) {
          bestScore = score;
          best = k;
        }
      }
      if (best) {
        assign(job, w, *best, pass_);
        ++assigned;
      }
    }
  }
  return assigned;
}

int InsuranceSession::savingPass(const JobId* only) {
  const int previous = pass_;
  ++pass_;
  int assigned = 0;
  const std::size_t clusterCount = model_.clusterCount();
  for (auto& job : jobs_) {
    if (only && job.id != *only) continue;
    for (std::size_t i = 0; i < working_.size() && budgetLeft(job); ++i) {
      if (working_[i].ref.job != job.id || working_[i].roundGained != previous) continue;
      if (capacity_.totalFree() == 0) return assigned;
      Working& w = working_[i];
      const TaskProfile& profile = state_.task(w.ref).profile;
      const double c = static_cast<double>(w.placement.size() + 1);
      const double before = model_.estExecTime(profile, w.placement);
      const double floor = model_.globalOptimalRate(profile) / (1.0 + policy_.epsilon);
      std::optional<ClusterId> best;
      double bestRate = -1;
      Placement candidate = w.placement;
      candidate.push_back(0);
      for (ClusterId k = 0; k < clusterCount; ++k) {
        if (capacity_.freeSlots[k] <= 0 || model_.singleRate(profile, k) < floor * (1 - kImprovement)) continue;
        if (capacity_.ledger.check(model_.gateDemand(profile, k)) != GateCheck::Ok) continue;
        candidate.back() = k;
        const double rate = model_.execRate(profile, candidate);
        if (rate > bestRate) {
          bestRate = rate;
          best = k;
        }
      }
      if (!best) continue;
      candidate.back() = *best;
      const double after = model_.estExecTime(profile, candidate);
      if (before > (c + 1) / c * after) {
        assign(job, w, *best, pass_);
        ++assigned;
      }
    }
  }
  return assigned;
}

int InsuranceSession::savingRounds(const JobId* only) {
  int total = 0;
  for (;;) {
    const int n = savingPass(only);
    if (n == 0) return total;
    total += n;
  }
}

InsurancePlan InsuranceSession::run() {
  if (policy_.allocation == Allocation::EfficientFirst) {
    if (efficiencyRound() > 0 && reliabilityRound() > 0) savingRounds();
  } else {
    for (const auto& job : std::vector<JobState>(jobs_)) {
      if (job.promised <= 0) continue;
      if (efficiencyRound(&job.id) > 0 && reliabilityRound(&job.id) > 0) savingRounds(&job.id);
    }
  }
  // Collapse repeated (task, cluster) entries into copy counts.
  InsurancePlan merged;
  merged.slot = plan_.slot;
  std::map<std::pair<TaskRef, ClusterId>, std::size_t> seen;
  for (const auto& e : plan_.entries) {
    auto [it, fresh] = seen.emplace(std::make_pair(e.task, e.cluster), merged.entries.size());
    if (fresh)
      merged.entries.push_back(e);
    else
      merged.entries[it->second].copies += e.copies;
  }
  return merged;
}

InsurancePlan insure(const SystemState& state, const PerformanceModel& model, const InsurancePolicy& policy) {
  if (!(policy.epsilon > 0 && policy.epsilon < 1)) throw std::invalid_argument("epsilon must lie in (0,1)");
  return InsuranceSession(state, model, policy).run();
}

}  // namespace geoinsure
