#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "geoinsure/insurer.hpp"
#include "oracles.hpp"

using namespace fixture;

namespace {

JobState pending(JobId id, double unprocessed, double arrival = 0) {
  return JobState{id, arrival, unprocessed, 0, 0, 0};
}

int copiesOf(const InsurancePlan& plan, TaskRef ref) {
  int n = 0;
  for (const auto& e : plan.entries)
    if (e.task == ref) n += e.copies;
  return n;
}

// Plan entry clusters for one task, in plan order (one per copy).
std::vector<ClusterId> clustersOf(const InsurancePlan& plan, TaskRef ref) {
  std::vector<ClusterId> out;
  for (const auto& e : plan.entries)
    if (e.task == ref) out.insert(out.end(), static_cast<std::size_t>(e.copies), e.cluster);
  return out;
}

}  // namespace

TEST(Prioritize, HalfTheJobsShareTheSlots) {
  const auto jobs = prioritize({pending(3, 40), pending(1, 10), pending(0, 5), pending(2, 20)}, 0.5, 8);
  ASSERT_EQ(jobs.size(), 4u);
  EXPECT_EQ(jobs[0].id, 0u);
  EXPECT_EQ(jobs[1].id, 1u);
  EXPECT_EQ(jobs[0].promised, 4);
  EXPECT_EQ(jobs[1].promised, 4);
  EXPECT_EQ(jobs[2].promised, 0);
  EXPECT_EQ(jobs[3].promised, 0);
  for (std::size_t i = 0; i < jobs.size(); ++i) EXPECT_EQ(jobs[i].rank, i);
}

TEST(Prioritize, SingleJobPromiseIsNotCapped) {
  const auto jobs = prioritize({pending(0, 3)}, 0.6, 10);
  EXPECT_EQ(jobs[0].promised, 17);
}

TEST(Prioritize, TiesGoToEarlierArrivalThenLowerId) {
  auto jobs = prioritize({pending(0, 7, 3), pending(1, 7, 1)}, 0.5, 4);
  EXPECT_EQ(jobs[0].id, 1u);
  jobs = prioritize({pending(5, 7, 1), pending(4, 7, 1)}, 0.5, 4);
  EXPECT_EQ(jobs[0].id, 4u);
}

TEST(Prioritize, AtLeastOneJobIsFavoured) {
  const auto jobs = prioritize({pending(0, 1), pending(1, 2), pending(2, 3), pending(3, 4), pending(4, 5)}, 0.1, 5);
  EXPECT_EQ(jobs[0].promised, 10);
  EXPECT_EQ(jobs[1].promised, 0);
}

TEST(Prioritize, RejectsBadArguments) {
  EXPECT_THROW(prioritize({pending(0, 1)}, 0, 4), std::invalid_argument);
  EXPECT_THROW(prioritize({pending(0, 1)}, 1, 4), std::invalid_argument);
  EXPECT_THROW(prioritize({pending(0, 1)}, 0.5, 0), std::invalid_argument);
}

TEST(Admissible, RateFloor) {
  const auto m = model(clusters({{12}, {9}, {7}}));
  const auto s = stateWith(m, {});
  const auto cap = Capacity::of(s);
  EXPECT_EQ(admissible(m, profile(10), 0, 0.5, cap), Admission::Ok);
  EXPECT_EQ(admissible(m, profile(10), 1, 0.5, cap), Admission::Ok);
  EXPECT_EQ(admissible(m, profile(10), 2, 0.5, cap), Admission::RateFloor);
}

TEST(Admissible, SlotAndGateChecks) {
  LinkModel links;
  links.fallback = point(10);
  const PerformanceModel m(clusters({{100, 1, 0, 10}, {100, 1, 0, 10}}), links, freeReads());
  SystemState s = stateWith(m, {});
  GateDemand half;
  half.destination = 1;
  half.ingress = 5;
  s.ledger.reserve(99, half);
  const auto task = profile(10, {{0, 10}});
  EXPECT_EQ(admissible(m, task, 1, 0.5, Capacity::of(s)), Admission::Ingress);

  GateDemand egress;
  egress.destination = 1;
  egress.egress = {{0, 5}};
  SystemState e = stateWith(m, {});
  e.ledger.reserve(98, egress);
  EXPECT_EQ(admissible(m, task, 1, 0.5, Capacity::of(e)), Admission::Egress);

  SystemState full = stateWith(m, {});
  full.clusters[1].busy = 1;
  EXPECT_EQ(admissible(m, task, 1, 0.5, Capacity::of(full)), Admission::NoSlot);
  EXPECT_EQ(toString(Admission::RateFloor), "RATE_FLOOR");
}

TEST(EfficiencyRound, PicksTheFastestCluster) {
  const auto m = model(clusters({{10}, {6}}));
  const auto s = stateWith(m, {job(0, 0, {60})});
  InsuranceSession session(s, m, InsurancePolicy::named("Eff-Reli", 0.5));
  EXPECT_EQ(session.efficiencyRound(), 1);
  EXPECT_EQ(clustersOf(session.plan(), {0, 0}), std::vector<ClusterId>{0});
}

TEST(EfficiencyRound, WaitsWhenOnlySlowClustersAreFree) {
  const auto m = model(clusters({{10}, {6}}));
  SystemState s = stateWith(m, {job(0, 0, {60}), job(1, 0, {100})});
  occupy(s, 1, {1, 0}, 0, 0, 10);
  InsuranceSession session(s, m, InsurancePolicy::named("Eff-Reli", 0.5));
  EXPECT_EQ(session.efficiencyRound(), 0);
  EXPECT_TRUE(session.plan().entries.empty());
}

TEST(EfficiencyRound, BudgetStopsAtPromise) {
  // One job, one slot in total: the promise is 2 but only the first task
  // in launch order (larger datasize first) finds capacity.
  const auto m = model(clusters({{10, 1}}));
  const auto s = stateWith(m, {job(0, 0, {5, 8})});
  InsuranceSession session(s, m, InsurancePolicy::named("Eff-Reli", 0.5));
  EXPECT_EQ(session.efficiencyRound(), 1);
  EXPECT_EQ(copiesOf(session.plan(), {0, 1}), 1);
  EXPECT_EQ(copiesOf(session.plan(), {0, 0}), 0);
}

TEST(EfficiencyRound, PromiseLimitsCopies) {
  // Two jobs, eps 0.5: only the smaller job is favoured, with ceil(1/1) = 1 slot.
  const auto m = model(clusters({{10, 1}}));
  SystemState s = stateWith(m, {job(0, 0, {5, 8}), job(1, 0, {100})});
  InsuranceSession session(s, m, InsurancePolicy::named("Eff-Reli", 0.5));
  EXPECT_EQ(session.jobs().front().promised, 1);
  session.efficiencyRound();
  EXPECT_EQ(session.plan().copyCount(), 1);
  EXPECT_EQ(copiesOf(session.plan(), {1, 0}), 0);
}

TEST(ReliabilityRound, PrefersTheLeastTroubledCluster) {
  const auto m = model(clusters({{10, 1, 0.2}, {10, 1, 0.1}, {10, 1, 0.3}}));
  const auto s = stateWith(m, {job(0, 0, {10})});
  InsuranceSession session(s, m, InsurancePolicy::named("Eff-Reli", 0.5));
  EXPECT_EQ(session.efficiencyRound(), 1);
  EXPECT_EQ(session.reliabilityRound(), 1);
  EXPECT_EQ(clustersOf(session.plan(), {0, 0}), (std::vector<ClusterId>{0, 1}));
}

TEST(ReliabilityRound, LeastProtectedTaskFirst) {
  // Task 1 (20 MB) lands in c0 with pro 0.99^2; task 0 (10 MB) in c1 with
  // pro 0.7. One slot is left and it protects task 0.
  const auto m = model(clusters({{10, 1, 0.01}, {10, 1, 0.3}, {10, 1, 0}}));
  const auto s = stateWith(m, {job(0, 0, {10, 20})});
  InsuranceSession session(s, m, InsurancePolicy::named("Eff-Reli", 0.5));
  EXPECT_EQ(session.efficiencyRound(), 2);
  EXPECT_EQ(clustersOf(session.plan(), {0, 1}), std::vector<ClusterId>{0});
  EXPECT_EQ(clustersOf(session.plan(), {0, 0}), std::vector<ClusterId>{1});
  EXPECT_EQ(session.reliabilityRound(), 1);
  EXPECT_EQ(clustersOf(session.plan(), {0, 0}), (std::vector<ClusterId>{1, 2}));
  EXPECT_EQ(copiesOf(session.plan(), {0, 1}), 1);
}

TEST(ReliabilityRound, NothingToGainWithoutFailures) {
  const auto m = model(clusters({{10, 2}, {10, 2}}));
  const auto s = stateWith(m, {job(0, 0, {10, 20})});
  InsuranceSession session(s, m, InsurancePolicy::named("Eff-Reli", 0.5));
  EXPECT_EQ(session.efficiencyRound(), 2);
  EXPECT_EQ(session.reliabilityRound(), 0);
  EXPECT_EQ(insure(s, m, InsurancePolicy::named("Eff-Reli", 0.5)).copyCount(), 2);
}

// Rates {1:0.9, 100:0.1}: E[max] over n copies is 10.9, 19.81, 27.829,
// 35.0461, 41.5415. The c-th copy is kept while r(c)/r(c-1) > (c+1)/c,
// which holds for c = 3 and 4 but not 5.
TEST(SavingRound, AddsCopiesWhileTheyPayForThemselves) {
  const PerformanceModel m({cluster(0, dist({{1, 0.9}, {100, 0.1}}), 8)}, freeLinks(), freeReads());
  const auto s = stateWith(m, {job(0, 0, {100})});
  InsuranceSession session(s, m, InsurancePolicy::named("Eff-Eff", 0.5));
  EXPECT_EQ(session.efficiencyRound(), 1);
  EXPECT_EQ(session.reliabilityRound(), 1);
  EXPECT_EQ(session.savingPass(), 1);
  EXPECT_EQ(session.savingPass(), 1);
  EXPECT_EQ(session.savingPass(), 0);
  EXPECT_EQ(copiesOf(session.plan(), {0, 0}), 4);
  EXPECT_EQ(insure(s, m, InsurancePolicy::named("Eff-Eff", 0.5)).copyCount(), 4);
}

TEST(SavingRound, SkipsCopiesThatDoNotSaveSlotTime) {
  // Coin rates: r(2) = 3.5, r(3) = 3.75; 3.75/3.5 < 4/3.
  const PerformanceModel m({cluster(0, dist({{2, 0.5}, {4, 0.5}}), 8)}, freeLinks(), freeReads());
  const auto s = stateWith(m, {job(0, 0, {100})});
  InsuranceSession session(s, m, InsurancePolicy::named("Eff-Eff", 0.5));
  session.efficiencyRound();
  session.reliabilityRound();
  EXPECT_EQ(session.savingRounds(), 0);
  EXPECT_EQ(copiesOf(session.plan(), {0, 0}), 2);
}

TEST(SavingRound, IdenticalDeterministicClustersNeverQualify) {
  const auto m = model(clusters({{10, 1, 0.1}, {10, 1, 0.1}, {10, 1, 0.1}, {10, 1, 0.1}}));
  const auto s = stateWith(m, {job(0, 0, {100})});
  InsuranceSession session(s, m, InsurancePolicy::named("Eff-Reli", 0.5));
  session.efficiencyRound();
  EXPECT_EQ(session.reliabilityRound(), 1);
  EXPECT_EQ(session.savingPass(), 0);
  EXPECT_EQ(session.plan().copyCount(), 2);
}

TEST(Insure, EmptyWithoutFreeSlots) {
  const auto m = model(clusters({{10, 1}}));
  SystemState s = stateWith(m, {job(0, 0, {10}), job(1, 0, {10})});
  occupy(s, 1, {0, 0}, 0, 0, 1);
  EXPECT_TRUE(insure(s, m, InsurancePolicy{}).entries.empty());
}

TEST(Insure, ForcedAssignment) {
  const auto m = model(clusters({{10, 1}}));
  const auto s = stateWith(m, {job(0, 0, {10})});
  const auto plan = insure(s, m, InsurancePolicy{});
  ASSERT_EQ(plan.entries.size(), 1u);
  EXPECT_EQ(plan.entries[0], (PlanEntry{{0, 0}, 0, 1, false}));
}

TEST(Insure, OnlyThePriorityJobGetsTheLastSlot) {
  const auto m = model(clusters({{10, 1}}));
  const auto s = stateWith(m, {job(0, 0, {30}), job(1, 0, {20})});
  const auto plan = insure(s, m, InsurancePolicy::named("EFA", 0.9));
  ASSERT_EQ(plan.entries.size(), 1u);
  EXPECT_EQ(plan.entries[0].task, (TaskRef{1, 0}));
}

TEST(Insure, JobGreedyInsuresOneJobFully) {
  const auto m = model(clusters({{10, 1, 0.1}, {10, 1, 0.05}}));
  const auto s = stateWith(m, {job(0, 0, {10}), job(1, 0, {20})});
  const auto efa = insure(s, m, InsurancePolicy::named("EFA", 0.9));
  EXPECT_EQ(copiesOf(efa, {0, 0}), 1);
  EXPECT_EQ(copiesOf(efa, {1, 0}), 1);
  const auto jga = insure(s, m, InsurancePolicy::named("JGA", 0.9));
  EXPECT_EQ(copiesOf(jga, {0, 0}), 2);
  EXPECT_EQ(copiesOf(jga, {1, 0}), 0);
}

TEST(Insure, ReliabilityFirstRoundPicksTheSafestAdmissibleCluster) {
  const auto m = model(clusters({{10, 1, 0.3}, {8, 1, 0.01}, {4, 1, 0}}));
  const auto s = stateWith(m, {job(0, 0, {10})});
  const auto eff = insure(s, m, InsurancePolicy::named("Eff-Eff", 0.5));
  EXPECT_EQ(clustersOf(eff, {0, 0}).front(), 0u);
  // c2 is below the 10/1.5 floor; c1 is the most reliable admissible one.
  InsuranceSession session(s, m, InsurancePolicy::named("Reli-Eff", 0.5));
  session.efficiencyRound();
  EXPECT_EQ(clustersOf(session.plan(), {0, 0}), std::vector<ClusterId>{1});
}

TEST(Insure, RejectsEpsilonOutsideUnitInterval) {
  const auto m = model(clusters({{10}}));
  const auto s = stateWith(m, {job(0, 0, {10})});
  EXPECT_THROW(insure(s, m, InsurancePolicy::named("EFA", 1.0)), std::invalid_argument);
  EXPECT_THROW(InsurancePolicy::named("Fast-Slow", 0.5), std::invalid_argument);
}

TEST(Insure, PolicyLabels) {
  EXPECT_EQ(InsurancePolicy::named("EFA", 0.5).label(), "Eff-Reli");
  EXPECT_EQ(InsurancePolicy::named("JGA", 0.5).label(), "Eff-Reli/JGA");
  EXPECT_EQ(InsurancePolicy::named("Reli-Reli", 0.5).label(), "Reli-Reli");
}

TEST(InsurancePlan, JsonRoundTrip) {
  InsurancePlan plan;
  plan.slot = 4;
  plan.entries = {{{1, 2}, 3, 2, false}, {{0, 0}, 1, 1, true}};
  const auto back = planFromJson(toJson(plan));
  EXPECT_EQ(back.slot, 4);
  EXPECT_EQ(back.entries, plan.entries);
}

// Random snapshots: every plan respects slots, gate caps, the rate floor,
// per-job budgets, and the per-round copy limits; planning is deterministic.
TEST(InsurerProperties, PlansAreFeasible) {
  std::mt19937_64 rng(4242);
  std::uniform_int_distribution<int> slots(1, 4), jobsN(1, 6), tasksN(1, 5), where(0, 4);
  std::uniform_real_distribution<double> p(0, 0.2), gate(20, 200), size(5, 200), eps(0.05, 0.95);
  const char* policies[] = {"Eff-Reli", "Reli-Eff", "Eff-Eff", "Reli-Reli", "JGA"};
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<ClusterModel> cs;
    for (ClusterId k = 0; k < 5; ++k) cs.push_back(cluster(k, oracle::randomDist(rng), slots(rng), p(rng), gate(rng)));
    LinkModel links;
    links.fallback = oracle::randomDist(rng);
    const PerformanceModel m(cs, links, ModelConfig{});
    SystemState s = SystemState::forModel(m);
    const int n = jobsN(rng);
    for (JobId j = 0; j < static_cast<JobId>(n); ++j) {
      Job job;
      job.id = j;
      const int t = tasksN(rng);
      for (int i = 0; i < t; ++i) {
        TaskSpec spec;
        spec.op = "op";
        spec.datasize = size(rng);
        spec.inputs = {{static_cast<ClusterId>(where(rng)), spec.datasize}};
        job.tasks.push_back(spec);
      }
      s.admit(job);
    }
    // Occupy a few slots with copies of the first tasks.
    CopyId next = 1;
    for (auto& [id, rt] : s.jobs)
      if (const ClusterId k = static_cast<ClusterId>(where(rng)); s.freeSlots(k) > 0 && rng() % 2)
        occupy(s, next++, {id, 0}, k, 0, 5);

    const double epsilon = eps(rng);
    const InsurancePolicy policy = InsurancePolicy::named(policies[trial % 5], epsilon);
    const auto plan = insure(s, m, policy);
    EXPECT_EQ(toJson(plan), toJson(insure(s, m, policy)));

    Capacity capacity = Capacity::of(s);
    std::map<TaskRef, int> perTask;
    std::map<JobId, int> perJob;
    for (const auto& e : plan.entries) {
      ASSERT_GE(e.copies, 1);
      const auto& profile = s.task(e.task).profile;
      EXPECT_GE(m.singleRate(profile, e.cluster), m.globalOptimalRate(profile) / (1 + epsilon) * (1 - 1e-9));
      for (int c = 0; c < e.copies; ++c) {
        ASSERT_EQ(capacity.ledger.check(m.gateDemand(profile, e.cluster)), GateCheck::Ok);
        ASSERT_GT(capacity.freeSlots[e.cluster], 0);
        capacity.take(e.cluster, m.gateDemand(profile, e.cluster));
      }
      perTask[e.task] += e.copies;
      perJob[e.task.job] += e.copies;
    }
    std::vector<JobState> states;
    for (const auto& [id, rt] : s.jobs) states.push_back({id, rt.spec.arrival, rt.unprocessedCurrentStage(), rt.liveCopies, 0, 0});
    for (const auto& j : prioritize(states, epsilon, s.totalSlots()))
      EXPECT_LE(perJob[j.id], std::max(0, j.promised - j.running));
    for (const auto& [ref, count] : perTask) EXPECT_TRUE(s.task(ref).copies.empty());

    InsuranceSession session(s, m, policy);
    session.efficiencyRound();
    std::map<TaskRef, int> afterFirst;
    for (const auto& e : session.plan().entries) afterFirst[e.task] += e.copies;
    for (const auto& [ref, count] : afterFirst) EXPECT_EQ(count, 1);
    session.reliabilityRound();
    std::map<TaskRef, int> afterSecond;
    for (const auto& e : session.plan().entries) afterSecond[e.task] += e.copies;
    for (const auto& [ref, count] : afterSecond) EXPECT_LE(count, 2);
  }
}
