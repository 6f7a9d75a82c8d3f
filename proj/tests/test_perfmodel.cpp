#include <gtest/gtest.h>

#include <random>

#include "fixtures.hpp"
#include "oracles.hpp"

using namespace fixture;
using oracle::Pmf;

namespace {

ExecutionRecord record(ClusterId k, const std::string& op, double speed, double time,
                       std::vector<TransferObservation> transfers = {}) {
  return ExecutionRecord{k, op, speed, std::move(transfers), time};
}

}  // namespace

TEST(Ingest, EqualMassHistogramOfWindow) {
  auto m = model(clusters({{5}}));
  for (double v : {10.0, 10.0, 20.0, 20.0}) m.ingest(record(0, "map", v, 1));
  EXPECT_TRUE(oracle::samePmf(oracle::pmfOf(m.processingDist(0, "map")), Pmf{{10, 0.5}, {20, 0.5}}));
}

TEST(Ingest, EmptyWindowFallsBackToClusterDefault) {
  auto m = model(clusters({{5}}));
  EXPECT_EQ(m.processingDist(0, "reduce"), point(5));
  // Below minSamples the default still applies.
  m.ingest(record(0, "reduce", 9, 1));
  EXPECT_EQ(m.processingDist(0, "reduce"), point(5));
}

TEST(Ingest, OldRecordsLeaveTheWindow) {
  ModelConfig cfg = freeReads();
  cfg.window = 10;
  cfg.minSamples = 1;
  PerformanceModel m(clusters({{5}}), freeLinks(), cfg);
  m.ingest(record(0, "map", 100, 0));
  m.ingest(record(0, "map", 7, 20));
  EXPECT_EQ(m.processingDist(0, "map"), point(7));
  m.advanceTo(40);
  EXPECT_EQ(m.processingDist(0, "map"), point(5));
}

TEST(Ingest, RejectsBadRecords) {
  auto m = model(clusters({{5}, {5}}));
  EXPECT_THROW(m.ingest(record(7, "map", 1, 0)), std::out_of_range);
  EXPECT_THROW(m.ingest(record(0, "map", 0, 0)), std::invalid_argument);
  EXPECT_THROW(m.ingest(record(0, "map", 1, 0, {{1, 1, 3}})), std::invalid_argument);
}

TEST(Ingest, LearnedLinksFeedTransfer) {
  ModelConfig cfg = freeReads();
  cfg.minSamples = 2;
  PerformanceModel m(clusters({{50}, {50}}), freeLinks(), cfg);
  const auto t = profile(10, {{0, 10}});
  EXPECT_DOUBLE_EQ(m.singleRate(t, 1), 50);
  m.ingest(record(1, "op", 50, 1, {{0, 1, 4}}));
  m.ingest(record(1, "op", 50, 2, {{0, 1, 4}}));
  EXPECT_DOUBLE_EQ(m.singleRate(t, 1), 4);
}

TEST(Ingest, RefreshIntervalDefersRebuild) {
  ModelConfig cfg = freeReads();
  cfg.minSamples = 1;
  cfg.refreshInterval = 5;
  PerformanceModel m(clusters({{5}}), freeLinks(), cfg);
  m.ingest(record(0, "op", 9, 1));
  EXPECT_EQ(m.processingDist(0, "op"), point(9));  // first rebuild happens at clock 1
  m.ingest(record(0, "op", 9, 2));
  m.ingest(record(0, "op", 3, 3));
  EXPECT_EQ(m.processingDist(0, "op"), point(9));
  m.advanceTo(6);
  EXPECT_NEAR(expectation(m.processingDist(0, "op")), 7, 1e-12);
}

TEST(TransferDist, Examples) {
  LinkModel links = freeLinks();
  links.links.emplace(std::pair<ClusterId, ClusterId>{0, 2}, point(10));
  links.links.emplace(std::pair<ClusterId, ClusterId>{1, 2}, point(20));
  links.links.emplace(std::pair<ClusterId, ClusterId>{0, 1}, dist({{10, 0.5}, {20, 0.5}}));
  PerformanceModel m(clusters({{1}, {1}, {1}}), links);
  const std::vector<InputLocation> ab{{0, 5}, {1, 5}};
  EXPECT_TRUE(oracle::samePmf(oracle::pmfOf(m.transferDist(ab, 2)), Pmf{{15, 1}}));
  const std::vector<InputLocation> local{{2, 5}};
  EXPECT_EQ(m.transferDist(local, 2), point(1000));
  const std::vector<InputLocation> a{{0, 5}};
  EXPECT_TRUE(oracle::samePmf(oracle::pmfOf(m.transferDist(a, 1)), Pmf{{10, 0.5}, {20, 0.5}}));
  EXPECT_THROW(m.transferDist({}, 1), std::invalid_argument);
}

TEST(CopyRateDist, Examples) {
  auto build = [](const EmpiricalDistribution& p, const EmpiricalDistribution& t) {
    LinkModel links;
    links.fallback = t;
    return PerformanceModel({cluster(0, p), cluster(1, p)}, links);
  };
  const auto task = profile(10, {{1, 10}});
  EXPECT_EQ(build(point(8), point(15)).copyRateDist(task, 0), point(8));
  EXPECT_EQ(build(point(15), point(8)).copyRateDist(task, 0), point(8));
  EXPECT_TRUE(oracle::samePmf(oracle::pmfOf(build(dist({{2, 0.5}, {4, 0.5}}), point(3)).copyRateDist(task, 0)),
                              Pmf{{2, 0.5}, {3, 0.5}}));
}

TEST(ExecRate, Examples) {
  const auto t = profile(6);
  EXPECT_DOUBLE_EQ(model(clusters({{3}})).execRate(t, std::vector<ClusterId>{0}), 3.0);
  EXPECT_DOUBLE_EQ(model(clusters({{8}, {6}})).execRate(t, std::vector<ClusterId>{0, 1}), 8.0);
  const auto coin = PerformanceModel({cluster(0, dist({{2, 0.5}, {4, 0.5}}))}, freeLinks(), freeReads());
  EXPECT_DOUBLE_EQ(coin.execRate(t, std::vector<ClusterId>{0, 0}), 3.5);
  EXPECT_THROW(coin.execRate(t, std::vector<ClusterId>{}), std::invalid_argument);
}

TEST(Reliability, Examples) {
  const auto one = model(clusters({{3, 1, 0.1}}));
  EXPECT_NEAR(one.reliability(profile(6), std::vector<ClusterId>{0}), 0.81, 1e-12);

  const auto two = model(clusters({{4, 1, 0.1}, {4, 1, 0.2}}));
  EXPECT_NEAR(two.reliability(profile(4), std::vector<ClusterId>{0, 1}), 0.98, 1e-12);

  const auto same = model(clusters({{4, 1, 0.1}}));
  EXPECT_NEAR(same.reliability(profile(6), std::vector<ClusterId>{0, 0}), std::pow(0.9, 1.5), 1e-12);

  EXPECT_EQ(model(clusters({{4}, {2}})).reliability(profile(9), std::vector<ClusterId>{1}), 1.0);
}

TEST(GlobalOptimalRate, Examples) {
  const auto t = profile(1);
  const auto m = model(clusters({{10}, {6}}));
  EXPECT_DOUBLE_EQ(m.globalOptimalRate(t), 10);
  EXPECT_DOUBLE_EQ(model(clusters({{4}})).globalOptimalRate(t), 4);
  const auto tie = model(clusters({{12}, {12}}));
  EXPECT_DOUBLE_EQ(tie.globalOptimalRate(t), 12);
  EXPECT_EQ(tie.globalOptimalCluster(t), 0u);
}

TEST(EstExecTime, Examples) {
  EXPECT_DOUBLE_EQ(model(clusters({{8}})).estExecTime(profile(100), std::vector<ClusterId>{0}), 12.5);
  EXPECT_DOUBLE_EQ(model(clusters({{8}})).estExecTime(profile(0), std::vector<ClusterId>{0}), 0);
  const auto coin = PerformanceModel({cluster(0, dist({{2, 0.5}, {4, 0.5}}))}, freeLinks(), freeReads());
  EXPECT_NEAR(coin.estExecTime(profile(6), std::vector<ClusterId>{0, 0}), 6 / 3.5, 1e-12);
}

TEST(GateDemand, RemoteInputsOnly) {
  LinkModel links;
  links.fallback = point(30);
  std::vector<ClusterModel> cs = clusters({{100}, {100}, {100}});
  cs[2].ingressCap = 40;
  PerformanceModel m(cs, links);
  const auto t = profile(10, {{0, 5}, {1, 5}, {2, 5}});
  const GateDemand d = m.gateDemand(t, 2);
  EXPECT_EQ(d.destination, 2u);
  EXPECT_DOUBLE_EQ(d.ingress, 40);  // 60 requested, clamped to the cap
  ASSERT_EQ(d.egress.size(), 2u);
  EXPECT_DOUBLE_EQ(d.egress[0].second, 30);
  EXPECT_DOUBLE_EQ(m.gateDemand(profile(10, {{2, 5}}), 2).ingress, 0);
}

TEST(PerformanceModel, JsonRoundTrip) {
  std::vector<ClusterModel> cs = clusters({{10, 2, 0.05}, {6}});
  cs[0].byOperation.emplace("map", dist({{3, 0.5}, {5, 0.5}}));
  LinkModel links;
  links.links.emplace(std::pair<ClusterId, ClusterId>{0, 1}, dist({{7, 0.25}, {9, 0.75}}));
  const PerformanceModel m(cs, links);
  const auto back = PerformanceModel::fromJson(m.toJson());
  EXPECT_EQ(back.toJson(), m.toJson());
  EXPECT_EQ(back.processingDist(0, "map"), m.processingDist(0, "map"));
}

TEST(PerformanceModel, RejectsInvalidClusters) {
  EXPECT_THROW(model({}), std::invalid_argument);
  EXPECT_THROW(model(clusters({{1, 0}})), std::invalid_argument);
  EXPECT_THROW(model(clusters({{1, 1, 1.0}})), std::invalid_argument);
}

// Extending a placement never lowers the expected rate; adding a new cluster
// never lowers reliability; greedy sequences give non-increasing rate/copy.
TEST(PerformanceModelProperties, PlacementMonotonicity) {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> p(0, 0.3);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<ClusterModel> cs;
    for (ClusterId k = 0; k < 6; ++k) cs.push_back(cluster(k, oracle::randomDist(rng), 1, p(rng)));
    const PerformanceModel m(cs, freeLinks(), freeReads());
    const auto t = profile(20);
    Placement placement;
    double previousRate = 0, previousPerCopy = std::numeric_limits<double>::infinity();
    double previousReliability = 0;
    for (int n = 1; n <= 6; ++n) {
      ClusterId best = 0;
      double bestRate = -1;
      for (ClusterId k = 0; k < 6; ++k) {
        Placement candidate = placement;
        candidate.push_back(k);
        const double r = m.execRate(t, candidate);
        if (r > bestRate + 1e-12) {
          bestRate = r;
          best = k;
        }
      }
      const bool fresh = std::find(placement.begin(), placement.end(), best) == placement.end();
      placement.push_back(best);
      const double rate = m.execRate(t, placement);
      const double rel = m.reliability(t, placement);
      EXPECT_GE(rate + 1e-12, previousRate);
      EXPECT_LE(rate / n, previousPerCopy + 1e-9);
      EXPECT_GT(rel, 0);
      EXPECT_LE(rel, 1);
      if (fresh && n > 1) EXPECT_GE(rel + 1e-12, previousReliability);
      previousRate = rate;
      previousPerCopy = rate / n;
      previousReliability = rel;
    }
  }
}
