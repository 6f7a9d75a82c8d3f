// End-to-end acceptance run. One PASS/FAIL line per criterion; the exit
// status is non-zero when any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "geoinsure/experiment.hpp"
#include "geoinsure/verify.hpp"
#include "oracles.hpp"

using namespace geoinsure;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

constexpr double kUntimed = 0;

void criterion(int id, const std::string& name, double budgetSeconds, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("threw: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const bool inTime = budgetSeconds == kUntimed || secs <= budgetSeconds;
  const bool pass = o.pass && inTime;
  if (!pass) ++failures;
  char timing[64];
  if (budgetSeconds == kUntimed)
    std::snprintf(timing, sizeof timing, "%.1fs", secs);
  else
    std::snprintf(timing, sizeof timing, "%.1fs of %.0fs", secs, budgetSeconds);
  std::printf("%s [%d] %s: %s (%s)\n", pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), timing);
  std::fflush(stdout);
}

std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4g", x);
  return buf;
}

ExperimentConfig desk() {
  ExperimentConfig c;  // 10 clusters, 200 jobs, lambda 0.07, seeds 1..10
  c.workload.lambda = 0.07;
  return c;
}

double meanOf(const std::vector<Summary>& summaries, const std::string& scheduler) {
  for (const auto& s : summaries)
    if (s.scheduler == scheduler) return s.meanFlowtime;
  throw std::runtime_error("no summary for " + scheduler);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome perCopyRate() {
  std::size_t sequences = 0, agreed = 0;
  bool pass = true;
  for (std::uint64_t seed = 1; seed <= 100; ++seed, ++sequences) {
    const auto seq = randomSortedSequence(seed, 6, 5);
    const auto report = checkPerCopyRate(seq, 6, 1e-9);
    // Second route: r(n) by enumerating the joint support.
    std::vector<oracle::Pmf> prefix;
    std::vector<double> r;
    for (const auto& d : seq) {
      prefix.push_back(oracle::pmfOf(d));
      r.push_back(oracle::expectation(oracle::maxOf(prefix)));
    }
    bool same = true, monotone = true;
    for (std::size_t n = 0; n < r.size(); ++n) {
      same = same && std::abs(r[n] - report.r[n]) <= 1e-9 * std::max(1.0, r[n]);
      if (n > 0) monotone = monotone && r[n] / static_cast<double>(n + 1) <= r[n - 1] / static_cast<double>(n) + 1e-9;
    }
    pass = pass && report.pass && monotone;
    agreed += same;
  }
  return {pass && agreed == sequences,
          std::to_string(sequences) + " sequences, n<=6, " + std::to_string(agreed) + " agree with enumeration"};
}

Outcome composition() {
  std::mt19937_64 rng(2024);
  std::size_t cases = 0, bad = 0;
  constexpr std::size_t kCap = 1024;  // wide enough that nothing is rebinned
  while (cases < 1200) {
    const auto a = oracle::randomDist(rng, 5), b = oracle::randomDist(rng, 5), c = oracle::randomDist(rng, 5);
    const auto pa = oracle::pmfOf(a), pb = oracle::pmfOf(b), pc = oracle::pmfOf(c);
    const std::vector<EmpiricalDistribution> abc{a, b, c};
    const EmpiricalDistribution* ptrs[] = {&a, &b, &c};
    const int n = 1 + static_cast<int>(rng() % 4);
    const bool ok =
        oracle::samePmf(oracle::pmfOf(maxCompose(a, b, kCap)), oracle::maxOf({pa, pb})) &&
        oracle::samePmf(oracle::pmfOf(minCompose(a, b, kCap)), oracle::minOf({pa, pb})) &&
        oracle::samePmf(oracle::pmfOf(meanCompose<double>(abc, kCap)), oracle::meanOf({pa, pb, pc})) &&
        oracle::samePmf(oracle::pmfOf(iidMax(a, n, kCap)), oracle::maxOf(std::vector<oracle::Pmf>(n, pa))) &&
        std::abs(expectedMax<double>(ptrs) - oracle::expectation(oracle::maxOf({pa, pb, pc}))) <= 1e-9;
    bad += !ok;
    cases += 5;
  }
  return {bad == 0, std::to_string(cases) + " compositions, " + std::to_string(bad) + " mismatches"};
}

Outcome audit() {
  ExperimentConfig c = desk();
  c.workload.jobs = 40;
  const std::vector<std::string> schedulers = {"insure",   "stage-greedy", "mantri-like", "dolly-like",
                                               "Eff-Eff",  "Reli-Eff",     "Reli-Reli",   "JGA"};
  std::vector<RunKey> keys;
  for (const auto& s : schedulers)
    for (std::uint64_t seed = 1; seed <= 20; ++seed) keys.push_back({s, c.epsilon, c.workload.lambda, seed});
  std::size_t violations = 0;
  for (const auto& r : runAll(c, keys, true))
    violations += auditConstraints(*r.trace, buildScenario(c, r.key.lambda, r.key.seed)).size();
  return {violations == 0, std::to_string(schedulers.size()) + " schedulers x 20 seeds, " +
                               std::to_string(violations) + " violations"};
}

Outcome competitive() {
  std::vector<TinyInstance> instances;
  for (std::uint64_t seed = 1; seed <= 50; ++seed) instances.push_back(randomTinyInstance(1000 + seed));
  const std::vector<double> eps{0.2, 0.5, 0.8};
  const auto report = competitiveCheck(instances, eps);
  double worst = 0;
  std::size_t over = 0;
  for (const auto& e : report.entries) {
    if (!e.bound) continue;
    worst = std::max(worst, e.ratio / e.bound->value);
    over += e.ratio > e.bound->value;
  }
  return {report.pass && over == 0,
          std::to_string(report.checked) + " checked, " + std::to_string(report.skipped) +
              " skipped (bound undefined), worst ratio/bound " + fmt(worst)};
}

Outcome beatsBaselines(const std::vector<Summary>& s) {
  const double insure = meanOf(s, "insure");
  double best = std::numeric_limits<double>::infinity();
  for (const auto* b : {"stage-greedy", "mantri-like", "dolly-like"}) best = std::min(best, meanOf(s, b));
  const double margin = (best - insure) / best;
  return {margin >= 0.05, "insure " + fmt(insure) + " vs best baseline " + fmt(best) + ", margin " + fmt(100 * margin) +
                              "% (need >= 5%)"};
}

Outcome ablationOrder(const std::vector<Summary>& s) {
  const double er = meanOf(s, "Eff-Reli"), ee = meanOf(s, "Eff-Eff"), re = meanOf(s, "Reli-Eff"),
               rr = meanOf(s, "Reli-Reli"), efa = meanOf(s, "EFA"), jga = meanOf(s, "JGA");
  const bool pass = er <= ee && ee <= re && re <= rr && er < re && er < rr && efa < jga;
  return {pass, "Eff-Reli " + fmt(er) + ", Eff-Eff " + fmt(ee) + ", Reli-Eff " + fmt(re) + ", Reli-Reli " + fmt(rr) +
                    "; EFA " + fmt(efa) + " vs JGA " + fmt(jga)};
}

Outcome epsilonTrend() {
  ExperimentConfig c = desk();
  c.lambdas = {0.02, 0.07, 0.15};
  const auto sweep = runSweep(c, {});
  bool pass = true;
  std::string detail = "argmin epsilon";
  for (std::size_t i = 0; i < sweep.argminEpsilon.size(); ++i) {
    if (i > 0) pass = pass && sweep.argminEpsilon[i] <= sweep.argminEpsilon[i - 1];
    detail += " " + fmt(sweep.argminEpsilon[i]) + "@" + fmt(sweep.lambdas[i]);
  }
  return {pass, detail};
}

Outcome reproducible() {
  ExperimentConfig c = desk();
  c.seeds = {1, 2, 3};
  const fs::path a = fs::temp_directory_path() / "geoinsure-accept-a", b = fs::temp_directory_path() / "geoinsure-accept-b";
  fs::remove_all(a);
  fs::remove_all(b);
  runCompare(c, a);
  c.workers = 1;
  runCompare(c, b);
  std::size_t same = 0;
  const char* files[] = {"metrics.csv", "cdf.csv", "reduction.csv", "runs.csv"};
  for (const char* f : files) same += !slurp(a / f).empty() && slurp(a / f) == slurp(b / f);
  fs::remove_all(a);
  fs::remove_all(b);
  return {same == std::size(files), std::to_string(same) + "/" + std::to_string(std::size(files)) +
                                        " CSVs byte-identical across two runs"};
}

}  // namespace

int main() {
  criterion(1, "r(n)/n non-increasing", 10, perCopyRate);
  criterion(2, "composition matches enumeration", 30, composition);
  criterion(3, "trace audit", 300, audit);
  criterion(4, "competitive bound on tiny instances", 600, competitive);

  std::vector<Summary> compare, ablation;
  criterion(5, "insurer beats baselines at desk scale", kUntimed, [&] {
    compare = runCompare(desk(), {});
    return beatsBaselines(compare);
  });
  criterion(6, "ablation ordering", kUntimed, [&] {
    ablation = runAblation(desk(), {});
    return ablationOrder(ablation);
  });
  criterion(7, "best epsilon falls as load rises", kUntimed, epsilonTrend);
  criterion(8, "deterministic CSVs", kUntimed, reproducible);

  std::printf("%d of 8 criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
