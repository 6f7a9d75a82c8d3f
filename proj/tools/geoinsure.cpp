// Command-line front end: simulation experiments, verification and
// generators. Exit codes: 0 success, 1 configuration error, 2 verification
// failure.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "geoinsure/experiment.hpp"
#include "geoinsure/verify.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace geoinsure;

namespace {

constexpr int kConfigError = 1;
constexpr int kVerifyFailure = 2;

struct CommonOptions {
  std::string config;
  std::vector<std::uint64_t> seeds;
  std::string out;
  std::optional<std::string> scheduler;
  std::optional<double> epsilon;
  std::optional<double> lambda;
  std::vector<std::string> overrides;
};

void addCommon(CLI::App* cmd, CommonOptions& o, bool withOut = true) {
  cmd->add_option("-c,--config", o.config, "experiment config (JSON)")->check(CLI::ExistingFile);
  cmd->add_option("-s,--seed", o.seeds, "seed; repeat for several")->take_all();
  if (withOut) cmd->add_option("-o,--out", o.out, "output directory");
  cmd->add_option("--scheduler", o.scheduler, "insure, stage-greedy, mantri-like, dolly-like or a policy name");
  cmd->add_option("--epsilon", o.epsilon, "insurance epsilon in (0,1)");
  cmd->add_option("--lambda", o.lambda, "job arrival rate per slot");
  cmd->add_option("--set", o.overrides, "override a config key, e.g. workload.jobs=50")->take_all();
}

nlohmann::json readJson(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open " + path);
  return nlohmann::json::parse(in);
}

ExperimentConfig loadConfig(const CommonOptions& o) {
  nlohmann::json doc = o.config.empty() ? nlohmann::json::object() : readJson(o.config);
  if (!doc.is_object()) throw std::invalid_argument("config must be a JSON object");
  if (o.scheduler) doc["scheduler"] = *o.scheduler;
  if (o.epsilon) doc["epsilon"] = *o.epsilon;
  if (o.lambda) doc["workload"]["lambda"] = *o.lambda;
  if (!o.seeds.empty()) doc["seeds"] = o.seeds;
  for (const auto& s : o.overrides) applyOverride(doc, s);
  return experimentConfigFromJson(doc);
}

void printSummaries(const std::vector<Summary>& summaries) {
  std::printf("%-14s %8s %8s %6s %14s %12s %10s\n", "scheduler", "epsilon", "lambda", "seeds", "mean_flowtime",
              "seed_stddev", "copies/task");
  for (const auto& s : summaries)
    std::printf("%-14s %8.3g %8.3g %6zu %14.6g %12.4g %10.4g\n", s.scheduler.c_str(), s.epsilon, s.lambda, s.seeds,
                s.meanFlowtime, s.seedStddev, s.copiesPerTask);
}

void writeJson(const std::string& path, const nlohmann::json& doc) {
  if (path.empty() || path == "-") {
    std::cout << doc.dump(2) << '\n';
    return;
  }
  if (const auto parent = fs::path(path).parent_path(); !parent.empty()) fs::create_directories(parent);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << doc.dump(2) << '\n';
}

std::uint64_t firstSeed(const ExperimentConfig& c) { return c.seeds.front(); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"geoinsure: insured task placement across geo-distributed clusters"};
  app.require_subcommand(1);

  CommonOptions simulateOpt, sweepOpt, ablateOpt, compareOpt, topoOpt, workOpt;
  auto* simulateCmd = app.add_subcommand("simulate", "run one scheduler over the configured seeds");
  addCommon(simulateCmd, simulateOpt);
  bool traces = false;
  simulateCmd->add_flag("--traces", traces, "write per-run JSON-lines traces");
  auto* sweepCmd = app.add_subcommand("sweep", "epsilon x lambda grid for an insurance policy");
  addCommon(sweepCmd, sweepOpt);
  auto* ablateCmd = app.add_subcommand("ablate", "round-order and per-job variants of the insurer");
  addCommon(ablateCmd, ablateOpt);
  auto* compareCmd = app.add_subcommand("compare", "insurer against the baselines");
  addCommon(compareCmd, compareOpt);

  auto* verifyCmd = app.add_subcommand("verify", "property checks, trace audits and the competitive-ratio check");
  VerifyConfig verify;
  std::string verifyOut;
  std::vector<std::uint64_t> auditSeeds;
  verifyCmd->add_option("-s,--seed", verify.seed, "seed for generated sequences and instances");
  verifyCmd->add_option("--sequences", verify.perCopySequences, "random distribution sequences");
  verifyCmd->add_option("--max-n", verify.perCopyMaxN, "longest prefix checked");
  verifyCmd->add_option("--instances", verify.tinyInstances, "tiny instances for the competitive check");
  verifyCmd->add_option("--epsilon", verify.epsilons, "epsilons for the competitive check")->take_all();
  verifyCmd->add_option("--audit-seed", auditSeeds, "seeds for the trace audits")->take_all();
  verifyCmd->add_option("--audit-jobs", verify.auditJobs, "jobs per audited run");
  verifyCmd->add_option("-o,--out", verifyOut, "write the JSON report here");

  auto* topoCmd = app.add_subcommand("gen-topology", "emit a generated cluster model as JSON");
  addCommon(topoCmd, topoOpt, false);
  std::string topoOut;
  topoCmd->add_option("-o,--out", topoOut, "output file (default stdout)");
  auto* workCmd = app.add_subcommand("gen-workload", "emit a generated job list as JSON");
  addCommon(workCmd, workOpt, false);
  std::string workOut;
  workCmd->add_option("-o,--out", workOut, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kConfigError;
  }

  try {
    if (*simulateCmd) {
      auto c = loadConfig(simulateOpt);
      c.writeTraces = c.writeTraces || traces;
      printSummaries(runSimulate(c, simulateOpt.out));
    } else if (*sweepCmd) {
      const auto sweep = runSweep(loadConfig(sweepOpt), sweepOpt.out);
      printSummaries(sweep.summaries);
      for (std::size_t l = 0; l < sweep.lambdas.size(); ++l)
        std::printf("lambda %g: best epsilon %g\n", sweep.lambdas[l], sweep.argminEpsilon[l]);
    } else if (*ablateCmd) {
      printSummaries(runAblation(loadConfig(ablateOpt), ablateOpt.out));
    } else if (*compareCmd) {
      printSummaries(runCompare(loadConfig(compareOpt), compareOpt.out));
    } else if (*verifyCmd) {
      if (!auditSeeds.empty()) verify.auditSeeds = auditSeeds;
      const auto report = runVerifySuite(verify);
      std::cout << report.toText();
      if (!verifyOut.empty()) writeJson(verifyOut, report.toJson());
      return report.pass() ? 0 : kVerifyFailure;
    } else if (*topoCmd) {
      const auto c = loadConfig(topoOpt);
      const auto topo = genTopology(c.topology, firstSeed(c));
      nlohmann::json doc = PerformanceModel(topo.clusters, topo.links, c.topology.model).toJson();
      doc["class_of"] = topo.classOf;
      doc["degree"] = topo.degree;
      writeJson(topoOut, doc);
    } else if (*workCmd) {
      const auto c = loadConfig(workOpt);
      writeJson(workOut, toJson(buildScenario(c, c.workload.lambda, firstSeed(c))));
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfigError;
  }
  return 0;
}
