#pragma once

// Experiment orchestration behind the CLI: scenario instantiation from a
// RunConfig, the validation suites, Monte Carlo ensembles, CSV emission.

#include <iosfwd>
#include <string>
#include <vector>

#include "fracsteer/config.hpp"
#include "fracsteer/scenario.hpp"

namespace fracsteer::harness {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct ExperimentReport {
    std::string subcommand;
    std::string config_echo;
    std::uint64_t seed = 0;
    double wall_ms = 0.0;
    std::vector<CheckResult> checks;
    std::vector<std::string> tables;
    std::vector<std::string> files_written;

    bool all_pass() const;
};

scenario::ScenarioParams scenario_params_from(const cfg::RunConfig& config);

// The noise-engine property suite behind `fbm-validate` (also exercised by
// the acceptance tests): kernel-covariance identity, generator covariance
// agreement, second-moment bound, Ito isometry, determinism.
void fbm_validation_suite(std::vector<CheckResult>& out, double hurst, std::uint64_t seed,
                          int paths = 10000);

// subcommand: fbm-validate | solve | ledger | control-sweep | all.
// CSV outputs land in config.out_dir (created if absent).
ExperimentReport run(const std::string& subcommand, const cfg::RunConfig& config);

void print_report(const ExperimentReport& report, std::ostream& os);

// worker cap: FRACSTEER_THREADS (>=1) bounds hardware concurrency
int worker_count(int replicates);

}  // namespace fracsteer::harness
