#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "fedlab/config.hpp"

namespace fedlab::expcli {

std::uint64_t replication_seed(std::uint64_t master_seed, int replication);

// Panels a-d of the experiment suite; writes panel_<x>.csv under out_dir.
void run_panel(char panel, const ExperimentConfig& cfg, const std::string& out_dir);

// Generic sweep: final-round metrics per (value, replication, method).
void run_sweep(const ExperimentConfig& cfg, const std::string& param,
               const std::vector<double>& values, const std::string& out_dir);

struct CheckResult {
    std::string name;
    double expected = 0.0;
    double actual = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

// Theory and calibration invariant checks. The mutation flag deliberately
// corrupts one oracle comparison so a harness can confirm the suite is
// sensitive to failures.
std::vector<CheckResult> run_verification_checks(const ExperimentConfig& cfg,
                                                 bool inject_fault = false);

// Prints one line per check; returns 0 when all pass, 1 otherwise.
int run_verification_suite(const ExperimentConfig& cfg, std::ostream& report,
                           bool inject_fault = false);

}  // namespace fedlab::expcli
