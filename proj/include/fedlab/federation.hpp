#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "fedlab/calibration.hpp"
#include "fedlab/common.hpp"
#include "fedlab/propensity.hpp"
#include "fedlab/selection.hpp"
#include "fedlab/synthgen.hpp"

namespace fedlab::federation {

enum class Method { Naive, RoundOnlyIpw, FedIpw, OracleIpw, Calibrated };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct TrainingConfig {
    int local_steps = 5;        // K
    double local_step = 0.1;    // eta
    double server_step = 1.0;   // gamma
    int rounds = 300;           // R
    int batch_size = 0;         // 0 = full batch
    Method method = Method::FedIpw;
    std::uint64_t seed = 0;

    double effective_step() const { return local_steps * server_step * local_step; }
    void validate() const;
};

struct MethodConfig {
    propensity::FitConfig fit;
    int refit_window = 50;
    // FedIPW divides by the true population size N by default; an estimate
    // N_hat = N_enroll / mean(pi_hat_enroll) can be substituted instead.
    bool estimate_population_size = false;
    calibration::BalanceMapSpec balance;
    double moment_noise_sigma = 0.0;
    bool hajek_normalize = false;
};

struct RoundUpdate {
    int client_id = 0;
    Vector delta;
};

struct MetricsRow {
    int round = 0;
    std::string method;
    double target_loss = 0.0;
    double dist_to_opt = 0.0;
    int participants = 0;
    double mean_weight = 0.0;
    double max_rho_err = 0.0;
};

struct ServerState {
    Vector theta;
    int round = 0;
    std::vector<MetricsRow> history;
};

RoundUpdate local_update(const synthgen::ClientRecord& client, const Vector& theta,
                         const TrainingConfig& cfg, double ridge, int round_index);

// Generic K-step constant-rate descent on a supplied gradient; used for
// injectable surrogate objectives in tests and analytical runs.
Vector local_descent(const std::function<Vector(const Vector&)>& gradient, const Vector& theta,
                     int steps, double step_size);

Vector aggregate_naive(const std::vector<RoundUpdate>& updates);

// (1/divisor) * sum delta_i / p_i over participants.
Vector aggregate_ipw(const std::vector<RoundUpdate>& updates, const Vector& inclusion_probs,
                     double divisor);

void server_step(ServerState& state, const Vector& aggregate, double gamma);

struct RunResult {
    ServerState state;
    selection::SelectionTrace trace;
    std::vector<MetricsRow> metrics;
};

RunResult run_training(const synthgen::Population& pop, const selection::SelectionSpec& sel_spec,
                       const TrainingConfig& cfg, const synthgen::OracleSolution& oracle,
                       const MethodConfig& mcfg, double ridge);

// Serial reference for the per-round delta kernel.
std::vector<RoundUpdate> compute_round_deltas(const synthgen::Population& pop,
                                              const std::vector<int>& participant_ids,
                                              const Vector& theta, const TrainingConfig& cfg,
                                              double ridge, int round_index);
std::vector<RoundUpdate> compute_round_deltas_serial(const synthgen::Population& pop,
                                                     const std::vector<int>& participant_ids,
                                                     const Vector& theta,
                                                     const TrainingConfig& cfg, double ridge,
                                                     int round_index);

}  // namespace fedlab::federation
