#pragma once

#include <cstdint>
#include <vector>

#include "fedlab/common.hpp"

namespace fedlab::calibration {

struct BalanceMapSpec {
    // Identity coordinates of z, optionally followed by one-hot indicator bins
    // on the first coordinate.
    int covariate_dim = 2;
    int indicator_bins = 0;      // 0 disables the indicator block
    double bin_low = -1.0;       // bin edges span [bin_low, bin_high]
    double bin_high = 1.0;

    int output_dim() const { return covariate_dim + indicator_bins; }
};

Vector evaluate_balance_map(const BalanceMapSpec& spec, const Vector& z);

struct CalibrationWeights {
    Vector weights;              // over enrolled clients, sum to one
    Vector lagrange;             // KKT multipliers of the equality system
    std::vector<int> active_set; // indices pinned at zero
    double constraint_residual = 0.0;
    double slack_norm = 0.0;     // nonzero when mu_b was projected onto the hull
};

struct InfeasibleError : NumericalError {
    using NumericalError::NumericalError;
};

// Minimize sum (q_i - 1/n)^2 s.t. sum q = 1, B^T q = mu_b, q >= 0.
// Equality-constrained closed form via KKT, with an active-set loop pinning
// negative weights at zero. When allow_projection is set, an infeasible mu_b
// is replaced by its closest attainable moment vector and the gap is reported
// in slack_norm; otherwise infeasibility throws.
CalibrationWeights solve_calibration_weights(const Matrix& b_rows, const Vector& mu_b,
                                             bool allow_projection = false);

// sum over participants of q_i * delta_i / part_hat_i (no renormalization).
Vector calibrated_round_update(const Vector& weights, const std::vector<int>& participant_ids,
                               const std::vector<Vector>& deltas, const Vector& part_hat,
                               bool hajek_normalize = false);

Vector perturb_moments(const Vector& mu_b, double sigma, std::uint64_t master_seed,
                       std::uint64_t stream_id = 0);

}  // namespace fedlab::calibration
