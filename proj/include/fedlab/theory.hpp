#pragma once

#include <vector>

#include "fedlab/common.hpp"

namespace fedlab::theory {

// One-dimensional two-client construction: f1 = (mu/2)(t - a)^2,
// f2 = (mu/2)(t + a)^2, misspecified relative weights (1 + eps_w, 1 - eps_w).
struct TwoClientInstance {
    double mu = 1.0;
    double offset = 1.0;   // a
    double eps_w = 0.1;

    void validate() const {
        if (mu <= 0.0) throw ConfigError("TwoClientInstance: mu must be positive");
        if (offset <= 0.0) throw ConfigError("TwoClientInstance: offset must be positive");
        if (eps_w < 0.0 || eps_w > 0.5)
            throw ConfigError("TwoClientInstance: eps_w must lie in [0, 0.5]");
    }

    double gradient_heterogeneity_sq() const { return mu * mu * offset * offset; }  // G^2
    double target_objective(double theta) const {
        return 0.5 * mu * (theta * theta + offset * offset);
    }
    double weighted_objective(double theta) const {
        const double r1 = 1.0 + eps_w, r2 = 1.0 - eps_w;
        const double f1 = 0.5 * mu * (theta - offset) * (theta - offset);
        const double f2 = 0.5 * mu * (theta + offset) * (theta + offset);
        return (r1 * f1 + r2 * f2) / (r1 + r2);
    }
};

double two_client_minimizer(const TwoClientInstance& inst);
double two_client_gap(const TwoClientInstance& inst);

struct TheoryConstants {
    double smoothness = 1.0;       // L
    double strong_convexity = 1.0; // mu
    double heterogeneity = 1.0;    // G
    double hetero_slope = 1.0;     // B
    double grad_variance = 0.0;    // sigma^2
    double p_min = 0.05;
    int local_steps = 1;           // K
    double server_step = 1.0;      // gamma
    double effective_step = 0.0;   // eta_tilde = K * gamma * eta
    int num_clients = 1;           // N
    double universal_const = 1.0;  // C, unknowable; default 1
    double initial_gap = 1.0;      // h_0

    double variance_term() const {
        const double knp = static_cast<double>(local_steps) * num_clients * p_min;
        return grad_variance / knp +
               smoothness * grad_variance / (local_steps * server_step * server_step) +
               heterogeneity * heterogeneity / (num_clients * p_min);
    }
    double condition_number() const { return smoothness / strong_convexity; }
    double c0() const {
        return 8.0 * (1.0 + condition_number() * hetero_slope * hetero_slope /
                                (num_clients * p_min));
    }
};

// (1 - mu*eta/8)^R h0 + C*eta*V/mu + C*eps^2*G^2/mu.
// Throws if the step-size hypothesis eta_tilde <= 1/(c0 L) is violated.
double bias_floor_rhs(const TheoryConstants& constants, double eps_w, int rounds);

struct ResidualWeightError {
    Vector rho;      // p_true / p_hat per client
    double eps_w;    // max |rho - 1|
};

ResidualWeightError residual_weight_error(const Vector& p_true, const Vector& p_hat);

enum class EstimatorKind { OracleIpw, Naive, PluginIpw };

struct EnumerationSpec {
    EstimatorKind kind = EstimatorKind::OracleIpw;
    Vector estimator_probs;  // probabilities the estimator divides by (ignored for Naive)
    // Naive averages over participants conditional on a nonempty round.
};

// Exact expectation of the chosen estimator over all 2^n participation
// patterns, each weighted by prod p^A (1-p)^(1-A). n <= 20.
Vector enumerate_ipw_expectation(const std::vector<Vector>& deltas, const Vector& p_true,
                                 const EnumerationSpec& spec);

Vector enumerate_ipw_expectation_serial(const std::vector<Vector>& deltas, const Vector& p_true,
                                        const EnumerationSpec& spec);

}  // namespace fedlab::theory
