#pragma once

#include "fedlab/common.hpp"
#include "fedlab/selection.hpp"
#include "fedlab/synthgen.hpp"

namespace fedlab::propensity {

struct FitConfig {
    double ridge = 1e-6;       // slopes only; intercept unpenalized
    double clip_floor = 0.05;  // p_min
    double tol = 1e-8;
    int max_iter = 100;
};

struct LogisticFit {
    double intercept = 0.0;
    Vector coefficients;
    double ridge = 0.0;
    double clip_floor = 0.05;
    bool converged = false;
    int iterations = 0;

    double predict_raw(const Vector& features) const {
        if (features.size() != coefficients.size())
            throw DimensionError("LogisticFit::predict: feature dimension mismatch");
        return sigmoid(intercept + coefficients.dot(features));
    }
    double predict_clipped(const Vector& features) const {
        return std::clamp(predict_raw(features), clip_floor, 1.0);
    }
};

struct InclusionEstimate {
    Vector p_hat;       // per client
    Vector enroll_hat;  // clipped components
    Vector part_hat;
};

// Ridge-penalized IRLS. Converged when the parameter step infinity-norm drops
// below tol; step-halving keeps the penalized negative log-likelihood
// non-increasing across accepted iterations.
LogisticFit fit_logistic(const Matrix& features, const Vector& labels, const FitConfig& cfg);

double penalized_nll(const Matrix& features, const Vector& labels, double intercept,
                     const Vector& coef, double ridge);

// Fit on (Z_i, E_i) over the full population. Requires both enrolled and
// non-enrolled clients.
LogisticFit fit_enrollment_model(const synthgen::Population& pop,
                                 const std::vector<int>& enrolled, const FitConfig& cfg);

// Fit on stacked (z_i (+) x_{i,r}, A_{i,r}) rows restricted to enrolled
// clients over rounds [first_round, last_round].
LogisticFit fit_participation_model(const synthgen::Population& pop,
                                    const selection::SelectionTrace& trace, int first_round,
                                    int last_round, const FitConfig& cfg);

InclusionEstimate plug_in_inclusion(const LogisticFit& enroll_fit, const LogisticFit& part_fit,
                                    const synthgen::Population& pop, const Matrix& preround_cov);

}  // namespace fedlab::propensity
