#include "fedlab/theory.hpp"

#include <omp.h>

#include <cmath>

namespace fedlab::theory {

double two_client_minimizer(const TwoClientInstance& inst) {
    inst.validate();
    return inst.eps_w * inst.offset;
}

double two_client_gap(const TwoClientInstance& inst) {
    inst.validate();
    return 0.5 * inst.eps_w * inst.eps_w * inst.gradient_heterogeneity_sq() / inst.mu;
}

double bias_floor_rhs(const TheoryConstants& c, double eps_w, int rounds) {
    if (c.effective_step <= 0.0) throw ConfigError("bias_floor_rhs: effective step must be positive");
    const double step_cap = 1.0 / (c.c0() * c.smoothness);
    if (c.effective_step > step_cap)
        throw ConfigError("bias_floor_rhs: step-size hypothesis violated: eta_tilde = " +
                          std::to_string(c.effective_step) + " > 1/(c0*L) = " +
                          std::to_string(step_cap));
    const double contraction =
        std::pow(1.0 - c.strong_convexity * c.effective_step / 8.0, rounds) * c.initial_gap;
    const double variance = c.universal_const * c.effective_step * c.variance_term() /
                            c.strong_convexity;
    const double floor = c.universal_const * eps_w * eps_w * c.heterogeneity * c.heterogeneity /
                         c.strong_convexity;
    return contraction + variance + floor;
}

ResidualWeightError residual_weight_error(const Vector& p_true, const Vector& p_hat) {
    if (p_true.size() != p_hat.size())
        throw DimensionError("residual_weight_error: size mismatch");
    ResidualWeightError out;
    out.rho.resize(p_true.size());
    out.eps_w = 0.0;
    for (Eigen::Index i = 0; i < p_true.size(); ++i) {
        if (p_hat[i] <= 0.0)
            throw InvariantViolation("residual_weight_error: nonpositive p_hat");
        out.rho[i] = p_true[i] / p_hat[i];
        out.eps_w = std::max(out.eps_w, std::abs(out.rho[i] - 1.0));
    }
    return out;
}

namespace {

Vector evaluate_pattern(std::uint64_t pattern, const std::vector<Vector>& deltas,
                        const EnumerationSpec& spec, int n) {
    Vector est = Vector::Zero(deltas.front().size());
    int count = 0;
    for (int i = 0; i < n; ++i) {
        if ((pattern >> i) & 1ULL) {
            ++count;
            switch (spec.kind) {
                case EstimatorKind::Naive:
                    est += deltas[static_cast<std::size_t>(i)];
                    break;
                case EstimatorKind::OracleIpw:
                case EstimatorKind::PluginIpw:
                    est += deltas[static_cast<std::size_t>(i)] / spec.estimator_probs[i];
                    break;
            }
        }
    }
    if (spec.kind == EstimatorKind::Naive) {
        if (count == 0) return est;  // handled by conditioning in the caller
        est /= static_cast<double>(count);
    } else {
        est /= static_cast<double>(n);
    }
    return est;
}

}  // namespace

Vector enumerate_ipw_expectation_serial(const std::vector<Vector>& deltas, const Vector& p_true,
                                        const EnumerationSpec& spec) {
    const int n = static_cast<int>(deltas.size());
    if (n == 0) throw ConfigError("enumerate_ipw_expectation: no clients");
    if (n > 20)
        throw ConfigError("enumerate_ipw_expectation: more than 20 clients; use Monte Carlo");
    if (p_true.size() != n)
        throw DimensionError("enumerate_ipw_expectation: probability count mismatch");
    if (spec.kind != EstimatorKind::Naive && spec.estimator_probs.size() != n)
        throw DimensionError("enumerate_ipw_expectation: estimator probability count mismatch");

    const std::uint64_t patterns = 1ULL << n;
    Vector acc = Vector::Zero(deltas.front().size());
    double nonempty_mass = 0.0;
    for (std::uint64_t pat = 0; pat < patterns; ++pat) {
        double prob = 1.0;
        for (int i = 0; i < n; ++i)
            prob *= ((pat >> i) & 1ULL) ? p_true[i] : (1.0 - p_true[i]);
        if (pat != 0) nonempty_mass += prob;
        acc += prob * evaluate_pattern(pat, deltas, spec, n);
    }
    // The naive estimator is undefined on the empty round; condition on S_r
    // being nonempty, matching the empty-round skip policy.
    if (spec.kind == EstimatorKind::Naive && nonempty_mass > 0.0) acc /= nonempty_mass;
    return acc;
}

Vector enumerate_ipw_expectation(const std::vector<Vector>& deltas, const Vector& p_true,
                                 const EnumerationSpec& spec) {
    const int n = static_cast<int>(deltas.size());
    if (n == 0) throw ConfigError("enumerate_ipw_expectation: no clients");
    if (n > 20)
        throw ConfigError("enumerate_ipw_expectation: more than 20 clients; use Monte Carlo");
    if (p_true.size() != n)
        throw DimensionError("enumerate_ipw_expectation: probability count mismatch");
    if (spec.kind != EstimatorKind::Naive && spec.estimator_probs.size() != n)
        throw DimensionError("enumerate_ipw_expectation: estimator probability count mismatch");

    const std::uint64_t patterns = 1ULL << n;
    constexpr int kChunks = 64;
    const std::uint64_t chunk = (patterns + kChunks - 1) / kChunks;
    std::vector<Vector> partial(kChunks, Vector::Zero(deltas.front().size()));
    std::vector<double> partial_mass(kChunks, 0.0);

#pragma omp parallel for schedule(static)
    for (int c = 0; c < kChunks; ++c) {
        const std::uint64_t lo = static_cast<std::uint64_t>(c) * chunk;
        const std::uint64_t hi = std::min(lo + chunk, patterns);
        for (std::uint64_t pat = lo; pat < hi; ++pat) {
            double prob = 1.0;
            for (int i = 0; i < n; ++i)
                prob *= ((pat >> i) & 1ULL) ? p_true[i] : (1.0 - p_true[i]);
            if (pat != 0) partial_mass[static_cast<std::size_t>(c)] += prob;
            partial[static_cast<std::size_t>(c)] += prob * evaluate_pattern(pat, deltas, spec, n);
        }
    }
    Vector acc = Vector::Zero(deltas.front().size());
    double nonempty_mass = 0.0;
    for (int c = 0; c < kChunks; ++c) {
        acc += partial[static_cast<std::size_t>(c)];
        nonempty_mass += partial_mass[static_cast<std::size_t>(c)];
    }
    if (spec.kind == EstimatorKind::Naive && nonempty_mass > 0.0) acc /= nonempty_mass;
    return acc;
}

}  // namespace fedlab::theory
