#include "fedlab/calibration.hpp"

#include <algorithm>
#include <cmath>

#include "fedlab/rng.hpp"

namespace fedlab::calibration {

Vector evaluate_balance_map(const BalanceMapSpec& spec, const Vector& z) {
    if (z.size() != spec.covariate_dim)
        throw DimensionError("evaluate_balance_map: z dimension mismatch");
    Vector out(spec.output_dim());
    out.head(spec.covariate_dim) = z;
    if (spec.indicator_bins > 0) {
        out.tail(spec.indicator_bins).setZero();
        const double width = (spec.bin_high - spec.bin_low) / spec.indicator_bins;
        int bin = static_cast<int>(std::floor((z[0] - spec.bin_low) / width));
        bin = std::clamp(bin, 0, spec.indicator_bins - 1);
        out[spec.covariate_dim + bin] = 1.0;
    }
    return out;
}

namespace {

constexpr double kResidualTol = 1e-6;

struct EqualitySolve {
    Vector q;        // full-length weights, pinned entries zero
    Vector lagrange;
    bool ok = false;
};

// Minimize sum_F (q_i - u)^2 subject to A_F q_F = c on the free set.
EqualitySolve solve_on_free_set(const Matrix& constraints, const Vector& rhs,
                                const std::vector<int>& free_idx, double uniform,
                                bool check_rank) {
    const Eigen::Index m = constraints.rows();
    const Eigen::Index nf = static_cast<Eigen::Index>(free_idx.size());
    EqualitySolve out;
    if (nf < m) return out;

    Matrix a_free(m, nf);
    for (Eigen::Index j = 0; j < nf; ++j) a_free.col(j) = constraints.col(free_idx[static_cast<std::size_t>(j)]);
    const Matrix gram = a_free * a_free.transpose();
    if (check_rank) {
        Eigen::FullPivLU<Matrix> lu(gram);
        if (lu.rank() < m)
            throw NumericalError("solve_calibration_weights: degenerate constraints (rank-deficient AA^T)");
    }
    const Vector resid = rhs - a_free * Vector::Constant(nf, uniform);
    Eigen::LDLT<Matrix> ldlt(gram);
    const Vector lambda = ldlt.solve(resid);
    if ((gram * lambda - resid).norm() > kResidualTol) return out;

    const Vector q_free = Vector::Constant(nf, uniform) + a_free.transpose() * lambda;
    out.q = Vector::Zero(constraints.cols());
    for (Eigen::Index j = 0; j < nf; ++j) out.q[free_idx[static_cast<std::size_t>(j)]] = q_free[j];
    out.lagrange = lambda;
    out.ok = true;
    return out;
}

struct ActiveSetResult {
    Vector q;
    Vector lagrange;
    std::vector<int> pinned;
    bool feasible = false;
};

ActiveSetResult run_active_set(const Matrix& constraints, const Vector& rhs, Eigen::Index n) {
    const double uniform = 1.0 / static_cast<double>(n);
    std::vector<int> free_idx(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) free_idx[static_cast<std::size_t>(i)] = static_cast<int>(i);
    std::vector<int> pinned;

    ActiveSetResult res;
    bool first = true;
    while (true) {
        EqualitySolve sol = solve_on_free_set(constraints, rhs, free_idx, uniform, first);
        first = false;
        if (!sol.ok) return res;  // exhaustion or inconsistent system
        int worst = -1;
        double worst_val = -1e-12;
        for (int idx : free_idx) {
            if (sol.q[idx] < worst_val) {
                worst_val = sol.q[idx];
                worst = idx;
            }
        }
        if (worst < 0) {
            res.q = sol.q;
            res.lagrange = sol.lagrange;
            res.pinned = pinned;
            res.feasible = true;
            return res;
        }
        pinned.push_back(worst);
        free_idx.erase(std::find(free_idx.begin(), free_idx.end(), worst));
    }
}

}  // namespace

CalibrationWeights solve_calibration_weights(const Matrix& b_rows, const Vector& mu_b,
                                             bool allow_projection) {
    const Eigen::Index n = b_rows.rows();
    const Eigen::Index q_dim = mu_b.size();
    if (b_rows.cols() != q_dim)
        throw DimensionError("solve_calibration_weights: moment dimension mismatch");
    if (n < q_dim + 1)
        throw ConfigError("solve_calibration_weights: need at least q+1 enrolled clients");

    Matrix constraints(q_dim + 1, n);
    constraints.row(0).setOnes();
    constraints.bottomRows(q_dim) = b_rows.transpose();

    auto rhs_for = [&](const Vector& target) {
        Vector rhs(q_dim + 1);
        rhs[0] = 1.0;
        rhs.tail(q_dim) = target;
        return rhs;
    };

    ActiveSetResult res = run_active_set(constraints, rhs_for(mu_b), n);
    Vector target = mu_b;
    double slack = 0.0;

    if (!res.feasible) {
        if (!allow_projection)
            throw InfeasibleError("solve_calibration_weights: mu_b outside the convex hull of b rows");
        // Pull the target along the segment from the always-feasible enrolled
        // mean toward mu_b; binary search for the closest attainable point.
        const Vector feasible_mean = b_rows.colwise().mean();
        double lo = 0.0, hi = 1.0;
        ActiveSetResult best = run_active_set(constraints, rhs_for(feasible_mean), n);
        for (int it = 0; it < 50; ++it) {
            const double mid = 0.5 * (lo + hi);
            const Vector cand = feasible_mean + mid * (mu_b - feasible_mean);
            ActiveSetResult attempt = run_active_set(constraints, rhs_for(cand), n);
            if (attempt.feasible) {
                lo = mid;
                best = attempt;
                target = cand;
            } else {
                hi = mid;
            }
        }
        if (!best.feasible)
            throw InfeasibleError("solve_calibration_weights: projection failed");
        res = best;
        slack = (target - mu_b).norm();
    }

    CalibrationWeights out;
    // The active-set loop tolerates entries down to -1e-12; snap those to the
    // boundary so the returned weights honor q >= 0 exactly.
    out.weights = res.q.cwiseMax(0.0);
    out.weights /= out.weights.sum();
    out.lagrange = res.lagrange;
    out.active_set = res.pinned;
    std::sort(out.active_set.begin(), out.active_set.end());
    out.slack_norm = slack;
    out.constraint_residual = std::max(std::abs(out.weights.sum() - 1.0),
                                       (b_rows.transpose() * out.weights - target).norm());
    return out;
}

Vector calibrated_round_update(const Vector& weights, const std::vector<int>& participant_ids,
                               const std::vector<Vector>& deltas, const Vector& part_hat,
                               bool hajek_normalize) {
    if (participant_ids.size() != deltas.size())
        throw DimensionError("calibrated_round_update: participant/delta count mismatch");
    if (deltas.empty()) throw ConfigError("calibrated_round_update: empty round");
    Vector sum = Vector::Zero(deltas.front().size());
    double weight_mass = 0.0;
    for (std::size_t k = 0; k < participant_ids.size(); ++k) {
        const int i = participant_ids[k];
        if (i < 0 || i >= weights.size())
            throw InvariantViolation("calibrated_round_update: participant not enrolled");
        if (part_hat[i] <= 0.0)
            throw InvariantViolation("calibrated_round_update: nonpositive participation propensity");
        const double w = weights[i] / part_hat[i];
        sum += w * deltas[k];
        weight_mass += w;
    }
    if (hajek_normalize && weight_mass > 0.0) sum /= weight_mass;
    return sum;
}

Vector perturb_moments(const Vector& mu_b, double sigma, std::uint64_t master_seed,
                       std::uint64_t stream_id) {
    if (sigma < 0.0) throw ConfigError("perturb_moments: sigma must be nonnegative");
    if (sigma == 0.0) return mu_b;
    rng::Stream s(master_seed, "moment-noise", stream_id);
    Vector out = mu_b;
    for (Eigen::Index k = 0; k < out.size(); ++k) out[k] += sigma * s.next_normal();
    return out;
}

}  // namespace fedlab::calibration
