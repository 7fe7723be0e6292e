#include <algorithm>
#include <cmath>
#include <ostream>

#include "fedlab/csv.hpp"
#include "fedlab/panels.hpp"
#include "fedlab/rng.hpp"
#include "fedlab/theory.hpp"

namespace fedlab::expcli {

namespace {

using theory::TwoClientInstance;

const double kGridMu[3] = {0.5, 1.0, 2.0};
const double kGridA[3] = {0.5, 1.0, 3.0};
const double kGridEps[3] = {0.05, 0.2, 0.5};

// Independent 1-D Newton on the explicitly rho-weighted quadratic.
double numeric_weighted_minimizer(const TwoClientInstance& inst) {
    double theta = 1.0;
    for (int it = 0; it < 100; ++it) {
        const double h = 1e-5;
        const double g = (inst.weighted_objective(theta + h) - inst.weighted_objective(theta - h)) /
                         (2.0 * h);
        const double hess = (inst.weighted_objective(theta + h) - 2.0 * inst.weighted_objective(theta) +
                             inst.weighted_objective(theta - h)) /
                            (h * h);
        const double step = g / hess;
        theta -= step;
        if (std::abs(step) < 1e-14) break;
    }
    return theta;
}

CheckResult check_two_client_minimizer(bool inject_fault) {
    double max_err = 0.0;
    for (double mu : kGridMu)
        for (double a : kGridA)
            for (double eps : kGridEps) {
                TwoClientInstance inst{mu, a, eps};
                double analytic = theory::two_client_minimizer(inst);
                if (inject_fault) analytic += 1e-3;
                max_err = std::max(max_err, std::abs(analytic - numeric_weighted_minimizer(inst)));
            }
    return {"two_client_minimizer_grid", 0.0, max_err, 1e-10, max_err <= 1e-10};
}

CheckResult check_two_client_gap() {
    double max_err = 0.0;
    for (double mu : kGridMu)
        for (double a : kGridA)
            for (double eps : kGridEps) {
                TwoClientInstance inst{mu, a, eps};
                const double direct = inst.target_objective(eps * a) - inst.target_objective(0.0);
                max_err = std::max(max_err, std::abs(theory::two_client_gap(inst) - direct));
            }
    return {"two_client_gap_grid", 0.0, max_err, 1e-10, max_err <= 1e-10};
}

CheckResult check_lower_bound_constant() {
    double min_ratio = 1e30;
    for (double mu : kGridMu)
        for (double a : kGridA)
            for (double eps : kGridEps) {
                TwoClientInstance inst{mu, a, eps};
                const double scale = eps * eps * inst.gradient_heterogeneity_sq() / mu;
                min_ratio = std::min(min_ratio, theory::two_client_gap(inst) / scale);
            }
    return {"lower_bound_gap_ratio", 0.125, min_ratio, 0.0, min_ratio >= 0.125};
}

theory::TheoryConstants base_constants() {
    theory::TheoryConstants c;
    c.smoothness = 1.0;
    c.strong_convexity = 1.0;
    c.heterogeneity = 1.0;
    c.hetero_slope = 1.0;
    c.grad_variance = 2.0;
    c.p_min = 0.5;
    c.local_steps = 5;
    c.server_step = 1.0;
    c.num_clients = 10;
    c.initial_gap = 1.0;
    c.effective_step = 0.9 / (c.c0() * c.smoothness);
    return c;
}

CheckResult check_bias_floor_monotone_eps() {
    auto c = base_constants();
    double min_diff = 1e30;
    double prev = -1.0;
    for (double eps = 0.0; eps <= 0.41; eps += 0.05) {
        const double v = theory::bias_floor_rhs(c, eps, 100);
        if (prev >= 0.0) min_diff = std::min(min_diff, v - prev);
        prev = v;
    }
    return {"bias_floor_monotone_in_eps", 0.0, min_diff, 0.0, min_diff >= 0.0};
}

CheckResult check_bias_floor_monotone_h0() {
    auto c = base_constants();
    double min_diff = 1e30;
    double prev = -1.0;
    for (double h0 = 0.0; h0 <= 5.01; h0 += 0.5) {
        c.initial_gap = h0;
        const double v = theory::bias_floor_rhs(c, 0.1, 50);
        if (prev >= 0.0) min_diff = std::min(min_diff, v - prev);
        prev = v;
    }
    return {"bias_floor_monotone_in_h0", 0.0, min_diff, 0.0, min_diff >= 0.0};
}

CheckResult check_enumeration_unbiased(std::uint64_t seed) {
    rng::Stream s(seed, "verify-enum");
    double max_err = 0.0;
    for (int inst = 0; inst < 50; ++inst) {
        const int n = 2 + static_cast<int>(s.next_index(9));  // 2..10 clients
        std::vector<Vector> deltas;
        Vector p(n);
        Vector mean = Vector::Zero(2);
        for (int i = 0; i < n; ++i) {
            Vector d(2);
            d << s.next_normal(), s.next_normal();
            deltas.push_back(d);
            mean += d;
            p[i] = 0.1 + 0.85 * s.next_uniform();
        }
        mean /= static_cast<double>(n);
        theory::EnumerationSpec spec;
        spec.kind = theory::EstimatorKind::OracleIpw;
        spec.estimator_probs = p;
        const Vector expectation = theory::enumerate_ipw_expectation(deltas, p, spec);
        max_err = std::max(max_err, (expectation - mean).lpNorm<Eigen::Infinity>());
    }
    return {"enumeration_oracle_unbiased", 0.0, max_err, 1e-12, max_err <= 1e-12};
}

CheckResult check_residual_participation_only() {
    Vector pi_enroll(2), pi_part(2);
    pi_enroll << 0.9, 0.6;
    pi_part << 0.5, 0.7;
    const Vector p_true = pi_enroll.cwiseProduct(pi_part);
    const auto res = theory::residual_weight_error(p_true, pi_part);
    const double err = std::max(std::abs(res.rho[0] - 0.9), std::abs(res.rho[1] - 0.6));
    const bool pass = err <= 1e-15 && std::abs(res.eps_w - 0.4) <= 1e-15;
    return {"residual_error_participation_only", 0.4, res.eps_w, 1e-15, pass};
}

Matrix random_b_rows(rng::Stream& s, int n, int q) {
    Matrix b(n, q);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < q; ++j) b(i, j) = s.next_normal();
    return b;
}

Vector interior_moment(rng::Stream& s, const Matrix& b) {
    // Random convex combination with strictly positive weights.
    const Eigen::Index n = b.rows();
    Vector w(n);
    for (Eigen::Index i = 0; i < n; ++i) w[i] = 0.05 + s.next_uniform();
    w /= w.sum();
    return b.transpose() * w;
}

CheckResult check_calibration_constraints(std::uint64_t seed) {
    rng::Stream s(seed, "verify-cal");
    double max_sum_resid = 0.0;
    double max_moment_resid = 0.0;
    for (int inst = 0; inst < 100; ++inst) {
        const int q = 1 + static_cast<int>(s.next_index(3));
        const int n = q + 2 + static_cast<int>(s.next_index(static_cast<std::uint64_t>(48 - q)));
        const Matrix b = random_b_rows(s, n, q);
        const Vector mu = interior_moment(s, b);
        const auto cw = calibration::solve_calibration_weights(b, mu);
        max_sum_resid = std::max(max_sum_resid, std::abs(cw.weights.sum() - 1.0));
        max_moment_resid = std::max(max_moment_resid, (b.transpose() * cw.weights - mu).norm());
        if (cw.weights.minCoeff() < -1e-12)
            return {"calibration_constraints", 0.0, cw.weights.minCoeff(), 0.0, false};
    }
    const bool pass = max_sum_resid <= 1e-10 && max_moment_resid <= 1e-8;
    return {"calibration_constraints", 0.0, std::max(max_sum_resid, max_moment_resid), 1e-8, pass};
}

// Dense grid over the exact feasible set: parametrize by the null space of the
// constraint matrix around the solver's point, filter q >= 0.
CheckResult check_calibration_optimality(std::uint64_t seed) {
    rng::Stream s(seed, "verify-cal-opt");
    double worst_margin = 1e30;
    for (int inst = 0; inst < 20; ++inst) {
        const int q = 1;
        const int n = 3 + static_cast<int>(s.next_index(2));  // 3 or 4
        const Matrix b = random_b_rows(s, n, q);
        const Vector mu = interior_moment(s, b);
        const auto cw = calibration::solve_calibration_weights(b, mu);
        const double uniform = 1.0 / n;
        const double opt_obj = (cw.weights.array() - uniform).square().sum();

        Matrix constraints(q + 1, n);
        constraints.row(0).setOnes();
        constraints.bottomRows(q) = b.transpose();
        Eigen::FullPivLU<Matrix> lu(constraints);
        const Matrix null_basis = lu.kernel();
        const int dim = static_cast<int>(null_basis.cols());

        double best_feasible = 1e30;
        const double lo = -2.0, hi = 2.0, step = 0.002;
        auto eval_point = [&](const Vector& t) {
            const Vector qv = cw.weights + null_basis * t;
            if (qv.minCoeff() < 0.0) return;
            best_feasible = std::min(best_feasible, (qv.array() - uniform).square().sum());
        };
        if (dim == 1) {
            Vector t(1);
            for (double a = lo; a <= hi; a += step) {
                t[0] = a;
                eval_point(t);
            }
        } else {
            Vector t(2);
            for (double a = lo; a <= hi; a += 0.01)
                for (double bb = lo; bb <= hi; bb += 0.01) {
                    t[0] = a;
                    t[1] = bb;
                    eval_point(t);
                }
        }
        worst_margin = std::min(worst_margin, best_feasible - opt_obj);
    }
    return {"calibration_optimality_bruteforce", 0.0, worst_margin, 1e-6, worst_margin >= -1e-6};
}

CheckResult check_calibrated_unbiasedness() {
    // 3 enrolled clients, all 2^3 participation patterns in exact expectation.
    Vector q(3), pi(3);
    q << 0.5, 0.3, 0.2;
    pi << 0.6, 0.4, 0.8;
    std::vector<Vector> deltas;
    for (int i = 0; i < 3; ++i) {
        Vector d(2);
        d << 1.0 + i, -0.5 * i;
        deltas.push_back(d);
    }
    Vector expectation = Vector::Zero(2);
    for (int pat = 0; pat < 8; ++pat) {
        double prob = 1.0;
        std::vector<int> ids;
        std::vector<Vector> pd;
        for (int i = 0; i < 3; ++i) {
            if ((pat >> i) & 1) {
                prob *= pi[i];
                ids.push_back(i);
                pd.push_back(deltas[static_cast<std::size_t>(i)]);
            } else {
                prob *= 1.0 - pi[i];
            }
        }
        if (!ids.empty())
            expectation += prob * calibration::calibrated_round_update(q, ids, pd, pi);
    }
    Vector target = Vector::Zero(2);
    for (int i = 0; i < 3; ++i) target += q[i] * deltas[static_cast<std::size_t>(i)];
    const double err = (expectation - target).lpNorm<Eigen::Infinity>();
    return {"calibrated_update_unbiased", 0.0, err, 1e-12, err <= 1e-12};
}

CheckResult check_gradient_fd(const ExperimentConfig& cfg) {
    auto spec = cfg.population;
    spec.num_clients = 10;
    spec.samples_per_client = 30;
    const auto pop = synthgen::generate_population(spec);
    rng::Stream s(cfg.master_seed, "verify-fd");
    double max_rel = 0.0;
    for (int t = 0; t < 20; ++t) {
        Vector theta(spec.feature_dim);
        for (int k = 0; k < spec.feature_dim; ++k) theta[k] = s.next_normal();
        for (const auto& client : pop) {
            const Vector g = synthgen::client_gradient(client, theta, spec.ridge);
            Vector fd(spec.feature_dim);
            const double h = 1e-5;
            for (int k = 0; k < spec.feature_dim; ++k) {
                Vector tp = theta, tm = theta;
                tp[k] += h;
                tm[k] -= h;
                fd[k] = (synthgen::client_loss(client, tp, spec.ridge) -
                         synthgen::client_loss(client, tm, spec.ridge)) /
                        (2.0 * h);
            }
            max_rel = std::max(max_rel, (g - fd).norm() / std::max(g.norm(), 1e-12));
        }
    }
    return {"gradient_finite_difference", 0.0, max_rel, 1e-6, max_rel <= 1e-6};
}

CheckResult check_newton_gradnorm(const ExperimentConfig& cfg) {
    auto spec = cfg.population;
    spec.num_clients = 50;
    spec.samples_per_client = 50;
    const auto pop = synthgen::generate_population(spec);
    const auto sol = synthgen::solve_target_optimum(pop, spec.ridge, 1e-10, 100);
    return {"newton_target_gradnorm", 0.0, sol.grad_norm, 1e-10, sol.grad_norm < 1e-10};
}

CheckResult check_irls_recovery(std::uint64_t seed) {
    rng::Stream s(seed, "verify-irls");
    const int n = 100000;
    Matrix x(n, 2);
    Vector y(n);
    const double b0 = -0.5;
    Vector beta(2);
    beta << 1.0, -0.7;
    for (int i = 0; i < n; ++i) {
        x(i, 0) = s.next_normal();
        x(i, 1) = s.next_normal();
        y[i] = s.next_bernoulli(sigmoid(b0 + x.row(i).dot(beta))) ? 1.0 : 0.0;
    }
    propensity::FitConfig fc;
    const auto fit = propensity::fit_logistic(x, y, fc);
    double err = std::abs(fit.intercept - b0);
    err = std::max(err, (fit.coefficients - beta).lpNorm<Eigen::Infinity>());
    return {"irls_coefficient_recovery", 0.0, err, 0.05, err <= 0.05 && fit.converged};
}

}  // namespace

std::vector<CheckResult> run_verification_checks(const ExperimentConfig& cfg, bool inject_fault) {
    std::vector<CheckResult> out;
    out.push_back(check_two_client_minimizer(inject_fault));
    out.push_back(check_two_client_gap());
    out.push_back(check_lower_bound_constant());
    out.push_back(check_bias_floor_monotone_eps());
    out.push_back(check_bias_floor_monotone_h0());
    out.push_back(check_enumeration_unbiased(cfg.master_seed));
    out.push_back(check_residual_participation_only());
    out.push_back(check_calibration_constraints(cfg.master_seed));
    out.push_back(check_calibration_optimality(cfg.master_seed));
    out.push_back(check_calibrated_unbiasedness());
    out.push_back(check_gradient_fd(cfg));
    out.push_back(check_newton_gradnorm(cfg));
    out.push_back(check_irls_recovery(cfg.master_seed));
    return out;
}

int run_verification_suite(const ExperimentConfig& cfg, std::ostream& report, bool inject_fault) {
    const auto checks = run_verification_checks(cfg, inject_fault);
    int failures = 0;
    report << "check,expected,actual,tolerance,pass\n";
    for (const auto& c : checks) {
        report << c.name << "," << csv::format_double(c.expected) << ","
               << csv::format_double(c.actual) << "," << csv::format_double(c.tolerance) << ","
               << (c.pass ? "1" : "0") << "\n";
        if (!c.pass) ++failures;
    }
    return failures == 0 ? 0 : 1;
}

}  // namespace fedlab::expcli
