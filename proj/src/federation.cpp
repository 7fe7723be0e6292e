#include "fedlab/federation.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <iostream>

#include "fedlab/rng.hpp"

namespace fedlab::federation {

std::string method_name(Method m) {
    switch (m) {
        case Method::Naive: return "naive";
        case Method::RoundOnlyIpw: return "round_only_ipw";
        case Method::FedIpw: return "fedipw";
        case Method::OracleIpw: return "oracle_ipw";
        case Method::Calibrated: return "calibrated";
    }
    throw ConfigError("unknown method");
}

Method method_from_name(const std::string& name) {
    if (name == "naive") return Method::Naive;
    if (name == "round_only_ipw") return Method::RoundOnlyIpw;
    if (name == "fedipw") return Method::FedIpw;
    if (name == "oracle_ipw") return Method::OracleIpw;
    if (name == "calibrated") return Method::Calibrated;
    throw ConfigError("unknown method name: " + name);
}

void TrainingConfig::validate() const {
    if (local_steps < 1) throw ConfigError("local_steps must be >= 1");
    if (local_step <= 0.0) throw ConfigError("local_step must be positive");
    if (server_step < 1.0) throw ConfigError("server_step must be >= 1");
    if (rounds < 1) throw ConfigError("rounds must be >= 1");
    if (batch_size < 0) throw ConfigError("batch_size must be nonnegative");
}

RoundUpdate local_update(const synthgen::ClientRecord& client, const Vector& theta,
                         const TrainingConfig& cfg, double ridge, int round_index) {
    if (theta.size() != client.features.cols())
        throw DimensionError("local_update: theta dimension mismatch");
    Vector y = theta;
    const Eigen::Index n = client.features.rows();
    rng::Stream batch_stream(cfg.seed, "sgd", static_cast<std::uint64_t>(round_index),
                             static_cast<std::uint64_t>(client.id));
    for (int k = 0; k < cfg.local_steps; ++k) {
        Vector g;
        if (cfg.batch_size == 0) {
            g = synthgen::client_gradient(client, y, ridge);
        } else {
            g = Vector::Zero(theta.size());
            for (int b = 0; b < cfg.batch_size; ++b) {
                const Eigen::Index j =
                    static_cast<Eigen::Index>(batch_stream.next_index(static_cast<std::uint64_t>(n)));
                const double s = client.features.row(j).dot(y);
                g += (sigmoid(s) - client.labels[j]) * client.features.row(j).transpose();
            }
            g /= static_cast<double>(cfg.batch_size);
            g += ridge * y;
        }
        y -= cfg.local_step * g;
    }
    return RoundUpdate{client.id, y - theta};
}

Vector local_descent(const std::function<Vector(const Vector&)>& gradient, const Vector& theta,
                     int steps, double step_size) {
    Vector y = theta;
    for (int k = 0; k < steps; ++k) y -= step_size * gradient(y);
    return y - theta;
}

Vector aggregate_naive(const std::vector<RoundUpdate>& updates) {
    if (updates.empty()) throw ConfigError("aggregate_naive: empty round");
    Vector sum = Vector::Zero(updates.front().delta.size());
    for (const auto& u : updates) sum += u.delta;
    return sum / static_cast<double>(updates.size());
}

Vector aggregate_ipw(const std::vector<RoundUpdate>& updates, const Vector& inclusion_probs,
                     double divisor) {
    if (updates.empty()) throw ConfigError("aggregate_ipw: empty round");
    if (inclusion_probs.size() != static_cast<Eigen::Index>(updates.size()))
        throw DimensionError("aggregate_ipw: probability count mismatch");
    Vector sum = Vector::Zero(updates.front().delta.size());
    for (std::size_t k = 0; k < updates.size(); ++k) {
        const double p = inclusion_probs[static_cast<Eigen::Index>(k)];
        if (p <= 0.0) throw InvariantViolation("aggregate_ipw: nonpositive inclusion probability");
        sum += updates[k].delta / p;
    }
    return sum / divisor;
}

void server_step(ServerState& state, const Vector& aggregate, double gamma) {
    if (!aggregate.allFinite())
        throw NumericalError("server_step: non-finite aggregate at round " +
                             std::to_string(state.round));
    state.theta += gamma * aggregate;
    state.round += 1;
}

std::vector<RoundUpdate> compute_round_deltas_serial(const synthgen::Population& pop,
                                                     const std::vector<int>& participant_ids,
                                                     const Vector& theta,
                                                     const TrainingConfig& cfg, double ridge,
                                                     int round_index) {
    std::vector<RoundUpdate> out(participant_ids.size());
    for (std::size_t k = 0; k < participant_ids.size(); ++k)
        out[k] = local_update(pop[static_cast<std::size_t>(participant_ids[k])], theta, cfg,
                              ridge, round_index);
    return out;
}

std::vector<RoundUpdate> compute_round_deltas(const synthgen::Population& pop,
                                              const std::vector<int>& participant_ids,
                                              const Vector& theta, const TrainingConfig& cfg,
                                              double ridge, int round_index) {
    const int m = static_cast<int>(participant_ids.size());
    std::vector<RoundUpdate> out(participant_ids.size());
#pragma omp parallel for schedule(static)
    for (int k = 0; k < m; ++k)
        out[static_cast<std::size_t>(k)] =
            local_update(pop[static_cast<std::size_t>(participant_ids[static_cast<std::size_t>(k)])],
                         theta, cfg, ridge, round_index);
    return out;
}

namespace {

propensity::LogisticFit uniform_fit(double rate, Eigen::Index dim, double clip_floor) {
    propensity::LogisticFit fit;
    fit.intercept = logit(std::clamp(rate, 1e-6, 1.0 - 1e-6));
    fit.coefficients = Vector::Zero(dim);
    fit.clip_floor = clip_floor;
    fit.converged = true;
    return fit;
}

}  // namespace

RunResult run_training(const synthgen::Population& pop, const selection::SelectionSpec& sel_spec,
                       const TrainingConfig& cfg, const synthgen::OracleSolution& oracle,
                       const MethodConfig& mcfg, double ridge) {
    cfg.validate();
    sel_spec.validate(static_cast<int>(pop.front().z.size()));
    const int n = static_cast<int>(pop.size());
    const Eigen::Index m = pop.front().features.cols();
    const Eigen::Index d_z = pop.front().z.size();
    const Eigen::Index d_x = sel_spec.preround_dim;

    RunResult result;
    result.state.theta = Vector::Zero(m);
    result.state.round = 0;

    auto enroll_draw = selection::draw_enrollment(sel_spec, pop, cfg.seed);
    result.trace.enrolled = enroll_draw.enrolled;
    result.trace.true_enroll_prob = enroll_draw.true_enroll_prob;

    std::vector<int> enrolled_ids;
    for (int i = 0; i < n; ++i)
        if (enroll_draw.enrolled[static_cast<std::size_t>(i)] == 1) enrolled_ids.push_back(i);
    if (enrolled_ids.empty()) throw NumericalError("run_training: no enrolled clients");
    const int n_enroll = static_cast<int>(enrolled_ids.size());

    // Enrollment propensity is a pre-round quantity: fit once, before round 1.
    std::optional<propensity::LogisticFit> enroll_fit;
    if (cfg.method == Method::FedIpw) {
        try {
            enroll_fit = propensity::fit_enrollment_model(pop, enroll_draw.enrolled, mcfg.fit);
        } catch (const std::runtime_error&) {
            enroll_fit = uniform_fit(static_cast<double>(n_enroll) / n, d_z, mcfg.fit.clip_floor);
        }
    }

    // Calibration weights are a pre-round quantity as well: the balance map
    // depends only on Z and the external moment vector.
    Vector cal_weights;
    if (cfg.method == Method::Calibrated) {
        Matrix b_rows(n_enroll, mcfg.balance.output_dim());
        for (int k = 0; k < n_enroll; ++k)
            b_rows.row(k) = calibration::evaluate_balance_map(
                                mcfg.balance, pop[static_cast<std::size_t>(enrolled_ids[static_cast<std::size_t>(k)])].z)
                                .transpose();
        Vector mu_b = Vector::Zero(mcfg.balance.output_dim());
        for (const auto& c : pop) mu_b += calibration::evaluate_balance_map(mcfg.balance, c.z);
        mu_b /= static_cast<double>(n);
        mu_b = calibration::perturb_moments(mu_b, mcfg.moment_noise_sigma, cfg.seed);
        cal_weights = calibration::solve_calibration_weights(b_rows, mu_b, true).weights;
    }

    std::optional<propensity::LogisticFit> part_fit;
    const bool needs_part_fit = cfg.method == Method::RoundOnlyIpw ||
                                cfg.method == Method::FedIpw ||
                                cfg.method == Method::Calibrated;

    for (int r = 0; r < cfg.rounds; ++r) {
        auto rd = selection::draw_round(sel_spec, pop, enroll_draw.enrolled, r, cfg.seed);
        result.trace.rounds.push_back(rd);

        std::vector<int> participant_ids;
        for (int i = 0; i < n; ++i)
            if (rd.participated[static_cast<std::size_t>(i)] == 1) participant_ids.push_back(i);

        MetricsRow row;
        row.round = r;
        row.method = method_name(cfg.method);
        row.participants = static_cast<int>(participant_ids.size());

        if (participant_ids.empty()) {
            std::cerr << "warning: empty round " << r << ", server state unchanged\n";
            row.target_loss = synthgen::population_objective(pop, result.state.theta, ridge);
            row.dist_to_opt = (result.state.theta - oracle.theta_star).norm();
            result.metrics.push_back(row);
            result.state.history.push_back(row);
            continue;
        }

        // Participation propensities are refit every round on a trailing
        // window, using rounds observed so far (indicators for round r are
        // known before updates are aggregated).
        if (needs_part_fit) {
            const int window = std::min(r + 1, mcfg.refit_window);
            try {
                part_fit = propensity::fit_participation_model(pop, result.trace,
                                                               r + 1 - window, r, mcfg.fit);
            } catch (const std::runtime_error&) {
                if (!part_fit) {
                    double rate = 0.0;
                    for (int i : enrolled_ids)
                        rate += rd.participated[static_cast<std::size_t>(i)];
                    rate /= static_cast<double>(n_enroll);
                    part_fit = uniform_fit(rate, d_z + d_x, mcfg.fit.clip_floor);
                }
            }
        }

        auto updates = compute_round_deltas(pop, participant_ids, result.state.theta, cfg,
                                            ridge, r);

        auto part_hat_for = [&](int i) {
            Vector zx(d_z + d_x);
            zx.head(d_z) = pop[static_cast<std::size_t>(i)].z;
            zx.tail(d_x) = rd.preround_cov.row(i).transpose();
            return part_fit->predict_clipped(zx);
        };

        Vector aggregate;
        double mean_weight = 0.0;
        double max_rho_err = 0.0;
        auto track_rho = [&](int i, double p_used) {
            const double rho = rd.true_inclusion[i] / p_used;
            max_rho_err = std::max(max_rho_err, std::abs(rho - 1.0));
        };

        switch (cfg.method) {
            case Method::Naive: {
                aggregate = aggregate_naive(updates);
                const double p_implicit =
                    static_cast<double>(participant_ids.size()) / static_cast<double>(n);
                for (int i : participant_ids) track_rho(i, p_implicit);
                mean_weight = 1.0 / static_cast<double>(participant_ids.size());
                break;
            }
            case Method::OracleIpw: {
                Vector probs(participant_ids.size());
                for (std::size_t k = 0; k < participant_ids.size(); ++k) {
                    probs[static_cast<Eigen::Index>(k)] = rd.true_inclusion[participant_ids[k]];
                    track_rho(participant_ids[k], probs[static_cast<Eigen::Index>(k)]);
                    mean_weight += 1.0 / (n * probs[static_cast<Eigen::Index>(k)]);
                }
                mean_weight /= static_cast<double>(participant_ids.size());
                aggregate = aggregate_ipw(updates, probs, n);
                break;
            }
            case Method::FedIpw: {
                Vector probs(participant_ids.size());
                double divisor = static_cast<double>(n);
                if (mcfg.estimate_population_size) {
                    double mean_enroll_hat = 0.0;
                    for (int i : enrolled_ids)
                        mean_enroll_hat +=
                            enroll_fit->predict_clipped(pop[static_cast<std::size_t>(i)].z);
                    divisor = n_enroll / (mean_enroll_hat / n_enroll);
                }
                for (std::size_t k = 0; k < participant_ids.size(); ++k) {
                    const int i = participant_ids[k];
                    const double pe = enroll_fit->predict_clipped(pop[static_cast<std::size_t>(i)].z);
                    const double pp = part_hat_for(i);
                    probs[static_cast<Eigen::Index>(k)] = pe * pp;
                    track_rho(i, pe * pp);
                    mean_weight += 1.0 / (divisor * pe * pp);
                }
                mean_weight /= static_cast<double>(participant_ids.size());
                aggregate = aggregate_ipw(updates, probs, divisor);
                break;
            }
            case Method::RoundOnlyIpw: {
                Vector probs(participant_ids.size());
                for (std::size_t k = 0; k < participant_ids.size(); ++k) {
                    const int i = participant_ids[k];
                    const double pp = part_hat_for(i);
                    probs[static_cast<Eigen::Index>(k)] = pp;
                    track_rho(i, pp);
                    mean_weight += 1.0 / (n_enroll * pp);
                }
                mean_weight /= static_cast<double>(participant_ids.size());
                aggregate = aggregate_ipw(updates, probs, n_enroll);
                break;
            }
            case Method::Calibrated: {
                std::vector<int> enrolled_pos(participant_ids.size());
                std::vector<Vector> deltas(participant_ids.size());
                Vector part_hat(n_enroll);
                for (int k = 0; k < n_enroll; ++k)
                    part_hat[k] = part_hat_for(enrolled_ids[static_cast<std::size_t>(k)]);
                for (std::size_t k = 0; k < participant_ids.size(); ++k) {
                    const auto it = std::lower_bound(enrolled_ids.begin(), enrolled_ids.end(),
                                                     participant_ids[k]);
                    if (it == enrolled_ids.end() || *it != participant_ids[k])
                        throw InvariantViolation("run_training: participant not enrolled");
                    enrolled_pos[k] = static_cast<int>(it - enrolled_ids.begin());
                    deltas[k] = updates[k].delta;
                    const double p_used = part_hat[enrolled_pos[k]];
                    track_rho(participant_ids[k], p_used);
                    mean_weight += cal_weights[enrolled_pos[k]] / p_used;
                }
                mean_weight /= static_cast<double>(participant_ids.size());
                aggregate = calibration::calibrated_round_update(cal_weights, enrolled_pos,
                                                                 deltas, part_hat,
                                                                 mcfg.hajek_normalize);
                break;
            }
        }

        server_step(result.state, aggregate, cfg.server_step);
        row.target_loss = synthgen::population_objective(pop, result.state.theta, ridge);
        row.dist_to_opt = (result.state.theta - oracle.theta_star).norm();
        row.mean_weight = mean_weight;
        row.max_rho_err = max_rho_err;
        result.metrics.push_back(row);
        result.state.history.push_back(row);
    }
    return result;
}

}  // namespace fedlab::federation
