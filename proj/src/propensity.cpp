#include "fedlab/propensity.hpp"

#include <algorithm>

namespace fedlab::propensity {

double penalized_nll(const Matrix& features, const Vector& labels, double intercept,
                     const Vector& coef, double ridge) {
    const Eigen::Index n = features.rows();
    double nll = 0.0;
    const Vector scores = (features * coef).array() + intercept;
    for (Eigen::Index j = 0; j < n; ++j)
        nll += log1p_exp(scores[j]) - labels[j] * scores[j];
    return nll + 0.5 * ridge * coef.squaredNorm();
}

LogisticFit fit_logistic(const Matrix& features, const Vector& labels, const FitConfig& cfg) {
    const Eigen::Index n = features.rows();
    const Eigen::Index d = features.cols();
    if (n < 1) throw ConfigError("fit_logistic: no samples");
    if (labels.size() != n) throw DimensionError("fit_logistic: label count mismatch");
    if (cfg.ridge <= 0.0) throw ConfigError("fit_logistic: ridge must be positive");

    LogisticFit fit;
    fit.ridge = cfg.ridge;
    fit.clip_floor = cfg.clip_floor;
    fit.coefficients = Vector::Zero(d);

    // Design with intercept column; ridge applied to slopes only.
    Matrix design(n, d + 1);
    design.col(0).setOnes();
    design.rightCols(d) = features;
    Matrix penalty = Matrix::Zero(d + 1, d + 1);
    penalty.bottomRightCorner(d, d) = cfg.ridge * Matrix::Identity(d, d);

    Vector beta = Vector::Zero(d + 1);
    double nll = penalized_nll(features, labels, 0.0, fit.coefficients, cfg.ridge);

    for (int it = 0; it < cfg.max_iter; ++it) {
        const Vector scores = design * beta;
        Vector p(n), w(n);
        for (Eigen::Index j = 0; j < n; ++j) {
            p[j] = sigmoid(scores[j]);
            w[j] = std::max(p[j] * (1.0 - p[j]), 1e-12);
        }
        Vector grad = design.transpose() * (p - labels) + penalty * beta;
        Matrix info = design.transpose() * w.asDiagonal() * design + penalty;
        Eigen::LDLT<Matrix> ldlt(info);
        if (ldlt.info() != Eigen::Success)
            throw NumericalError("fit_logistic: singular weighted system");
        Vector step = ldlt.solve(-grad);

        // Step-halving until the penalized NLL does not increase.
        double scale = 1.0;
        Vector cand;
        double cand_nll = 0.0;
        bool accepted = false;
        for (int h = 0; h < 30; ++h) {
            cand = beta + scale * step;
            cand_nll = penalized_nll(features, labels, cand[0], cand.tail(d), cfg.ridge);
            if (cand_nll <= nll + 1e-12) {
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if (!accepted) {
            fit.iterations = it + 1;
            break;
        }
        const double step_norm = (scale * step).lpNorm<Eigen::Infinity>();
        beta = cand;
        nll = cand_nll;
        fit.iterations = it + 1;
        if (step_norm < cfg.tol) {
            fit.converged = true;
            break;
        }
    }
    fit.intercept = beta[0];
    fit.coefficients = beta.tail(d);
    return fit;
}

LogisticFit fit_enrollment_model(const synthgen::Population& pop,
                                 const std::vector<int>& enrolled, const FitConfig& cfg) {
    const Eigen::Index n = static_cast<Eigen::Index>(pop.size());
    if (enrolled.size() != pop.size())
        throw DimensionError("fit_enrollment_model: flag count mismatch");
    int pos = 0;
    for (int e : enrolled) pos += e;
    if (pos == 0 || pos == static_cast<int>(pop.size()))
        throw NumericalError("fit_enrollment_model: degenerate enrollment labels");

    const Eigen::Index d = pop.front().z.size();
    Matrix z(n, d);
    Vector e(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        z.row(i) = pop[static_cast<std::size_t>(i)].z.transpose();
        e[i] = enrolled[static_cast<std::size_t>(i)];
    }
    return fit_logistic(z, e, cfg);
}

LogisticFit fit_participation_model(const synthgen::Population& pop,
                                    const selection::SelectionTrace& trace, int first_round,
                                    int last_round, const FitConfig& cfg) {
    const int n = static_cast<int>(pop.size());
    if (first_round < 0 || last_round >= static_cast<int>(trace.rounds.size()) ||
        first_round > last_round)
        throw ConfigError("fit_participation_model: bad round window");

    std::vector<int> enrolled_ids;
    for (int i = 0; i < n; ++i)
        if (trace.enrolled[static_cast<std::size_t>(i)] == 1) enrolled_ids.push_back(i);
    if (enrolled_ids.empty())
        throw NumericalError("fit_participation_model: no enrolled clients");

    const Eigen::Index d_z = pop.front().z.size();
    const Eigen::Index d_x = trace.rounds[static_cast<std::size_t>(first_round)].preround_cov.cols();
    const Eigen::Index rows =
        static_cast<Eigen::Index>(enrolled_ids.size()) * (last_round - first_round + 1);
    Matrix design(rows, d_z + d_x);
    Vector labels(rows);
    Eigen::Index row = 0;
    int ones = 0;
    for (int r = first_round; r <= last_round; ++r) {
        const auto& rd = trace.rounds[static_cast<std::size_t>(r)];
        for (int i : enrolled_ids) {
            design.row(row).head(d_z) = pop[static_cast<std::size_t>(i)].z.transpose();
            design.row(row).tail(d_x) = rd.preround_cov.row(i);
            labels[row] = rd.participated[static_cast<std::size_t>(i)];
            ones += rd.participated[static_cast<std::size_t>(i)];
            ++row;
        }
    }
    if (ones == 0 || ones == static_cast<int>(rows))
        throw NumericalError("fit_participation_model: degenerate participation labels");
    return fit_logistic(design, labels, cfg);
}

InclusionEstimate plug_in_inclusion(const LogisticFit& enroll_fit, const LogisticFit& part_fit,
                                    const synthgen::Population& pop,
                                    const Matrix& preround_cov) {
    const Eigen::Index n = static_cast<Eigen::Index>(pop.size());
    InclusionEstimate est;
    est.p_hat.resize(n);
    est.enroll_hat.resize(n);
    est.part_hat.resize(n);
    const Eigen::Index d_z = pop.front().z.size();
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto& client = pop[static_cast<std::size_t>(i)];
        Vector zx(d_z + preround_cov.cols());
        zx.head(d_z) = client.z;
        zx.tail(preround_cov.cols()) = preround_cov.row(i).transpose();
        est.enroll_hat[i] = enroll_fit.predict_clipped(client.z);
        est.part_hat[i] = part_fit.predict_clipped(zx);
        est.p_hat[i] = est.enroll_hat[i] * est.part_hat[i];
    }
    return est;
}

}  // namespace fedlab::propensity
