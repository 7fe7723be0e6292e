#include "fedlab/synthgen.hpp"

#include <omp.h>

#include <cmath>

#include "fedlab/rng.hpp"

namespace fedlab::synthgen {

void PopulationSpec::validate() const {
    if (num_clients < 1) throw ConfigError("num_clients must be >= 1");
    if (covariate_dim < 1) throw ConfigError("covariate_dim must be >= 1");
    if (feature_dim < 1) throw ConfigError("feature_dim must be >= 1");
    if (samples_per_client < 1) throw ConfigError("samples_per_client must be >= 1");
    if (ridge < 0.0) throw ConfigError("ridge must be nonnegative");
    if (base_param.size() != feature_dim)
        throw ConfigError("base_param length must equal feature_dim");
    if (heterogeneity.rows() != feature_dim || heterogeneity.cols() != covariate_dim)
        throw ConfigError("heterogeneity matrix must be feature_dim x covariate_dim");
}

Population generate_population(const PopulationSpec& spec) {
    spec.validate();
    Population pop(static_cast<std::size_t>(spec.num_clients));
#pragma omp parallel for schedule(static)
    for (int i = 0; i < spec.num_clients; ++i) {
        ClientRecord& c = pop[static_cast<std::size_t>(i)];
        c.id = i;
        rng::Stream zs(spec.master_seed, "pop-z", static_cast<std::uint64_t>(i));
        c.z.resize(spec.covariate_dim);
        for (int k = 0; k < spec.covariate_dim; ++k) c.z[k] = zs.next_normal();
        c.data_param = spec.base_param + spec.heterogeneity * c.z;

        rng::Stream xs(spec.master_seed, "pop-x", static_cast<std::uint64_t>(i));
        rng::Stream ys(spec.master_seed, "pop-y", static_cast<std::uint64_t>(i));
        c.features.resize(spec.samples_per_client, spec.feature_dim);
        c.labels.resize(spec.samples_per_client);
        for (int j = 0; j < spec.samples_per_client; ++j) {
            for (int k = 0; k < spec.feature_dim; ++k) c.features(j, k) = xs.next_normal();
            const double s = c.features.row(j).dot(c.data_param);
            c.labels[j] = ys.next_bernoulli(sigmoid(s)) ? 1.0 : 0.0;
        }
    }
    return pop;
}

double client_loss(const ClientRecord& client, const Vector& theta, double ridge) {
    if (theta.size() != client.features.cols())
        throw DimensionError("client_loss: theta dimension mismatch");
    const Eigen::Index n = client.features.rows();
    double total = 0.0;
    const Vector scores = client.features * theta;
    for (Eigen::Index j = 0; j < n; ++j)
        total += log1p_exp(scores[j]) - client.labels[j] * scores[j];
    return total / static_cast<double>(n) + 0.5 * ridge * theta.squaredNorm();
}

Vector client_gradient(const ClientRecord& client, const Vector& theta, double ridge) {
    if (theta.size() != client.features.cols())
        throw DimensionError("client_gradient: theta dimension mismatch");
    const Eigen::Index n = client.features.rows();
    const Vector scores = client.features * theta;
    Vector resid(n);
    for (Eigen::Index j = 0; j < n; ++j) resid[j] = sigmoid(scores[j]) - client.labels[j];
    return client.features.transpose() * resid / static_cast<double>(n) + ridge * theta;
}

Matrix client_hessian(const ClientRecord& client, const Vector& theta, double ridge) {
    if (theta.size() != client.features.cols())
        throw DimensionError("client_hessian: theta dimension mismatch");
    const Eigen::Index n = client.features.rows();
    const Eigen::Index m = client.features.cols();
    const Vector scores = client.features * theta;
    Vector w(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const double p = sigmoid(scores[j]);
        w[j] = p * (1.0 - p);
    }
    Matrix h = client.features.transpose() * w.asDiagonal() * client.features /
               static_cast<double>(n);
    h += ridge * Matrix::Identity(m, m);
    return h;
}

double population_objective_serial(const Population& pop, const Vector& theta, double ridge) {
    if (pop.empty()) throw ConfigError("population_objective: empty population");
    double total = 0.0;
    for (const auto& c : pop) total += client_loss(c, theta, ridge);
    return total / static_cast<double>(pop.size());
}

Vector population_gradient_serial(const Population& pop, const Vector& theta, double ridge) {
    if (pop.empty()) throw ConfigError("population_gradient: empty population");
    Vector total = Vector::Zero(theta.size());
    for (const auto& c : pop) total += client_gradient(c, theta, ridge);
    return total / static_cast<double>(pop.size());
}

// Parallel kernels fill a per-client buffer, then reduce in ascending id order
// so the result is bit-identical to the serial reference.
double population_objective(const Population& pop, const Vector& theta, double ridge) {
    if (pop.empty()) throw ConfigError("population_objective: empty population");
    const int n = static_cast<int>(pop.size());
    std::vector<double> losses(pop.size());
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
        losses[static_cast<std::size_t>(i)] = client_loss(pop[static_cast<std::size_t>(i)], theta, ridge);
    double total = 0.0;
    for (double v : losses) total += v;
    return total / static_cast<double>(n);
}

Vector population_gradient(const Population& pop, const Vector& theta, double ridge) {
    if (pop.empty()) throw ConfigError("population_gradient: empty population");
    const int n = static_cast<int>(pop.size());
    std::vector<Vector> grads(pop.size());
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
        grads[static_cast<std::size_t>(i)] = client_gradient(pop[static_cast<std::size_t>(i)], theta, ridge);
    Vector total = Vector::Zero(theta.size());
    for (const auto& g : grads) total += g;
    return total / static_cast<double>(n);
}

Matrix population_hessian(const Population& pop, const Vector& theta, double ridge) {
    if (pop.empty()) throw ConfigError("population_hessian: empty population");
    const int n = static_cast<int>(pop.size());
    std::vector<Matrix> hs(pop.size());
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i)
        hs[static_cast<std::size_t>(i)] = client_hessian(pop[static_cast<std::size_t>(i)], theta, ridge);
    Matrix total = Matrix::Zero(theta.size(), theta.size());
    for (const auto& h : hs) total += h;
    return total / static_cast<double>(n);
}

OracleSolution solve_target_optimum(const Population& pop, double ridge, double tol,
                                    int max_iter) {
    if (ridge <= 0.0) throw ConfigError("solve_target_optimum requires ridge > 0");
    if (pop.empty()) throw ConfigError("solve_target_optimum: empty population");
    const Eigen::Index m = pop.front().features.cols();
    Vector theta = Vector::Zero(m);
    double f = population_objective(pop, theta, ridge);
    Vector grad = population_gradient(pop, theta, ridge);

    constexpr double armijo_c = 1e-4;
    constexpr double shrink = 0.5;

    for (int it = 0; it < max_iter; ++it) {
        if (grad.norm() < tol) {
            return OracleSolution{theta, f, grad.norm(), it};
        }
        const Matrix hess = population_hessian(pop, theta, ridge);
        Vector dir = hess.ldlt().solve(-grad);
        double slope = grad.dot(dir);
        if (!(slope < 0.0)) {  // fall back to steepest descent
            dir = -grad;
            slope = grad.dot(dir);
        }
        double step = 1.0;
        for (int bt = 0; bt < 60; ++bt) {
            const Vector cand = theta + step * dir;
            const double fc = population_objective(pop, cand, ridge);
            if (fc <= f + armijo_c * step * slope) {
                theta = cand;
                f = fc;
                break;
            }
            step *= shrink;
        }
        grad = population_gradient(pop, theta, ridge);
    }
    if (grad.norm() < tol) {
        return OracleSolution{theta, f, grad.norm(), max_iter};
    }
    throw ConvergenceError("solve_target_optimum: Newton did not reach tolerance; last grad norm " +
                               std::to_string(grad.norm()),
                           theta, grad.norm());
}

}  // namespace fedlab::synthgen
