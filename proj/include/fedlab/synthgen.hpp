#pragma once

#include <cstdint>
#include <vector>

#include "fedlab/common.hpp"

namespace fedlab::synthgen {

struct PopulationSpec {
    int num_clients = 400;
    int covariate_dim = 2;   // d_z
    int feature_dim = 5;     // m
    int samples_per_client = 200;
    Vector base_param;                // length m
    Matrix heterogeneity;             // m x d_z
    double ridge = 1e-2;
    std::uint64_t master_seed = 0;

    void validate() const;
};

struct ClientRecord {
    int id = 0;
    Vector z;          // pre-enrollment covariates
    Matrix features;   // n x m
    Vector labels;     // n entries in {0,1}
    Vector data_param; // base_param + heterogeneity * z
};

using Population = std::vector<ClientRecord>;

struct OracleSolution {
    Vector theta_star;
    double f_star = 0.0;
    double grad_norm = 0.0;
    int iterations = 0;
};

struct ConvergenceError : NumericalError {
    ConvergenceError(const std::string& msg, Vector last, double gnorm)
        : NumericalError(msg), last_iterate(std::move(last)), grad_norm(gnorm) {}
    Vector last_iterate;
    double grad_norm;
};

Population generate_population(const PopulationSpec& spec);

double client_loss(const ClientRecord& client, const Vector& theta, double ridge);
Vector client_gradient(const ClientRecord& client, const Vector& theta, double ridge);
Matrix client_hessian(const ClientRecord& client, const Vector& theta, double ridge);

double population_objective(const Population& pop, const Vector& theta, double ridge);
Vector population_gradient(const Population& pop, const Vector& theta, double ridge);
Matrix population_hessian(const Population& pop, const Vector& theta, double ridge);

// Serial reference kernels; the default entry points above parallelize the
// per-client evaluation and reduce in ascending id order.
double population_objective_serial(const Population& pop, const Vector& theta, double ridge);
Vector population_gradient_serial(const Population& pop, const Vector& theta, double ridge);

// Damped Newton with Armijo backtracking. Throws NumericalError if the
// gradient norm does not reach tol within max_iter iterations.
OracleSolution solve_target_optimum(const Population& pop, double ridge,
                                    double tol = 1e-10, int max_iter = 100);

}  // namespace fedlab::synthgen
