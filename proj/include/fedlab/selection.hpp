#pragma once

#include <cstdint>
#include <vector>

#include "fedlab/common.hpp"
#include "fedlab/synthgen.hpp"

namespace fedlab::selection {

struct SelectionSpec {
    double enroll_intercept = 0.0;          // alpha_0
    Vector enroll_coef;                     // alpha, length d_z
    double bias_scale = 1.0;                // s, multiplies alpha
    double part_intercept = 0.0;            // beta_0
    Vector part_coef_z;                     // beta_z, length d_z
    Vector part_coef_x;                     // beta_x, length d_x
    int preround_dim = 2;                   // d_x
    // Optional Z-dependence of pre-round covariates: X = rho_mix * M z + noise.
    double rho_mix = 0.0;
    Matrix mix_matrix;                      // d_x x d_z, used when rho_mix != 0

    void validate(int covariate_dim) const;
};

struct RoundDraw {
    Matrix preround_cov;        // N x d_x
    std::vector<int> participated;   // N flags
    Vector true_part_prob;      // N
    Vector true_inclusion;      // N, pi_enroll * pi_part
};

struct SelectionTrace {
    std::vector<int> enrolled;  // N flags
    Vector true_enroll_prob;    // N
    std::vector<RoundDraw> rounds;
};

double enrollment_probability(const SelectionSpec& spec, const Vector& z);
double participation_probability(const SelectionSpec& spec, const Vector& z, const Vector& x);

struct EnrollmentDraw {
    std::vector<int> enrolled;
    Vector true_enroll_prob;
};

EnrollmentDraw draw_enrollment(const SelectionSpec& spec, const synthgen::Population& pop,
                               std::uint64_t master_seed);

RoundDraw draw_round(const SelectionSpec& spec, const synthgen::Population& pop,
                     const std::vector<int>& enrolled, int round_index,
                     std::uint64_t master_seed);

// Audit CSV: client_id, round, E, A, pi_enroll, pi_part, p_true
void write_trace_csv(const SelectionTrace& trace, const std::string& path);

}  // namespace fedlab::selection
