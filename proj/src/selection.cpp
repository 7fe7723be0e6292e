#include "fedlab/selection.hpp"

#include <omp.h>

#include "fedlab/csv.hpp"
#include "fedlab/rng.hpp"

namespace fedlab::selection {

void SelectionSpec::validate(int covariate_dim) const {
    if (bias_scale < 0.0) throw ConfigError("bias_scale must be nonnegative");
    if (preround_dim < 1) throw ConfigError("preround_dim must be >= 1");
    if (enroll_coef.size() != covariate_dim)
        throw ConfigError("enroll_coef length must equal covariate_dim");
    if (part_coef_z.size() != covariate_dim)
        throw ConfigError("part_coef_z length must equal covariate_dim");
    if (part_coef_x.size() != preround_dim)
        throw ConfigError("part_coef_x length must equal preround_dim");
    if (rho_mix != 0.0 &&
        (mix_matrix.rows() != preround_dim || mix_matrix.cols() != covariate_dim))
        throw ConfigError("mix_matrix must be preround_dim x covariate_dim when rho_mix != 0");
}

double enrollment_probability(const SelectionSpec& spec, const Vector& z) {
    if (z.size() != spec.enroll_coef.size())
        throw DimensionError("enrollment_probability: z dimension mismatch");
    // Enrollment depends on Z only; pre-round covariates never enter.
    return sigmoid(spec.enroll_intercept + spec.bias_scale * spec.enroll_coef.dot(z));
}

double participation_probability(const SelectionSpec& spec, const Vector& z, const Vector& x) {
    if (z.size() != spec.part_coef_z.size() || x.size() != spec.part_coef_x.size())
        throw DimensionError("participation_probability: dimension mismatch");
    return sigmoid(spec.part_intercept + spec.part_coef_z.dot(z) + spec.part_coef_x.dot(x));
}

EnrollmentDraw draw_enrollment(const SelectionSpec& spec, const synthgen::Population& pop,
                               std::uint64_t master_seed) {
    const int n = static_cast<int>(pop.size());
    EnrollmentDraw draw;
    draw.enrolled.resize(pop.size());
    draw.true_enroll_prob.resize(n);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const double p = enrollment_probability(spec, pop[static_cast<std::size_t>(i)].z);
        rng::Stream s(master_seed, "enroll", static_cast<std::uint64_t>(i));
        draw.true_enroll_prob[i] = p;
        draw.enrolled[static_cast<std::size_t>(i)] = s.next_bernoulli(p) ? 1 : 0;
    }
    return draw;
}

RoundDraw draw_round(const SelectionSpec& spec, const synthgen::Population& pop,
                     const std::vector<int>& enrolled, int round_index,
                     std::uint64_t master_seed) {
    const int n = static_cast<int>(pop.size());
    if (static_cast<int>(enrolled.size()) != n)
        throw DimensionError("draw_round: enrollment flag count mismatch");
    RoundDraw rd;
    rd.preround_cov.resize(n, spec.preround_dim);
    rd.participated.resize(pop.size());
    rd.true_part_prob.resize(n);
    rd.true_inclusion.resize(n);
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const auto& client = pop[static_cast<std::size_t>(i)];
        rng::Stream xs(master_seed, "preround", static_cast<std::uint64_t>(round_index),
                       static_cast<std::uint64_t>(i));
        Vector x(spec.preround_dim);
        for (int k = 0; k < spec.preround_dim; ++k) x[k] = xs.next_normal();
        if (spec.rho_mix != 0.0) x += spec.rho_mix * spec.mix_matrix * client.z;
        rd.preround_cov.row(i) = x.transpose();

        const double pe = enrollment_probability(spec, client.z);
        const double pp = participation_probability(spec, client.z, x);
        rd.true_part_prob[i] = pp;
        rd.true_inclusion[i] = pe * pp;
        if (enrolled[static_cast<std::size_t>(i)] == 1) {
            rng::Stream as(master_seed, "part", static_cast<std::uint64_t>(round_index),
                           static_cast<std::uint64_t>(i));
            rd.participated[static_cast<std::size_t>(i)] = as.next_bernoulli(pp) ? 1 : 0;
        } else {
            rd.participated[static_cast<std::size_t>(i)] = 0;
        }
    }
    return rd;
}

void write_trace_csv(const SelectionTrace& trace, const std::string& path) {
    csv::Writer w(path);
    w.header("client_id,round,E,A,pi_enroll,pi_part,p_true");
    const int n = static_cast<int>(trace.enrolled.size());
    for (int r = 0; r < static_cast<int>(trace.rounds.size()); ++r) {
        const auto& rd = trace.rounds[static_cast<std::size_t>(r)];
        for (int i = 0; i < n; ++i) {
            w.field(i)
                .field(r)
                .field(trace.enrolled[static_cast<std::size_t>(i)])
                .field(rd.participated[static_cast<std::size_t>(i)])
                .field(trace.true_enroll_prob[i])
                .field(rd.true_part_prob[i])
                .field(rd.true_inclusion[i]);
            w.endrow();
        }
    }
}

}  // namespace fedlab::selection
