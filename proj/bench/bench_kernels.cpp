// Compares the OpenMP kernels against their serial references: population
// objective/gradient, per-round local updates, and pattern enumeration.

#include <chrono>
#include <cstdio>

#include "fedlab/config.hpp"
#include "fedlab/federation.hpp"
#include "fedlab/rng.hpp"
#include "fedlab/theory.hpp"

using Clock = std::chrono::steady_clock;

namespace {

double ms_since(Clock::time_point t0) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

template <typename F>
double time_best_of(int reps, F&& f) {
    double best = 1e30;
    for (int i = 0; i < reps; ++i) {
        const auto t0 = Clock::now();
        f();
        best = std::min(best, ms_since(t0));
    }
    return best;
}

}  // namespace

int main() {
    using namespace fedlab;

    auto cfg = expcli::default_config();
    cfg.population.num_clients = 800;
    auto pop = synthgen::generate_population(cfg.population);
    Vector theta = Vector::Zero(cfg.population.feature_dim);

    const double t_obj_serial = time_best_of(3, [&] {
        synthgen::population_objective_serial(pop, theta, cfg.population.ridge);
    });
    const double t_obj_par = time_best_of(3, [&] {
        synthgen::population_objective(pop, theta, cfg.population.ridge);
    });
    const double diff_obj =
        std::abs(synthgen::population_objective_serial(pop, theta, cfg.population.ridge) -
                 synthgen::population_objective(pop, theta, cfg.population.ridge));
    std::printf("population_objective  serial %8.3f ms  parallel %8.3f ms  |diff| %.3e\n",
                t_obj_serial, t_obj_par, diff_obj);

    federation::TrainingConfig tc = cfg.training;
    tc.seed = 7;
    std::vector<int> ids;
    for (int i = 0; i < cfg.population.num_clients; ++i) ids.push_back(i);
    const double t_delta_serial = time_best_of(3, [&] {
        federation::compute_round_deltas_serial(pop, ids, theta, tc, cfg.population.ridge, 0);
    });
    const double t_delta_par = time_best_of(3, [&] {
        federation::compute_round_deltas(pop, ids, theta, tc, cfg.population.ridge, 0);
    });
    std::printf("round_deltas          serial %8.3f ms  parallel %8.3f ms\n", t_delta_serial,
                t_delta_par);

    rng::Stream s(3, "bench-enum");
    const int n = 18;
    std::vector<Vector> deltas;
    Vector p(n);
    for (int i = 0; i < n; ++i) {
        Vector d(2);
        d << s.next_normal(), s.next_normal();
        deltas.push_back(d);
        p[i] = 0.1 + 0.8 * s.next_uniform();
    }
    theory::EnumerationSpec spec;
    spec.kind = theory::EstimatorKind::OracleIpw;
    spec.estimator_probs = p;
    const double t_enum_serial =
        time_best_of(2, [&] { theory::enumerate_ipw_expectation_serial(deltas, p, spec); });
    const double t_enum_par =
        time_best_of(2, [&] { theory::enumerate_ipw_expectation(deltas, p, spec); });
    const double diff_enum = (theory::enumerate_ipw_expectation_serial(deltas, p, spec) -
                              theory::enumerate_ipw_expectation(deltas, p, spec))
                                 .lpNorm<Eigen::Infinity>();
    std::printf("enumeration (n=18)    serial %8.3f ms  parallel %8.3f ms  |diff| %.3e\n",
                t_enum_serial, t_enum_par, diff_enum);
    return 0;
}
