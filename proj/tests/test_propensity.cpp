#include <doctest.h>

#include <cmath>

#include "fedlab/config.hpp"
#include "fedlab/propensity.hpp"
#include "fedlab/rng.hpp"

using namespace fedlab;
using namespace fedlab::propensity;

TEST_CASE("intercept-only fit recovers the sample log-odds") {
    Matrix x = Matrix::Zero(100, 1);
    Vector y(100);
    for (int i = 0; i < 100; ++i) y[i] = i < 70 ? 1.0 : 0.0;
    FitConfig fc;
    fc.ridge = 1e-8;
    const auto fit = fit_logistic(x, y, fc);
    CHECK(fit.converged);
    CHECK(std::abs(fit.intercept - logit(0.7)) < 1e-3);
}

TEST_CASE("all-identical labels stay finite under ridge") {
    rng::Stream s(4, "sep");
    Matrix x(50, 2);
    for (int i = 0; i < 50; ++i) {
        x(i, 0) = s.next_normal();
        x(i, 1) = s.next_normal();
    }
    FitConfig fc;
    fc.ridge = 1e-2;
    const auto fit = fit_logistic(x, Vector::Ones(50), fc);
    CHECK(std::isfinite(fit.intercept));
    CHECK(fit.coefficients.allFinite());
}

TEST_CASE("IRLS keeps the penalized NLL non-increasing") {
    rng::Stream s(6, "nll");
    Matrix x(500, 2);
    Vector y(500);
    for (int i = 0; i < 500; ++i) {
        x(i, 0) = s.next_normal();
        x(i, 1) = s.next_normal();
        y[i] = s.next_bernoulli(sigmoid(2.0 * x(i, 0) - x(i, 1))) ? 1.0 : 0.0;
    }
    FitConfig fc;
    const auto fit = fit_logistic(x, y, fc);
    const double fitted = penalized_nll(x, y, fit.intercept, fit.coefficients, fc.ridge);
    const double start = penalized_nll(x, y, 0.0, Vector::Zero(2), fc.ridge);
    CHECK(fitted <= start);
    CHECK(fit.converged);
}

TEST_CASE("large-sample coefficient recovery") {
    rng::Stream s(9, "recover");
    const int n = 100000;
    Matrix x(n, 2);
    Vector y(n);
    Vector beta(2);
    beta << 1.0, -0.7;
    for (int i = 0; i < n; ++i) {
        x(i, 0) = s.next_normal();
        x(i, 1) = s.next_normal();
        y[i] = s.next_bernoulli(sigmoid(-0.5 + x.row(i).dot(beta))) ? 1.0 : 0.0;
    }
    const auto fit = fit_logistic(x, y, FitConfig{});
    CHECK(std::abs(fit.intercept + 0.5) < 0.05);
    CHECK((fit.coefficients - beta).lpNorm<Eigen::Infinity>() < 0.05);
}

namespace {

struct TraceFixture {
    expcli::ExperimentConfig cfg = expcli::default_config();
    synthgen::Population pop;
    selection::EnrollmentDraw enroll;
    selection::SelectionTrace trace;

    explicit TraceFixture(int n_clients, int rounds, double bias_scale = 1.0,
                          std::uint64_t seed = 31) {
        cfg.population.num_clients = n_clients;
        cfg.population.samples_per_client = 2;
        cfg.population.master_seed = seed;
        cfg.selection.bias_scale = bias_scale;
        pop = synthgen::generate_population(cfg.population);
        enroll = selection::draw_enrollment(cfg.selection, pop, seed);
        trace.enrolled = enroll.enrolled;
        trace.true_enroll_prob = enroll.true_enroll_prob;
        for (int r = 0; r < rounds; ++r)
            trace.rounds.push_back(selection::draw_round(cfg.selection, pop, enroll.enrolled, r, seed));
    }
};

}  // namespace

TEST_CASE("enrollment model recovery") {
    SUBCASE("constant enrollment gives near-zero slopes") {
        TraceFixture f(10000, 1, 0.0);
        const auto fit = fit_enrollment_model(f.pop, f.enroll.enrolled, f.cfg.method_config.fit);
        CHECK(fit.coefficients.lpNorm<Eigen::Infinity>() < 0.1);
    }
    SUBCASE("well-specified recovery of intercept and scaled slopes") {
        TraceFixture f(10000, 1, 1.0);
        const auto fit = fit_enrollment_model(f.pop, f.enroll.enrolled, f.cfg.method_config.fit);
        CHECK(std::abs(fit.intercept - f.cfg.selection.enroll_intercept) < 0.1);
        const Vector truth = f.cfg.selection.bias_scale * f.cfg.selection.enroll_coef;
        CHECK((fit.coefficients - truth).lpNorm<Eigen::Infinity>() < 0.1);
    }
    SUBCASE("degenerate enrollment throws") {
        TraceFixture f(50, 1);
        std::vector<int> all_in(f.pop.size(), 1);
        CHECK_THROWS_AS(fit_enrollment_model(f.pop, all_in, f.cfg.method_config.fit),
                        NumericalError);
    }
}

TEST_CASE("participation model recovery") {
    SUBCASE("constant participation gives near-zero parameters") {
        TraceFixture f(2500, 4, 0.0);
        f.cfg.selection.part_intercept = 0.0;
        f.cfg.selection.part_coef_z.setZero();
        f.cfg.selection.part_coef_x.setZero();
        // regenerate rounds under the constant-participation spec
        f.trace.rounds.clear();
        for (int r = 0; r < 4; ++r)
            f.trace.rounds.push_back(
                selection::draw_round(f.cfg.selection, f.pop, f.enroll.enrolled, r, 77));
        const auto fit =
            fit_participation_model(f.pop, f.trace, 0, 3, f.cfg.method_config.fit);
        CHECK(std::abs(fit.intercept) < 0.1);
        CHECK(fit.coefficients.lpNorm<Eigen::Infinity>() < 0.1);
    }
    SUBCASE("well-specified recovery at 1e5 stacked rows") {
        TraceFixture f(25000, 8, 1.0);
        const auto fit =
            fit_participation_model(f.pop, f.trace, 0, 7, f.cfg.method_config.fit);
        Vector truth(4);
        truth.head(2) = f.cfg.selection.part_coef_z;
        truth.tail(2) = f.cfg.selection.part_coef_x;
        CHECK(std::abs(fit.intercept - f.cfg.selection.part_intercept) < 0.1);
        CHECK((fit.coefficients - truth).lpNorm<Eigen::Infinity>() < 0.1);
    }
    SUBCASE("non-enrolled rows never enter the design") {
        TraceFixture f(400, 3);
        // Flip every non-enrolled client's stored participation to 1; the fit
        // must not change because those rows are excluded by conditioning.
        auto tampered = f.trace;
        for (auto& rd : tampered.rounds)
            for (std::size_t i = 0; i < f.pop.size(); ++i)
                if (f.trace.enrolled[i] == 0) rd.participated[i] = 1;
        const auto a = fit_participation_model(f.pop, f.trace, 0, 2, f.cfg.method_config.fit);
        const auto b = fit_participation_model(f.pop, tampered, 0, 2, f.cfg.method_config.fit);
        CHECK(a.intercept == b.intercept);
        CHECK((a.coefficients - b.coefficients).norm() == 0.0);
    }
}

TEST_CASE("plug-in inclusion clipping and identity case") {
    TraceFixture f(200, 1);
    SUBCASE("component product and clipping") {
        LogisticFit enroll;
        enroll.intercept = logit(0.8);
        enroll.coefficients = Vector::Zero(2);
        enroll.clip_floor = 0.01;
        LogisticFit part;
        part.intercept = logit(0.5);
        part.coefficients = Vector::Zero(4);
        part.clip_floor = 0.01;
        const auto est = plug_in_inclusion(enroll, part, f.pop, f.trace.rounds[0].preround_cov);
        CHECK(est.p_hat[0] == doctest::Approx(0.4).epsilon(1e-12));

        LogisticFit tiny = enroll;
        tiny.intercept = logit(0.002);
        const auto clipped = plug_in_inclusion(tiny, part, f.pop, f.trace.rounds[0].preround_cov);
        CHECK(clipped.enroll_hat[0] == doctest::Approx(0.01));
        CHECK(clipped.p_hat[0] == doctest::Approx(0.005));
        CHECK(clipped.p_hat.minCoeff() >= 0.01 * 0.01);
    }
    SUBCASE("oracle parameters reproduce true inclusion") {
        LogisticFit enroll;
        enroll.intercept = f.cfg.selection.enroll_intercept;
        enroll.coefficients = f.cfg.selection.bias_scale * f.cfg.selection.enroll_coef;
        enroll.clip_floor = 1e-12;
        LogisticFit part;
        part.intercept = f.cfg.selection.part_intercept;
        part.coefficients = Vector(4);
        part.coefficients.head(2) = f.cfg.selection.part_coef_z;
        part.coefficients.tail(2) = f.cfg.selection.part_coef_x;
        part.clip_floor = 1e-12;
        const auto est = plug_in_inclusion(enroll, part, f.pop, f.trace.rounds[0].preround_cov);
        CHECK((est.p_hat - f.trace.rounds[0].true_inclusion).lpNorm<Eigen::Infinity>() < 1e-12);
    }
}

TEST_CASE("two-stage fits are separable") {
    TraceFixture f(500, 4);
    const auto enroll_before =
        fit_enrollment_model(f.pop, f.enroll.enrolled, f.cfg.method_config.fit);
    // Refit participation on different windows; the enrollment fit is a pure
    // function of (Z, E) and cannot move.
    (void)fit_participation_model(f.pop, f.trace, 0, 1, f.cfg.method_config.fit);
    (void)fit_participation_model(f.pop, f.trace, 0, 3, f.cfg.method_config.fit);
    const auto enroll_after =
        fit_enrollment_model(f.pop, f.enroll.enrolled, f.cfg.method_config.fit);
    CHECK(enroll_before.intercept == enroll_after.intercept);
    CHECK((enroll_before.coefficients - enroll_after.coefficients).norm() == 0.0);
}
