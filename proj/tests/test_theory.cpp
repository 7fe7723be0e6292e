#include <doctest.h>

#include <cmath>

#include "fedlab/rng.hpp"
#include "fedlab/theory.hpp"

using namespace fedlab;
using namespace fedlab::theory;

TEST_CASE("two-client minimizer") {
    CHECK(two_client_minimizer({1.0, 1.0, 0.0}) == 0.0);
    CHECK(two_client_minimizer({1.0, 1.0, 0.5}) == doctest::Approx(0.5));
    CHECK(two_client_minimizer({2.0, 3.0, 0.2}) == doctest::Approx(0.6));
}

TEST_CASE("two-client suboptimality gap") {
    CHECK(two_client_gap({1.0, 1.0, 0.5}) == doctest::Approx(0.125));
    CHECK(two_client_gap({1.0, 1.0, 0.0}) == 0.0);
    for (double mu : {0.5, 1.0, 2.0})
        for (double a : {0.5, 1.0, 3.0})
            for (double eps : {0.05, 0.2, 0.5}) {
                TwoClientInstance inst{mu, a, eps};
                const double direct =
                    inst.target_objective(eps * a) - inst.target_objective(0.0);
                CHECK(std::abs(two_client_gap(inst) - direct) < 1e-12);
            }
}

TEST_CASE("bias floor evaluator") {
    TheoryConstants c;
    c.smoothness = 1.0;
    c.strong_convexity = 1.0;
    c.heterogeneity = 1.0;
    c.grad_variance = 0.0;
    c.local_steps = 1;
    c.server_step = 1.0;
    c.num_clients = 1;
    c.p_min = 1.0;
    c.initial_gap = 1.0;

    SUBCASE("worked numeric example") {
        // V = 2 supplied through its components: sigma^2/(K N p) + L sigma^2/(K g^2) + G^2/(N p)
        // choose sigma^2 = 0.5, G = 1, N = 1, p = 1, K = 1, g = 1 -> 0.5 + 0.5 + 1 = 2
        c.grad_variance = 0.5;
        c.effective_step = 0.05;
        CHECK(c.variance_term() == doctest::Approx(2.0));
        // step cap: c0 = 8(1 + 1) = 16, 1/(c0 L) = 0.0625 >= 0.05
        const double v = bias_floor_rhs(c, 0.1, 200);
        const double expected = std::pow(0.99375, 200) + 0.05 * 2.0 + 0.01;
        CHECK(v == doctest::Approx(expected).epsilon(1e-12));
        CHECK(v == doctest::Approx(0.3954).epsilon(1e-3));
    }
    SUBCASE("zero residual error removes the floor") {
        c.effective_step = 0.05;
        const double with_floor = bias_floor_rhs(c, 0.1, 100);
        const double without = bias_floor_rhs(c, 0.0, 100);
        CHECK(with_floor - without ==
              doctest::Approx(0.01 * c.universal_const / c.strong_convexity));
    }
    SUBCASE("large R leaves only variance and floor terms") {
        c.effective_step = 0.05;
        const double limit = c.universal_const * c.effective_step * c.variance_term() /
                                 c.strong_convexity +
                             c.universal_const * 0.01;
        CHECK(std::abs(bias_floor_rhs(c, 0.1, 20000) - limit) < 1e-12);
    }
    SUBCASE("violated step-size hypothesis names the inequality") {
        c.effective_step = 1.0;
        CHECK_THROWS_WITH_AS(bias_floor_rhs(c, 0.1, 10),
                             doctest::Contains("step-size hypothesis"), ConfigError);
    }
}

TEST_CASE("residual weight error") {
    Vector p(3);
    p << 0.2, 0.5, 0.9;
    const auto same = residual_weight_error(p, p);
    CHECK(same.eps_w == 0.0);

    Vector p_hat(3);
    p_hat << 0.1, 0.5, 0.9;
    const auto off = residual_weight_error(p, p_hat);
    CHECK(off.eps_w == doctest::Approx(1.0));
    CHECK(off.eps_w > 0.0);

    Vector bad(3);
    bad << 0.1, 0.0, 0.5;
    CHECK_THROWS_AS(residual_weight_error(p, bad), InvariantViolation);
}

TEST_CASE("enumeration: oracle IPW hits the population mean exactly") {
    std::vector<Vector> deltas;
    for (double v : {1.0, 2.0, 3.0}) deltas.push_back(Vector::Constant(1, v));
    Vector p(3);
    p << 0.5, 1.0, 0.25;
    EnumerationSpec spec;
    spec.kind = EstimatorKind::OracleIpw;
    spec.estimator_probs = p;
    const Vector e = enumerate_ipw_expectation(deltas, p, spec);
    CHECK(e[0] == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("enumeration: naive estimator is biased under correlated inclusion") {
    std::vector<Vector> deltas;
    for (double v : {1.0, 2.0, 3.0}) deltas.push_back(Vector::Constant(1, v));
    Vector p(3);
    p << 0.9, 0.5, 0.1;
    EnumerationSpec spec;
    spec.kind = EstimatorKind::Naive;
    const Vector e = enumerate_ipw_expectation(deltas, p, spec);
    CHECK(std::abs(e[0] - 2.0) > 0.05);
    CHECK(e[0] < 2.0);  // overweights the low-delta high-p client
}

TEST_CASE("enumeration: naive with identical probabilities matches population mean") {
    std::vector<Vector> deltas;
    for (double v : {1.0, 2.0, 3.0, 6.0}) deltas.push_back(Vector::Constant(1, v));
    Vector p = Vector::Constant(4, 0.4);
    EnumerationSpec spec;
    spec.kind = EstimatorKind::Naive;
    const Vector e = enumerate_ipw_expectation(deltas, p, spec);
    // Conditioned on a nonempty round, equal probabilities keep every client
    // exchangeable, so the expectation is the population mean.
    CHECK(e[0] == doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("enumeration guards") {
    std::vector<Vector> deltas(21, Vector::Ones(1));
    Vector p = Vector::Constant(21, 0.5);
    EnumerationSpec spec;
    spec.kind = EstimatorKind::Naive;
    CHECK_THROWS_WITH_AS(enumerate_ipw_expectation(deltas, p, spec),
                         doctest::Contains("Monte Carlo"), ConfigError);
}

TEST_CASE("parallel enumeration matches the serial reference") {
    rng::Stream s(13, "enum-par");
    std::vector<Vector> deltas;
    const int n = 12;
    Vector p(n);
    for (int i = 0; i < n; ++i) {
        Vector d(3);
        d << s.next_normal(), s.next_normal(), s.next_normal();
        deltas.push_back(d);
        p[i] = 0.05 + 0.9 * s.next_uniform();
    }
    for (auto kind : {EstimatorKind::OracleIpw, EstimatorKind::Naive}) {
        EnumerationSpec spec;
        spec.kind = kind;
        spec.estimator_probs = p;
        const Vector a = enumerate_ipw_expectation(deltas, p, spec);
        const Vector b = enumerate_ipw_expectation_serial(deltas, p, spec);
        CHECK((a - b).lpNorm<Eigen::Infinity>() < 1e-14);
    }
}

TEST_CASE("oracle enumeration unbiased for random instances up to n=10") {
    rng::Stream s(21, "enum-prop");
    for (int inst = 0; inst < 25; ++inst) {
        const int n = 2 + static_cast<int>(s.next_index(9));
        std::vector<Vector> deltas;
        Vector p(n);
        Vector mean = Vector::Zero(2);
        for (int i = 0; i < n; ++i) {
            Vector d(2);
            d << s.next_normal(), s.next_normal();
            deltas.push_back(d);
            mean += d;
            p[i] = 0.1 + 0.8 * s.next_uniform();
        }
        mean /= n;
        EnumerationSpec spec;
        spec.kind = EstimatorKind::OracleIpw;
        spec.estimator_probs = p;
        CHECK((enumerate_ipw_expectation(deltas, p, spec) - mean).lpNorm<Eigen::Infinity>() <
              1e-12);
    }
}
