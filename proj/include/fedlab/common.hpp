#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace fedlab {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DimensionError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvariantViolation : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Linear predictors are clamped before the logistic link so probabilities stay
// strictly inside (0,1).
inline double sigmoid(double s) {
    if (s > 30.0) s = 30.0;
    if (s < -30.0) s = -30.0;
    return 1.0 / (1.0 + std::exp(-s));
}

inline double logit(double p) { return std::log(p / (1.0 - p)); }

// log(1 + exp(s)) without overflow at large |s|
inline double log1p_exp(double s) {
    if (s > 0.0) return s + std::log1p(std::exp(-s));
    return std::log1p(std::exp(s));
}

}  // namespace fedlab
