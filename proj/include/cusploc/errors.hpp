#pragma once

#include <stdexcept>
#include <string>

namespace cusploc {

/// Bad numeric argument (e.g. non-positive propagation speed).
struct invalid_parameter_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Coincident points, collinear detector sets and similar singular configurations.
struct degenerate_geometry_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Evaluation outside the supported time/space region.
struct domain_error : std::domain_error {
    using std::domain_error::domain_error;
};

/// Scenario failed one of the model conditions.
struct validation_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Bad experiment configuration (empty arrival window, malformed grid, ...).
struct configuration_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A covariance factorization failed even after jitter.
struct conditioning_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct io_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace cusploc
