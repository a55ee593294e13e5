#pragma once

#include <stdexcept>
#include <string>

namespace cotrain {

// Malformed input files (CSV rows, graph edge lists, JSON models).
struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Inconsistent or out-of-range configuration values.
struct ConfigError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// A split or construction that cannot be realized with the given counts.
struct InfeasibleError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Inputs that violate the preconditions of an analysis (impure edge in a
// "perfect" graph, missing truth labels, empty support).
struct PreconditionError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// Numerical failure, e.g. a singular propagation system.
struct NumericError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Arguments outside the mathematical domain of a formula.
struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

// An evaluation over an empty sample or a region with no mass.
struct EvaluationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// The requested quantity needs information the data does not carry, such as
// true posteriors on a real dataset.
struct CapabilityError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace cotrain
