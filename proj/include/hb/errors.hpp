#pragma once

#include <stdexcept>
#include <string>

namespace hb {

// Config/schema violations; the CLI maps these to exit code 2.
struct SchemaError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Aborted numerics (boundary leak, admissibility drift, quadrature
// non-convergence, ...); the CLI maps these to exit code 3.
struct NumericalError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Velocity/quantum-potential query too close to a node of the wave function.
// Carries the scaled amplitude eps^{d/4} |psi| at the query point. Path
// integration catches this and marks the path node_abort; it is data.
struct NodeProximityError : NumericalError {
    NodeProximityError(double scaled_amp_, double t_)
        : NumericalError("wave amplitude below node floor"), scaled_amp(scaled_amp_), t(t_) {}
    double scaled_amp;
    double t;
};

}  // namespace hb
