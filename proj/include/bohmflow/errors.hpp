#pragma once

#include <stdexcept>
#include <string>

namespace bohmflow {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Mode order beyond the supported normalization range.
struct CapacityError : Error { using Error::Error; };

/// Evaluation point inside the node guard region (|Psi|^2 below threshold).
struct NearNodeError : Error { using Error::Error; };

/// Step control could not keep the trajectory clear of a node.
struct NodeCollisionError : Error { using Error::Error; };

/// Error control demanded a step below min_step.
struct StepUnderflowError : Error { using Error::Error; };

/// Nodal direction undefined (all defining sines vanish).
struct DegenerateTimeError : Error { using Error::Error; };

/// Newton iteration exhausted without reaching the residual target.
struct NoConvergenceError : Error { using Error::Error; };

/// X-point closed form undefined at these parameters.
struct DegenerateXPointError : Error { using Error::Error; };

/// Manifold stability classification inconclusive (near a transition).
struct ClassificationAmbiguousError : Error { using Error::Error; };

struct NonPositiveDeviationError : Error { using Error::Error; };

struct UnknownExperimentError : Error { using Error::Error; };

/// Power-law fit impossible (fewer than two distinct abscissae).
struct DegenerateFitError : Error { using Error::Error; };

/// Config or state-file schema violation.
struct ConfigError : Error { using Error::Error; };

struct PreconditionError : Error { using Error::Error; };

}  // namespace bohmflow
