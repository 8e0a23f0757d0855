#ifndef HESSMATCH_ERRORS_HPP
#define HESSMATCH_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace hm {

// Numerical failures (CLI exit code 2)
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct NotPositiveDefinite : NumericalError { using NumericalError::NumericalError; };
struct NoConvergence : NumericalError { using NumericalError::NumericalError; };
struct DivergentGeometry : NumericalError { using NumericalError::NumericalError; };
struct StepTooLarge : NumericalError { using NumericalError::NumericalError; };
struct SingularGeometry : NumericalError { using NumericalError::NumericalError; };
struct NonFiniteLoss : NumericalError { using NumericalError::NumericalError; };
struct NonFiniteState : NumericalError { using NumericalError::NumericalError; };
struct ZeroVector : NumericalError { using NumericalError::NumericalError; };

// Contract violations (CLI exit code 1)
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : ValidationError { using ValidationError::ValidationError; };
struct DimensionTooLarge : ValidationError { using ValidationError::ValidationError; };
struct EmptyEnsemble : ValidationError { using ValidationError::ValidationError; };
struct EmptyBatch : ValidationError { using ValidationError::ValidationError; };
struct EmptyInput : ValidationError { using ValidationError::ValidationError; };
struct MissingResidual : ValidationError { using ValidationError::ValidationError; };
struct StoreMismatch : ValidationError { using ValidationError::ValidationError; };
struct TrajectoryTooShort : ValidationError { using ValidationError::ValidationError; };
struct UnsupportedMap : ValidationError { using ValidationError::ValidationError; };
struct ParseError : ValidationError { using ValidationError::ValidationError; };
struct HashMismatch : ValidationError { using ValidationError::ValidationError; };

}  // namespace hm

#endif
