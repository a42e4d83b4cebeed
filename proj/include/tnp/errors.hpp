#pragma once

#include <stdexcept>
#include <string>

namespace tnp {

// Input or configuration problems. The CLI maps these to exit code 2.
class ValidationError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Failures of the numerics at run time. The CLI maps these to exit code 3.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

#define TNP_DEFINE_ERROR(Name, Base)                                           \
  class Name : public Base {                                                   \
  public:                                                                      \
    explicit Name(const std::string& what) : Base(#Name ": " + what) {}        \
  };

TNP_DEFINE_ERROR(NonHermitianInput, ValidationError)
TNP_DEFINE_ERROR(DimensionMismatch, ValidationError)
TNP_DEFINE_ERROR(InvalidParameter, ValidationError)
TNP_DEFINE_ERROR(EmptyDecomposition, ValidationError)
TNP_DEFINE_ERROR(ConfigError, ValidationError)

TNP_DEFINE_ERROR(NonFiniteState, NumericalError)
TNP_DEFINE_ERROR(SingularMap, NumericalError)
TNP_DEFINE_ERROR(NegativeProbability, NumericalError)
TNP_DEFINE_ERROR(StepTooLarge, NumericalError)
TNP_DEFINE_ERROR(ZeroNorm, NumericalError)
TNP_DEFINE_ERROR(NoSourceState, NumericalError)
TNP_DEFINE_ERROR(NegativeSource, NumericalError)
TNP_DEFINE_ERROR(CutoffLeakage, NumericalError)

#undef TNP_DEFINE_ERROR

} // namespace tnp
